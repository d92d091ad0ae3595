//! Similarity conversion, spectral embedding and the iterative manifold
//! embedding loop.

mod conversion;
mod spectral;

use crate::dataset::DescriptorSet;
use crate::error::{ImeError, Result};
use crate::graph::{
    build_knn_graph, geodesics, pairwise_euclidean_rows, second_order_graph, DistanceMatrix, GeodesicBackend,
    WeightedGraph,
};
use crate::matrix::Matrix;

pub(crate) use conversion::row_means;
pub use conversion::{convert_similarity, corrected_similarity, double_center, Conversion, ConversionKind};
pub use spectral::{spectral_embed, spectral_embed_with, EigenBackend, Embedding, DENSE_EIGEN_LIMIT};

/// Parameters of the iterative embedding. One `k` and one `omega` per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ImeConfig {
    pub iterations: usize,
    pub k_per_iter: Vec<usize>,
    pub omega_per_iter: Vec<f64>,
    pub target_dim: usize,
    pub conversion: ConversionKind,
    pub use_second_order: bool,
    pub geodesic_backend: GeodesicBackend,
    pub eigen_backend: EigenBackend,
}

pub const DEFAULT_ITERATIONS: usize = 2;
pub const DEFAULT_K: usize = 10;
pub const DEFAULT_OMEGA: f64 = 2.0;
pub const DEFAULT_TARGET_DIM: usize = 2;

impl Default for ImeConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            k_per_iter: vec![DEFAULT_K; DEFAULT_ITERATIONS],
            omega_per_iter: vec![DEFAULT_OMEGA; DEFAULT_ITERATIONS],
            target_dim: DEFAULT_TARGET_DIM,
            conversion: ConversionKind::t_distribution(),
            use_second_order: true,
            geodesic_backend: GeodesicBackend::FloydWarshall,
            eigen_backend: EigenBackend::Auto,
        }
    }
}

impl ImeConfig {
    /// Same `k` and `omega` for every iteration.
    pub fn uniform(iterations: usize, k: usize, omega: f64, target_dim: usize) -> Self {
        Self {
            iterations,
            k_per_iter: vec![k; iterations],
            omega_per_iter: vec![omega; iterations],
            target_dim,
            ..Self::default()
        }
    }

    /// Classical IsoMap: one pass, no correction, first-order graph,
    /// double-centered quadratic conversion.
    pub fn isomap(k: usize, target_dim: usize) -> Self {
        Self {
            conversion: ConversionKind::quadratic(true),
            use_second_order: false,
            ..Self::uniform(1, k, 0.0, target_dim)
        }
    }

    /// Checks internal consistency and, when `items` is given, feasibility
    /// for a database of that many items.
    pub fn validate(&self, items: Option<usize>) -> Result<()> {
        if self.iterations == 0 {
            return Err(ImeError::invalid("iterations must be positive"));
        }
        if self.k_per_iter.len() != self.iterations || self.omega_per_iter.len() != self.iterations {
            return Err(ImeError::invalid(format!(
                "need one k and one omega per iteration: iterations={}, k has {}, omega has {}",
                self.iterations,
                self.k_per_iter.len(),
                self.omega_per_iter.len()
            )));
        }
        if self.k_per_iter.contains(&0) {
            return Err(ImeError::invalid("every k must be positive"));
        }
        if let Some(w) = self.omega_per_iter.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(ImeError::invalid(format!("omega must be non-negative, got {w}")));
        }
        if self.target_dim == 0 {
            return Err(ImeError::invalid("target dimension must be positive"));
        }
        if let Some(d) = items {
            if self.target_dim > d {
                return Err(ImeError::invalid(format!(
                    "target dimension {} exceeds the number of items {d}",
                    self.target_dim
                )));
            }
            if let Some(k) = self.k_per_iter.iter().find(|&&k| k + 1 > d) {
                return Err(ImeError::invalid(format!(
                    "k={k} needs at least {} items, have {d}",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Everything one iteration produced that a graph-linked query needs.
#[derive(Debug, Clone)]
pub struct ImeStage {
    /// Representation this iteration started from (rows = items).
    pub input: Matrix,
    pub graph: WeightedGraph,
    pub geodesic: DistanceMatrix,
    pub embedding: Embedding,
    pub k: usize,
    pub omega: f64,
    pub conversion: ConversionKind,
    /// Row means of the uncorrected-by-centering similarity, kept when the
    /// conversion is centered so query vectors can be centered consistently.
    pub similarity_row_means: Option<Vec<f64>>,
}

/// Result of a traced fit: the final embedding and every stage.
#[derive(Debug, Clone)]
pub struct ImeRun {
    pub embedding: Embedding,
    pub stages: Vec<ImeStage>,
}

/// Iterative manifold embedding of a descriptor set.
pub fn ime_fit(set: &DescriptorSet, config: &ImeConfig) -> Result<Embedding> {
    run(set, config, false).map(|r| r.embedding)
}

/// As [`ime_fit`], keeping the per-iteration graphs and geodesics.
pub fn ime_fit_traced(set: &DescriptorSet, config: &ImeConfig) -> Result<ImeRun> {
    run(set, config, true)
}

fn run(set: &DescriptorSet, config: &ImeConfig, keep: bool) -> Result<ImeRun> {
    config.validate(Some(set.len()))?;
    let mut representation = set.vectors().clone();
    let mut stages = Vec::new();
    let mut last = None;
    for it in 0..config.iterations {
        let k = config.k_per_iter[it];
        let omega = config.omega_per_iter[it];
        let (embedding, stage) = embed_once(&representation, config, k, omega, keep)?;
        log::debug!("iteration {}: embedded into {} dimensions", it + 1, embedding.dim());
        let next = embedding.coords.clone();
        if let Some(stage) = stage {
            stages.push(stage);
        }
        representation = next;
        last = Some(embedding);
    }
    Ok(ImeRun {
        embedding: last.expect("at least one iteration"),
        stages,
    })
}

fn embed_once(
    input: &Matrix,
    config: &ImeConfig,
    k: usize,
    omega: f64,
    keep: bool,
) -> Result<(Embedding, Option<ImeStage>)> {
    let euclidean = pairwise_euclidean_rows(input);
    let first = build_knn_graph(&euclidean, k)?;
    let graph = if config.use_second_order {
        second_order_graph(&first)?
    } else {
        first
    };
    let geodesic = geodesics(&graph, config.geodesic_backend);

    let conv = config.conversion;
    if conv.kind == Conversion::Quadratic && !conv.center && omega == 0.0 && geodesic.unreachable_pairs() > 0 {
        return Err(ImeError::Disconnected(format!(
            "{} unreachable pairs and no euclidean correction (omega = 0) under quadratic conversion",
            geodesic.unreachable_pairs()
        )));
    }
    let mut similarity = corrected_similarity(&geodesic, &euclidean, omega, ConversionKind { center: false, ..conv })?;
    drop(euclidean);
    let row_means = (keep && conv.centers()).then(|| row_means(&similarity));
    if conv.centers() {
        double_center(&mut similarity);
    }
    let embedding = spectral_embed_with(&similarity, config.target_dim.min(input.rows()), config.eigen_backend)?;
    drop(similarity);

    let stage = keep.then(|| ImeStage {
        input: input.clone(),
        graph,
        geodesic,
        embedding: embedding.clone(),
        k,
        omega,
        conversion: conv,
        similarity_row_means: row_means,
    });
    Ok((embedding, stage))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_swiss_roll;
    use crate::graph::{build_knn_graph, geodesic_distances, pairwise_euclidean, second_order_graph};

    #[test]
    fn config_validation() {
        assert!(ImeConfig::default().validate(Some(100)).is_ok());
        let mut c = ImeConfig::default();
        c.k_per_iter.pop();
        assert!(c.validate(None).is_err());
        assert!(ImeConfig::uniform(1, 10, 2.0, 50).validate(Some(20)).is_err());
        assert!(ImeConfig::uniform(1, 10, 2.0, 2).validate(Some(10)).is_err());
        assert!(ImeConfig::uniform(1, 9, 2.0, 2).validate(Some(10)).is_ok());
        assert!(ImeConfig::uniform(1, 5, -1.0, 2).validate(None).is_err());
        assert!(ImeConfig::uniform(0, 5, 1.0, 2).validate(None).is_err());
    }

    #[test]
    fn single_iteration_is_the_composition() {
        let roll = generate_swiss_roll(120, 0.0, 2).unwrap();
        let config = ImeConfig::uniform(1, 6, 2.0, 3);
        let fitted = ime_fit(&roll.set, &config).unwrap();

        let euc = pairwise_euclidean(&roll.set);
        let g = second_order_graph(&build_knn_graph(&euc, 6).unwrap()).unwrap();
        let geo = geodesic_distances(&g);
        let s = corrected_similarity(&geo, &euc, 2.0, ConversionKind::t_distribution()).unwrap();
        let manual = spectral_embed(&s, 3).unwrap();
        assert_eq!(fitted, manual);
    }

    #[test]
    fn deterministic() {
        let roll = generate_swiss_roll(150, 0.05, 1).unwrap();
        let config = ImeConfig::default();
        assert_eq!(
            ime_fit(&roll.set, &config).unwrap(),
            ime_fit(&roll.set, &config).unwrap()
        );
    }

    #[test]
    fn quadratic_without_correction_rejects_disconnected_graph() {
        // Two far-apart clusters: a 2-NN graph cannot link them.
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push([i as f64 * 0.1, 0.0]);
            rows.push([100.0 + i as f64 * 0.1, 0.0]);
        }
        let set = DescriptorSet::from_rows(&rows).unwrap();
        let mut config = ImeConfig::uniform(1, 2, 0.0, 2);
        config.use_second_order = false;
        config.conversion = ConversionKind::quadratic(false);
        assert!(matches!(ime_fit(&set, &config), Err(ImeError::Disconnected(_))));

        config.omega_per_iter = vec![1.0];
        assert!(!matches!(ime_fit(&set, &config), Err(ImeError::Disconnected(_))));
        config.conversion = ConversionKind::t_distribution();
        config.omega_per_iter = vec![0.0];
        assert!(ime_fit(&set, &config).is_ok());
    }

    #[test]
    fn traced_run_keeps_stages() {
        let roll = generate_swiss_roll(100, 0.0, 3).unwrap();
        let run = ime_fit_traced(&roll.set, &ImeConfig::default()).unwrap();
        assert_eq!(run.stages.len(), 2);
        assert_eq!(run.stages[0].input, *roll.set.vectors());
        assert_eq!(run.stages[1].input, run.stages[0].embedding.coords);
        assert_eq!(run.stages[1].embedding, run.embedding);
    }
}
