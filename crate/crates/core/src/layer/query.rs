//! Out-of-sample embedding by linking a query into the training graph.
//!
//! For a multi-iteration run the query passes through every stage in turn:
//! each stage links it into that stage's graph in the representation the
//! stage was built from, and projects onto that stage's eigenvectors.

use crate::dataset::DescriptorSet;
use crate::embedding::{Conversion, ConversionKind, Embedding, ImeRun, ImeStage};
use crate::error::{ImeError, Result};
use crate::matrix::{squared_euclidean, Matrix};

#[derive(Debug, Clone)]
struct QueryStage {
    points: Matrix,
    geodesic: Matrix,
    embedding: Embedding,
    conversion: ConversionKind,
    omega: f64,
    geo_floor: f64,
    euc_floor: f64,
    /// Row means and grand mean of the uncentered training similarity.
    centering: Option<(Vec<f64>, f64)>,
}

/// Everything the graph-linked query needs, taken from one traced fit.
#[derive(Debug, Clone)]
pub struct GraphQueryContext {
    stages: Vec<QueryStage>,
    k: usize,
    fingerprint: [u8; 32],
}

impl GraphQueryContext {
    /// `k` is the number of training points each query links to.
    pub fn from_run(train: &DescriptorSet, run: &ImeRun, k: usize) -> Result<Self> {
        let first = run
            .stages
            .first()
            .ok_or_else(|| ImeError::invalid("run has no recorded stages; fit with ime_fit_traced"))?;
        if first.input != *train.vectors() {
            return Err(ImeError::invalid("traced run was not fitted on this training set"));
        }
        if k == 0 || k > train.len() {
            return Err(ImeError::invalid(format!(
                "query k must be in 1..={}, got {k}",
                train.len()
            )));
        }
        let stages = run.stages.iter().map(QueryStage::from_stage).collect::<Result<_>>()?;
        Ok(Self {
            stages,
            k,
            fingerprint: train.fingerprint(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn training_size(&self) -> usize {
        self.stages[0].points.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.stages[0].points.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.stages.last().map_or(0, |s| s.embedding.dim())
    }

    pub fn matches(&self, train: &DescriptorSet) -> bool {
        train.fingerprint() == self.fingerprint
    }
}

impl QueryStage {
    fn from_stage(stage: &ImeStage) -> Result<Self> {
        let conv = stage.conversion;
        let centering = if conv.centers() {
            let means = stage
                .similarity_row_means
                .clone()
                .ok_or_else(|| ImeError::invalid("centered stage is missing its similarity row means"))?;
            let grand = means.iter().sum::<f64>() / means.len() as f64;
            Some((means, grand))
        } else {
            None
        };
        // The euclidean floor only matters for the quadratic cap, which needs
        // the most negative finite euclidean similarity of the training set.
        let euc_floor = match conv.kind {
            Conversion::TDistribution => 0.0,
            Conversion::Quadratic => {
                let pts = &stage.input;
                let mut worst = 0.0f64;
                for i in 0..pts.rows() {
                    for j in i + 1..pts.rows() {
                        worst = worst.min(conv.apply(squared_euclidean(pts.row(i), pts.row(j)).sqrt()));
                    }
                }
                worst
            }
        };
        Ok(Self {
            points: stage.input.clone(),
            geodesic: stage.geodesic.values().clone(),
            embedding: stage.embedding.clone(),
            conversion: conv,
            omega: stage.omega,
            geo_floor: conv.floor_of(&stage.geodesic),
            euc_floor,
            centering,
        })
    }

    fn embed(&self, query: &[f64], k: usize) -> Result<Vec<f64>> {
        let d = self.points.rows();
        let euclid: Vec<f64> = self
            .points
            .row_iter()
            .map(|p| squared_euclidean(p, query).sqrt())
            .collect();

        let mut order: Vec<usize> = (0..d).collect();
        let k = k.min(d);
        let by_distance = |a: &usize, b: &usize| euclid[*a].total_cmp(&euclid[*b]).then(a.cmp(b));
        if k < d {
            order.select_nth_unstable_by(k - 1, by_distance);
        }
        let links = &order[..k];

        let mut geo = vec![f64::INFINITY; d];
        for &l in links {
            let e = euclid[l];
            for (g, &through) in geo.iter_mut().zip(self.geodesic.row(l)) {
                let candidate = e + through;
                if candidate < *g {
                    *g = candidate;
                }
            }
        }

        let conv = self.conversion;
        let unreachable = geo.iter().filter(|g| g.is_infinite()).count();
        if unreachable > 0 && conv.kind == Conversion::Quadratic && !conv.center && self.omega == 0.0 {
            return Err(ImeError::Disconnected(format!(
                "query cannot reach {unreachable} training points and there is no euclidean correction (omega = 0)"
            )));
        }
        let mut s: Vec<f64> = geo
            .iter()
            .zip(&euclid)
            .map(|(&g, &e)| {
                let mut v = conv.apply_with_floor(g, self.geo_floor);
                if self.omega != 0.0 {
                    v += self.omega * conv.apply_with_floor(e, self.euc_floor);
                }
                v
            })
            .collect();
        if let Some((means, grand)) = &self.centering {
            let own = s.iter().sum::<f64>() / d as f64;
            s.iter_mut().zip(means).for_each(|(v, r)| *v += grand - own - r);
        }
        Ok(project_similarity(&self.embedding, &s))
    }
}

/// Out-of-sample projection `s^T v_p / sqrt(lambda_p)` for each retained
/// eigenpair. Reproduces `coords` row `i` when `s` is row `i` of a similarity
/// the embedding reconstructs exactly.
pub fn project_similarity(embedding: &Embedding, s: &[f64]) -> Vec<f64> {
    let m = embedding.dim();
    let mut out = vec![0.0; m];
    for (&sj, v) in s.iter().zip(embedding.eigenvectors.row_iter()) {
        if sj != 0.0 {
            out.iter_mut().zip(v).for_each(|(o, vp)| *o += sj * vp);
        }
    }
    out.iter_mut()
        .zip(&embedding.eigenvalues)
        .for_each(|(o, l)| *o /= l.sqrt());
    out
}

/// Embeds one query by linking it into the training graph of every stage.
pub fn embed_query_via_graph(ctx: &GraphQueryContext, query: &[f64]) -> Result<Vec<f64>> {
    if query.len() != ctx.input_dim() {
        return Err(ImeError::invalid(format!(
            "query has dimension {}, training descriptors have {}",
            query.len(),
            ctx.input_dim()
        )));
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(ImeError::invalid("query contains non-finite values"));
    }
    let mut current = query.to_vec();
    for stage in &ctx.stages {
        current = stage.embed(&current, ctx.k)?;
    }
    Ok(current)
}

/// Batch form of [`embed_query_via_graph`].
pub fn embed_queries_via_graph(ctx: &GraphQueryContext, queries: &DescriptorSet) -> Result<Matrix> {
    let mut out = Matrix::zeros(queries.len(), ctx.output_dim());
    for i in 0..queries.len() {
        let row = embed_query_via_graph(ctx, queries.row(i))?;
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok(out)
}
