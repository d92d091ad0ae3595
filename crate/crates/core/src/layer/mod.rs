//! The IME layer: a single linear map fit by closed-form ridge regression
//! onto the iterative embedding, plus the slow graph-linked query path it
//! replaces.

mod io;
mod query;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use sha2::{Digest, Sha256};

use crate::dataset::DescriptorSet;
use crate::embedding::Embedding;
use crate::error::{ImeError, Result};
use crate::matrix::Matrix;

pub use io::{decode_layer, encode_layer, load_layer, save_layer, LAYER_MAGIC, LAYER_VERSION};
pub use query::{embed_queries_via_graph, embed_query_via_graph, project_similarity, GraphQueryContext};

/// Relative normal-equation residual every fitted layer must meet.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Where a layer came from: the serialized pipeline config and a SHA-256
/// over the training descriptors plus that config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config: String,
    pub fingerprint: [u8; 32],
}

impl Provenance {
    pub fn new(train: &DescriptorSet, config: impl Into<String>) -> Self {
        let config = config.into();
        Self {
            fingerprint: fingerprint(train, &config),
            config,
        }
    }

    pub fn matches(&self, train: &DescriptorSet) -> bool {
        fingerprint(train, &self.config) == self.fingerprint
    }

    pub fn fingerprint_hex(&self) -> String {
        self.fingerprint.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn fingerprint(train: &DescriptorSet, config: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    train.feed_hasher(&mut hasher);
    hasher.update((config.len() as u64).to_le_bytes());
    hasher.update(config.as_bytes());
    hasher.finalize().into()
}

/// `n x m` linear map applied as `y = M^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImeLayer {
    weights: Matrix,
    alpha: f64,
    provenance: Provenance,
}

impl ImeLayer {
    pub fn from_parts(weights: Matrix, alpha: f64, provenance: Provenance) -> Result<Self> {
        if !weights.is_finite() {
            return Err(ImeError::invalid("layer weights must be finite"));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(ImeError::invalid(format!("alpha must be non-negative, got {alpha}")));
        }
        Ok(Self {
            weights,
            alpha,
            provenance,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    /// Writes `M^T x` into `out`. One `n x m` pass, no training data involved.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.input_dim());
        debug_assert_eq!(out.len(), self.output_dim());
        out.fill(0.0);
        for (&xi, row) in x.iter().zip(self.weights.row_iter()) {
            if xi != 0.0 {
                out.iter_mut().zip(row).for_each(|(o, w)| *o += xi * w);
            }
        }
    }

    pub fn apply_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(ImeError::invalid(format!(
                "query has dimension {}, layer expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut out = vec![0.0; self.output_dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }
}

/// Maps every query row through the layer.
pub fn apply_layer(layer: &ImeLayer, queries: &DescriptorSet) -> Result<Matrix> {
    if queries.dim() != layer.input_dim() {
        return Err(ImeError::invalid(format!(
            "queries have dimension {}, layer expects {}",
            queries.dim(),
            layer.input_dim()
        )));
    }
    let mut out = Matrix::zeros(queries.len(), layer.output_dim());
    for i in 0..queries.len() {
        layer.apply_into(queries.row(i), out.row_mut(i));
    }
    Ok(out)
}

/// Fits the layer onto an embedding of the same items.
pub fn fit_layer(train: &DescriptorSet, targets: &Embedding, alpha: f64) -> Result<ImeLayer> {
    fit_layer_to(train, &targets.coords, alpha)
}

/// Ridge regression `M = (X^T X + alpha I)^{-1} X^T Y` with items as the
/// rows of `X` (d x n) and `Y` (d x m), solved by Cholesky factorization.
pub fn fit_layer_to(train: &DescriptorSet, targets: &Matrix, alpha: f64) -> Result<ImeLayer> {
    if targets.rows() != train.len() {
        return Err(ImeError::invalid(format!(
            "{} training items but {} target rows",
            train.len(),
            targets.rows()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(ImeError::invalid(format!("alpha must be non-negative, got {alpha}")));
    }
    let x = train.vectors().to_faer();
    let y = targets.to_faer();
    let n = train.dim();
    let mut normal = x.transpose() * &x;
    for i in 0..n {
        normal[(i, i)] += alpha;
    }
    let rhs = x.transpose() * &y;

    let singular = || {
        ImeError::Numerical(if alpha == 0.0 {
            "normal matrix X^T X is singular; use alpha > 0".to_owned()
        } else {
            "ridge normal matrix is not positive definite".to_owned()
        })
    };
    let llt = normal.llt(Side::Lower).map_err(|_| singular())?;
    let diag: Vec<f64> = (0..n).map(|i| llt.L()[(i, i)]).collect();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo * lo <= n as f64 * f64::EPSILON * hi * hi {
        return Err(singular());
    }

    let mut weights = llt.solve(&rhs);
    let mut residual = relative_residual(&normal, &weights, &rhs);
    if residual > 1e-12 {
        // One step of iterative refinement.
        let correction = llt.solve(&(&rhs - &normal * &weights));
        weights += correction;
        residual = relative_residual(&normal, &weights, &rhs);
    }
    if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
        return Err(ImeError::Numerical(format!(
            "ridge solve residual {residual:e} exceeds {RESIDUAL_TOLERANCE:e}; increase alpha"
        )));
    }
    ImeLayer::from_parts(Matrix::from_faer(weights.as_ref()), alpha, Provenance::new(train, ""))
}

fn relative_residual(a: &Mat<f64>, m: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let r = (a * m - b).norm_l2();
    let scale = b.norm_l2();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

/// `||(X^T X + alpha I) M - X^T Y||_F / ||X^T Y||_F` for a fitted layer.
pub fn normal_equation_residual(layer: &ImeLayer, train: &DescriptorSet, targets: &Matrix) -> f64 {
    let x = train.vectors().to_faer();
    let mut normal = x.transpose() * &x;
    for i in 0..train.dim() {
        normal[(i, i)] += layer.alpha;
    }
    relative_residual(&normal, &layer.weights.to_faer(), &(x.transpose() * targets.to_faer()))
}
