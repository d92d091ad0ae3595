//! PCA, the linear baseline the layer is compared against.

use faer::Side;

use crate::dataset::DescriptorSet;
use crate::error::{ImeError, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `n x m`, orthonormal columns by descending variance.
    pub components: Matrix,
    /// Variance along each component, non-increasing.
    pub explained: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.cols()
    }

    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for ((&xi, mu), row) in x.iter().zip(&self.mean).zip(self.components.row_iter()) {
            let c = xi - mu;
            out.iter_mut().zip(row).for_each(|(o, w)| *o += c * w);
        }
    }

    /// Maps coordinates back into descriptor space.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        self.components
            .row_iter()
            .zip(&self.mean)
            .map(|(row, mu)| mu + row.iter().zip(coords).map(|(w, c)| w * c).sum::<f64>())
            .collect()
    }
}

/// Principal components of the mean-centered training set, from the
/// eigendecomposition of the `n x n` sample covariance.
pub fn pca_fit(train: &DescriptorSet, m: usize) -> Result<PcaModel> {
    let (d, n) = (train.len(), train.dim());
    if m == 0 || m > n.min(d) {
        return Err(ImeError::invalid(format!(
            "PCA dimension must be in 1..={} for {d} points of dimension {n}, got {m}",
            n.min(d)
        )));
    }
    let mut mean = vec![0.0; n];
    for row in train.vectors().row_iter() {
        mean.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    mean.iter_mut().for_each(|a| *a /= d as f64);

    let centered = Matrix::from_fn(d, n, |i, j| train.vectors()[(i, j)] - mean[j]).to_faer();
    let denom = (d.max(2) - 1) as f64;
    let cov = (centered.transpose() * &centered) * faer::Scale(1.0 / denom);
    let eig = cov
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| ImeError::Numerical(format!("covariance eigendecomposition failed: {e:?}")))?;
    let values = eig.S().column_vector();
    let vectors = eig.U();

    // Ascending order from the solver; take the top m from the end.
    let mut components = Matrix::zeros(n, m);
    let mut explained = Vec::with_capacity(m);
    for p in 0..m {
        let src = n - 1 - p;
        explained.push(values[src].max(0.0));
        let col: Vec<f64> = (0..n).map(|i| vectors[(i, src)]).collect();
        let pivot = col
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in col.iter().enumerate() {
            components[(i, p)] = sign * v;
        }
    }
    Ok(PcaModel {
        mean,
        components,
        explained,
    })
}

/// `(x - mean) * components` for every row.
pub fn pca_apply(model: &PcaModel, set: &DescriptorSet) -> Result<Matrix> {
    if set.dim() != model.input_dim() {
        return Err(ImeError::invalid(format!(
            "set has dimension {}, PCA model expects {}",
            set.dim(),
            model.input_dim()
        )));
    }
    let mut out = Matrix::zeros(set.len(), model.output_dim());
    for i in 0..set.len() {
        model.project_into(set.row(i), out.row_mut(i));
    }
    Ok(out)
}
