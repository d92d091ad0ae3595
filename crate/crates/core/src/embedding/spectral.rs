//! Top eigenpairs of a symmetric similarity matrix and the scaled embedding
//! `coords(i, p) = sqrt(lambda_p) * v_p(i)`.

use faer::Side;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ImeError, Result};
use crate::matrix::{dot, Matrix};

/// Largest problem handed to the dense solver under [`EigenBackend::Auto`].
pub const DENSE_EIGEN_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenBackend {
    /// Dense up to [`DENSE_EIGEN_LIMIT`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `d x m_eff`; row `i` is the embedded representation of item `i`.
    pub coords: Matrix,
    /// Retained eigenvalues, strictly positive, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `d x m_eff`; column `p` is the unit eigenvector for `eigenvalues[p]`.
    pub eigenvectors: Matrix,
    /// The `m` that was asked for. Larger than `dim()` when the spectrum had
    /// fewer positive eigenvalues.
    pub requested_dim: usize,
}

impl Embedding {
    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    /// Effective embedding dimension.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn was_truncated(&self) -> bool {
        self.dim() < self.requested_dim
    }

    fn from_pairs(eigenvalues: Vec<f64>, eigenvectors: Matrix, requested_dim: usize) -> Self {
        let scale: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        let mut coords = eigenvectors.clone();
        for i in 0..coords.rows() {
            coords.row_mut(i).iter_mut().zip(&scale).for_each(|(c, s)| *c *= s);
        }
        Self {
            coords,
            eigenvalues,
            eigenvectors,
            requested_dim,
        }
    }
}

pub fn spectral_embed(similarity: &Matrix, m: usize) -> Result<Embedding> {
    spectral_embed_with(similarity, m, EigenBackend::Auto)
}

/// Top-`m` algebraic eigenpairs; only strictly positive eigenvalues are kept.
/// Each eigenvector is signed so that its largest-magnitude entry is positive.
pub fn spectral_embed_with(similarity: &Matrix, m: usize, backend: EigenBackend) -> Result<Embedding> {
    let d = similarity.rows();
    if similarity.cols() != d || d == 0 {
        return Err(ImeError::invalid("similarity matrix must be square and non-empty"));
    }
    if m == 0 || m > d {
        return Err(ImeError::invalid(format!(
            "embedding dimension must satisfy 1 <= m <= {d}, got {m}"
        )));
    }
    if !similarity.is_finite() {
        return Err(ImeError::Numerical("similarity matrix has non-finite entries".into()));
    }
    let asymmetry = max_asymmetry(similarity);
    let scale = similarity.as_slice().iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if asymmetry > 1e-8 * scale {
        return Err(ImeError::invalid(format!(
            "similarity matrix is not symmetric (max |S - S^T| = {asymmetry:e})"
        )));
    }

    let use_dense = match backend {
        EigenBackend::Dense => true,
        EigenBackend::Lanczos => false,
        // Krylov subspaces would be nearly as large as the matrix anyway.
        EigenBackend::Auto => d <= DENSE_EIGEN_LIMIT || 4 * m >= d,
    };
    let (values, vectors, spread) = if use_dense {
        dense_top(similarity, m)?
    } else if asymmetry == 0.0 {
        lanczos_top(similarity, m)?
    } else {
        let sym = Matrix::from_fn(d, d, |i, j| 0.5 * (similarity[(i, j)] + similarity[(j, i)]));
        lanczos_top(&sym, m)?
    };

    // Eigenvalues below this are rounding noise around zero.
    let threshold = spread * d as f64 * f64::EPSILON;
    let keep = values.iter().take_while(|&&l| l > threshold).count();
    if keep == 0 {
        return Err(ImeError::Numerical(format!(
            "no positive spectrum (largest eigenvalue {:e})",
            values.first().copied().unwrap_or(f64::NAN)
        )));
    }
    if keep < m {
        log::warn!("only {keep} of the requested {m} eigenvalues are positive; embedding dimension reduced");
    }
    let mut eigenvectors = Matrix::from_fn(d, keep, |i, p| vectors[(i, p)]);
    fix_signs(&mut eigenvectors);
    Ok(Embedding::from_pairs(values[..keep].to_vec(), eigenvectors, m))
}

fn max_asymmetry(s: &Matrix) -> f64 {
    let d = s.rows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

fn fix_signs(vectors: &mut Matrix) {
    for p in 0..vectors.cols() {
        let mut best = 0;
        for i in 1..vectors.rows() {
            if vectors[(i, p)].abs() > vectors[(best, p)].abs() {
                best = i;
            }
        }
        if vectors[(best, p)] < 0.0 {
            for i in 0..vectors.rows() {
                vectors[(i, p)] = -vectors[(i, p)];
            }
        }
    }
}

/// Returns (top-m eigenvalues descending, d x m eigenvectors, spectral spread).
fn dense_top(s: &Matrix, m: usize) -> Result<(Vec<f64>, Matrix, f64)> {
    let d = s.rows();
    let a = faer::Mat::from_fn(d, d, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| ImeError::Numerical(format!("dense symmetric eigensolver failed: {e:?}")))?;
    let values = evd.S().column_vector();
    let vectors = evd.U();
    // faer returns eigenvalues in ascending order.
    let spread = values[0].abs().max(values[d - 1].abs());
    let top: Vec<f64> = (0..m).map(|p| values[d - 1 - p]).collect();
    let vecs = Matrix::from_fn(d, m, |i, p| vectors[(i, d - 1 - p)]);
    Ok((top, vecs, spread))
}

fn symmetric_matvec(s: &Matrix, x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(s.row_iter()) {
        *o = dot(row, x);
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    // Two passes of classical Gram-Schmidt keep the basis orthonormal to
    // working precision.
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|a| *a /= norm);
    }
    norm
}

/// Lanczos with full reorthogonalization. The Krylov basis grows until the
/// top-`m` Ritz pairs have residuals below `1e-10 * |lambda_max|`.
fn lanczos_top(s: &Matrix, m: usize) -> Result<(Vec<f64>, Matrix, f64)> {
    let d = s.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e5e_0001);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalize(&mut v, basis);
            if normalize(&mut v) > 1e-8 {
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new(); // beta[j] couples basis j and j+1
    let mut w = vec![0.0; d];
    let mut current = random_unit(&basis).ok_or_else(|| ImeError::Numerical("lanczos start failed".into()))?;
    let mut next_check = (2 * m + 20).min(d);

    loop {
        symmetric_matvec(s, &current, &mut w);
        let a = dot(&w, &current);
        alpha.push(a);
        basis.push(std::mem::take(&mut current));
        orthogonalize(&mut w, &basis);
        let b = normalize(&mut w);
        let k = basis.len();

        let exhausted = k == d;
        if exhausted || k >= next_check {
            let (theta, y) = tridiagonal_eigen(&alpha, &beta)?;
            let spread = theta[0].abs().max(theta[k - 1].abs());
            let want = m.min(k);
            let converged = (0..want).all(|p| {
                let col = k - 1 - p;
                (b * y[(k - 1, col)]).abs() <= 1e-10 * spread.max(f64::MIN_POSITIVE)
            });
            if converged || exhausted {
                if want < m {
                    return Err(ImeError::Numerical(format!(
                        "lanczos found only {want} of {m} eigenpairs"
                    )));
                }
                let values: Vec<f64> = (0..m).map(|p| theta[k - 1 - p]).collect();
                let mut vectors = Matrix::zeros(d, m);
                for (j, q) in basis.iter().enumerate() {
                    for p in 0..m {
                        let c = y[(j, k - 1 - p)];
                        if c != 0.0 {
                            for i in 0..d {
                                vectors[(i, p)] += c * q[i];
                            }
                        }
                    }
                }
                return Ok((values, vectors, spread));
            }
            next_check = (k + k / 4 + 8).min(d);
        }

        if b > 1e-10 * alpha.iter().fold(1.0f64, |x, v| x.max(v.abs())) {
            beta.push(b);
            current = std::mem::take(&mut w);
            w = vec![0.0; d];
        } else {
            // Invariant subspace: restart in the orthogonal complement with a
            // decoupled tridiagonal block.
            beta.push(0.0);
            current = random_unit(&basis).ok_or_else(|| ImeError::Numerical("lanczos restart failed".into()))?;
        }
    }
}

/// Eigen-decomposition of the Lanczos tridiagonal (ascending eigenvalues).
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, faer::Mat<f64>)> {
    let k = alpha.len();
    let t = faer::Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| ImeError::Numerical(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok((values, evd.U().to_owned()))
}
