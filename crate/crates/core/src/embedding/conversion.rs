use crate::error::{ImeError, Result};
use crate::graph::DistanceMatrix;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    /// `-x^2 / 2`
    Quadratic,
    /// Student-t with one degree of freedom: `1 / (1 + x^2)`
    TDistribution,
}

/// Distance-to-similarity map plus the double-centering flag.
/// Centering only applies to [`Conversion::Quadratic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConversionKind {
    pub kind: Conversion,
    pub center: bool,
}

impl Default for ConversionKind {
    fn default() -> Self {
        Self::t_distribution()
    }
}

impl ConversionKind {
    pub const fn t_distribution() -> Self {
        Self {
            kind: Conversion::TDistribution,
            center: false,
        }
    }

    pub const fn quadratic(center: bool) -> Self {
        Self {
            kind: Conversion::Quadratic,
            center,
        }
    }

    pub fn centers(&self) -> bool {
        self.center && self.kind == Conversion::Quadratic
    }

    /// Elementwise map for a finite distance.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            Conversion::Quadratic => -0.5 * x * x,
            Conversion::TDistribution => 1.0 / (1.0 + x * x),
        }
    }

    /// Similarity assigned to an unreachable pair. `floor` is the most
    /// negative finite similarity in the same matrix (quadratic only).
    #[inline]
    fn unreachable(&self, floor: f64) -> f64 {
        match self.kind {
            Conversion::TDistribution => 0.0,
            // One magnitude below the most negative finite value; -1 when
            // every finite similarity is zero.
            Conversion::Quadratic if floor < 0.0 => 2.0 * floor,
            Conversion::Quadratic => -1.0,
        }
    }

    /// Finite-distance floor used for unreachable pairs.
    pub(crate) fn floor_of(&self, dist: &DistanceMatrix) -> f64 {
        match self.kind {
            Conversion::TDistribution => 0.0,
            Conversion::Quadratic => dist
                .values()
                .as_slice()
                .iter()
                .filter(|v| v.is_finite())
                .map(|&v| self.apply(v))
                .fold(0.0, f64::min),
        }
    }

    #[inline]
    pub(crate) fn apply_with_floor(&self, x: f64, floor: f64) -> f64 {
        if x.is_finite() {
            self.apply(x)
        } else {
            self.unreachable(floor)
        }
    }
}

/// Applies the conversion elementwise, then double-centers when requested.
pub fn convert_similarity(dist: &DistanceMatrix, conv: ConversionKind) -> Matrix {
    let floor = conv.floor_of(dist);
    let n = dist.size();
    let mut out = Matrix::zeros(n, n);
    for (o, &x) in out.as_mut_slice().iter_mut().zip(dist.values().as_slice()) {
        *o = conv.apply_with_floor(x, floor);
    }
    if conv.centers() {
        double_center(&mut out);
    }
    out
}

/// `S(geo) + omega * S(euc)`, built in a single pass over both matrices.
pub fn corrected_similarity(
    geo: &DistanceMatrix,
    euc: &DistanceMatrix,
    omega: f64,
    conv: ConversionKind,
) -> Result<Matrix> {
    if geo.size() != euc.size() {
        return Err(ImeError::invalid(format!(
            "geodesic ({}) and euclidean ({}) matrices differ in size",
            geo.size(),
            euc.size()
        )));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(ImeError::invalid(format!("omega must be non-negative, got {omega}")));
    }
    let n = geo.size();
    let geo_floor = conv.floor_of(geo);
    let mut out = Matrix::zeros(n, n);
    if omega == 0.0 {
        for (o, &g) in out.as_mut_slice().iter_mut().zip(geo.values().as_slice()) {
            *o = conv.apply_with_floor(g, geo_floor);
        }
    } else {
        let euc_floor = conv.floor_of(euc);
        let pairs = geo.values().as_slice().iter().zip(euc.values().as_slice());
        for (o, (&g, &e)) in out.as_mut_slice().iter_mut().zip(pairs) {
            *o = conv.apply_with_floor(g, geo_floor) + omega * conv.apply_with_floor(e, euc_floor);
        }
    }
    if conv.centers() {
        double_center(&mut out);
    }
    Ok(out)
}

pub(crate) fn row_means(s: &Matrix) -> Vec<f64> {
    let n = s.cols() as f64;
    s.row_iter().map(|r| r.iter().sum::<f64>() / n).collect()
}

/// `J S J` with `J = I - 11^T / n`, for symmetric `S`.
pub fn double_center(s: &mut Matrix) {
    let n = s.rows();
    let means = row_means(s);
    let grand = means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        let row = s.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            // (r_i + r_j) is commutative, which keeps the result symmetric.
            *v = *v - (means[i] + means[j]) + grand;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DistanceKind;

    fn dist(rows: &[&[f64]]) -> DistanceMatrix {
        DistanceMatrix::new(Matrix::from_rows(rows).unwrap(), DistanceKind::Geodesic).unwrap()
    }

    #[test]
    fn t_distribution_values() {
        let c = ConversionKind::t_distribution();
        assert_eq!(c.apply(0.0), 1.0);
        assert_eq!(c.apply(1.0), 0.5);
        assert!((c.apply(3.0) - 0.1).abs() < 1e-15);
        let d = dist(&[&[0.0, f64::INFINITY], &[f64::INFINITY, 0.0]]);
        let s = convert_similarity(&d, c);
        assert_eq!(s[(0, 1)], 0.0);
        assert_eq!(s[(1, 1)], 1.0);
    }

    #[test]
    fn quadratic_values_and_cap() {
        let c = ConversionKind::quadratic(false);
        assert_eq!(c.apply(2.0), -2.0);
        let d = dist(&[&[0.0, 2.0, f64::INFINITY], &[2.0, 0.0, 1.0], &[f64::INFINITY, 1.0, 0.0]]);
        let s = convert_similarity(&d, c);
        assert_eq!(s[(0, 1)], -2.0);
        assert_eq!(s[(0, 2)], -4.0);
    }

    #[test]
    fn centered_rows_sum_to_zero() {
        let d = dist(&[&[0.0, 3.0, 4.0], &[3.0, 0.0, 5.0], &[4.0, 5.0, 0.0]]);
        let s = convert_similarity(&d, ConversionKind::quadratic(true));
        for i in 0..3 {
            assert!(s.row(i).iter().sum::<f64>().abs() < 1e-10);
            for j in 0..3 {
                assert_eq!(s[(i, j)], s[(j, i)]);
            }
        }
        // The centered squared-distance matrix of a metric is a Gram matrix:
        // B_ii + B_jj - 2 B_ij recovers d_ij^2.
        assert!((s[(0, 0)] + s[(1, 1)] - 2.0 * s[(0, 1)] - 9.0).abs() < 1e-10);
    }

    #[test]
    fn corrected_similarity_examples() {
        let zero = dist(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let s = corrected_similarity(&zero, &zero, 2.0, ConversionKind::t_distribution()).unwrap();
        assert!(s.as_slice().iter().all(|&v| v == 3.0));

        let geo = dist(&[&[0.0, 1.5], &[1.5, 0.0]]);
        let euc = dist(&[&[0.0, 1.0], &[1.0, 0.0]]);
        for conv in [ConversionKind::t_distribution(), ConversionKind::quadratic(false)] {
            let s = corrected_similarity(&geo, &euc, 0.0, conv).unwrap();
            assert_eq!(s, convert_similarity(&geo, conv));
        }
        let three = dist(&[&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0], &[2.0, 1.0, 0.0]]);
        assert!(corrected_similarity(&geo, &three, 1.0, ConversionKind::t_distribution()).is_err());
        assert!(corrected_similarity(&geo, &euc, -1.0, ConversionKind::t_distribution()).is_err());
    }
}
