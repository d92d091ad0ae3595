//! Descriptor sets, their on-disk formats, ground truth and synthetic manifolds.

mod ground_truth;
mod io;
mod synthetic;

use std::collections::HashSet;

use sha2::{Digest, Sha256};

use crate::error::{ImeError, Result};
use crate::matrix::Matrix;

pub use ground_truth::{load_ground_truth, save_ground_truth, GroundTruth, GroundTruthQuery, ResolvedQuery};
pub use io::{load_descriptors, save_descriptors, DescriptorFormat, BINARY_HEADER_BYTES, BINARY_MAGIC};
pub use synthetic::{
    arc_length, arc_length_inverse, generate_holed_manifold, generate_swiss_roll, lift_to_dimension, SyntheticManifold,
    DEFAULT_BANDS, ROLL_HEIGHT, ROLL_T_MAX, ROLL_T_MIN,
};

/// Row-indexed descriptor matrix: one row per database item.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    vectors: Matrix,
    ids: Option<Vec<String>>,
}

impl DescriptorSet {
    pub fn new(vectors: Matrix, ids: Option<Vec<String>>) -> Result<Self> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(ImeError::invalid("empty descriptor set"));
        }
        if let Some(pos) = vectors.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(ImeError::invalid(format!(
                "non-finite value at row {}, column {}",
                pos / vectors.cols(),
                pos % vectors.cols()
            )));
        }
        if let Some(ids) = &ids {
            if ids.len() != vectors.rows() {
                return Err(ImeError::invalid(format!(
                    "{} ids for {} descriptors",
                    ids.len(),
                    vectors.rows()
                )));
            }
            let mut seen = HashSet::with_capacity(ids.len());
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(ImeError::invalid(format!("duplicate id {id:?}")));
                }
            }
        }
        Ok(Self { vectors, ids })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, None)
    }

    /// Number of descriptors (database scale).
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    /// Descriptor dimension.
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Explicit ids, or the row index rendered as a string when none are stored.
    pub fn id_list(&self) -> Vec<String> {
        match &self.ids {
            Some(ids) => ids.clone(),
            None => (0..self.len()).map(|i| i.to_string()).collect(),
        }
    }

    pub fn with_ids(self, ids: Vec<String>) -> Result<Self> {
        Self::new(self.vectors, Some(ids))
    }

    /// Copy of the selected rows, ids carried along.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let picked: Vec<&[f64]> = rows.iter().map(|&i| self.row(i)).collect();
        let ids = self
            .ids
            .as_ref()
            .map(|ids| rows.iter().map(|&i| ids[i].clone()).collect());
        Self::new(Matrix::from_rows(&picked)?, ids)
    }

    /// SHA-256 over the shape and the little-endian bytes of every value.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        self.feed_hasher(&mut hasher);
        hasher.finalize().into()
    }

    pub(crate) fn feed_hasher(&self, hasher: &mut Sha256) {
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.dim() as u64).to_le_bytes());
        for v in self.vectors.as_slice() {
            hasher.update(v.to_le_bytes());
        }
    }

    pub fn into_parts(self) -> (Matrix, Option<Vec<String>>) {
        (self.vectors, self.ids)
    }
}

/// Result of [`l2_normalize`]: the scaled set plus the rows that had zero norm.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub set: DescriptorSet,
    pub zero_rows: Vec<usize>,
}

/// Scales every nonzero row to unit Euclidean norm. Zero rows stay zero and are reported.
pub fn l2_normalize(set: &DescriptorSet) -> Normalized {
    let mut vectors = set.vectors.clone();
    let mut zero_rows = Vec::new();
    for i in 0..vectors.rows() {
        let row = vectors.row_mut(i);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            zero_rows.push(i);
            continue;
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    Normalized {
        set: DescriptorSet {
            vectors,
            ids: set.ids.clone(),
        },
        zero_rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        let set = DescriptorSet::from_rows(&[[3.0, 4.0]]).unwrap();
        let out = l2_normalize(&set);
        assert!((out.set.row(0)[0] - 0.6).abs() < 1e-15);
        assert!((out.set.row(0)[1] - 0.8).abs() < 1e-15);
        assert!(out.zero_rows.is_empty());

        let zero = DescriptorSet::from_rows(&[[0.0, 0.0]]).unwrap();
        let out = l2_normalize(&zero);
        assert_eq!(out.set.row(0), &[0.0, 0.0]);
        assert_eq!(out.zero_rows, vec![0]);

        let unit = DescriptorSet::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        let out = l2_normalize(&unit);
        assert!(out.set.vectors().max_abs_diff(unit.vectors()) < 1e-9);
    }

    #[test]
    fn invariants_enforced() {
        assert!(DescriptorSet::from_rows::<[f64; 0]>(&[]).is_err());
        assert!(DescriptorSet::from_rows(&[[f64::NAN]]).is_err());
        let m = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(DescriptorSet::new(m.clone(), Some(vec!["a".into()])).is_err());
        assert!(DescriptorSet::new(m.clone(), Some(vec!["a".into(), "a".into()])).is_err());
        assert!(DescriptorSet::new(m, Some(vec!["a".into(), "b".into()])).is_ok());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_unit(rows in proptest::collection::vec(
            proptest::collection::vec(-100.0f64..100.0, 4), 1..20)) {
            let set = DescriptorSet::from_rows(&rows).unwrap();
            let once = l2_normalize(&set);
            let twice = l2_normalize(&once.set);
            prop_assert!(once.set.vectors().max_abs_diff(twice.set.vectors()) < 1e-12);
            for i in 0..set.len() {
                let norm: f64 = once.set.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                if once.zero_rows.contains(&i) {
                    prop_assert_eq!(norm, 0.0);
                } else {
                    prop_assert!((norm - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
