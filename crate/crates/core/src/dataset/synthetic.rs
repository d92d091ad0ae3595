//! Seeded Swiss-roll generators with arc-length relevance bands.
//!
//! The roll is `(t cos t, h, t sin t) / ROLL_T_MAX` for `t` in
//! `[ROLL_T_MIN, ROLL_T_MAX]` and `h` in `[0, ROLL_HEIGHT]`, so the
//! cross-section fits the unit disc like unit-norm descriptors do. Points are
//! sampled uniformly in arc length, band by band, so every band has the same
//! number of members. Holes are whole arc-length slots with no samples.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ImeError, Result};
use crate::matrix::Matrix;

use super::{DescriptorSet, GroundTruth, GroundTruthQuery};

pub const ROLL_T_MIN: f64 = 1.5 * PI;
pub const ROLL_T_MAX: f64 = 4.5 * PI;
pub const ROLL_HEIGHT: f64 = 21.0;
pub const DEFAULT_BANDS: usize = 10;
const SLOTS_PER_BAND: usize = 10;

/// Arc length of the planar spiral `r = t` from 0 to `t`.
pub fn arc_length(t: f64) -> f64 {
    0.5 * (t * (1.0 + t * t).sqrt() + t.asinh())
}

/// Inverse of [`arc_length`] by Newton iteration.
pub fn arc_length_inverse(s: f64) -> f64 {
    let mut t = (2.0 * s).sqrt().max(1e-3);
    for _ in 0..64 {
        let step = (arc_length(t) - s) / (1.0 + t * t).sqrt();
        t -= step;
        if step.abs() <= 1e-15 * t.max(1.0) {
            break;
        }
    }
    t
}

#[derive(Debug, Clone)]
pub struct SyntheticManifold {
    pub set: DescriptorSet,
    pub truth: GroundTruth,
    /// Band (relevance class) of each row.
    pub labels: Vec<usize>,
    /// Arc-length coordinate of each row before noise.
    pub arc: Vec<f64>,
    /// Arc-length intervals that received no samples.
    pub removed: Vec<(f64, f64)>,
}

impl SyntheticManifold {
    pub fn bands(&self) -> usize {
        self.labels.iter().max().map_or(0, |b| b + 1)
    }
}

pub fn generate_swiss_roll(count: usize, noise: f64, seed: u64) -> Result<SyntheticManifold> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(ImeError::invalid(format!("noise must be non-negative, got {noise}")));
    }
    generate(count, noise, 0.0, seed)
}

pub fn generate_holed_manifold(count: usize, hole_fraction: f64, seed: u64) -> Result<SyntheticManifold> {
    if !(0.0..1.0).contains(&hole_fraction) {
        return Err(ImeError::invalid(format!(
            "hole_fraction must lie in [0, 1), got {hole_fraction}"
        )));
    }
    generate(count, 0.0, hole_fraction, seed)
}

fn generate(count: usize, noise: f64, hole_fraction: f64, seed: u64) -> Result<SyntheticManifold> {
    if count < 10 {
        return Err(ImeError::invalid(format!("count must be at least 10, got {count}")));
    }
    // Every band needs a query plus at least one other relevant member.
    let bands = DEFAULT_BANDS.min(count / 2);
    let s_min = arc_length(ROLL_T_MIN);
    let s_max = arc_length(ROLL_T_MAX);
    let slot_len = (s_max - s_min) / (bands * SLOTS_PER_BAND) as f64;

    let kept = choose_kept_slots(bands, hole_fraction, seed);
    let mut removed = Vec::new();
    for (b, slots) in kept.iter().enumerate() {
        for slot in 0..SLOTS_PER_BAND {
            if !slots.contains(&slot) {
                let lo = s_min + ((b * SLOTS_PER_BAND + slot) as f64) * slot_len;
                removed.push((lo, lo + slot_len));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(count * 3);
    let mut labels = Vec::with_capacity(count);
    let mut arc = Vec::with_capacity(count);
    for (b, slots) in kept.iter().enumerate() {
        let members = count / bands + usize::from(b < count % bands);
        for _ in 0..members {
            let slot = slots[rng.random_range(0..slots.len())];
            let lo = s_min + ((b * SLOTS_PER_BAND + slot) as f64) * slot_len;
            let s = lo + rng.random::<f64>() * slot_len;
            let h = rng.random::<f64>() * ROLL_HEIGHT;
            let t = arc_length_inverse(s);
            let mut p = [t * t.cos(), h, t * t.sin()].map(|c| c / ROLL_T_MAX);
            if noise > 0.0 {
                for c in &mut p {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *c += noise * g;
                }
            }
            data.extend_from_slice(&p);
            labels.push(b);
            arc.push(s);
        }
    }

    let ids: Vec<String> = (0..count).map(|i| format!("p{i}")).collect();
    let mut queries = Vec::with_capacity(bands);
    let mut start = 0;
    for b in 0..bands {
        let members = count / bands + usize::from(b < count % bands);
        let q = start + rng.random_range(0..members);
        queries.push(GroundTruthQuery {
            query: ids[q].clone(),
            relevant: (start..start + members)
                .filter(|&i| i != q)
                .map(|i| ids[i].clone())
                .collect(),
        });
        start += members;
    }

    let set = DescriptorSet::new(Matrix::from_vec(count, 3, data)?, Some(ids))?;
    Ok(SyntheticManifold {
        set,
        truth: GroundTruth { queries },
        labels,
        arc,
        removed,
    })
}

/// Retained slot indices per band. Holes come from their own random stream so
/// a zero fraction leaves the sampling stream untouched.
fn choose_kept_slots(bands: usize, hole_fraction: f64, seed: u64) -> Vec<Vec<usize>> {
    let total = bands * SLOTS_PER_BAND;
    let holes = ((hole_fraction * total as f64).round() as usize).min(total - bands);
    let mut kept = vec![vec![true; SLOTS_PER_BAND]; bands];
    if holes > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut order: Vec<usize> = (0..total).collect();
        order.shuffle(&mut rng);
        let mut remaining = vec![SLOTS_PER_BAND; bands];
        let mut dug = 0;
        for slot in order {
            if dug == holes {
                break;
            }
            let band = slot / SLOTS_PER_BAND;
            // Never empty a band entirely.
            if remaining[band] > 1 {
                kept[band][slot % SLOTS_PER_BAND] = false;
                remaining[band] -= 1;
                dug += 1;
            }
        }
    }
    kept.into_iter()
        .map(|flags| flags.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect())
        .collect()
}

/// Embeds a set into `dim` dimensions with a random orthonormal map and adds
/// isotropic Gaussian noise. Pairwise geometry is preserved up to the noise.
pub fn lift_to_dimension(set: &DescriptorSet, dim: usize, noise: f64, seed: u64) -> Result<DescriptorSet> {
    if dim < set.dim() {
        return Err(ImeError::invalid(format!(
            "cannot lift {}-dimensional data into {dim} dimensions",
            set.dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Orthonormal columns by modified Gram-Schmidt on a Gaussian matrix.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(set.dim());
    while basis.len() < set.dim() {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = Matrix::zeros(set.len(), dim);
    for i in 0..set.len() {
        let row = out.row_mut(i);
        for (c, b) in set.row(i).iter().zip(&basis) {
            row.iter_mut().zip(b).for_each(|(o, v)| *o += c * v);
        }
        if noise > 0.0 {
            for o in row.iter_mut() {
                let g: f64 = StandardNormal.sample(&mut rng);
                *o += noise * g;
            }
        }
    }
    DescriptorSet::new(out, set.ids().map(<[String]>::to_vec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_classes() {
        let roll = generate_swiss_roll(1000, 0.0, 0).unwrap();
        assert_eq!((roll.set.len(), roll.set.dim()), (1000, 3));
        assert_eq!(roll.bands(), 10);
        for b in 0..10 {
            assert_eq!(roll.labels.iter().filter(|&&l| l == b).count(), 100);
        }
        assert_eq!(roll.truth.queries.len(), 10);
        for q in &roll.truth.queries {
            assert_eq!(q.relevant.len(), 99);
            assert!(!q.relevant.contains(&q.query));
        }
        roll.truth.resolve(&roll.set.id_list()).unwrap();
    }

    #[test]
    fn deterministic() {
        let a = generate_swiss_roll(300, 0.1, 9).unwrap();
        let b = generate_swiss_roll(300, 0.1, 9).unwrap();
        assert_eq!(a.set, b.set);
        assert_eq!(a.truth, b.truth);
        let c = generate_swiss_roll(300, 0.1, 10).unwrap();
        assert_ne!(a.set, c.set);
        let h1 = generate_holed_manifold(300, 0.4, 3).unwrap();
        let h2 = generate_holed_manifold(300, 0.4, 3).unwrap();
        assert_eq!(h1.set, h2.set);
        assert_eq!(h1.removed, h2.removed);
    }

    #[test]
    fn noiseless_points_lie_on_surface() {
        let roll = generate_swiss_roll(1000, 0.0, 0).unwrap();
        for i in 0..roll.set.len() {
            let p = roll.set.row(i);
            // Recover t from the radius, then substitute back.
            let p = p.iter().map(|c| c * ROLL_T_MAX).collect::<Vec<_>>();
            let t = (p[0] * p[0] + p[2] * p[2]).sqrt();
            assert!((ROLL_T_MIN - 1e-9..=ROLL_T_MAX + 1e-9).contains(&t));
            assert!((t * t.cos() - p[0]).abs() < 1e-9);
            assert!((t * t.sin() - p[2]).abs() < 1e-9);
            assert!((0.0..=ROLL_HEIGHT + 1e-9).contains(&p[1]));
            assert!((arc_length(t) - roll.arc[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn arc_length_inverts() {
        for &t in &[ROLL_T_MIN, 7.3, ROLL_T_MAX] {
            assert!((arc_length_inverse(arc_length(t)) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_holes_matches_swiss_roll() {
        let a = generate_holed_manifold(500, 0.0, 4).unwrap();
        let b = generate_swiss_roll(500, 0.0, 4).unwrap();
        assert_eq!(a.set, b.set);
        assert_eq!(a.truth, b.truth);
        assert!(a.removed.is_empty());
    }

    #[test]
    fn holes_receive_no_samples() {
        let holed = generate_holed_manifold(1000, 0.3, 5).unwrap();
        assert_eq!(holed.set.len(), 1000);
        assert_eq!(holed.removed.len(), 30);
        for i in 0..holed.set.len() {
            let p = holed.set.row(i);
            let s = arc_length((p[0] * p[0] + p[2] * p[2]).sqrt());
            for &(lo, hi) in &holed.removed {
                assert!(
                    !(s > lo + 1e-9 && s < hi - 1e-9),
                    "point {i} at s={s} inside hole [{lo}, {hi}]"
                );
            }
        }
    }

    #[test]
    fn argument_checks() {
        assert!(generate_swiss_roll(9, 0.0, 0).is_err());
        assert!(generate_swiss_roll(10, -1.0, 0).is_err());
        assert!(generate_holed_manifold(100, 1.0, 0).is_err());
        assert!(generate_holed_manifold(100, -0.1, 0).is_err());
        let tiny = generate_swiss_roll(10, 0.0, 0).unwrap();
        assert_eq!(tiny.bands(), 5);
        assert!(tiny.truth.queries.iter().all(|q| !q.relevant.is_empty()));
    }

    #[test]
    fn lifting_preserves_distances() {
        let roll = generate_swiss_roll(50, 0.0, 1).unwrap();
        let lifted = lift_to_dimension(&roll.set, 32, 0.0, 2).unwrap();
        assert_eq!(lifted.dim(), 32);
        for (i, j) in [(0, 1), (3, 40), (10, 49)] {
            let d0 = crate::matrix::squared_euclidean(roll.set.row(i), roll.set.row(j));
            let d1 = crate::matrix::squared_euclidean(lifted.row(i), lifted.row(j));
            assert!((d0 - d1).abs() < 1e-9 * d0.max(1.0));
        }
    }
}
