use ime_core::{pca_apply, pca_fit, DescriptorSet, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[test]
fn isotropic_sample_has_flat_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let set = DescriptorSet::new(Matrix::from_fn(10000, 5, |_, _| rng.sample(StandardNormal)), None).unwrap();
    let model = pca_fit(&set, 5).unwrap();
    let (hi, lo) = (model.explained[0], model.explained[4]);
    assert!(hi <= 1.1 * lo, "explained {:?}", model.explained);
    // Unit variance per axis.
    assert!(model.explained.iter().all(|v| (v - 1.0).abs() < 0.1));
}

#[test]
fn projection_never_stretches_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let set = DescriptorSet::new(Matrix::from_fn(40, 6, |_, _| rng.random_range(-1.0..1.0)), None).unwrap();
    let coords = pca_apply(&pca_fit(&set, 2).unwrap(), &set).unwrap();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    for i in 0..40 {
        for j in 0..40 {
            assert!(dist(coords.row(i), coords.row(j)) <= dist(set.row(i), set.row(j)) + 1e-12);
        }
    }
}
