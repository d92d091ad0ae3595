use ime_core::eval::evaluate_in_database;
use ime_core::{generate_swiss_roll, ime_fit, pca_apply, pca_fit, DescriptorSet, ImeConfig, Matrix};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pairwise(points: &Matrix) -> DMatrix<f64> {
    let n = points.rows();
    DMatrix::from_fn(n, n, |i, j| {
        points
            .row(i)
            .iter()
            .zip(points.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

/// Classical MDS: top eigenpairs of `-J D^2 J / 2`.
fn classical_mds(dist: &DMatrix<f64>, m: usize) -> Matrix {
    let n = dist.nrows();
    let j = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let b = -0.5 * &j * dist.map(|v| v * v) * &j;
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    Matrix::from_fn(n, m, |i, p| {
        let k = order[p];
        eig.eigenvalues[k].max(0.0).sqrt() * eig.eigenvectors[(i, k)]
    })
}

#[test]
fn isomap_mode_recovers_planar_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = 30;
    let points = Matrix::from_fn(d, 2, |_, _| rng.random_range(-1.0..1.0));
    let set = DescriptorSet::new(points.clone(), None).unwrap();
    let emb = ime_fit(&set, &ImeConfig::isomap(d - 1, 2)).unwrap();
    let input = pairwise(&points);
    let output = pairwise(&emb.coords);
    let rel = (&output - &input).norm() / input.norm();
    assert!(rel <= 1e-6, "relative distance error {rel:e}");
    let mds = pairwise(&classical_mds(&input, 2));
    assert!((&output - &mds).norm() / mds.norm() <= 1e-6);
}

#[test]
fn ime_embedding_beats_pca_on_swiss_roll() {
    let roll = generate_swiss_roll(1000, 0.0, 0).unwrap();
    let ids = roll.set.id_list();
    let emb = ime_fit(&roll.set, &ImeConfig::default()).unwrap();
    let ime = evaluate_in_database(&emb.coords, &ids, &roll.truth).unwrap().map;
    let pca_coords = pca_apply(&pca_fit(&roll.set, 2).unwrap(), &roll.set).unwrap();
    let pca = evaluate_in_database(&pca_coords, &ids, &roll.truth).unwrap().map;
    assert!(ime > pca, "IME mAP {ime:.4} does not exceed PCA mAP {pca:.4}");
}
