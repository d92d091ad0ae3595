use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ime_core::dataset::DescriptorFormat;
use ime_core::eval::BenchReport;
use ime_core::{
    generate_holed_manifold, ime_fit, load_descriptors, save_descriptors, DescriptorSet, ImeConfig, Matrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn ime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ime"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ime(args);
    assert!(
        out.status.success(),
        "ime {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn roll(&self, count: usize) -> (PathBuf, PathBuf) {
        let (db, gt) = (self.path("db.bin"), self.path("gt.txt"));
        ok(&[
            "generate",
            "--count",
            &count.to_string(),
            "--out",
            p(&db),
            "--truth",
            p(&gt),
        ]);
        (db, gt)
    }
}

fn random_square(n: usize, seed: u64) -> DescriptorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Diagonal shift keeps the matrix well conditioned.
    let m = Matrix::from_fn(n, n, |i, j| {
        rng.random_range(-1.0..1.0) + if i == j { 4.0 } else { 0.0 }
    });
    DescriptorSet::new(m, None).unwrap()
}

#[test]
fn fit_defaults_writes_layer_and_manifest() {
    let fx = Fixture::new();
    let (db, _) = fx.roll(200);
    let layer = fx.path("layer.bin");
    ok(&["fit", "--input", p(&db), "--out", p(&layer)]);
    assert!(layer.exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.path("layer.bin.manifest.json")).unwrap()).unwrap();
    let config = &manifest["config"];
    assert_eq!(config["iter"], 2);
    assert_eq!(config["omega"], serde_json::json!([2.0, 2.0]));
    assert_eq!(config["alpha"], 1.0);
    for out in manifest["outputs"].as_array().unwrap() {
        assert!(Path::new(out.as_str().unwrap()).exists(), "{out}");
    }
    assert_eq!(manifest["inputs"][0]["rows"], 200);
}

#[test]
fn flags_override_config_file() {
    let fx = Fixture::new();
    let (db, _) = fx.roll(100);
    let conf = fx.path("run.conf");
    fs::write(&conf, "omega = 1\nalpha = 0.5\nk = 6\n").unwrap();
    let layer = fx.path("layer.bin");
    ok(&[
        "fit",
        "--input",
        p(&db),
        "--config",
        p(&conf),
        "--omega",
        "3",
        "--out",
        p(&layer),
    ]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fx.path("layer.bin.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["omega"], serde_json::json!([3.0, 3.0]));
    assert_eq!(manifest["config"]["alpha"], 0.5);
    assert_eq!(manifest["config"]["k"], serde_json::json!([6, 6]));
}

#[test]
fn missing_input_is_an_io_error_without_outputs() {
    let fx = Fixture::new();
    let out = ime(&[
        "fit",
        "--input",
        p(&fx.path("absent.bin")),
        "--out",
        p(&fx.path("layer.bin")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: io: "), "{stderr}");
    assert_eq!(stderr.lines().count(), 1);
    assert!(files(fx.dir.path()).is_empty());
}

#[test]
fn dimension_above_item_count_is_invalid() {
    let fx = Fixture::new();
    let (db, _) = fx.roll(50);
    let out = ime(&[
        "fit",
        "--input",
        p(&db),
        "--dim",
        "60",
        "--out",
        p(&fx.path("layer.bin")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("target dimension 60 exceeds the number of items 50"),
        "{stderr}"
    );
    assert_eq!(files(fx.dir.path()), vec!["db.bin", "db.bin.ids", "gt.txt"]);
}

#[test]
fn embedding_training_set_reproduces_targets_at_tiny_alpha() {
    let fx = Fixture::new();
    let train = fx.path("train.bin");
    save_descriptors(&random_square(40, 1), &train, DescriptorFormat::Binary).unwrap();
    let (layer, dump, out) = (fx.path("layer.bin"), fx.path("emb.bin"), fx.path("out.bin"));
    ok(&[
        "fit",
        "--input",
        p(&train),
        "--alpha",
        "1e-10",
        "--k",
        "5",
        "--dim",
        "3",
        "--out",
        p(&layer),
        "--embedding",
        p(&dump),
    ]);
    let stdout = ok(&["embed", "--layer", p(&layer), "--queries", p(&train), "--out", p(&out)]);
    assert!(stdout.contains("per-query embed time"));
    let targets = load_descriptors(&dump, DescriptorFormat::Binary).unwrap();
    let got = load_descriptors(&out, DescriptorFormat::Binary).unwrap();
    let diff = Matrix::from_fn(40, 3, |i, j| got.row(i)[j] - targets.row(i)[j]).frobenius_norm();
    let rel = diff / targets.vectors().frobenius_norm();
    // Both files store f32, so agreement is limited to single precision.
    assert!(rel <= 1e-6, "relative error {rel:e}");
}

#[test]
fn single_query_gives_one_row() {
    let fx = Fixture::new();
    let (db, _) = fx.roll(100);
    let layer = fx.path("layer.bin");
    ok(&["fit", "--input", p(&db), "--out", p(&layer)]);
    let query = fx.path("q.csv");
    fs::write(&query, "id,x,y,z\nq0,0.1,0.5,-0.2\n").unwrap();
    let out = fx.path("q.bin");
    ok(&["embed", "--layer", p(&layer), "--queries", p(&query), "--out", p(&out)]);
    let coords = load_descriptors(&out, DescriptorFormat::Binary).unwrap();
    assert_eq!((coords.len(), coords.dim()), (1, 2));
    assert_eq!(coords.ids().unwrap(), ["q0".to_string()]);
}

#[test]
fn fingerprint_mismatch_warns_or_fails() {
    let fx = Fixture::new();
    let (db, _) = fx.roll(100);
    let layer = fx.path("layer.bin");
    ok(&["fit", "--input", p(&db), "--out", p(&layer)]);
    let other = fx.path("other.bin");
    ok(&["generate", "--count", "100", "--seed", "9", "--out", p(&other)]);
    let out = fx.path("q.bin");

    let args = [
        "embed",
        "--layer",
        p(&layer),
        "--queries",
        p(&db),
        "--out",
        p(&out),
        "--train",
        p(&other),
    ];
    let warned = ime(&args);
    assert!(warned.status.success());
    assert!(String::from_utf8_lossy(&warned.stderr).starts_with("warning: "));
    fs::remove_file(&out).unwrap();

    let mut strict = args.to_vec();
    strict.push("--strict");
    let failed = ime(&strict);
    assert_eq!(failed.status.code(), Some(5));
    assert!(!out.exists());

    let matched = [
        "embed",
        "--layer",
        p(&layer),
        "--queries",
        p(&db),
        "--out",
        p(&out),
        "--train",
        p(&db),
        "--strict",
    ];
    ok(&matched);
}

#[test]
fn corrupt_layer_is_a_parse_error() {
    let fx = Fixture::new();
    let (db, _) = fx.roll(60);
    let layer = fx.path("layer.bin");
    fs::write(&layer, b"IMEL1\0\x01short").unwrap();
    let out = ime(&[
        "embed",
        "--layer",
        p(&layer),
        "--queries",
        p(&db),
        "--out",
        p(&fx.path("q.bin")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_perfect_ranking_and_missing_query() {
    let fx = Fixture::new();
    let db = fx.path("coords.csv");
    fs::write(&db, "id,x\na,0\nb,0.1\nc,5\nd,5.1\n").unwrap();
    let gt = fx.path("gt.txt");
    fs::write(&gt, "a: b\nc: d\n").unwrap();
    let records = fx.path("ap.jsonl");
    let stdout = ok(&[
        "eval",
        "--database",
        p(&db),
        "--truth",
        p(&gt),
        "--records",
        p(&records),
    ]);
    assert_eq!(stdout.lines().last(), Some("mAP\t1.000000"));
    assert!(stdout.lines().any(|l| l == "a\t1.000000"));
    assert_eq!(fs::read_to_string(&records).unwrap().lines().count(), 2);

    fs::write(&gt, "a: b\nzz: d\n").unwrap();
    let out = ime(&["eval", "--database", p(&db), "--truth", p(&gt)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz"));
}

fn sweep(fx: &Fixture, extra: &[&str]) -> (Output, PathBuf) {
    let records = fx.path("sweep.jsonl");
    let mut args = vec!["sweep", "--count", "120", "--reps", "1", "--records", p(&records)];
    args.extend_from_slice(extra);
    (ime(&args), records)
}

#[test]
fn omega_sweep_varies_one_axis() {
    let fx = Fixture::new();
    let (out, records) = sweep(&fx, &["--omega", "0,1,2,4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = BenchReport::parse_records(&fs::read_to_string(records).unwrap()).unwrap();
    assert_eq!(report.records.len(), 4);
    let omegas: Vec<&str> = report.records.iter().map(|r| r.omega.as_str()).collect();
    assert_eq!(omegas, ["0,0", "1,1", "2,2", "4,4"]);
    for r in &report.records {
        assert_eq!((r.d, r.m, r.k.as_str(), r.iter), (120, 2, "10,10", 2));
    }
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 5);

    // The omega = 0 point is the plain uncorrected fit.
    let data = generate_holed_manifold(120, 0.3, 0).unwrap();
    let plain = ime_fit(&data.set, &ImeConfig::uniform(2, 10, 0.0, 2)).unwrap();
    let corrected = ime_fit(&data.set, &ImeConfig::uniform(2, 10, 2.0, 2)).unwrap();
    assert_ne!(plain.coords, corrected.coords);
    let layer = ime_core::fit_layer(&data.set, &plain, 1.0).unwrap();
    let queries = data
        .set
        .select(
            &data
                .truth
                .queries
                .iter()
                .map(|q| data.set.id_list().iter().position(|id| *id == q.query).unwrap())
                .collect::<Vec<_>>(),
        )
        .unwrap();
    let q_coords = ime_core::apply_layer(&layer, &queries).unwrap();
    let expected = ime_core::evaluate_retrieval(
        &plain.coords,
        &data.set.id_list(),
        &q_coords,
        &queries.id_list(),
        &data.truth,
    )
    .unwrap()
    .map;
    assert_eq!(report.records[0].map, expected);
}

#[test]
fn sweep_dedups_and_rejects_empty_ranges() {
    let fx = Fixture::new();
    let (out, records) = sweep(&fx, &["--k", "5,8,5", "--dim", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: --k: ignoring duplicate values 5"));
    let report = BenchReport::parse_records(&fs::read_to_string(&records).unwrap()).unwrap();
    assert_eq!(report.records.len(), 2);

    let (out, _) = sweep(&fx, &["--omega", ""]);
    assert_eq!(out.status.code(), Some(2));
    let (out, _) = sweep(&fx, &["--iter", "1,2", "--dim", "1,2"]);
    assert!(out.status.success());
}

#[test]
fn bench_emits_one_record_per_method_and_size() {
    let fx = Fixture::new();
    let records = fx.path("bench.jsonl");
    let tsv = fx.path("bench.tsv");
    let stdout = ok(&[
        "bench",
        "--sizes",
        "500,2000,5000",
        "--reps",
        "1",
        "--queries",
        "5",
        "--iter",
        "1",
        "--no-second-order",
        "--geodesic",
        "sparse",
        "--eigen",
        "lanczos",
        "--records",
        p(&records),
        "--tsv",
        p(&tsv),
    ]);
    let report = BenchReport::parse_records(&fs::read_to_string(&records).unwrap()).unwrap();
    assert_eq!(report.records.len(), 9);
    assert_eq!(fs::read_to_string(&tsv).unwrap(), stdout);
    assert!(stdout.starts_with("method\td\tm\tk\tomega\titer\tembed_ms\trank_ms\tmap\tthreads\n"));
}

#[test]
fn outputs_never_replace_inputs() {
    let fx = Fixture::new();
    let (db, _) = fx.roll(60);
    let before = fs::read(&db).unwrap();
    let out = ime(&["fit", "--input", p(&db), "--out", p(&db)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read(&db).unwrap(), before);
}
