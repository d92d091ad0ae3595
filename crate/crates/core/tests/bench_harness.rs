use ime_core::embedding::EigenBackend;
use ime_core::eval::{timing_bench, BenchOptions, BenchReport, Method};
use ime_core::graph::GeodesicBackend;
use ime_core::PipelineConfig;

/// One pass over a first-order graph with per-source shortest paths and the
/// Lanczos solver, so fits at a few thousand points stay quick.
fn quick_config() -> PipelineConfig {
    let mut config = PipelineConfig::default();
    config.ime.iterations = 1;
    config.ime.k_per_iter = vec![10];
    config.ime.omega_per_iter = vec![2.0];
    config.ime.use_second_order = false;
    config.ime.geodesic_backend = GeodesicBackend::PerSource;
    config.ime.eigen_backend = EigenBackend::Lanczos;
    config
}

fn embed_ms(report: &BenchReport, method: Method) -> Vec<f64> {
    report.select(method).map(|r| r.embed_ms).collect()
}

#[test]
fn query_cost_across_database_sizes() {
    let options = BenchOptions {
        sizes: vec![500, 2000, 5000],
        repetitions: 5,
        queries: 20,
        ..BenchOptions::default()
    };
    let report = timing_bench(&quick_config(), &options).unwrap();
    assert_eq!(report.records.len(), 9);

    let layer = embed_ms(&report, Method::ImeLayer);
    let spread = layer.iter().cloned().fold(0.0, f64::max) / layer.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= 2.0, "layer embed times {layer:?}");

    let graph = embed_ms(&report, Method::ImeGraphQuery);
    assert!(
        graph.windows(2).all(|w| w[1] > w[0]),
        "graph-query embed times {graph:?}"
    );
}

#[test]
fn repetitions_do_not_change_map() {
    let options = BenchOptions {
        sizes: vec![300],
        repetitions: 1,
        queries: 15,
        ..BenchOptions::default()
    };
    let once = timing_bench(&quick_config(), &options).unwrap();
    let five = timing_bench(
        &quick_config(),
        &BenchOptions {
            repetitions: 5,
            ..options
        },
    )
    .unwrap();
    let maps = |r: &BenchReport| r.records.iter().map(|x| (x.method, x.map)).collect::<Vec<_>>();
    assert_eq!(maps(&once), maps(&five));
}
