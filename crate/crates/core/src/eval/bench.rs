//! Per-query embedding cost of the layer, the graph-linked query and PCA.

use std::fmt::{self, Write as _};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{evaluate_retrieval, rank_by_distance};
use crate::baselines::{pca_apply, pca_fit};
use crate::config::PipelineConfig;
use crate::dataset::{generate_swiss_roll, lift_to_dimension, DescriptorSet, GroundTruth, GroundTruthQuery};
use crate::embedding::ime_fit_traced;
use crate::error::{ImeError, Result};
use crate::layer::{apply_layer, embed_query_via_graph, fit_layer, GraphQueryContext};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ImeLayer,
    ImeGraphQuery,
    Pca,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ImeLayer, Method::ImeGraphQuery, Method::Pca];

    pub fn label(self) -> &'static str {
        match self {
            Method::ImeLayer => "ime_layer",
            Method::ImeGraphQuery => "ime_graph_query",
            Method::Pca => "pca",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One row of a benchmark or sweep. Times are per query, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    pub d: usize,
    pub m: usize,
    pub k: String,
    pub omega: String,
    pub iter: usize,
    pub embed_ms: f64,
    pub rank_ms: f64,
    pub map: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
}

const COLUMNS: [&str; 10] = [
    "method", "d", "m", "k", "omega", "iter", "embed_ms", "rank_ms", "map", "threads",
];

impl BenchReport {
    pub fn to_tsv(&self) -> String {
        let mut out = COLUMNS.join("\t");
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
                r.method, r.d, r.m, r.k, r.omega, r.iter, r.embed_ms, r.rank_ms, r.map, r.threads
            );
        }
        out
    }

    /// One JSON object per line.
    pub fn to_records(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }

    pub fn parse_records(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| ImeError::invalid(format!("bad record: {e}"))))
            .collect::<Result<_>>()?;
        Ok(Self { records })
    }

    pub fn select(&self, method: Method) -> impl Iterator<Item = &BenchRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    /// Held-out queries drawn from the same roll.
    pub queries: usize,
    /// Descriptor dimension; the 3-D roll is lifted by a random rotation.
    pub input_dim: usize,
    pub noise: f64,
    /// Training points each graph-linked query connects to.
    pub query_k: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            sizes: vec![500, 2000, 5000],
            repetitions: 5,
            queries: 50,
            input_dim: 3,
            noise: 0.0,
            query_k: 10,
        }
    }
}

/// Median of a non-empty sample.
pub(crate) fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `pass` once as warmup, then `reps` timed times; returns the median
/// wall time of one pass in milliseconds.
pub fn timed(reps: usize, mut pass: impl FnMut() -> Result<()>) -> Result<f64> {
    pass()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        pass()?;
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(median(samples))
}

struct Workload {
    database: DescriptorSet,
    queries: DescriptorSet,
    truth: GroundTruth,
}

fn workload(d: usize, options: &BenchOptions, seed: u64) -> Result<Workload> {
    let db = generate_swiss_roll(d, options.noise, seed)?;
    // At least 20 points so the held-out roll gets the full set of bands.
    let held = generate_swiss_roll(options.queries.max(20), options.noise, seed ^ 0x5157_4552)?;
    let picked: Vec<usize> = (0..options.queries)
        .map(|i| i * held.set.len() / options.queries)
        .collect();
    // Both rolls use the same band boundaries, so relevance is band equality.
    let db_ids = db.set.id_list();
    let query_ids: Vec<String> = (0..picked.len()).map(|i| format!("q{i}")).collect();
    let truth = GroundTruth {
        queries: picked
            .iter()
            .enumerate()
            .map(|(i, &row)| (i, held.labels[row]))
            .map(|(i, band)| GroundTruthQuery {
                query: query_ids[i].clone(),
                relevant: (0..d)
                    .filter(|&j| db.labels[j] == band)
                    .map(|j| db_ids[j].clone())
                    .collect(),
            })
            .collect(),
    };
    let lift = |set: &DescriptorSet| -> Result<DescriptorSet> {
        if options.input_dim == set.dim() {
            Ok(set.clone())
        } else {
            lift_to_dimension(set, options.input_dim, 0.0, seed.wrapping_add(1))
        }
    };
    let database = lift(&db.set)?.with_ids(db_ids)?;
    let queries = lift(&held.set)?.select(&picked)?.with_ids(query_ids)?;
    Ok(Workload {
        database,
        queries,
        truth,
    })
}

/// For each database size: fits the pipeline, then times per-query embedding
/// and ranking for every method and scores the held-out queries. Everything
/// runs on the calling thread.
pub fn timing_bench(config: &PipelineConfig, options: &BenchOptions) -> Result<BenchReport> {
    if options.sizes.is_empty() || options.repetitions == 0 || options.queries == 0 {
        return Err(ImeError::invalid("bench needs at least one size, repetition and query"));
    }
    let mut report = BenchReport::default();
    let ime = &config.ime;
    let join = |v: Vec<String>| v.join(",");
    let k_text = join(ime.k_per_iter.iter().map(|k| k.to_string()).collect());
    let omega_text = join(ime.omega_per_iter.iter().map(|w| w.to_string()).collect());

    for &d in &options.sizes {
        let w = workload(d, options, config.seed)?;
        log::info!("bench d={d}: fitting");
        let run = ime_fit_traced(&w.database, ime)?;
        let layer = fit_layer(&w.database, &run.embedding, config.alpha)?;
        let ctx = GraphQueryContext::from_run(&w.database, &run, options.query_k)?;
        let m = run.embedding.dim();
        let pca = pca_fit(&w.database, m.min(w.database.dim()))?;
        let db_ids = w.database.id_list();
        let q_ids = w.queries.id_list();
        let nq = w.queries.len() as f64;

        for method in Method::ALL {
            let (db_coords, q_coords) = match method {
                // The database keeps its offline embedding; only queries go
                // through the layer.
                Method::ImeLayer => (run.embedding.coords.clone(), apply_layer(&layer, &w.queries)?),
                Method::ImeGraphQuery => (run.embedding.coords.clone(), {
                    let mut out = Matrix::zeros(w.queries.len(), ctx.output_dim());
                    for i in 0..w.queries.len() {
                        out.row_mut(i)
                            .copy_from_slice(&embed_query_via_graph(&ctx, w.queries.row(i))?);
                    }
                    out
                }),
                Method::Pca => (pca_apply(&pca, &w.database)?, pca_apply(&pca, &w.queries)?),
            };
            let mut sink = vec![0.0; q_coords.cols()];
            let embed_ms = timed(options.repetitions, || {
                for i in 0..w.queries.len() {
                    let x = w.queries.row(i);
                    match method {
                        Method::ImeLayer => layer.apply_into(x, &mut sink),
                        Method::ImeGraphQuery => sink = embed_query_via_graph(&ctx, x)?,
                        Method::Pca => pca.project_into(x, &mut sink),
                    }
                    std::hint::black_box(&sink);
                }
                Ok(())
            })? / nq;
            let rank_ms = timed(options.repetitions, || {
                for i in 0..q_coords.rows() {
                    std::hint::black_box(rank_by_distance(&db_coords, q_coords.row(i), "", None)?);
                }
                Ok(())
            })? / nq;
            let map = evaluate_retrieval(&db_coords, &db_ids, &q_coords, &q_ids, &w.truth)?.map;
            report.records.push(BenchRecord {
                method,
                d,
                m,
                k: k_text.clone(),
                omega: omega_text.clone(),
                iter: ime.iterations,
                embed_ms,
                rank_ms,
                map,
                threads: 1,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_samples() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_bench_shape_and_serialization() {
        let options = BenchOptions {
            sizes: vec![60, 120],
            repetitions: 2,
            queries: 12,
            query_k: 5,
            ..BenchOptions::default()
        };
        let mut config = PipelineConfig::default();
        config.ime.k_per_iter = vec![6, 6];
        let report = timing_bench(&config, &options).unwrap();
        assert_eq!(report.records.len(), 6);
        for r in &report.records {
            assert!(r.embed_ms >= 0.0 && r.rank_ms >= 0.0);
            assert!((0.0..=1.0).contains(&r.map));
        }
        let tsv = report.to_tsv();
        assert_eq!(tsv.lines().count(), 7);
        assert!(tsv.starts_with("method\td\tm\tk\tomega\titer\tembed_ms\trank_ms\tmap"));
        assert_eq!(BenchReport::parse_records(&report.to_records()).unwrap(), report);

        // mAP does not depend on how often the timing loop ran.
        let once = timing_bench(
            &config,
            &BenchOptions {
                repetitions: 1,
                ..options
            },
        )
        .unwrap();
        let maps = |r: &BenchReport| r.records.iter().map(|x| x.map).collect::<Vec<_>>();
        assert_eq!(maps(&once), maps(&report));
    }
}
