use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use ime_core::dataset::{lift_to_dimension, DescriptorFormat};
use ime_core::eval::{evaluate_retrieval, timed, timing_bench, BenchOptions, BenchRecord, BenchReport, Method};
use ime_core::layer::{encode_layer, Provenance};
use ime_core::{
    apply_layer, fit_layer, generate_holed_manifold, generate_swiss_roll, ime_fit, l2_normalize, load_descriptors,
    load_layer, rank_by_distance, DescriptorSet, GroundTruth, ImeError, PipelineConfig, Result,
};

use crate::args::{axis_values, BenchArgs, EmbedArgs, EvalArgs, FitArgs, Format, GenerateArgs, Kind, SweepArgs};
use crate::output::{ensure_distinct, ConfigSnapshot, InputRecord, Outputs, RunManifest, Versions};

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn load(path: &Path, format: Option<Format>) -> Result<DescriptorSet> {
    load_descriptors(path, Format::resolve(format, path))
}

fn normalized(set: DescriptorSet, config: &PipelineConfig, what: &str) -> DescriptorSet {
    if !config.normalize {
        return set;
    }
    let n = l2_normalize(&set);
    if !n.zero_rows.is_empty() {
        eprintln!("warning: {} zero rows in {what} left unnormalized", n.zero_rows.len());
    }
    n.set
}

fn read_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| ImeError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    GroundTruth::parse(&text, &path.display().to_string())
}

/// Runs `body`, removing everything it wrote if it fails.
fn transact(body: impl FnOnce(&mut Outputs) -> Result<()>) -> Result<()> {
    let mut outputs = Outputs::default();
    let result = body(&mut outputs);
    if result.is_err() {
        outputs.rollback();
    }
    result
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let data = match args.kind {
        Kind::Roll => generate_swiss_roll(args.count, args.noise, args.seed)?,
        Kind::Holed => generate_holed_manifold(args.count, args.hole_fraction, args.seed)?,
    };
    let set = match args.dim {
        Some(dim) if dim != data.set.dim() => {
            lift_to_dimension(&data.set, dim, 0.0, args.seed.wrapping_add(1))?.with_ids(data.set.id_list())?
        }
        _ => data.set.clone(),
    };
    transact(|out| {
        out.write_descriptors(&set, &args.out, Format::resolve(args.format, &args.out))?;
        if let Some(path) = &args.truth {
            out.write_bytes(path, data.truth.to_text().as_bytes())?;
        }
        Ok(())
    })?;
    println!(
        "wrote {} points of dimension {} in {} bands",
        set.len(),
        set.dim(),
        data.bands()
    );
    Ok(())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let config = args.flags.resolve(&args.shape)?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut s = args.out.as_os_str().to_owned();
        s.push(".manifest.json");
        s.into()
    });
    let mut inputs: Vec<&Path> = vec![&args.input];
    if let Some(c) = &args.flags.config {
        inputs.push(c);
    }
    let mut outputs: Vec<&Path> = vec![&args.out, &manifest_path];
    if let Some(e) = &args.embedding {
        outputs.push(e);
    }
    ensure_distinct(&inputs, &outputs)?;

    let mut stage_ms = BTreeMap::new();
    let start = Instant::now();
    let raw = load(&args.input, args.format)?;
    let input_record = InputRecord::new(&args.input, &raw);
    let train = normalized(raw, &config, "the database");
    config.validate(Some(train.len()))?;
    stage_ms.insert("load", ms_since(start));

    let start = Instant::now();
    let embedding = ime_fit(&train, &config.ime)?;
    stage_ms.insert("embedding", ms_since(start));

    let start = Instant::now();
    let layer = fit_layer(&train, &embedding, config.alpha)?.with_provenance(Provenance::new(&train, config.to_text()));
    stage_ms.insert("layer", ms_since(start));
    if embedding.was_truncated() {
        eprintln!(
            "warning: only {} of {} requested dimensions have positive eigenvalues",
            embedding.dim(),
            config.ime.target_dim
        );
    }

    let start = Instant::now();
    transact(|out| {
        out.write_bytes(&args.out, &encode_layer(&layer))?;
        if let Some(path) = &args.embedding {
            let coords = DescriptorSet::new(embedding.coords.clone(), Some(train.id_list()))?;
            out.write_descriptors(&coords, path, DescriptorFormat::Binary)?;
        }
        stage_ms.insert("write", ms_since(start));
        let manifest = RunManifest {
            command: "fit",
            versions: Versions::default(),
            config: ConfigSnapshot::from(&config),
            inputs: vec![input_record],
            outputs: out.paths().iter().map(|p| p.display().to_string()).collect(),
            stage_ms,
            layer_fingerprint: layer.provenance().fingerprint_hex(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        out.write_bytes(&manifest_path, text.as_bytes())
    })?;
    println!(
        "fitted {} -> {} layer on {} points; wrote {}",
        layer.input_dim(),
        layer.output_dim(),
        train.len(),
        args.out.display()
    );
    Ok(())
}

pub fn embed(args: &EmbedArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&args.layer, &args.queries];
    if let Some(t) = &args.train {
        inputs.push(t);
    }
    ensure_distinct(&inputs, &[&args.out])?;
    let layer = load_layer(&args.layer)?;
    let stored = &layer.provenance().config;
    let config = if stored.is_empty() {
        PipelineConfig::default()
    } else {
        PipelineConfig::parse(stored)?
    };
    if let Some(path) = &args.train {
        let train = normalized(load(path, None)?, &config, "the training set");
        if !layer.provenance().matches(&train) {
            let msg = format!(
                "layer {} was not fitted on {} with its stored config",
                args.layer.display(),
                path.display()
            );
            if args.strict {
                return Err(ImeError::FingerprintMismatch(msg));
            }
            eprintln!("warning: {msg}");
        }
    }
    let queries = normalized(load(&args.queries, None)?, &config, "the queries");
    if queries.dim() != layer.input_dim() {
        return Err(ImeError::InvalidArgument(format!(
            "queries have dimension {}, layer expects {}",
            queries.dim(),
            layer.input_dim()
        )));
    }
    let coords = apply_layer(&layer, &queries)?;
    let mut sink = vec![0.0; layer.output_dim()];
    let per_query = timed(5, || {
        for i in 0..queries.len() {
            layer.apply_into(queries.row(i), &mut sink);
            std::hint::black_box(&sink);
        }
        Ok(())
    })? / queries.len() as f64;
    let out_set = DescriptorSet::new(coords, queries.ids().map(<[String]>::to_vec))?;
    transact(|out| out.write_descriptors(&out_set, &args.out, DescriptorFormat::Binary))?;
    println!(
        "embedded {} queries into {} dimensions; per-query embed time {:.6} ms",
        out_set.len(),
        out_set.dim(),
        per_query
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct ApRecord<'a> {
    query: &'a str,
    ap: f64,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let database = load(&args.database, None)?;
    let queries = match &args.queries {
        Some(p) => load(p, None)?,
        None => database.clone(),
    };
    let truth = read_truth(&args.truth)?;
    let report = evaluate_retrieval(
        database.vectors(),
        &database.id_list(),
        queries.vectors(),
        &queries.id_list(),
        &truth,
    )?;
    if let Some(path) = &args.records {
        let text: String = report
            .per_query
            .iter()
            .map(|(q, ap)| serde_json::to_string(&ApRecord { query: q, ap: *ap }).expect("record serializes") + "\n")
            .collect();
        transact(|out| out.write_bytes(path, text.as_bytes()))?;
    }
    let mut stdout = io::stdout().lock();
    let mut table = String::from("query\tap\n");
    for (q, ap) in &report.per_query {
        table.push_str(&format!("{q}\t{ap:.6}\n"));
    }
    table.push_str(&format!("mAP\t{:.6}\n", report.map));
    stdout.write_all(table.as_bytes()).map_err(|e| ImeError::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let base = args.flags.resolve(&Default::default())?;
    let (database, truth) = match &args.input {
        Some(path) => {
            let truth_path = args.truth.as_ref().expect("clap requires --truth with --input");
            (load(path, None)?, read_truth(truth_path)?)
        }
        None => {
            let data = generate_holed_manifold(args.count, args.hole_fraction, base.seed)?;
            (data.set, data.truth)
        }
    };
    let database = normalized(database, &base, "the database");
    let ids = database.id_list();
    let rows = truth
        .queries
        .iter()
        .map(|q| {
            ids.iter()
                .position(|id| *id == q.query)
                .ok_or_else(|| ImeError::Reference {
                    query: q.query.clone(),
                    message: "sweep queries must be database ids".into(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let queries = database
        .select(&rows)?
        .with_ids(truth.queries.iter().map(|q| q.query.clone()).collect())?;

    fn axis<T: std::str::FromStr + PartialEq + Copy + std::fmt::Display>(
        name: &str,
        text: &Option<String>,
        default: T,
    ) -> Result<Vec<T>> {
        let Some(text) = text else { return Ok(vec![default]) };
        let (kept, dropped) = axis_values(name, text)?;
        if !dropped.is_empty() {
            let shown: Vec<String> = dropped.iter().map(T::to_string).collect();
            eprintln!("warning: --{name}: ignoring duplicate values {}", shown.join(","));
        }
        Ok(kept)
    }
    let iters = axis("iter", &args.axes.iter, base.ime.iterations)?;
    let dims = axis("dim", &args.axes.dim, base.ime.target_dim)?;
    let ks = axis("k", &args.axes.k, base.ime.k_per_iter[0])?;
    let omegas = axis("omega", &args.axes.omega, base.ime.omega_per_iter[0])?;
    if args.reps == 0 {
        return Err(ImeError::InvalidArgument("--reps must be positive".into()));
    }
    let keep_k = args.axes.k.is_none() && args.axes.iter.is_none();
    let keep_omega = args.axes.omega.is_none() && args.axes.iter.is_none();

    let mut report = BenchReport::default();
    for &iter in &iters {
        for &dim in &dims {
            for &k in &ks {
                for &omega in &omegas {
                    let mut config = base.clone();
                    config.ime.iterations = iter;
                    config.ime.target_dim = dim;
                    if !keep_k {
                        config.ime.k_per_iter = vec![k; iter];
                    }
                    if !keep_omega {
                        config.ime.omega_per_iter = vec![omega; iter];
                    }
                    config.validate(Some(database.len()))?;
                    log::info!("sweep iter={iter} dim={dim} k={k} omega={omega}");
                    report
                        .records
                        .push(sweep_point(&config, &database, &queries, &truth, args.reps)?);
                }
            }
        }
    }
    emit_report(&report, args.records.as_deref(), args.tsv.as_deref())
}

/// One fit scored with the layer protocol: database items keep their
/// embedding, queries go through the layer.
fn sweep_point(
    config: &PipelineConfig,
    database: &DescriptorSet,
    queries: &DescriptorSet,
    truth: &GroundTruth,
    reps: usize,
) -> Result<BenchRecord> {
    let embedding = ime_fit(database, &config.ime)?;
    let layer = fit_layer(database, &embedding, config.alpha)?;
    let q_coords = apply_layer(&layer, queries)?;
    let map = evaluate_retrieval(
        &embedding.coords,
        &database.id_list(),
        &q_coords,
        &queries.id_list(),
        truth,
    )?
    .map;
    let nq = queries.len() as f64;
    let mut sink = vec![0.0; layer.output_dim()];
    let embed_ms = timed(reps, || {
        for i in 0..queries.len() {
            layer.apply_into(queries.row(i), &mut sink);
            std::hint::black_box(&sink);
        }
        Ok(())
    })? / nq;
    let rank_ms = timed(reps, || {
        for i in 0..q_coords.rows() {
            std::hint::black_box(rank_by_distance(&embedding.coords, q_coords.row(i), "", None)?);
        }
        Ok(())
    })? / nq;
    let join = |v: Vec<String>| v.join(",");
    Ok(BenchRecord {
        method: Method::ImeLayer,
        d: database.len(),
        m: embedding.dim(),
        k: join(config.ime.k_per_iter.iter().map(usize::to_string).collect()),
        omega: join(config.ime.omega_per_iter.iter().map(f64::to_string).collect()),
        iter: config.ime.iterations,
        embed_ms,
        rank_ms,
        map,
        threads: 1,
    })
}

fn emit_report(report: &BenchReport, records: Option<&Path>, tsv: Option<&Path>) -> Result<()> {
    let table = report.to_tsv();
    transact(|out| {
        if let Some(path) = records {
            out.write_bytes(path, report.to_records().as_bytes())?;
        }
        if let Some(path) = tsv {
            out.write_bytes(path, table.as_bytes())?;
        }
        Ok(())
    })?;
    io::stdout()
        .lock()
        .write_all(table.as_bytes())
        .map_err(|e| ImeError::Io {
            path: "<stdout>".into(),
            source: e,
        })
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let config = args.flags.resolve(&args.shape)?;
    let (sizes, _) = axis_values::<usize>("sizes", &args.sizes)?;
    let options = BenchOptions {
        sizes,
        repetitions: args.reps,
        queries: args.queries,
        input_dim: args.input_dim,
        noise: args.noise,
        query_k: args.query_k,
    };
    let report = timing_bench(&config, &options)?;
    emit_report(&report, args.records.as_deref(), args.tsv.as_deref())
}
