use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ime_core::config::parse_list;
use ime_core::dataset::DescriptorFormat;
use ime_core::{ImeError, PipelineConfig, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Roll,
    Holed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    pub fn resolve(format: Option<Format>, path: &std::path::Path) -> DescriptorFormat {
        match format {
            Some(Format::Binary) => DescriptorFormat::Binary,
            Some(Format::Csv) => DescriptorFormat::Csv,
            None => DescriptorFormat::from_path(path),
        }
    }
}

/// Pipeline settings other than the four sweepable axes. Each flag, when
/// given, overrides the config file, which overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ridge weight of the layer fit.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Distance-to-similarity conversion: tdist or quad.
    #[arg(long, value_parser = ["tdist", "quad"])]
    pub conv: Option<String>,
    /// Double-center the similarity matrix.
    #[arg(long)]
    pub center: bool,
    #[arg(long, overrides_with = "no_second_order")]
    pub second_order: bool,
    #[arg(long)]
    pub no_second_order: bool,
    /// Shortest-path backend: fw (Floyd-Warshall) or sparse (per-source Dijkstra).
    #[arg(long, value_parser = ["fw", "sparse"])]
    pub geodesic: Option<String>,
    /// Eigen solver: auto, dense or lanczos.
    #[arg(long, value_parser = ["auto", "dense", "lanczos"])]
    pub eigen: Option<String>,
    /// L2-normalize database and query descriptors.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Single values for the sweepable axes.
#[derive(Debug, Clone, Default, Args)]
pub struct ShapeFlags {
    /// Number of embedding iterations.
    #[arg(long)]
    pub iter: Option<usize>,
    /// Output dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Neighbours per iteration, comma separated; one value applies to all.
    #[arg(long)]
    pub k: Option<String>,
    /// Euclidean correction weight per iteration, comma separated.
    #[arg(long)]
    pub omega: Option<String>,
}

impl ConfigFlags {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(&self, shape: &ShapeFlags) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            match value {
                Some(v) => config.set(key, &v),
                None => Ok(()),
            }
        };
        set("iter", shape.iter.map(|v| v.to_string()))?;
        set("dim", shape.dim.map(|v| v.to_string()))?;
        set("k", shape.k.clone())?;
        set("omega", shape.omega.clone())?;
        set("alpha", self.alpha.map(|v| v.to_string()))?;
        set("conv", self.conv.clone())?;
        set("center", self.center.then(|| "true".into()))?;
        set("second_order", self.second_order.then(|| "true".into()))?;
        set("second_order", self.no_second_order.then(|| "false".into()))?;
        set("geodesic", self.geodesic.clone())?;
        set("eigen", self.eigen.clone())?;
        set("normalize", self.normalize.then(|| "true".into()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        config.broadcast_lists();
        config.validate(None)?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "roll")]
    pub kind: Kind,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    /// Gaussian noise added to each coordinate (roll only).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of the arc-length slots left empty (holed only).
    #[arg(long, default_value_t = 0.3)]
    pub hole_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lift the 3-D points to this many dimensions with a random rotation.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Descriptor output file.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth output file.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Database descriptors.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[command(flatten)]
    pub shape: ShapeFlags,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Layer file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the database embedding, in the binary descriptor format.
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    /// Run manifest; defaults to `<out>.manifest.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub layer: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Embedded coordinates, binary descriptor format.
    #[arg(long)]
    pub out: PathBuf,
    /// Training descriptors to check the layer fingerprint against.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Fail instead of warning when the fingerprint does not match.
    #[arg(long, requires = "train")]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Database coordinates.
    #[arg(long)]
    pub database: PathBuf,
    /// Query coordinates; defaults to the database itself.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Ground truth: `query_id: relevant_id ...` per line.
    #[arg(long)]
    pub truth: PathBuf,
    /// Per-query AP as JSON lines.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

/// Comma-separated values for each sweepable axis.
#[derive(Debug, Clone, Default, Args)]
pub struct SweepAxes {
    #[arg(long)]
    pub iter: Option<String>,
    #[arg(long)]
    pub dim: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub omega: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub axes: SweepAxes,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Database descriptors; a holed manifold is generated when absent.
    #[arg(long, requires = "truth")]
    pub input: Option<PathBuf>,
    /// Ground truth whose queries are database ids.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0.3)]
    pub hole_fraction: f64,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub shape: ShapeFlags,
    #[command(flatten)]
    pub flags: ConfigFlags,
    /// Database sizes, comma separated.
    #[arg(long, default_value = "500,2000,5000")]
    pub sizes: String,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 50)]
    pub queries: usize,
    /// Descriptor dimension the roll is lifted to.
    #[arg(long, default_value_t = 3)]
    pub input_dim: usize,
    /// Training points each graph-linked query connects to.
    #[arg(long, default_value_t = 10)]
    pub query_k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub tsv: Option<PathBuf>,
}

/// Parses a comma list and removes repeated values, keeping first
/// occurrences. Returns the removed duplicates alongside.
pub fn axis_values<T: std::str::FromStr + PartialEq + Copy>(name: &str, text: &str) -> Result<(Vec<T>, Vec<T>)> {
    let parsed: Vec<T> = parse_list(text)?;
    if parsed.is_empty() {
        return Err(ImeError::InvalidArgument(format!("--{name}: empty range")));
    }
    let mut kept = Vec::with_capacity(parsed.len());
    let mut dropped = Vec::new();
    for v in parsed {
        if kept.contains(&v) {
            dropped.push(v);
        } else {
            kept.push(v);
        }
    }
    Ok((kept, dropped))
}
