//! `key = value` pipeline configuration files.
//!
//! ```text
//! iter = 2
//! dim = 2
//! k = 10,10
//! omega = 2,2
//! alpha = 1
//! conv = tdist
//! center = false
//! second_order = true
//! geodesic = fw
//! eigen = auto
//! normalize = false
//! seed = 0
//! ```
//!
//! A single `k` or `omega` value applies to every iteration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embedding::{Conversion, ConversionKind, EigenBackend, ImeConfig};
use crate::error::{ImeError, Location, Result};
use crate::graph::GeodesicBackend;

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Embedding parameters plus the ridge weight and input handling.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub ime: ImeConfig,
    pub alpha: f64,
    /// L2-normalize database and query descriptors before use.
    pub normalize: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ime: ImeConfig::default(),
            alpha: DEFAULT_ALPHA,
            normalize: false,
            seed: 0,
        }
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

pub fn conversion_name(conv: ConversionKind) -> &'static str {
    match conv.kind {
        Conversion::TDistribution => "tdist",
        Conversion::Quadratic => "quad",
    }
}

pub fn geodesic_name(backend: GeodesicBackend) -> &'static str {
    match backend {
        GeodesicBackend::FloydWarshall => "fw",
        GeodesicBackend::PerSource => "sparse",
    }
}

pub fn eigen_name(backend: EigenBackend) -> &'static str {
    match backend {
        EigenBackend::Auto => "auto",
        EigenBackend::Dense => "dense",
        EigenBackend::Lanczos => "lanczos",
    }
}

pub fn parse_conversion(s: &str) -> Result<Conversion> {
    match s {
        "tdist" | "t" | "t_distribution" => Ok(Conversion::TDistribution),
        "quad" | "quadratic" => Ok(Conversion::Quadratic),
        other => Err(ImeError::invalid(format!("unknown conversion {other:?} (tdist|quad)"))),
    }
}

pub fn parse_geodesic(s: &str) -> Result<GeodesicBackend> {
    match s {
        "fw" | "floyd_warshall" => Ok(GeodesicBackend::FloydWarshall),
        "sparse" | "per_source" => Ok(GeodesicBackend::PerSource),
        other => Err(ImeError::invalid(format!(
            "unknown geodesic backend {other:?} (fw|sparse)"
        ))),
    }
}

fn parse_eigen(s: &str) -> Result<EigenBackend> {
    match s {
        "auto" => Ok(EigenBackend::Auto),
        "dense" => Ok(EigenBackend::Dense),
        "lanczos" => Ok(EigenBackend::Lanczos),
        other => Err(ImeError::invalid(format!(
            "unknown eigen backend {other:?} (auto|dense|lanczos)"
        ))),
    }
}

pub fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(ImeError::invalid(format!("expected a boolean, got {other:?}"))),
    }
}

pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| ImeError::invalid(format!("bad list entry {t:?}")))
        })
        .collect()
}

impl PipelineConfig {
    pub fn to_text(&self) -> String {
        let c = &self.ime;
        let mut out = String::new();
        let _ = writeln!(out, "iter = {}", c.iterations);
        let _ = writeln!(out, "dim = {}", c.target_dim);
        let _ = writeln!(out, "k = {}", join(&c.k_per_iter));
        let _ = writeln!(out, "omega = {}", join(&c.omega_per_iter));
        let _ = writeln!(out, "alpha = {}", self.alpha);
        let _ = writeln!(out, "conv = {}", conversion_name(c.conversion));
        let _ = writeln!(out, "center = {}", c.conversion.center);
        let _ = writeln!(out, "second_order = {}", c.use_second_order);
        let _ = writeln!(out, "geodesic = {}", geodesic_name(c.geodesic_backend));
        let _ = writeln!(out, "eigen = {}", eigen_name(c.eigen_backend));
        let _ = writeln!(out, "normalize = {}", self.normalize);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }

    /// Applies the keys found in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: ImeError| ImeError::parse(source, Location::Line(idx + 1), e.to_string());
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ImeError::parse(source, Location::Line(idx + 1), "expected key = value"))?;
            self.set(key.trim(), value.trim()).map_err(at)?;
        }
        self.broadcast_lists();
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_num = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| ImeError::invalid(format!("{key}: not a number: {v:?}")))
        };
        let parse_int = |v: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| ImeError::invalid(format!("{key}: not an integer: {v:?}")))
        };
        match key {
            "iter" => self.ime.iterations = parse_int(value)? as usize,
            "dim" => self.ime.target_dim = parse_int(value)? as usize,
            "k" => self.ime.k_per_iter = parse_list(value)?,
            "omega" => self.ime.omega_per_iter = parse_list(value)?,
            "alpha" => self.alpha = parse_num(value)?,
            "conv" => self.ime.conversion.kind = parse_conversion(value)?,
            "center" => self.ime.conversion.center = parse_bool(value)?,
            "second_order" => self.ime.use_second_order = parse_bool(value)?,
            "geodesic" => self.ime.geodesic_backend = parse_geodesic(value)?,
            "eigen" => self.ime.eigen_backend = parse_eigen(value)?,
            "normalize" => self.normalize = parse_bool(value)?,
            "seed" => self.seed = parse_int(value)?,
            other => return Err(ImeError::invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Stretches uniform `k`/`omega` lists (one value, or all entries equal)
    /// to the iteration count.
    pub fn broadcast_lists(&mut self) {
        let n = self.ime.iterations;
        fn stretch<T: Copy + PartialEq>(list: &mut Vec<T>, n: usize) {
            if n > 0 && list.len() != n && !list.is_empty() && list.iter().all(|v| *v == list[0]) {
                *list = vec![list[0]; n];
            }
        }
        stretch(&mut self.ime.k_per_iter, n);
        stretch(&mut self.ime.omega_per_iter, n);
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text, "<config>")?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ImeError::io(path, e))?;
        let mut config = Self::default();
        config.apply_text(&text, &path.display().to_string())?;
        Ok(config)
    }

    pub fn validate(&self, items: Option<usize>) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(ImeError::invalid(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        self.ime.validate(items)
    }
}
