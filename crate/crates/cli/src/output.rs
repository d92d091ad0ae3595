//! Output files are written to a temporary sibling and renamed into place,
//! and a failed command removes whatever it already wrote.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use ime_core::dataset::DescriptorFormat;
use ime_core::{save_descriptors, DescriptorSet, ImeError, Result};
use serde::Serialize;

fn io_err(path: &Path, source: std::io::Error) -> ImeError {
    ImeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn temp_for(path: &Path) -> PathBuf {
    sibling(path, &format!(".tmp{}", std::process::id()))
}

#[derive(Debug, Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write_bytes(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        let tmp = temp_for(path);
        fs::write(&tmp, bytes).map_err(|e| io_err(path, e))?;
        self.commit(&tmp, path)
    }

    /// Descriptor files come with an id sidecar, which moves with them.
    pub fn write_descriptors(&mut self, set: &DescriptorSet, path: &Path, format: DescriptorFormat) -> Result<()> {
        let tmp = temp_for(path);
        if let Err(e) = save_descriptors(set, &tmp, format) {
            let _ = fs::remove_file(&tmp);
            let _ = fs::remove_file(sibling(&tmp, ".ids"));
            return Err(e);
        }
        let (tmp_ids, ids) = (sibling(&tmp, ".ids"), sibling(path, ".ids"));
        if tmp_ids.exists() {
            self.commit(&tmp_ids, &ids)?;
        } else if ids.exists() {
            // A stale sidecar would attach the wrong ids to the new file.
            fs::remove_file(&ids).map_err(|e| io_err(&ids, e))?;
        }
        self.commit(&tmp, path)
    }

    fn commit(&mut self, tmp: &Path, path: &Path) -> Result<()> {
        if let Err(e) = fs::rename(tmp, path) {
            let _ = fs::remove_file(tmp);
            return Err(io_err(path, e));
        }
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn rollback(&mut self) {
        for path in self.written.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

/// Refuses to let an output path replace one of the inputs.
pub fn ensure_distinct(inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    let canon = |p: &Path| fs::canonicalize(p).ok();
    for out in outputs {
        let Some(out_c) = canon(out) else { continue };
        if inputs.iter().any(|i| canon(i).as_deref() == Some(out_c.as_path())) {
            return Err(ImeError::InvalidArgument(format!(
                "output {} would overwrite an input file",
                out.display()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub rows: usize,
    pub dim: usize,
    /// SHA-256 of the descriptor values as loaded.
    pub sha256: String,
}

impl InputRecord {
    pub fn new(path: &Path, set: &DescriptorSet) -> Self {
        Self {
            path: path.display().to_string(),
            rows: set.len(),
            dim: set.dim(),
            sha256: hex(&set.fingerprint()),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ConfigSnapshot {
    pub iter: usize,
    pub dim: usize,
    pub k: Vec<usize>,
    pub omega: Vec<f64>,
    pub alpha: f64,
    pub conv: &'static str,
    pub center: bool,
    pub second_order: bool,
    pub geodesic: &'static str,
    pub eigen: &'static str,
    pub normalize: bool,
    pub seed: u64,
}

impl From<&ime_core::PipelineConfig> for ConfigSnapshot {
    fn from(c: &ime_core::PipelineConfig) -> Self {
        use ime_core::config::{conversion_name, eigen_name, geodesic_name};
        Self {
            iter: c.ime.iterations,
            dim: c.ime.target_dim,
            k: c.ime.k_per_iter.clone(),
            omega: c.ime.omega_per_iter.clone(),
            alpha: c.alpha,
            conv: conversion_name(c.ime.conversion),
            center: c.ime.conversion.center,
            second_order: c.ime.use_second_order,
            geodesic: geodesic_name(c.ime.geodesic_backend),
            eigen: eigen_name(c.ime.eigen_backend),
            normalize: c.normalize,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub tool: &'static str,
    pub layer_format: u8,
    pub descriptor_format: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            tool: env!("CARGO_PKG_VERSION"),
            layer_format: ime_core::layer::LAYER_VERSION,
            descriptor_format: "IMEV1",
        }
    }
}

/// What a `fit` run read, produced and how long each stage took.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub versions: Versions,
    pub config: ConfigSnapshot,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub stage_ms: BTreeMap<&'static str, f64>,
    pub layer_fingerprint: String,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
