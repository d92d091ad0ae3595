//! Binary (`IMEV1`) and CSV descriptor files.
//!
//! Binary layout: the 6 magic bytes `IMEV1\0`, then `d` and `n` as little-endian
//! u64, then `d * n` little-endian f32 values in row-major order. Ids, when
//! present, live in a sidecar `<path>.ids` with one id per line.
//!
//! Values are widened to f64 on load and narrowed to f32 on save, so a
//! load/save/load cycle is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{ImeError, Location, Result};
use crate::matrix::Matrix;

use super::DescriptorSet;

pub const BINARY_MAGIC: &[u8; 6] = b"IMEV1\0";
pub const BINARY_HEADER_BYTES: usize = 6 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorFormat {
    Binary,
    Csv,
}

impl DescriptorFormat {
    /// `.csv` means CSV, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DescriptorFormat::Csv,
            _ => DescriptorFormat::Binary,
        }
    }
}

impl std::str::FromStr for DescriptorFormat {
    type Err = ImeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "bin" => Ok(DescriptorFormat::Binary),
            "csv" => Ok(DescriptorFormat::Csv),
            other => Err(ImeError::invalid(format!("unknown descriptor format {other:?}"))),
        }
    }
}

fn ids_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

pub fn load_descriptors(path: impl AsRef<Path>, format: DescriptorFormat) -> Result<DescriptorSet> {
    let path = path.as_ref();
    match format {
        DescriptorFormat::Binary => load_binary(path),
        DescriptorFormat::Csv => load_csv(path),
    }
}

pub fn save_descriptors(set: &DescriptorSet, path: impl AsRef<Path>, format: DescriptorFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        DescriptorFormat::Binary => save_binary(set, path),
        DescriptorFormat::Csv => save_csv(set, path),
    }
}

fn load_binary(path: &Path) -> Result<DescriptorSet> {
    let bytes = fs::read(path).map_err(|e| ImeError::io(path, e))?;
    let shown = path.display();
    if bytes.len() < BINARY_HEADER_BYTES {
        return Err(ImeError::parse(
            shown,
            Location::Byte(bytes.len() as u64),
            format!("truncated header: {} of {BINARY_HEADER_BYTES} bytes", bytes.len()),
        ));
    }
    if &bytes[..6] != BINARY_MAGIC {
        return Err(ImeError::parse(shown, Location::Byte(0), "bad magic, expected IMEV1"));
    }
    let rows = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let cols = u64::from_le_bytes(bytes[14..22].try_into().expect("8 bytes"));
    if rows == 0 || cols == 0 {
        return Err(ImeError::parse(shown, Location::Byte(6), "empty descriptor set"));
    }
    let payload = &bytes[BINARY_HEADER_BYTES..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| ImeError::parse(&shown, Location::Byte(6), "header dimensions overflow"))?;
    if payload.len() as u64 != expected {
        return Err(ImeError::parse(
            shown,
            Location::Byte(BINARY_HEADER_BYTES as u64),
            format!(
                "header declares {rows}x{cols} ({expected} payload bytes) but payload has {} bytes",
                payload.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity((rows * cols) as usize);
    for (idx, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(ImeError::parse(
                shown,
                Location::Byte((BINARY_HEADER_BYTES + 4 * idx) as u64),
                format!("non-finite value {v}"),
            ));
        }
        data.push(f64::from(v));
    }
    let vectors = Matrix::from_vec(rows as usize, cols as usize, data)?;

    let sidecar = ids_sidecar(path);
    let ids = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| ImeError::io(&sidecar, e))?;
        Some(text.lines().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };
    DescriptorSet::new(vectors, ids).map_err(|e| match e {
        ImeError::InvalidArgument(msg) => ImeError::parse(sidecar.display(), Location::Line(1), msg),
        other => other,
    })
}

fn save_binary(set: &DescriptorSet, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(BINARY_HEADER_BYTES + 4 * set.len() * set.dim());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    out.extend_from_slice(&(set.dim() as u64).to_le_bytes());
    for &v in set.vectors().as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| ImeError::io(path, e))?;
    if let Some(ids) = set.ids() {
        let sidecar = ids_sidecar(path);
        let mut text = ids.join("\n");
        text.push('\n');
        fs::write(&sidecar, text).map_err(|e| ImeError::io(&sidecar, e))?;
    }
    Ok(())
}

fn load_csv(path: &Path) -> Result<DescriptorSet> {
    let shown = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => ImeError::io(path, io),
            other => ImeError::parse(&shown, Location::Line(1), format!("{other:?}")),
        })?;

    let mut with_ids = false;
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut cols = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| ImeError::parse(&shown, Location::Line(line), e.to_string()))?;
        if idx == 0 && record.get(0) == Some("id") {
            with_ids = true;
            continue;
        }
        let mut fields = record.iter();
        if with_ids {
            let id = fields
                .next()
                .ok_or_else(|| ImeError::parse(&shown, Location::Line(line), "missing id column"))?;
            ids.push(id.to_owned());
        }
        let mut count = 0;
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| ImeError::parse(&shown, Location::Line(line), format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(ImeError::parse(
                    &shown,
                    Location::Line(line),
                    format!("non-finite value {field}"),
                ));
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(ImeError::parse(
                    &shown,
                    Location::Line(line),
                    format!("row has {count} values, expected {c}"),
                ))
            }
            Some(_) => {}
        }
    }
    let cols = cols.unwrap_or(0);
    if cols == 0 || data.is_empty() {
        return Err(ImeError::parse(shown, Location::Line(1), "empty descriptor set"));
    }
    let vectors = Matrix::from_vec(data.len() / cols, cols, data)?;
    DescriptorSet::new(vectors, with_ids.then_some(ids))
        .map_err(|e| ImeError::parse(&shown, Location::Line(1), e.to_string()))
}

fn save_csv(set: &DescriptorSet, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => ImeError::io(path, io),
        other => ImeError::io(path, std::io::Error::other(format!("{other:?}"))),
    })?;
    let to_io = |e: csv::Error| ImeError::io(path, std::io::Error::other(e.to_string()));
    if let Some(ids) = set.ids() {
        let mut header = vec!["id".to_owned()];
        header.extend((0..set.dim()).map(|j| format!("c{j}")));
        writer.write_record(&header).map_err(to_io)?;
        for (i, id) in ids.iter().enumerate() {
            let mut record = vec![id.clone()];
            record.extend(set.row(i).iter().map(|v| v.to_string()));
            writer.write_record(&record).map_err(to_io)?;
        }
    } else {
        for i in 0..set.len() {
            writer
                .write_record(set.row(i).iter().map(|v| v.to_string()))
                .map_err(to_io)?;
        }
    }
    writer.flush().map_err(|e| ImeError::io(path, e))
}
