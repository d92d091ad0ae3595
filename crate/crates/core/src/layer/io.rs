use std::fs;
use std::path::Path;

use super::{ImeLayer, Provenance};
use crate::error::{ImeError, Location, Result};
use crate::matrix::Matrix;

pub const LAYER_MAGIC: &[u8; 6] = b"IMEL1\0";
pub const LAYER_VERSION: u8 = 1;

/// magic + version + n + m + alpha
const HEADER_BYTES: usize = 6 + 1 + 8 + 8 + 8;

pub fn encode_layer(layer: &ImeLayer) -> Vec<u8> {
    let w = layer.weights();
    let config = layer.provenance().config.as_bytes();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * w.as_slice().len() + 8 + config.len() + 32);
    out.extend_from_slice(LAYER_MAGIC);
    out.push(LAYER_VERSION);
    out.extend_from_slice(&(w.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(w.cols() as u64).to_le_bytes());
    out.extend_from_slice(&layer.alpha().to_le_bytes());
    for v in w.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(config);
    out.extend_from_slice(&layer.provenance().fingerprint);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(ImeError::parse(
                self.source,
                Location::Byte(self.bytes.len() as u64),
                format!("truncated file: expected {what}"),
            ));
        };
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn error(&self, at: usize, msg: impl Into<String>) -> ImeError {
        ImeError::parse(self.source, Location::Byte(at as u64), msg)
    }
}

pub fn decode_layer(bytes: &[u8], source: &str) -> Result<ImeLayer> {
    let mut r = Reader { bytes, pos: 0, source };
    if r.take(6, "magic")? != LAYER_MAGIC {
        return Err(r.error(0, "not a layer file (bad magic)"));
    }
    let version = r.take(1, "version byte")?[0];
    if version != LAYER_VERSION {
        return Err(ImeError::UnsupportedVersion {
            found: version,
            expected: LAYER_VERSION,
        });
    }
    let n = r.u64("input dimension")?;
    let m = r.u64("output dimension")?;
    let alpha = r.f64("alpha")?;
    let count = n
        .checked_mul(m)
        .and_then(|c| c.checked_mul(8))
        .filter(|&c| c <= (bytes.len() - r.pos) as u64)
        .ok_or_else(|| r.error(bytes.len(), format!("truncated file: {n} x {m} weights do not fit")))?;
    let start = r.pos;
    let weights: Vec<f64> = r
        .take(count as usize, "weights")?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(bad) = weights.iter().position(|v| !v.is_finite()) {
        return Err(r.error(start + 8 * bad, "non-finite weight"));
    }
    let config_len = r.u64("config length")?;
    let config_at = r.pos;
    let config = r.take(usize::try_from(config_len).unwrap_or(usize::MAX), "config block")?;
    let config = std::str::from_utf8(config)
        .map_err(|_| r.error(config_at, "config block is not UTF-8"))?
        .to_owned();
    let fingerprint: [u8; 32] = r.take(32, "fingerprint")?.try_into().unwrap();
    if r.pos != bytes.len() {
        return Err(r.error(r.pos, "trailing bytes after fingerprint"));
    }
    let weights = Matrix::from_vec(n as usize, m as usize, weights)?;
    ImeLayer::from_parts(weights, alpha, Provenance { config, fingerprint })
        .map_err(|e| r.error(HEADER_BYTES - 8, e.to_string()))
}

pub fn save_layer(layer: &ImeLayer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_layer(layer)).map_err(|e| ImeError::io(path, e))
}

pub fn load_layer(path: impl AsRef<Path>) -> Result<ImeLayer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ImeError::io(path, e))?;
    decode_layer(&bytes, &path.display().to_string())
}
