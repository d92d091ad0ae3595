//! Line-oriented ground truth: `query_id: rel_id rel_id ...`.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{ImeError, Location, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthQuery {
    pub query: String,
    pub relevant: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub queries: Vec<GroundTruthQuery>,
}

/// A ground-truth query mapped onto database row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedQuery {
    pub id: String,
    pub index: usize,
    pub relevant: BTreeSet<usize>,
}

impl GroundTruth {
    /// Parses the text format. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut queries = Vec::new();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (query, rest) = line
                .split_once(':')
                .ok_or_else(|| ImeError::parse(source, Location::Line(idx + 1), "expected \"query_id: rel_id ...\""))?;
            let query = query.trim();
            if query.is_empty() {
                return Err(ImeError::parse(source, Location::Line(idx + 1), "empty query id"));
            }
            if !seen.insert(query.to_owned()) {
                return Err(ImeError::Reference {
                    query: query.to_owned(),
                    message: format!("duplicate query at line {}", idx + 1),
                });
            }
            let relevant: Vec<String> = rest.split_whitespace().map(str::to_owned).collect();
            if relevant.is_empty() {
                return Err(ImeError::Reference {
                    query: query.to_owned(),
                    message: "empty relevant set".into(),
                });
            }
            queries.push(GroundTruthQuery {
                query: query.to_owned(),
                relevant,
            });
        }
        Ok(Self { queries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for q in &self.queries {
            out.push_str(&q.query);
            out.push(':');
            for r in &q.relevant {
                out.push(' ');
                out.push_str(r);
            }
            out.push('\n');
        }
        out
    }

    /// Checks every referenced id against `ids` and maps to row indices.
    pub fn resolve(&self, ids: &[String]) -> Result<Vec<ResolvedQuery>> {
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let lookup = |query: &str, id: &str| {
            index.get(id).copied().ok_or_else(|| ImeError::Reference {
                query: query.to_owned(),
                message: format!("unknown id {id:?}"),
            })
        };
        self.queries
            .iter()
            .map(|q| {
                if q.relevant.is_empty() {
                    return Err(ImeError::Reference {
                        query: q.query.clone(),
                        message: "empty relevant set".into(),
                    });
                }
                let relevant = q
                    .relevant
                    .iter()
                    .map(|r| lookup(&q.query, r))
                    .collect::<Result<BTreeSet<_>>>()?;
                Ok(ResolvedQuery {
                    id: q.query.clone(),
                    index: lookup(&q.query, &q.query)?,
                    relevant,
                })
            })
            .collect()
    }
}

/// Loads a ground-truth file and validates it against the database ids.
pub fn load_ground_truth(path: impl AsRef<Path>, ids: &[String]) -> Result<GroundTruth> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ImeError::io(path, e))?;
    let gt = GroundTruth::parse(&text, &path.display().to_string())?;
    gt.resolve(ids)?;
    Ok(gt)
}

pub fn save_ground_truth(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, gt.to_text()).map_err(|e| ImeError::io(path, e))
}
