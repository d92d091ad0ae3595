//! Retrieval metrics and the query-time benchmark.

mod bench;

use std::collections::{BTreeSet, HashMap};

use crate::dataset::GroundTruth;
use crate::error::{ImeError, Result};
use crate::matrix::{squared_euclidean, Matrix};

pub use bench::{timed, timing_bench, BenchOptions, BenchRecord, BenchReport, Method};

/// Database rows ordered by ascending Euclidean distance to one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub order: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Full ranking of `database` rows by distance to `query`, ties broken by
/// ascending row index. `exclude` drops the query's own row.
pub fn rank_by_distance(
    database: &Matrix,
    query: &[f64],
    query_id: impl Into<String>,
    exclude: Option<usize>,
) -> Result<RankedList> {
    if query.len() != database.cols() {
        return Err(ImeError::invalid(format!(
            "query has dimension {}, database has {}",
            query.len(),
            database.cols()
        )));
    }
    let mut scored: Vec<(f64, usize)> = database
        .row_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, row)| (squared_euclidean(row, query), i))
        .collect();
    scored.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(RankedList {
        query_id: query_id.into(),
        order: scored.iter().map(|s| s.1).collect(),
        distances: scored.iter().map(|s| s.0.sqrt()).collect(),
    })
}

/// Precision averaged over the ranks of the relevant items, over the full
/// ranking. Relevant items missing from the ranking count as never retrieved.
pub fn average_precision(ranked: &RankedList, relevant: &BTreeSet<usize>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(ImeError::invalid(format!(
            "query {}: empty relevant set",
            ranked.query_id
        )));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, idx) in ranked.order.iter().enumerate() {
        if relevant.contains(idx) {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
            if hits == relevant.len() {
                break;
            }
        }
    }
    Ok(sum / relevant.len() as f64)
}

/// Unweighted mean of per-query AP. Relevant ids resolve against
/// `database_ids`; every ground-truth query needs a list.
pub fn mean_average_precision(lists: &[RankedList], gt: &GroundTruth, database_ids: &[String]) -> Result<f64> {
    per_query_ap(lists, gt, database_ids).map(|aps| mean(aps.iter().map(|a| a.1)))
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    values.sum::<f64>() / n as f64
}

fn per_query_ap(lists: &[RankedList], gt: &GroundTruth, database_ids: &[String]) -> Result<Vec<(String, f64)>> {
    let by_id: HashMap<&str, &RankedList> = lists.iter().map(|l| (l.query_id.as_str(), l)).collect();
    let db_index = index_of(database_ids);
    gt.queries
        .iter()
        .map(|q| {
            let list = by_id.get(q.query.as_str()).ok_or_else(|| ImeError::Reference {
                query: q.query.clone(),
                message: "no ranked list for this query".into(),
            })?;
            let relevant = resolve_ids(&q.query, &q.relevant, &db_index)?;
            Ok((q.query.clone(), average_precision(list, &relevant)?))
        })
        .collect()
}

fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

fn resolve_ids(query: &str, ids: &[String], index: &HashMap<&str, usize>) -> Result<BTreeSet<usize>> {
    if ids.is_empty() {
        return Err(ImeError::Reference {
            query: query.to_owned(),
            message: "empty relevant set".into(),
        });
    }
    ids.iter()
        .map(|id| {
            index.get(id.as_str()).copied().ok_or_else(|| ImeError::Reference {
                query: query.to_owned(),
                message: format!("unknown database id {id:?}"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub per_query: Vec<(String, f64)>,
    pub map: f64,
}

/// Ranks each ground-truth query against the database and scores it. Query
/// ids resolve against `query_ids`; a database row with the same id as the
/// query is left out of that query's ranking.
pub fn evaluate_retrieval(
    database: &Matrix,
    database_ids: &[String],
    queries: &Matrix,
    query_ids: &[String],
    gt: &GroundTruth,
) -> Result<RetrievalReport> {
    if database.rows() != database_ids.len() || queries.rows() != query_ids.len() {
        return Err(ImeError::invalid("coordinate rows and id lists differ in length"));
    }
    let db_index = index_of(database_ids);
    let q_index = index_of(query_ids);
    let mut lists = Vec::with_capacity(gt.queries.len());
    for q in &gt.queries {
        let row = *q_index.get(q.query.as_str()).ok_or_else(|| ImeError::Reference {
            query: q.query.clone(),
            message: "query id not found among the query coordinates".into(),
        })?;
        let exclude = db_index.get(q.query.as_str()).copied();
        lists.push(rank_by_distance(database, queries.row(row), q.query.clone(), exclude)?);
    }
    let per_query = per_query_ap(&lists, gt, database_ids)?;
    let map = mean(per_query.iter().map(|a| a.1));
    Ok(RetrievalReport { per_query, map })
}

/// Retrieval where the queries are database rows themselves.
pub fn evaluate_in_database(coords: &Matrix, ids: &[String], gt: &GroundTruth) -> Result<RetrievalReport> {
    evaluate_retrieval(coords, ids, coords, ids, gt)
}
