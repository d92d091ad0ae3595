//! k-NN graphs, the second-order graph and all-pairs geodesic distances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::DescriptorSet;
use crate::error::{ImeError, Result};
use crate::matrix::{squared_euclidean, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Euclidean,
    Geodesic,
}

/// Symmetric pairwise distances. `f64::INFINITY` marks unreachable pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Matrix,
    kind: DistanceKind,
}

impl DistanceMatrix {
    pub fn new(values: Matrix, kind: DistanceKind) -> Result<Self> {
        let n = values.rows();
        if values.cols() != n {
            return Err(ImeError::invalid(format!(
                "distance matrix must be square, got {}x{}",
                n,
                values.cols()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(ImeError::invalid(format!("nonzero self-distance at {i}")));
            }
            for j in 0..i {
                let v = values[(i, j)];
                if v.is_nan() || v < 0.0 || v != values[(j, i)] {
                    return Err(ImeError::invalid(format!(
                        "distance ({i},{j}) must be symmetric and non-negative"
                    )));
                }
            }
        }
        Ok(Self { values, kind })
    }

    pub fn size(&self) -> usize {
        self.values.rows()
    }

    pub fn kind(&self) -> DistanceKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn unreachable_pairs(&self) -> usize {
        self.values.as_slice().iter().filter(|v| v.is_infinite()).count() / 2
    }
}

/// Euclidean distances between all descriptor rows.
pub fn pairwise_euclidean(set: &DescriptorSet) -> DistanceMatrix {
    pairwise_euclidean_rows(set.vectors())
}

/// Euclidean distances between the rows of any matrix. Only the upper
/// triangle is computed; the lower triangle is a copy, so symmetry is exact.
pub fn pairwise_euclidean_rows(points: &Matrix) -> DistanceMatrix {
    let n = points.rows();
    let mut values = Matrix::zeros(n, n);
    for i in 0..n {
        let a = points.row(i);
        for j in i + 1..n {
            let d = squared_euclidean(a, points.row(j)).sqrt();
            values[(i, j)] = d;
            values[(j, i)] = d;
        }
    }
    DistanceMatrix {
        values,
        kind: DistanceKind::Euclidean,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphOrder {
    First,
    Second,
}

/// Undirected weighted graph stored as sorted adjacency lists.
///
/// The dense view has `weight(i, j) == 0` for "no direct edge". An adjacency
/// entry may carry weight 0 (duplicate points); such edges are ignored by the
/// shortest-path routines, matching the dense reading.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    order: GraphOrder,
}

impl WeightedGraph {
    /// Builds a graph from a dense weight matrix, validating symmetry,
    /// a zero diagonal and finite non-negative weights.
    pub fn from_dense(weights: &Matrix, order: GraphOrder) -> Result<Self> {
        let n = weights.rows();
        if weights.cols() != n {
            return Err(ImeError::invalid("weight matrix must be square"));
        }
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(ImeError::invalid(format!("nonzero diagonal weight at {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 || w != weights[(j, i)] {
                    return Err(ImeError::invalid(format!(
                        "weight ({i},{j}) must be finite, non-negative and symmetric"
                    )));
                }
                if w > 0.0 {
                    adjacency[i].push((j, w));
                }
            }
        }
        Ok(Self { adjacency, order })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn order(&self) -> GraphOrder {
        self.order
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// Number of undirected edges with positive weight.
    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .map(|adj| adj.iter().filter(|(_, w)| *w > 0.0).count())
            .sum::<usize>()
            / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let adj = &self.adjacency[i];
        adj.binary_search_by(|(n, _)| n.cmp(&j)).map_or(0.0, |pos| adj[pos].1)
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.node_count();
        let mut m = Matrix::zeros(n, n);
        for (i, adj) in self.adjacency.iter().enumerate() {
            for &(j, w) in adj {
                m[(i, j)] = w;
            }
        }
        m
    }
}

/// First-order k-NN graph with union symmetrization.
///
/// Node `i` selects its `k` nearest other nodes, ties in distance broken by
/// ascending index. Edge `(i, j)` exists when either endpoint selected the
/// other, weighted by `dist(i, j)`.
pub fn build_knn_graph(dist: &DistanceMatrix, k: usize) -> Result<WeightedGraph> {
    let n = dist.size();
    if k == 0 || k >= n {
        return Err(ImeError::invalid(format!(
            "k must satisfy 1 <= k <= {}, got {k}",
            n.saturating_sub(1)
        )));
    }
    if dist.values().as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ImeError::invalid("k-NN graph needs finite distances"));
    }
    let by_distance_then_index = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));

    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(2 * k); n];
    let mut candidates = Vec::with_capacity(n);
    for i in 0..n {
        candidates.clear();
        candidates.extend(
            dist.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, &d)| (d, j)),
        );
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k - 1, by_distance_then_index);
        }
        for &(d, j) in &candidates[..k] {
            adjacency[i].push((j, d));
            adjacency[j].push((i, d));
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable_by_key(|a| a.0);
        adj.dedup_by_key(|e| e.0);
    }
    Ok(WeightedGraph {
        adjacency,
        order: GraphOrder::First,
    })
}

/// Second-order graph: the matrix square of the first-order weights with the
/// diagonal forced to zero. `W(i, j)` is nonzero only when `i` and `j` share a
/// neighbor; weights are sums of products of first-order distances.
pub fn second_order_graph(g: &WeightedGraph) -> Result<WeightedGraph> {
    if g.order != GraphOrder::First {
        return Err(ImeError::invalid("second-order graph needs a first-order input"));
    }
    let n = g.node_count();
    let mut acc = vec![0.0; n];
    let mut touched = Vec::new();
    let mut adjacency = Vec::with_capacity(n);
    for i in 0..n {
        // Neighbor lists are sorted, so every row accumulates its shared
        // neighbors in ascending order and the result is exactly symmetric.
        for &(l, w_il) in &g.adjacency[i] {
            for &(j, w_lj) in &g.adjacency[l] {
                if j == i {
                    continue;
                }
                if acc[j] == 0.0 {
                    touched.push(j);
                }
                acc[j] += w_il * w_lj;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let mut row = Vec::with_capacity(touched.len());
        for &j in &touched {
            if acc[j] > 0.0 {
                row.push((j, acc[j]));
            }
            acc[j] = 0.0;
        }
        touched.clear();
        adjacency.push(row);
    }
    Ok(WeightedGraph {
        adjacency,
        order: GraphOrder::Second,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeodesicBackend {
    #[default]
    FloydWarshall,
    PerSource,
}

pub fn geodesics(g: &WeightedGraph, backend: GeodesicBackend) -> DistanceMatrix {
    match backend {
        GeodesicBackend::FloydWarshall => geodesic_distances(g),
        GeodesicBackend::PerSource => geodesic_distances_sparse(g),
    }
}

/// All-pairs shortest paths by Floyd-Warshall. Zero weights are absent edges.
pub fn geodesic_distances(g: &WeightedGraph) -> DistanceMatrix {
    let n = g.node_count();
    let mut d = Matrix::filled(n, n, f64::INFINITY);
    for i in 0..n {
        d[(i, i)] = 0.0;
        for &(j, w) in &g.adjacency[i] {
            if w > 0.0 {
                d[(i, j)] = w;
            }
        }
    }
    let data = d.as_mut_slice();
    let mut via = vec![0.0; n];
    for k in 0..n {
        via.copy_from_slice(&data[k * n..(k + 1) * n]);
        for i in 0..n {
            let row = &mut data[i * n..(i + 1) * n];
            let d_ik = row[k];
            if d_ik == f64::INFINITY {
                continue;
            }
            for (d_ij, &d_kj) in row.iter_mut().zip(&via) {
                let candidate = d_ik + d_kj;
                if candidate < *d_ij {
                    *d_ij = candidate;
                }
            }
        }
    }
    symmetrize_min(&mut d);
    DistanceMatrix {
        values: d,
        kind: DistanceKind::Geodesic,
    }
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest paths by Dijkstra, written into `out`.
fn dijkstra_into(g: &WeightedGraph, source: usize, out: &mut [f64], heap: &mut BinaryHeap<Frontier>) {
    out.fill(f64::INFINITY);
    out[source] = 0.0;
    heap.clear();
    heap.push(Frontier(0.0, source));
    while let Some(Frontier(du, u)) = heap.pop() {
        if du > out[u] {
            continue;
        }
        for &(v, w) in &g.adjacency[u] {
            if w <= 0.0 {
                continue;
            }
            let candidate = du + w;
            if candidate < out[v] {
                out[v] = candidate;
                heap.push(Frontier(candidate, v));
            }
        }
    }
}

/// All-pairs shortest paths by one Dijkstra search per source over the
/// adjacency lists. Same contract as [`geodesic_distances`].
pub fn geodesic_distances_sparse(g: &WeightedGraph) -> DistanceMatrix {
    let n = g.node_count();
    let mut d = Matrix::zeros(n, n);
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        dijkstra_into(g, s, d.row_mut(s), &mut heap);
    }
    symmetrize_min(&mut d);
    DistanceMatrix {
        values: d,
        kind: DistanceKind::Geodesic,
    }
}

// Path sums can differ in the last bit between (i, j) and (j, i).
fn symmetrize_min(d: &mut Matrix) {
    let n = d.rows();
    for i in 0..n {
        for j in 0..i {
            let m = d[(i, j)].min(d[(j, i)]);
            d[(i, j)] = m;
            d[(j, i)] = m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DistanceMatrix {
        let rows: Vec<[f64; 1]> = points.iter().map(|&p| [p]).collect();
        pairwise_euclidean(&DescriptorSet::from_rows(&rows).unwrap())
    }

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> WeightedGraph {
        let mut m = Matrix::zeros(n, n);
        for &(i, j, w) in edges {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        WeightedGraph::from_dense(&m, GraphOrder::First).unwrap()
    }

    #[test]
    fn euclidean_examples() {
        let set = DescriptorSet::from_rows(&[[0.0, 0.0], [3.0, 4.0], [3.0, 4.0]]).unwrap();
        let d = pairwise_euclidean(&set);
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(1, 2), 0.0);
        assert_eq!(d.kind(), DistanceKind::Euclidean);
    }

    #[test]
    fn knn_collinear_union() {
        let g = build_knn_graph(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(1, 2), 2.0);
        assert_eq!(g.weight(0, 2), 0.0);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn knn_complete_and_ties() {
        let d = line(&[0.0, 1.0, 3.0, 7.0]);
        let g = build_knn_graph(&d, 3).unwrap();
        assert_eq!(g.to_dense(), *d.values());

        // Node 1 is equidistant from 0 and 2; the lower index wins.
        let g = build_knn_graph(&line(&[0.0, 1.0, 2.0, 10.0]), 1).unwrap();
        assert!(g.weight(1, 0) > 0.0);
        assert_eq!(g.neighbors(1).len(), 2); // 0 (own pick) and 2 (picked by 2)
        assert!(build_knn_graph(&d, 0).is_err());
        assert!(build_knn_graph(&d, 4).is_err());
    }

    #[test]
    fn knn_duplicates_keep_invariants() {
        let d = line(&[0.0, 0.0, 5.0]);
        let g = build_knn_graph(&d, 1).unwrap();
        let dense = g.to_dense();
        assert!(WeightedGraph::from_dense(&dense, GraphOrder::First).is_ok());
        assert_eq!(g.weight(0, 1), 0.0);
        assert_eq!(g.neighbors(0)[0], (1, 0.0));
        let geo = geodesic_distances(&g);
        assert_eq!(geo.get(0, 1), f64::INFINITY);
    }

    fn dense_square(m: &Matrix) -> Matrix {
        let n = m.rows();
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (0..n).map(|l| m[(i, l)] * m[(l, j)]).sum()
            }
        })
    }

    #[test]
    fn second_order_examples() {
        let tri = graph(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let sq = second_order_graph(&tri).unwrap();
        assert_eq!(sq.order(), GraphOrder::Second);
        assert_eq!(sq.to_dense(), dense_square(&tri.to_dense()));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(sq.weight(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }

        let pair = second_order_graph(&graph(2, &[(0, 1, 3.0)])).unwrap();
        assert_eq!(pair.edge_count(), 0);

        let (a, b) = (1.5, 2.5);
        let path = second_order_graph(&graph(3, &[(0, 1, a), (1, 2, b)])).unwrap();
        assert_eq!(path.weight(0, 2), a * b);
        assert_eq!(path.weight(0, 1), 0.0);

        assert!(second_order_graph(&path).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 2.0)]);
        assert_eq!(geodesic_distances(&g).get(0, 2), 3.0);

        let g = graph(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        for geo in [geodesic_distances(&g), geodesic_distances_sparse(&g)] {
            assert_eq!(geo.get(0, 3), f64::INFINITY);
            assert_eq!(geo.get(1, 2), f64::INFINITY);
            assert_eq!(geo.unreachable_pairs(), 4);
        }

        let g = graph(4, &[(0, 3, 5.0), (0, 1, 2.0), (1, 3, 2.0), (2, 3, 1.0)]);
        assert_eq!(geodesic_distances(&g).get(0, 3), 4.0);
        assert_eq!(geodesic_distances_sparse(&g).get(0, 3), 4.0);

        let empty = graph(3, &[]);
        let geo = geodesic_distances_sparse(&empty);
        assert_eq!(geo.get(0, 1), f64::INFINITY);
        assert_eq!(geo.get(2, 2), 0.0);
    }

    #[test]
    fn complete_graph_on_metric_is_its_weights() {
        let set = DescriptorSet::from_rows(&[[0.0, 0.0], [1.0, 0.5], [2.0, 3.0], [-1.0, 4.0], [0.3, 0.3]]).unwrap();
        let d = pairwise_euclidean(&set);
        let g = build_knn_graph(&d, 4).unwrap();
        let fw = geodesic_distances(&g);
        let sp = geodesic_distances_sparse(&g);
        assert!(fw.values().max_abs_diff(d.values()) < 1e-12);
        assert!(sp.values().max_abs_diff(d.values()) < 1e-12);
    }

    #[test]
    fn distance_matrix_validation() {
        let bad = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(DistanceMatrix::new(bad, DistanceKind::Euclidean).is_err());
        let bad = Matrix::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(DistanceMatrix::new(bad, DistanceKind::Euclidean).is_err());
        let ok = Matrix::from_rows(&[[0.0, f64::INFINITY], [f64::INFINITY, 0.0]]).unwrap();
        assert!(DistanceMatrix::new(ok, DistanceKind::Geodesic).is_ok());
    }
}
