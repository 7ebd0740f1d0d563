//! Undirected graphs, neighborhood queries and random network generators.
//!
//! A [`Graph`] is stored in compressed sparse row form. Construction
//! validates the structural assumptions the tests rely on: the adjacency is
//! symmetric, there are no self-loops, and every node has at least one
//! neighbor, so every neighborhood mean is well defined.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{NirdError, Result};
use crate::rng::{stream, substream};

/// Immutable undirected graph with dense node ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Graph {
    /// Builds a graph from an edge list. Pairs may appear in either
    /// orientation and duplicates collapse to one unit-weight edge.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            for id in [a, b] {
                if id >= n {
                    return Err(NirdError::OutOfRange { id, n });
                }
            }
            if a == b {
                return Err(NirdError::SelfLoop(a));
            }
            adjacency[a].insert(b);
            adjacency[b].insert(a);
        }
        if let Some(isolated) = adjacency.iter().position(BTreeSet::is_empty) {
            return Err(NirdError::IsolatedNode(isolated));
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for nbrs in &adjacency {
            targets.extend(nbrs.iter().copied());
            offsets.push(targets.len());
        }
        let weights = vec![1.0; targets.len()];
        Ok(Graph {
            n,
            offsets,
            targets,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    /// Sum of edge weights at `i`; equals the degree for unit weights.
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.weights[self.offsets[i]..self.offsets[i + 1]].iter().sum()
    }

    /// Direct neighbors of `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        if i >= self.n {
            return Err(NirdError::OutOfRange { id: i, n: self.n });
        }
        Ok(self.neighbor_slice(i))
    }

    #[inline]
    pub(crate) fn neighbor_slice(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    fn weight_slice(&self, i: usize) -> &[f64] {
        &self.weights[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Undirected edges as `(i, j)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbor_slice(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
    }

    /// Weighted neighborhood mean of `values` at node `i`.
    pub fn neighbor_mean(&self, values: &[f64], i: usize) -> f64 {
        let total: f64 = self
            .neighbor_slice(i)
            .iter()
            .zip(self.weight_slice(i))
            .map(|(&j, &w)| w * values[j])
            .sum();
        total / self.weighted_degree(i)
    }

    /// Neighborhood means of every node.
    pub fn neighbor_means(&self, values: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.neighbor_mean(values, i)).collect()
    }

    /// Row aggregation `D⁻¹ A X`: row `i` of the output is the mean of the
    /// rows of `x` over the neighbors of `i`.
    pub fn aggregate_rows(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.n {
            return Err(NirdError::mismatch(format!(
                "matrix has {} rows, graph has {} nodes",
                x.nrows(),
                self.n
            )));
        }
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let src = x.column(c);
            let mut dst = out.column_mut(c);
            for i in 0..self.n {
                let mut acc = 0.0;
                for (&j, &w) in self.neighbor_slice(i).iter().zip(self.weight_slice(i)) {
                    acc += w * src[j];
                }
                dst[i] = acc / self.weighted_degree(i);
            }
        }
        Ok(out)
    }

    /// Dense adjacency matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (&j, &w) in self.neighbor_slice(i).iter().zip(self.weight_slice(i)) {
                a[(i, j)] = w;
            }
        }
        a
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(NirdError::mismatch("permutation length differs from node count"));
        }
        let edges: Vec<_> = self.edges().map(|(i, j)| (perm[i], perm[j])).collect();
        Graph::from_edges(self.n, &edges)
    }

    /// Subgraph induced by `nodes` (relabelled `0..nodes.len()` in the given
    /// order). Nodes left without neighbors are attached to one uniformly
    /// chosen other sampled node.
    pub fn induced_subgraph(&self, nodes: &[usize], rng: &mut impl Rng) -> Result<Graph> {
        let k = nodes.len();
        if k < 2 {
            return Err(NirdError::BadParams("induced subgraph needs at least 2 nodes".into()));
        }
        let mut position = vec![usize::MAX; self.n];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.n {
                return Err(NirdError::OutOfRange { id: old, n: self.n });
            }
            if position[old] != usize::MAX {
                return Err(NirdError::BadParams(format!("node {old} sampled twice")));
            }
            position[old] = new;
        }
        let mut edges = Vec::new();
        for (new, &old) in nodes.iter().enumerate() {
            for &j in self.neighbor_slice(old) {
                let pj = position[j];
                if pj != usize::MAX && new < pj {
                    edges.push((new, pj));
                }
            }
        }
        repair_isolated(k, &mut edges, rng);
        Graph::from_edges(k, &edges)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, edges={})", self.n, self.num_edges())
    }
}

/// Attaches every node of degree zero to one uniformly chosen other node.
fn repair_isolated(n: usize, edges: &mut Vec<(usize, usize)>, rng: &mut impl Rng) {
    let mut degree = vec![0usize; n];
    for &(a, b) in edges.iter() {
        degree[a] += 1;
        degree[b] += 1;
    }
    for i in 0..n {
        if degree[i] == 0 {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            edges.push((i, j));
            degree[i] += 1;
            degree[j] += 1;
        }
    }
}

/// Selects the node set a relational variable ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PathPredicate {
    /// One-hop neighborhood.
    #[default]
    DirectNeighbors,
}

impl PathPredicate {
    pub fn evaluate<'g>(&self, g: &'g Graph, i: usize) -> Result<&'g [usize]> {
        match self {
            PathPredicate::DirectNeighbors => g.neighbors(i),
        }
    }
}

/// Random network family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphModel {
    /// Preferential attachment with `m` edges per new node.
    BarabasiAlbert { m: usize },
    /// G(n, p) with isolated-node repair.
    ErdosRenyi { p: f64 },
}

impl GraphModel {
    pub fn name(&self) -> &'static str {
        match self {
            GraphModel::BarabasiAlbert { .. } => "ba",
            GraphModel::ErdosRenyi { .. } => "er",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            GraphModel::BarabasiAlbert { m } => m as f64,
            GraphModel::ErdosRenyi { p } => p,
        }
    }
}

impl fmt::Display for GraphModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphModel::BarabasiAlbert { m } => write!(f, "ba:{m}"),
            GraphModel::ErdosRenyi { p } => write!(f, "er:{p}"),
        }
    }
}

impl std::str::FromStr for GraphModel {
    type Err = NirdError;

    /// Parses `ba:M` or `er:P`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || NirdError::BadParams(format!("expected `ba:M` or `er:P`, got `{s}`"));
        let (kind, param) = s.trim().split_once(':').ok_or_else(bad)?;
        match kind.to_ascii_lowercase().as_str() {
            "ba" => Ok(GraphModel::BarabasiAlbert {
                m: param.trim().parse().map_err(|_| bad())?,
            }),
            "er" => Ok(GraphModel::ErdosRenyi {
                p: param.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphGenConfig {
    pub model: GraphModel,
    pub n: usize,
    pub seed: u64,
}

impl GraphGenConfig {
    pub fn generate(&self) -> Result<Graph> {
        match self.model {
            GraphModel::BarabasiAlbert { m } => generate_ba(self.n, m, self.seed),
            GraphModel::ErdosRenyi { p } => generate_er(self.n, p, self.seed),
        }
    }
}

/// Barabási–Albert graph: a clique on the first `m` nodes, then every new
/// node attaches to `m` distinct existing nodes chosen with probability
/// proportional to degree. Has `m(m-1)/2 + (n-m)m` edges.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 || m >= n {
        return Err(NirdError::BadParams(format!(
            "Barabási–Albert needs n > m >= 1, got n={n}, m={m}"
        )));
    }
    let mut rng = substream(seed, &[stream::GRAPH]);
    let mut edges = Vec::with_capacity(m * (m - 1) / 2 + (n - m) * m);
    // Each node appears once per incident edge, so uniform draws from this
    // list are degree-proportional.
    let mut endpoints = Vec::with_capacity(2 * edges.capacity());
    for a in 0..m {
        for b in (a + 1)..m {
            edges.push((a, b));
            endpoints.extend([a, b]);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in m..n {
        chosen.clear();
        while chosen.len() < m {
            let candidate = if endpoints.is_empty() {
                rng.random_range(0..v)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !chosen.contains(&candidate) {
                chosen.push(candidate);
            }
        }
        for &t in &chosen {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    Graph::from_edges(n, &edges)
}

/// Raw G(n, p) edge sample (Batagelj–Brandes geometric skipping), before
/// isolated-node repair.
pub(crate) fn sample_gnp_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let skip = Geometric::new(p).expect("0 < p < 1 checked by caller");
    // Pairs (w, v) with w < v enumerated row by row.
    let mut v: usize = 1;
    let mut w: i64 = -1;
    while v < n {
        w += 1 + skip.sample(rng) as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    edges
}

/// Erdős–Rényi G(n, p); isolated nodes are then attached to one uniformly
/// chosen other node so that every degree is at least one.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 || !(p > 0.0 && p < 1.0) {
        return Err(NirdError::BadParams(format!(
            "Erdős–Rényi needs n >= 2 and 0 < p < 1, got n={n}, p={p}"
        )));
    }
    let mut rng = substream(seed, &[stream::GRAPH]);
    let mut edges = sample_gnp_edges(n, p, &mut rng);
    repair_isolated(n, &mut edges, &mut rng);
    Graph::from_edges(n, &edges)
}

/// Uniform sample of `k` distinct node ids, in ascending order.
pub fn sample_nodes(n: usize, k: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if k > n {
        return Err(NirdError::BadParams(format!("cannot sample {k} of {n} nodes")));
    }
    let mut nodes = index::sample(rng, n, k).into_vec();
    nodes.sort_unstable();
    Ok(nodes)
}

/// Reads a whitespace-separated edge list. Lines starting with `#` and blank
/// lines are ignored. The node count is `max id + 1` unless `nodes` is given.
pub fn read_edge_list<R: BufRead>(reader: R, nodes: Option<usize>) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_id = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut ids = [0usize; 2];
        let mut fields = 0;
        let mut rest = line.as_str();
        let mut column = 1;
        while let Some(start) = rest.find(|c: char| !c.is_whitespace()) {
            column += start;
            rest = &rest[start..];
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let token = &rest[..end];
            if fields == 2 {
                return Err(NirdError::parse(lineno + 1, column, "expected exactly two node ids"));
            }
            ids[fields] = token.parse().map_err(|_| {
                NirdError::parse(lineno + 1, column, format!("invalid node id `{token}`"))
            })?;
            fields += 1;
            column += end;
            rest = &rest[end..];
        }
        if fields != 2 {
            return Err(NirdError::parse(lineno + 1, column, "expected exactly two node ids"));
        }
        max_id = Some(max_id.unwrap_or(0).max(ids[0]).max(ids[1]));
        edges.push((ids[0], ids[1]));
    }
    let n = match (nodes, max_id) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => return Err(NirdError::BadParams("edge list is empty".into())),
    };
    Graph::from_edges(n, &edges)
}

/// Writes the graph as an edge list, one `i j` pair (`i < j`) per line,
/// preceded by any `#` comment lines given.
pub fn write_edge_list<W: Write>(g: &Graph, mut out: W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    for (i, j) in g.edges() {
        writeln!(out, "{i} {j}")?;
    }
    Ok(())
}
