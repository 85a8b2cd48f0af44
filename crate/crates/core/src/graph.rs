//! Bounded-degree undirected graphs, rooted balls and structural node labels.

use std::collections::VecDeque;
use std::fmt;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Row-major `n x dim` matrix of node feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 && !data.is_empty() || dim > 0 && !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.dim..(v + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn select(&self, nodes: &[usize]) -> Self {
        let mut data = Vec::with_capacity(nodes.len() * self.dim);
        for &v in nodes {
            data.extend_from_slice(self.row(v));
        }
        Self { dim: self.dim, data }
    }
}

/// Undirected graph stored as per-node sorted neighbor lists.
///
/// Construction does not reject malformed input: self-loops, duplicate edges
/// or disconnected graphs are representable so that [`validate`] can report
/// them. Every algorithm in this crate assumes a graph that validates.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    features: Option<Features>,
    max_degree: usize,
}

impl Graph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(Error::NodeOutOfRange { node: w, n });
                }
            }
            adj[u].push(v);
            if u != v {
                adj[v].push(u);
            }
        }
        Ok(Self::from_adjacency_unchecked(adj))
    }

    /// Builds a graph from raw neighbor lists. Lists are sorted but no
    /// symmetry is enforced.
    pub fn from_adjacency(adj: Vec<Vec<usize>>) -> Result<Self> {
        let n = adj.len();
        if let Some(&node) = adj.iter().flatten().find(|&&w| w >= n) {
            return Err(Error::NodeOutOfRange { node, n });
        }
        Ok(Self::from_adjacency_unchecked(adj))
    }

    fn from_adjacency_unchecked(mut adj: Vec<Vec<usize>>) -> Self {
        for list in &mut adj {
            list.sort_unstable();
        }
        let max_degree = adj.iter().map(Vec::len).max().unwrap_or(0);
        Self {
            adj,
            features: None,
            max_degree,
        }
    }

    pub fn with_features(mut self, features: Features) -> Result<Self> {
        if features.rows() != self.n() && !(features.dim() == 0 && self.n() == 0) {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: features.rows(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Δ, the largest degree.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    /// Feature vector of `v`; empty when the graph carries no features.
    pub fn feature(&self, v: usize) -> &[f64] {
        self.features.as_ref().map_or(&[], |f| f.row(v))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { node: v, n: self.n() })
        }
    }

    /// Hop distance from `source` to every node within `radius`, in BFS
    /// order (ascending neighbor index inside each layer).
    pub fn bfs_within(&self, source: usize, radius: usize) -> Vec<(usize, usize)> {
        let mut dist = vec![usize::MAX; self.n()];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            order.push((u, dist[u]));
            if dist[u] == radius {
                continue;
            }
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        order
    }

    /// N_k(v): nodes within `k` hops of `v`, including `v`, in BFS order.
    pub fn k_hop(&self, v: usize, k: usize) -> Vec<usize> {
        self.bfs_within(v, k).into_iter().map(|(u, _)| u).collect()
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: perm.len(),
            });
        }
        let mut adj = vec![Vec::new(); n];
        for (v, list) in self.adj.iter().enumerate() {
            adj[perm[v]] = list.iter().map(|&w| perm[w]).collect();
        }
        let mut g = Self::from_adjacency(adj)?;
        if let Some(f) = &self.features {
            let mut inverse = vec![0; n];
            for (v, &p) in perm.iter().enumerate() {
                inverse[p] = v;
            }
            g.features = Some(f.select(&inverse));
        }
        Ok(g)
    }

    /// Disjoint union, `other`'s nodes shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let offset = self.n();
        let mut adj = self.adj.clone();
        adj.extend(
            other
                .adj
                .iter()
                .map(|list| list.iter().map(|&w| w + offset).collect::<Vec<_>>()),
        );
        let mut g = Self::from_adjacency_unchecked(adj);
        if let (Some(a), Some(b)) = (&self.features, &other.features) {
            if a.dim == b.dim {
                let mut data = a.data.clone();
                data.extend_from_slice(&b.data);
                g.features = Some(Features { dim: a.dim, data });
            }
        }
        g
    }
}

/// First violated structural assumption reported by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Empty,
    SelfLoop { node: usize },
    DuplicateEdge { u: usize, v: usize },
    Asymmetric { u: usize, v: usize },
    Disconnected { components: usize },
    DegreeExceeded { node: usize, degree: usize, bound: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "graph has no nodes"),
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::DuplicateEdge { u, v } => write!(f, "duplicate edge {{{u}, {v}}}"),
            Violation::Asymmetric { u, v } => {
                write!(f, "adjacency not symmetric: {v} in N({u}) but not vice versa")
            }
            Violation::Disconnected { components } => {
                write!(f, "disconnected: {components} components")
            }
            Violation::DegreeExceeded { node, degree, bound } => write!(f, "node {node} has degree {degree} > {bound}"),
        }
    }
}

/// Checks simplicity, symmetry and connectivity, in that order.
pub fn validate(g: &Graph) -> std::result::Result<(), Violation> {
    validate_bounded(g, None)
}

/// As [`validate`], additionally enforcing a degree bound Δ.
pub fn validate_bounded(g: &Graph, bound: Option<usize>) -> std::result::Result<(), Violation> {
    if g.n() == 0 {
        return Err(Violation::Empty);
    }
    for (u, list) in g.adj.iter().enumerate() {
        if list.binary_search(&u).is_ok() {
            return Err(Violation::SelfLoop { node: u });
        }
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Violation::DuplicateEdge { u, v: w[0] });
        }
    }
    for (u, list) in g.adj.iter().enumerate() {
        if let Some(&v) = list.iter().find(|&&v| !g.has_edge(v, u)) {
            return Err(Violation::Asymmetric { u, v });
        }
    }
    let components = count_components(g);
    if components > 1 {
        return Err(Violation::Disconnected { components });
    }
    if let Some(bound) = bound {
        if let Some(node) = (0..g.n()).find(|&v| g.degree(v) > bound) {
            return Err(Violation::DegreeExceeded {
                node,
                degree: g.degree(node),
                bound,
            });
        }
    }
    Ok(())
}

fn count_components(g: &Graph) -> usize {
    let mut seen = vec![false; g.n()];
    let mut components = 0;
    let mut stack = Vec::new();
    for s in 0..g.n() {
        if seen[s] {
            continue;
        }
        components += 1;
        seen[s] = true;
        stack.push(s);
        while let Some(u) = stack.pop() {
            for &w in g.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    components
}

/// R(G, v, L): the subgraph induced by the L-hop neighborhood of a root.
#[derive(Clone, Debug, PartialEq)]
pub struct RootedBall {
    pub graph: Graph,
    pub root: usize,
    pub radius: usize,
    /// `origin[i]` is the index in the source graph of ball node `i`.
    pub origin: Vec<usize>,
}

impl RootedBall {
    /// Wraps a whole graph as a ball rooted at `root`.
    pub fn whole(graph: Graph, root: usize, radius: usize) -> Self {
        let origin = (0..graph.n()).collect();
        Self {
            graph,
            root,
            radius,
            origin,
        }
    }
}

/// Ball nodes are numbered in BFS order, so the root is always node 0.
pub fn induced_ball(g: &Graph, v: usize, radius: usize) -> Result<RootedBall> {
    g.check_node(v)?;
    let origin = g.k_hop(v, radius);
    let mut local = vec![usize::MAX; g.n()];
    for (i, &u) in origin.iter().enumerate() {
        local[u] = i;
    }
    let adj = origin
        .iter()
        .map(|&u| {
            g.neighbors(u)
                .iter()
                .filter(|&&w| local[w] != usize::MAX)
                .map(|&w| local[w])
                .collect()
        })
        .collect();
    let mut graph = Graph::from_adjacency_unchecked(adj);
    graph.features = g.features.as_ref().map(|f| f.select(&origin));
    Ok(RootedBall {
        graph,
        root: 0,
        radius,
        origin,
    })
}

/// Largest ball handled by [`rooted_isomorphic`].
pub const ISOMORPHISM_LIMIT: usize = 16;

/// Exhaustive root-preserving isomorphism test with degree, distance and
/// feature pruning.
pub fn rooted_isomorphic(a: &RootedBall, b: &RootedBall) -> Result<bool> {
    let (ga, gb) = (&a.graph, &b.graph);
    for size in [ga.n(), gb.n()] {
        if size > ISOMORPHISM_LIMIT {
            return Err(Error::SizeLimit {
                size,
                limit: ISOMORPHISM_LIMIT,
            });
        }
    }
    if ga.n() != gb.n() || ga.num_edges() != gb.num_edges() {
        return Ok(false);
    }
    let n = ga.n();
    if n == 0 {
        return Ok(true);
    }
    let dist_a = distances(ga, a.root);
    let dist_b = distances(gb, b.root);
    let signature = |g: &Graph, dist: &[usize], v: usize| (g.degree(v), dist[v]);
    let mut sig_a: Vec<_> = (0..n).map(|v| signature(ga, &dist_a, v)).collect();
    let mut sig_b: Vec<_> = (0..n).map(|v| signature(gb, &dist_b, v)).collect();
    sig_a.sort_unstable();
    sig_b.sort_unstable();
    if sig_a != sig_b {
        return Ok(false);
    }

    // Extend the mapping in BFS order of `a` so every new node has a mapped
    // neighbor to constrain its candidates.
    let mut order = ga.k_hop(a.root, usize::MAX);
    let mut seen = vec![false; n];
    order.iter().for_each(|&v| seen[v] = true);
    order.extend((0..n).filter(|&v| !seen[v]));
    Ok(search_mapping(a, b, &dist_a, &dist_b, &order))
}

fn distances(g: &Graph, root: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.n()];
    for (v, d) in g.bfs_within(root, usize::MAX) {
        dist[v] = d;
    }
    dist
}

fn search_mapping(a: &RootedBall, b: &RootedBall, dist_a: &[usize], dist_b: &[usize], order: &[usize]) -> bool {
    let n = a.graph.n();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if !compatible(a, b, dist_a, dist_b, a.root, b.root) {
        return false;
    }
    map[a.root] = b.root;
    used[b.root] = true;
    let rest: Vec<usize> = order.iter().copied().filter(|&v| v != a.root).collect();
    extend(a, b, dist_a, dist_b, &rest, &mut map, &mut used)
}

fn compatible(a: &RootedBall, b: &RootedBall, dist_a: &[usize], dist_b: &[usize], x: usize, y: usize) -> bool {
    a.graph.degree(x) == b.graph.degree(y) && dist_a[x] == dist_b[y] && a.graph.feature(x) == b.graph.feature(y)
}

fn extend(
    a: &RootedBall,
    b: &RootedBall,
    dist_a: &[usize],
    dist_b: &[usize],
    rest: &[usize],
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some((&x, tail)) = rest.split_first() else {
        return true;
    };
    for y in 0..b.graph.n() {
        if used[y] || !compatible(a, b, dist_a, dist_b, x, y) {
            continue;
        }
        let consistent = (0..a.graph.n())
            .filter(|&w| map[w] != usize::MAX)
            .all(|w| a.graph.has_edge(x, w) == b.graph.has_edge(y, map[w]));
        if !consistent {
            continue;
        }
        map[x] = y;
        used[y] = true;
        if extend(a, b, dist_a, dist_b, tail, map, used) {
            return true;
        }
        map[x] = usize::MAX;
        used[y] = false;
    }
    false
}

/// Edges among neighbors over C(deg, 2). Zero when `deg(v) < 2`.
pub fn local_clustering_coefficient(g: &Graph, v: usize) -> Ratio<u64> {
    let nbrs = g.neighbors(v);
    let d = nbrs.len() as u64;
    if d < 2 {
        return Ratio::from_integer(0);
    }
    Ratio::new(neighbor_links(g, v), d * (d - 1) / 2)
}

fn neighbor_links(g: &Graph, v: usize) -> u64 {
    let nbrs = g.neighbors(v);
    let mut links = 0;
    for (i, &x) in nbrs.iter().enumerate() {
        for &y in &nbrs[i + 1..] {
            if g.has_edge(x, y) {
                links += 1;
            }
        }
    }
    links
}

/// True iff two neighbors of `v` are adjacent, i.e. `v` lies on a triangle.
pub fn triangle_label(g: &Graph, v: usize) -> bool {
    let nbrs = g.neighbors(v);
    nbrs.iter()
        .enumerate()
        .any(|(i, &x)| nbrs[i + 1..].iter().any(|&y| g.has_edge(x, y)))
}

/// Small named graphs used throughout tests, demos and benchmarks.
pub mod named {
    use super::Graph;

    pub fn cycle(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).expect("indices in range")
    }

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges).expect("indices in range")
    }

    pub fn complete(n: usize) -> Graph {
        let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Graph::from_edges(n, &edges).expect("indices in range")
    }

    /// K_{1,k} with the center at node 0.
    pub fn star(k: usize) -> Graph {
        let edges: Vec<_> = (1..=k).map(|i| (0, i)).collect();
        Graph::from_edges(k + 1, &edges).expect("indices in range")
    }

    pub fn petersen() -> Graph {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((i, i + 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
        }
        Graph::from_edges(10, &edges).expect("indices in range")
    }
}
