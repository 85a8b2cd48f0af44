//! Color refinement, unfolding trees, tree digests and reconstruction of a
//! ball from its unfolding tree.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::RandomAssignment;
use crate::graph::{induced_ball, rooted_isomorphic, Features, Graph, RootedBall};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorMap {
    pub colors: Vec<u64>,
    pub round: usize,
}

impl ColorMap {
    pub fn uniform(n: usize) -> Self {
        Self {
            colors: vec![0; n],
            round: 0,
        }
    }

    /// Initial colors from node features; nodes with equal features share a color.
    pub fn from_features(g: &Graph) -> Self {
        let colors = (0..g.n())
            .map(|v| {
                let mut h = Sha256::new();
                for x in g.feature(v) {
                    h.update(canonical_f64(*x).to_le_bytes());
                }
                truncate_u64(&h.finalize())
            })
            .collect();
        Self { colors, round: 0 }
    }

    pub fn num_classes(&self) -> usize {
        let mut c = self.colors.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    /// Class sizes keyed by color.
    pub fn classes(&self) -> BTreeMap<u64, Vec<usize>> {
        let mut out: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (v, &c) in self.colors.iter().enumerate() {
            out.entry(c).or_default().push(v);
        }
        out
    }
}

/// Runs up to `rounds` refinement rounds, stopping as soon as a round does
/// not split any class.
pub fn wl_refine(g: &Graph, init: &ColorMap, rounds: usize) -> Result<ColorMap> {
    if init.colors.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: init.colors.len(),
        });
    }
    let mut current = init.clone();
    let mut classes = current.num_classes();
    for _ in 0..rounds {
        let colors = (0..g.n())
            .map(|v| {
                let mut neigh: Vec<u64> = g.neighbors(v).iter().map(|&u| current.colors[u]).collect();
                neigh.sort_unstable();
                let mut h = Sha256::new();
                h.update(current.colors[v].to_le_bytes());
                h.update((neigh.len() as u64).to_le_bytes());
                for c in neigh {
                    h.update(c.to_le_bytes());
                }
                truncate_u64(&h.finalize())
            })
            .collect();
        current = ColorMap {
            colors,
            round: current.round + 1,
        };
        let next = current.num_classes();
        if next == classes {
            break;
        }
        classes = next;
    }
    Ok(current)
}

/// Level-l unfolding tree. Children are kept sorted, so the derived
/// equality compares them as multisets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum UnfoldTree {
    Leaf {
        features: Vec<f64>,
        code: u32,
    },
    Node {
        own: Box<UnfoldTree>,
        children: Vec<UnfoldTree>,
    },
}

impl PartialEq for UnfoldTree {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for UnfoldTree {}

impl PartialOrd for UnfoldTree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for UnfoldTree {
    fn cmp(&self, other: &Self) -> Ordering {
        use UnfoldTree::*;
        match (self, other) {
            (Leaf { features: a, code: x }, Leaf { features: b, code: y }) => a
                .len()
                .cmp(&b.len())
                .then_with(|| {
                    a.iter()
                        .zip(b)
                        .map(|(p, q)| canonical_f64(*p).total_cmp(&canonical_f64(*q)))
                        .find(|o| o.is_ne())
                        .unwrap_or(Ordering::Equal)
                })
                .then(x.cmp(y)),
            (Leaf { .. }, Node { .. }) => Ordering::Less,
            (Node { .. }, Leaf { .. }) => Ordering::Greater,
            (Node { own: a, children: ca }, Node { own: b, children: cb }) => a.cmp(b).then_with(|| ca.cmp(cb)),
        }
    }
}

impl UnfoldTree {
    fn node(own: UnfoldTree, mut children: Vec<UnfoldTree>) -> Self {
        children.sort_unstable();
        UnfoldTree::Node {
            own: Box::new(own),
            children,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            UnfoldTree::Leaf { .. } => 0,
            UnfoldTree::Node { own, .. } => own.depth() + 1,
        }
    }

    /// Code of the node the tree is rooted at.
    pub fn root_code(&self) -> u32 {
        match self {
            UnfoldTree::Leaf { code, .. } => *code,
            UnfoldTree::Node { own, .. } => own.root_code(),
        }
    }

    pub fn root_features(&self) -> &[f64] {
        match self {
            UnfoldTree::Leaf { features, .. } => features,
            UnfoldTree::Node { own, .. } => own.root_features(),
        }
    }

    /// The same tree cut down to `depth` levels.
    pub fn truncate(&self, depth: usize) -> UnfoldTree {
        match self {
            UnfoldTree::Node { own, children } if depth > 0 && self.depth() > depth => UnfoldTree::node(
                own.truncate(depth - 1),
                children.iter().map(|c| c.truncate(depth - 1)).collect(),
            ),
            UnfoldTree::Node { own, .. } if self.depth() > depth => own.truncate(depth),
            _ => self.clone(),
        }
    }

    /// 128-bit digest, computed bottom-up from the digests of the
    /// subtrees. Agrees with [`hash_embed`] at the same depth.
    pub fn digest(&self) -> u128 {
        match self {
            UnfoldTree::Leaf { features, code } => leaf_digest(features, *code),
            UnfoldTree::Node { own, children } => {
                let mut child: Vec<u128> = children.iter().map(UnfoldTree::digest).collect();
                child.sort_unstable();
                node_digest(own.digest(), &child)
            }
        }
    }
}

/// Unfolding tree of the ball's root. Random codes are looked up through
/// `ball.origin`, so `r` is indexed by the graph the ball was cut from.
pub fn unfold_tree(ball: &RootedBall, r: &RandomAssignment, depth: usize) -> Result<UnfoldTree> {
    if depth > ball.radius + 1 {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} exceeds ball radius {} + 1",
            ball.radius
        )));
    }
    if let Some(&node) = ball.origin.iter().find(|&&o| o >= r.len()) {
        return Err(Error::NodeOutOfRange { node, n: r.len() });
    }
    let code = |v: usize| r.code(ball.origin[v]);
    Ok(unfold(&ball.graph, &code, ball.root, depth))
}

fn unfold(g: &Graph, code: &dyn Fn(usize) -> u32, v: usize, depth: usize) -> UnfoldTree {
    if depth == 0 {
        return UnfoldTree::Leaf {
            features: g.feature(v).to_vec(),
            code: code(v),
        };
    }
    UnfoldTree::node(
        unfold(g, code, v, depth - 1),
        g.neighbors(v).iter().map(|&u| unfold(g, code, u, depth - 1)).collect(),
    )
}

/// Per-node digest of the depth-`depth` unfolding tree over the whole graph.
pub fn hash_embed(g: &Graph, r: &RandomAssignment, depth: usize) -> Result<Vec<u128>> {
    if r.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: r.len(),
        });
    }
    let mut level: Vec<u128> = (0..g.n())
        .into_par_iter()
        .map(|v| leaf_digest(g.feature(v), r.code(v)))
        .collect();
    for _ in 0..depth {
        level = (0..g.n())
            .into_par_iter()
            .map(|v| {
                let mut child: Vec<u128> = g.neighbors(v).iter().map(|&u| level[u]).collect();
                child.sort_unstable();
                node_digest(level[v], &child)
            })
            .collect();
    }
    Ok(level)
}

/// Rebuilds the radius-`radius` ball around the tree's root. Nodes are
/// identified by their random codes, so the codes must be distinct within
/// `radius + 1` hops; repeats that show up as self-loops, parallel edges,
/// conflicting features or an inconsistent re-unfolding are reported as
/// [`Error::LocalCollision`]. The returned ball's `origin` indexes the
/// sorted list of codes seen in the tree.
pub fn reconstruct_from_tree(tree: &UnfoldTree, radius: usize) -> Result<RootedBall> {
    let depth = tree.depth();
    if depth < radius + 1 {
        return Err(Error::InvalidParameter(format!(
            "tree depth {depth} too small for radius {radius}"
        )));
    }
    let mut features: HashMap<u32, &[f64]> = HashMap::new();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    collect(tree, &mut features, &mut edges)?;

    let mut codes: Vec<u32> = features.keys().copied().collect();
    codes.sort_unstable();
    let index = |c: u32| codes.binary_search(&c).expect("every code has a leaf");
    let mut adj = vec![Vec::new(); codes.len()];
    edges.sort_unstable();
    edges.dedup();
    for (a, b) in edges {
        let (i, j) = (index(a), index(b));
        adj[i].push(j);
        adj[j].push(i);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let mut graph = Graph::from_adjacency(adj)?;
    let dims: Vec<usize> = codes.iter().map(|c| features[c].len()).collect();
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::LocalCollision {
            value: tree.root_code(),
        });
    }
    if dims[0] > 0 {
        let rows: Vec<Vec<f64>> = codes.iter().map(|c| features[c].to_vec()).collect();
        graph = graph.with_features(Features::from_rows(&rows)?)?;
    }
    let root = index(tree.root_code());
    let code_of = |v: usize| codes[v];
    if unfold(&graph, &code_of, root, depth) != *tree {
        return Err(Error::LocalCollision {
            value: tree.root_code(),
        });
    }
    let mut ball = induced_ball(&graph, root, radius)?;
    ball.origin = ball.origin.iter().map(|&i| codes[i] as usize).collect();
    Ok(ball)
}

fn collect<'a>(
    tree: &'a UnfoldTree,
    features: &mut HashMap<u32, &'a [f64]>,
    edges: &mut Vec<(u32, u32)>,
) -> Result<()> {
    match tree {
        UnfoldTree::Leaf { features: x, code } => {
            if let Some(prev) = features.insert(*code, x) {
                if prev != x.as_slice() {
                    return Err(Error::LocalCollision { value: *code });
                }
            }
        }
        UnfoldTree::Node { own, children } => {
            let me = own.root_code();
            let mut seen: Vec<u32> = Vec::with_capacity(children.len());
            for c in children {
                let other = c.root_code();
                if other == me || seen.contains(&other) {
                    return Err(Error::LocalCollision { value: other });
                }
                seen.push(other);
                edges.push((me.min(other), me.max(other)));
                collect(c, features, edges)?;
            }
            collect(own, features, edges)?;
        }
    }
    Ok(())
}

/// Decides membership in a family of target rooted balls by reconstructing
/// the ball from a node's unfolding tree and testing it against stored
/// prototypes of the family.
#[derive(Clone, Debug)]
pub struct SubstructureClassifier {
    pub radius: usize,
    pub prototypes: Vec<RootedBall>,
}

impl SubstructureClassifier {
    pub fn new(radius: usize) -> Self {
        Self {
            radius,
            prototypes: Vec::new(),
        }
    }

    /// Adds every positive node's reconstructed ball not yet represented.
    /// Nodes whose tree cannot be reconstructed are skipped.
    pub fn fit<F>(&mut self, g: &Graph, r: &RandomAssignment, positive: F) -> Result<()>
    where
        F: Fn(&Graph, usize) -> bool,
    {
        for v in (0..g.n()).filter(|&v| positive(g, v)) {
            let ball = induced_ball(g, v, self.radius)?;
            let tree = unfold_tree(&ball, r, self.radius + 1)?;
            let Ok(shape) = reconstruct_from_tree(&tree, self.radius) else {
                continue;
            };
            if !self.contains(&shape)? {
                self.prototypes.push(shape);
            }
        }
        Ok(())
    }

    fn contains(&self, ball: &RootedBall) -> Result<bool> {
        for p in &self.prototypes {
            if rooted_isomorphic(p, ball)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Classifies a node from an unfolding tree of depth at least radius + 1.
    pub fn classify(&self, tree: &UnfoldTree) -> Result<bool> {
        let tree = tree.truncate(self.radius + 1);
        let ball = reconstruct_from_tree(&tree, self.radius)?;
        self.contains(&ball)
    }
}

fn canonical_f64(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

fn truncate_u64(bytes: &[u8]) -> u64 {
    u64::from_le_bytes(bytes[..8].try_into().expect("sha256 output is 32 bytes"))
}

fn truncate_u128(bytes: &[u8]) -> u128 {
    u128::from_le_bytes(bytes[..16].try_into().expect("sha256 output is 32 bytes"))
}

fn leaf_digest(features: &[f64], code: u32) -> u128 {
    let mut h = Sha256::new();
    h.update([0u8]);
    h.update((features.len() as u64).to_le_bytes());
    for x in features {
        h.update(canonical_f64(*x).to_bits().to_le_bytes());
    }
    h.update(code.to_le_bytes());
    truncate_u128(&h.finalize())
}

fn node_digest(own: u128, sorted_children: &[u128]) -> u128 {
    let mut h = Sha256::new();
    h.update([1u8]);
    h.update(own.to_le_bytes());
    h.update((sorted_children.len() as u64).to_le_bytes());
    for c in sorted_children {
        h.update(c.to_le_bytes());
    }
    truncate_u128(&h.finalize())
}
