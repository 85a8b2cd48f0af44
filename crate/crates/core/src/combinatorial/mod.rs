//! Dominating-set and matching algorithms: the sequential greedy
//! procedures driven by random values, their local oracle form, exact
//! solvers used as ground truth, solution extraction from network outputs,
//! and the sampling size estimator.

mod estimate;
mod exact;
mod extract;
mod matching;
mod mds;
mod ratio;

pub use estimate::{estimate_size, sample_count, SizeEstimate};
pub use exact::{exact_mds, exact_mm, EXACT_MDS_LIMIT, EXACT_MM_LIMIT};
pub use extract::{extract_edge_solution, extract_node_solution, pair_index, Mode};
pub use matching::{collision_edges, greedy_mm};
pub use mds::{greedy_mds, local_mds, mds_oracle, repeats_within, LocalMds, MdsOracle, OracleTrace};
pub use ratio::{approx_ratio_bench, Algo, GraphRatio, RatioReport, RatioSummary};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;

/// A node set with its domination certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSolution {
    /// Sorted, without duplicates.
    pub members: Vec<usize>,
    pub feasible: bool,
}

impl NodeSolution {
    pub fn new(g: &Graph, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        let feasible = is_dominating(g, &members);
        Self { members, feasible }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }
}

/// An edge set with its matching certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSolution {
    /// Sorted pairs `(u, v)` with `u < v`.
    pub members: Vec<(usize, usize)>,
    pub feasible: bool,
}

impl EdgeSolution {
    pub fn new(members: Vec<(usize, usize)>) -> Self {
        let mut members: Vec<_> = members.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        members.sort_unstable();
        members.dedup();
        let feasible = is_matching(&members);
        Self { members, feasible }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Every node is in `members` or adjacent to one of them.
pub fn is_dominating(g: &Graph, members: &[usize]) -> bool {
    let mut covered = vec![false; g.n()];
    for &v in members {
        covered[v] = true;
        for &w in g.neighbors(v) {
            covered[w] = true;
        }
    }
    covered.into_iter().all(|c| c)
}

/// No two edges share an endpoint.
pub fn is_matching(edges: &[(usize, usize)]) -> bool {
    let mut seen = std::collections::HashSet::new();
    edges.iter().all(|&(u, v)| u != v && seen.insert(u) && seen.insert(v))
}

/// H(k) = 1 + 1/2 + ... + 1/k, exactly.
pub fn harmonic(k: usize) -> Ratio<u64> {
    (1..=k as u64).map(|i| Ratio::new(1, i)).sum()
}
