//! Exhaustive solvers for small instances.

use crate::error::{Error, Result};
use crate::graph::Graph;

use super::{EdgeSolution, NodeSolution};

pub const EXACT_MDS_LIMIT: usize = 24;
pub const EXACT_MM_LIMIT: usize = 30;

/// Minimum dominating set by iterative deepening on the solution size.
///
/// Some node of N[u] must be chosen for the first undominated node u, so
/// each level branches over at most Δ + 1 candidates.
pub fn exact_mds(g: &Graph) -> Result<NodeSolution> {
    let n = g.n();
    if n > EXACT_MDS_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: EXACT_MDS_LIMIT,
        });
    }
    if n == 0 {
        return Ok(NodeSolution::new(g, Vec::new()));
    }
    let closed: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(1u32 << v, |m, &w| m | 1 << w))
        .collect();
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let reach = g.max_degree() + 1;
    let lower = n.div_ceil(reach);
    let mut chosen = Vec::new();
    for k in lower..=n {
        if dominate_within(&closed, full, 0, k, reach, &mut chosen) {
            return Ok(NodeSolution::new(g, chosen));
        }
    }
    unreachable!("the whole node set dominates")
}

fn dominate_within(
    closed: &[u32],
    full: u32,
    covered: u32,
    budget: usize,
    reach: usize,
    chosen: &mut Vec<usize>,
) -> bool {
    if covered == full {
        return true;
    }
    let missing = (full & !covered).count_ones() as usize;
    if budget == 0 || missing > budget * reach {
        return false;
    }
    let u = (full & !covered).trailing_zeros() as usize;
    let mut candidates = closed[u];
    while candidates != 0 {
        let w = candidates.trailing_zeros() as usize;
        candidates &= candidates - 1;
        chosen.push(w);
        if dominate_within(closed, full, covered | closed[w], budget - 1, reach, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// Maximum matching by branch and bound over nodes: the lowest undecided
/// node is either left unmatched or matched to an undecided neighbor.
/// A greedy matching seeds the incumbent; half the undecided nodes bound
/// the remaining gain.
pub fn exact_mm(g: &Graph) -> Result<EdgeSolution> {
    let n = g.n();
    if n > EXACT_MM_LIMIT {
        return Err(Error::SizeLimit {
            size: n,
            limit: EXACT_MM_LIMIT,
        });
    }
    let mut best = greedy_matching(g);
    let mut state = MatchSearch {
        g,
        decided: vec![false; n],
        current: Vec::new(),
        best: &mut best,
    };
    state.search(0, n);
    Ok(EdgeSolution::new(best))
}

fn greedy_matching(g: &Graph) -> Vec<(usize, usize)> {
    let mut used = vec![false; g.n()];
    let mut m = Vec::new();
    for (u, v) in g.edges() {
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            m.push((u, v));
        }
    }
    m
}

struct MatchSearch<'a> {
    g: &'a Graph,
    decided: Vec<bool>,
    current: Vec<(usize, usize)>,
    best: &'a mut Vec<(usize, usize)>,
}

impl MatchSearch<'_> {
    fn search(&mut self, from: usize, undecided: usize) {
        if self.current.len() + undecided / 2 <= self.best.len() {
            return;
        }
        let Some(v) = (from..self.g.n()).find(|&v| !self.decided[v]) else {
            if self.current.len() > self.best.len() {
                *self.best = self.current.clone();
            }
            return;
        };
        self.decided[v] = true;
        for &u in self.g.neighbors(v) {
            if self.decided[u] {
                continue;
            }
            self.decided[u] = true;
            self.current.push((v.min(u), v.max(u)));
            self.search(v + 1, undecided - 2);
            self.current.pop();
            self.decided[u] = false;
        }
        self.search(v + 1, undecided - 1);
        self.decided[v] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorial::{is_dominating, is_matching};
    use crate::gen::{mix, random_regular};
    use crate::graph::named::{complete, cycle, path, petersen, star};

    fn brute_mds(g: &Graph) -> usize {
        let n = g.n();
        (0u32..1 << n)
            .filter(|&mask| {
                let members: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
                is_dominating(g, &members)
            })
            .map(u32::count_ones)
            .min()
            .unwrap() as usize
    }

    fn brute_mm(g: &Graph) -> usize {
        let edges: Vec<_> = g.edges().collect();
        (0u32..1 << edges.len())
            .filter_map(|mask| {
                let chosen: Vec<_> = (0..edges.len())
                    .filter(|&i| mask >> i & 1 == 1)
                    .map(|i| edges[i])
                    .collect();
                is_matching(&chosen).then_some(chosen.len())
            })
            .max()
            .unwrap()
    }

    #[test]
    fn small_named_graphs() {
        assert_eq!(exact_mds(&cycle(4)).unwrap().size(), 2);
        assert_eq!(exact_mds(&complete(4)).unwrap().size(), 1);
        assert_eq!(exact_mds(&star(5)).unwrap().members, vec![0]);
        assert_eq!(exact_mm(&cycle(6)).unwrap().size(), 3);
        assert_eq!(exact_mm(&cycle(5)).unwrap().size(), 2);
        assert_eq!(exact_mm(&path(1)).unwrap().size(), 0);
    }

    #[test]
    fn petersen_against_brute_force() {
        let p = petersen();
        assert_eq!(brute_mds(&p), 3);
        assert_eq!(exact_mds(&p).unwrap().size(), 3);
        assert_eq!(brute_mm(&p), 5);
        let m = exact_mm(&p).unwrap();
        assert_eq!(m.size(), 5);
        assert!(m.feasible);
    }

    #[test]
    fn random_graphs_against_brute_force() {
        for i in 0..15 {
            let g = random_regular(12, 3, mix(21, i)).unwrap();
            let mds = exact_mds(&g).unwrap();
            assert!(mds.feasible);
            assert_eq!(mds.size(), brute_mds(&g));
            let g = random_regular(10, 3, mix(22, i)).unwrap();
            assert_eq!(exact_mm(&g).unwrap().size(), brute_mm(&g));
        }
    }

    #[test]
    fn size_limits() {
        assert!(matches!(exact_mds(&cycle(25)), Err(Error::SizeLimit { .. })));
        assert!(matches!(exact_mm(&cycle(31)), Err(Error::SizeLimit { .. })));
        assert!(exact_mm(&cycle(30)).is_ok());
    }
}
