use std::collections::HashMap;

use crate::features::{has_local_collision, RandomAssignment};
use crate::graph::Graph;

use super::NodeSolution;

/// True iff some other node within `radius` hops of `v` has `v`'s code.
pub fn repeats_within(g: &Graph, r: &RandomAssignment, v: usize, radius: usize) -> bool {
    let code = r.code(v);
    g.k_hop(v, radius).into_iter().any(|u| u != v && r.code(u) == code)
}

/// Randomized sequential greedy dominating set.
///
/// First every node whose value repeats within two hops joins the solution.
/// Then, until everything is covered, the node covering the most uncovered
/// nodes joins, ties going to the smaller [`RandomAssignment::key`].
/// The result dominates for every assignment.
pub fn greedy_mds(g: &Graph, r: &RandomAssignment) -> NodeSolution {
    let n = g.n();
    let mut members = Vec::new();
    let mut covered = vec![false; n];
    let mut uncovered = n;
    let add = |v: usize, members: &mut Vec<usize>, covered: &mut [bool], uncovered: &mut usize| {
        members.push(v);
        for w in std::iter::once(v).chain(g.neighbors(v).iter().copied()) {
            if !covered[w] {
                covered[w] = true;
                *uncovered -= 1;
            }
        }
    };
    for v in 0..n {
        if repeats_within(g, r, v, 2) {
            add(v, &mut members, &mut covered, &mut uncovered);
        }
    }
    while uncovered > 0 {
        let gain = |v: usize| {
            std::iter::once(v)
                .chain(g.neighbors(v).iter().copied())
                .filter(|&w| !covered[w])
                .count()
        };
        let best = (0..n)
            .map(|v| (gain(v), v))
            .max_by(|a, b| a.0.cmp(&b.0).then_with(|| r.key(b.1).cmp(&r.key(a.1))))
            .map(|(_, v)| v)
            .expect("uncovered nodes imply a non-empty graph");
        add(best, &mut members, &mut covered, &mut uncovered);
    }
    NodeSolution::new(g, members)
}

/// Bookkeeping for one oracle evaluation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleTrace {
    /// Memoized answers keyed by `(level, node)`.
    pub answers: HashMap<(usize, usize), bool>,
    /// Distinct nodes probed.
    pub queries: usize,
    /// The probe budget was exceeded before an answer was reached.
    pub truncated: bool,
}

struct Truncated;

/// The oracle family O_0, ..., O_{Δ+1} for the greedy dominating set.
///
/// O_0(v) answers whether `v`'s value repeats within two hops. O_k(v) is 1
/// if O_{k-1}(v) is, and otherwise 1 iff `v` still covers at least Δ+2-k
/// uncovered nodes when nodes of N_2(v) with a smaller key are judged at
/// level k and those with a larger key at level k-1. O_{Δ+1}(v) is exactly
/// membership in [`greedy_mds`].
pub struct MdsOracle<'a> {
    g: &'a Graph,
    r: &'a RandomAssignment,
    budget: Option<usize>,
    probed: Vec<bool>,
    trace: OracleTrace,
}

impl<'a> MdsOracle<'a> {
    /// `budget` caps the number of distinct nodes probed; `None` is unlimited.
    pub fn new(g: &'a Graph, r: &'a RandomAssignment, budget: Option<usize>) -> Self {
        Self {
            g,
            r,
            budget,
            probed: vec![false; g.n()],
            trace: OracleTrace::default(),
        }
    }

    /// Highest meaningful level, Δ + 1.
    pub fn top_level(&self) -> usize {
        self.g.max_degree() + 1
    }

    /// `None` when the budget ran out.
    pub fn query(&mut self, v: usize, level: usize) -> Option<bool> {
        if self.trace.truncated {
            return None;
        }
        match self.eval(level.min(self.top_level()), v) {
            Ok(ans) => Some(ans),
            Err(Truncated) => {
                self.trace.truncated = true;
                None
            }
        }
    }

    pub fn trace(&self) -> &OracleTrace {
        &self.trace
    }

    pub fn into_trace(self) -> OracleTrace {
        self.trace
    }

    fn probe(&mut self, v: usize) -> Result<(), Truncated> {
        if !self.probed[v] {
            self.probed[v] = true;
            self.trace.queries += 1;
            if self.budget.is_some_and(|b| self.trace.queries > b) {
                return Err(Truncated);
            }
        }
        Ok(())
    }

    fn eval(&mut self, level: usize, v: usize) -> Result<bool, Truncated> {
        if let Some(&ans) = self.trace.answers.get(&(level, v)) {
            return Ok(ans);
        }
        self.probe(v)?;
        let ans = if level == 0 {
            repeats_within(self.g, self.r, v, 2)
        } else if self.eval(level - 1, v)? {
            true
        } else {
            let threshold = self.g.max_degree() + 2 - level;
            self.coverage(level, v)? >= threshold
        };
        self.trace.answers.insert((level, v), ans);
        Ok(ans)
    }

    /// Uncovered nodes of N[v] given the decisions visible to O_level(v).
    fn coverage(&mut self, level: usize, v: usize) -> Result<usize, Truncated> {
        let g = self.g;
        let key_v = self.r.key(v);
        let mut count = 0;
        for w in std::iter::once(v).chain(g.neighbors(v).iter().copied()) {
            let mut dominated = false;
            for x in std::iter::once(w).chain(g.neighbors(w).iter().copied()) {
                if x == v {
                    continue;
                }
                let in_solution = if self.r.key(x) < key_v {
                    self.eval(level, x)?
                } else {
                    self.eval(level - 1, x)?
                };
                if in_solution {
                    dominated = true;
                    break;
                }
            }
            if !dominated {
                count += 1;
            }
        }
        Ok(count)
    }
}

/// O_level(v) with a private memo table. The answer is `None` when the
/// budget was exceeded.
pub fn mds_oracle(
    g: &Graph,
    r: &RandomAssignment,
    v: usize,
    level: usize,
    budget: Option<usize>,
) -> (Option<bool>, OracleTrace) {
    let mut oracle = MdsOracle::new(g, r, budget);
    let ans = oracle.query(v, level);
    (ans, oracle.into_trace())
}

/// Output of [`local_mds`] with the three parts of the solution kept apart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalMds {
    pub solution: NodeSolution,
    /// Nodes whose oracle run exceeded the budget.
    pub truncated: Vec<usize>,
    /// Nodes whose L-hop ball contains a repeated value.
    pub collided: Vec<usize>,
    /// Nodes accepted by O_{Δ+1}.
    pub accepted: Vec<usize>,
    /// Total distinct-node probes summed over all oracle runs.
    pub queries: usize,
}

/// Per-node local rule: a node joins if its L-hop ball has a repeated
/// value, if its oracle run exceeds `budget`, or if O_{Δ+1} accepts it.
/// Always a dominating set, since the accepted nodes alone are.
pub fn local_mds(g: &Graph, r: &RandomAssignment, radius: usize, budget: Option<usize>) -> LocalMds {
    let mut out = LocalMds {
        solution: NodeSolution {
            members: Vec::new(),
            feasible: false,
        },
        truncated: Vec::new(),
        collided: Vec::new(),
        accepted: Vec::new(),
        queries: 0,
    };
    let mut members = Vec::new();
    for v in 0..g.n() {
        if has_local_collision(g, r, v, radius) {
            out.collided.push(v);
            members.push(v);
            continue;
        }
        let mut oracle = MdsOracle::new(g, r, budget);
        let top = oracle.top_level();
        let ans = oracle.query(v, top);
        out.queries += oracle.trace().queries;
        match ans {
            None => {
                out.truncated.push(v);
                members.push(v);
            }
            Some(true) => {
                out.accepted.push(v);
                members.push(v);
            }
            Some(false) => {}
        }
    }
    out.solution = NodeSolution::new(g, members);
    out
}
