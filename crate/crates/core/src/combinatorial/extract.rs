use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RandomAssignment;
use crate::graph::Graph;

use super::{mds::repeats_within, EdgeSolution, NodeSolution};

/// Direction of a monotone problem. Nodes whose value repeats nearby are
/// forced into the solution when minimizing and out of it when maximizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Minimize,
    Maximize,
}

/// Threshold per-node scores at 0.5 after forcing nodes whose value repeats
/// within `radius` hops. Only the forced side is guaranteed; the certificate
/// on the returned solution reports whether the result dominates.
pub fn extract_node_solution(
    g: &Graph,
    r: &RandomAssignment,
    scores: &[f64],
    radius: usize,
    mode: Mode,
) -> Result<NodeSolution> {
    if scores.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: scores.len(),
        });
    }
    let members = (0..g.n())
        .filter(|&v| {
            let z = if repeats_within(g, r, v, radius) {
                match mode {
                    Mode::Minimize => 1.0,
                    Mode::Maximize => 0.0,
                }
            } else {
                scores[v]
            };
            z > 0.5
        })
        .collect();
    Ok(NodeSolution::new(g, members))
}

/// Keep edges whose endpoint embeddings have inner product above 0.5,
/// after replacing embeddings of nodes with a nearby repeated value by the
/// all-ones (minimize) or all-zeros (maximize) vector.
pub fn extract_edge_solution(
    g: &Graph,
    r: &RandomAssignment,
    embeddings: &[Vec<f64>],
    radius: usize,
    mode: Mode,
) -> Result<EdgeSolution> {
    if embeddings.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: embeddings.len(),
        });
    }
    let forced: Vec<bool> = (0..g.n()).map(|v| repeats_within(g, r, v, radius)).collect();
    let fill = match mode {
        Mode::Minimize => 1.0,
        Mode::Maximize => 0.0,
    };
    let dot = |u: usize, v: usize| -> f64 {
        let (a, b) = (&embeddings[u], &embeddings[v]);
        let len = a.len().max(b.len());
        (0..len)
            .map(|i| {
                let x = if forced[u] {
                    fill
                } else {
                    a.get(i).copied().unwrap_or(0.0)
                };
                let y = if forced[v] {
                    fill
                } else {
                    b.get(i).copied().unwrap_or(0.0)
                };
                x * y
            })
            .sum()
    };
    let members = g.edges().filter(|&(u, v)| dot(u, v) > 0.5).collect();
    Ok(EdgeSolution::new(members))
}

/// Index of the unordered code pair `{a, b}` in a `k * k` one-hot layout.
pub fn pair_index(a: u32, b: u32, support_size: usize) -> usize {
    let (lo, hi) = (a.min(b) as usize, a.max(b) as usize);
    lo * support_size + hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorial::greedy_mm;
    use crate::features::{assign, uniform_support};
    use crate::gen::{mix, random_regular};
    use crate::graph::named::petersen;

    #[test]
    fn all_ones_scores_take_everything() {
        let g = petersen();
        let r = RandomAssignment::from_codes((0..10).collect(), 10).unwrap();
        let sol = extract_node_solution(&g, &r, &[1.0; 10], 2, Mode::Minimize).unwrap();
        assert_eq!(sol.size(), 10);
        assert!(sol.feasible);
        assert!(extract_node_solution(&g, &r, &[1.0; 3], 2, Mode::Minimize).is_err());
    }

    #[test]
    fn degenerate_values_force_nodes() {
        let g = petersen();
        let r = RandomAssignment::from_codes(vec![0; 10], 1).unwrap();
        let sol = extract_node_solution(&g, &r, &[0.0; 10], 1, Mode::Minimize).unwrap();
        assert_eq!(sol.size(), 10);
        let ones = vec![vec![1.0; 4]; 10];
        let edges = extract_edge_solution(&g, &r, &ones, 1, Mode::Maximize).unwrap();
        assert_eq!(edges.size(), 0);
    }

    #[test]
    fn zero_embeddings_give_empty_matching() {
        let g = petersen();
        let r = RandomAssignment::from_codes((0..10).collect(), 10).unwrap();
        let sol = extract_edge_solution(&g, &r, &vec![vec![0.0; 3]; 10], 2, Mode::Maximize).unwrap();
        assert_eq!(sol.size(), 0);
        assert!(sol.feasible);
    }

    #[test]
    fn pairing_embeddings_reproduce_greedy_matching() {
        // Each matched node gets the one-hot vector of its edge's code pair;
        // inner products are 1 exactly on matched edges.
        let k = 200;
        let dist = uniform_support(k).unwrap();
        let mut checked = 0;
        let mut i = 0;
        while checked < 100 {
            i += 1;
            let g = random_regular(10, 3, mix(31, i)).unwrap();
            let r = assign(&g, &dist, mix(32, i));
            if crate::features::has_duplicate(r.codes().iter().copied()) {
                continue;
            }
            let m = greedy_mm(&g, &r, 3);
            let mut emb = vec![vec![0.0; k * k]; g.n()];
            for &(u, v) in &m.members {
                let idx = pair_index(r.code(u), r.code(v), k);
                emb[u][idx] = 1.0;
                emb[v][idx] = 1.0;
            }
            let back = extract_edge_solution(&g, &r, &emb, 3, Mode::Maximize).unwrap();
            assert_eq!(back, m);
            checked += 1;
        }
    }
}
