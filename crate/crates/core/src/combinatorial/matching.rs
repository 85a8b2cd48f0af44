use crate::features::{has_duplicate, RandomAssignment};
use crate::graph::Graph;

use super::EdgeSolution;

/// Edges `{u, v}` with a repeated value anywhere in N_t(u) ∪ N_t(v).
pub fn collision_edges(g: &Graph, r: &RandomAssignment, radius: usize) -> Vec<(usize, usize)> {
    g.edges()
        .filter(|&(u, v)| {
            let mut ball = g.k_hop(u, radius);
            ball.extend(g.k_hop(v, radius));
            ball.sort_unstable();
            ball.dedup();
            has_duplicate(ball.into_iter().map(|w| r.code(w)))
        })
        .collect()
}

/// Phased augmenting-path matching.
///
/// Edges returned by [`collision_edges`] with radius `phases` are never
/// used. In phase k = 1..=phases every augmenting path with k edges is
/// visited in lexicographic order of its random codes (then node indices);
/// a path joins the phase's set when it shares no vertex with paths already
/// taken. The matching is then flipped along all taken paths.
pub fn greedy_mm(g: &Graph, r: &RandomAssignment, phases: usize) -> EdgeSolution {
    let n = g.n();
    let mut excluded = collision_edges(g, r, phases);
    excluded.sort_unstable();
    let usable = |u: usize, v: usize| excluded.binary_search(&(u.min(v), u.max(v))).is_err();

    let mut mate: Vec<Option<usize>> = vec![None; n];
    for k in 1..=phases {
        let mut paths: Vec<(PathKey, Vec<usize>)> = augmenting_paths(g, &mate, k, &usable)
            .into_iter()
            .filter_map(|p| {
                let forward = path_key(r, &p);
                let reversed: Vec<usize> = p.iter().rev().copied().collect();
                (forward < path_key(r, &reversed)).then_some((forward, p))
            })
            .collect();
        paths.sort_unstable();
        let mut taken = vec![false; n];
        let mut chosen = Vec::new();
        for (_, p) in paths {
            if p.iter().all(|&v| !taken[v]) {
                p.iter().for_each(|&v| taken[v] = true);
                chosen.push(p);
            }
        }
        for p in chosen {
            // Unmatched edges sit at even positions of an augmenting path;
            // they become the matched ones.
            for pair in p.chunks_exact(2) {
                mate[pair[0]] = Some(pair[1]);
                mate[pair[1]] = Some(pair[0]);
            }
        }
    }
    let members = (0..n)
        .filter_map(|u| mate[u].filter(|&v| u < v).map(|v| (u, v)))
        .collect();
    EdgeSolution::new(members)
}

type PathKey = (Vec<u32>, Vec<usize>);

fn path_key(r: &RandomAssignment, p: &[usize]) -> PathKey {
    (p.iter().map(|&v| r.code(v)).collect(), p.to_vec())
}

/// Simple paths with `len` edges that alternate unmatched/matched edges and
/// start and end at free nodes. Both orientations of a path are listed.
fn augmenting_paths(
    g: &Graph,
    mate: &[Option<usize>],
    len: usize,
    usable: &dyn Fn(usize, usize) -> bool,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if len.is_multiple_of(2) {
        // Both ends free and alternation starting unmatched force odd length.
        return out;
    }
    let mut path = Vec::with_capacity(len + 1);
    for start in 0..g.n() {
        if mate[start].is_some() {
            continue;
        }
        path.clear();
        path.push(start);
        extend_path(g, mate, len, usable, &mut path, &mut out);
    }
    out
}

fn extend_path(
    g: &Graph,
    mate: &[Option<usize>],
    len: usize,
    usable: &dyn Fn(usize, usize) -> bool,
    path: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let last = *path.last().expect("path is never empty");
    let step = path.len() - 1;
    if step == len {
        if mate[last].is_none() {
            out.push(path.clone());
        }
        return;
    }
    let want_matched = step % 2 == 1;
    for &next in g.neighbors(last) {
        let matched = mate[last] == Some(next);
        if matched != want_matched || path.contains(&next) || !usable(last, next) {
            continue;
        }
        path.push(next);
        extend_path(g, mate, len, usable, path, out);
        path.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{assign, uniform_support};
    use crate::gen::{mix, random_regular};
    use crate::graph::named::{complete, path};

    fn distinct(n: usize) -> RandomAssignment {
        RandomAssignment::from_codes((0..n as u32).collect(), n).unwrap()
    }

    #[test]
    fn single_edge() {
        let sol = greedy_mm(&path(2), &distinct(2), 1);
        assert_eq!(sol.members, vec![(0, 1)]);
    }

    #[test]
    fn path_on_four_nodes_completes() {
        // Every value order; phase 1 may grab the middle edge, phase 3 fixes it.
        let orders = [[0, 1, 2, 3], [3, 0, 1, 2], [2, 0, 1, 3], [1, 2, 0, 3], [3, 2, 1, 0]];
        for codes in orders {
            let r = RandomAssignment::from_codes(codes.to_vec(), 4).unwrap();
            let sol = greedy_mm(&path(4), &r, 3);
            assert_eq!(sol.size(), 2, "{codes:?}");
            assert!(sol.feasible);
        }
        let middle_first = RandomAssignment::from_codes(vec![3, 0, 1, 2], 4).unwrap();
        assert_eq!(greedy_mm(&path(4), &middle_first, 1).members, vec![(1, 2)]);
    }

    #[test]
    fn lexicographic_phase_one_order() {
        // K4 with codes 0..3: edge (0,1) has the smallest code tuple.
        let sol = greedy_mm(&complete(4), &distinct(4), 1);
        assert_eq!(sol.members, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn collisions_exclude_edges() {
        let one = uniform_support(1).unwrap();
        for seed in 0..10 {
            let g = random_regular(10, 3, seed).unwrap();
            let r = assign(&g, &one, seed);
            assert_eq!(collision_edges(&g, &r, 1).len(), g.num_edges());
            let sol = greedy_mm(&g, &r, 3);
            assert!(sol.feasible);
            assert_eq!(sol.size(), 0);
        }
    }

    #[test]
    fn always_a_matching() {
        for k in [2, 5, 100] {
            let dist = uniform_support(k).unwrap();
            for i in 0..20 {
                let g = random_regular(14, 3, mix(k as u64, i)).unwrap();
                let r = assign(&g, &dist, i);
                for t in 1..=5 {
                    assert!(greedy_mm(&g, &r, t).feasible);
                }
            }
        }
    }
}
