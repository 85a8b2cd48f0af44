use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::{assign, uniform_support};
use crate::gen::mix;
use crate::graph::Graph;

use super::{exact_mds, exact_mm, greedy_mds, greedy_mm, harmonic, local_mds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Algo {
    GreedyMds,
    LocalMds { radius: usize, budget: Option<usize> },
    GreedyMm { phases: usize },
}

impl Algo {
    fn is_matching(self) -> bool {
        matches!(self, Algo::GreedyMm { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRatio {
    pub graph: usize,
    pub feature_seed: u64,
    pub size: usize,
    pub opt: usize,
    /// size / opt; above 1 for dominating sets, at most 1 for matchings.
    pub ratio: f64,
    pub bound: f64,
    pub feasible: bool,
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub algo: Algo,
    pub support_size: usize,
    pub eps: f64,
    pub per_graph: Vec<GraphRatio>,
    pub summary: RatioSummary,
    /// Ids of graphs with an infeasible solution or a ratio outside the bound.
    pub bound_violations: Vec<usize>,
}

impl RatioReport {
    pub fn passed(&self) -> bool {
        self.bound_violations.is_empty()
    }
}

const RATIO_TOLERANCE: f64 = 1e-12;

/// Runs `algo` on every graph under every feature seed and compares with
/// the exact optimum. Dominating-set ratios are checked against
/// H(Δ + 1) + `eps`, matching ratios against 1 / (1 + `eps`).
pub fn approx_ratio_bench(
    graphs: &[Graph],
    algo: Algo,
    support_size: usize,
    seeds: &[u64],
    eps: f64,
) -> Result<RatioReport> {
    let dist = uniform_support(support_size)?;
    let rows: Vec<Vec<GraphRatio>> = graphs
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let opt = if algo.is_matching() {
                exact_mm(g)?.size()
            } else {
                exact_mds(g)?.size()
            };
            let bound = if algo.is_matching() {
                1.0 / (1.0 + eps)
            } else {
                let h = harmonic(g.max_degree() + 1);
                *h.numer() as f64 / *h.denom() as f64 + eps
            };
            seeds
                .iter()
                .map(|&seed| {
                    let feature_seed = mix(seed, i as u64);
                    let r = assign(g, &dist, feature_seed);
                    let (size, feasible) = match algo {
                        Algo::GreedyMds => {
                            let s = greedy_mds(g, &r);
                            (s.size(), s.feasible)
                        }
                        Algo::LocalMds { radius, budget } => {
                            let s = local_mds(g, &r, radius, budget).solution;
                            (s.size(), s.feasible)
                        }
                        Algo::GreedyMm { phases } => {
                            let s = greedy_mm(g, &r, phases);
                            (s.size(), s.feasible)
                        }
                    };
                    let ratio = if opt == 0 { 1.0 } else { size as f64 / opt as f64 };
                    let within_bound = if algo.is_matching() {
                        ratio + RATIO_TOLERANCE >= bound
                    } else {
                        ratio <= bound + RATIO_TOLERANCE
                    };
                    Ok(GraphRatio {
                        graph: i,
                        feature_seed,
                        size,
                        opt,
                        ratio,
                        bound,
                        feasible,
                        within_bound,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let per_graph: Vec<GraphRatio> = rows.into_iter().flatten().collect();
    let mut bound_violations: Vec<usize> = per_graph
        .iter()
        .filter(|row| !row.feasible || !row.within_bound)
        .map(|row| row.graph)
        .collect();
    bound_violations.dedup();
    let ratios = per_graph.iter().map(|row| row.ratio);
    let summary = RatioSummary {
        count: per_graph.len(),
        min: ratios.clone().fold(f64::INFINITY, f64::min),
        mean: ratios.clone().sum::<f64>() / per_graph.len().max(1) as f64,
        max: ratios.fold(f64::NEG_INFINITY, f64::max),
    };
    Ok(RatioReport {
        algo,
        support_size,
        eps,
        per_graph,
        summary,
        bound_violations,
    })
}
