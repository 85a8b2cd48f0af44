use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rgin_core::combinatorial::{
    approx_ratio_bench, estimate_size, exact_mds, exact_mm, greedy_mds, greedy_mm, local_mds, Algo,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{corpus, emit, print_out, resolver, seeds, write_json, CorpusArgs};
use crate::{Failure, Globals};

/// Support size used when none is given: large enough that random values
/// rarely repeat on small graphs.
const SOLVER_SUPPORT: usize = 1_000_000;

#[derive(Args)]
pub struct SolveMdsArgs {
    /// JSONL graphs; stored random values are used when present.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Also compute an optimum by exhaustive search.
    #[arg(long)]
    exact: bool,
    /// Use the per-node local rule instead of the sequential greedy.
    #[arg(long)]
    local: bool,
    /// Ball radius for the local rule's collision test.
    #[arg(long)]
    radius: Option<usize>,
    /// Distinct-node probe cap per local oracle run.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn ratio(size: usize, opt: usize) -> f64 {
    if opt == 0 {
        1.0
    } else {
        size as f64 / opt as f64
    }
}

pub fn solve_mds(args: SolveMdsArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("solve-mds", globals)?;
    let s = seeds(&mut r, globals, SOLVER_SUPPORT)?;
    let corpus = corpus(
        &mut r,
        CorpusArgs {
            input: args.input,
            graphs: None,
            nodes: None,
            seed: None,
        },
        10,
    )?;
    let exact = r.get("exact", Some(args.exact).filter(|&b| b), false)?;
    let local = r.get("local", Some(args.local).filter(|&b| b), false)?;
    let radius = r.get("radius", args.radius, 2)?;
    let budget = r.optional("budget", args.budget)?;
    let out = r.untracked("out", args.out)?;
    let config = r.finish();

    let rows: Vec<Value> = (0..corpus.graphs.len())
        .into_par_iter()
        .map(|i| -> Result<Value> {
            let g = &corpus.graphs[i];
            let assignment = corpus.assignment(i, s.support, s.feature)?;
            let mut row = if local {
                let res = local_mds(g, &assignment, radius, budget);
                json!({
                    "members": res.solution.members,
                    "feasible": res.solution.feasible,
                    "truncated": res.truncated,
                    "collided": res.collided,
                    "queries": res.queries,
                })
            } else {
                let sol = greedy_mds(g, &assignment);
                json!({"members": sol.members, "feasible": sol.feasible})
            };
            let size = row["members"].as_array().map_or(0, Vec::len);
            row["graph"] = json!(i);
            row["size"] = json!(size);
            if exact {
                let opt = exact_mds(g)?.size();
                row["opt"] = json!(opt);
                row["ratio"] = json!(ratio(size, opt));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    finish_solutions(&config, rows, out)
}

fn finish_solutions(config: &crate::config::RunConfig, rows: Vec<Value>, out: Option<PathBuf>) -> Result<()> {
    let infeasible: Vec<u64> = rows
        .iter()
        .filter(|row| row["feasible"] != json!(true))
        .filter_map(|row| row["graph"].as_u64())
        .collect();
    let body = json!({"infeasible": infeasible, "graphs": rows});
    let printed = emit(config, body)?;
    if let Some(path) = out {
        write_json(&path, &printed)?;
    }
    if !infeasible.is_empty() {
        return Err(Failure(format!("infeasible solution on graph(s) {infeasible:?}")).into());
    }
    Ok(())
}

#[derive(Args)]
pub struct SolveMmArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Longest augmenting path length searched.
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn solve_mm(args: SolveMmArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("solve-mm", globals)?;
    let s = seeds(&mut r, globals, SOLVER_SUPPORT)?;
    let corpus = corpus(
        &mut r,
        CorpusArgs {
            input: args.input,
            graphs: None,
            nodes: None,
            seed: None,
        },
        10,
    )?;
    let phases = r.get("phases", args.phases, 5)?;
    let exact = r.get("exact", Some(args.exact).filter(|&b| b), false)?;
    let out = r.untracked("out", args.out)?;
    let config = r.finish();
    if phases == 0 {
        return Err(crate::Usage("--phases must be at least 1".into()).into());
    }

    let rows: Vec<Value> = (0..corpus.graphs.len())
        .into_par_iter()
        .map(|i| -> Result<Value> {
            let g = &corpus.graphs[i];
            let assignment = corpus.assignment(i, s.support, s.feature)?;
            let sol = greedy_mm(g, &assignment, phases);
            let mut row = json!({
                "graph": i,
                "size": sol.size(),
                "edges": sol.members,
                "feasible": sol.feasible,
            });
            if exact {
                let opt = exact_mm(g)?.size();
                row["opt"] = json!(opt);
                row["ratio"] = json!(ratio(sol.size(), opt));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    finish_solutions(&config, rows, out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoName {
    GreedyMds,
    LocalMds,
    GreedyMm,
}

#[derive(Args)]
pub struct RatioBenchArgs {
    #[arg(long, value_enum)]
    algo: Option<AlgoName>,
    /// JSONL graphs; random 3-regular graphs are generated when absent.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Seed of the generated corpus.
    #[arg(long)]
    seed: Option<u64>,
    /// Random-value draws per graph, seeded from --feature-seed upward.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Slack in the bound: H(Δ+1) + eps for dominating sets, OPT / (1 + eps)
    /// for matchings.
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn ratio_bench(args: RatioBenchArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("ratio-bench", globals)?;
    let name = r.get("algo", args.algo, AlgoName::GreedyMds)?;
    let s = seeds(&mut r, globals, SOLVER_SUPPORT)?;
    let corpus = corpus(
        &mut r,
        CorpusArgs {
            input: args.input,
            graphs: args.graphs,
            nodes: args.nodes,
            seed: args.seed,
        },
        1000,
    )?;
    let repeats = r.get("repeats", args.repeats, 1)?;
    let (algo, eps_default) = match name {
        AlgoName::GreedyMds => (Algo::GreedyMds, 0.0),
        AlgoName::LocalMds => (
            Algo::LocalMds {
                radius: r.get("radius", args.radius, 2)?,
                budget: r.optional("budget", args.budget)?,
            },
            0.3,
        ),
        AlgoName::GreedyMm => (
            Algo::GreedyMm {
                phases: r.get("phases", args.phases, 5)?,
            },
            0.5,
        ),
    };
    let eps = r.get("eps", args.eps, eps_default)?;
    let out = r.untracked("out", args.out)?;
    let config = r.finish();

    let feature_seeds: Vec<u64> = (0..repeats as u64).map(|k| s.feature + k).collect();
    let report = approx_ratio_bench(&corpus.graphs, algo, s.support, &feature_seeds, eps)?;
    let mut printed = json!({
        "command": config.command,
        "config_digest": config.digest(),
        "config": config.params,
        "passed": report.passed(),
    });
    printed["report"] = serde_json::to_value(&report)?;
    if let Some(path) = &out {
        write_json(path, &printed)?;
    }
    let mut brief = printed.clone();
    brief["report"]
        .as_object_mut()
        .expect("report serializes to an object")
        .remove("per_graph");
    print_out(&(serde_json::to_string_pretty(&brief)? + "\n"))?;
    if !report.passed() {
        return Err(Failure(format!(
            "bound {} violated on graph id(s) {:?}",
            report.per_graph.first().map_or(f64::NAN, |g| g.bound),
            report.bound_violations
        ))
        .into());
    }
    Ok(())
}

#[derive(Args)]
pub struct EstimateArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Independent estimates per graph, sampled with --model-seed.
    #[arg(long)]
    trials: Option<usize>,
    /// Probe the per-node local rule instead of the greedy solution.
    #[arg(long)]
    local: bool,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
}

pub fn estimate(args: EstimateArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("estimate", globals)?;
    let s = seeds(&mut r, globals, SOLVER_SUPPORT)?;
    let corpus = corpus(
        &mut r,
        CorpusArgs {
            input: args.input,
            graphs: args.graphs,
            nodes: args.nodes,
            seed: args.seed,
        },
        10,
    )?;
    let eps = r.get("eps", args.eps, 0.1)?;
    let delta = r.get("delta", args.delta, 0.01)?;
    let trials = r.get("trials", args.trials, 100)?;
    let local = r.get("local", Some(args.local).filter(|&b| b), false)?;
    let radius = r.get("radius", args.radius, 2)?;
    let budget = r.optional("budget", args.budget)?;
    let config = r.finish();

    let rows: Vec<Value> = (0..corpus.graphs.len())
        .into_par_iter()
        .map(|i| -> Result<Value> {
            let g = &corpus.graphs[i];
            let assignment = corpus.assignment(i, s.support, s.feature)?;
            let sol = if local {
                local_mds(g, &assignment, radius, budget).solution
            } else {
                greedy_mds(g, &assignment)
            };
            let members: Vec<bool> = (0..g.n()).map(|v| sol.contains(v)).collect();
            let truth = members.iter().filter(|&&m| m).count();
            let mut rng = ChaCha8Rng::seed_from_u64(rgin_core::gen::mix(s.model, i as u64));
            let mut misses = 0;
            let mut worst: f64 = 0.0;
            for _ in 0..trials {
                let est = estimate_size(g.n(), |v| members[v], eps, delta, &mut rng)?;
                let err = (est.estimate - truth as f64).abs();
                worst = worst.max(err);
                if err > eps * g.n() as f64 {
                    misses += 1;
                }
            }
            Ok(json!({"graph": i, "n": g.n(), "size": truth, "trials": trials, "misses": misses, "max_error": worst}))
        })
        .collect::<Result<_>>()?;
    let total: u64 = rows.iter().filter_map(|r| r["trials"].as_u64()).sum();
    let misses: u64 = rows.iter().filter_map(|r| r["misses"].as_u64()).sum();
    let rate = if total == 0 { 0.0 } else { misses as f64 / total as f64 };
    // Three binomial standard deviations above delta.
    let limit = delta + 3.0 * (delta * (1.0 - delta) / total.max(1) as f64).sqrt();
    emit(
        &config,
        json!({"trials": total, "failures": misses, "failure_rate": rate, "allowed_rate": limit, "graphs": rows}),
    )?;
    if rate > limit {
        return Err(Failure(format!("failure rate {rate} above {limit}")).into());
    }
    Ok(())
}
