use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use rgin_core::features::{assign, uniform_support};
use rgin_core::graph::named::cycle;
use rgin_core::neural::grad_check_matrix;
use rgin_core::wl::{hash_embed as embed, wl_refine};
use rgin_core::ColorMap;
use serde_json::{json, Value};

use super::{corpus, emit, print_out, resolver, seeds, write_json, CorpusArgs, DEFAULT_SUPPORT};
use crate::{Failure, Globals};

#[derive(Args)]
pub struct WlDemoArgs {
    /// Refinement round cap.
    #[arg(long)]
    rounds: Option<usize>,
    /// Unfolding depth of the digests computed with random values.
    #[arg(long)]
    depth: Option<usize>,
    /// Print JSON instead of the table.
    #[arg(long)]
    json: bool,
}

pub fn wl_demo(args: WlDemoArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("wl-demo", globals)?;
    let s = seeds(&mut r, globals, DEFAULT_SUPPORT)?;
    let rounds = r.get("rounds", args.rounds, 10)?;
    let depth = r.get("depth", args.depth, 3)?;
    let config = r.finish();

    let g = cycle(3).disjoint_union(&cycle(6));
    let stable = wl_refine(&g, &ColorMap::uniform(g.n()), rounds)?;
    let assignment = assign(&g, &uniform_support(s.support)?, s.feature);
    let digests = embed(&g, &assignment, depth)?;
    let shared = stable.num_classes() == 1;

    let rows: Vec<Value> = (0..g.n())
        .map(|v| {
            let (graph, node) = if v < 3 { ("C3", v) } else { ("C6", v - 3) };
            json!({
                "graph": graph,
                "node": node,
                "wl_color": format!("{:016x}", stable.colors[v]),
                "random_value": assignment.code(v),
                "digest": format!("{:032x}", digests[v]),
            })
        })
        .collect();
    if args.json {
        emit(
            &config,
            json!({"stable_round": stable.round, "wl_classes": stable.num_classes(), "nodes": rows}),
        )?;
    } else {
        let mut text =
            format!("graph  node  wl color          random value  depth-{depth} digest with random values\n");
        for row in &rows {
            text += &format!(
                "{:<5}  {:>4}  {}  {:>12}  {}\n",
                row["graph"].as_str().unwrap_or_default(),
                row["node"].as_u64().unwrap_or_default(),
                row["wl_color"].as_str().unwrap_or_default(),
                row["random_value"].as_u64().unwrap_or_default(),
                row["digest"].as_str().unwrap_or_default()
            );
        }
        let mut distinct = digests.clone();
        distinct.sort_unstable();
        distinct.dedup();
        text += &format!(
            "refinement stable after round {}: {} color class(es) over {} nodes; {} distinct digests with random values\n",
            stable.round,
            stable.num_classes(),
            g.n(),
            distinct.len()
        );
        text += &format!("config_digest {}\n", config.digest());
        print_out(&text)?;
    }
    if !shared {
        return Err(Failure(format!("expected one shared color, got {}", stable.num_classes())).into());
    }
    Ok(())
}

#[derive(Args)]
pub struct HashEmbedArgs {
    /// JSONL graphs; stored random values are used when present.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn hash_embed(args: HashEmbedArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("hash-embed", globals)?;
    let s = seeds(&mut r, globals, DEFAULT_SUPPORT)?;
    let corpus = corpus(
        &mut r,
        CorpusArgs {
            input: args.input,
            graphs: None,
            nodes: None,
            seed: None,
        },
        1,
    )?;
    let depth = r.get("depth", args.depth, 2)?;
    let out = r.untracked("out", args.out)?;
    let config = r.finish();

    let graphs: Vec<Value> = (0..corpus.graphs.len())
        .map(|i| -> Result<Value> {
            let assignment = corpus.assignment(i, s.support, s.feature)?;
            let digests = embed(&corpus.graphs[i], &assignment, depth)?;
            Ok(json!({
                "graph": i,
                "digests": digests.iter().map(|d| format!("{d:032x}")).collect::<Vec<_>>(),
            }))
        })
        .collect::<Result<_>>()?;
    let printed = emit(&config, json!({"depth": depth, "graphs": graphs}))?;
    if let Some(path) = out {
        write_json(&path, &printed)?;
    }
    Ok(())
}

#[derive(Args)]
pub struct GradCheckArgs {
    /// Largest acceptable relative error.
    #[arg(long)]
    tol: Option<f64>,
}

pub fn grad_check(args: GradCheckArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("grad-check", globals)?;
    let tol = r.get("tol", args.tol, 1e-4)?;
    let seed = r.get("model_seed", globals.model_seed, 0)?;
    let config = r.finish();

    let cases = grad_check_matrix(tol, seed)?;
    let worst = cases.iter().map(|c| c.report.max_rel_error).fold(0.0, f64::max);
    let failed = cases.iter().filter(|c| !c.report.passed).count();
    emit(
        &config,
        json!({"max_rel_error": worst, "cases": cases.len(), "failed": failed, "matrix": cases}),
    )?;
    if failed > 0 {
        return Err(Failure(format!("{failed} architecture(s) above tolerance {tol}")).into());
    }
    Ok(())
}
