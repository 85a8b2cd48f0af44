use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rgin_core::eval::{evaluate, run_experiment_with, ExperimentSpec, ModelKind, TaskPreset};
use rgin_core::features::uniform_support;
use rgin_core::gen::{make_dataset, mix};
use rgin_core::neural::{task_arch, train_with_progress, Aggregation, Optimizer, TrainConfig};
use rgin_core::{Dataset, Split, TaskKind};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{emit, resolver, seeds, sidecar, write_json, DEFAULT_SUPPORT};
use crate::{Failure, Globals, Usage};

#[derive(Args)]
pub struct GenDataArgs {
    /// triangle, lcc or mds.
    #[arg(long)]
    kind: Option<TaskKind>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSONL file; the config goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn nonempty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Usage(format!("--{flag} is required (flag or config key)")).into())
}

pub fn gen_data(args: GenDataArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("gen-data", globals)?;
    let kind = required(r.optional("kind", args.kind)?, "kind")?;
    let graphs = r.get("graphs", args.graphs, 1000)?;
    let nodes = r.get("nodes", args.nodes, 20)?;
    let seed = r.get("seed", args.seed, 0)?;
    let support = if kind == TaskKind::Mds {
        Some(r.get("support_size", globals.support_size, DEFAULT_SUPPORT)?)
    } else {
        None
    };
    let out = required(r.untracked("out", args.out)?, "out")?;
    let config = r.finish();

    let dist = support.map(uniform_support).transpose()?;
    let dataset = make_dataset(kind, graphs, nodes, seed, dist.as_ref())?;
    let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
    dataset.save(&mut w)?;
    w.flush()?;

    let positives: usize = dataset.labels.iter().flatten().filter(|&&l| l > 0).count();
    let summary = emit(
        &config,
        json!({
            "out": out,
            "graphs": dataset.len(),
            "nodes": dataset.num_nodes(),
            "nonzero_labels": positives,
        }),
    )?;
    write_json(&sidecar(&out), &summary)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agg {
    Sum,
    Mean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opt {
    Adam,
    Sgd,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    kind: Option<TaskKind>,
    /// Append one random value per node to the input.
    #[arg(long, value_enum)]
    random_features: Option<OnOff>,
    #[arg(long, value_enum)]
    agg: Option<Agg>,
    /// Training set written by gen-data; generated from the task preset
    /// when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Held-out set to report ROC-AUC on.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Epochs between learning-rate decays; 0 disables decay.
    #[arg(long)]
    lr_decay_period: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<Opt>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Checkpoint path; the config and loss curve go to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_dataset(path: &PathBuf, kind: TaskKind, split: Split) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Dataset::load(BufReader::new(file), kind, split, 0)?)
}

pub fn train(args: TrainArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("train", globals)?;
    let kind = required(r.optional("kind", args.kind)?, "kind")?;
    let preset = TaskPreset::for_task(kind);
    let s = seeds(&mut r, globals, DEFAULT_SUPPORT)?;
    let random = r.get("random_features", args.random_features, OnOff::On)? == OnOff::On;
    let aggregation = match r.get("agg", args.agg, Agg::Sum)? {
        Agg::Sum => Aggregation::Sum,
        Agg::Mean => Aggregation::Mean,
    };
    let layers = r.get("layers", args.layers, preset.layers)?;
    let hidden = r.get("hidden", args.hidden, preset.hidden)?;
    let base = preset.train.clone();
    let cfg = TrainConfig {
        optimizer: match r.get("optimizer", args.optimizer, Opt::Adam)? {
            Opt::Adam => Optimizer::Adam,
            Opt::Sgd => Optimizer::Sgd,
        },
        lr: r.get("lr", args.lr, base.lr)?,
        lr_decay: r.get("lr_decay", args.lr_decay, base.lr_decay)?,
        lr_decay_period: r.get("lr_decay_period", args.lr_decay_period, base.lr_decay_period)?,
        batch_size: r.get("batch_size", args.batch_size, base.batch_size)?,
        epochs: r.get("epochs", args.epochs, base.epochs)?,
        dropout: r.get("dropout", args.dropout, base.dropout)?,
        seed: s.model,
        feature_seed: s.feature,
        support_size: s.support,
    };
    cfg.validate()?;
    let train_set = match r.optional("data", args.data)? {
        Some(path) => load_dataset(&path, kind, Split::Train)?,
        None => {
            let graphs = r.get("graphs", args.graphs, preset.train_graphs)?;
            let nodes = r.get("nodes", args.nodes, preset.train_nodes)?;
            let data_seed = r.get("data_seed", args.data_seed, 0)?;
            let dist = uniform_support(s.support)?;
            make_dataset(kind, graphs, nodes, data_seed, (kind == TaskKind::Mds).then_some(&dist))?
        }
    };
    let test = r.optional("test", args.test)?;
    let out = required(r.untracked("out", args.out)?, "out")?;
    let config = r.finish();

    let arch = task_arch(kind, layers, hidden, aggregation, random);
    let epochs = cfg.epochs;
    let outcome = train_with_progress(&train_set, &cfg, arch, |epoch, loss| {
        if epoch % 10 == 0 || epoch + 1 == epochs {
            eprintln!("epoch {epoch:>4}  loss {loss:.6}");
        }
    })?;
    let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
    outcome.model.save(&mut w)?;
    w.flush()?;

    let auc = match &test {
        Some(path) => {
            let test_set = load_dataset(path, kind, Split::Test)?;
            Some(evaluate(&outcome.model, &test_set, mix(s.feature, 1), s.support)?)
        }
        None => None,
    };
    let summary = emit(
        &config,
        json!({
            "out": out,
            "parameters": outcome.model.num_parameters(),
            "epochs": outcome.losses.len(),
            "final_loss": outcome.losses.last(),
            "test_auc": auc,
        }),
    )?;
    let mut meta = summary;
    meta["losses"] = json!(outcome.losses);
    write_json(&sidecar(&out), &meta)
}

#[derive(Args)]
pub struct RunTableArgs {
    /// Comma-separated subset of gin,rgin,gcn,rgcn.
    #[arg(long, value_delimiter = ',')]
    models: Vec<ModelKind>,
    /// Comma-separated subset of tri,lcc,mds.
    #[arg(long, value_delimiter = ',')]
    tasks: Vec<TaskKind>,
    /// Number of model seeds, counted up from --model-seed.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    data_seed: Option<u64>,
    /// Overrides the epoch count of every task preset.
    #[arg(long)]
    epochs: Option<usize>,
    /// Overrides the training-set size of every task preset.
    #[arg(long)]
    train_graphs: Option<usize>,
    /// Overrides the test-set size of every task preset.
    #[arg(long)]
    test_graphs: Option<usize>,
    /// Directory for report.json and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run_table(args: RunTableArgs, globals: &Globals) -> Result<()> {
    let mut r = resolver("run-table2", globals)?;
    let models = r.get("models", nonempty(args.models), ModelKind::ALL.to_vec())?;
    let tasks = r.get(
        "tasks",
        nonempty(args.tasks),
        vec![TaskKind::Triangle, TaskKind::Lcc, TaskKind::Mds],
    )?;
    let s = seeds(&mut r, globals, DEFAULT_SUPPORT)?;
    let count = r.get("seeds", args.seeds, 3)?;
    let data_seed = r.get("data_seed", args.data_seed, 0)?;
    let epochs = r.optional("epochs", args.epochs)?;
    let train_graphs = r.optional("train_graphs", args.train_graphs)?;
    let test_graphs = r.optional("test_graphs", args.test_graphs)?;
    let out = r.untracked("out", args.out)?.unwrap_or_else(|| PathBuf::from("report"));

    let mut spec = ExperimentSpec::new(tasks, models, (0..count as u64).map(|i| s.model + i).collect());
    spec.data_seed = data_seed;
    spec.feature_seed = s.feature;
    spec.support_size = s.support;
    for p in spec.presets.values_mut() {
        p.train.epochs = epochs.unwrap_or(p.train.epochs);
        p.train_graphs = train_graphs.unwrap_or(p.train_graphs);
        p.test_graphs = test_graphs.unwrap_or(p.test_graphs);
    }
    r.record("presets", &spec.presets)?;
    let config = r.finish();

    let mut report = run_experiment_with(&spec, |run| {
        eprintln!(
            "{:<8} {:<5} seed {:<3} AUC(N) {:.3}  AUC(X) {:.3}  {:.0}s",
            run.task.to_string(),
            run.model.to_string(),
            run.seed,
            run.auc_n,
            run.auc_x,
            run.wall_seconds
        );
    })?;
    report.config_digest = config.digest();
    let (json_path, csv_path) = report.write_to(&out)?;

    let table: Vec<_> = report
        .summary
        .iter()
        .map(|row| json!({"task": row.task, "model": row.model, "auc_n": row.mean_n, "auc_x": row.mean_x, "runs": row.runs}))
        .collect();
    emit(
        &config,
        json!({"report": json_path, "csv": csv_path, "wall_seconds": report.wall_seconds, "mean_auc": table}),
    )?;

    // Without random values every node of a regular graph looks the same.
    let collapsed: Vec<String> = report
        .runs
        .iter()
        .filter(|run| !run.model.random_features() && (run.auc_n != 0.5 || run.auc_x != 0.5))
        .map(|run| format!("{} {} seed {}", run.task, run.model, run.seed))
        .collect();
    if !collapsed.is_empty() {
        return Err(Failure(format!(
            "models without random values scored away from 0.5: {}",
            collapsed.join(", ")
        ))
        .into());
    }
    Ok(())
}
