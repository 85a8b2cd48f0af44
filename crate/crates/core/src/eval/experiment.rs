use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::uniform_support;
use crate::gen::{make_dataset, mix, Dataset, Split, TaskKind};
use crate::io::config_digest;
use crate::neural::{predict, task_arch, train, Aggregation, GinModel, Matrix, TrainConfig};

use super::metrics::{macro_auc, roc_auc};

/// The four table rows: GIN and GCN (mean aggregation), each with and
/// without a random node value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gin,
    Rgin,
    Gcn,
    Rgcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Gin, ModelKind::Rgin, ModelKind::Gcn, ModelKind::Rgcn];

    pub fn aggregation(self) -> Aggregation {
        match self {
            ModelKind::Gin | ModelKind::Rgin => Aggregation::Sum,
            ModelKind::Gcn | ModelKind::Rgcn => Aggregation::Mean,
        }
    }

    pub fn random_features(self) -> bool {
        matches!(self, ModelKind::Rgin | ModelKind::Rgcn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gin => "gin",
            ModelKind::Rgin => "rgin",
            ModelKind::Gcn => "gcn",
            ModelKind::Rgcn => "rgcn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gin" => Ok(ModelKind::Gin),
            "rgin" => Ok(ModelKind::Rgin),
            "gcn" => Ok(ModelKind::Gcn),
            "rgcn" => Ok(ModelKind::Rgcn),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

/// Architecture, data sizes and optimizer settings for one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskPreset {
    pub layers: usize,
    pub hidden: usize,
    pub train_graphs: usize,
    pub test_graphs: usize,
    pub train_nodes: usize,
    pub extrapolation_nodes: usize,
    pub train: TrainConfig,
}

impl TaskPreset {
    /// Defaults sized to finish within minutes on one core. MDS trains a
    /// shallower net on more graphs for fewer epochs than the other tasks.
    pub fn for_task(kind: TaskKind) -> Self {
        let base = TaskPreset {
            layers: 5,
            hidden: 64,
            train_graphs: 1000,
            test_graphs: 1000,
            train_nodes: 20,
            extrapolation_nodes: 100,
            train: TrainConfig::default(),
        };
        match kind {
            TaskKind::Triangle => TaskPreset {
                train: TrainConfig {
                    epochs: 200,
                    ..base.train.clone()
                },
                ..base
            },
            TaskKind::Lcc => TaskPreset {
                train: TrainConfig {
                    epochs: 150,
                    ..base.train.clone()
                },
                ..base
            },
            TaskKind::Mds => TaskPreset {
                train_graphs: 4000,
                train: TrainConfig {
                    epochs: 60,
                    lr: 0.005,
                    lr_decay_period: 20,
                    ..base.train.clone()
                },
                ..base
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub tasks: Vec<TaskKind>,
    pub models: Vec<ModelKind>,
    /// Model seeds; each one is a separate run per task and model.
    pub seeds: Vec<u64>,
    pub data_seed: u64,
    pub feature_seed: u64,
    pub support_size: usize,
    pub presets: BTreeMap<TaskKind, TaskPreset>,
}

impl ExperimentSpec {
    pub fn new(tasks: Vec<TaskKind>, models: Vec<ModelKind>, seeds: Vec<u64>) -> Self {
        let presets = tasks.iter().map(|&k| (k, TaskPreset::for_task(k))).collect();
        Self {
            tasks,
            models,
            seeds,
            data_seed: 0,
            feature_seed: 1,
            support_size: 100,
            presets,
        }
    }

    pub fn preset(&self, kind: TaskKind) -> TaskPreset {
        self.presets
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| TaskPreset::for_task(kind))
    }

    pub fn digest(&self) -> Result<String> {
        config_digest(self)
    }

    fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() || self.models.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "an experiment needs at least one task, model and seed".into(),
            ));
        }
        for &k in &self.tasks {
            let p = self.preset(k);
            if p.train_graphs == 0 || p.test_graphs == 0 || p.layers == 0 || p.hidden == 0 {
                return Err(Error::InvalidParameter(format!("empty preset for {k}")));
            }
            TrainConfig {
                support_size: self.support_size,
                ..p.train
            }
            .validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetId {
    pub task: TaskKind,
    pub split: Split,
    pub graphs: usize,
    pub nodes: usize,
    pub seed: u64,
}

/// Training set plus the two test sets: same size as training graphs (N)
/// and larger graphs (X).
#[derive(Clone, Debug)]
pub struct TaskData {
    pub train: Dataset,
    pub test_n: Dataset,
    pub test_x: Dataset,
}

impl TaskData {
    pub fn generate(kind: TaskKind, preset: &TaskPreset, data_seed: u64, support_size: usize) -> Result<Self> {
        let dist = uniform_support(support_size)?;
        let md = (kind == TaskKind::Mds).then_some(&dist);
        let make = |graphs, nodes, stream| make_dataset(kind, graphs, nodes, mix(data_seed, stream), md);
        Ok(Self {
            train: make(preset.train_graphs, preset.train_nodes, 0)?,
            test_n: make(preset.test_graphs, preset.train_nodes, 1)?.with_split(Split::Test),
            test_x: make(preset.test_graphs, preset.extrapolation_nodes, 2)?.with_split(Split::Test),
        })
    }

    pub fn ids(&self) -> Vec<DatasetId> {
        [&self.train, &self.test_n, &self.test_x]
            .into_iter()
            .map(|d| DatasetId {
                task: d.kind,
                split: d.split,
                graphs: d.len(),
                nodes: d.graphs.first().map_or(0, |g| g.n()),
                seed: d.seed,
            })
            .collect()
    }
}

/// ROC-AUC over all nodes of all graphs; macro AUC for LCC.
pub fn node_auc(kind: TaskKind, outputs: &[Matrix], labels: &[Vec<u32>]) -> Result<f64> {
    if outputs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: outputs.len(),
        });
    }
    let mut flat_labels = Vec::new();
    let mut rows = Vec::new();
    for (out, l) in outputs.iter().zip(labels) {
        if out.rows() != l.len() {
            return Err(Error::DimensionMismatch {
                expected: l.len(),
                got: out.rows(),
            });
        }
        flat_labels.extend_from_slice(l);
        rows.extend((0..out.rows()).map(|v| out.row(v).to_vec()));
    }
    match kind {
        TaskKind::Lcc => Ok(macro_auc(&flat_labels, &rows)?.value),
        TaskKind::Triangle | TaskKind::Mds => {
            let positive: Vec<bool> = flat_labels.iter().map(|&l| l == 1).collect();
            let scores: Vec<f64> = rows.iter().map(|r| r[0]).collect();
            roc_auc(&positive, &scores)
        }
    }
}

pub fn evaluate(model: &GinModel, dataset: &Dataset, feature_seed: u64, support_size: usize) -> Result<f64> {
    let outputs = predict(model, dataset, feature_seed, support_size)?;
    node_auc(dataset.kind, &outputs, &dataset.labels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: TaskKind,
    pub model: ModelKind,
    pub seed: u64,
    pub auc_n: f64,
    pub auc_x: f64,
    pub epochs: usize,
    pub final_loss: f64,
    pub wall_seconds: f64,
    /// Mean training loss per epoch.
    pub losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: TaskKind,
    pub model: ModelKind,
    pub runs: usize,
    pub mean_n: f64,
    pub mean_x: f64,
    pub min_n: f64,
    pub min_x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_digest: String,
    pub spec: ExperimentSpec,
    pub datasets: Vec<DatasetId>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub wall_seconds: f64,
}

impl MetricsReport {
    pub fn row(&self, task: TaskKind, model: ModelKind) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.task == task && r.model == model)
    }

    pub const CSV_HEADER: &'static str = "task,model,seed,auc_n,auc_x,epochs,final_loss,wall_seconds,config_digest";

    /// One line per task, model and seed.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.runs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.3},{}\n",
                r.task, r.model, r.seed, r.auc_n, r.auc_x, r.epochs, r.final_loss, r.wall_seconds, self.config_digest
            ));
        }
        out
    }

    /// Writes `report.json` and `report.csv` into `dir`, creating it.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let json = dir.join("report.json");
        let csv = dir.join("report.csv");
        fs::write(&json, serde_json::to_string_pretty(self)? + "\n")?;
        fs::write(&csv, self.to_csv())?;
        Ok((json, csv))
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<MetricsReport> {
    run_experiment_with(spec, |_| {})
}

/// Runs every (task, model, seed) combination, calling `on_run` as each
/// finishes. Datasets are generated once per task and shared by all runs.
pub fn run_experiment_with<F>(spec: &ExperimentSpec, on_run: F) -> Result<MetricsReport>
where
    F: Fn(&RunRecord) + Sync,
{
    spec.validate()?;
    let start = Instant::now();
    let mut data = BTreeMap::new();
    for &kind in &spec.tasks {
        if let std::collections::btree_map::Entry::Vacant(e) = data.entry(kind) {
            e.insert(TaskData::generate(
                kind,
                &spec.preset(kind),
                spec.data_seed,
                spec.support_size,
            )?);
        }
    }
    let jobs: Vec<(TaskKind, ModelKind, u64)> = spec
        .tasks
        .iter()
        .flat_map(|&t| {
            spec.models
                .iter()
                .flat_map(move |&m| spec.seeds.iter().map(move |&s| (t, m, s)))
        })
        .collect();
    let runs: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(task, model, seed)| {
            let record = run_one(spec, &data[&task], task, model, seed)?;
            on_run(&record);
            Ok(record)
        })
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    for &task in &spec.tasks {
        for &model in &spec.models {
            let rows: Vec<&RunRecord> = runs.iter().filter(|r| r.task == task && r.model == model).collect();
            if rows.is_empty() || summary.iter().any(|s: &SummaryRow| s.task == task && s.model == model) {
                continue;
            }
            let k = rows.len() as f64;
            summary.push(SummaryRow {
                task,
                model,
                runs: rows.len(),
                mean_n: rows.iter().map(|r| r.auc_n).sum::<f64>() / k,
                mean_x: rows.iter().map(|r| r.auc_x).sum::<f64>() / k,
                min_n: rows.iter().map(|r| r.auc_n).fold(f64::INFINITY, f64::min),
                min_x: rows.iter().map(|r| r.auc_x).fold(f64::INFINITY, f64::min),
            });
        }
    }
    Ok(MetricsReport {
        config_digest: spec.digest()?,
        spec: spec.clone(),
        datasets: data.values().flat_map(TaskData::ids).collect(),
        runs,
        summary,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_one(spec: &ExperimentSpec, data: &TaskData, task: TaskKind, model: ModelKind, seed: u64) -> Result<RunRecord> {
    let start = Instant::now();
    let preset = spec.preset(task);
    let cfg = TrainConfig {
        seed,
        feature_seed: mix(spec.feature_seed, 2 * seed),
        support_size: spec.support_size,
        ..preset.train
    };
    let arch = task_arch(
        task,
        preset.layers,
        preset.hidden,
        model.aggregation(),
        model.random_features(),
    );
    let outcome = train(&data.train, &cfg, arch)?;
    let eval_seed = mix(spec.feature_seed, 2 * seed + 1);
    Ok(RunRecord {
        task,
        model,
        seed,
        auc_n: evaluate(&outcome.model, &data.test_n, eval_seed, spec.support_size)?,
        auc_x: evaluate(&outcome.model, &data.test_x, eval_seed, spec.support_size)?,
        epochs: outcome.losses.len(),
        final_loss: outcome.losses.last().copied().unwrap_or(f64::NAN),
        wall_seconds: start.elapsed().as_secs_f64(),
        losses: outcome.losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(tasks: Vec<TaskKind>, models: Vec<ModelKind>) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(tasks, models, vec![0, 1]);
        for p in spec.presets.values_mut() {
            p.layers = 2;
            p.hidden = 8;
            p.train_graphs = 8;
            p.test_graphs = 4;
            p.extrapolation_nodes = 30;
            p.train.epochs = 3;
        }
        spec
    }

    #[test]
    fn plain_models_score_exactly_half() {
        let spec = tiny(
            vec![TaskKind::Triangle, TaskKind::Lcc, TaskKind::Mds],
            vec![ModelKind::Gin, ModelKind::Gcn],
        );
        let report = run_experiment(&spec).unwrap();
        assert_eq!(report.runs.len(), 12);
        for r in &report.runs {
            assert_eq!((r.auc_n, r.auc_x), (0.5, 0.5), "{r:?}");
        }
        assert_eq!(report.summary.len(), 6);
        assert_eq!(report.datasets.len(), 9);
    }

    #[test]
    fn report_is_well_formed() {
        let spec = tiny(vec![TaskKind::Triangle], vec![ModelKind::Rgin]);
        let report = run_experiment(&spec).unwrap();
        for r in &report.runs {
            assert!((0.0..=1.0).contains(&r.auc_n) && (0.0..=1.0).contains(&r.auc_x));
            assert_eq!(r.epochs, 3);
        }
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("triangle,rgin,0,"));
        assert!(csv.contains(&report.config_digest));

        let dir = tempfile::tempdir().unwrap();
        let (json, _) = report.write_to(dir.path()).unwrap();
        let back: MetricsReport = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn digest_tracks_spec() {
        let a = tiny(vec![TaskKind::Lcc], vec![ModelKind::Rgin]);
        let mut b = a.clone();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        b.seeds.push(9);
        assert_ne!(a.digest().unwrap(), b.digest().unwrap());
    }

    #[test]
    fn rejects_empty_spec() {
        let spec = ExperimentSpec::new(vec![], vec![ModelKind::Gin], vec![0]);
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn names_round_trip() {
        for m in ModelKind::ALL {
            assert_eq!(m.to_string().parse::<ModelKind>().unwrap(), m);
        }
        assert!("mlp".parse::<ModelKind>().is_err());
    }
}
