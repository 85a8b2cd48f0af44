pub mod data;
pub mod solve;
pub mod theory;

use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rgin_core::features::{assign, uniform_support};
use rgin_core::gen::{mix, random_regular};
use rgin_core::io::{read_records, GraphRecord};
use rgin_core::{Graph, RandomAssignment};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Resolver, RunConfig};
use crate::{Globals, Usage};

pub const DEFAULT_SUPPORT: usize = 100;

pub fn init_threads(globals: &Globals) -> Result<()> {
    let resolver = Resolver::new("", globals.config.as_deref())?;
    if let Some(n) = resolver.untracked("threads", globals.threads)? {
        if n == 0 {
            return Err(Usage("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

/// The shared seeds and support size, resolved and recorded.
pub struct Seeds {
    pub model: u64,
    pub feature: u64,
    pub support: usize,
}

pub fn resolver(command: &str, globals: &Globals) -> Result<Resolver> {
    Resolver::new(command, globals.config.as_deref())
}

pub fn seeds(r: &mut Resolver, globals: &Globals, support_default: usize) -> Result<Seeds> {
    Ok(Seeds {
        model: r.get("model_seed", globals.model_seed, 0)?,
        feature: r.get("feature_seed", globals.feature_seed, 1)?,
        support: r.get("support_size", globals.support_size, support_default)?,
    })
}

/// Prints `body` with the config and its digest as one JSON object.
pub fn emit(config: &RunConfig, body: Value) -> Result<Value> {
    let mut out = json!({
        "command": config.command,
        "config_digest": config.digest(),
        "config": config.params,
    });
    if let (Value::Object(o), Value::Object(b)) = (&mut out, body) {
        o.extend(b);
    }
    print_out(&(serde_json::to_string_pretty(&out)? + "\n"))?;
    Ok(out)
}

/// Writes to stdout; a closed pipe (`rgin ... | head`) is not an error.
pub fn print_out(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// `<path>.meta.json`, holding the config and digest of the run that wrote
/// `path`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn read_corpus(path: &Path) -> Result<Vec<GraphRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_records(BufReader::new(file))?)
}

/// Graphs from a file, or `graphs` random 3-regular graphs on `nodes`
/// nodes. Stored random values are returned when every record has them.
pub struct Corpus {
    pub graphs: Vec<Graph>,
    pub stored: Option<Vec<RandomAssignment>>,
}

impl Corpus {
    pub fn load(path: &Path) -> Result<Self> {
        let records = read_corpus(path)?;
        let graphs = records
            .iter()
            .map(GraphRecord::to_graph)
            .collect::<rgin_core::Result<Vec<_>>>()?;
        let stored: Vec<RandomAssignment> = records
            .iter()
            .map(GraphRecord::assignment)
            .collect::<rgin_core::Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let stored = (stored.len() == graphs.len() && !graphs.is_empty()).then_some(stored);
        Ok(Self { graphs, stored })
    }

    pub fn regular(graphs: usize, nodes: usize, seed: u64) -> Result<Self> {
        let graphs = (0..graphs)
            .map(|i| random_regular(nodes, 3, mix(seed, i as u64)))
            .collect::<rgin_core::Result<_>>()?;
        Ok(Self { graphs, stored: None })
    }

    /// Stored values for graph `i`, or a fresh draw from `feature_seed`.
    pub fn assignment(&self, i: usize, support: usize, feature_seed: u64) -> Result<RandomAssignment> {
        if let Some(stored) = &self.stored {
            return Ok(stored[i].clone());
        }
        let dist = uniform_support(support)?;
        Ok(assign(&self.graphs[i], &dist, mix(feature_seed, i as u64)))
    }
}

/// Records either the input path or the generated corpus parameters.
pub struct CorpusArgs {
    pub input: Option<PathBuf>,
    pub graphs: Option<usize>,
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
}

pub fn corpus(r: &mut Resolver, args: CorpusArgs, graphs_default: usize) -> Result<Corpus> {
    match r.optional("in", args.input)? {
        Some(path) => Corpus::load(&path),
        None => {
            let graphs = r.get("graphs", args.graphs, graphs_default)?;
            let nodes = r.get("nodes", args.nodes, 20)?;
            let seed = r.get("seed", args.seed, 0)?;
            Corpus::regular(graphs, nodes, seed)
        }
    }
}
