//! Seeded random regular graphs and the TRIANGLE / LCC / MDS node datasets.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorial::greedy_mds;
use crate::error::{Error, Result};
use crate::features::{assign, Distribution, RandomAssignment};
use crate::graph::{triangle_label, validate, Graph};
use crate::io::{read_records, write_records, GraphRecord, RandomFeatureRecord};

/// Rejection rounds before [`random_regular`] gives up.
pub const MAX_ATTEMPTS: usize = 10_000;

/// SplitMix64 finalizer applied to `seed + (index + 1) * golden_gamma`.
///
/// Graph `i` of a dataset with seed `s` is generated from `mix(s, i)`, so any
/// single graph can be regenerated without the others.
pub fn mix(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream separator for random-feature seeds derived from a dataset seed.
const FEATURE_STREAM: u64 = 0x5EED_F00D_CAFE_D00D;

/// Simple connected `d`-regular graph on `n` nodes from the configuration
/// model, rejecting self-loops, multi-edges and disconnected results.
pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Graph> {
    if !(n * d).is_multiple_of(2) || d >= n {
        return Err(Error::InvalidParameter(format!(
            "no simple {d}-regular graph on {n} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..MAX_ATTEMPTS {
        stubs.shuffle(&mut rng);
        let mut adj = vec![Vec::with_capacity(d); n];
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u == v || adj[u].contains(&v) {
                continue 'attempt;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let g = Graph::from_adjacency(adj)?;
        if validate(&g).is_ok() {
            return Ok(g);
        }
    }
    Err(Error::GeneratorExhausted {
        n,
        d,
        attempts: MAX_ATTEMPTS,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Triangle,
    Lcc,
    Mds,
}

impl TaskKind {
    /// Output width of a node classifier for this task on `d`-regular graphs.
    pub fn num_outputs(self, degree: usize) -> usize {
        match self {
            TaskKind::Triangle | TaskKind::Mds => 1,
            TaskKind::Lcc => degree * degree.saturating_sub(1) / 2 + 1,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Triangle => "triangle",
            TaskKind::Lcc => "lcc",
            TaskKind::Mds => "mds",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "triangle" | "tri" => Ok(TaskKind::Triangle),
            "lcc" => Ok(TaskKind::Lcc),
            "mds" => Ok(TaskKind::Mds),
            other => Err(Error::InvalidParameter(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Test,
}

/// Labeled graphs for one node task.
///
/// Labels are class indices: 0/1 for TRIANGLE and MDS, the number of edges
/// among a node's neighbors for LCC (on 3-regular graphs, LCC = class / 3).
/// MDS datasets carry the random assignment their labels were computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub kind: TaskKind,
    pub graphs: Vec<Graph>,
    pub labels: Vec<Vec<u32>>,
    pub assignments: Option<Vec<RandomAssignment>>,
    pub split: Split,
    pub seed: u64,
}

/// Degree of the regular graphs every dataset is built from.
pub const DATASET_DEGREE: usize = 3;

pub fn make_dataset(
    kind: TaskKind,
    n_graphs: usize,
    n_nodes: usize,
    seed: u64,
    mds_dist: Option<&Distribution>,
) -> Result<Dataset> {
    if kind == TaskKind::Mds && mds_dist.is_none() {
        return Err(Error::InvalidParameter(
            "MDS labels need a random-feature distribution".into(),
        ));
    }
    let items: Vec<(Graph, Vec<u32>, Option<RandomAssignment>)> = (0..n_graphs)
        .into_par_iter()
        .map(|i| {
            let g = random_regular(n_nodes, DATASET_DEGREE, mix(seed, i as u64))?;
            let (labels, r) = match kind {
                TaskKind::Triangle => ((0..g.n()).map(|v| triangle_label(&g, v) as u32).collect(), None),
                TaskKind::Lcc => ((0..g.n()).map(|v| lcc_class(&g, v)).collect(), None),
                TaskKind::Mds => {
                    let dist = mds_dist.expect("checked above");
                    let r = assign(&g, dist, mix(seed ^ FEATURE_STREAM, i as u64));
                    let sol = greedy_mds(&g, &r);
                    let mut labels = vec![0; g.n()];
                    for &v in &sol.members {
                        labels[v] = 1;
                    }
                    (labels, Some(r))
                }
            };
            Ok((g, labels, r))
        })
        .collect::<Result<_>>()?;

    let mut graphs = Vec::with_capacity(n_graphs);
    let mut labels = Vec::with_capacity(n_graphs);
    let mut assignments = Vec::new();
    for (g, l, r) in items {
        graphs.push(g);
        labels.push(l);
        assignments.extend(r);
    }
    Ok(Dataset {
        kind,
        graphs,
        labels,
        assignments: (kind == TaskKind::Mds).then_some(assignments),
        split: Split::Train,
        seed,
    })
}

/// Number of edges among the neighbors of `v`; the LCC numerator.
pub fn lcc_class(g: &Graph, v: usize) -> u32 {
    let lcc = crate::graph::local_clustering_coefficient(g, v);
    let d = g.degree(v) as u64;
    if d < 2 {
        return 0;
    }
    (lcc * (d * (d - 1) / 2)).to_integer() as u32
}

impl Dataset {
    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_nodes(&self) -> usize {
        self.graphs.iter().map(Graph::n).sum()
    }

    pub fn to_records(&self) -> Vec<GraphRecord> {
        self.graphs
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut rec = GraphRecord::from_graph(g);
                rec.labels = Some(self.labels[i].clone());
                rec.random_features = self.assignments.as_ref().map(|a| RandomFeatureRecord {
                    support_size: a[i].support_size(),
                    codes: a[i].codes().to_vec(),
                    seed: Some(a[i].seed()),
                });
                rec
            })
            .collect()
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        write_records(out, &self.to_records())
    }

    /// Reads a dataset written by [`Dataset::save`]. The kind and seed are not
    /// part of the line format and must be supplied.
    pub fn load<R: BufRead>(input: R, kind: TaskKind, split: Split, seed: u64) -> Result<Self> {
        let records = read_records(input)?;
        let mut graphs = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        let mut assignments = Vec::new();
        for (i, rec) in records.iter().enumerate() {
            let g = rec.to_graph()?;
            let l = rec
                .labels
                .clone()
                .ok_or_else(|| Error::Malformed(format!("graph {i} has no labels")))?;
            if l.len() != g.n() {
                return Err(Error::DimensionMismatch {
                    expected: g.n(),
                    got: l.len(),
                });
            }
            assignments.extend(rec.assignment()?);
            graphs.push(g);
            labels.push(l);
        }
        let assignments = if assignments.len() == graphs.len() && !graphs.is_empty() {
            Some(assignments)
        } else {
            None
        };
        if kind == TaskKind::Mds && assignments.is_none() {
            return Err(Error::Malformed("MDS dataset without random features".into()));
        }
        Ok(Self {
            kind,
            graphs,
            labels,
            assignments,
            split,
            seed,
        })
    }
}
