//! One-graph-per-line JSON format.
//!
//! ```text
//! {"n":4,"edges":[[0,1],[0,2],[1,2],[2,3]],"labels":[1,1,1,0]}
//! ```
//!
//! `features` (n rows of equal width), `labels` and `random_features`
//! (support size plus one code per node) are optional.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::RandomAssignment;
use crate::graph::{Features, Graph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomFeatureRecord {
    pub support_size: usize,
    pub codes: Vec<u32>,
    /// Seed the codes were drawn with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_features: Option<RandomFeatureRecord>,
}

impl GraphRecord {
    pub fn from_graph(g: &Graph) -> Self {
        let features = g.features().map(|f| (0..f.rows()).map(|v| f.row(v).to_vec()).collect());
        Self {
            n: g.n(),
            edges: g.edges().map(|(u, v)| [u, v]).collect(),
            features,
            labels: None,
            random_features: None,
        }
    }

    pub fn to_graph(&self) -> Result<Graph> {
        if let Some(&[u, v]) = self.edges.iter().find(|[u, v]| u >= v) {
            return Err(Error::Malformed(format!("edge [{u}, {v}] must satisfy u < v")));
        }
        let edges: Vec<_> = self.edges.iter().map(|&[u, v]| (u, v)).collect();
        let g = Graph::from_edges(self.n, &edges)?;
        match &self.features {
            Some(rows) => g.with_features(Features::from_rows(rows)?),
            None => Ok(g),
        }
    }

    pub fn assignment(&self) -> Result<Option<RandomAssignment>> {
        self.random_features
            .as_ref()
            .map(|rf| {
                if rf.codes.len() != self.n {
                    return Err(Error::DimensionMismatch {
                        expected: self.n,
                        got: rf.codes.len(),
                    });
                }
                let r = RandomAssignment::from_codes(rf.codes.clone(), rf.support_size)?;
                Ok(match rf.seed {
                    Some(seed) => r.with_seed(seed),
                    None => r,
                })
            })
            .transpose()
    }
}

pub fn write_records<W: Write>(mut out: W, records: &[GraphRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Blank lines are skipped.
pub fn read_records<R: BufRead>(input: R) -> Result<Vec<GraphRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord =
            serde_json::from_str(&line).map_err(|e| Error::Malformed(format!("line {}: {e}", i + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_graphs<R: BufRead>(input: R) -> Result<Vec<Graph>> {
    read_records(input)?.iter().map(GraphRecord::to_graph).collect()
}

/// Hex SHA-256 of the JSON form of `value` with object keys sorted, so the
/// digest does not depend on field or key order.
pub fn config_digest<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // serde_json's default map is ordered by key.
    let canonical = serde_json::to_value(value)?.to_string();
    let bytes = Sha256::digest(canonical.as_bytes());
    Ok(bytes.iter().map(|b| format!("{b:02x}")).collect())
}
