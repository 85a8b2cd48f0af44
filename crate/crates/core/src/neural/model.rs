use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{assign, Distribution, RandomAssignment};
use crate::graph::Graph;

use super::tape::{Adjacency, Tape, Var};
use super::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            _ => Err(Error::InvalidParameter(format!("unknown aggregation {s:?}"))),
        }
    }
}

/// Shape of a network. `layers` counts MLPs: the input MLP plus
/// `layers - 1` message-passing layers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arch {
    pub layers: usize,
    pub hidden: usize,
    pub input_dim: usize,
    pub out_dim: usize,
    pub aggregation: Aggregation,
    /// Whether a random value column is appended to the input.
    pub random_features: bool,
    /// Batch normalization inside each MLP and after each hidden layer.
    #[serde(default = "yes")]
    pub batch_norm: bool,
}

fn yes() -> bool {
    true
}

impl Arch {
    /// Width of the matrix fed to the first layer.
    pub fn full_input_dim(&self) -> usize {
        self.input_dim + usize::from(self.random_features)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// in × out
    pub weight: Matrix,
    /// 1 × out
    pub bias: Matrix,
}

impl Linear {
    fn init<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let weight = Matrix::from_fn(fan_in, fan_out, |_, _| rng.gen_range(-bound..bound));
        let bias = Matrix::from_fn(1, fan_out, |_, _| rng.gen_range(-bound..bound));
        Self { weight, bias }
    }
}

/// Learned scale and shift of a batch normalization, with the running
/// statistics used at inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl Norm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Matrix::from_fn(1, width, |_, _| 1.0),
            beta: Matrix::zeros(1, width),
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
        }
    }
}

/// One MLP: Linear, [norm], ReLU, Linear, then [norm] and ReLU on all but
/// the last layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub first: Linear,
    pub inner_norm: Option<Norm>,
    pub second: Linear,
    pub outer_norm: Option<Norm>,
}

/// Weight of the running statistics update.
pub const NORM_MOMENTUM: f64 = 0.1;

/// The self weight of layer l is 1 + eps[l]; eps is fixed and never trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GinModel {
    pub arch: Arch,
    pub layers: Vec<Layer>,
    pub eps: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

/// Inference uses running statistics; training normalizes with batch
/// statistics and may apply dropout.
#[derive(Clone, Copy, Debug)]
pub enum Pass {
    Eval,
    Train { dropout: Option<Dropout> },
}

/// Result of recording the network on a tape.
pub struct Recorded {
    pub logits: Var,
    /// Handles in [`GinModel::params`] order.
    pub params: Vec<Var>,
    /// Batch (mean, biased variance) per norm, training passes only.
    pub stats: Vec<(Vec<f64>, Vec<f64>)>,
}

impl GinModel {
    pub fn new(arch: Arch, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::with_rng(arch, &mut rng)
    }

    pub fn with_rng<R: Rng>(arch: Arch, rng: &mut R) -> Result<Self> {
        if arch.layers == 0 || arch.hidden == 0 || arch.out_dim == 0 {
            return Err(Error::InvalidParameter(format!("degenerate architecture {arch:?}")));
        }
        let norm = |last: bool| (arch.batch_norm && !last).then(|| Norm::new(arch.hidden));
        let layers = (0..arch.layers)
            .map(|l| {
                let last = l + 1 == arch.layers;
                let fan_in = if l == 0 { arch.full_input_dim() } else { arch.hidden };
                let fan_out = if last { arch.out_dim } else { arch.hidden };
                Layer {
                    first: Linear::init(fan_in, arch.hidden, rng),
                    inner_norm: norm(false),
                    second: Linear::init(arch.hidden, fan_out, rng),
                    outer_norm: norm(last),
                }
            })
            .collect();
        Ok(Self {
            arch,
            layers,
            eps: vec![0.0; arch.layers],
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.params().map(|m| m.data().len()).sum()
    }

    fn norms(&self) -> impl Iterator<Item = &Norm> {
        self.layers
            .iter()
            .flat_map(|l| l.inner_norm.iter().chain(l.outer_norm.iter()))
    }

    /// Trainable matrices in a fixed order.
    pub fn params(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().flat_map(|l| {
            let mut out = vec![&l.first.weight, &l.first.bias];
            if let Some(n) = &l.inner_norm {
                out.extend([&n.gamma, &n.beta]);
            }
            out.extend([&l.second.weight, &l.second.bias]);
            if let Some(n) = &l.outer_norm {
                out.extend([&n.gamma, &n.beta]);
            }
            out
        })
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers.iter_mut().flat_map(|l| {
            let mut out = vec![&mut l.first.weight, &mut l.first.bias];
            if let Some(n) = &mut l.inner_norm {
                out.extend([&mut n.gamma, &mut n.beta]);
            }
            out.extend([&mut l.second.weight, &mut l.second.bias]);
            if let Some(n) = &mut l.outer_norm {
                out.extend([&mut n.gamma, &mut n.beta]);
            }
            out
        })
    }

    /// Folds batch statistics from a training pass into the running ones.
    pub fn update_running_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>)], rows: usize) {
        let norms = self
            .layers
            .iter_mut()
            .flat_map(|l| l.inner_norm.iter_mut().chain(l.outer_norm.iter_mut()));
        let unbias = if rows > 1 { rows as f64 / (rows - 1) as f64 } else { 1.0 };
        for (norm, (mean, var)) in norms.zip(stats) {
            for (r, m) in norm.running_mean.iter_mut().zip(mean) {
                *r = (1.0 - NORM_MOMENTUM) * *r + NORM_MOMENTUM * m;
            }
            for (r, v) in norm.running_var.iter_mut().zip(var) {
                *r = (1.0 - NORM_MOMENTUM) * *r + NORM_MOMENTUM * v * unbias;
            }
        }
    }

    /// Records the network on `tape`, returning pre-sigmoid outputs.
    pub fn record<'a>(&self, tape: &mut Tape<'a>, x: Var, adj: &'a Adjacency, pass: Pass) -> Recorded {
        let params: Vec<Var> = self.params().map(|p| tape.leaf(p.clone())).collect();
        let mut next = params.iter().copied();
        let mut take = || next.next().expect("parameter count matches layout");
        let mut stats = Vec::new();
        let train = matches!(pass, Pass::Train { .. });
        let mut normalize = |tape: &mut Tape<'a>, h: Var, norm: &Norm, gamma: Var, beta: Var| {
            let fixed = (!train).then_some((norm.running_mean.as_slice(), norm.running_var.as_slice()));
            let (out, mean, var) = tape.batch_norm(h, gamma, beta, fixed);
            if train {
                stats.push((mean, var));
            }
            out
        };
        let mut h = x;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                h = tape.aggregate(h, adj, 1.0 + self.eps[l]);
            }
            let (w1, b1) = (take(), take());
            let a = tape.matmul(h, w1);
            let mut a = tape.add_bias(a, b1);
            if let Some(norm) = &layer.inner_norm {
                let (g, b) = (take(), take());
                a = normalize(tape, a, norm, g, b);
            }
            let mut a = tape.relu(a);
            if let (true, Pass::Train { dropout: Some(d) }) = (l == last, pass) {
                if d.rate > 0.0 {
                    let len = tape.value(a).data().len();
                    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
                    let keep = 1.0 / (1.0 - d.rate);
                    let mask = (0..len)
                        .map(|_| if rng.gen::<f64>() < d.rate { 0.0 } else { keep })
                        .collect();
                    a = tape.dropout(a, mask);
                }
            }
            let (w2, b2) = (take(), take());
            let z = tape.matmul(a, w2);
            h = tape.add_bias(z, b2);
            if let Some(norm) = &layer.outer_norm {
                let (g, b) = (take(), take());
                h = normalize(tape, h, norm, g, b);
            }
            if l < last {
                h = tape.relu(h);
            }
        }
        Recorded {
            logits: h,
            params,
            stats,
        }
    }

    /// Pre-sigmoid outputs.
    pub fn logits(&self, g: &Graph, x: &Matrix) -> Result<Matrix> {
        self.check_input(g, x)?;
        let adj = Adjacency::new(g, self.arch.aggregation == Aggregation::Mean);
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let rec = self.record(&mut tape, xv, &adj, Pass::Eval);
        Ok(tape.value(rec.logits).clone())
    }

    pub fn check_input(&self, g: &Graph, x: &Matrix) -> Result<()> {
        if x.cols() != self.arch.full_input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.full_input_dim(),
                got: x.cols(),
            });
        }
        if x.rows() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                got: x.rows(),
            });
        }
        Ok(())
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(out, &ckpt)?;
        Ok(())
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(input)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Malformed(format!("checkpoint version {}", ckpt.version)));
        }
        let model = ckpt.model;
        let fresh = GinModel::new(model.arch, 0)?;
        let shapes_match = model.eps.len() == model.arch.layers
            && model.params().map(Matrix::shape).eq(fresh.params().map(Matrix::shape))
            && model.norms().zip(fresh.norms()).all(|(a, b)| {
                a.running_mean.len() == b.running_mean.len() && a.running_var.len() == b.running_var.len()
            });
        if !shapes_match {
            return Err(Error::Malformed("checkpoint shapes disagree with architecture".into()));
        }
        Ok(model)
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model: GinModel,
}

/// Degree of each node as a single input column.
pub fn degree_features(g: &Graph) -> Matrix {
    Matrix::from_fn(g.n(), 1, |v, _| g.degree(v) as f64)
}

/// The random value column: code / k.
pub fn random_column(r: &RandomAssignment) -> Matrix {
    let k = r.support_size().max(1) as f64;
    Matrix::from_fn(r.len(), 1, |v, _| r.code(v) as f64 / k)
}

/// Per-node outputs after the final sigmoid.
pub fn gin_forward(g: &Graph, x: &Matrix, model: &GinModel) -> Result<Matrix> {
    let mut out = model.logits(g, x)?;
    out.data_mut().iter_mut().for_each(|v| *v = super::tape::sigmoid(*v));
    Ok(out)
}

/// Draws an assignment from `dist` with `feature_seed`, appends its value
/// column to `x` and runs [`gin_forward`].
pub fn rgin_forward(g: &Graph, x: &Matrix, dist: &Distribution, model: &GinModel, feature_seed: u64) -> Result<Matrix> {
    let r = assign(g, dist, feature_seed);
    let values = Matrix::from_fn(g.n(), 1, |v, _| dist.value(r.code(v)));
    gin_forward(g, &x.hcat(&values)?, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::uniform_support;
    use crate::gen::random_regular;
    use crate::graph::named::{complete, petersen};

    fn arch(aggregation: Aggregation, random_features: bool) -> Arch {
        Arch {
            layers: 3,
            hidden: 16,
            input_dim: 1,
            out_dim: 2,
            aggregation,
            random_features,
            batch_norm: true,
        }
    }

    #[test]
    fn regular_graph_outputs_identical() {
        let g = random_regular(30, 3, 5).unwrap();
        for agg in [Aggregation::Sum, Aggregation::Mean] {
            let model = GinModel::new(arch(agg, false), 3).unwrap();
            let out = gin_forward(&g, &degree_features(&g), &model).unwrap();
            for v in 1..30 {
                assert_eq!(out.row(v), out.row(0));
            }
        }
    }

    #[test]
    fn zero_weights_give_bias_path() {
        let mut model = GinModel::new(arch(Aggregation::Sum, false), 1).unwrap();
        model.params_mut().for_each(|p| p.data_mut().fill(0.0));
        let last = model.layers.last_mut().unwrap();
        last.second.bias = Matrix::new(1, 2, vec![0.0, 1.0]).unwrap();
        let g = petersen();
        let out = gin_forward(&g, &degree_features(&g), &model).unwrap();
        for v in 0..10 {
            assert_eq!(out.row(v), &[0.5, super::super::tape::sigmoid(1.0)]);
        }
    }

    #[test]
    fn outputs_follow_permutation() {
        let g = random_regular(12, 3, 8).unwrap();
        let perm = [3, 7, 0, 11, 5, 1, 9, 2, 10, 4, 8, 6];
        let h = g.permute(&perm).unwrap();
        let model = GinModel::new(arch(Aggregation::Sum, true), 2).unwrap();
        let x = Matrix::from_fn(12, 2, |v, j| if j == 0 { 3.0 } else { v as f64 * 0.01 });
        let xp = Matrix::from_fn(12, 2, |v, j| {
            let src = perm.iter().position(|&p| p == v).unwrap();
            x.get(src, j)
        });
        let a = gin_forward(&g, &x, &model).unwrap();
        let b = gin_forward(&h, &xp, &model).unwrap();
        for v in 0..12 {
            for (p, q) in a.row(v).iter().zip(b.row(perm[v])) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_value_support_is_a_constant_column() {
        let g = complete(4);
        let model = GinModel::new(arch(Aggregation::Sum, true), 4).unwrap();
        let x = degree_features(&g);
        let one = uniform_support(1).unwrap();
        let a = rgin_forward(&g, &x, &one, &model, 1).unwrap();
        let b = gin_forward(&g, &x.hcat(&Matrix::zeros(4, 1)).unwrap(), &model).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn feature_seeds_change_outputs() {
        let g = random_regular(20, 3, 1).unwrap();
        let model = GinModel::new(arch(Aggregation::Sum, true), 5).unwrap();
        let dist = uniform_support(100).unwrap();
        let x = degree_features(&g);
        let a = rgin_forward(&g, &x, &dist, &model, 1).unwrap();
        let b = rgin_forward(&g, &x, &dist, &model, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, rgin_forward(&g, &x, &dist, &model, 1).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let g = complete(4);
        let model = GinModel::new(arch(Aggregation::Sum, true), 0).unwrap();
        assert!(matches!(
            gin_forward(&g, &degree_features(&g), &model),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = GinModel::new(arch(Aggregation::Mean, true), 9).unwrap();
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        assert_eq!(GinModel::load(buf.as_slice()).unwrap(), model);
        let text = String::from_utf8(buf)
            .unwrap()
            .replace("\"version\":1", "\"version\":7");
        assert!(GinModel::load(text.as_bytes()).is_err());
    }
}
