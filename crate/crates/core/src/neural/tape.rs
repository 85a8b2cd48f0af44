//! Reverse-mode differentiation over a recorded list of matrix operations.

use crate::graph::Graph;

use super::tensor::Matrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Neighbor lists in CSR form with per-edge weights: 1 for sum
/// aggregation, 1/deg for mean aggregation.
#[derive(Clone, Debug)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl Adjacency {
    pub fn new(g: &Graph, mean: bool) -> Self {
        Self::batch(&[g], mean)
    }

    /// Adjacency of the disjoint union of `graphs`, numbered in order.
    pub fn batch(graphs: &[&Graph], mean: bool) -> Self {
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        let mut base = 0;
        for g in graphs {
            for v in 0..g.n() {
                let neigh = g.neighbors(v);
                let w = if mean { 1.0 / neigh.len() as f64 } else { 1.0 };
                targets.extend(neigh.iter().map(|&u| base + u));
                weights.extend(std::iter::repeat_n(w, neigh.len()));
                offsets.push(targets.len());
            }
            base += g.n();
        }
        Self {
            offsets,
            targets,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    fn edges(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }
}

enum Op<'a> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Aggregate {
        input: Var,
        adj: &'a Adjacency,
        self_weight: f64,
    },
    Dropout {
        input: Var,
        mask: Vec<f64>,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        xhat: Matrix,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    BceWithLogits {
        logits: Var,
        targets: &'a Matrix,
    },
    SquaredError {
        input: Var,
        targets: &'a Matrix,
    },
}

/// Values computed in order; `backward` walks them in reverse.
pub struct Tape<'a> {
    values: Vec<Matrix>,
    ops: Vec<Op<'a>>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, value: Matrix, op: Op<'a>) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.values[v.0]
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// Adds the 1×c row `bias` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let mut out = self.value(x).clone();
        let b = self.value(bias);
        assert_eq!(b.shape(), (1, out.cols()), "bias shape");
        for i in 0..out.rows() {
            for (o, &bv) in out.row_mut(i).iter_mut().zip(b.data()) {
                *o += bv;
            }
        }
        self.push(out, Op::AddBias(x, bias))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        self.push(out, Op::Sigmoid(x))
    }

    /// Row v of the result is `self_weight * x_v + Σ_u w_vu x_u`.
    pub fn aggregate(&mut self, x: Var, adj: &'a Adjacency, self_weight: f64) -> Var {
        let input = self.value(x);
        assert_eq!(input.rows(), adj.n(), "aggregation rows");
        let mut out = input.clone();
        out.data_mut().iter_mut().for_each(|v| *v *= self_weight);
        for v in 0..adj.n() {
            for (u, w) in adj.edges(v) {
                let src = &input.data()[u * input.cols()..(u + 1) * input.cols()];
                for (o, &s) in out.row_mut(v).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        self.push(
            out,
            Op::Aggregate {
                input: x,
                adj,
                self_weight,
            },
        )
    }

    /// Multiplies by a fixed mask; entries are 0 or 1/(1 - rate).
    pub fn dropout(&mut self, x: Var, mask: Vec<f64>) -> Var {
        let mut out = self.value(x).clone();
        assert_eq!(mask.len(), out.data().len(), "dropout mask length");
        out.data_mut().iter_mut().zip(&mask).for_each(|(v, m)| *v *= m);
        self.push(out, Op::Dropout { input: x, mask })
    }

    /// Per-column normalization followed by the affine map `gamma * x̂ + beta`.
    /// With `fixed = None` the column statistics of `x` itself are used and
    /// returned as (mean, biased variance); otherwise the given mean and
    /// variance are treated as constants.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        fixed: Option<(&[f64], &[f64])>,
    ) -> (Var, Vec<f64>, Vec<f64>) {
        let input = self.value(x);
        let (rows, cols) = input.shape();
        let (mean, var) = match fixed {
            Some((m, v)) => (m.to_vec(), v.to_vec()),
            None => {
                let n = rows.max(1) as f64;
                let mut mean = vec![0.0; cols];
                for i in 0..rows {
                    mean.iter_mut().zip(input.row(i)).for_each(|(m, &v)| *m += v);
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; cols];
                for i in 0..rows {
                    for ((s, &v), m) in var.iter_mut().zip(input.row(i)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= n);
                (mean, var)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
        let mut xhat = input.clone();
        for i in 0..rows {
            for (j, h) in xhat.row_mut(i).iter_mut().enumerate() {
                *h = (*h - mean[j]) * inv_std[j];
            }
        }
        let (g, b) = (self.value(gamma), self.value(beta));
        let mut out = xhat.clone();
        for i in 0..rows {
            for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                *o = g.data()[j] * *o + b.data()[j];
            }
        }
        let op = Op::BatchNorm {
            input: x,
            gamma,
            beta,
            xhat,
            inv_std,
            batch_stats: fixed.is_none(),
        };
        (self.push(out, op), mean, var)
    }

    /// Mean binary cross-entropy of sigmoid(logits) against targets, as a 1×1 value.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &'a Matrix) -> Var {
        let z = self.value(logits);
        assert_eq!(z.shape(), targets.shape(), "target shape");
        let total: f64 = z
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let loss = total / z.data().len().max(1) as f64;
        self.push(
            Matrix::from_fn(1, 1, |_, _| loss),
            Op::BceWithLogits { logits, targets },
        )
    }

    /// Half the summed squared difference, as a 1×1 value.
    pub fn squared_error(&mut self, x: Var, targets: &'a Matrix) -> Var {
        let v = self.value(x);
        assert_eq!(v.shape(), targets.shape(), "target shape");
        let loss: f64 = v
            .data()
            .iter()
            .zip(targets.data())
            .map(|(a, b)| 0.5 * (a - b) * (a - b))
            .sum();
        self.push(
            Matrix::from_fn(1, 1, |_, _| loss),
            Op::SquaredError { input: x, targets },
        )
    }

    /// Gradients of the 1×1 value `loss` with respect to every recorded
    /// value; `None` where the loss does not depend on it.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.values.len()];
        grads[loss.0] = Some(Matrix::from_fn(1, 1, |_, _| 1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.ops[i] {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul_t(self.value(*b));
                    let db = self.value(*a).t_matmul(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddBias(x, bias) => {
                    let mut db = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &gv) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += gv;
                        }
                    }
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *x, g.clone());
                }
                Op::Relu(x) => {
                    let mut dx = g.clone();
                    dx.data_mut().iter_mut().zip(self.value(*x).data()).for_each(|(d, &v)| {
                        if v <= 0.0 {
                            *d = 0.0
                        }
                    });
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sigmoid(x) => {
                    let mut dx = g.clone();
                    dx.data_mut()
                        .iter_mut()
                        .zip(self.values[i].data())
                        .for_each(|(d, &s)| *d *= s * (1.0 - s));
                    accumulate(&mut grads, *x, dx);
                }
                Op::Aggregate {
                    input,
                    adj,
                    self_weight,
                } => {
                    let mut dx = g.clone();
                    dx.data_mut().iter_mut().for_each(|v| *v *= self_weight);
                    let cols = g.cols();
                    for v in 0..adj.n() {
                        for (u, w) in adj.edges(v) {
                            let src = &g.data()[v * cols..(v + 1) * cols];
                            for (d, &s) in dx.row_mut(u).iter_mut().zip(src) {
                                *d += w * s;
                            }
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::Dropout { input, mask } => {
                    let mut dx = g.clone();
                    dx.data_mut().iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
                    accumulate(&mut grads, *input, dx);
                }
                Op::BatchNorm {
                    input,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    batch_stats,
                } => {
                    let (rows, cols) = g.shape();
                    let gam = self.value(*gamma).data();
                    let mut dgamma = Matrix::zeros(1, cols);
                    let mut dbeta = Matrix::zeros(1, cols);
                    for i in 0..rows {
                        for j in 0..cols {
                            dgamma.data_mut()[j] += g.get(i, j) * xhat.get(i, j);
                            dbeta.data_mut()[j] += g.get(i, j);
                        }
                    }
                    let mut dx = Matrix::zeros(rows, cols);
                    let n = rows as f64;
                    for i in 0..rows {
                        for j in 0..cols {
                            let dxhat = g.get(i, j) * gam[j];
                            dx.data_mut()[i * cols + j] = if *batch_stats {
                                // dx = (dx̂ - mean(dx̂) - x̂ mean(dx̂ x̂)) / std
                                let mean_d = dbeta.data()[j] * gam[j] / n;
                                let mean_dx = dgamma.data()[j] * gam[j] / n;
                                inv_std[j] * (dxhat - mean_d - xhat.get(i, j) * mean_dx)
                            } else {
                                inv_std[j] * dxhat
                            };
                        }
                    }
                    accumulate(&mut grads, *gamma, dgamma);
                    accumulate(&mut grads, *beta, dbeta);
                    accumulate(&mut grads, *input, dx);
                }
                Op::BceWithLogits { logits, targets } => {
                    let z = self.value(*logits);
                    let scale = g.get(0, 0) / z.data().len().max(1) as f64;
                    let data = z
                        .data()
                        .iter()
                        .zip(targets.data())
                        .map(|(&z, &y)| scale * (sigmoid(z) - y))
                        .collect();
                    let dz = Matrix::new(z.rows(), z.cols(), data).expect("shape preserved");
                    accumulate(&mut grads, *logits, dz);
                }
                Op::SquaredError { input, targets } => {
                    let v = self.value(*input);
                    let scale = g.get(0, 0);
                    let data = v
                        .data()
                        .iter()
                        .zip(targets.data())
                        .map(|(a, b)| scale * (a - b))
                        .collect();
                    let dv = Matrix::new(v.rows(), v.cols(), data).expect("shape preserved");
                    accumulate(&mut grads, *input, dv);
                }
            }
            grads[i] = Some(g);
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads[v.0].take()
    }
}

pub const NORM_EPS: f64 = 1e-5;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
