use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;

use super::model::{degree_features, Aggregation, Arch, Dropout, GinModel, Pass};
use super::tape::{Adjacency, Tape};
use super::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub parameters: usize,
    pub tolerance: f64,
    pub passed: bool,
}

const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const FLOOR: f64 = 1e-4;

pub fn grad_check(model: &GinModel, g: &Graph, x: &Matrix, tol: f64) -> Result<GradCheckReport> {
    grad_check_with(model, g, x, tol, None)
}

/// Compares reverse-mode gradients of a cross-entropy loss against central
/// differences for every parameter, in training mode (batch statistics).
/// A dropout mask, when given, is held fixed across evaluations.
pub fn grad_check_with(
    model: &GinModel,
    g: &Graph,
    x: &Matrix,
    tol: f64,
    dropout: Option<Dropout>,
) -> Result<GradCheckReport> {
    model.check_input(g, x)?;
    let adj = Adjacency::new(g, model.arch.aggregation == Aggregation::Mean);
    let targets = Matrix::from_fn(g.n(), model.arch.out_dim, |v, c| ((v + c) % 2) as f64);
    let eval = |params: &[Matrix]| -> (f64, Vec<Matrix>) {
        let mut m = model.clone();
        m.params_mut().zip(params).for_each(|(p, q)| *p = q.clone());
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let rec = m.record(&mut tape, xv, &adj, Pass::Train { dropout });
        let loss = tape.bce_with_logits(rec.logits, &targets);
        let mut grads = tape.backward(loss);
        let grads = rec
            .params
            .iter()
            .zip(params)
            .map(|(&h, p)| grads.take(h).unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols())))
            .collect();
        (tape.value(loss).get(0, 0), grads)
    };
    let params: Vec<Matrix> = model.params().cloned().collect();
    let max_rel_error = max_relative_error(params, eval);
    Ok(GradCheckReport {
        max_rel_error,
        parameters: model.num_parameters(),
        tolerance: tol,
        passed: max_rel_error < tol,
    })
}

/// One entry of [`grad_check_matrix`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckCase {
    pub layers: usize,
    pub aggregation: Aggregation,
    pub random_features: bool,
    pub dropout: Option<f64>,
    pub report: GradCheckReport,
}

/// Graph with degrees 1 to 4, so rows differ even without random values.
fn check_graph() -> Graph {
    Graph::from_edges(
        7,
        &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4), (4, 5), (5, 6), (0, 5)],
    )
    .expect("valid edge list")
}

/// Gradient check over 1 to 3 layers, both aggregations, with and without
/// the random column, with and without dropout.
pub fn grad_check_matrix(tol: f64, seed: u64) -> Result<Vec<GradCheckCase>> {
    let g = check_graph();
    let mut cases = Vec::new();
    for layers in 1..=3 {
        for aggregation in [Aggregation::Sum, Aggregation::Mean] {
            for random_features in [false, true] {
                for dropout in [None, Some(0.3)] {
                    let arch = Arch {
                        layers,
                        hidden: 5,
                        input_dim: 1,
                        out_dim: 2,
                        aggregation,
                        random_features,
                        batch_norm: true,
                    };
                    let mut model = GinModel::new(arch, seed)?;
                    // Keeps ReLU inputs away from 0 where normalized rows tie.
                    for layer in &mut model.layers {
                        for norm in layer.inner_norm.iter_mut().chain(layer.outer_norm.iter_mut()) {
                            norm.beta.data_mut().fill(0.1);
                        }
                    }
                    let mut x = degree_features(&g);
                    if random_features {
                        x = x.hcat(&Matrix::from_fn(g.n(), 1, |v, _| ((v * 37 + 11) % 100) as f64 / 100.0))?;
                    }
                    let drop = dropout.map(|rate| Dropout { rate, seed });
                    let report = grad_check_with(&model, &g, &x, tol, drop)?;
                    cases.push(GradCheckCase {
                        layers,
                        aggregation,
                        random_features,
                        dropout,
                        report,
                    });
                }
            }
        }
    }
    Ok(cases)
}

pub(crate) fn max_relative_error<F>(params: Vec<Matrix>, eval: F) -> f64
where
    F: Fn(&[Matrix]) -> (f64, Vec<Matrix>),
{
    let (_, analytic) = eval(&params);
    let mut worst: f64 = 0.0;
    let mut probe = params;
    for i in 0..probe.len() {
        for j in 0..probe[i].data().len() {
            let orig = probe[i].data()[j];
            probe[i].data_mut()[j] = orig + STEP;
            let plus = eval(&probe).0;
            probe[i].data_mut()[j] = orig - STEP;
            let minus = eval(&probe).0;
            probe[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            let a = analytic[i].data()[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(err);
        }
    }
    worst
}
