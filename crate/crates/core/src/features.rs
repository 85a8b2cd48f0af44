//! Discrete random node features.
//!
//! Values are handled as integer codes into the support of a
//! [`Distribution`]; the real value a network sees is only produced at the
//! boundary via [`Distribution::value`]. Ordering between nodes uses
//! [`RandomAssignment::key`], which appends the node index to the code so
//! that ties are total and deterministic.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest tolerated deviation of the masses from 1.
const MASS_TOLERANCE: f64 = 1e-12;

/// A finite discrete distribution with property U(p): no value has mass
/// above `p_bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
    p_bound: f64,
    uniform: bool,
}

impl Distribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidParameter(format!(
                "support of {} values with {} masses",
                values.len(),
                probs.len()
            )));
        }
        if values.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter("support too large".into()));
        }
        let distinct: HashSet<u64> = values.iter().map(|v| v.to_bits()).collect();
        if distinct.len() != values.len() {
            return Err(Error::InvalidParameter("support values must be distinct".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter("masses must lie in [0, 1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidParameter(format!("masses sum to {total}")));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let p_bound = probs.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            values,
            probs,
            cumulative,
            p_bound,
            uniform: false,
        })
    }

    pub fn support_size(&self) -> usize {
        self.values.len()
    }

    /// The smallest p for which the distribution has property U(p).
    pub fn p_bound(&self) -> f64 {
        self.p_bound
    }

    pub fn value(&self, code: u32) -> f64 {
        self.values[code as usize]
    }

    pub fn mass(&self, code: u32) -> f64 {
        self.probs[code as usize]
    }

    pub fn has_property_u(&self, p: f64) -> bool {
        self.p_bound <= p
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.uniform {
            return rng.gen_range(0..self.values.len() as u32);
        }
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.values.len() - 1) as u32
    }
}

/// Unif({0, 1/k, ..., (k-1)/k}); k = 100 gives {0, 0.01, ..., 0.99}.
pub fn uniform_support(k: usize) -> Result<Distribution> {
    if k == 0 {
        return Err(Error::InvalidParameter("support size must be >= 1".into()));
    }
    if k > u32::MAX as usize {
        return Err(Error::InvalidParameter("support too large".into()));
    }
    let values = (0..k).map(|i| i as f64 / k as f64).collect();
    let cumulative = (1..=k).map(|i| i as f64 / k as f64).collect();
    Ok(Distribution {
        values,
        probs: vec![1.0 / k as f64; k],
        cumulative,
        p_bound: 1.0 / k as f64,
        uniform: true,
    })
}

/// Support size ceil(1/p) of the uniform distribution with property U(p).
pub fn support_for_bound(p: f64) -> usize {
    // Guard against 1/p landing a hair above an integer.
    ((1.0 / p) * (1.0 - 1e-12)).ceil() as usize
}

/// The per-pair collision bound that keeps the chance of any repeated value
/// inside an L-hop ball of a degree-Δ graph below `eps`: Δ^(-2(L+2)) · eps.
pub fn collision_safe_bound(max_degree: usize, radius: usize, eps: f64) -> f64 {
    (max_degree as f64).powi(-2 * (radius as i32 + 2)) * eps
}

/// One code per node, drawn i.i.d. from a distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomAssignment {
    codes: Vec<u32>,
    support_size: usize,
    seed: u64,
}

impl RandomAssignment {
    pub fn from_codes(codes: Vec<u32>, support_size: usize) -> Result<Self> {
        if let Some(&c) = codes.iter().find(|&&c| c as usize >= support_size) {
            return Err(Error::InvalidParameter(format!(
                "code {c} outside support of size {support_size}"
            )));
        }
        Ok(Self {
            codes,
            support_size,
            seed: 0,
        })
    }

    /// Records the seed the codes came from.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, v: usize) -> u32 {
        self.codes[v]
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total order used for tie-breaking: random code first, node index second.
    pub fn key(&self, v: usize) -> (u32, usize) {
        (self.codes[v], v)
    }

    /// Restriction to a subset of nodes, e.g. the origin map of a ball.
    pub fn restrict(&self, nodes: &[usize]) -> Self {
        Self {
            codes: nodes.iter().map(|&v| self.codes[v]).collect(),
            support_size: self.support_size,
            seed: self.seed,
        }
    }

    /// Real-valued column fed to a network.
    pub fn values(&self, dist: &Distribution) -> Vec<f64> {
        self.codes.iter().map(|&c| dist.value(c)).collect()
    }
}

/// i.i.d. draws for every node of `g`; deterministic in `seed`.
pub fn assign(g: &Graph, dist: &Distribution, seed: u64) -> RandomAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = assign_with_rng(g.n(), dist, &mut rng);
    r.seed = seed;
    r
}

pub fn assign_with_rng<R: Rng + ?Sized>(n: usize, dist: &Distribution, rng: &mut R) -> RandomAssignment {
    RandomAssignment {
        codes: (0..n).map(|_| dist.sample(rng)).collect(),
        support_size: dist.support_size(),
        seed: 0,
    }
}

/// True iff two distinct nodes of N_L(v) carry the same code.
pub fn has_local_collision(g: &Graph, r: &RandomAssignment, v: usize, radius: usize) -> bool {
    has_duplicate(g.k_hop(v, radius).into_iter().map(|u| r.code(u)))
}

/// Per-node [`has_local_collision`].
pub fn collision_nodes(g: &Graph, r: &RandomAssignment, radius: usize) -> Vec<bool> {
    (0..g.n()).map(|v| has_local_collision(g, r, v, radius)).collect()
}

pub(crate) fn has_duplicate(codes: impl Iterator<Item = u32>) -> bool {
    let mut seen = HashSet::new();
    for c in codes {
        if !seen.insert(c) {
            return true;
        }
    }
    false
}
