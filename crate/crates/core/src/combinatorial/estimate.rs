use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeEstimate {
    pub estimate: f64,
    pub samples: usize,
    pub hits: usize,
}

/// Hoeffding sample count: ceil(ln(2/δ) / (2ε²)).
pub fn sample_count(eps: f64, delta: f64) -> usize {
    ((2.0 / delta).ln() / (2.0 * eps * eps)).ceil() as usize
}

/// Estimates |{x : member(x)}| among `n` elements by probing a uniform
/// sample drawn with replacement. The error exceeds `eps * n` with
/// probability at most `delta`; the number of probes does not depend on `n`.
pub fn estimate_size<R, F>(n: usize, mut member: F, eps: f64, delta: f64, rng: &mut R) -> Result<SizeEstimate>
where
    R: Rng + ?Sized,
    F: FnMut(usize) -> bool,
{
    for (name, x) in [("eps", eps), ("delta", delta)] {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidParameter(format!("{name} = {x} not in (0, 1)")));
        }
    }
    if n == 0 {
        return Ok(SizeEstimate {
            estimate: 0.0,
            samples: 0,
            hits: 0,
        });
    }
    let samples = sample_count(eps, delta);
    let hits = (0..samples).filter(|_| member(rng.gen_range(0..n))).count();
    Ok(SizeEstimate {
        estimate: n as f64 * hits as f64 / samples as f64,
        samples,
        hits,
    })
}
