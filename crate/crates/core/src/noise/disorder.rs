use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hamiltonian::CouplingPattern;
use crate::seeds;

/// One frozen draw of multiplicative static disorder.
///
/// `j_i ↦ J_i·[1 + δ(1 − 2r_i)]`, `b_i ↦ B_i·[1 + δ(1 − 2s_i)]` with
/// `r_i, s_i` uniform on `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub delta: f64,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub seed: u64,
    pub effective_pattern: CouplingPattern,
}

impl DisorderRealization {
    /// Largest `|effective/ideal − 1|` over all nonzero entries of `ideal`.
    pub fn max_relative_deviation(&self, ideal: &CouplingPattern) -> f64 {
        let pairs = ideal
            .j
            .iter()
            .zip(&self.effective_pattern.j)
            .chain(ideal.b.iter().zip(&self.effective_pattern.b));
        pairs
            .filter(|(i, _)| **i != 0.0)
            .map(|(i, e)| (e / i - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Draw `r` (bonds) then `s` (sites) from a generator seeded with `seed`.
pub fn sample_disorder(
    pattern: &CouplingPattern,
    delta: f64,
    seed: u64,
) -> Result<DisorderRealization> {
    pattern.validate()?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be finite and >= 0, got {delta}")));
    }
    let mut rng = seeds::rng_from_seed(seed);
    let r: Vec<f64> = (0..pattern.j.len()).map(|_| rng.random()).collect();
    let s: Vec<f64> = (0..pattern.b.len()).map(|_| rng.random()).collect();
    let scale = |x: f64, u: f64| x * (1.0 + delta * (1.0 - 2.0 * u));
    let effective_pattern = CouplingPattern {
        j: pattern.j.iter().zip(&r).map(|(&x, &u)| scale(x, u)).collect(),
        b: pattern.b.iter().zip(&s).map(|(&x, &u)| scale(x, u)).collect(),
    };
    Ok(DisorderRealization {
        delta,
        r,
        s,
        seed,
        effective_pattern,
    })
}
