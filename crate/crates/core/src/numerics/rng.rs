//! Seeded random streams and the correlated confounder sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A reproducible random stream: the ChaCha8 keystream keyed by `seed`
/// and selected by `stream_id`. Distinct stream ids never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream for work item `index`, independent of scheduling order.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(0x5851_f42d))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Slack allowed on `gamma1 >= gamma2^2` so grid points on the parabola
/// survive floating-point rounding.
pub(crate) const FEASIBILITY_SLACK: f64 = 1e-12;

pub(crate) fn check_confounder_structure(gamma1: f64, gamma2: f64) -> Result<()> {
    if !(gamma1 > 0.0) || !gamma2.is_finite() || gamma1 - gamma2 * gamma2 < -FEASIBILITY_SLACK {
        return Err(Error::InfeasibleConfounderStructure { gamma1, gamma2 });
    }
    Ok(())
}

/// Draws `n` pairs `(U, V)` with `Var(V) = σ²`, `Var(U) = γ1σ²` and
/// `Cov(U, V) = γ2σ²`, as `V = σε₁`, `U = γ2·V + √(γ1 − γ2²)·σε₂`.
///
/// The conditional form handles the rank-deficient case `γ1 = γ2²`
/// (perfect correlation) without special-casing.
pub fn draw_bivariate_confounders<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    sigma: f64,
    gamma1: f64,
    gamma2: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    check_confounder_structure(gamma1, gamma2)?;
    let residual_scale = (gamma1 - gamma2 * gamma2).max(0.0).sqrt() * sigma;
    Ok((0..n)
        .map(|_| {
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            let v = sigma * e1;
            (gamma2 * v + residual_scale * e2, v)
        })
        .collect())
}
