//! Single-phase baseline on a doubling schedule `k = 2^d`.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::circle::{signed_wrap, Phase};
use crate::oracle::PhaseOracle;

use super::{AdaptiveError, ConfigError};

/// Schedule for the baseline: target precision `δ` and shot weights
/// `M_d = α + γ(d_f + 1 − d)` per basis at `k = 2^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingleConfig {
    pub delta: f64,
    pub alpha: u64,
    pub gamma: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingleResult {
    pub estimate: Phase,
    pub total_cost: f64,
    pub d_f: u32,
    /// `(k, shots per basis)` per order.
    pub schedule: Vec<(f64, u64)>,
}

/// `d_f = ⌈log₂(1/δ)⌉`.
pub fn final_order(delta: f64) -> u32 {
    (1.0 / delta).log2().ceil().max(0.0) as u32
}

/// Shots per basis at order `d`.
pub fn shots_at(cfg: &SingleConfig, d_f: u32, d: u32) -> u64 {
    cfg.alpha + cfg.gamma * u64::from(d_f + 1 - d)
}

/// Estimates a single eigenphase to precision `δ`.
///
/// At order `d` the angle of `g̃(2^d)` fixes `2^d φ`; the estimate moves to the
/// branch in `[φ^(d−1) − π/2^d, φ^(d−1) + π/2^d)`.
pub fn run_single<O: PhaseOracle, R: Rng + ?Sized>(
    cfg: &SingleConfig,
    oracle: &mut O,
    rng: &mut R,
) -> Result<SingleResult, AdaptiveError> {
    if !(cfg.delta > 0.0 && cfg.delta.is_finite()) {
        return Err(ConfigError::BadDelta(cfg.delta).into());
    }
    let d_f = final_order(cfg.delta);
    let mut schedule = Vec::with_capacity(d_f as usize + 1);
    let mut phi = 0.0;
    for d in 0..=d_f {
        let k = (1u64 << d) as f64;
        let shots = shots_at(cfg, d_f, d);
        let theta = oracle.sample(k, shots, rng)?.value().arg();
        phi = if d == 0 { theta } else { phi + signed_wrap(theta - k * phi) / k };
        schedule.push((k, shots));
    }
    Ok(SingleResult {
        estimate: Phase::new(phi),
        total_cost: oracle.ledger().total(),
        d_f,
        schedule,
    })
}

/// Classical Fisher information `Σ k²(M_r + M_i)` of a schedule of
/// `(k, M_r, M_i)` queries on a single eigenphase.
pub fn fisher_info(schedule: &[(f64, u64, u64)]) -> f64 {
    schedule.iter().map(|&(k, mr, mi)| k * k * (mr + mi) as f64).sum()
}

/// Cramér-Rao bound `1/√I` for the RMS error of an unbiased estimator.
pub fn cramer_rao(fisher: f64) -> f64 {
    1.0 / fisher.sqrt()
}

/// Heisenberg-style floor `π/T` for total cost `T`.
pub fn heisenberg_floor(total_cost: f64) -> f64 {
    PI / total_cost
}
