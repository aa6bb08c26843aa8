//! Multiplier selection.
//!
//! For a pair of order-`d` estimates with plain difference `Δ`, a multiplier
//! `κ` is admissible when either
//!
//! * `|k_d κ Δ|_T > 4ε(1 + κ)` (the pair separates at the next order), or
//! * `|Δ|_T < (π − 2ε(1 + κ)) / (k_d κ)` (the pair may still merge).
//!
//! The complement is a union of closed intervals
//! `R^(n) = [(2πn − 4ε)/(k_dΔ + 4ε), (2πn + 4ε)/(k_dΔ − 4ε)]`, `n ≥ 0`,
//! intersected with `κ ≥ (π − 2ε)/(k_d|Δ|_T + 2ε)`.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;

use crate::circle::{wrap_dist, Phase, DEFAULT_PHASE_TOL};

/// Relative step taken below a forbidden interval during the backward scan.
pub const SCAN_MARGIN: f64 = 1e-9;

const MAX_SCAN_STEPS: usize = 1_000_000;

/// Closed interval `[lo, hi]`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Search range `[lo, hi]` for `κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KappaRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("no admissible multiplier in [{lo}, {hi}]")]
pub struct NoAdmissibleMultiplier {
    pub lo: f64,
    pub hi: f64,
}

/// Whether one pair with plain difference `delta` passes the separation or the
/// closeness condition at `κ`.
pub fn pair_admissible(delta: f64, k_d: f64, kappa: f64, eps: f64) -> bool {
    let separated = wrap_dist(k_d * kappa * delta) > 4.0 * eps * (1.0 + kappa);
    let close = wrap_dist(delta) < (PI - 2.0 * eps * (1.0 + kappa)) / (k_d * kappa);
    separated || close
}

fn pair_deltas(estimates: &[Phase]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, a) in estimates.iter().enumerate() {
        for b in &estimates[i + 1..] {
            let delta = a.value() - b.value();
            if delta.abs() > DEFAULT_PHASE_TOL {
                out.push(delta.abs());
            }
        }
    }
    out
}

/// Whether `κ` is admissible for every pair of distinct estimates.
pub fn is_admissible(estimates: &[Phase], k_d: f64, kappa: f64, eps: f64) -> bool {
    pair_deltas(estimates)
        .into_iter()
        .all(|d| pair_admissible(d, k_d, kappa, eps))
}

/// `κ ≥ (π − 2ε)/(k_d|Δ|_T + 2ε)`, where the closeness condition fails.
fn closeness_floor(delta: f64, k_d: f64, eps: f64) -> f64 {
    (PI - 2.0 * eps) / (k_d * wrap_dist(delta) + 2.0 * eps)
}

fn alias_interval(n: u64, a: f64, eps: f64) -> Interval {
    let center = TAU * n as f64;
    let hi = if a > 4.0 * eps {
        (center + 4.0 * eps) / (a - 4.0 * eps)
    } else {
        f64::INFINITY
    };
    Interval { lo: (center - 4.0 * eps) / (a + 4.0 * eps), hi }
}

/// Forbidden multipliers for one pair, clipped to `range`, merged and sorted.
pub fn forbidden_regions(delta: f64, k_d: f64, eps: f64, range: KappaRange) -> Vec<Interval> {
    let delta = delta.abs();
    let floor = closeness_floor(delta, k_d, eps).max(range.lo);
    if floor > range.hi {
        return Vec::new();
    }
    let a = k_d * delta;
    let n_max = ((range.hi * (a + 4.0 * eps) + 4.0 * eps) / TAU).floor().max(0.0) as u64;
    let mut out: Vec<Interval> = Vec::new();
    for n in 0..=n_max {
        let r = alias_interval(n, a, eps);
        let lo = r.lo.max(floor);
        let hi = r.hi.min(range.hi);
        if lo > hi {
            continue;
        }
        match out.last_mut() {
            Some(last) if lo <= last.hi => last.hi = last.hi.max(hi),
            _ => out.push(Interval { lo, hi }),
        }
    }
    out
}

/// Union of [`forbidden_regions`] over every pair of distinct estimates.
pub fn forbidden_union(estimates: &[Phase], k_d: f64, eps: f64, range: KappaRange) -> Vec<Interval> {
    let mut all: Vec<Interval> = pair_deltas(estimates)
        .into_iter()
        .flat_map(|d| forbidden_regions(d, k_d, eps, range))
        .collect();
    all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::new();
    for r in all {
        match out.last_mut() {
            Some(last) if r.lo <= last.hi => last.hi = last.hi.max(r.hi),
            _ => out.push(r),
        }
    }
    out
}

/// Left end of the connected forbidden component that contains `c`, for a
/// pair that fails at `c`.
fn component_start(delta: f64, k_d: f64, eps: f64, c: f64) -> f64 {
    let a = k_d * delta;
    let n_top = ((c * (a + 4.0 * eps) + 4.0 * eps) / TAU).floor().max(0.0) as u64;
    let mut start = c;
    let mut n = n_top;
    loop {
        let r = alias_interval(n, a, eps);
        if r.hi < start {
            break;
        }
        start = start.min(r.lo);
        if n == 0 {
            break;
        }
        n -= 1;
    }
    start.max(closeness_floor(delta, k_d, eps))
}

/// Largest admissible `κ` in `range`.
///
/// Scans down from `range.hi`: whenever the candidate is forbidden for some
/// pair, it jumps just below the start of the enclosing forbidden component.
pub fn choose_multiplier(
    estimates: &[Phase],
    k_d: f64,
    eps: f64,
    range: KappaRange,
) -> Result<f64, NoAdmissibleMultiplier> {
    let deltas = pair_deltas(estimates);
    let fail = NoAdmissibleMultiplier { lo: range.lo, hi: range.hi };
    let mut c = range.hi;
    for _ in 0..MAX_SCAN_STEPS {
        if c.is_nan() || c < range.lo {
            return Err(fail);
        }
        let mut next = f64::INFINITY;
        for &d in &deltas {
            if !pair_admissible(d, k_d, c, eps) {
                next = next.min(component_start(d, k_d, eps, c));
            }
        }
        if next == f64::INFINITY {
            return Ok(c);
        }
        let stepped = next - SCAN_MARGIN * next.abs().max(1.0);
        // guard against a component that does not move the candidate
        c = stepped.min(c - SCAN_MARGIN * c.abs().max(1.0));
    }
    Err(fail)
}
