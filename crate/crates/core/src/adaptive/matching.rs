//! Shift selection and matching of estimates across orders.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;

use crate::circle::{reduce, window_contains, wrap_dist, Phase};

use super::Failure;

const GAP_TIE_TOL: f64 = 1e-12;

/// Frame shift chosen after the first round.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShiftChoice {
    /// Midpoint of the largest gap between first-round estimates.
    pub zeta: f64,
    /// Half-width of that gap.
    pub d_zeta: f64,
    /// Applied shift: the working frame is `φ − χ`.
    pub chi: f64,
}

/// Picks `χ = ζ + d_ζ/2 − 8ε₀` from the largest circular gap between estimates.
///
/// Ties between equal gaps go to the one that starts first. Returns `None` for
/// an empty estimate set.
pub fn choose_shift(estimates: &[Phase], eps0: f64) -> Option<ShiftChoice> {
    if estimates.is_empty() {
        return None;
    }
    let mut xs: Vec<f64> = estimates.iter().map(|p| p.value()).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let mut best_start = xs[0];
    let mut best_gap = -1.0;
    for i in 0..n {
        let start = xs[i];
        let gap = if i + 1 < n { xs[i + 1] - start } else { xs[0] + TAU - start };
        if gap > best_gap + GAP_TIE_TOL {
            best_gap = gap;
            best_start = start;
        }
    }
    let d_zeta = best_gap / 2.0;
    let zeta = reduce(best_start + d_zeta);
    let chi = reduce(zeta + d_zeta / 2.0 - 8.0 * eps0);
    Some(ShiftChoice { zeta, d_zeta, chi })
}

/// Lifts each `θ_l` (an estimate of `k_d φ mod 2π`) to the branch
/// `(θ_l + 2πn)/k_d`, `0 ≤ n ≤ ⌈k_d⌉ − 1`, nearest to some previous estimate.
///
/// Ties go to the smallest previous index, then the smallest `n`.
pub fn lift(prev: &[Phase], thetas: &[Phase], k_d: f64) -> Vec<Phase> {
    let n_hi = (k_d.ceil() - 1.0).max(0.0);
    thetas
        .iter()
        .map(|theta| {
            let t = theta.value();
            let mut best = (f64::INFINITY, 0.0);
            for p in prev {
                let base = (k_d * p.value() - t) / TAU;
                let mut cands: [f64; 10] = [0.0; 10];
                let mut c = 0;
                for m in -1..=2 {
                    let x = base + m as f64 * k_d;
                    cands[c] = x.floor();
                    cands[c + 1] = x.ceil();
                    c += 2;
                }
                cands[8] = 0.0;
                cands[9] = n_hi;
                let mut local = (f64::INFINITY, f64::INFINITY);
                for &n in &cands {
                    if !(0.0..=n_hi).contains(&n) {
                        continue;
                    }
                    let dist = wrap_dist(p.value() - (t + TAU * n) / k_d);
                    if dist < local.0 || (dist == local.0 && n < local.1) {
                        local = (dist, n);
                    }
                }
                if local.0 < best.0 {
                    best = (local.0, local.1);
                }
            }
            Phase::new((t + TAU * best.1) / k_d)
        })
        .collect()
}

/// Result of combining order `d − 1` estimates with order `d` output.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchOutcome {
    Matched(Vec<Phase>),
    Failed(Failure),
}

/// Checks consistency between `prev` (working frame) and the new `θ` set,
/// lifts the new set, and checks that every result lies in the order-`k_d`
/// window `[π/k_d, π(2⌊k_d⌋ − 1)/k_d]`.
pub fn match_orders(
    prev: &[Phase],
    thetas: &[Phase],
    k_d: f64,
    kappa: f64,
    eps: f64,
    n_phi: usize,
) -> MatchOutcome {
    let tol = 2.0 * eps * (1.0 + kappa);
    let nearest = |x: f64, set: &[Phase]| set.iter().map(|s| wrap_dist(x - s.value())).fold(f64::INFINITY, f64::min);
    let prev_unmatched = prev.iter().any(|p| nearest(k_d * p.value(), thetas) > tol);
    let theta_unmatched = thetas.iter().any(|t| {
        let lifted = prev.iter().map(|p| wrap_dist(k_d * p.value() - t.value())).fold(f64::INFINITY, f64::min);
        lifted > tol
    });
    if thetas.is_empty() || prev_unmatched || theta_unmatched || thetas.len() > n_phi {
        return MatchOutcome::Failed(Failure::StepCMismatch);
    }
    let mut next = lift(prev, thetas, k_d);
    if next.iter().any(|p| !window_contains(p.value(), k_d)) {
        return MatchOutcome::Failed(Failure::StepEWindow);
    }
    next.sort_by(|a, b| a.value().total_cmp(&b.value()));
    next.dedup_by(|a, b| a.approx_eq(*b, crate::circle::DEFAULT_PHASE_TOL));
    MatchOutcome::Matched(next)
}

/// Bounds of the order-`k` window, `[π/k, π(2⌊k⌋ − 1)/k]`.
pub fn window_bounds(k: f64) -> (f64, f64) {
    (PI / k, PI * (2.0 * k.floor() - 1.0) / k)
}
