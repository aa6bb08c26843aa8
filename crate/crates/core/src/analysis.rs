//! Error accounting, binned power-law fits and Fisher-information limits.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::adaptive::fisher_info;
use crate::circle::{wrap_dist, Phase};

/// A true phase paired with its closest estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseError {
    pub true_phase: Phase,
    pub estimate: Phase,
    pub error: f64,
}

/// For each true phase, the closest estimate and its circular distance.
///
/// One estimate may serve several true phases. With no estimates the error is
/// measured against phase 0.
pub fn closest_errors(truth: &[Phase], estimates: &[Phase]) -> Vec<PhaseError> {
    truth
        .iter()
        .map(|&t| {
            let mut best = PhaseError { true_phase: t, estimate: Phase::ZERO, error: t.dist(Phase::ZERO) };
            let mut first = true;
            for &e in estimates {
                let err = wrap_dist(e.value() - t.value());
                if first || err < best.error {
                    best = PhaseError { true_phase: t, estimate: e, error: err };
                    first = false;
                }
            }
            best
        })
        .collect()
}

/// One `(cost, error)` observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub cost: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitBin {
    pub rms_t: f64,
    pub rms_error: f64,
    /// Delta-method standard error of `rms_error`.
    pub stderr: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    /// Slope of `ln rms_error` against `ln rms_T`.
    pub exponent: f64,
    /// `c` in `rms_error ≈ c·T^exponent`.
    pub prefactor: f64,
    pub bins: Vec<FitBin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FitError {
    #[error("need at least 2 populated bins, found {0}")]
    InsufficientData(usize),
    #[error("bin count must be positive")]
    ZeroBins,
}

/// Bins samples logarithmically in cost, takes RMS cost and RMS error per bin,
/// and fits a line in log-log space.
///
/// Samples with nonpositive or nonfinite cost are ignored, as are bins whose
/// RMS error is zero.
pub fn bin_and_fit(samples: &[ErrorSample], n_bins: usize) -> Result<FitResult, FitError> {
    if n_bins == 0 {
        return Err(FitError::ZeroBins);
    }
    let usable: Vec<ErrorSample> = samples
        .iter()
        .copied()
        .filter(|s| s.cost > 0.0 && s.cost.is_finite() && s.error.is_finite())
        .collect();
    if usable.is_empty() {
        return Err(FitError::InsufficientData(0));
    }
    let lo = usable.iter().map(|s| s.cost.ln()).fold(f64::INFINITY, f64::min);
    let hi = usable.iter().map(|s| s.cost.ln()).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let mut sum_t2 = alloc::vec![0.0; n_bins];
    let mut sum_e2 = alloc::vec![0.0; n_bins];
    let mut sum_e4 = alloc::vec![0.0; n_bins];
    let mut counts = alloc::vec![0usize; n_bins];
    for s in &usable {
        let idx = if span > 0.0 {
            (((s.cost.ln() - lo) / span * n_bins as f64) as usize).min(n_bins - 1)
        } else {
            0
        };
        sum_t2[idx] += s.cost * s.cost;
        let e2 = s.error * s.error;
        sum_e2[idx] += e2;
        sum_e4[idx] += e2 * e2;
        counts[idx] += 1;
    }

    let mut bins = Vec::new();
    for i in 0..n_bins {
        let n = counts[i];
        if n == 0 || sum_e2[i] == 0.0 {
            continue;
        }
        let nf = n as f64;
        let mse = sum_e2[i] / nf;
        let rms_error = mse.sqrt();
        let var_e2 = (sum_e4[i] / nf - mse * mse).max(0.0);
        bins.push(FitBin {
            rms_t: (sum_t2[i] / nf).sqrt(),
            rms_error,
            stderr: var_e2.sqrt() / (2.0 * rms_error * nf.sqrt()),
            count: n,
        });
    }
    if bins.len() < 2 {
        return Err(FitError::InsufficientData(bins.len()));
    }

    let xs: Vec<f64> = bins.iter().map(|b| b.rms_t.ln()).collect();
    let ys: Vec<f64> = bins.iter().map(|b| b.rms_error.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(FitError::InsufficientData(1));
    }
    let exponent = sxy / sxx;
    Ok(FitResult { exponent, prefactor: (my - exponent * mx).exp(), bins })
}

/// Query strategy compared in [`limits_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Strategy {
    /// `M` shots per basis at `k = 1`.
    Sampling,
    /// `M` shots per basis at each `k = 1..=K`.
    Dense,
    /// `M` shots per basis at `k = K` only.
    SingleK,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LimitRow {
    pub strategy: Strategy,
    pub fisher: f64,
    pub cost: f64,
    /// Cramér-Rao bound `1/√I`.
    pub bound: f64,
    /// Closed-form bound in terms of the cost: `T^{−1/2}`,
    /// `√(3/2)·M^{1/4}·T^{−3/4}` (leading order in `K`), or `√(2M)/T`.
    pub asymptotic: f64,
}

/// `(M/3)·K(K+1)(2K+1)`.
pub fn dense_fisher(k_max: u64, shots: u64) -> f64 {
    // K(K+1)(2K+1) is divisible by 6, so the integer form is exact
    let k = u128::from(k_max);
    (u128::from(shots) * (k * (k + 1) * (2 * k + 1) / 3)) as f64
}

/// Fisher information, cost and bounds for the three strategies.
pub fn limits_report(k_max: u64, shots: u64) -> [LimitRow; 3] {
    let m = shots as f64;
    let k = k_max as f64;

    let sampling_i = fisher_info(&[(1.0, shots, shots)]);
    let sampling_t = 2.0 * m;
    let dense: Vec<(f64, u64, u64)> = (1..=k_max).map(|k| (k as f64, shots, shots)).collect();
    let dense_i = fisher_info(&dense);
    let dense_t = m * k * (k + 1.0);
    let single_i = fisher_info(&[(k, shots, shots)]);
    let single_t = 2.0 * m * k;

    [
        LimitRow {
            strategy: Strategy::Sampling,
            fisher: sampling_i,
            cost: sampling_t,
            bound: 1.0 / sampling_i.sqrt(),
            asymptotic: sampling_t.powf(-0.5),
        },
        LimitRow {
            strategy: Strategy::Dense,
            fisher: dense_i,
            cost: dense_t,
            bound: 1.0 / dense_i.sqrt(),
            asymptotic: (1.5f64).sqrt() * m.powf(0.25) * dense_t.powf(-0.75),
        },
        LimitRow {
            strategy: Strategy::SingleK,
            fisher: single_i,
            cost: single_t,
            bound: 1.0 / single_i.sqrt(),
            asymptotic: (2.0 * m).sqrt() / single_t,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn phases(xs: &[f64]) -> Vec<Phase> {
        xs.iter().map(|&x| Phase::new(x)).collect()
    }

    #[test]
    fn closest_estimate_may_be_shared() {
        let errs = closest_errors(&phases(&[1.0, 1.1, 6.2]), &phases(&[1.05, 0.05]));
        assert_eq!(errs[0].estimate.value(), 1.05);
        assert_eq!(errs[1].estimate.value(), 1.05);
        assert_eq!(errs[2].estimate.value(), 0.05);
        assert!((errs[2].error - (2.0 * PI - 6.15)).abs() < 1e-12);
        assert!(errs.iter().all(|e| e.error <= PI));
        let none = closest_errors(&phases(&[4.0]), &[]);
        assert!((none[0].error - (2.0 * PI - 4.0)).abs() < 1e-12);
    }

    fn power_law(c: f64, p: f64) -> Vec<ErrorSample> {
        (0..400)
            .map(|i| {
                let t = 10f64.powf(2.0 + 6.0 * (i as f64 + 0.5) / 400.0);
                ErrorSample { cost: t, error: c * t.powf(p) }
            })
            .collect()
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        // within one bin the RMS of an exact power law is not on the line, but
        // the offset is the same for every bin when the bins are equal in log
        let fit = bin_and_fit(&power_law(3.0, -1.0), 8).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-6, "{}", fit.exponent);
        let fit = bin_and_fit(&power_law(0.5, -0.5), 8).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-6, "{}", fit.exponent);
    }

    #[test]
    fn single_bin_is_insufficient() {
        let samples = [ErrorSample { cost: 10.0, error: 0.1 }, ErrorSample { cost: 10.0, error: 0.2 }];
        assert_eq!(bin_and_fit(&samples, 5), Err(FitError::InsufficientData(1)));
        assert_eq!(bin_and_fit(&[], 5), Err(FitError::InsufficientData(0)));
        assert_eq!(bin_and_fit(&samples, 0), Err(FitError::ZeroBins));
        let zeros = [ErrorSample { cost: 10.0, error: 0.0 }, ErrorSample { cost: 1e3, error: 0.0 }];
        assert_eq!(bin_and_fit(&zeros, 2), Err(FitError::InsufficientData(0)));
    }

    #[test]
    fn dense_fisher_matches_closed_form() {
        for k in 1..=100u64 {
            for m in [1u64, 7, 1000] {
                let sched: Vec<(f64, u64, u64)> = (1..=k).map(|q| (q as f64, m, m)).collect();
                assert_eq!(fisher_info(&sched), dense_fisher(k, m));
            }
        }
        assert_eq!(dense_fisher(2, 1), 10.0);
    }

    #[test]
    fn limits_table() {
        let rows = limits_report(2, 1);
        assert_eq!((rows[1].fisher, rows[1].cost), (10.0, 6.0));
        assert_eq!(rows[0].fisher, rows[0].cost);
        assert!((rows[0].bound - rows[0].asymptotic).abs() < 1e-15);
        let rows = limits_report(50, 4);
        // single k: I = T²/M_K with M_K = 2M total shots
        assert!((rows[2].fisher - rows[2].cost.powi(2) / 8.0).abs() < 1e-9);
        assert!((rows[2].bound - rows[2].asymptotic).abs() < 1e-15);
        let rows = limits_report(100_000, 3);
        assert!((rows[1].bound / rows[1].asymptotic - 1.0).abs() < 1e-4);
    }
}
