//! Adaptive multi-phase estimation.
//!
//! A first round at `k = 1` locates the phases to `ε₀` and picks a frame shift.
//! Each later round multiplies the query length by an admissible `κ_d`, runs a
//! fixed-order subroutine at `k_d`, and lifts its output back onto the circle
//! using the previous estimates. The loop stops once `k_d ≥ 2ε/δ_c`.

mod matching;
mod multiplier;
mod single;

pub use matching::{choose_shift, lift, match_orders, window_bounds, MatchOutcome, ShiftChoice};
pub use multiplier::{
    choose_multiplier, forbidden_regions, forbidden_union, is_admissible, pair_admissible, Interval,
    KappaRange, NoAdmissibleMultiplier, SCAN_MARGIN,
};
pub use single::{
    cramer_rao, final_order, fisher_info, heisenberg_floor, run_single, shots_at, SingleConfig,
    SingleResult,
};

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::circle::Phase;
use crate::extract::{
    ExactBinExtractor, ExactPhaseExtractor, ExtractError, ExtractRequest, PencilExtractor,
    PhaseExtractor, QeepExtractor,
};
use crate::oracle::{OracleError, PhaseOracle};

/// Fixed-order subroutine used inside the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Subroutine {
    Qeep,
    Pencil,
    /// Conservative extraction on exact bin weights; no sampling.
    ExactBins,
    /// Returns the true `k_d φ_j`; no sampling.
    ExactPhases,
}

impl Subroutine {
    pub fn name(self) -> &'static str {
        match self {
            Subroutine::Qeep => "qeep",
            Subroutine::Pencil => "pencil",
            Subroutine::ExactBins => "exact_bins",
            Subroutine::ExactPhases => "exact_phases",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("target precision {0} must lie in (0, π)")]
    BadDelta(f64),
    #[error("amplitude bound {0} must lie in (0, 1]")]
    BadAmplitude(f64),
    #[error("n_phi must be positive")]
    ZeroPhases,
    #[error("epsilon {0} must lie in (0, π/6)")]
    BadEpsilon(f64),
    #[error("first-round epsilon {eps0} exceeds epsilon {eps}")]
    EpsilonOrder { eps0: f64, eps: f64 },
    #[error("need alpha > 0 and gamma > 2, got {alpha} and {gamma}")]
    BadSchedule { alpha: f64, gamma: f64 },
    #[error("kappa_max {0} must be at least 2")]
    BadKappaMax(f64),
    #[error("confidence at k = {k} is {p}, not positive")]
    Confidence { k: f64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdaptiveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("subroutine rejected its request: {0}")]
    Subroutine(ExtractError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Parameters of one adaptive run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdaptiveConfig {
    /// Target precision `δ_c`.
    pub delta_c: f64,
    /// Amplitude bound `A`: only lines with `A_j ≥ A` are sought.
    pub a_bound: f64,
    /// Upper bound on the number of phases.
    pub n_phi: usize,
    /// Subroutine precision for the first round.
    pub eps0: f64,
    /// Subroutine precision for later rounds.
    pub eps: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// Strict mode keeps later `κ_d ∈ [2, 3]`; relaxed mode searches up to
    /// `kappa_max` or `π/(2ε) − 1`.
    pub strict: bool,
    pub kappa_max: Option<f64>,
    pub subroutine: Subroutine,
}

/// `2π/(300 n_φ⁴)`, the largest first-round precision with guaranteed separation.
pub fn strict_eps0(n_phi: usize) -> f64 {
    TAU / (300.0 * (n_phi as f64).powi(4))
}

/// `2π/(300 n_φ²)`, the largest later-round precision with guaranteed separation.
pub fn strict_eps(n_phi: usize) -> f64 {
    TAU / (300.0 * (n_phi as f64).powi(2))
}

impl AdaptiveConfig {
    /// Strict mode with the largest precisions that keep the guarantees.
    pub fn strict(delta_c: f64, a_bound: f64, n_phi: usize, alpha: f64, gamma: f64, subroutine: Subroutine) -> Self {
        AdaptiveConfig {
            delta_c,
            a_bound,
            n_phi,
            eps0: strict_eps0(n_phi),
            eps: strict_eps(n_phi),
            alpha,
            gamma,
            strict: true,
            kappa_max: None,
            subroutine,
        }
    }

    /// Relaxed mode with a single precision `ε` for every round.
    pub fn relaxed(delta_c: f64, a_bound: f64, n_phi: usize, eps: f64, alpha: f64, gamma: f64, subroutine: Subroutine) -> Self {
        AdaptiveConfig {
            delta_c,
            a_bound,
            n_phi,
            eps0: eps,
            eps,
            alpha,
            gamma,
            strict: false,
            kappa_max: None,
            subroutine,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.delta_c > 0.0 && self.delta_c < PI) {
            return Err(ConfigError::BadDelta(self.delta_c));
        }
        if !(self.a_bound > 0.0 && self.a_bound <= 1.0) {
            return Err(ConfigError::BadAmplitude(self.a_bound));
        }
        if self.n_phi == 0 {
            return Err(ConfigError::ZeroPhases);
        }
        for e in [self.eps0, self.eps] {
            if !(e > 0.0 && e < PI / 6.0) {
                return Err(ConfigError::BadEpsilon(e));
            }
        }
        if self.eps0 > self.eps {
            return Err(ConfigError::EpsilonOrder { eps0: self.eps0, eps: self.eps });
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.gamma > 2.0 && self.gamma.is_finite()) {
            return Err(ConfigError::BadSchedule { alpha: self.alpha, gamma: self.gamma });
        }
        if let Some(k) = self.kappa_max {
            if !(k >= 2.0 && k.is_finite()) {
                return Err(ConfigError::BadKappaMax(k));
            }
        }
        Ok(())
    }

    /// Search range for `κ`: `[3n_φ, 3n_φ + 1]` after the first round in
    /// either mode; later rounds use `[2, 3]` in strict mode and
    /// `[2, kappa_max]` (default `π/(2ε) − 1`) otherwise.
    pub fn kappa_range(&self, first: bool) -> KappaRange {
        let three_n = 3.0 * self.n_phi as f64;
        if first {
            return KappaRange { lo: three_n, hi: three_n + 1.0 };
        }
        if self.strict {
            return KappaRange { lo: 2.0, hi: 3.0 };
        }
        let cap = self.kappa_max.unwrap_or(PI / (2.0 * self.eps) - 1.0).max(2.0);
        KappaRange { lo: 2.0, hi: cap }
    }

    /// Confidence `p_d` at query length `k`.
    pub fn confidence(&self, k: f64) -> Result<f64, ConfigError> {
        let q = self.failure_probability(k)?;
        Ok(1.0 - q)
    }

    /// `1 − p_d = e^{−α}(k δ_c/π)^γ`.
    pub fn failure_probability(&self, k: f64) -> Result<f64, ConfigError> {
        let q = (-self.alpha).exp() * (k * self.delta_c / PI).powf(self.gamma);
        if !(q > 0.0 && q < 1.0) {
            return Err(ConfigError::Confidence { k, p: 1.0 - q });
        }
        Ok(q)
    }

    /// Query length that ends the loop, `2ε/δ_c`.
    pub fn stop_length(&self) -> f64 {
        2.0 * self.eps / self.delta_c
    }
}

/// Why an adaptive run stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Failure {
    #[default]
    None,
    /// First round returned nothing or more than `n_φ` estimates.
    Step1EmptyOrOverfull,
    /// An estimate had no partner across orders.
    StepCMismatch,
    /// A lifted estimate left the order window.
    StepEWindow,
    /// No multiplier in range satisfied the separation conditions.
    NoAdmissibleMultiplier,
}

impl Failure {
    pub fn name(self) -> &'static str {
        match self {
            Failure::None => "none",
            Failure::Step1EmptyOrOverfull => "step1_empty_or_overfull",
            Failure::StepCMismatch => "step_c_mismatch",
            Failure::StepEWindow => "step_e_window",
            Failure::NoAdmissibleMultiplier => "no_admissible_multiplier",
        }
    }
}

/// One round of the loop.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundRecord {
    pub d: usize,
    pub k_d: f64,
    /// `κ_d = k_d/k_{d−1}`; 1 for the first round.
    pub kappa: f64,
    pub p_d: f64,
    /// Shots per basis at each query.
    #[cfg_attr(feature = "serde", serde(rename = "M_d"))]
    pub shots: u64,
    /// Signal length `K`.
    #[cfg_attr(feature = "serde", serde(rename = "K"))]
    pub k_max: usize,
    /// Raw subroutine output `θ_l`.
    pub thetas: Vec<Phase>,
    /// Estimates in the working frame after this round.
    pub estimates: Vec<Phase>,
    pub cost_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunResult {
    /// Estimates in the original frame.
    pub final_estimates: Vec<Phase>,
    pub total_cost: f64,
    pub failure: Failure,
    /// Last completed order.
    pub d_f: usize,
    /// Query length of the last completed order.
    pub k_final: f64,
    pub shift: Option<ShiftChoice>,
    pub trace: Vec<RoundRecord>,
}

fn extract_or_empty<E: PhaseExtractor, O: PhaseOracle, R: Rng + ?Sized>(
    extractor: &mut E,
    oracle: &mut O,
    req: &ExtractRequest,
    rng: &mut R,
) -> Result<(Vec<Phase>, u64, usize), AdaptiveError> {
    match extractor.extract(oracle, req, rng) {
        Ok(ex) => Ok((ex.thetas, ex.plan.shots, ex.plan.k_max)),
        Err(ExtractError::Failed(_)) => {
            let plan = crate::qeep::shot_plan_for_failure(req.eps, req.failure)
                .map_err(|e| AdaptiveError::Subroutine(ExtractError::Config(e)))?;
            Ok((Vec::new(), plan.shots, plan.k_max))
        }
        Err(ExtractError::Oracle(e)) => Err(AdaptiveError::Oracle(e)),
        Err(e) => Err(AdaptiveError::Subroutine(e)),
    }
}

fn to_frame(estimates: &[Phase], chi: f64) -> Vec<Phase> {
    let mut out: Vec<Phase> = estimates.iter().map(|p| p.rotate(chi)).collect();
    out.sort_by(|a, b| a.value().total_cmp(&b.value()));
    out
}

/// Runs the adaptive scheme with an explicit extractor.
pub fn run_adaptive<E, O, R>(
    cfg: &AdaptiveConfig,
    extractor: &mut E,
    oracle: &mut O,
    rng: &mut R,
) -> Result<RunResult, AdaptiveError>
where
    E: PhaseExtractor,
    O: PhaseOracle,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let mut trace = Vec::new();

    let q0 = cfg.failure_probability(1.0)?;
    let req0 = ExtractRequest { order: 0, k_d: 1.0, eps: cfg.eps0, a_bound: cfg.a_bound, failure: q0 };
    let (thetas0, shots0, k_max0) = extract_or_empty(extractor, oracle, &req0, rng)?;
    let mut record = RoundRecord {
        d: 0,
        k_d: 1.0,
        kappa: 1.0,
        p_d: 1.0 - q0,
        shots: shots0,
        k_max: k_max0,
        thetas: thetas0.clone(),
        estimates: thetas0.clone(),
        cost_so_far: oracle.ledger().total(),
    };
    let finish = |estimates: Vec<Phase>, failure, d_f, k_final, shift, trace, oracle: &O| RunResult {
        final_estimates: estimates,
        total_cost: oracle.ledger().total(),
        failure,
        d_f,
        k_final,
        shift,
        trace,
    };

    let shift = match choose_shift(&thetas0, cfg.eps0) {
        Some(s) if thetas0.len() <= cfg.n_phi => s,
        _ => {
            trace.push(record);
            return Ok(finish(alloc::vec![Phase::ZERO], Failure::Step1EmptyOrOverfull, 0, 1.0, None, trace, oracle));
        }
    };
    oracle.apply_shift(shift.chi);
    let chi = shift.chi;
    let mut current = to_frame(&thetas0, -chi);
    record.estimates = current.clone();
    trace.push(record);

    let target = cfg.stop_length();
    let mut k_prev = 1.0;
    let mut d = 0;
    let mut kappa = 0.0;
    if k_prev < target {
        match choose_multiplier(&current, 1.0, cfg.eps0, cfg.kappa_range(true)) {
            Ok(k) => kappa = k,
            Err(_) => {
                let est = to_frame(&current, chi);
                return Ok(finish(est, Failure::NoAdmissibleMultiplier, 0, 1.0, Some(shift), trace, oracle));
            }
        }
    }

    while k_prev < target {
        d += 1;
        let k_d = k_prev * kappa;
        let q = cfg.failure_probability(k_d)?;
        let req = ExtractRequest { order: d, k_d, eps: cfg.eps, a_bound: cfg.a_bound, failure: q };
        let (thetas, shots, k_max) = extract_or_empty(extractor, oracle, &req, rng)?;
        let outcome = match_orders(&current, &thetas, k_d, kappa, cfg.eps, cfg.n_phi);
        let mut record = RoundRecord {
            d,
            k_d,
            kappa,
            p_d: 1.0 - q,
            shots,
            k_max,
            thetas,
            estimates: Vec::new(),
            cost_so_far: oracle.ledger().total(),
        };
        match outcome {
            MatchOutcome::Failed(kind) => {
                record.estimates = current.clone();
                trace.push(record);
                let est = to_frame(&current, chi);
                return Ok(finish(est, kind, d - 1, k_prev, Some(shift), trace, oracle));
            }
            MatchOutcome::Matched(next) => {
                record.estimates = next.clone();
                trace.push(record);
                current = next;
            }
        }
        k_prev = k_d;
        if k_prev < target {
            match choose_multiplier(&current, k_prev, cfg.eps, cfg.kappa_range(false)) {
                Ok(k) => kappa = k,
                Err(_) => {
                    let est = to_frame(&current, chi);
                    return Ok(finish(est, Failure::NoAdmissibleMultiplier, d, k_prev, Some(shift), trace, oracle));
                }
            }
        }
    }

    let est = to_frame(&current, chi);
    Ok(finish(est, Failure::None, d, k_prev, Some(shift), trace, oracle))
}

/// Runs the adaptive scheme with the subroutine named in the config.
pub fn run_configured<O: PhaseOracle, R: Rng + ?Sized>(
    cfg: &AdaptiveConfig,
    oracle: &mut O,
    rng: &mut R,
) -> Result<RunResult, AdaptiveError> {
    match cfg.subroutine {
        Subroutine::Qeep => run_adaptive(cfg, &mut QeepExtractor::new(), oracle, rng),
        Subroutine::Pencil => run_adaptive(cfg, &mut PencilExtractor::default(), oracle, rng),
        Subroutine::ExactBins => run_adaptive(cfg, &mut ExactBinExtractor::new(), oracle, rng),
        Subroutine::ExactPhases => run_adaptive(cfg, &mut ExactPhaseExtractor, oracle, rng),
    }
}
