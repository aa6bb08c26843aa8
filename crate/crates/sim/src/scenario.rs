//! Scenario configuration, seeding, single trials and parallel sweeps.

use std::f64::consts::TAU;

use qpe_core::adaptive::{run_adaptive, run_configured, AdaptiveConfig, AdaptiveError, Failure, Subroutine};
use qpe_core::analysis::{closest_errors, PhaseError};
use qpe_core::extract::ExactPhaseExtractor;
use qpe_core::{Phase, SimulatedOracle, Spectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Geometric grid searched when `eps` is left unset in relaxed mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub start: f64,
    pub factor: f64,
    pub min: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration { start: 0.25, factor: 0.9, min: 1e-3 }
    }
}

/// One experiment: equal-weight spectra with `n_phi` random phases, run at
/// each `delta_c` for `seeds` phase sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_phi: usize,
    pub delta_c: Vec<f64>,
    pub subroutine: Subroutine,
    pub seeds: u64,
    pub master_seed: u64,
    pub alpha: f64,
    pub gamma: f64,
    /// Use the guaranteed precisions instead of a calibrated one.
    pub strict_eps: bool,
    /// Fixed relaxed-mode precision; calibrated when absent.
    pub eps: Option<f64>,
    pub kappa_max: Option<f64>,
    /// Amplitude bound; `1/(2 n_phi)` when absent.
    pub a_bound: Option<f64>,
    pub calibration: Calibration,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_phi: 2,
            delta_c: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
            subroutine: Subroutine::Pencil,
            seeds: 50,
            master_seed: 0,
            alpha: 2.0,
            gamma: 2.1,
            strict_eps: false,
            eps: None,
            kappa_max: None,
            a_bound: None,
            calibration: Calibration::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("no precision on the calibration grid down to {min} lets every dry run choose κ > 2")]
    Calibration { min: f64 },
    #[error(transparent)]
    Run(#[from] AdaptiveError),
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if self.n_phi == 0 {
            return bad("n_phi must be at least 1");
        }
        if self.seeds == 0 {
            return bad("seeds must be at least 1");
        }
        if self.delta_c.is_empty() {
            return bad("delta_c list is empty");
        }
        if self.delta_c.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("delta_c values must be positive");
        }
        if self.delta_c.windows(2).any(|w| w[1] >= w[0]) {
            return bad("delta_c values must be strictly descending");
        }
        let c = &self.calibration;
        if !(c.start > 0.0 && c.factor > 0.0 && c.factor < 1.0 && c.min > 0.0 && c.min <= c.start) {
            return bad("calibration grid needs 0 < min ≤ start and 0 < factor < 1");
        }
        Ok(())
    }

    pub fn a_bound(&self) -> f64 {
        self.a_bound.unwrap_or(1.0 / (2.0 * self.n_phi as f64))
    }

    /// Adaptive config for one `delta_c` at relaxed precision `eps`.
    pub fn adaptive(&self, delta_c: f64, eps: f64) -> AdaptiveConfig {
        let mut cfg = if self.strict_eps {
            AdaptiveConfig::strict(delta_c, self.a_bound(), self.n_phi, self.alpha, self.gamma, self.subroutine)
        } else {
            AdaptiveConfig::relaxed(delta_c, self.a_bound(), self.n_phi, eps, self.alpha, self.gamma, self.subroutine)
        };
        cfg.kappa_max = self.kappa_max;
        cfg
    }
}

/// Mixes 64-bit words (splitmix64 finalizer).
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce5_e9b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Phase-set stream for `seed`: independent of `delta_c`, so every target
/// precision sees the same spectra.
pub fn phase_rng(master: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master));
    rng.set_stream(2 * seed);
    rng
}

/// Sampling stream for one `(seed, delta_c)` trial.
pub fn trial_rng(master: u64, seed: u64, delta_c: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master ^ mix(delta_c.to_bits())));
    rng.set_stream(2 * seed + 1);
    rng
}

/// `n_phi` uniform phases with equal weights.
pub fn random_spectrum<R: Rng + ?Sized>(n_phi: usize, rng: &mut R) -> Spectrum {
    loop {
        let phases: Vec<f64> = (0..n_phi).map(|_| rng.random_range(0.0..TAU)).collect();
        if let Ok(spec) = Spectrum::equal_weights(&phases) {
            return spec;
        }
    }
}

/// Result of one `(seed, delta_c)` trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub delta_c: f64,
    pub subroutine: Subroutine,
    pub n_phi: usize,
    pub total_cost: f64,
    pub rows: Vec<PhaseError>,
    pub failure: Failure,
}

pub fn run_trial(cfg: &ScenarioConfig, eps: f64, delta_c: f64, seed: u64) -> Result<TrialRecord, AdaptiveError> {
    let spec = random_spectrum(cfg.n_phi, &mut phase_rng(cfg.master_seed, seed));
    let mut rng = trial_rng(cfg.master_seed, seed, delta_c);
    let mut oracle = SimulatedOracle::new(spec.clone());
    let out = run_configured(&cfg.adaptive(delta_c, eps), &mut oracle, &mut rng)?;
    Ok(TrialRecord {
        seed,
        delta_c,
        subroutine: cfg.subroutine,
        n_phi: cfg.n_phi,
        total_cost: out.total_cost,
        rows: closest_errors(&spec.phases(), &out.final_estimates),
        failure: out.failure,
    })
}

/// Relaxed precision used by a sweep: the configured value, or the calibrated
/// one. Strict mode ignores it.
pub fn sweep_eps(cfg: &ScenarioConfig) -> Result<f64, ScenarioError> {
    if cfg.strict_eps {
        return Ok(qpe_core::adaptive::strict_eps(cfg.n_phi));
    }
    match cfg.eps {
        Some(e) => Ok(e),
        None => calibrate_eps(cfg),
    }
}

/// Largest `ε` on the calibration grid for which noiseless dry runs at every
/// `(delta_c, seed)` complete and choose `κ > 2` at every order.
pub fn calibrate_eps(cfg: &ScenarioConfig) -> Result<f64, ScenarioError> {
    cfg.validate()?;
    let jobs: Vec<(f64, u64)> = cfg
        .delta_c
        .iter()
        .flat_map(|&d| (0..cfg.seeds).map(move |s| (d, s)))
        .collect();
    let mut eps = cfg.calibration.start;
    while eps >= cfg.calibration.min {
        let ok = jobs.par_iter().all(|&(delta_c, seed)| dry_run_ok(cfg, eps, delta_c, seed));
        if ok {
            return Ok(eps);
        }
        eps *= cfg.calibration.factor;
    }
    Err(ScenarioError::Calibration { min: cfg.calibration.min })
}

fn dry_run_ok(cfg: &ScenarioConfig, eps: f64, delta_c: f64, seed: u64) -> bool {
    let spec = random_spectrum(cfg.n_phi, &mut phase_rng(cfg.master_seed, seed));
    let mut oracle = SimulatedOracle::noiseless(spec);
    let mut rng = trial_rng(cfg.master_seed, seed, delta_c);
    let mut acfg = cfg.adaptive(delta_c, eps);
    acfg.strict = false;
    match run_adaptive(&acfg, &mut ExactPhaseExtractor, &mut oracle, &mut rng) {
        Ok(out) => out.failure == Failure::None && out.trace.iter().skip(1).all(|r| r.kappa > 2.0),
        Err(_) => false,
    }
}

/// Picks the precision, then runs every `(delta_c, seed)` trial in parallel.
/// Output is sorted by `(delta_c, seed)`.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<(f64, Vec<TrialRecord>), ScenarioError> {
    cfg.validate()?;
    let eps = sweep_eps(cfg)?;
    Ok((eps, run_sweep_at(cfg, eps)?))
}

/// [`run_sweep`] at a known relaxed precision.
pub fn run_sweep_at(cfg: &ScenarioConfig, eps: f64) -> Result<Vec<TrialRecord>, ScenarioError> {
    cfg.validate()?;
    let jobs: Vec<(f64, u64)> = cfg
        .delta_c
        .iter()
        .flat_map(|&d| (0..cfg.seeds).map(move |s| (d, s)))
        .collect();
    let mut records = jobs
        .par_iter()
        .map(|&(delta_c, seed)| run_trial(cfg, eps, delta_c, seed))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| a.delta_c.total_cmp(&b.delta_c).then(a.seed.cmp(&b.seed)));
    Ok(records)
}

/// Phases of the trial spectrum for `seed`, as used by [`run_trial`].
pub fn trial_phases(cfg: &ScenarioConfig, seed: u64) -> Vec<Phase> {
    random_spectrum(cfg.n_phi, &mut phase_rng(cfg.master_seed, seed)).phases()
}
