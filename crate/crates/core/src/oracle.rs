//! Simulated phase-function oracle.
//!
//! Holds the hidden spectrum `{(φ_j, A_j)}`, evaluates `g(k) = Σ_j A_j e^{ikφ_j}`,
//! draws shot-noise estimates of `g` and charges `2·M·k` per query.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::circle::{Phase, DEFAULT_PHASE_TOL};

/// Allowed deviation of `Σ A_j` from 1.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("spectrum has no lines")]
    Empty,
    #[error("probability {0} must lie in (0, 1]")]
    BadProbability(f64),
    #[error("probabilities sum to {0}, expected 1")]
    BadNormalization(f64),
    #[error("phases {0} and {1} coincide")]
    DuplicatePhase(f64, f64),
    #[error("phase {0} is not finite")]
    NonFinitePhase(f64),
    #[error("shot count must be positive")]
    ZeroShots,
    #[error("query length k = {0} must be finite and nonnegative")]
    BadK(f64),
}

/// One spectral line.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Line {
    pub phase: Phase,
    pub prob: f64,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawSpectrum {
    lines: Vec<Line>,
}

/// Validated spectrum. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawSpectrum"))]
pub struct Spectrum {
    lines: Vec<Line>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawSpectrum> for Spectrum {
    type Error = OracleError;
    fn try_from(raw: RawSpectrum) -> Result<Self, OracleError> {
        Spectrum::new(raw.lines)
    }
}

impl Spectrum {
    pub fn new(lines: Vec<Line>) -> Result<Self, OracleError> {
        if lines.is_empty() {
            return Err(OracleError::Empty);
        }
        let mut sum = 0.0;
        for line in &lines {
            if !line.phase.value().is_finite() {
                return Err(OracleError::NonFinitePhase(line.phase.value()));
            }
            if !(line.prob > 0.0 && line.prob <= 1.0) {
                return Err(OracleError::BadProbability(line.prob));
            }
            sum += line.prob;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(OracleError::BadNormalization(sum));
        }
        for (i, a) in lines.iter().enumerate() {
            for b in &lines[i + 1..] {
                if a.phase.approx_eq(b.phase, DEFAULT_PHASE_TOL) {
                    return Err(OracleError::DuplicatePhase(a.phase.value(), b.phase.value()));
                }
            }
        }
        Ok(Spectrum { lines })
    }

    /// Builds a spectrum from `(phase, prob)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, OracleError> {
        Spectrum::new(
            pairs
                .iter()
                .map(|&(phase, prob)| Line { phase: Phase::new(phase), prob })
                .collect(),
        )
    }

    /// Equal weights `1/n` on the given phases.
    pub fn equal_weights(phases: &[f64]) -> Result<Self, OracleError> {
        let w = 1.0 / phases.len().max(1) as f64;
        let pairs: Vec<(f64, f64)> = phases.iter().map(|&p| (p, w)).collect();
        Spectrum::from_pairs(&pairs)
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn phases(&self) -> Vec<Phase> {
        self.lines.iter().map(|l| l.phase).collect()
    }
}

/// `g(k) = Σ_j A_j e^{ikφ_j}`.
pub fn exact_g(spec: &Spectrum, k: f64) -> Complex64 {
    if k == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    spec.lines
        .iter()
        .map(|l| Complex64::from_polar(l.prob, k * l.phase.value()))
        .sum()
}

/// Every phase mapped to `φ − χ mod 2π`.
pub fn shift_spectrum(spec: &Spectrum, chi: f64) -> Spectrum {
    Spectrum {
        lines: spec
            .lines
            .iter()
            .map(|l| Line { phase: l.phase.rotate(-chi), prob: l.prob })
            .collect(),
    }
}

/// One sampled estimate of `g(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GEstimate {
    pub k: f64,
    pub re: f64,
    pub im: f64,
    pub shots: u64,
}

impl GEstimate {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Binomial sampler settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    /// Above this many shots the count is drawn from a continuity-corrected
    /// normal approximation instead of an exact binomial.
    pub normal_threshold: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { normal_threshold: 1_000_000 }
    }
}

fn binomial_count<R: Rng + ?Sized>(m: u64, p: f64, cfg: &SamplerConfig, rng: &mut R) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return m;
    }
    if m <= cfg.normal_threshold {
        // p is in (0, 1) so construction cannot fail
        return Binomial::new(m, p).map(|b| b.sample(rng)).unwrap_or(0);
    }
    let mean = m as f64 * p;
    let sd = (mean * (1.0 - p)).sqrt();
    let z: f64 = StandardNormal.sample(rng);
    let c = (mean + sd * z + 0.5).floor();
    c.clamp(0.0, m as f64) as u64
}

/// Outcome probabilities `(P^r(+1), P^i(+1))` of the two ancilla bases.
pub fn outcome_probs(spec: &Spectrum, k: f64) -> (f64, f64) {
    let g = exact_g(spec, k);
    let pr = (0.5 * (1.0 + g.re)).clamp(0.0, 1.0);
    let pi = (0.5 * (1.0 - g.im)).clamp(0.0, 1.0);
    (pr, pi)
}

/// Draws `M` shots in each basis and returns `re = 2c_r/M − 1`, `im = 1 − 2c_i/M`.
///
/// Does not charge any ledger; see [`PhaseOracle::sample`].
pub fn sample_g<R: Rng + ?Sized>(
    spec: &Spectrum,
    k: f64,
    shots: u64,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<GEstimate, OracleError> {
    if shots == 0 {
        return Err(OracleError::ZeroShots);
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(OracleError::BadK(k));
    }
    let (pr, pi) = outcome_probs(spec, k);
    let cr = binomial_count(shots, pr, cfg, rng);
    let ci = binomial_count(shots, pi, cfg, rng);
    let m = shots as f64;
    Ok(GEstimate {
        k,
        re: 2.0 * cr as f64 / m - 1.0,
        im: 1.0 - 2.0 * ci as f64 / m,
        shots,
    })
}

/// One charged query.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LedgerEntry {
    pub k: f64,
    pub shots: u64,
    pub cost: f64,
}

/// Running quantum cost `T` in unitary applications.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostLedger {
    total: f64,
    entries: Vec<LedgerEntry>,
}

impl CostLedger {
    pub fn new() -> Self {
        CostLedger::default()
    }

    /// Adds `2·M·k`. Returns the charged amount.
    pub fn charge(&mut self, k: f64, shots: u64) -> f64 {
        let cost = if k == 0.0 { 0.0 } else { 2.0 * shots as f64 * k };
        self.total += cost;
        self.entries.push(LedgerEntry { k, shots, cost });
        cost
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }
}

/// Whether queries return shot-noise estimates or the exact phase function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sampling {
    #[default]
    Shots,
    Exact,
}

/// Handle through which estimators query `g`.
pub trait PhaseOracle {
    /// Estimate of `g(k)` from `shots` repetitions per basis; charges the ledger.
    fn sample<R: Rng + ?Sized>(
        &mut self,
        k: f64,
        shots: u64,
        rng: &mut R,
    ) -> Result<GEstimate, OracleError>;

    /// Rotates the working unitary `U → U e^{−iχ}`.
    fn apply_shift(&mut self, chi: f64);

    fn ledger(&self) -> &CostLedger;

    /// Spectrum of the working unitary, when the oracle is a simulation.
    fn spectrum(&self) -> Option<&Spectrum> {
        None
    }
}

/// Oracle over a known spectrum.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    truth: Spectrum,
    working: Spectrum,
    shift: f64,
    ledger: CostLedger,
    sampler: SamplerConfig,
    mode: Sampling,
}

impl SimulatedOracle {
    pub fn new(spec: Spectrum) -> Self {
        SimulatedOracle {
            working: spec.clone(),
            truth: spec,
            shift: 0.0,
            ledger: CostLedger::new(),
            sampler: SamplerConfig::default(),
            mode: Sampling::Shots,
        }
    }

    /// Oracle that returns `g(k)` exactly while still charging for the shots.
    pub fn noiseless(spec: Spectrum) -> Self {
        SimulatedOracle { mode: Sampling::Exact, ..SimulatedOracle::new(spec) }
    }

    pub fn with_sampler(mut self, sampler: SamplerConfig) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn mode(&self) -> Sampling {
        self.mode
    }

    /// Spectrum before any shift.
    pub fn truth(&self) -> &Spectrum {
        &self.truth
    }

    /// Spectrum of the currently shifted unitary.
    pub fn working(&self) -> &Spectrum {
        &self.working
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn exact(&self, k: f64) -> Complex64 {
        exact_g(&self.working, k)
    }
}

impl PhaseOracle for SimulatedOracle {
    fn sample<R: Rng + ?Sized>(
        &mut self,
        k: f64,
        shots: u64,
        rng: &mut R,
    ) -> Result<GEstimate, OracleError> {
        let est = match self.mode {
            Sampling::Shots => sample_g(&self.working, k, shots, &self.sampler, rng)?,
            Sampling::Exact => {
                if shots == 0 {
                    return Err(OracleError::ZeroShots);
                }
                if !(k.is_finite() && k >= 0.0) {
                    return Err(OracleError::BadK(k));
                }
                let g = self.exact(k);
                GEstimate { k, re: g.re.clamp(-1.0, 1.0), im: g.im.clamp(-1.0, 1.0), shots }
            }
        };
        self.ledger.charge(k, shots);
        Ok(est)
    }

    fn apply_shift(&mut self, chi: f64) {
        self.shift += chi;
        self.working = shift_spectrum(&self.working, chi);
    }

    fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    fn spectrum(&self) -> Option<&Spectrum> {
        Some(&self.working)
    }
}
