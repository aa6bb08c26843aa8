//! Fixed-order phase extraction subroutines used by the adaptive scheme.
//!
//! Each extractor estimates the eigenphases of `U^{k_d}` to error `ε` with
//! confidence `p_d`, querying the oracle at `k_d·k` for `k = 0..=K`.

use alloc::vec::Vec;

use rand::Rng;

use crate::circle::Phase;
use crate::oracle::{OracleError, PhaseOracle};
use crate::pencil::{pencil_extract, PencilError, RTOL_NOISY};
use crate::qeep::{conservative_extract, estimate_bins, exact_bins, shot_plan_for_failure, BumpBasis, QeepError, ShotPlan};

/// Parameters of one extraction at order `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractRequest {
    pub order: usize,
    pub k_d: f64,
    pub eps: f64,
    pub a_bound: f64,
    /// Allowed failure probability `1 − p_d`.
    pub failure: f64,
}

/// Estimates of the phases `θ_l` of `U^{k_d}` and the plan that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub thetas: Vec<Phase>,
    pub plan: ShotPlan,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    /// The subroutine produced no usable estimate; the caller treats this as
    /// an empty estimate set.
    #[error("subroutine failed: {0}")]
    Failed(&'static str),
    #[error("invalid request: {0}")]
    Config(QeepError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

fn from_qeep(e: QeepError) -> ExtractError {
    match e {
        QeepError::NoGap => ExtractError::Failed("no bin below threshold"),
        QeepError::Oracle(o) => ExtractError::Oracle(o),
        other => ExtractError::Config(other),
    }
}

fn from_pencil(e: PencilError) -> ExtractError {
    match e {
        PencilError::Oracle(o) => ExtractError::Oracle(o),
        PencilError::Degenerate => ExtractError::Failed("degenerate signal"),
        PencilError::NoConvergence => ExtractError::Failed("eigenvalues did not converge"),
        _ => ExtractError::Failed("pencil input rejected"),
    }
}

pub trait PhaseExtractor {
    fn extract<O: PhaseOracle, R: Rng + ?Sized>(
        &mut self,
        oracle: &mut O,
        req: &ExtractRequest,
        rng: &mut R,
    ) -> Result<Extraction, ExtractError>;
}

impl<E: PhaseExtractor + ?Sized> PhaseExtractor for &mut E {
    fn extract<O: PhaseOracle, R: Rng + ?Sized>(
        &mut self,
        oracle: &mut O,
        req: &ExtractRequest,
        rng: &mut R,
    ) -> Result<Extraction, ExtractError> {
        (**self).extract(oracle, req, rng)
    }
}

fn cached_basis(cache: &mut Option<BumpBasis>, eps: f64, k_max: usize) -> Result<&BumpBasis, ExtractError> {
    let stale = match cache {
        Some(b) => b.epsilon() != eps || b.k_max() != k_max,
        None => true,
    };
    if stale {
        *cache = Some(BumpBasis::new(eps, k_max).map_err(from_qeep)?);
    }
    Ok(cache.as_ref().expect("basis was just built"))
}

/// Bump-basis bin weights followed by conservative extraction.
#[derive(Debug, Clone, Default)]
pub struct QeepExtractor {
    basis: Option<BumpBasis>,
}

impl QeepExtractor {
    pub fn new() -> Self {
        QeepExtractor::default()
    }

    /// Reuses a prebuilt basis when its `(ε, K)` matches the request.
    pub fn with_basis(basis: BumpBasis) -> Self {
        QeepExtractor { basis: Some(basis) }
    }
}

impl PhaseExtractor for QeepExtractor {
    fn extract<O: PhaseOracle, R: Rng + ?Sized>(
        &mut self,
        oracle: &mut O,
        req: &ExtractRequest,
        rng: &mut R,
    ) -> Result<Extraction, ExtractError> {
        let plan = shot_plan_for_failure(req.eps, req.failure).map_err(from_qeep)?;
        let basis = cached_basis(&mut self.basis, req.eps, plan.k_max)?;
        let bins = estimate_bins(oracle, req.k_d, basis, plan.shots, rng).map_err(from_qeep)?;
        let thetas = conservative_extract(&bins, req.a_bound).map_err(from_qeep)?;
        Ok(Extraction { thetas, plan })
    }
}

/// Matrix pencil on the planned signal length and shot count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilExtractor {
    pub rtol: f64,
}

impl Default for PencilExtractor {
    fn default() -> Self {
        PencilExtractor { rtol: RTOL_NOISY }
    }
}

impl PhaseExtractor for PencilExtractor {
    fn extract<O: PhaseOracle, R: Rng + ?Sized>(
        &mut self,
        oracle: &mut O,
        req: &ExtractRequest,
        rng: &mut R,
    ) -> Result<Extraction, ExtractError> {
        let plan = shot_plan_for_failure(req.eps, req.failure).map_err(from_qeep)?;
        let thetas = pencil_extract(
            oracle,
            req.k_d,
            plan.k_max.max(1),
            plan.shots,
            req.a_bound,
            self.rtol,
            rng,
        )
        .map_err(from_pencil)?;
        Ok(Extraction { thetas, plan })
    }
}

/// Conservative extraction on exact bin weights `b_l = Σ_j A_j f^l(k_dφ_j)`.
///
/// Needs an oracle that exposes its spectrum. Nothing is sampled and nothing is
/// charged; the reported plan is the one a sampling extractor would use.
#[derive(Debug, Clone, Default)]
pub struct ExactBinExtractor {
    basis: Option<BumpBasis>,
}

impl ExactBinExtractor {
    pub fn new() -> Self {
        ExactBinExtractor::default()
    }
}

impl PhaseExtractor for ExactBinExtractor {
    fn extract<O: PhaseOracle, R: Rng + ?Sized>(
        &mut self,
        oracle: &mut O,
        req: &ExtractRequest,
        _rng: &mut R,
    ) -> Result<Extraction, ExtractError> {
        let plan = shot_plan_for_failure(req.eps, req.failure).map_err(from_qeep)?;
        let spec = oracle.spectrum().ok_or(ExtractError::Failed("oracle spectrum is hidden"))?;
        // the Fourier table is never used here
        let basis = cached_basis(&mut self.basis, req.eps, 0)?;
        let bins = exact_bins(basis, spec, req.k_d);
        let thetas = conservative_extract(&bins, req.a_bound).map_err(from_qeep)?;
        Ok(Extraction { thetas, plan })
    }
}

/// Returns `k_d·φ_j mod 2π` for every line with `A_j ≥ A`, as an ideal subroutine.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactPhaseExtractor;

impl PhaseExtractor for ExactPhaseExtractor {
    fn extract<O: PhaseOracle, R: Rng + ?Sized>(
        &mut self,
        oracle: &mut O,
        req: &ExtractRequest,
        _rng: &mut R,
    ) -> Result<Extraction, ExtractError> {
        let plan = shot_plan_for_failure(req.eps, req.failure).map_err(from_qeep)?;
        let spec = oracle.spectrum().ok_or(ExtractError::Failed("oracle spectrum is hidden"))?;
        let mut thetas: Vec<Phase> = spec
            .lines()
            .iter()
            .filter(|l| l.prob >= req.a_bound)
            .map(|l| Phase::new(req.k_d * l.phase.value()))
            .collect();
        thetas.sort_by(|a, b| a.value().total_cmp(&b.value()));
        Ok(Extraction { thetas, plan })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::wrap_dist;
    use crate::oracle::{SimulatedOracle, Spectrum};
    use crate::pencil::RTOL_NOISELESS;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn req(k_d: f64, eps: f64) -> ExtractRequest {
        ExtractRequest { order: 1, k_d, eps, a_bound: 0.25, failure: 0.1 }
    }

    #[test]
    fn extractors_agree_on_a_clean_spectrum() {
        let spec = Spectrum::equal_weights(&[1.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let r = req(3.0, 0.1);
        let truth: Vec<f64> = [1.0f64, 3.0].iter().map(|p| Phase::new(3.0 * p).value()).collect();

        let mut oracle = SimulatedOracle::noiseless(spec.clone());
        let exact = ExactPhaseExtractor.extract(&mut oracle, &r, &mut rng).unwrap();
        let mut oracle = SimulatedOracle::noiseless(spec.clone());
        let pencil = PencilExtractor { rtol: RTOL_NOISELESS }.extract(&mut oracle, &r, &mut rng).unwrap();
        let mut oracle = SimulatedOracle::new(spec.clone());
        let qeep = QeepExtractor::new().extract(&mut oracle, &r, &mut rng).unwrap();
        let mut oracle = SimulatedOracle::new(spec);
        let bins = ExactBinExtractor::new().extract(&mut oracle, &r, &mut rng).unwrap();
        assert_eq!(oracle.ledger().total(), 0.0);

        for t in truth {
            assert!(exact.thetas.iter().any(|e| wrap_dist(e.value() - t) < 1e-12));
            assert!(pencil.thetas.iter().any(|e| wrap_dist(e.value() - t) < 1e-9));
            assert!(qeep.thetas.iter().any(|e| wrap_dist(e.value() - t) <= 0.2));
            assert!(bins.thetas.iter().any(|e| wrap_dist(e.value() - t) <= 0.2));
        }
        assert!(qeep.thetas.len() <= 2 && bins.thetas.len() <= 2);
    }

    #[test]
    fn qeep_extractor_charges_the_plan() {
        let spec = Spectrum::equal_weights(&[0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut oracle = SimulatedOracle::new(spec);
        let r = req(2.0, 0.3);
        let out = QeepExtractor::new().extract(&mut oracle, &r, &mut rng).unwrap();
        let k = out.plan.k_max as f64;
        let want = 2.0 * out.plan.shots as f64 * 2.0 * k * (k + 1.0) / 2.0;
        assert_eq!(oracle.ledger().total(), want);
    }
}
