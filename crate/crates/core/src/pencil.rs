//! Matrix pencil estimation of a dense phase-function signal.
//!
//! From samples `g(0..=K)` two Hankel matrices `G^{(a)}_{ij} = g(i + j + a − K)`
//! are built; the shift matrix `T` with `T·G^{(0)} ≈ G^{(1)}` has eigenvalues
//! `e^{iφ_j}`, and a Vandermonde fit recovers the weights.

use alloc::vec::Vec;

use faer::Mat;
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::circle::Phase;
use crate::oracle::{GEstimate, OracleError, PhaseOracle};
use crate::qeep::sample_signal;

/// Relative singular-value cutoff for exact input.
pub const RTOL_NOISELESS: f64 = 1e-12;
/// Relative singular-value cutoff for sampled input.
pub const RTOL_NOISY: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PencilError {
    #[error("need samples at k = 0..=K with K >= 1, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} has k = {k}, expected {expected}")]
    MissingIndex { index: usize, k: f64, expected: f64 },
    #[error("signal is identically zero")]
    Degenerate,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("no eigenvalues to fit")]
    NoEigenvalues,
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// `G^{(0)}` and `G^{(1)}`, each `L_K × (2K − L_K + 1)` with `L_K = ⌊(K+1)/2⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPair {
    pub g0: Mat<Complex64>,
    pub g1: Mat<Complex64>,
    pub k_max: usize,
}

impl HankelPair {
    pub fn rows(&self) -> usize {
        self.g0.nrows()
    }
}

/// Full pencil output before thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilEstimate {
    pub lambdas: Vec<Complex64>,
    pub thetas: Vec<Phase>,
    pub amps: Vec<f64>,
    /// Largest `|Im Ã_j|` discarded by taking real parts.
    pub imag_residue: f64,
}

impl PencilEstimate {
    /// Phases whose weight is at least `a_bound`, ascending.
    pub fn select(&self, a_bound: f64) -> Vec<Phase> {
        let mut out: Vec<Phase> = self
            .thetas
            .iter()
            .zip(&self.amps)
            .filter(|&(_, &a)| a >= a_bound)
            .map(|(&t, _)| t)
            .collect();
        out.sort_by(|a, b| a.value().total_cmp(&b.value()));
        out
    }
}

/// Checks that samples sit at `k = 0, k₁, 2k₁, …` and returns their values.
pub fn contiguous_values(samples: &[GEstimate]) -> Result<Vec<Complex64>, PencilError> {
    if samples.len() < 2 {
        return Err(PencilError::TooFewSamples(samples.len()));
    }
    let step = samples[1].k;
    for (i, s) in samples.iter().enumerate() {
        let expected = step * i as f64;
        if (s.k - expected).abs() > 1e-9 * expected.abs().max(1.0) || step <= 0.0 {
            return Err(PencilError::MissingIndex { index: i, k: s.k, expected });
        }
    }
    Ok(samples.iter().map(GEstimate::value).collect())
}

/// Hankel pair from `g(0..=K)`, completing negative indices by `g(−k) = g(k)*`.
pub fn build_hankel(samples: &[GEstimate]) -> Result<HankelPair, PencilError> {
    let g = contiguous_values(samples)?;
    Ok(hankel_from_values(&g))
}

/// As [`build_hankel`] on raw values `g(0..=K)`; `g.len()` must be at least 2.
pub fn hankel_from_values(g: &[Complex64]) -> HankelPair {
    let k_max = g.len() - 1;
    let rows = g.len() / 2;
    let cols = 2 * k_max - rows + 1;
    let at = |n: isize| -> Complex64 {
        if n >= 0 {
            g[n as usize]
        } else {
            g[(-n) as usize].conj()
        }
    };
    let k = k_max as isize;
    let g0 = Mat::from_fn(rows, cols, |i, j| at(i as isize + j as isize - k));
    let g1 = Mat::from_fn(rows, cols, |i, j| at(i as isize + j as isize + 1 - k));
    HankelPair { g0, g1, k_max }
}

/// Minimum-norm least-squares pseudoinverse with relative cutoff `rtol·σ_max`.
fn pinv(m: &Mat<Complex64>, rtol: f64) -> Result<Mat<Complex64>, PencilError> {
    let svd = m.thin_svd().map_err(|_| PencilError::NoConvergence)?;
    let sigma = svd.S().column_vector();
    let smax = (0..sigma.nrows()).map(|i| sigma[i].re).fold(0.0, f64::max);
    if smax == 0.0 || !smax.is_finite() {
        return Err(PencilError::Degenerate);
    }
    let cut = rtol * smax;
    let v = svd.V();
    let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| {
        let s = sigma[j].re;
        if s > cut {
            v[(i, j)] / s
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(&scaled * svd.U().adjoint())
}

/// `T = G^{(1)}·pinv(G^{(0)})`.
pub fn solve_shift(pair: &HankelPair, rtol: f64) -> Result<Mat<Complex64>, PencilError> {
    Ok(&pair.g1 * pinv(&pair.g0, rtol)?)
}

/// Eigenvalues of a general complex matrix.
pub fn eigenvalues(m: &Mat<Complex64>) -> Result<Vec<Complex64>, PencilError> {
    if m.nrows() == 1 {
        return Ok(alloc::vec![m[(0, 0)]]);
    }
    m.eigenvalues().map_err(|_| PencilError::NoConvergence)
}

/// Least-squares weights for `g(k) ≈ Σ_j A_j λ_j^k`, `k = 0..=K`.
///
/// Returns the real parts and the largest discarded imaginary part.
pub fn fit_amplitudes(
    lambdas: &[Complex64],
    g: &[Complex64],
    rtol: f64,
) -> Result<(Vec<f64>, f64), PencilError> {
    if lambdas.is_empty() {
        return Err(PencilError::NoEigenvalues);
    }
    let b = Mat::from_fn(g.len(), lambdas.len(), |k, j| lambdas[j].powu(k as u32));
    let rhs = Mat::from_fn(g.len(), 1, |k, _| g[k]);
    let sol = pinv(&b, rtol)? * rhs;
    let amps: Vec<Complex64> = (0..sol.nrows()).map(|j| sol[(j, 0)]).collect();
    let residue = amps.iter().map(|a| a.im.abs()).fold(0.0, f64::max);
    Ok((amps.iter().map(|a| a.re).collect(), residue))
}

/// Runs the pencil pipeline on `g(0..=K)`.
pub fn pencil_from_values(g: &[Complex64], rtol: f64) -> Result<PencilEstimate, PencilError> {
    if g.len() < 2 {
        return Err(PencilError::TooFewSamples(g.len()));
    }
    let pair = hankel_from_values(g);
    let shift = solve_shift(&pair, rtol)?;
    let lambdas = eigenvalues(&shift)?;
    let (amps, imag_residue) = fit_amplitudes(&lambdas, g, rtol)?;
    let thetas = lambdas.iter().map(|l| Phase::new(l.arg())).collect();
    Ok(PencilEstimate { lambdas, thetas, amps, imag_residue })
}

/// Samples `g̃(k_d·k)` for `k = 0..=K` and returns the phases with `Ã_j ≥ A`.
#[allow(clippy::too_many_arguments)]
pub fn pencil_extract<O: PhaseOracle, R: Rng + ?Sized>(
    oracle: &mut O,
    k_d: f64,
    k_max: usize,
    shots: u64,
    a_bound: f64,
    rtol: f64,
    rng: &mut R,
) -> Result<Vec<Phase>, PencilError> {
    if k_max < 1 {
        return Err(PencilError::TooFewSamples(k_max + 1));
    }
    let samples = sample_signal(oracle, k_d, k_max, shots, rng)?;
    let g: Vec<Complex64> = samples.iter().map(GEstimate::value).collect();
    Ok(pencil_from_values(&g, rtol)?.select(a_bound))
}
