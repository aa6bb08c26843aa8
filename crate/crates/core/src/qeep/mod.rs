//! Time-series eigenvalue estimation on overlapping bins.
//!
//! The circle is cut into `L = ⌈2π/ε⌉` bins of width `w = 2π/L ≤ ε`. Bin `l`
//! carries a smooth bump `f^l` supported on `[(l−1)w, (l+1)w]`; neighbouring
//! bumps sum to one on their overlap. Bin weights `b_l = Σ_j A_j f^l(φ_j)` are
//! recovered from `g(k)` through the Fourier series of `f^l`.

pub mod quad;

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::circle::{signed_wrap, BinIndex, Phase};
use crate::oracle::{GEstimate, OracleError, PhaseOracle, Spectrum};
use quad::{bump_normalization, psi, psi_integral, MIDPOINT_NODES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QeepError {
    #[error("epsilon {0} must lie in (0, 2π)")]
    BadEpsilon(f64),
    #[error("confidence {0} must lie in (0, 1)")]
    BadConfidence(f64),
    #[error("frequency {k} exceeds signal length {max}")]
    FrequencyOutOfRange { k: i64, max: usize },
    #[error("every bin is above threshold")]
    NoGap,
    #[error("expected samples at k = 0..={expected}, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Signal length and shots derived from `ε` and a confidence `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShotPlan {
    pub bins: usize,
    pub k_max: usize,
    pub shots: u64,
}

fn bin_count(eps: f64) -> Result<usize, QeepError> {
    if !(eps > 0.0 && eps < TAU) {
        return Err(QeepError::BadEpsilon(eps));
    }
    Ok((TAU / eps).ceil() as usize)
}

/// `L = ⌈2π/ε⌉`, `K = ⌈0.1·L·ln²L⌉`, `M = ⌈|ln(1−p)|·ε⁻⁴⌉`.
pub fn shot_plan(eps: f64, p: f64) -> Result<ShotPlan, QeepError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QeepError::BadConfidence(p));
    }
    plan_with_log(eps, (-p).ln_1p().abs())
}

/// Same plan from the failure probability `q = 1 − p`, which stays exact when
/// `p` rounds to 1.
pub fn shot_plan_for_failure(eps: f64, q: f64) -> Result<ShotPlan, QeepError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(QeepError::BadConfidence(1.0 - q));
    }
    plan_with_log(eps, q.ln().abs())
}

fn plan_with_log(eps: f64, log_q: f64) -> Result<ShotPlan, QeepError> {
    let bins = bin_count(eps)?;
    Ok(ShotPlan {
        bins,
        k_max: signal_length(bins),
        shots: (log_q * eps.powi(-4)).ceil().max(1.0) as u64,
    })
}

/// `K = ⌈0.1·L·ln²L⌉`, at least 1.
pub fn signal_length(bins: usize) -> usize {
    let l = bins as f64;
    ((0.1 * l * l.ln().powi(2)).ceil() as usize).max(1)
}

/// Bump functions on `L` bins with a cached Fourier table up to `|k| ≤ K`.
#[derive(Debug, Clone)]
pub struct BumpBasis {
    epsilon: f64,
    width: f64,
    bins: usize,
    k_max: usize,
    a: f64,
    /// `f̃^0(k)` for `k = 0..=K`; real and even.
    coeffs: Vec<f64>,
}

impl BumpBasis {
    pub fn new(epsilon: f64, k_max: usize) -> Result<Self, QeepError> {
        let bins = bin_count(epsilon)?;
        let width = TAU / bins as f64;
        let a = bump_normalization();
        let coeffs = fourier_table(width, a, k_max);
        Ok(BumpBasis { epsilon, width, bins, k_max, a, coeffs })
    }

    /// Basis sized by [`shot_plan`] for `ε`.
    pub fn for_epsilon(epsilon: f64) -> Result<Self, QeepError> {
        let bins = bin_count(epsilon)?;
        BumpBasis::new(epsilon, signal_length(bins))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Actual bin width `2π/L`.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn normalization(&self) -> f64 {
        self.a
    }

    pub fn center(&self, l: usize) -> Phase {
        Phase::new(l as f64 * self.width)
    }

    pub fn bin(&self, l: usize) -> Option<BinIndex> {
        BinIndex::new(l, self.bins).ok()
    }

    /// `f^l(φ)`, computed by adaptive quadrature of the kernel.
    pub fn value(&self, l: usize, phi: Phase) -> f64 {
        let x = 2.0 * signed_wrap(phi.value() - l as f64 * self.width) / self.width;
        if x.abs() >= 2.0 {
            return 0.0;
        }
        self.a * psi_integral(x - 1.0, x + 1.0)
    }

    /// `f̃^l(k) = f̃^0(|k|)·e^{−iklw}`.
    pub fn fourier(&self, l: usize, k: i64) -> Result<Complex64, QeepError> {
        let idx = k.unsigned_abs() as usize;
        if idx > self.k_max {
            return Err(QeepError::FrequencyOutOfRange { k, max: self.k_max });
        }
        Ok(Complex64::from_polar(self.coeffs[idx], -(k as f64) * l as f64 * self.width))
    }

    /// `f̃^0(k)` for `k = 0..=K`.
    pub fn base_coefficients(&self) -> &[f64] {
        &self.coeffs
    }
}

/// `f̃^0(k) = (w/2π)·sinc(kw/2)·m̂(k)` with `m̂(k) = a∫ψ(u)cos(kwu/2)du`: the
/// bump is a width-`w` indicator smoothed by a kernel of half-width `w/2`.
fn fourier_table(width: f64, a: f64, k_max: usize) -> Vec<f64> {
    let h = 2.0 / MIDPOINT_NODES as f64;
    // ψ is even, so sum over the positive half only
    let half = MIDPOINT_NODES / 2;
    let nodes: Vec<(f64, f64)> = (half..MIDPOINT_NODES)
        .map(|i| {
            let u = -1.0 + (i as f64 + 0.5) * h;
            (u, 2.0 * a * h * psi(u))
        })
        .filter(|&(_, w)| w > 0.0)
        .collect();
    (0..=k_max)
        .map(|k| {
            let s = 0.5 * k as f64 * width;
            let sinc = if s == 0.0 { 1.0 } else { s.sin() / s };
            let mhat: f64 = nodes.iter().map(|&(u, w)| w * (s * u).cos()).sum();
            width / TAU * sinc * mhat
        })
        .collect()
}

/// Estimated bin weights `b̃_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEstimates {
    pub b: Vec<f64>,
    /// Requested `ε`.
    pub epsilon: f64,
    /// Bin width `2π/L`.
    pub width: f64,
    pub k_max: usize,
    pub shots: u64,
}

impl BinEstimates {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }
}

/// Samples `g̃(k_d·k)` for `k = 0..=K`, `M` shots each.
pub fn sample_signal<O: PhaseOracle, R: Rng + ?Sized>(
    oracle: &mut O,
    k_d: f64,
    k_max: usize,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<GEstimate>, OracleError> {
    (0..=k_max)
        .map(|k| oracle.sample(k_d * k as f64, shots, rng))
        .collect()
}

/// `b̃_l = Re Σ_{|k|≤K} g̃(k) f̃^l(k)` from samples at `k = 0..=K`.
pub fn bins_from_samples(basis: &BumpBasis, samples: &[GEstimate]) -> Result<Vec<f64>, QeepError> {
    if samples.len() != basis.k_max + 1 {
        return Err(QeepError::SampleCount { expected: basis.k_max, got: samples.len() });
    }
    let g: Vec<Complex64> = samples.iter().map(GEstimate::value).collect();
    let c = &basis.coeffs;
    let w = basis.width;
    Ok((0..basis.bins)
        .map(|l| {
            let shift = l as f64 * w;
            let tail: f64 = (1..=basis.k_max)
                .map(|k| c[k] * (g[k] * Complex64::from_polar(1.0, -(k as f64) * shift)).re)
                .sum();
            c[0] * g[0].re + 2.0 * tail
        })
        .collect())
}

/// Samples the oracle and forms all `L` bin weights.
pub fn estimate_bins<O: PhaseOracle, R: Rng + ?Sized>(
    oracle: &mut O,
    k_d: f64,
    basis: &BumpBasis,
    shots: u64,
    rng: &mut R,
) -> Result<BinEstimates, QeepError> {
    let samples = sample_signal(oracle, k_d, basis.k_max, shots, rng)?;
    Ok(BinEstimates {
        b: bins_from_samples(basis, &samples)?,
        epsilon: basis.epsilon,
        width: basis.width,
        k_max: basis.k_max,
        shots,
    })
}

/// Exact weights `b_l = Σ_j A_j f^l(φ_j)` of a spectrum as seen through `U^{k_d}`.
pub fn exact_bins(basis: &BumpBasis, spec: &Spectrum, k_d: f64) -> BinEstimates {
    let mut b = vec![0.0; basis.bins];
    for line in spec.lines() {
        let theta = Phase::new(k_d * line.phase.value());
        let center = (theta.value() / basis.width).floor() as usize % basis.bins;
        if basis.bins <= 3 {
            for (l, bl) in b.iter_mut().enumerate() {
                *bl += line.prob * basis.value(l, theta);
            }
            continue;
        }
        // θ ∈ [lw, (l+1)w) only meets the supports of bins l−1, l, l+1
        for off in [basis.bins - 1, 0, 1] {
            let l = (center + off) % basis.bins;
            b[l] += line.prob * basis.value(l, theta);
        }
    }
    BinEstimates {
        b,
        epsilon: basis.epsilon,
        width: basis.width,
        k_max: basis.k_max,
        shots: 0,
    }
}

/// Thresholds at `A/3` and prunes circular neighbours so that one phase is
/// reported at most once.
///
/// Pruning walks `l_min, l_min + 1, …` modulo `L` from the first bin below the
/// threshold and drops `l` whenever `l − 1` is still present.
pub fn conservative_extract(bins: &BinEstimates, a_bound: f64) -> Result<Vec<Phase>, QeepError> {
    let threshold = a_bound / 3.0;
    let mut keep: Vec<bool> = bins.b.iter().map(|&b| b >= threshold).collect();
    let l_min = keep.iter().position(|&s| !s).ok_or(QeepError::NoGap)?;
    prune(&mut keep, l_min);
    Ok(keep
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s)
        .map(|(l, _)| Phase::new(l as f64 * bins.width))
        .collect())
}

fn prune(keep: &mut [bool], start: usize) {
    let big_l = keep.len();
    for step in 0..big_l {
        let l = (start + step) % big_l;
        let prev = (l + big_l - 1) % big_l;
        if keep[l] && keep[prev] {
            keep[l] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::wrap_dist;
    use crate::oracle::SimulatedOracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn with_bins(b: Vec<f64>, width: f64) -> BinEstimates {
        BinEstimates { b, epsilon: width, width, k_max: 0, shots: 0 }
    }

    #[test]
    fn shot_plan_examples() {
        let plan = shot_plan(TAU / 300.0, 0.5).unwrap();
        assert_eq!(plan.bins, 300);
        assert_eq!(plan.k_max, 976);
        let coarse = shot_plan(core::f64::consts::PI, 0.5).unwrap();
        assert_eq!((coarse.bins, coarse.k_max), (2, 1));
        let p = 0.9;
        let plan = shot_plan(0.1, p).unwrap();
        assert_eq!(plan.shots, (10f64.ln() * 1e4).ceil() as u64);
        assert!(shot_plan(0.1, 1.0).is_err());
        assert_eq!(shot_plan_for_failure(0.1, 1.0 - p).unwrap(), plan);
        // p = 1 − 1e−20 is not representable but q is
        let tiny = shot_plan_for_failure(0.5, 1e-20).unwrap();
        assert_eq!(tiny.shots, (20.0 * 10f64.ln() * 16.0f64).ceil() as u64);
        assert!(shot_plan(0.0, 0.5).is_err());
    }

    #[test]
    fn support_and_symmetry() {
        let basis = BumpBasis::new(0.1, 10).unwrap();
        let w = basis.width();
        assert_eq!(basis.value(5, Phase::new(8.0 * w)), 0.0);
        assert_eq!(basis.value(5, Phase::new(3.0 * w)), 0.0);
        for x in [0.1, 0.37, 0.5, 0.81, 1.2, 1.9] {
            let up = basis.value(5, Phase::new((5.0 + x) * w));
            let down = basis.value(5, Phase::new((5.0 - x) * w));
            assert!((up - down).abs() < 1e-12);
            assert!(up >= 0.0);
        }
        // wrapped support of bin 0
        assert!(basis.value(0, Phase::new(-0.5 * w)) > 0.0);
    }

    #[test]
    fn partition_of_unity() {
        let basis = BumpBasis::new(0.1, 10).unwrap();
        let w = basis.width();
        for l in 0..basis.bins() {
            let prev = (l + basis.bins() - 1) % basis.bins();
            for t in [0.01, 0.25, 0.5, 0.75, 0.99] {
                let phi = Phase::new((l as f64 - t) * w);
                let s = basis.value(l, phi) + basis.value(prev, phi);
                assert!((s - 1.0).abs() < 1e-6, "l={l} t={t} s={s}");
            }
        }
    }

    fn direct_fourier(basis: &BumpBasis, l: usize, k: i64) -> Complex64 {
        // dense midpoint rule over the support of f^l
        let n = 20_000;
        let w = basis.width();
        let h = 2.0 * w / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let phi = (l as f64 - 1.0) * w + (i as f64 + 0.5) * h;
            let f = basis.value(l, Phase::new(phi));
            acc += Complex64::from_polar(f * h, -(k as f64) * phi);
        }
        acc / TAU
    }

    #[test]
    fn fourier_matches_direct_quadrature() {
        let basis = BumpBasis::new(0.1, 120).unwrap();
        for &(l, k) in &[(0usize, 0i64), (0, 1), (0, 7), (3, 25), (17, -40), (40, 109)] {
            let got = basis.fourier(l, k).unwrap();
            let want = direct_fourier(&basis, l, k);
            assert!((got - want).norm() < 1e-9, "l={l} k={k} got={got} want={want}");
        }
        assert!(basis.fourier(0, 121).is_err());
    }

    #[test]
    fn fourier_translation_and_conjugation() {
        let basis = BumpBasis::new(0.05, 300).unwrap();
        let w = basis.width();
        for l in [1usize, 9, 77] {
            for k in [1i64, 13, 200, 300] {
                let fl = basis.fourier(l, k).unwrap();
                let f0 = basis.fourier(0, k).unwrap();
                let shifted = f0 * Complex64::from_polar(1.0, -(k as f64) * l as f64 * w);
                assert!((fl - shifted).norm() < 1e-10);
                assert!((basis.fourier(l, -k).unwrap() - fl.conj()).norm() < 1e-15);
            }
        }
        let c0 = basis.fourier(0, 0).unwrap();
        assert!(c0.im == 0.0 && c0.re > 0.0);
        assert!((c0.re - w / TAU).abs() < 1e-12);
    }

    #[test]
    fn fourier_decay_at_plan_length() {
        for eps in [0.1, TAU / 300.0] {
            let basis = BumpBasis::for_epsilon(eps).unwrap();
            let c = basis.base_coefficients();
            let k = basis.k_max();
            assert!(c[k].abs() < 1e-2 * c[0], "eps={eps} ratio={}", c[k].abs() / c[0]);
        }
    }

    fn truncation_tail(basis: &BumpBasis) -> f64 {
        let long = BumpBasis::new(basis.epsilon(), 40 * basis.k_max()).unwrap();
        2.0 * long.base_coefficients()[basis.k_max() + 1..]
            .iter()
            .map(|c| c.abs())
            .sum::<f64>()
    }

    #[test]
    fn noiseless_bins_match_quadrature_oracle() {
        let basis = BumpBasis::for_epsilon(0.1).unwrap();
        let bound = truncation_tail(&basis);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let phases: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..TAU)).collect();
            let spec = Spectrum::equal_weights(&phases).unwrap();
            let mut oracle = SimulatedOracle::noiseless(spec.clone());
            let est = estimate_bins(&mut oracle, 1.0, &basis, 1, &mut rng).unwrap();
            let exact = exact_bins(&basis, &spec, 1.0);
            let mut l1 = 0.0;
            for (a, b) in est.b.iter().zip(&exact.b) {
                assert!((a - b).abs() <= bound + 1e-9);
                l1 += (a - b).abs();
            }
            assert!(l1 < basis.epsilon(), "l1={l1}");
            let total: f64 = est.b.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_phase_at_bin_center() {
        let basis = BumpBasis::for_epsilon(0.1).unwrap();
        let l = 11;
        let spec = Spectrum::from_pairs(&[(l as f64 * basis.width(), 1.0)]).unwrap();
        let exact = exact_bins(&basis, &spec, 1.0);
        let near = exact.b[l - 1] + exact.b[l] + exact.b[l + 1];
        assert!((near - 1.0).abs() < 1e-9);
        for (i, b) in exact.b.iter().enumerate() {
            if !(l - 1..=l + 1).contains(&i) {
                assert!(b.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn far_bins_stay_small_under_noise() {
        let eps = 0.1;
        let p = 0.9;
        let plan = shot_plan(eps, p).unwrap();
        let basis = BumpBasis::new(eps, plan.k_max).unwrap();
        let spec = Spectrum::from_pairs(&[(0.0, 1.0)]).unwrap();
        let mut good = 0;
        let seeds = 100;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut oracle = SimulatedOracle::new(spec.clone());
            let est = estimate_bins(&mut oracle, 1.0, &basis, plan.shots, &mut rng).unwrap();
            let ok = est
                .b
                .iter()
                .enumerate()
                .filter(|&(l, _)| l > 1 && l < basis.bins() - 1)
                .all(|(_, &b)| b < eps);
            good += ok as usize;
        }
        let sigma = (p * (1.0 - p) / seeds as f64).sqrt();
        assert!(good as f64 / seeds as f64 >= p - 3.0 * sigma);
    }

    #[test]
    fn extraction_examples() {
        let w = 0.1;
        let mut b = vec![0.0; 20];
        b[3] = 1.0;
        let got = conservative_extract(&with_bins(b.clone(), w), 0.3).unwrap();
        assert_eq!(got.len(), 1);
        assert!(got[0].approx_eq(Phase::new(0.3), 1e-12));

        b[3] = 0.5;
        b[4] = 0.5;
        let got = conservative_extract(&with_bins(b, w), 0.3).unwrap();
        assert_eq!(got.len(), 1);
        assert!(got[0].approx_eq(Phase::new(0.3), 1e-12));

        let mut b = vec![0.0; 20];
        b[19] = 0.5;
        b[0] = 0.5;
        let got = conservative_extract(&with_bins(b, w), 0.3).unwrap();
        assert_eq!(got.len(), 1);
        assert!(got[0].approx_eq(Phase::new(1.9), 1e-12));
    }

    #[test]
    fn extraction_threshold_and_no_gap() {
        let mut b = vec![0.0; 10];
        b[5] = 0.1;
        let got = conservative_extract(&with_bins(b, 0.1), 0.3).unwrap();
        assert_eq!(got.len(), 1);
        let full = vec![0.2; 10];
        assert_eq!(conservative_extract(&with_bins(full, 0.1), 0.3), Err(QeepError::NoGap));
    }

    #[test]
    fn pruning_is_sequential_and_idempotent() {
        let mut keep = vec![false, true, true, true, true, false, true];
        prune(&mut keep, 0);
        assert_eq!(keep, vec![false, true, false, true, false, false, true]);
        let again = keep.clone();
        prune(&mut keep, 0);
        assert_eq!(keep, again);
    }

    #[test]
    fn promise_holds_on_exact_bins() {
        let eps = 0.1;
        let a_bound = 0.31;
        let basis = BumpBasis::new(eps, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let n = rng.random_range(1..=3usize);
            let phases = separated_phases(&mut rng, n, 6.0 * eps);
            let spec = Spectrum::equal_weights(&phases).unwrap();
            let bins = exact_bins(&basis, &spec, 1.0);
            let est = conservative_extract(&bins, a_bound).unwrap();
            assert!(est.len() <= n);
            for &p in &phases {
                assert!(est.iter().any(|e| wrap_dist(e.value() - p) <= 2.0 * eps));
            }
            for e in &est {
                assert!(phases.iter().any(|&p| wrap_dist(e.value() - p) <= 2.0 * eps));
            }
        }
    }

    fn separated_phases(rng: &mut ChaCha8Rng, n: usize, sep: f64) -> Vec<f64> {
        loop {
            let ps: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
            let ok = ps
                .iter()
                .enumerate()
                .all(|(i, a)| ps[i + 1..].iter().all(|b| wrap_dist(a - b) >= sep));
            if ok {
                return ps;
            }
        }
    }
}
