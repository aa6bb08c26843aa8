//! Quadrature for the bump kernel `ψ(u) = exp(−1/(1 − u²))` on `(−1, 1)`.

#[allow(unused_imports)]
use num_traits::Float;

/// Nodes of the open midpoint rule used for Fourier coefficients.
pub const MIDPOINT_NODES: usize = 4096;

const SIMPSON_TOL: f64 = 1e-15;
const SIMPSON_DEPTH: u32 = 40;

#[inline]
pub fn psi(u: f64) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson integral of `f` over `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, SIMPSON_DEPTH)
}

/// `∫_lo^hi ψ(u) du`, with the limits clipped to `[−1, 1]`.
pub fn psi_integral(lo: f64, hi: f64) -> f64 {
    let lo = lo.max(-1.0);
    let hi = hi.min(1.0);
    if hi <= lo {
        return 0.0;
    }
    // split at 0 so each half sees one flat endpoint
    if lo < 0.0 && hi > 0.0 {
        adaptive_simpson(&psi, lo, 0.0, SIMPSON_TOL) + adaptive_simpson(&psi, 0.0, hi, SIMPSON_TOL)
    } else {
        adaptive_simpson(&psi, lo, hi, SIMPSON_TOL)
    }
}

/// The normalization `a = 1/∫_{−1}^{1} ψ`.
///
/// Two neighbouring bumps sum to `a·∫_{−1}^{1} ψ` on their overlap, so this value
/// zeroes the partition-of-unity residual.
pub fn bump_normalization() -> f64 {
    1.0 / psi_integral(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials() {
        let v = adaptive_simpson(&|x: f64| x * x * x - x, 0.0, 2.0, 1e-14);
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn psi_is_flat_at_the_edges() {
        assert_eq!(psi(1.0), 0.0);
        assert_eq!(psi(-1.5), 0.0);
        assert!(psi(0.999) < 1e-200);
        assert!((psi(0.0) - (-1.0f64).exp()).abs() < 1e-16);
    }

    #[test]
    fn normalization_matches_midpoint_rule() {
        let h = 2.0 / MIDPOINT_NODES as f64;
        let mid: f64 = (0..MIDPOINT_NODES)
            .map(|i| psi(-1.0 + (i as f64 + 0.5) * h) * h)
            .sum();
        assert!((1.0 / mid - bump_normalization()).abs() < 1e-12);
        assert!((bump_normalization() - 2.2522836).abs() < 1e-6);
    }
}
