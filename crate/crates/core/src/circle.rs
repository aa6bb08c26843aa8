//! Phase arithmetic on the unit circle.
//!
//! Every phase is held in `[0, 2π)`. Distances between phases use the
//! wrapped metric `|x|_T = |Δ|` with `x = Δ + 2πm`, `Δ ∈ [−π, π)`.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

/// Absolute tolerance used when two phases are compared for equality.
pub const DEFAULT_PHASE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CircleError {
    #[error("power k must be finite and > 1, got {0}")]
    InvalidPower(f64),
    #[error("bin index {l} out of range for {len} bins")]
    BinOutOfRange { l: usize, len: usize },
}

/// Reduces a real angle into `[0, 2π)` with a floored modulo.
#[inline]
pub fn reduce(x: f64) -> f64 {
    let mut r = x % TAU;
    if r < 0.0 {
        r += TAU;
    }
    // tiny negative inputs round up to exactly 2π
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wrapped distance `|x|_T ∈ [0, π]`.
///
/// The representative is taken in `[−π, π)`, so any `x ≡ π` maps to exactly `π`.
#[inline]
pub fn wrap_dist(x: f64) -> f64 {
    signed_wrap(x).abs()
}

/// Representative of `x` in `[−π, π)`.
#[inline]
pub fn signed_wrap(x: f64) -> f64 {
    let mut d = reduce(x + PI) - PI;
    if d >= PI {
        d -= TAU;
    }
    d
}

/// An eigenphase, canonically stored in `[0, 2π)`.
#[derive(Clone, Copy, PartialEq, PartialOrd, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "f64", into = "f64"))]
pub struct Phase(f64);

impl Phase {
    pub const ZERO: Phase = Phase(0.0);

    pub fn new(radians: f64) -> Self {
        Phase(reduce(radians))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Wrapped distance to another phase.
    #[inline]
    pub fn dist(self, other: Phase) -> f64 {
        wrap_dist(self.0 - other.0)
    }

    /// Rotates the phase by `delta` radians.
    #[inline]
    pub fn rotate(self, delta: f64) -> Self {
        Phase::new(self.0 + delta)
    }

    pub fn approx_eq(self, other: Phase, tol: f64) -> bool {
        self.dist(other) <= tol
    }
}

impl From<f64> for Phase {
    fn from(x: f64) -> Self {
        Phase::new(x)
    }
}

impl From<Phase> for f64 {
    fn from(p: Phase) -> f64 {
        p.0
    }
}

impl fmt::Debug for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Phase({})", self.0)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

fn check_power(k: f64) -> Result<(), CircleError> {
    if k.is_finite() && k > 1.0 {
        Ok(())
    } else {
        Err(CircleError::InvalidPower(k))
    }
}

/// The `⌊k⌋` candidate preimages `(θ + 2πn)/k`, `n = 0..⌊k⌋`, of an
/// eigenphase `θ` of `U^k`.
pub fn alias_set(theta: Phase, k: f64) -> Result<Vec<Phase>, CircleError> {
    check_power(k)?;
    let count = k.floor() as usize;
    Ok((0..count)
        .map(|n| Phase::new((theta.0 + TAU * n as f64) / k))
        .collect())
}

/// Whether `π/k ≤ φ ≤ π(2⌊k⌋ − 1)/k`, the window on which scaling the wrapped
/// distance by a real power `k` is exact.
pub fn in_scaling_window(phi: Phase, k: f64) -> Result<bool, CircleError> {
    check_power(k)?;
    Ok(window_contains(phi.0, k))
}

#[inline]
pub(crate) fn window_contains(phi: f64, k: f64) -> bool {
    let lo = PI / k;
    let hi = PI * (2.0 * k.floor() - 1.0) / k;
    lo <= phi && phi <= hi
}

/// Bin index with modulo-`L` arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinIndex {
    l: usize,
    len: usize,
}

impl BinIndex {
    pub fn new(l: usize, len: usize) -> Result<Self, CircleError> {
        if len == 0 || l >= len {
            return Err(CircleError::BinOutOfRange { l, len });
        }
        Ok(BinIndex { l, len })
    }

    #[inline]
    pub fn get(self) -> usize {
        self.l
    }

    #[inline]
    pub fn modulus(self) -> usize {
        self.len
    }

    /// `l +_L n`
    pub fn plus(self, n: usize) -> Self {
        BinIndex {
            l: (self.l + n % self.len) % self.len,
            len: self.len,
        }
    }

    /// `l −_L n`
    pub fn minus(self, n: usize) -> Self {
        BinIndex {
            l: (self.l + self.len - n % self.len) % self.len,
            len: self.len,
        }
    }
}
