//! Clipped piecewise-linear approximation of detector nonlinearities.
//!
//! A [`PlaFunction`] covers an interval with uniform segments; each segment
//! carries the chord through the true function's values at the segment
//! endpoints, with slope and intercept quantized to fixed-point so they are
//! cheap to realize as shift-add hardware. Evaluation clips the input into
//! the interval first, so out-of-range arguments saturate at the boundary
//! lines.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::quant::QuantScheme;

/// Functions the detector replaces with linear segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaTarget {
    /// `x -> 1 / (1 + exp(x))`, the two-symbol probability nonlinearity.
    LogisticRecip,
    /// `x -> 1 / x`.
    Reciprocal,
}

impl PlaTarget {
    fn eval(&self, x: f64) -> f64 {
        match self {
            PlaTarget::LogisticRecip => 1.0 / (1.0 + exp(x)),
            PlaTarget::Reciprocal => 1.0 / x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlaError {
    InvalidInterval(String),
    /// The target function has a singularity inside the interval.
    TargetUndefined,
}

impl fmt::Display for PlaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlaError::InvalidInterval(msg) => write!(f, "invalid interval: {msg}"),
            PlaError::TargetUndefined => write!(f, "target function undefined on interval"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PlaError {}

/// A quantized piecewise-linear function on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaFunction {
    lo: f64,
    hi: f64,
    slopes: Vec<f64>,
    intercepts: Vec<f64>,
}

impl PlaFunction {
    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn segments(&self) -> usize {
        self.slopes.len()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[f64] {
        &self.intercepts
    }

    /// Clip `x` into the interval, locate its uniform segment, and evaluate
    /// that segment's line.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.slopes.len();
        let x = if x < self.lo {
            self.lo
        } else if x > self.hi {
            self.hi
        } else {
            x
        };
        let width = (self.hi - self.lo) / n as f64;
        let mut seg = ((x - self.lo) / width) as usize;
        if seg >= n {
            seg = n - 1;
        }
        self.slopes[seg] * x + self.intercepts[seg]
    }
}

/// Fit `target` on `[lo, hi]` with `n_seg` uniform chord segments, then
/// quantize each slope and intercept under the given schemes.
pub fn pla_build(
    target: PlaTarget,
    lo: f64,
    hi: f64,
    n_seg: usize,
    slope_scheme: QuantScheme,
    intercept_scheme: QuantScheme,
) -> Result<PlaFunction, PlaError> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(PlaError::InvalidInterval(String::from("require finite lo < hi")));
    }
    if n_seg < 1 {
        return Err(PlaError::InvalidInterval(String::from("require n_seg >= 1")));
    }
    if matches!(target, PlaTarget::Reciprocal) && lo <= 0.0 && hi >= 0.0 {
        return Err(PlaError::TargetUndefined);
    }
    let width = (hi - lo) / n_seg as f64;
    let mut slopes = Vec::with_capacity(n_seg);
    let mut intercepts = Vec::with_capacity(n_seg);
    for s in 0..n_seg {
        let x0 = lo + s as f64 * width;
        let x1 = lo + (s + 1) as f64 * width;
        let y0 = target.eval(x0);
        let y1 = target.eval(x1);
        let slope = (y1 - y0) / (x1 - x0);
        let intercept = y0 - slope * x0;
        slopes.push(slope_scheme.quantize(slope));
        intercepts.push(intercept_scheme.quantize(intercept));
    }
    Ok(PlaFunction { lo, hi, slopes, intercepts })
}

/// Default probability segment: chord of `1/(1+exp(.))` on `[-4, 0]`,
/// coefficients on a `2^-3` grid (slope -0.125, intercept 0.5).
pub fn default_logistic_pla() -> PlaFunction {
    pla_build(PlaTarget::LogisticRecip, -4.0, 0.0, 1, QuantScheme::new(1, 3), QuantScheme::new(1, 3))
        .expect("default logistic PLA is well-formed")
}

/// Default reciprocal segment: chord of `1/x` on `[1/8, 15/8]`, slope step
/// 0.25 and intercept step 0.5 (slope -4.25, intercept 8.5).
pub fn default_reciprocal_pla() -> PlaFunction {
    pla_build(PlaTarget::Reciprocal, 0.125, 1.875, 1, QuantScheme::new(3, 2), QuantScheme::new(4, 1))
        .expect("default reciprocal PLA is well-formed")
}

#[inline]
fn exp(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.exp()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::exp(v)
    }
}
