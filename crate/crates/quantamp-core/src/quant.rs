//! Bit-exact linear quantization in `1-p-q` fixed-point format.
//!
//! A scheme `1-p-q` carries one implicit sign bit, `p` integral bits and `q`
//! fractional bits. Representable values are `n * 2^-q` for integer
//! `n in [-2^(p+q), 2^(p+q) - 1]`, i.e. the range `[-2^p, 2^p - 2^-q]` with
//! step `2^-q`. Quantization clips into that range first, then rounds to the
//! nearest step with halves away from zero. All representable values with
//! `p + q <= 52` are exact in an `f64`, so values are carried as floats.

use alloc::vec::Vec;

/// A `1-p-q` fixed-point quantization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantScheme {
    /// Integral-part bit count.
    pub p: u32,
    /// Fractional-part bit count.
    pub q: u32,
}

impl QuantScheme {
    pub const fn new(p: u32, q: u32) -> Self {
        Self { p, q }
    }

    /// Lower saturation bound, `-2^p`.
    #[inline]
    pub fn b_min(&self) -> f64 {
        -exp2i(self.p as i32)
    }

    /// Upper saturation bound, `2^p - 2^-q`.
    #[inline]
    pub fn b_max(&self) -> f64 {
        exp2i(self.p as i32) - self.step()
    }

    /// Quantization step, `2^-q`.
    #[inline]
    pub fn step(&self) -> f64 {
        exp2i(-(self.q as i32))
    }

    /// Clip to `[b_min, b_max]`, then round to the step grid, halves away
    /// from zero. Saturates (never errors); infinities clip to the bounds.
    #[inline]
    pub fn quantize(&self, v: f64) -> f64 {
        debug_assert!(!v.is_nan(), "quantize called on NaN");
        let clipped = clamp(v, self.b_min(), self.b_max());
        // `f64::round` rounds halves away from zero, matching the pinned
        // rounding mode. The scale factors are exact powers of two.
        round(clipped * exp2i(self.q as i32)) * self.step()
    }

    pub fn quantize_vector(&self, vs: &[f64]) -> Vec<f64> {
        vs.iter().map(|&v| self.quantize(v)).collect()
    }

    pub fn quantize_in_place(&self, vs: &mut [f64]) {
        for v in vs.iter_mut() {
            *v = self.quantize(*v);
        }
    }
}

/// `2^e` as f64 without resorting to powi.
#[inline]
pub(crate) fn exp2i(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((1023 + e) as u64) << 52)
}

#[inline]
fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

#[inline]
fn round(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.round()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::round(v)
    }
}
