//! Interval-flag neighbor selection and shift-add mean assembly for the
//! 16-QAM grid `{-3, -1, 1, 3}`.
//!
//! Instead of sorting by Euclidean distance, the soft estimate's value
//! interval picks the nearest (`m1`) and second-nearest (`m2`) levels, the
//! symbol sum `a = m1 + m2` and difference `s = m2 - m1` directly. The six
//! regions are labeled with Gray-coded flags `{F1, F2, F3}` so adjacent
//! regions differ in one flag; `{F4, F5}` select among the three values of
//! `a`. Interval boundaries belong to the right-open interval (`z = -2`
//! falls in `[-2, -1)`).

/// Flags and pre-selected neighbor data for one soft estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalFlags {
    pub f1: bool,
    pub f2: bool,
    pub f3: bool,
    pub f4: bool,
    pub f5: bool,
    /// Nearest level value.
    pub m1: f64,
    /// Second-nearest level value.
    pub m2: f64,
    /// `m1 + m2`, one of -4, 0, 4.
    pub a_omega: f64,
    /// `m2 - m1`, one of -2, 2.
    pub s_omega: f64,
}

impl IntervalFlags {
    /// Sign of `a_omega` as -1, 0, or 1.
    #[inline]
    pub fn a_sign(&self) -> f64 {
        if self.a_omega > 0.0 {
            1.0
        } else if self.a_omega < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

/// Classify `z` into one of the six value regions.
#[inline]
pub fn interval_flags(z: f64) -> IntervalFlags {
    // regions left to right: 111, 110, 010, 000, 100, 101 (Gray sequence)
    if z < -2.0 {
        IntervalFlags { f1: true, f2: true, f3: true, f4: false, f5: true, m1: -3.0, m2: -1.0, a_omega: -4.0, s_omega: 2.0 }
    } else if z < -1.0 {
        IntervalFlags { f1: true, f2: true, f3: false, f4: false, f5: true, m1: -1.0, m2: -3.0, a_omega: -4.0, s_omega: -2.0 }
    } else if z < 0.0 {
        IntervalFlags { f1: false, f2: true, f3: false, f4: true, f5: true, m1: -1.0, m2: 1.0, a_omega: 0.0, s_omega: 2.0 }
    } else if z < 1.0 {
        IntervalFlags { f1: false, f2: false, f3: false, f4: true, f5: true, m1: 1.0, m2: -1.0, a_omega: 0.0, s_omega: -2.0 }
    } else if z < 2.0 {
        IntervalFlags { f1: true, f2: false, f3: false, f4: true, f5: false, m1: 1.0, m2: 3.0, a_omega: 4.0, s_omega: 2.0 }
    } else {
        IntervalFlags { f1: true, f2: false, f3: true, f4: true, f5: false, m1: 3.0, m2: 1.0, a_omega: 4.0, s_omega: -2.0 }
    }
}

/// Posterior mean from the flag row and the two probabilities, using only
/// negation, addition, and a shift. Equals `m1*rho1 + m2*rho2` for the
/// region the flags encode. `F3` is a don't-care when `F1 = 0`.
#[inline]
pub fn mean_select(f1: bool, f2: bool, f3: bool, rho1: f64, rho2: f64) -> f64 {
    match (f1, f2) {
        (false, false) => rho1 - rho2,
        (false, true) => rho2 - rho1,
        (true, false) => {
            if f3 {
                rho2 + rho1 + 2.0 * rho1
            } else {
                rho2 + rho1 + 2.0 * rho2
            }
        }
        (true, true) => {
            if f3 {
                -rho2 - rho1 - 2.0 * rho1
            } else {
                -rho2 - rho1 - 2.0 * rho2
            }
        }
    }
}
