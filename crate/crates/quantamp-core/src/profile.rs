//! Per-variable quantization profiles over the detector's variable registry.
//!
//! The two-nearest-symbol AMP detector has 21 registered fixed-point
//! variables, indexed `k = 1..=21`. A [`QuantProfile`] assigns a
//! [`QuantScheme`] to a subset of them; the full-detector profile covers all
//! 21, the hardware-friendly variant only needs the 14 that survive node
//! compression.

use alloc::string::String;
use core::fmt;

use crate::quant::QuantScheme;

pub const N_VARS: usize = 21;

/// Registered detector variables, by dataflow role. The discriminant is the
/// registry index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Var {
    /// Matched-filter output element `b_i`.
    B = 1,
    /// Gram-matrix element `g_ij`.
    G = 2,
    /// Real-model noise variance.
    Sigma2 = 3,
    /// Symbol probability `rho`.
    Rho = 4,
    /// Symbol-weighted probability `omega * rho`.
    OmegaRho = 5,
    /// Posterior mean estimate `x_hat`.
    XHat = 6,
    /// Squared mean `x_hat^2`.
    XHatSq = 7,
    /// Second-moment term `omega^2 * rho`.
    OmegaSqRho = 8,
    /// Second-moment sum over symbols.
    SumOmegaSqRho = 9,
    /// Per-element posterior variance `xi`.
    Xi = 10,
    /// Variance aggregate `xi_bar` (per-element average).
    XiBar = 11,
    /// Scaled variance `beta * xi_bar`.
    BetaXiBar = 12,
    /// Interference-plus-noise variance `tau`.
    Tau = 13,
    /// Reciprocal `1/tau`.
    InvTau = 14,
    /// Residual element `d_i`.
    D = 15,
    /// Soft estimate `z_i = x_hat + d`.
    Z = 16,
    /// Interference product `g_ij * x_hat_j`.
    GxHat = 17,
    /// Completed interference row sum.
    SumGxHat = 18,
    /// Residual feedback gain `beta * xi_bar / tau`.
    OnsagerGain = 19,
    /// Scaled estimate `chi = z / tau`.
    Chi = 20,
    /// Log-probability gap `delta`.
    Delta = 21,
}

impl Var {
    #[inline]
    pub fn k(self) -> usize {
        self as usize
    }

    pub fn from_k(k: usize) -> Option<Var> {
        ALL_VARS.get(k.wrapping_sub(1)).copied()
    }

    /// Canonical registry name, used by the profile file format.
    pub fn name(self) -> &'static str {
        match self {
            Var::B => "b_i",
            Var::G => "g_ij",
            Var::Sigma2 => "sigma_n2",
            Var::Rho => "rho",
            Var::OmegaRho => "omega_rho",
            Var::XHat => "x_hat",
            Var::XHatSq => "x_hat_sq",
            Var::OmegaSqRho => "omega_sq_rho",
            Var::SumOmegaSqRho => "sum_omega_sq_rho",
            Var::Xi => "xi",
            Var::XiBar => "xi_bar",
            Var::BetaXiBar => "beta_xi_bar",
            Var::Tau => "tau",
            Var::InvTau => "inv_tau",
            Var::D => "d_i",
            Var::Z => "z_i",
            Var::GxHat => "g_x_hat",
            Var::SumGxHat => "sum_g_x_hat",
            Var::OnsagerGain => "onsager_gain",
            Var::Chi => "chi",
            Var::Delta => "delta",
        }
    }
}

pub const ALL_VARS: [Var; N_VARS] = [
    Var::B,
    Var::G,
    Var::Sigma2,
    Var::Rho,
    Var::OmegaRho,
    Var::XHat,
    Var::XHatSq,
    Var::OmegaSqRho,
    Var::SumOmegaSqRho,
    Var::Xi,
    Var::XiBar,
    Var::BetaXiBar,
    Var::Tau,
    Var::InvTau,
    Var::D,
    Var::Z,
    Var::GxHat,
    Var::SumGxHat,
    Var::OnsagerGain,
    Var::Chi,
    Var::Delta,
];

/// Variables still active after node compression (the hardware-friendly
/// detector drops the variance-tracking chain `k = 7..12` and `k = 19`).
pub const HF_VARS: [Var; 14] = [
    Var::B,
    Var::G,
    Var::Sigma2,
    Var::Rho,
    Var::OmegaRho,
    Var::XHat,
    Var::Tau,
    Var::InvTau,
    Var::D,
    Var::Z,
    Var::GxHat,
    Var::SumGxHat,
    Var::Chi,
    Var::Delta,
];

/// Where a profile's bit allocation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileOrigin {
    /// One scheme shared by every variable.
    Uq,
    /// Produced by the automatic hybrid-precision search.
    Ahpq,
    Custom,
}

impl ProfileOrigin {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileOrigin::Uq => "UQ",
            ProfileOrigin::Ahpq => "AHPQ",
            ProfileOrigin::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "UQ" => Some(ProfileOrigin::Uq),
            "AHPQ" => Some(ProfileOrigin::Ahpq),
            "custom" => Some(ProfileOrigin::Custom),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileError {
    DuplicateVar(usize),
    UnknownVar(usize),
    NameMismatch { k: usize, expected: &'static str, found: String },
    /// A variable required by the consumer is absent.
    Incomplete(usize),
}

impl fmt::Display for ProfileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileError::DuplicateVar(k) => write!(f, "duplicate variable k={k}"),
            ProfileError::UnknownVar(k) => write!(f, "unknown variable k={k} (valid: 1..=21)"),
            ProfileError::NameMismatch { k, expected, found } => {
                write!(f, "variable k={k} named '{found}', registry expects '{expected}'")
            }
            ProfileError::Incomplete(k) => write!(f, "incomplete profile: missing k={k}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ProfileError {}

/// A (partial) assignment of quantization schemes to registered variables.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantProfile {
    entries: [Option<QuantScheme>; N_VARS],
    pub origin: ProfileOrigin,
}

impl QuantProfile {
    pub fn empty(origin: ProfileOrigin) -> Self {
        Self { entries: [None; N_VARS], origin }
    }

    /// Uniform profile: the same scheme for all 21 variables.
    pub fn uniform(scheme: QuantScheme) -> Self {
        Self { entries: [Some(scheme); N_VARS], origin: ProfileOrigin::Uq }
    }

    /// Build from `(k, name, scheme)` records, validating the registry.
    pub fn from_records<'a, I>(records: I, origin: ProfileOrigin) -> Result<Self, ProfileError>
    where
        I: IntoIterator<Item = (usize, &'a str, QuantScheme)>,
    {
        let mut profile = Self::empty(origin);
        for (k, name, scheme) in records {
            let var = Var::from_k(k).ok_or(ProfileError::UnknownVar(k))?;
            if name != var.name() {
                return Err(ProfileError::NameMismatch {
                    k,
                    expected: var.name(),
                    found: String::from(name),
                });
            }
            if profile.entries[k - 1].is_some() {
                return Err(ProfileError::DuplicateVar(k));
            }
            profile.entries[k - 1] = Some(scheme);
        }
        Ok(profile)
    }

    pub fn set(&mut self, var: Var, scheme: QuantScheme) {
        self.entries[var.k() - 1] = Some(scheme);
    }

    #[inline]
    pub fn get(&self, var: Var) -> Option<QuantScheme> {
        self.entries[var.k() - 1]
    }

    /// Scheme for `var`; panics if absent. Callers must have validated
    /// coverage via [`require`](Self::require) first.
    #[inline]
    pub fn scheme(&self, var: Var) -> QuantScheme {
        self.entries[var.k() - 1].expect("profile validated to cover this variable")
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, QuantScheme)> + '_ {
        ALL_VARS.iter().filter_map(move |&v| self.get(v).map(|s| (v, s)))
    }

    pub fn len(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Error with the first missing variable from `vars`, if any.
    pub fn require(&self, vars: &[Var]) -> Result<(), ProfileError> {
        for &v in vars {
            if self.get(v).is_none() {
                return Err(ProfileError::Incomplete(v.k()));
            }
        }
        Ok(())
    }

    pub fn require_complete(&self) -> Result<(), ProfileError> {
        self.require(&ALL_VARS)
    }

    /// Arithmetic means `(avg integral, avg fractional)` over present entries.
    pub fn stats(&self) -> (f64, f64) {
        let mut pi = 0u32;
        let mut qi = 0u32;
        let mut n = 0u32;
        for (_, s) in self.iter() {
            pi += s.p;
            qi += s.q;
            n += 1;
        }
        assert!(n > 0, "stats of an empty profile");
        (f64::from(pi) / f64::from(n), f64::from(qi) / f64::from(n))
    }
}

/// Reduction of `a` relative to baseline `b`, in percent, computed from the
/// averages rounded to two decimals (the reporting precision used
/// throughout), so printed reductions agree with printed averages.
pub fn reduction_percent(a: &QuantProfile, b: &QuantProfile) -> (f64, f64) {
    let round2 = |x: f64| round_to(x, 100.0);
    let (ap, aq) = a.stats();
    let (bp, bq) = b.stats();
    (
        (1.0 - round2(ap) / round2(bp)) * 100.0,
        (1.0 - round2(aq) / round2(bq)) * 100.0,
    )
}

fn round_to(x: f64, scale: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        (x * scale).round() / scale
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::round(x * scale) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_dense_and_named() {
        for (i, v) in ALL_VARS.iter().enumerate() {
            assert_eq!(v.k(), i + 1);
            assert_eq!(Var::from_k(i + 1), Some(*v));
        }
        assert_eq!(Var::from_k(0), None);
        assert_eq!(Var::from_k(22), None);
    }

    #[test]
    fn uniform_profile_stats() {
        let p = QuantProfile::uniform(QuantScheme::new(6, 6));
        assert_eq!(p.stats(), (6.0, 6.0));
        assert!(p.require_complete().is_ok());
    }

    #[test]
    fn missing_variable_is_reported() {
        let mut p = QuantProfile::uniform(QuantScheme::new(6, 6));
        p.entries[20] = None;
        let err = p.require_complete().unwrap_err();
        assert_eq!(err, ProfileError::Incomplete(21));
    }

    #[test]
    fn record_validation() {
        let dup = QuantProfile::from_records(
            [(1, "b_i", QuantScheme::new(3, 6)), (1, "b_i", QuantScheme::new(3, 6))],
            ProfileOrigin::Custom,
        );
        assert_eq!(dup.unwrap_err(), ProfileError::DuplicateVar(1));

        let bad_name =
            QuantProfile::from_records([(2, "b_i", QuantScheme::new(3, 6))], ProfileOrigin::Custom);
        assert!(matches!(bad_name.unwrap_err(), ProfileError::NameMismatch { k: 2, .. }));

        let bad_k =
            QuantProfile::from_records([(25, "b_i", QuantScheme::new(3, 6))], ProfileOrigin::Custom);
        assert_eq!(bad_k.unwrap_err(), ProfileError::UnknownVar(25));
    }

    #[test]
    fn self_reduction_is_zero() {
        let p = QuantProfile::uniform(QuantScheme::new(6, 6));
        assert_eq!(reduction_percent(&p, &p), (0.0, 0.0));
    }
}
