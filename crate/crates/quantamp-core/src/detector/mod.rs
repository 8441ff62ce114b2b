//! Message-passing detectors for the real-valued MIMO model.
//!
//! Three variants share the matched-filter inputs `(b, G, sigma2)`:
//!
//! * [`DetectorVariant::Amp`] — full per-symbol moment matching
//!   (floating-point only).
//! * [`DetectorVariant::NnaAmp`] — two-nearest-symbol approximation of the
//!   posterior; optionally quantized under a 21-variable profile.
//! * [`DetectorVariant::HfAmp`] — the hardware-friendly form: variance
//!   tracking compressed away (`tau = sigma2`, no residual feedback term),
//!   neighbor selection by interval flags, probabilities and reciprocal via
//!   piecewise-linear segments, mean by shift-add selection; optionally
//!   quantized under the 14-variable profile.
//!
//! Quantized variants pass each registered variable through its scheme
//! exactly once per computation of that expression: products feeding a sum
//! are quantized before accumulation and the completed sum once more,
//! mirroring a multiplier/adder-tree split.

mod amp;
mod flags;
mod hf;
mod nna;
mod pla;

pub use amp::{amp_detect, amp_detect_iterates};
pub use flags::{interval_flags, mean_select, IntervalFlags};
pub use hf::{hf_amp_detect, hf_amp_detect_iterates};
pub use nna::{nna_amp_detect, nna_amp_detect_iterates, nna_probabilities, NnaProbabilities};
pub use pla::{
    default_logistic_pla, default_reciprocal_pla, pla_build, PlaError, PlaFunction, PlaTarget,
};

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::Matrix;
use crate::mimo::{count_bit_errors, Constellation, MimoInstance};
use crate::profile::{ProfileError, QuantProfile, Var, ALL_VARS, HF_VARS};

#[derive(Debug, Clone, PartialEq)]
pub enum DetectorError {
    InvalidConfig(String),
    DimensionMismatch(String),
    Profile(ProfileError),
    /// A "cannot happen" numeric condition (e.g. non-positive tau).
    InternalInvariant(String),
}

impl fmt::Display for DetectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorError::InvalidConfig(m) => write!(f, "invalid detector config: {m}"),
            DetectorError::DimensionMismatch(m) => write!(f, "dimension mismatch: {m}"),
            DetectorError::Profile(e) => write!(f, "profile error: {e}"),
            DetectorError::InternalInvariant(m) => write!(f, "internal invariant violated: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DetectorError {}

impl From<ProfileError> for DetectorError {
    fn from(e: ProfileError) -> Self {
        DetectorError::Profile(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorVariant {
    Amp,
    NnaAmp,
    HfAmp,
}

impl DetectorVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorVariant::Amp => "amp",
            DetectorVariant::NnaAmp => "nna",
            DetectorVariant::HfAmp => "hf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "amp" => Some(DetectorVariant::Amp),
            "nna" | "nna-amp" => Some(DetectorVariant::NnaAmp),
            "hf" | "hf-amp" => Some(DetectorVariant::HfAmp),
            _ => None,
        }
    }
}

/// Initial value of the mean estimate. `Es` is the literal mean-symbol-energy
/// seed; `Zero` matches the zero-mean prior and is the default (an `Es` seed
/// biases the first iteration of a zero-mean constellation so badly that the
/// first-iteration error rate is ~50%; see the detector tests).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMean {
    Es,
    #[default]
    Zero,
}

/// How the hardware-friendly variant turns the distance metric into the two
/// probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HfRhoMode {
    /// Chord-fit segment of `1/(1+exp(.))`: `rho1 = pla(delta)`,
    /// `rho2 = 1 - rho1`.
    #[default]
    ChordPla,
    /// Verbatim shift-add probability pair
    /// `rho1 = -|d_tmp| - 1/8`, `rho2 = |d_tmp| + 7/8` (kept for side-by-side
    /// comparison; the pair does not sum to one and goes negative).
    PaperLiteral,
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    /// Iteration count `L`.
    pub iterations: usize,
    /// Load factor `N_t / N_r`.
    pub beta: f64,
    /// Real-model noise variance.
    pub sigma2: f64,
    pub constellation: Constellation,
    pub variant: DetectorVariant,
    /// Absent means floating point.
    pub profile: Option<QuantProfile>,
    pub init_mean: InitMean,
    /// Probability segment (`HfAmp` only).
    pub pla_logistic: Option<PlaFunction>,
    /// Reciprocal segment (`HfAmp` only).
    pub pla_reciprocal: Option<PlaFunction>,
    pub hf_rho_mode: HfRhoMode,
}

impl DetectorConfig {
    /// Detector with 4 iterations and the per-variant PLA defaults.
    pub fn new(variant: DetectorVariant, constellation: Constellation, sigma2: f64, beta: f64) -> Self {
        let hf = variant == DetectorVariant::HfAmp;
        Self {
            iterations: 4,
            beta,
            sigma2,
            constellation,
            variant,
            profile: None,
            init_mean: InitMean::default(),
            pla_logistic: hf.then(default_logistic_pla),
            pla_reciprocal: hf.then(default_reciprocal_pla),
            hf_rho_mode: HfRhoMode::default(),
        }
    }

    pub fn with_profile(mut self, profile: QuantProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.iterations < 1 {
            return Err(DetectorError::InvalidConfig(String::from("iterations must be >= 1")));
        }
        if !(self.beta > 0.0) {
            return Err(DetectorError::InvalidConfig(String::from("beta must be positive")));
        }
        if !(self.sigma2 > 0.0) {
            return Err(DetectorError::InvalidConfig(String::from("sigma2 must be positive")));
        }
        match self.variant {
            DetectorVariant::Amp => {
                if self.profile.is_some() {
                    return Err(DetectorError::InvalidConfig(String::from(
                        "the full-moment AMP variant is floating-point only",
                    )));
                }
            }
            DetectorVariant::NnaAmp => {
                if let Some(p) = &self.profile {
                    p.require(&ALL_VARS)?;
                }
            }
            DetectorVariant::HfAmp => {
                if self.pla_logistic.is_none() || self.pla_reciprocal.is_none() {
                    return Err(DetectorError::InvalidConfig(String::from(
                        "hf variant requires both PLA functions",
                    )));
                }
                if self.constellation.levels() != [-3.0, -1.0, 1.0, 3.0] {
                    return Err(DetectorError::InvalidConfig(String::from(
                        "hf variant is specific to the 16-QAM grid",
                    )));
                }
                if let Some(p) = &self.profile {
                    p.require(&HF_VARS)?;
                }
            }
        }
        Ok(())
    }

    /// The compressed variance tracking is only accurate for small load
    /// factors; callers should surface this to the user rather than refuse.
    pub fn hf_validity_warning(&self) -> Option<String> {
        if self.variant == DetectorVariant::HfAmp && self.beta > 1.0 / 8.0 {
            Some(alloc::format!(
                "hf variant with beta = {:.4} > 1/8: expect an error floor",
                self.beta
            ))
        } else {
            None
        }
    }
}

/// Observer of quantized values, used to gather per-variable statistics.
pub trait QuantSink {
    fn record(&mut self, var: Var, value: f64);
}

/// Sink that discards everything (the common case).
pub struct NoSink;

impl QuantSink for NoSink {
    #[inline]
    fn record(&mut self, _var: Var, _value: f64) {}
}

/// Quantization stage: applies the profile scheme (if any) and reports the
/// post-quantization value to the sink.
pub(crate) struct Stage<'a, S: QuantSink> {
    profile: Option<&'a QuantProfile>,
    sink: &'a mut S,
}

impl<'a, S: QuantSink> Stage<'a, S> {
    pub(crate) fn new(profile: Option<&'a QuantProfile>, sink: &'a mut S) -> Self {
        Self { profile, sink }
    }

    #[inline]
    pub(crate) fn apply(&mut self, var: Var, v: f64) -> f64 {
        match self.profile {
            Some(p) => {
                let q = p.scheme(var).quantize(v);
                self.sink.record(var, q);
                q
            }
            None => v,
        }
    }
}

/// Run the configured variant and return the final estimates.
pub fn detect(b: &[f64], g: &Matrix, cfg: &DetectorConfig) -> Result<Vec<f64>, DetectorError> {
    let mut sink = NoSink;
    detect_traced(b, g, cfg, &mut sink)
}

/// As [`detect`], reporting every quantized value to `sink`.
pub fn detect_traced<S: QuantSink>(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
    sink: &mut S,
) -> Result<Vec<f64>, DetectorError> {
    Ok(detect_iterates_traced(b, g, cfg, sink)?.pop().expect("iterations >= 1"))
}

/// Run the configured variant and return the estimate after every iteration.
pub fn detect_iterates(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
) -> Result<Vec<Vec<f64>>, DetectorError> {
    let mut sink = NoSink;
    detect_iterates_traced(b, g, cfg, &mut sink)
}

pub fn detect_iterates_traced<S: QuantSink>(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
    sink: &mut S,
) -> Result<Vec<Vec<f64>>, DetectorError> {
    match cfg.variant {
        DetectorVariant::Amp => amp_detect_iterates(b, g, cfg),
        DetectorVariant::NnaAmp => nna_amp_detect_iterates(b, g, cfg, sink),
        DetectorVariant::HfAmp => hf_amp_detect_iterates(b, g, cfg, sink),
    }
}

pub(crate) fn check_dimensions(b: &[f64], g: &Matrix) -> Result<usize, DetectorError> {
    let n = b.len();
    if g.rows() != n || g.cols() != n {
        return Err(DetectorError::DimensionMismatch(alloc::format!(
            "b has length {n} but G is {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    Ok(n)
}

pub(crate) fn initial_estimate(cfg: &DetectorConfig) -> f64 {
    match cfg.init_mean {
        InitMean::Es => cfg.constellation.es_real(),
        InitMean::Zero => 0.0,
    }
}

/// Detect one simulated frame and count its bit errors.
pub fn detect_frame_errors(
    frame: &MimoInstance,
    cfg: &DetectorConfig,
) -> Result<(u64, u64), DetectorError> {
    debug_assert!(
        (cfg.sigma2 - frame.sigma2_real).abs() <= 1e-12 * frame.sigma2_real.max(1.0),
        "detector sigma2 does not match the frame's noise variance"
    );
    let x_hat = detect(&frame.b, &frame.g, cfg)?;
    count_bit_errors(&x_hat, &frame.bits, &cfg.constellation)
        .map_err(|e| DetectorError::DimensionMismatch(alloc::format!("{e}")))
}

/// Per-iteration bit errors for one frame (`result[l]` covers `l+1`
/// iterations).
pub fn detect_frame_errors_by_iteration(
    frame: &MimoInstance,
    cfg: &DetectorConfig,
) -> Result<Vec<(u64, u64)>, DetectorError> {
    let iterates = detect_iterates(&frame.b, &frame.g, cfg)?;
    iterates
        .iter()
        .map(|x_hat| {
            count_bit_errors(x_hat, &frame.bits, &cfg.constellation)
                .map_err(|e| DetectorError::DimensionMismatch(alloc::format!("{e}")))
        })
        .collect()
}

#[inline]
pub(crate) fn fexp(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.exp()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::exp(v)
    }
}

#[inline]
pub(crate) fn fabs(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.abs()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::abs(v)
    }
}
