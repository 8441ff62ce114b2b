//! Integral-part bitwidth selection from Monte Carlo value traces.
//!
//! Running the quantized detector with a generous integral width (`p_init`)
//! and the fractional widths under test, every registered variable's values
//! are streamed into a [`TraceAccumulator`]. The accumulator keeps exact
//! exceedance counters for every candidate integral width plus a small
//! uniform reservoir for inspection; the selected width is the smallest `p`
//! whose out-of-range fraction is at most the tail threshold.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::detector::{
    detect_traced, DetectorConfig, DetectorError, DetectorVariant, InitMean, QuantSink,
};
use crate::mimo::{simulate_frame, snr_to_noise_var, Constellation, MimoError, SystemConfig};
use crate::profile::{ProfileOrigin, QuantProfile, Var, ALL_VARS, N_VARS};
use crate::quant::{exp2i, QuantScheme};
use crate::rng::{stream_rng, Domain};

/// Search cap: "large enough" integral width. Every searched variable fits
/// with at least 6 bits to spare.
pub const P_CAP: u32 = 12;

const RESERVOIR_CAPACITY: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum IpqError {
    /// Exceedance never fell below the threshold up to [`P_CAP`].
    UnboundedVariable { k: usize },
    EmptyTrace { k: usize },
    InvalidConfig(String),
    Detector(String),
}

impl fmt::Display for IpqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IpqError::UnboundedVariable { k } => {
                write!(f, "unbounded variable k={k}: tail mass above threshold at p={P_CAP}")
            }
            IpqError::EmptyTrace { k } => write!(f, "no samples recorded for variable k={k}"),
            IpqError::InvalidConfig(m) => write!(f, "invalid trace-collection config: {m}"),
            IpqError::Detector(m) => write!(f, "detector failure during collection: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for IpqError {}

/// Streaming statistics of one variable's observed values.
#[derive(Debug, Clone)]
pub struct TraceAccumulator {
    var: Var,
    /// Fractional width in force during collection (sets the upper range
    /// bound `2^p - 2^-q`).
    q: u32,
    /// `coverage_hist[p]` counts samples whose minimal covering integral
    /// width is `p`; the last bucket holds samples not covered by `P_CAP`.
    coverage_hist: [u64; (P_CAP + 2) as usize],
    count: u64,
    min: f64,
    max: f64,
    reservoir: Vec<f64>,
    seen: u64,
    rng: ChaCha8Rng,
}

impl TraceAccumulator {
    pub fn new(var: Var, q: u32, seed: u64) -> Self {
        Self {
            var,
            q,
            coverage_hist: [0; (P_CAP + 2) as usize],
            count: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            reservoir: Vec::with_capacity(RESERVOIR_CAPACITY),
            seen: 0,
            rng: stream_rng(seed, Domain::Trace, var.k() as u64),
        }
    }

    pub fn var(&self) -> Var {
        self.var
    }

    pub fn fractional_bits(&self) -> u32 {
        self.q
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Uniform subsample of the observed values.
    pub fn reservoir(&self) -> &[f64] {
        &self.reservoir
    }

    pub fn record(&mut self, v: f64) {
        self.count += 1;
        if v < self.min {
            self.min = v;
        }
        if v > self.max {
            self.max = v;
        }
        let step = exp2i(-(self.q as i32));
        let mut bucket = (P_CAP + 1) as usize;
        for p in 0..=P_CAP {
            let bound = exp2i(p as i32);
            if v >= -bound && v <= bound - step {
                bucket = p as usize;
                break;
            }
        }
        self.coverage_hist[bucket] += 1;

        self.seen += 1;
        if self.reservoir.len() < RESERVOIR_CAPACITY {
            self.reservoir.push(v);
        } else {
            let j = self.rng.gen_range(0..self.seen);
            if (j as usize) < RESERVOIR_CAPACITY {
                self.reservoir[j as usize] = v;
            }
        }
    }

    /// Samples outside `[-2^p, 2^p - 2^-q]`.
    pub fn exceedance_count(&self, p: u32) -> u64 {
        debug_assert!(p <= P_CAP);
        self.coverage_hist[(p + 1) as usize..].iter().sum()
    }

    /// The counters and extrema merge exactly (associative and
    /// order-independent); the reservoir merge is a weighted resample, still
    /// uniform enough for histogram inspection.
    pub fn merge(&mut self, other: &TraceAccumulator) {
        debug_assert_eq!(self.var, other.var);
        debug_assert_eq!(self.q, other.q);
        self.count += other.count;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        for (a, b) in self.coverage_hist.iter_mut().zip(&other.coverage_hist) {
            *a += b;
        }
        let total = self.seen + other.seen;
        if other.seen > 0 && total > 0 {
            let take_prob = other.seen as f64 / total as f64;
            for &v in &other.reservoir {
                if self.reservoir.len() < RESERVOIR_CAPACITY {
                    self.reservoir.push(v);
                } else if self.rng.gen::<f64>() < take_prob {
                    let j = self.rng.gen_range(0..RESERVOIR_CAPACITY);
                    self.reservoir[j] = v;
                }
            }
        }
        self.seen = total;
    }
}

/// Smallest integral width whose out-of-range sample fraction is at most
/// `eps1`. The exceedance fraction is non-increasing in `p`, so the result
/// is well-defined and minimal.
pub fn integral_bits(trace: &TraceAccumulator, eps1: f64) -> Result<u32, IpqError> {
    if trace.count == 0 {
        return Err(IpqError::EmptyTrace { k: trace.var.k() });
    }
    let n = trace.count as f64;
    for p in 0..=P_CAP {
        if trace.exceedance_count(p) as f64 / n <= eps1 {
            return Ok(p);
        }
    }
    Err(IpqError::UnboundedVariable { k: trace.var.k() })
}

/// One accumulator per registered variable; implements the detector's
/// quantization sink.
#[derive(Debug, Clone)]
pub struct TraceSet {
    accs: Vec<TraceAccumulator>,
}

impl TraceSet {
    pub fn new(fractional: &[u32; N_VARS], seed: u64) -> Self {
        let accs = ALL_VARS
            .iter()
            .map(|&v| TraceAccumulator::new(v, fractional[v.k() - 1], seed))
            .collect();
        Self { accs }
    }

    pub fn get(&self, var: Var) -> &TraceAccumulator {
        &self.accs[var.k() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceAccumulator> {
        self.accs.iter()
    }

    pub fn merge(&mut self, other: &TraceSet) {
        for (a, b) in self.accs.iter_mut().zip(&other.accs) {
            a.merge(b);
        }
    }
}

impl QuantSink for TraceSet {
    #[inline]
    fn record(&mut self, var: Var, value: f64) {
        self.accs[var.k() - 1].record(value);
    }
}

/// Collection run parameters. Statistics are gathered at one or more SNRs
/// and pooled; the detector runs quantized at `(p_init, q_k)`.
#[derive(Debug, Clone)]
pub struct CollectConfig {
    pub system: SystemConfig,
    /// SNRs whose traces are pooled (the operating SNR by default).
    pub snrs_db: Vec<f64>,
    pub frames_per_snr: u64,
    /// Fractional widths per variable, `k = 1..=21`.
    pub fractional: [u32; N_VARS],
    pub p_init: u32,
    pub iterations: usize,
    pub init_mean: InitMean,
}

impl CollectConfig {
    pub fn collection_profile(&self) -> QuantProfile {
        let mut profile = QuantProfile::empty(ProfileOrigin::Custom);
        for &v in &ALL_VARS {
            profile.set(v, QuantScheme::new(self.p_init, self.fractional[v.k() - 1]));
        }
        profile
    }

    pub fn validate(&self) -> Result<(), IpqError> {
        self.system.validate().map_err(|e| IpqError::InvalidConfig(format_err(e)))?;
        if self.snrs_db.is_empty() {
            return Err(IpqError::InvalidConfig(String::from("need at least one SNR")));
        }
        if self.frames_per_snr == 0 {
            return Err(IpqError::InvalidConfig(String::from("frames_per_snr must be > 0")));
        }
        Ok(())
    }
}

fn format_err(e: MimoError) -> String {
    alloc::format!("{e}")
}

/// Collect traces for one frame stream index (shared by the parallel
/// collector in the harness).
pub fn collect_frame_into(
    cfg: &CollectConfig,
    cons: &Constellation,
    profile: &QuantProfile,
    snr_index: usize,
    frame: u64,
    traces: &mut TraceSet,
) -> Result<(), IpqError> {
    let mut system = cfg.system.clone();
    system.snr_db = cfg.snrs_db[snr_index];
    let (_, sigma2) = snr_to_noise_var(&system, cons);
    let mut rng = stream_rng(system.seed, Domain::Trace, ((snr_index as u64) << 40) | frame);
    let instance = simulate_frame(&system, cons, &mut rng)
        .map_err(|e| IpqError::InvalidConfig(format_err(e)))?;
    let det_cfg = DetectorConfig {
        iterations: cfg.iterations,
        beta: system.beta(),
        sigma2,
        constellation: cons.clone(),
        variant: DetectorVariant::NnaAmp,
        profile: Some(profile.clone()),
        init_mean: cfg.init_mean,
        pla_logistic: None,
        pla_reciprocal: None,
        hf_rho_mode: Default::default(),
    };
    detect_traced(&instance.b, &instance.g, &det_cfg, traces)
        .map(|_| ())
        .map_err(|e: DetectorError| IpqError::Detector(alloc::format!("{e}")))
}

/// Sequentially collect traces for all registered variables.
pub fn collect_traces(cfg: &CollectConfig) -> Result<TraceSet, IpqError> {
    cfg.validate()?;
    let cons = Constellation::for_qam(cfg.system.qam_order)
        .map_err(|e| IpqError::InvalidConfig(format_err(e)))?;
    let profile = cfg.collection_profile();
    let mut traces = TraceSet::new(&cfg.fractional, cfg.system.seed);
    for snr_index in 0..cfg.snrs_db.len() {
        for frame in 0..cfg.frames_per_snr {
            collect_frame_into(cfg, &cons, &profile, snr_index, frame, &mut traces)?;
        }
    }
    Ok(traces)
}

/// Assemble the full profile: searched integral widths joined with the given
/// fractional widths.
pub fn integral_profile(
    traces: &TraceSet,
    fractional: &[u32; N_VARS],
    eps1: f64,
) -> Result<QuantProfile, IpqError> {
    let mut profile = QuantProfile::empty(ProfileOrigin::Ahpq);
    for acc in traces.iter() {
        let p = integral_bits(acc, eps1)?;
        profile.set(acc.var(), QuantScheme::new(p, fractional[acc.var().k() - 1]));
    }
    Ok(profile)
}
