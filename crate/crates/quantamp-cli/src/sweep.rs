//! Parallel Monte Carlo BER engine.
//!
//! One frame is generated per `(sweep point, frame index)` stream and shared
//! by every detector under test, so curves are paired on common randomness.
//! Frames run in parallel; only integer error counts cross threads, so
//! results are bit-identical regardless of worker count or scheduling.

use anyhow::{ensure, Result};
use rayon::prelude::*;

use quantamp_core::detector::{
    detect_frame_errors, detect_frame_errors_by_iteration, DetectorConfig, DetectorVariant,
    HfRhoMode, InitMean, PlaFunction,
};
use quantamp_core::mimo::{simulate_frame, snr_to_noise_var, Constellation, SystemConfig};
use quantamp_core::profile::QuantProfile;
use quantamp_core::rng::{stream_rng, Domain};

use crate::io::BerRecord;

/// Everything that defines one curve except the operating point.
#[derive(Debug, Clone)]
pub struct DetectorSpec {
    pub variant: DetectorVariant,
    pub profile: Option<QuantProfile>,
    /// Label for the CSV `profile` column (`float`, `uq_166`, ...).
    pub profile_label: String,
    pub iterations: usize,
    pub init_mean: InitMean,
    pub pla_logistic: Option<PlaFunction>,
    pub pla_reciprocal: Option<PlaFunction>,
    pub hf_rho_mode: HfRhoMode,
}

impl DetectorSpec {
    pub fn floating(variant: DetectorVariant) -> Self {
        Self {
            variant,
            profile: None,
            profile_label: "float".to_string(),
            iterations: 4,
            init_mean: InitMean::default(),
            pla_logistic: matches!(variant, DetectorVariant::HfAmp)
                .then(quantamp_core::detector::default_logistic_pla),
            pla_reciprocal: matches!(variant, DetectorVariant::HfAmp)
                .then(quantamp_core::detector::default_reciprocal_pla),
            hf_rho_mode: HfRhoMode::default(),
        }
    }

    pub fn quantized(variant: DetectorVariant, profile: QuantProfile, label: &str) -> Self {
        let mut spec = Self::floating(variant);
        spec.profile = Some(profile);
        spec.profile_label = label.to_string();
        spec
    }

    pub fn to_config(&self, cons: &Constellation, sigma2: f64, beta: f64) -> DetectorConfig {
        DetectorConfig {
            iterations: self.iterations,
            beta,
            sigma2,
            constellation: cons.clone(),
            variant: self.variant,
            profile: self.profile.clone(),
            init_mean: self.init_mean,
            pla_logistic: self.pla_logistic.clone(),
            pla_reciprocal: self.pla_reciprocal.clone(),
            hf_rho_mode: self.hf_rho_mode,
        }
    }

    /// `detector` column value.
    pub fn label(&self) -> String {
        self.variant.as_str().to_string()
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub system: SystemConfig,
    pub snrs_db: Vec<f64>,
    /// Stop a point once every curve has at least this many error events...
    pub min_error_events: u64,
    /// ...or once this many frames were simulated, whichever comes first.
    pub max_frames: u64,
    /// Frames between stopping-rule checks.
    pub batch_frames: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        ensure!(!self.snrs_db.is_empty(), "sweep needs at least one SNR point");
        ensure!(self.max_frames > 0, "max_frames must be positive");
        ensure!(self.batch_frames > 0, "batch_frames must be positive");
        Ok(())
    }
}

/// BER of every detector at one sweep point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub snr_db: f64,
    pub bits: u64,
    /// Per-spec error counts, in spec order.
    pub errors: Vec<u64>,
}

impl PointResult {
    pub fn ber(&self, spec_index: usize) -> f64 {
        self.errors[spec_index] as f64 / self.bits as f64
    }
}

/// A full BER-vs-SNR result set.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
}

impl SweepResult {
    /// Curve of `(snr_db, ber)` for one spec.
    pub fn curve(&self, spec_index: usize) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.snr_db, p.ber(spec_index))).collect()
    }

    pub fn to_records(
        &self,
        specs: &[DetectorSpec],
        system: &SystemConfig,
    ) -> Vec<BerRecord> {
        let mut out = Vec::new();
        for point in &self.points {
            for (s, spec) in specs.iter().enumerate() {
                out.push(BerRecord {
                    snr_db: point.snr_db,
                    detector: spec.label(),
                    profile: spec.profile_label.clone(),
                    bits: point.bits,
                    errors: point.errors[s],
                    ber: point.ber(s),
                    seed: system.seed,
                    convention: system.convention.as_str().to_string(),
                });
            }
        }
        out
    }
}

/// Frame stream index: point-local frame id tagged with the point index so
/// sweep points draw independent channels.
fn frame_stream(point_index: usize, frame: u64) -> u64 {
    ((point_index as u64) << 40) | frame
}

/// Run the sweep. Within a point, frames are processed in fixed-size
/// batches; after each batch the stopping rule is evaluated.
pub fn ber_sweep(cfg: &SweepConfig, specs: &[DetectorSpec]) -> Result<SweepResult> {
    cfg.validate()?;
    ensure!(!specs.is_empty(), "need at least one detector spec");
    let cons = Constellation::for_qam(cfg.system.qam_order).map_err(|e| anyhow::anyhow!("{e}"))?;
    let beta = cfg.system.beta();
    let bits_per_frame = cfg.system.bits_per_frame() as u64;

    let mut points = Vec::with_capacity(cfg.snrs_db.len());
    for (pi, &snr_db) in cfg.snrs_db.iter().enumerate() {
        let mut system = cfg.system.clone();
        system.snr_db = snr_db;
        let (_, sigma2) = snr_to_noise_var(&system, &cons);
        let configs: Vec<DetectorConfig> =
            specs.iter().map(|s| s.to_config(&cons, sigma2, beta)).collect();
        for c in &configs {
            c.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
        }

        let mut errors = vec![0u64; specs.len()];
        let mut frames_done = 0u64;
        while frames_done < cfg.max_frames {
            let batch = cfg.batch_frames.min(cfg.max_frames - frames_done);
            let batch_errors = (frames_done..frames_done + batch)
                .into_par_iter()
                .map(|frame| {
                    let mut rng = stream_rng(system.seed, Domain::Sweep, frame_stream(pi, frame));
                    let instance = simulate_frame(&system, &cons, &mut rng)
                        .expect("validated system config");
                    let mut local = vec![0u64; configs.len()];
                    for (s, det_cfg) in configs.iter().enumerate() {
                        let (e, _) = detect_frame_errors(&instance, det_cfg)
                            .expect("validated detector config");
                        local[s] = e;
                    }
                    local
                })
                .reduce(
                    || vec![0u64; specs.len()],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(&b) {
                            *x += y;
                        }
                        a
                    },
                );
            for (e, b) in errors.iter_mut().zip(&batch_errors) {
                *e += b;
            }
            frames_done += batch;
            if errors.iter().all(|&e| e >= cfg.min_error_events) {
                break;
            }
        }
        points.push(PointResult { snr_db, bits: frames_done * bits_per_frame, errors });
    }
    Ok(SweepResult { points })
}

/// BER after each iteration count `1..=spec.iterations` at a single SNR.
pub fn ber_by_iteration(
    system: &SystemConfig,
    spec: &DetectorSpec,
    n_frames: u64,
) -> Result<Vec<(u64, u64)>> {
    system.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let cons = Constellation::for_qam(system.qam_order).map_err(|e| anyhow::anyhow!("{e}"))?;
    let (_, sigma2) = snr_to_noise_var(system, &cons);
    let det_cfg = spec.to_config(&cons, sigma2, system.beta());
    det_cfg.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let bits_per_frame = system.bits_per_frame() as u64;

    let errors = (0..n_frames)
        .into_par_iter()
        .map(|frame| {
            let mut rng = stream_rng(system.seed, Domain::Sweep, frame_stream(0, frame));
            let instance =
                simulate_frame(system, &cons, &mut rng).expect("validated system config");
            let counts = detect_frame_errors_by_iteration(&instance, &det_cfg)
                .expect("validated detector config");
            counts.iter().map(|(e, _)| *e).collect::<Vec<u64>>()
        })
        .reduce(
            || vec![0u64; spec.iterations],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    Ok(errors.into_iter().map(|e| (e, n_frames * bits_per_frame)).collect())
}

/// `snr` at which the log-linear interpolation of `curve` crosses
/// `target_ber`. The curve must be sorted by SNR with BER decreasing overall;
/// interpolation is linear in `(snr, log10 ber)`.
pub fn snr_at_ber(curve: &[(f64, f64)], target_ber: f64) -> Option<f64> {
    if curve.len() < 2 || target_ber <= 0.0 {
        return None;
    }
    let logs: Vec<(f64, f64)> = curve
        .iter()
        .filter(|(_, ber)| *ber > 0.0)
        .map(|&(snr, ber)| (snr, ber.log10()))
        .collect();
    let t = target_ber.log10();
    for w in logs.windows(2) {
        let (s0, l0) = w[0];
        let (s1, l1) = w[1];
        if (l0 - t) * (l1 - t) <= 0.0 && l0 != l1 {
            return Some(s0 + (t - l0) / (l1 - l0) * (s1 - s0));
        }
    }
    None
}
