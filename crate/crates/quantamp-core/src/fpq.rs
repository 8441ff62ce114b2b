//! Fractional-bitwidth search environment.
//!
//! The agent walks over the detector's registered variables adjusting one
//! fractional width at a time. States are the one-hot pair (variable index,
//! its width); actions add a bounded delta with circular wrap so the agent
//! cannot get stuck at the range ends; the reward is an exponential bonus
//! for small average width, gated by a paired BER check of the quantized
//! detector against its floating-point twin.
//!
//! Two mitigations keep one under-provisioned variable from poisoning every
//! reward in an episode: only a random subset of variables is adjustable per
//! episode (the rest are parked at the maximum width), and the variable to
//! act on next is drawn at random from that subset.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::RngCore;

use crate::detector::{DetectorConfig, DetectorVariant, InitMean};
use crate::linalg::Matrix;
use crate::mimo::{
    count_bit_errors, simulate_frame, snr_to_noise_var, Constellation, MimoError, SystemConfig,
};
use crate::ppo::{self, Mlp, StepOutcome};
use crate::profile::{ProfileOrigin, QuantProfile, ALL_VARS, N_VARS};
use crate::quant::QuantScheme;
use crate::rng::{stream_rng, Domain};

#[derive(Debug, Clone, PartialEq)]
pub enum FpqError {
    InvalidConfig(String),
    Mimo(String),
    Detector(String),
}

impl fmt::Display for FpqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FpqError::InvalidConfig(m) => write!(f, "invalid environment config: {m}"),
            FpqError::Mimo(m) => write!(f, "simulation failure: {m}"),
            FpqError::Detector(m) => write!(f, "detector failure: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FpqError {}

impl From<MimoError> for FpqError {
    fn from(e: MimoError) -> Self {
        FpqError::Mimo(alloc::format!("{e}"))
    }
}

/// How reward evaluations draw their frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// One frozen frame set; the floating-point error count on it is cached,
    /// so each reward costs one quantized detector pass. Inherently paired.
    Fixed,
    /// Fresh frames per evaluation; `paired` runs both detectors on the same
    /// frames, otherwise each draws independently.
    Resampled { paired: bool },
}

#[derive(Debug, Clone)]
pub struct EnvConfig {
    /// System at the operating SNR.
    pub system: SystemConfig,
    pub iterations: usize,
    pub init_mean: InitMean,
    /// Maximum fractional width.
    pub q_max: u32,
    /// Action influence range: actions are `-l_a ..= l_a`.
    pub l_a: u32,
    /// Variables extracted per episode.
    pub n_ext: usize,
    /// Relative-error gate of the reward.
    pub eps2: f64,
    pub theta1: f64,
    pub theta2: f64,
    /// Transmitted bits per reward evaluation.
    pub eval_bits: u64,
    /// Transmitted bits for the reference BER.
    pub pb_bits: u64,
    /// Steps per episode.
    pub max_timestep: u32,
    /// Integral width while fractional widths are searched.
    pub p_init: u32,
    pub eval_mode: EvalMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig {
                n_t: 8,
                n_r: 128,
                qam_order: 16,
                snr_db: 6.0,
                convention: Default::default(),
                seed: 0,
            },
            iterations: 4,
            init_mean: InitMean::default(),
            q_max: 10,
            l_a: 2,
            n_ext: 5,
            eps2: 0.5,
            theta1: 10.0,
            theta2: 4.0,
            eval_bits: 200_000,
            pb_bits: 2_000_000,
            max_timestep: 20,
            p_init: crate::ipq::P_CAP,
            eval_mode: EvalMode::Fixed,
        }
    }
}

impl EnvConfig {
    pub fn state_dim(&self) -> usize {
        N_VARS + self.q_max as usize + 1
    }

    pub fn num_actions(&self) -> usize {
        (2 * self.l_a + 1) as usize
    }

    /// Action delta of a policy output index.
    pub fn action_delta(&self, action_index: usize) -> i64 {
        action_index as i64 - self.l_a as i64
    }

    pub fn validate(&self) -> Result<(), FpqError> {
        self.system
            .validate()
            .map_err(|e| FpqError::InvalidConfig(alloc::format!("{e}")))?;
        if self.n_ext == 0 || self.n_ext > N_VARS {
            return Err(FpqError::InvalidConfig(String::from("n_ext must be in 1..=21")));
        }
        if self.l_a == 0 || self.l_a > self.q_max / 2 {
            return Err(FpqError::InvalidConfig(String::from(
                "l_a must be in 1..=floor(q_max/2)",
            )));
        }
        if self.eval_bits == 0 || self.pb_bits == 0 {
            return Err(FpqError::InvalidConfig(String::from(
                "eval_bits and pb_bits must be positive",
            )));
        }
        if self.max_timestep == 0 {
            return Err(FpqError::InvalidConfig(String::from("max_timestep must be positive")));
        }
        if !(self.eps2 >= 0.0) || !(self.theta1 > 0.0) || !(self.theta2 >= 0.0) {
            return Err(FpqError::InvalidConfig(String::from("bad reward parameters")));
        }
        Ok(())
    }
}

/// One-hot pair `(oh[k], oh[q_k])`; exactly two ones.
pub fn encode_state(k: usize, q_k: u32, cfg: &EnvConfig) -> Vec<f64> {
    debug_assert!((1..=N_VARS).contains(&k));
    debug_assert!(q_k <= cfg.q_max);
    let mut v = vec![0.0; cfg.state_dim()];
    v[k - 1] = 1.0;
    v[N_VARS + q_k as usize] = 1.0;
    v
}

/// Inverse of [`encode_state`]; `None` if `v` is not a valid encoding.
pub fn decode_state(v: &[f64], cfg: &EnvConfig) -> Option<(usize, u32)> {
    if v.len() != cfg.state_dim() {
        return None;
    }
    let k = v[..N_VARS].iter().position(|&x| x == 1.0)? + 1;
    let q = v[N_VARS..].iter().position(|&x| x == 1.0)? as u32;
    let ones = v.iter().filter(|&&x| x != 0.0).count();
    (ones == 2).then_some((k, q))
}

/// Circular width update: `(q + a) mod (q_max + 1)`, never clipped.
pub fn apply_action(q: u32, delta: i64, q_max: u32) -> u32 {
    let modulus = (q_max + 1) as i64;
    (((q as i64 + delta) % modulus + modulus) % modulus) as u32
}

/// Everything a reward evaluation needs from one frame.
#[derive(Debug, Clone)]
pub struct EvalFrame {
    pub b: Vec<f64>,
    pub g: Matrix,
    pub bits: Vec<u8>,
}

/// Injection point for parallel frame evaluation (the core stays free of
/// thread machinery; the harness provides a work-stealing backend).
pub trait EvalBackend {
    /// Sum `per_frame` over stored frames.
    fn sum_frame_errors(
        &self,
        frames: &[EvalFrame],
        per_frame: &(dyn Fn(&EvalFrame) -> u64 + Sync),
    ) -> u64;

    /// Sum `per_index` over `0..n` (for frames generated on the fly).
    fn sum_indexed_errors(&self, n: u64, per_index: &(dyn Fn(u64) -> u64 + Sync)) -> u64;
}

/// Single-threaded backend.
pub struct SequentialEval;

impl EvalBackend for SequentialEval {
    fn sum_frame_errors(
        &self,
        frames: &[EvalFrame],
        per_frame: &(dyn Fn(&EvalFrame) -> u64 + Sync),
    ) -> u64 {
        frames.iter().map(per_frame).sum()
    }

    fn sum_indexed_errors(&self, n: u64, per_index: &(dyn Fn(u64) -> u64 + Sync)) -> u64 {
        (0..n).map(per_index).sum()
    }
}

/// One environment step, as appended to the episode log.
#[derive(Debug, Clone)]
pub struct StepLog {
    pub episode: u64,
    pub t: u32,
    pub k: usize,
    pub q: [u32; N_VARS],
    pub action: i64,
    pub reward: f64,
}

pub type StepObserver = Box<dyn FnMut(&StepLog)>;

#[derive(Debug, Clone)]
pub struct EnvState {
    /// Variable the agent acts on next (1-based).
    pub k: usize,
    /// Fractional widths of all variables.
    pub q: [u32; N_VARS],
    /// This episode's adjustable variables.
    pub extracted: Vec<usize>,
    pub t: u32,
}

pub struct FpqEnv<B: EvalBackend> {
    cfg: EnvConfig,
    cons: Constellation,
    sigma2: f64,
    eval_frames: Vec<EvalFrame>,
    /// Floating-point error count on the frozen evaluation set.
    floating_errors: u64,
    /// Precomputed reference BER.
    p_b: f64,
    backend: B,
    state: EnvState,
    episode: u64,
    resample_counter: u64,
    observer: Option<StepObserver>,
}

impl<B: EvalBackend> FpqEnv<B> {
    /// Build the environment: freeze the evaluation set, cache its
    /// floating-point errors, and precompute the reference BER.
    pub fn new(cfg: EnvConfig, backend: B) -> Result<Self, FpqError> {
        cfg.validate()?;
        let cons = Constellation::for_qam(cfg.system.qam_order)
            .map_err(|e| FpqError::InvalidConfig(alloc::format!("{e}")))?;
        let (_, sigma2) = snr_to_noise_var(&cfg.system, &cons);
        let n_frames = frames_for_bits(cfg.eval_bits, &cfg.system);
        let mut eval_frames = Vec::with_capacity(n_frames as usize);
        for i in 0..n_frames {
            let mut rng = stream_rng(cfg.system.seed, Domain::EvalSet, i);
            let inst = simulate_frame(&cfg.system, &cons, &mut rng)?;
            eval_frames.push(EvalFrame { b: inst.b, g: inst.g, bits: inst.bits });
        }

        let mut env = Self {
            cfg,
            cons,
            sigma2,
            eval_frames,
            floating_errors: 0,
            p_b: 0.0,
            backend,
            state: EnvState { k: 1, q: [0; N_VARS], extracted: Vec::new(), t: 0 },
            episode: 0,
            resample_counter: 0,
            observer: None,
        };
        let float_cfg = env.detector_config(None);
        env.floating_errors = env.run_on_eval_set(&float_cfg);
        let (pb, _) = env.precompute_pb()?;
        env.p_b = pb;
        Ok(env)
    }

    pub fn set_observer(&mut self, observer: StepObserver) {
        self.observer = Some(observer);
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    /// Reference BER of the floating-point detector at the operating SNR.
    pub fn reference_ber(&self) -> f64 {
        self.p_b
    }

    fn detector_config(&self, profile: Option<QuantProfile>) -> DetectorConfig {
        DetectorConfig {
            iterations: self.cfg.iterations,
            beta: self.cfg.system.beta(),
            sigma2: self.sigma2,
            constellation: self.cons.clone(),
            variant: DetectorVariant::NnaAmp,
            profile,
            init_mean: self.cfg.init_mean,
            pla_logistic: None,
            pla_reciprocal: None,
            hf_rho_mode: Default::default(),
        }
    }

    /// Profile under test: searched fractional widths at `p_init`.
    pub fn profile_for(&self, q: &[u32; N_VARS]) -> QuantProfile {
        let mut profile = QuantProfile::empty(ProfileOrigin::Custom);
        for &v in &ALL_VARS {
            profile.set(v, QuantScheme::new(self.cfg.p_init, q[v.k() - 1]));
        }
        profile
    }

    fn run_on_eval_set(&self, det_cfg: &DetectorConfig) -> u64 {
        let cons = &self.cons;
        self.backend.sum_frame_errors(&self.eval_frames, &|frame: &EvalFrame| {
            let x_hat = crate::detector::detect(&frame.b, &frame.g, det_cfg)
                .expect("validated detector config");
            count_bit_errors(&x_hat, &frame.bits, cons).expect("consistent frame").0
        })
    }

    fn run_on_fresh_frames(&self, det_cfg: &DetectorConfig, base: u64, n_frames: u64) -> u64 {
        let system = self.cfg.system.clone();
        let cons = self.cons.clone();
        let det_cfg = det_cfg.clone();
        self.backend.sum_indexed_errors(n_frames, &move |i: u64| {
            let mut rng = stream_rng(system.seed, Domain::EvalResample, base + i);
            let inst = simulate_frame(&system, &cons, &mut rng).expect("validated system");
            let x_hat = crate::detector::detect(&inst.b, &inst.g, &det_cfg)
                .expect("validated detector config");
            count_bit_errors(&x_hat, &inst.bits, &cons).expect("consistent frame").0
        })
    }

    /// Precompute the reference BER over `pb_bits` with the floating
    /// detector (separate frame streams from the evaluation set).
    pub fn precompute_pb(&self) -> Result<(f64, u64), FpqError> {
        let n_frames = frames_for_bits(self.cfg.pb_bits, &self.cfg.system);
        let system = self.cfg.system.clone();
        let cons = self.cons.clone();
        let det_cfg = self.detector_config(None);
        let errors = self.backend.sum_indexed_errors(n_frames, &move |i: u64| {
            let mut rng = stream_rng(system.seed, Domain::RefBer, i);
            let inst = simulate_frame(&system, &cons, &mut rng).expect("validated system");
            let x_hat = crate::detector::detect(&inst.b, &inst.g, &det_cfg)
                .expect("validated detector config");
            count_bit_errors(&x_hat, &inst.bits, &cons).expect("consistent frame").0
        });
        let bits = n_frames * self.cfg.system.bits_per_frame() as u64;
        Ok((errors as f64 / bits as f64, errors))
    }

    /// BER-gated reward of the widths `q` with `extracted` adjustable.
    ///
    /// Runs the floating and quantized detectors over the same evaluation
    /// bits (common randomness unless configured otherwise); returns -1 when
    /// the quantized detector's relative BER excess exceeds the gate, else
    /// `theta1 * exp(-theta2 * q_mean / q_max)` where `q_mean` averages the
    /// extracted widths.
    pub fn evaluate_reward(&mut self, q: &[u32; N_VARS], extracted: &[usize]) -> f64 {
        let profile = self.profile_for(q);
        let quant_cfg = self.detector_config(Some(profile));
        let bits = self.eval_frames.len() as u64 * self.cfg.system.bits_per_frame() as u64;

        let (float_errors, quant_errors, bits) = match self.cfg.eval_mode {
            EvalMode::Fixed => {
                (self.floating_errors, self.run_on_eval_set(&quant_cfg), bits)
            }
            EvalMode::Resampled { paired } => {
                let n_frames = frames_for_bits(self.cfg.eval_bits, &self.cfg.system);
                let float_cfg = self.detector_config(None);
                let base = self.resample_counter.wrapping_mul(1 << 32);
                self.resample_counter += 1;
                let fe = self.run_on_fresh_frames(&float_cfg, base, n_frames);
                let qbase = if paired {
                    base
                } else {
                    let b = self.resample_counter.wrapping_mul(1 << 32);
                    self.resample_counter += 1;
                    b
                };
                let qe = self.run_on_fresh_frames(&quant_cfg, qbase, n_frames);
                (fe, qe, n_frames * self.cfg.system.bits_per_frame() as u64)
            }
        };

        let p_fl = float_errors as f64 / bits as f64;
        let p_q = quant_errors as f64 / bits as f64;
        let relative_excess = (p_q - p_fl) / self.p_b;
        if relative_excess > self.cfg.eps2 {
            return -1.0;
        }
        let q_mean = extracted.iter().map(|&k| q[k - 1] as f64).sum::<f64>()
            / extracted.len() as f64;
        self.cfg.theta1 * exp(-self.cfg.theta2 * q_mean / self.cfg.q_max as f64)
    }

    /// Start an episode: extract `n_ext` adjustable variables (all others
    /// parked at `q_max`), widths initialized to `q_max`, first variable
    /// drawn from the extracted set.
    pub fn reset_env(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut indices: Vec<usize> = (1..=N_VARS).collect();
        // partial Fisher-Yates: the first n_ext entries are the sample
        for i in 0..self.cfg.n_ext {
            let j = i + (rng.next_u64() as usize) % (N_VARS - i);
            indices.swap(i, j);
        }
        let mut extracted = indices[..self.cfg.n_ext].to_vec();
        extracted.sort_unstable();
        let k = extracted[(rng.next_u64() as usize) % extracted.len()];
        self.state = EnvState { k, q: [self.cfg.q_max; N_VARS], extracted, t: 0 };
        self.episode += 1;
        encode_state(k, self.state.q[k - 1], &self.cfg)
    }

    /// Apply the action to the current variable, evaluate the reward on the
    /// updated widths, and draw the next variable from the extracted set.
    pub fn step_env(&mut self, action_index: usize, rng: &mut dyn RngCore) -> (Vec<f64>, f64, bool) {
        assert!(
            self.state.t < self.cfg.max_timestep,
            "stepping a finished episode (reset first)"
        );
        assert!(action_index < self.cfg.num_actions(), "illegal action index");
        let delta = self.cfg.action_delta(action_index);
        let k = self.state.k;
        self.state.q[k - 1] = apply_action(self.state.q[k - 1], delta, self.cfg.q_max);
        let (q_now, extracted) = (self.state.q, self.state.extracted.clone());
        let reward = self.evaluate_reward(&q_now, &extracted);
        self.state.t += 1;

        if let Some(observer) = self.observer.as_mut() {
            observer(&StepLog {
                episode: self.episode,
                t: self.state.t,
                k,
                q: self.state.q,
                action: delta,
                reward,
            });
        }

        let next_k =
            self.state.extracted[(rng.next_u64() as usize) % self.state.extracted.len()];
        self.state.k = next_k;
        let done = self.state.t >= self.cfg.max_timestep;
        (encode_state(next_k, self.state.q[next_k - 1], &self.cfg), reward, done)
    }
}

impl<B: EvalBackend> ppo::Environment for FpqEnv<B> {
    fn state_dim(&self) -> usize {
        self.cfg.state_dim()
    }

    fn num_actions(&self) -> usize {
        self.cfg.num_actions()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.reset_env(rng)
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> StepOutcome {
        let (state, reward, done) = self.step_env(action, rng);
        StepOutcome { state, reward, done }
    }
}

/// Testing phase: for each variable, fix it, let the trained policy keep
/// adjusting its width for `t_test` actions starting from `q_max`, and
/// report the mean visited width rounded half away from zero.
pub fn estimate_bitwidths(
    policy: &Mlp,
    cfg: &EnvConfig,
    t_test: usize,
    seed: u64,
) -> [u32; N_VARS] {
    assert!(t_test > 0);
    let mut out = [0u32; N_VARS];
    for k in 1..=N_VARS {
        let mut rng = stream_rng(seed, Domain::Testing, k as u64);
        let mut q = cfg.q_max;
        let mut sum = 0u64;
        for _ in 0..t_test {
            let state = encode_state(k, q, cfg);
            let probs = ppo::softmax(&policy.forward(&state));
            let action = ppo::sample_categorical(&probs, &mut rng);
            q = apply_action(q, cfg.action_delta(action), cfg.q_max);
            sum += q as u64;
        }
        let mean = sum as f64 / t_test as f64;
        out[k - 1] = (round(mean) as u32).min(cfg.q_max);
    }
    out
}

pub(crate) fn frames_for_bits(bits: u64, system: &SystemConfig) -> u64 {
    let per_frame = system.bits_per_frame() as u64;
    bits.div_ceil(per_frame)
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mimo::SnrConvention;
    use crate::ppo::Environment;
    use crate::rng::{stream_rng, Domain};

    fn tiny_cfg() -> EnvConfig {
        EnvConfig {
            system: SystemConfig {
                n_t: 2,
                n_r: 16,
                qam_order: 16,
                snr_db: 8.0,
                convention: SnrConvention::TotalRxOverTotalNoise,
                seed: 9,
            },
            eval_bits: 4_000,
            pb_bits: 40_000,
            max_timestep: 4,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn state_encoding_round_trips() {
        let cfg = EnvConfig::default();
        assert_eq!(cfg.state_dim(), 32);
        for (k, q) in [(1, 0), (21, 10), (7, 3)] {
            let v = encode_state(k, q, &cfg);
            assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 2);
            assert_eq!(decode_state(&v, &cfg), Some((k, q)));
        }
        assert_eq!(decode_state(&vec![0.0; 32], &cfg), None);
    }

    #[test]
    fn action_wrap_examples() {
        assert_eq!(apply_action(6, -2, 10), 4);
        assert_eq!(apply_action(0, -2, 10), 9);
        assert_eq!(apply_action(10, 2, 10), 1);
        for q in 0..=10 {
            for a in -2..=2 {
                assert!(apply_action(q, a, 10) <= 10);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_cfg();
        cfg.n_ext = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_cfg();
        cfg.l_a = 6; // > q_max / 2
        assert!(cfg.validate().is_err());
        assert!(tiny_cfg().validate().is_ok());
    }

    #[test]
    fn reward_formula_cases() {
        let mut env = FpqEnv::new(tiny_cfg(), SequentialEval).unwrap();
        let extracted: Vec<usize> = (1..=5).collect();
        // all-q_max widths at generous p pass the gate
        let q = [10u32; N_VARS];
        let r = env.evaluate_reward(&q, &extracted);
        let expected = 10.0 * (-4.0f64).exp();
        assert!((r - expected).abs() < 1e-12, "r={r} expected={expected}");
        // widths of zero destroy the detector: gate fails
        let q0 = [0u32; N_VARS];
        assert_eq!(env.evaluate_reward(&q0, &extracted), -1.0);
    }

    #[test]
    fn fixed_mode_pairing_keeps_full_width_profiles_at_zero_excess() {
        let mut env = FpqEnv::new(tiny_cfg(), SequentialEval).unwrap();
        // with every width at q_max and a huge integral budget, quantization
        // must not flip any decision on the shared frames
        let q = [10u32; N_VARS];
        let profile = env.profile_for(&q);
        let quant_cfg = env.detector_config(Some(profile));
        let qe = env.run_on_eval_set(&quant_cfg);
        assert_eq!(qe, env.floating_errors);
        let _ = &mut env;
    }

    #[test]
    fn reset_extracts_uniformly_and_parks_the_rest() {
        let mut env = FpqEnv::new(tiny_cfg(), SequentialEval).unwrap();
        let mut rng = stream_rng(1, Domain::Env, 0);
        let mut counts = [0u64; N_VARS];
        let resets = 4000;
        for _ in 0..resets {
            let s = env.reset_env(&mut rng);
            let (k, q) = decode_state(&s, env.config()).unwrap();
            assert!(env.state().extracted.contains(&k));
            assert_eq!(q, env.config().q_max);
            assert_eq!(env.state().extracted.len(), env.config().n_ext);
            for k in &env.state().extracted {
                counts[k - 1] += 1;
            }
            for k in 1..=N_VARS {
                if !env.state().extracted.contains(&k) {
                    assert_eq!(env.state().q[k - 1], env.config().q_max);
                }
            }
        }
        let expect = resets as f64 * env.config().n_ext as f64 / N_VARS as f64;
        let se = (expect * (1.0 - env.config().n_ext as f64 / N_VARS as f64)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expect).abs() < 5.0 * se,
                "variable {} extracted {} times, expected {}",
                i + 1,
                c,
                expect
            );
        }
    }

    #[test]
    fn steps_change_one_width_and_episodes_terminate() {
        let mut env = FpqEnv::new(tiny_cfg(), SequentialEval).unwrap();
        let mut rng = stream_rng(2, Domain::Env, 0);
        let s0 = env.reset_env(&mut rng);
        let (k0, _) = decode_state(&s0, env.config()).unwrap();
        let before = env.state().q;
        let (_, r, done) = env.step_env(0, &mut rng); // delta = -l_a
        assert!(!done);
        assert!(r == -1.0 || (r > 0.0 && r <= env.config().theta1));
        let after = env.state().q;
        let changed: Vec<usize> =
            (0..N_VARS).filter(|&i| before[i] != after[i]).collect();
        assert_eq!(changed, vec![k0 - 1]);
        let mut steps = 1;
        let mut done = false;
        while !done {
            let (_, _, d) = env.step_env(2, &mut rng);
            done = d;
            steps += 1;
        }
        assert_eq!(steps, env.config().max_timestep);
    }

    #[test]
    fn estimate_bitwidths_identity_policy() {
        // a policy that always picks the zero-delta action leaves widths at
        // the starting q_max
        let cfg = tiny_cfg();
        let mut biases = vec![0.0; cfg.num_actions()];
        biases[cfg.l_a as usize] = 50.0; // softmax saturates on delta = 0
        let policy = Mlp::from_parameters(
            &[cfg.state_dim(), cfg.num_actions()],
            crate::ppo::Activation::Tanh,
            &[vec![0.0; cfg.state_dim() * cfg.num_actions()]],
            &[biases],
        )
        .unwrap();
        let widths = estimate_bitwidths(&policy, &cfg, 50, 3);
        assert_eq!(widths, [cfg.q_max; N_VARS]);
    }

    #[test]
    fn environment_trait_is_usable_by_the_trainer() {
        let mut env = FpqEnv::new(tiny_cfg(), SequentialEval).unwrap();
        let cfg = crate::ppo::TrainConfig {
            max_episodes: 4,
            update_interval: 2,
            policy_hidden: vec![8],
            value_hidden: vec![8],
            seed: 17,
            ..Default::default()
        };
        let out = crate::ppo::train(&mut env, &cfg).unwrap();
        assert_eq!(out.reward_history.len(), 2);
        // rewards live in {-1} or (0, theta1]
        for s in out.reward_history {
            assert!(s >= -1.0 && s <= 10.0);
        }
    }
}
