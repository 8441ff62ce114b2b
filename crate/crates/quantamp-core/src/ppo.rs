//! From-scratch policy-gradient machinery: fully connected networks with
//! analytic backpropagation, Adam, and a clipped-surrogate trainer.
//!
//! The policy and value networks are independent [`Mlp`]s. The trainer
//! collects whole episodes, computes discounted returns, subtracts the value
//! baseline, and maximizes the clipped surrogate
//! `min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)` plus an entropy bonus for
//! a few epochs per update, with probability ratios taken against the
//! pre-update log-probabilities.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, RngCore};

use crate::linalg::Matrix;
use crate::rng::{stream_rng, Domain};

#[derive(Debug, Clone, PartialEq)]
pub enum PpoError {
    InvalidConfig(String),
    ShapeMismatch(String),
    EmptyBatch,
    /// Training aborted on a non-finite loss; the payload is a diagnostic.
    NonFiniteLoss(String),
}

impl fmt::Display for PpoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PpoError::InvalidConfig(m) => write!(f, "invalid training config: {m}"),
            PpoError::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
            PpoError::EmptyBatch => write!(f, "empty training batch"),
            PpoError::NonFiniteLoss(m) => write!(f, "non-finite loss: {m}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for PpoError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(&self, v: f64) -> f64 {
        match self {
            Activation::Tanh => tanh(v),
            Activation::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected network; hidden layers use `activation`, the output layer
/// is linear. Softmax for the policy head is applied by the caller.
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

impl Mlp {
    /// Xavier-uniform initialization, deterministic in `rng`.
    pub fn new_seeded<R: Rng + ?Sized>(sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output layers");
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = sqrt(6.0 / (fan_in + fan_out) as f64);
            let mut w = Matrix::zeros(fan_out, fan_in);
            for i in 0..fan_out {
                for j in 0..fan_in {
                    w.set(i, j, rng.gen_range(-bound..=bound));
                }
            }
            weights.push(w);
            biases.push(vec![0.0; fan_out]);
        }
        Self { sizes: sizes.to_vec(), weights, biases, activation }
    }

    /// Rebuild from explicit parameters (checkpoint loading).
    pub fn from_parameters(
        sizes: &[usize],
        activation: Activation,
        weights_row_major: &[Vec<f64>],
        biases: &[Vec<f64>],
    ) -> Result<Self, PpoError> {
        if sizes.len() < 2 {
            return Err(PpoError::ShapeMismatch(String::from("need >= 2 layer sizes")));
        }
        let layers = sizes.len() - 1;
        if weights_row_major.len() != layers || biases.len() != layers {
            return Err(PpoError::ShapeMismatch(String::from("layer count mismatch")));
        }
        let mut weights = Vec::with_capacity(layers);
        for l in 0..layers {
            let (rows, cols) = (sizes[l + 1], sizes[l]);
            if weights_row_major[l].len() != rows * cols {
                return Err(PpoError::ShapeMismatch(alloc::format!(
                    "layer {l}: expected {rows}x{cols} weights"
                )));
            }
            if biases[l].len() != rows {
                return Err(PpoError::ShapeMismatch(alloc::format!(
                    "layer {l}: expected {rows} biases"
                )));
            }
            weights.push(Matrix::from_rows(rows, cols, weights_row_major[l].clone()));
        }
        Ok(Self { sizes: sizes.to_vec(), weights, biases: biases.to_vec(), activation })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights_row_major(&self) -> Vec<Vec<f64>> {
        self.weights.iter().map(|w| w.data().to_vec()).collect()
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).0
    }

    /// Forward pass keeping per-layer outputs for backpropagation.
    pub fn forward_cached(&self, input: &[f64]) -> (Vec<f64>, ForwardCache) {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let layers = self.weights.len();
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        outputs.push(input.to_vec());
        for l in 0..layers {
            let mut z = self.weights[l].mul_vec(outputs.last().unwrap());
            for (zi, b) in z.iter_mut().zip(&self.biases[l]) {
                *zi += b;
            }
            if l + 1 < layers {
                for zi in z.iter_mut() {
                    *zi = self.activation.apply(*zi);
                }
            }
            outputs.push(z);
        }
        let out = outputs.last().unwrap().clone();
        (out, ForwardCache { outputs })
    }

    /// Backpropagate `grad_output` (gradient of a scalar loss w.r.t. the
    /// linear output) and accumulate parameter gradients into `grads`.
    pub fn backward_into(&self, cache: &ForwardCache, grad_output: &[f64], grads: &mut Grads) {
        let layers = self.weights.len();
        assert_eq!(grad_output.len(), self.output_dim());
        let mut delta = grad_output.to_vec();
        for l in (0..layers).rev() {
            let input = &cache.outputs[l];
            for i in 0..delta.len() {
                grads.biases[l][i] += delta[i];
                let row_base = i * input.len();
                for j in 0..input.len() {
                    grads.weights[l][row_base + j] += delta[i] * input[j];
                }
            }
            if l > 0 {
                let mut prev = self.weights[l].transpose_mul_vec(&delta);
                for (p, y) in prev.iter_mut().zip(&cache.outputs[l]) {
                    *p *= self.activation.derivative_from_output(*y);
                }
                delta = prev;
            }
        }
    }

    fn apply_update(&mut self, update: &Grads) {
        for l in 0..self.weights.len() {
            let cols = self.weights[l].cols();
            for i in 0..self.weights[l].rows() {
                for j in 0..cols {
                    let v = self.weights[l].at(i, j) + update.weights[l][i * cols + j];
                    self.weights[l].set(i, j, v);
                }
            }
            for (b, u) in self.biases[l].iter_mut().zip(&update.biases[l]) {
                *b += u;
            }
        }
    }
}

pub struct ForwardCache {
    /// `outputs[0]` is the input; `outputs[l+1]` the (activated) output of
    /// layer `l`; the final entry is the linear head output.
    outputs: Vec<Vec<f64>>,
}

/// Flat parameter gradients matching an [`Mlp`]'s shape.
#[derive(Debug, Clone)]
pub struct Grads {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.data().len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in self.weights.iter_mut() {
            for v in w.iter_mut() {
                *v *= s;
            }
        }
        for b in self.biases.iter_mut() {
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|v| v.is_finite())
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    /// Flattened view for finite-difference checks.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Mutable flat access to network parameters (finite differences, Adam).
pub fn for_each_parameter(net: &mut Mlp, mut f: impl FnMut(&mut f64)) {
    for l in 0..net.weights.len() {
        let cols = net.weights[l].cols();
        for i in 0..net.weights[l].rows() {
            for j in 0..cols {
                let mut v = net.weights[l].at(i, j);
                f(&mut v);
                net.weights[l].set(i, j, v);
            }
        }
        for b in net.biases[l].iter_mut() {
            f(b);
        }
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Grads::zeros_like(net),
            v: Grads::zeros_like(net),
        }
    }

    /// One descent step along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Grads) {
        self.t += 1;
        let bc1 = 1.0 - powi(self.beta1, self.t);
        let bc2 = 1.0 - powi(self.beta2, self.t);
        let mut update = Grads::zeros_like(net);
        for l in 0..grads.weights.len() {
            for idx in 0..grads.weights[l].len() {
                let g = grads.weights[l][idx];
                let m = &mut self.m.weights[l][idx];
                let v = &mut self.v.weights[l][idx];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                update.weights[l][idx] = -self.lr * (*m / bc1) / (sqrt(*v / bc2) + self.eps);
            }
            for idx in 0..grads.biases[l].len() {
                let g = grads.biases[l][idx];
                let m = &mut self.m.biases[l][idx];
                let v = &mut self.v.biases[l][idx];
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                update.biases[l][idx] = -self.lr * (*m / bc1) / (sqrt(*v / bc2) + self.eps);
            }
        }
        net.apply_update(&update);
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| fexp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = fln(logits.iter().map(|&l| fexp(l - max)).sum::<f64>()) + max;
    logits.iter().map(|&l| l - lse).collect()
}

pub fn sample_categorical<R: RngCore + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rand::Rng::gen(rng);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Environment interface for the trainer: discrete actions, episodic.
pub trait Environment {
    fn state_dim(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> StepOutcome;
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Experience gathered between updates.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Exclusive end index of each episode.
    pub episode_ends: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        self.states.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.episode_ends.clear();
    }

    /// Discounted return for every timestep, restarting at episode bounds.
    pub fn discounted_returns(&self, gamma: f64) -> Vec<f64> {
        let mut returns = vec![0.0; self.len()];
        let mut start = 0;
        for &end in &self.episode_ends {
            let mut acc = 0.0;
            for t in (start..end).rev() {
                acc = self.rewards[t] + gamma * acc;
                returns[t] = acc;
            }
            start = end;
        }
        debug_assert_eq!(start, self.len(), "episode bounds must cover the batch");
        returns
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Episodes to run.
    pub max_episodes: usize,
    /// Episodes between policy updates.
    pub update_interval: usize,
    /// Discount factor.
    pub gamma: f64,
    /// Surrogate clip width.
    pub clip: f64,
    /// Gradient epochs per update.
    pub epochs: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub normalize_advantages: bool,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_episodes: 3000,
            update_interval: 10,
            gamma: 0.95,
            clip: 0.2,
            epochs: 4,
            learning_rate: 3e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            normalize_advantages: true,
            policy_hidden: vec![64, 128, 256, 256, 128, 64],
            value_hidden: vec![64, 128, 256, 256, 128, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        if self.max_episodes == 0 || self.update_interval == 0 || self.epochs == 0 {
            return Err(PpoError::InvalidConfig(String::from(
                "episodes, update interval, and epochs must be positive",
            )));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(PpoError::InvalidConfig(String::from("clip must be in (0, 1)")));
        }
        if !(self.gamma > 0.0) || !(self.learning_rate > 0.0) {
            return Err(PpoError::InvalidConfig(String::from(
                "gamma and learning rate must be positive",
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// One PPO update over `batch`: `epochs` full-batch ascent steps on the
/// clipped surrogate plus entropy bonus, and descent on the squared error of
/// the value head to the discounted returns.
pub fn ppo_update(
    policy: &mut Mlp,
    value: &mut Mlp,
    policy_opt: &mut Adam,
    value_opt: &mut Adam,
    batch: &Trajectory,
    cfg: &TrainConfig,
) -> Result<UpdateStats, PpoError> {
    if batch.is_empty() {
        return Err(PpoError::EmptyBatch);
    }
    let n = batch.len();
    let returns = batch.discounted_returns(cfg.gamma);
    let mut advantages: Vec<f64> = returns
        .iter()
        .zip(&batch.values)
        .map(|(g, v)| g - v)
        .collect();
    if cfg.normalize_advantages && n >= 2 {
        let mean = advantages.iter().sum::<f64>() / n as f64;
        let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = sqrt(var);
        if std > 1e-8 {
            for a in advantages.iter_mut() {
                *a = (*a - mean) / std;
            }
        }
    }

    let mut stats = UpdateStats::default();
    for _ in 0..cfg.epochs {
        let mut policy_grads = Grads::zeros_like(policy);
        let mut value_grads = Grads::zeros_like(value);
        let mut surrogate_sum = 0.0;
        let mut entropy_sum = 0.0;
        let mut value_loss_sum = 0.0;

        for t in 0..n {
            let state = &batch.states[t];
            let action = batch.actions[t];
            let adv = advantages[t];

            let (logits, cache) = policy.forward_cached(state);
            let logps = log_softmax(&logits);
            let probs: Vec<f64> = logps.iter().map(|&l| fexp(l)).collect();
            let ratio = fexp(logps[action] - batch.log_probs[t]);
            let unclipped = ratio * adv;
            let clipped_ratio = clampf(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
            let clipped = clipped_ratio * adv;
            surrogate_sum += unclipped.min(clipped);
            // gradient flows only when the unclipped branch attains the min
            let d_surr_d_logp = if unclipped <= clipped { ratio * adv } else { 0.0 };

            let entropy: f64 = -probs
                .iter()
                .zip(&logps)
                .map(|(p, lp)| if *p > 0.0 { p * lp } else { 0.0 })
                .sum::<f64>();
            entropy_sum += entropy;

            // d(-objective)/d(logits); objective = surr + c_e * entropy
            let mut grad_logits = vec![0.0; logits.len()];
            for j in 0..logits.len() {
                let indicator = if j == action { 1.0 } else { 0.0 };
                let d_logp_d_logit = indicator - probs[j];
                let d_entropy_d_logit = -probs[j] * (logps[j] + entropy);
                grad_logits[j] =
                    -(d_surr_d_logp * d_logp_d_logit + cfg.entropy_coef * d_entropy_d_logit);
            }
            policy.backward_into(&cache, &grad_logits, &mut policy_grads);

            let (v_out, v_cache) = value.forward_cached(state);
            let err = v_out[0] - returns[t];
            value_loss_sum += err * err;
            value.backward_into(&v_cache, &[2.0 * cfg.value_coef * err], &mut value_grads);
        }

        let inv_n = 1.0 / n as f64;
        policy_grads.scale(inv_n);
        value_grads.scale(inv_n);
        if !policy_grads.is_finite() || !value_grads.is_finite() {
            return Err(PpoError::NonFiniteLoss(alloc::format!(
                "surrogate={} value_loss={} batch_len={}",
                surrogate_sum * inv_n,
                value_loss_sum * inv_n,
                n
            )));
        }
        policy_opt.step(policy, &policy_grads);
        value_opt.step(value, &value_grads);
        stats = UpdateStats {
            surrogate: surrogate_sum * inv_n,
            value_loss: value_loss_sum * inv_n,
            entropy: entropy_sum * inv_n,
        };
    }
    Ok(stats)
}

#[derive(Debug)]
pub struct TrainOutput {
    pub policy: Mlp,
    pub value: Mlp,
    /// Mean reward of each update batch, in update order.
    pub reward_history: Vec<f64>,
    pub final_stats: UpdateStats,
}

/// Run the training phase: `max_episodes` episodes, one PPO update every
/// `update_interval` episodes. Deterministic given the seed: network
/// initialization, action sampling, and environment randomness use separate
/// seeded streams.
pub fn train<E: Environment>(env: &mut E, cfg: &TrainConfig) -> Result<TrainOutput, PpoError> {
    cfg.validate()?;
    let mut init_rng = stream_rng(cfg.seed, Domain::NetInit, 0);
    let mut policy_sizes = vec![env.state_dim()];
    policy_sizes.extend_from_slice(&cfg.policy_hidden);
    policy_sizes.push(env.num_actions());
    let mut value_sizes = vec![env.state_dim()];
    value_sizes.extend_from_slice(&cfg.value_hidden);
    value_sizes.push(1);
    let mut policy = Mlp::new_seeded(&policy_sizes, Activation::Tanh, &mut init_rng);
    let mut value = Mlp::new_seeded(&value_sizes, Activation::Tanh, &mut init_rng);
    let mut policy_opt = Adam::new(&policy, cfg.learning_rate);
    let mut value_opt = Adam::new(&value, cfg.learning_rate);

    let mut agent_rng = stream_rng(cfg.seed, Domain::Agent, 0);
    let mut env_rng = stream_rng(cfg.seed, Domain::Env, 0);

    let mut buffer = Trajectory::default();
    let mut reward_history = Vec::new();
    let mut final_stats = UpdateStats::default();

    for episode in 0..cfg.max_episodes {
        let mut state = env.reset(&mut env_rng);
        loop {
            let logits = policy.forward(&state);
            let logps = log_softmax(&logits);
            let probs: Vec<f64> = logps.iter().map(|&l| fexp(l)).collect();
            let action = sample_categorical(&probs, &mut agent_rng);
            let v = value.forward(&state)[0];
            let outcome = env.step(action, &mut env_rng);

            buffer.states.push(state);
            buffer.actions.push(action);
            buffer.log_probs.push(logps[action]);
            buffer.rewards.push(outcome.reward);
            buffer.values.push(v);

            state = outcome.state;
            if outcome.done {
                break;
            }
        }
        buffer.episode_ends.push(buffer.len());

        if (episode + 1) % cfg.update_interval == 0 {
            let mean_reward = buffer.rewards.iter().sum::<f64>() / buffer.len() as f64;
            final_stats = ppo_update(
                &mut policy,
                &mut value,
                &mut policy_opt,
                &mut value_opt,
                &buffer,
                cfg,
            )?;
            reward_history.push(mean_reward);
            buffer.clear();
        }
    }
    Ok(TrainOutput { policy, value, reward_history, final_stats })
}

/// Greedy action of the policy in `state`.
pub fn greedy_action(policy: &Mlp, state: &[f64]) -> usize {
    let logits = policy.forward(state);
    let mut best = 0;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best
}

#[inline]
fn clampf(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

#[inline]
fn powi(base: f64, exp: u64) -> f64 {
    #[cfg(feature = "std")]
    {
        base.powi(exp.min(i32::MAX as u64) as i32)
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::powi(base, exp.min(i32::MAX as u64) as i32)
    }
}

#[inline]
fn sqrt(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.sqrt()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::sqrt(v)
    }
}

#[inline]
fn tanh(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.tanh()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::tanh(v)
    }
}

#[inline]
fn fexp(v: f64) -> f64 {
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
fn fln(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.ln()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::ln(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Domain};

    #[test]
    fn zero_network_gives_uniform_policy() {
        let net = Mlp::from_parameters(
            &[3, 4, 2],
            Activation::Tanh,
            &[vec![0.0; 12], vec![0.0; 8]],
            &[vec![0.0; 4], vec![0.0; 2]],
        )
        .unwrap();
        let out = net.forward(&[0.3, -0.7, 1.0]);
        let probs = softmax(&out);
        assert_eq!(probs, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_is_normalized_and_positive() {
        let probs = softmax(&[1.0, -2.0, 0.25, 700.0, -700.0]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn two_layer_forward_matches_hand_computation() {
        // W0 = [[1, 2], [3, 4]], b0 = [0.5, -0.5], W1 = [[1, -1]], b1 = [0.25]
        let net = Mlp::from_parameters(
            &[2, 2, 1],
            Activation::Tanh,
            &[vec![1.0, 2.0, 3.0, 4.0], vec![1.0, -1.0]],
            &[vec![0.5, -0.5], vec![0.25]],
        )
        .unwrap();
        let x = [0.1, -0.2];
        let h0 = (1.0f64 * 0.1 + 2.0 * -0.2 + 0.5).tanh();
        let h1 = (3.0f64 * 0.1 + 4.0 * -0.2 - 0.5).tanh();
        let expect = h0 - h1 + 0.25;
        let got = net.forward(&x)[0];
        assert!((got - expect).abs() < 1e-15);
    }

    /// Central finite differences on a scalar loss of the network output.
    fn finite_difference_check(sizes: &[usize], loss_grad: fn(&[f64]) -> (f64, Vec<f64>)) {
        let mut rng = stream_rng(99, Domain::NetInit, 0);
        let net = Mlp::new_seeded(sizes, Activation::Tanh, &mut rng);
        let probe = {
            let mut r = stream_rng(99, Domain::NetInit, 1);
            (0..sizes[0]).map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0)).collect::<Vec<f64>>()
        };
        let (out, cache) = net.forward_cached(&probe);
        let (_, grad_out) = loss_grad(&out);
        let mut grads = Grads::zeros_like(&net);
        net.backward_into(&cache, &grad_out, &mut grads);
        let analytic = grads.flat();

        // probe 100 random parameters
        let mut idx_rng = stream_rng(99, Domain::NetInit, 2);
        let n_params = analytic.len();
        let h = 1e-5;
        for _ in 0..100 {
            let target = rand::Rng::gen_range(&mut idx_rng, 0..n_params);
            let mut plus = f64::NAN;
            let mut minus = f64::NAN;
            for (sign, slot) in [(h, &mut plus), (-h, &mut minus)] {
                let mut perturbed = net.clone();
                let mut i = 0usize;
                for_each_parameter(&mut perturbed, |p| {
                    if i == target {
                        *p += sign;
                    }
                    i += 1;
                });
                let out = perturbed.forward(&probe);
                *slot = loss_grad(&out).0;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let denom = numeric.abs().max(analytic[target].abs()).max(1e-6);
            let rel = (numeric - analytic[target]).abs() / denom;
            assert!(
                rel <= 1e-4,
                "param {target}: numeric {numeric} vs analytic {}",
                analytic[target]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences_scalar_head() {
        // loss = sum of squares of outputs
        finite_difference_check(&[4, 8, 6, 1], |out| {
            let loss = out.iter().map(|v| v * v).sum::<f64>();
            (loss, out.iter().map(|v| 2.0 * v).collect())
        });
    }

    #[test]
    fn gradients_match_finite_differences_log_softmax_head() {
        // loss = -log softmax picked at index 1
        finite_difference_check(&[5, 12, 8, 4], |out| {
            let logps = log_softmax(out);
            let probs: Vec<f64> = logps.iter().map(|&l| l.exp()).collect();
            let grad = (0..out.len())
                .map(|j| -((if j == 1 { 1.0 } else { 0.0 }) - probs[j]))
                .collect();
            (-logps[1], grad)
        });
    }

    #[test]
    fn gradient_scales_linearly_with_loss_scaling() {
        let mut rng = stream_rng(7, Domain::NetInit, 0);
        let net = Mlp::new_seeded(&[3, 5, 2], Activation::Tanh, &mut rng);
        let (_, cache) = net.forward_cached(&[0.2, -0.4, 0.9]);
        let g1 = {
            let mut g = Grads::zeros_like(&net);
            net.backward_into(&cache, &[1.0, 0.0], &mut g);
            g.flat()
        };
        let g3 = {
            let mut g = Grads::zeros_like(&net);
            net.backward_into(&cache, &[3.0, 0.0], &mut g);
            g.flat()
        };
        for (a, b) in g1.iter().zip(&g3) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dead_path_weights_have_zero_gradient() {
        // the head reads only hidden unit 0; weights feeding unit 1 get no
        // gradient
        let net = Mlp::from_parameters(
            &[2, 2, 1],
            Activation::Tanh,
            &[vec![0.3, -0.2, 0.1, 0.4], vec![0.7, 0.0]],
            &[vec![0.0, 0.0], vec![0.0]],
        )
        .unwrap();
        let (_, cache) = net.forward_cached(&[0.5, -0.5]);
        let mut grads = Grads::zeros_like(&net);
        net.backward_into(&cache, &[1.0], &mut grads);
        assert_eq!(grads.weights[0][2], 0.0);
        assert_eq!(grads.weights[0][3], 0.0);
        assert_eq!(grads.biases[0][1], 0.0);
    }

    #[test]
    fn discounted_returns_respect_episode_bounds() {
        let mut t = Trajectory::default();
        t.rewards = vec![1.0, 1.0, 2.0];
        t.states = vec![vec![0.0]; 3];
        t.actions = vec![0; 3];
        t.log_probs = vec![0.0; 3];
        t.values = vec![0.0; 3];
        t.episode_ends = vec![2, 3];
        let r = t.discounted_returns(0.5);
        assert_eq!(r, vec![1.5, 1.0, 2.0]);
    }

    struct Bandit {
        winning: usize,
    }

    impl Environment for Bandit {
        fn state_dim(&self) -> usize {
            1
        }
        fn num_actions(&self) -> usize {
            5
        }
        fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
            vec![1.0]
        }
        fn step(&mut self, action: usize, _rng: &mut dyn RngCore) -> StepOutcome {
            StepOutcome {
                state: vec![1.0],
                reward: if action == self.winning { 1.0 } else { 0.0 },
                done: true,
            }
        }
    }

    #[test]
    fn bandit_smoke_test_converges() {
        let mut env = Bandit { winning: 2 };
        let cfg = TrainConfig {
            max_episodes: 2000, // 200 updates
            update_interval: 10,
            policy_hidden: vec![16, 16],
            value_hidden: vec![16, 16],
            learning_rate: 3e-3,
            seed: 5,
            ..TrainConfig::default()
        };
        let out = train(&mut env, &cfg).unwrap();
        assert_eq!(out.reward_history.len(), 200);
        assert_eq!(greedy_action(&out.policy, &[1.0]), 2);
        // late training should be collecting nearly full reward
        let tail = &out.reward_history[190..];
        assert!(tail.iter().sum::<f64>() / 10.0 > 0.9);
    }

    #[test]
    fn zero_advantage_leaves_policy_unchanged_without_entropy() {
        let mut rng = stream_rng(3, Domain::NetInit, 0);
        let mut policy = Mlp::new_seeded(&[2, 4, 3], Activation::Tanh, &mut rng);
        let mut value = Mlp::new_seeded(&[2, 4, 1], Activation::Tanh, &mut rng);
        let before = policy.weights_row_major();

        // rewards exactly matching the value baseline gives zero advantage
        let mut batch = Trajectory::default();
        for i in 0..4 {
            let s = vec![0.1 * i as f64, -0.2];
            let logits = policy.forward(&s);
            let logps = log_softmax(&logits);
            batch.values.push(1.0);
            batch.rewards.push(1.0);
            batch.log_probs.push(logps[1]);
            batch.actions.push(1);
            batch.states.push(s);
            batch.episode_ends.push(i + 1);
        }
        let cfg = TrainConfig {
            entropy_coef: 0.0,
            normalize_advantages: true,
            ..TrainConfig::default()
        };
        let mut po = Adam::new(&policy, cfg.learning_rate);
        let mut vo = Adam::new(&value, cfg.learning_rate);
        ppo_update(&mut policy, &mut value, &mut po, &mut vo, &batch, &cfg).unwrap();
        assert_eq!(policy.weights_row_major(), before);
    }

    #[test]
    fn positive_advantage_raises_action_probability() {
        let mut rng = stream_rng(11, Domain::NetInit, 0);
        let mut policy = Mlp::new_seeded(&[2, 8, 3], Activation::Tanh, &mut rng);
        let mut value = Mlp::new_seeded(&[2, 8, 1], Activation::Tanh, &mut rng);
        let state = vec![0.4, -0.6];
        let logits = policy.forward(&state);
        let logps = log_softmax(&logits);
        let action = 2;
        let p_before = softmax(&logits)[action];

        let batch = Trajectory {
            states: vec![state.clone()],
            actions: vec![action],
            log_probs: vec![logps[action]],
            rewards: vec![1.0],
            values: vec![0.0],
            episode_ends: vec![1],
        };
        let cfg = TrainConfig { entropy_coef: 0.0, epochs: 1, ..TrainConfig::default() };
        let mut po = Adam::new(&policy, cfg.learning_rate);
        let mut vo = Adam::new(&value, cfg.learning_rate);
        ppo_update(&mut policy, &mut value, &mut po, &mut vo, &batch, &cfg).unwrap();
        let p_after = softmax(&policy.forward(&state))[action];
        assert!(p_after > p_before, "{p_after} should exceed {p_before}");
    }

    #[test]
    fn clipped_branch_blocks_the_gradient() {
        // manufacture a ratio far outside the clip band: old log-prob much
        // smaller than the current one
        let mut rng = stream_rng(13, Domain::NetInit, 0);
        let mut policy = Mlp::new_seeded(&[2, 4, 2], Activation::Tanh, &mut rng);
        let mut value = Mlp::new_seeded(&[2, 4, 1], Activation::Tanh, &mut rng);
        let before = policy.weights_row_major();
        let state = vec![0.2, 0.1];
        let batch = Trajectory {
            states: vec![state.clone()],
            actions: vec![0],
            log_probs: vec![log_softmax(&policy.forward(&state))[0] - 2.0], // ratio e^2 > 1.2
            rewards: vec![5.0],
            values: vec![0.0],
            episode_ends: vec![1],
        };
        let cfg = TrainConfig { entropy_coef: 0.0, epochs: 1, ..TrainConfig::default() };
        let mut po = Adam::new(&policy, cfg.learning_rate);
        let mut vo = Adam::new(&value, cfg.learning_rate);
        ppo_update(&mut policy, &mut value, &mut po, &mut vo, &batch, &cfg).unwrap();
        assert_eq!(policy.weights_row_major(), before);
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let cfg = TrainConfig {
            max_episodes: 40,
            update_interval: 10,
            policy_hidden: vec![8],
            value_hidden: vec![8],
            seed: 21,
            ..TrainConfig::default()
        };
        let mut env1 = Bandit { winning: 1 };
        let mut env2 = Bandit { winning: 1 };
        let a = train(&mut env1, &cfg).unwrap();
        let b = train(&mut env2, &cfg).unwrap();
        assert_eq!(a.policy.weights_row_major(), b.policy.weights_row_major());
        assert_eq!(a.reward_history, b.reward_history);
    }
}
