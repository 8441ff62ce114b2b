//! AMP with the two-nearest-symbol posterior approximation, with optional
//! per-variable quantization.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::mimo::Constellation;
use crate::profile::Var;

use super::{
    check_dimensions, fabs, fexp, initial_estimate, DetectorConfig, DetectorError, QuantSink,
    Stage,
};

/// Two-symbol posterior for one soft estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnaProbabilities {
    /// Index of the nearest level.
    pub m1: usize,
    /// Index of the second-nearest level.
    pub m2: usize,
    pub rho_m1: f64,
    pub rho_m2: f64,
    /// Log-probability gap (non-positive).
    pub delta: f64,
}

/// Nearest and second-nearest level indices for `z`. Midpoints resolve to
/// the right-open interval, consistent with [`super::interval_flags`].
#[inline]
pub(crate) fn nearest_two(z: f64, levels: &[f64]) -> (usize, usize) {
    let m = levels.len();
    debug_assert!(m >= 2);
    // levels form the uniform grid {-(m-1), ..., -1, 1, ..., m-1} with step 2
    let t = (z - levels[0]) * 0.5;
    let mut lo = t as i64; // toward zero; negative t handled below
    if t < 0.0 {
        lo = 0;
    } else if lo as usize >= m - 1 {
        lo = m as i64 - 2;
    }
    let lo = lo as usize;
    if t - (lo as f64) < 0.5 {
        (lo, lo + 1)
    } else {
        (lo + 1, lo)
    }
}

/// Probabilities of the two nearest constellation levels:
/// `rho_m1 = 1 / (1 + exp(delta))` with
/// `delta = -|s*(2z - a)| / (2 tau)`, `a = w_m1 + w_m2`, `s = w_m2 - w_m1`.
pub fn nna_probabilities(z: f64, tau: f64, cons: &Constellation) -> NnaProbabilities {
    debug_assert!(tau > 0.0);
    let levels = cons.levels();
    let (m1, m2) = nearest_two(z, levels);
    let a = levels[m1] + levels[m2];
    let s = levels[m2] - levels[m1];
    let delta = -fabs(s * (2.0 * z - a) / (2.0 * tau));
    let rho_m1 = 1.0 / (1.0 + fexp(delta));
    NnaProbabilities { m1, m2, rho_m1, rho_m2: 1.0 - rho_m1, delta }
}

pub fn nna_amp_detect(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
) -> Result<Vec<f64>, DetectorError> {
    let mut sink = super::NoSink;
    Ok(nna_amp_detect_iterates(b, g, cfg, &mut sink)?.pop().expect("iterations >= 1"))
}

/// Same schedule as the full detector with the moment-matching loop replaced
/// by [`nna_probabilities`]. With a profile present, every registered
/// variable passes through its quantizer at its dataflow point: inputs
/// (`b`, `G`, `sigma2`) once up front, per-iteration scalars (`tau`,
/// `1/tau`, `xi_bar`, `beta*xi_bar`, feedback gain) once per iteration, and
/// the per-element chain (`z`, `chi`, `delta`, probabilities, moments,
/// products of the interference sum, the completed sum, `d`) at each use.
pub fn nna_amp_detect_iterates<S: QuantSink>(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
    sink: &mut S,
) -> Result<Vec<Vec<f64>>, DetectorError> {
    cfg.validate()?;
    let n = check_dimensions(b, g)?;
    let mut st = Stage::new(cfg.profile.as_ref(), sink);
    let levels = cfg.constellation.levels().to_vec();

    let b_q: Vec<f64> = b.iter().map(|&v| st.apply(Var::B, v)).collect();
    let mut g_q = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g_q.set(i, j, st.apply(Var::G, g.at(i, j)));
        }
    }
    let sigma2 = st.apply(Var::Sigma2, cfg.sigma2);

    let mut x_hat = vec![initial_estimate(cfg); n];
    let mut x_next = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut d = b_q.clone();
    let mut beta_xi_bar = 0.0;
    let mut iterates = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        let tau = st.apply(Var::Tau, sigma2 + beta_xi_bar);
        if tau < 0.0 {
            return Err(DetectorError::InternalInvariant(alloc::format!(
                "negative tau = {tau}"
            )));
        }
        // tau can quantize to zero at high SNR; the reciprocal then
        // saturates at its scheme's ceiling instead of erroring.
        let inv_tau = st.apply(Var::InvTau, 1.0 / tau);
        for i in 0..n {
            let z = st.apply(Var::Z, x_hat[i] + d[i]);
            let chi = st.apply(Var::Chi, z * inv_tau);
            let (m1, m2) = nearest_two(z, &levels);
            let w1 = levels[m1];
            let w2 = levels[m2];
            let a = w1 + w2;
            let s = w2 - w1;
            let delta = st.apply(Var::Delta, -fabs(s * chi - (a * s * 0.5) * inv_tau));
            let rho1 = st.apply(Var::Rho, 1.0 / (1.0 + fexp(delta)));
            let rho2 = st.apply(Var::Rho, 1.0 - rho1);
            let t1 = st.apply(Var::OmegaRho, w1 * rho1);
            let t2 = st.apply(Var::OmegaRho, w2 * rho2);
            let mean = st.apply(Var::XHat, t1 + t2);
            let s1 = st.apply(Var::OmegaSqRho, w1 * w1 * rho1);
            let s2 = st.apply(Var::OmegaSqRho, w2 * w2 * rho2);
            let second = st.apply(Var::SumOmegaSqRho, s1 + s2);
            let mean_sq = st.apply(Var::XHatSq, mean * mean);
            xi[i] = st.apply(Var::Xi, second - mean_sq);
            x_next[i] = mean;
        }
        let xi_bar = st.apply(Var::XiBar, xi.iter().sum::<f64>() / n as f64);
        beta_xi_bar = st.apply(Var::BetaXiBar, cfg.beta * xi_bar);
        let onsager = st.apply(Var::OnsagerGain, beta_xi_bar * inv_tau);
        for i in 0..n {
            let mut acc = 0.0;
            let row = g_q.row(i);
            for j in 0..n {
                acc += st.apply(Var::GxHat, row[j] * x_next[j]);
            }
            let row_sum = st.apply(Var::SumGxHat, acc);
            d[i] = st.apply(Var::D, b_q[i] - row_sum + onsager * d[i]);
        }
        core::mem::swap(&mut x_hat, &mut x_next);
        iterates.push(x_hat.clone());
    }
    Ok(iterates)
}
