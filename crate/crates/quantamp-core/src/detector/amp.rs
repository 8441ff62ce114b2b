//! Full-moment-matching AMP detector (floating point).

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;

use super::{check_dimensions, fexp, initial_estimate, DetectorConfig, DetectorError};

/// Final estimate after `cfg.iterations` rounds.
pub fn amp_detect(b: &[f64], g: &Matrix, cfg: &DetectorConfig) -> Result<Vec<f64>, DetectorError> {
    Ok(amp_detect_iterates(b, g, cfg)?.pop().expect("iterations >= 1"))
}

/// Estimates after each iteration.
///
/// Each round: soft estimate `z = x_hat + d`, interference-plus-noise
/// variance `tau = sigma2 + beta * xi_bar`, per-symbol Gaussian scores with
/// max-subtraction for a stable softmax, posterior mean/variance by moment
/// matching, then the residual update
/// `d = b - G x_hat + (beta * xi_bar / tau) * d` whose feedback term uses
/// the fresh variance aggregate over the previous `tau`. The aggregate
/// `xi_bar` is the per-element average, the normalization under which the
/// iteration's noise tracking is consistent.
pub fn amp_detect_iterates(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
) -> Result<Vec<Vec<f64>>, DetectorError> {
    cfg.validate()?;
    let n = check_dimensions(b, g)?;
    let levels = cfg.constellation.levels().to_vec();
    let m = levels.len();

    let mut x_hat = vec![initial_estimate(cfg); n];
    let mut x_next = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut d = b.to_vec();
    let mut xi_bar = 0.0;
    let mut scores = vec![0.0; m];
    let mut iterates = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        let tau = cfg.sigma2 + cfg.beta * xi_bar;
        if !(tau > 0.0) {
            return Err(DetectorError::InternalInvariant(alloc::format!(
                "non-positive tau = {tau}"
            )));
        }
        let inv_2tau = 1.0 / (2.0 * tau);
        for i in 0..n {
            let z = x_hat[i] + d[i];
            let mut max_score = f64::NEG_INFINITY;
            for (j, &w) in levels.iter().enumerate() {
                let diff = w - z;
                let s = -(diff * diff) * inv_2tau;
                scores[j] = s;
                if s > max_score {
                    max_score = s;
                }
            }
            let mut u = 0.0;
            for s in scores.iter_mut() {
                *s = fexp(*s - max_score);
                u += *s;
            }
            let mut mean = 0.0;
            let mut second = 0.0;
            for (j, &w) in levels.iter().enumerate() {
                let rho = scores[j] / u;
                mean += w * rho;
                second += w * w * rho;
            }
            x_next[i] = mean;
            xi[i] = second - mean * mean;
        }
        let xi_bar_next: f64 = xi.iter().sum::<f64>() / n as f64;
        let onsager = cfg.beta * xi_bar_next / tau;
        for i in 0..n {
            let mut acc = 0.0;
            let row = g.row(i);
            for j in 0..n {
                acc += row[j] * x_next[j];
            }
            d[i] = b[i] - acc + onsager * d[i];
        }
        core::mem::swap(&mut x_hat, &mut x_next);
        xi_bar = xi_bar_next;
        iterates.push(x_hat.clone());
    }
    Ok(iterates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{DetectorVariant, InitMean};
    use crate::mimo::Constellation;

    fn small_cfg(sigma2: f64) -> DetectorConfig {
        let cons = Constellation::for_qam(16).unwrap();
        let mut cfg = DetectorConfig::new(DetectorVariant::Amp, cons, sigma2, 0.5);
        cfg.init_mean = InitMean::Zero;
        cfg
    }

    /// Straight-line transcription of the iteration, kept deliberately
    /// independent of the implementation above.
    fn amp_oracle(b: &[f64], g: &Matrix, cfg: &DetectorConfig) -> Vec<f64> {
        let n = b.len();
        let w = cfg.constellation.levels().to_vec();
        let mut xh = vec![
            match cfg.init_mean {
                InitMean::Es => cfg.constellation.es_real(),
                InitMean::Zero => 0.0,
            };
            n
        ];
        let mut d = b.to_vec();
        let mut xibar = 0.0;
        for _ in 0..cfg.iterations {
            let tau = cfg.sigma2 + cfg.beta * xibar;
            let mut xh2 = vec![0.0; n];
            let mut xis = vec![0.0; n];
            for i in 0..n {
                let z = xh[i] + d[i];
                let alphas: Vec<f64> =
                    w.iter().map(|&wm| -(wm - z) * (wm - z) / (2.0 * tau)).collect();
                let amax = alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let es: Vec<f64> = alphas.iter().map(|a| (a - amax).exp()).collect();
                let u: f64 = es.iter().sum();
                let rhos: Vec<f64> = es.iter().map(|e| e / u).collect();
                xh2[i] = w.iter().zip(&rhos).map(|(wm, r)| wm * r).sum();
                let sec: f64 = w.iter().zip(&rhos).map(|(wm, r)| wm * wm * r).sum();
                xis[i] = sec - xh2[i] * xh2[i];
            }
            let xibar2: f64 = xis.iter().sum();
            let mut d2 = vec![0.0; n];
            for i in 0..n {
                let s: f64 = (0..n).map(|j| g.at(i, j) * xh2[j]).sum();
                d2[i] = b[i] - s + cfg.beta * xibar2 / tau * d[i];
            }
            xh = xh2;
            d = d2;
            xibar = xibar2;
        }
        xh
    }

    #[test]
    fn identity_gram_recovers_symbols_and_matches_oracle() {
        // N_t = 1: G = I_2, b = x + small perturbation
        let g = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let x = [3.0, -1.0];
        let b = [x[0] + 0.05, x[1] - 0.03];
        let cfg = small_cfg(0.01);
        let got = amp_detect(&b, &g, &cfg).unwrap();
        let want = amp_oracle(&b, &g, &cfg);
        for (a, w) in got.iter().zip(&want) {
            assert!((a - w).abs() < 1e-12, "impl {a} vs oracle {w}");
        }
        for (est, truth) in got.iter().zip(&x) {
            assert!((est - truth).abs() < 0.1, "est {est} truth {truth}");
        }
    }

    #[test]
    fn high_noise_drives_estimates_to_prior_mean() {
        let g = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let b = [1.0, -1.0];
        let cfg = small_cfg(1e6);
        let got = amp_detect(&b, &g, &cfg).unwrap();
        for v in got {
            assert!(v.abs() < 1e-3, "estimate should collapse to 0, got {v}");
        }
    }

    #[test]
    fn iterates_length_and_dimension_check() {
        let g = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let cfg = small_cfg(0.1);
        let its = amp_detect_iterates(&[0.5, 0.5], &g, &cfg).unwrap();
        assert_eq!(its.len(), 4);
        let bad = amp_detect(&[0.5, 0.5, 0.5], &g, &cfg);
        assert!(matches!(bad, Err(DetectorError::DimensionMismatch(_))));
    }
}
