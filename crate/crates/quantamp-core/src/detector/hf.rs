//! Hardware-friendly detector: node compression plus strength reduction.
//!
//! Node compression pins `tau = sigma2` and drops the residual feedback
//! term together with the whole variance-tracking chain. Strength reduction
//! replaces distance sorting with interval flags, the reciprocal and the
//! probability nonlinearity with single-segment PLAs, and symbol-weighted
//! means with shift-add selection. Valid when the load factor stays at or
//! below 1/8; above that the dropped feedback causes an error floor.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::profile::Var;

use super::flags::{interval_flags, mean_select};
use super::{
    check_dimensions, fabs, initial_estimate, DetectorConfig, DetectorError, HfRhoMode, QuantSink,
    Stage,
};

pub fn hf_amp_detect(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
) -> Result<Vec<f64>, DetectorError> {
    let mut sink = super::NoSink;
    Ok(hf_amp_detect_iterates(b, g, cfg, &mut sink)?.pop().expect("iterations >= 1"))
}

/// Per iteration and element: `z = x_hat + d`, flags from the value interval
/// of `z`, `chi = z * inv_tau` with `inv_tau` from the reciprocal PLA of the
/// constant `tau = sigma2`, the distance metric
/// `d_tmp = chi - 2 * inv_tau * sign(a)`, `delta = -2|d_tmp|`, probabilities
/// from the logistic PLA (or the literal shift-add pair), the mean from the
/// flag row, and the residual `d = b - G x_hat` without feedback.
pub fn hf_amp_detect_iterates<S: QuantSink>(
    b: &[f64],
    g: &Matrix,
    cfg: &DetectorConfig,
    sink: &mut S,
) -> Result<Vec<Vec<f64>>, DetectorError> {
    cfg.validate()?;
    let n = check_dimensions(b, g)?;
    let f1 = cfg.pla_logistic.as_ref().expect("validated");
    let f2 = cfg.pla_reciprocal.as_ref().expect("validated");
    let mut st = Stage::new(cfg.profile.as_ref(), sink);

    let b_q: Vec<f64> = b.iter().map(|&v| st.apply(Var::B, v)).collect();
    let mut g_q = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            g_q.set(i, j, st.apply(Var::G, g.at(i, j)));
        }
    }
    let sigma2 = st.apply(Var::Sigma2, cfg.sigma2);

    // tau is constant, so its reciprocal is computed once up front
    let tau = st.apply(Var::Tau, sigma2);
    let inv_tau = st.apply(Var::InvTau, f2.eval(tau));
    let two_inv_tau = 2.0 * inv_tau; // exact binary shift

    let mut x_hat = vec![initial_estimate(cfg); n];
    let mut x_next = vec![0.0; n];
    let mut d = b_q.clone();
    let mut iterates = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        for i in 0..n {
            let z = st.apply(Var::Z, x_hat[i] + d[i]);
            let fl = interval_flags(z);
            let chi = st.apply(Var::Chi, z * inv_tau);
            let d_tmp = chi - fl.a_sign() * two_inv_tau;
            let delta = st.apply(Var::Delta, -2.0 * fabs(d_tmp));
            let (rho1, rho2) = match cfg.hf_rho_mode {
                HfRhoMode::ChordPla => {
                    let r1 = st.apply(Var::Rho, f1.eval(delta));
                    let r2 = st.apply(Var::Rho, 1.0 - r1);
                    (r1, r2)
                }
                HfRhoMode::PaperLiteral => {
                    let r1 = st.apply(Var::Rho, -fabs(d_tmp) - 0.125);
                    let r2 = st.apply(Var::Rho, fabs(d_tmp) + 0.875);
                    (r1, r2)
                }
            };
            let weighted = st.apply(Var::OmegaRho, mean_select(fl.f1, fl.f2, fl.f3, rho1, rho2));
            x_next[i] = st.apply(Var::XHat, weighted);
        }
        for i in 0..n {
            let mut acc = 0.0;
            let row = g_q.row(i);
            for j in 0..n {
                acc += st.apply(Var::GxHat, row[j] * x_next[j]);
            }
            let row_sum = st.apply(Var::SumGxHat, acc);
            d[i] = st.apply(Var::D, b_q[i] - row_sum);
        }
        core::mem::swap(&mut x_hat, &mut x_next);
        iterates.push(x_hat.clone());
    }
    Ok(iterates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{nna_amp_detect, DetectorVariant};
    use crate::mimo::Constellation;

    fn hf_cfg(sigma2: f64, beta: f64) -> DetectorConfig {
        DetectorConfig::new(DetectorVariant::HfAmp, Constellation::for_qam(16).unwrap(), sigma2, beta)
    }

    #[test]
    fn traced_case_a_omega_zero() {
        // z = 0.5, tau = 1 (clipped into the reciprocal segment):
        // inv_tau = f2(1) = 4.25, chi = 2.125, a = 0 so delta = -2|chi|,
        // clipped to -4 by the logistic PLA giving rho1 = 1.
        let f2 = super::super::default_reciprocal_pla();
        assert_eq!(f2.eval(1.0), 4.25);
        let f1 = super::super::default_logistic_pla();
        let chi: f64 = 0.5 * 4.25;
        let delta = -2.0 * chi.abs();
        assert_eq!(delta, -4.25);
        assert_eq!(f1.eval(delta), 1.0); // clipped to eta_a = -4
    }

    #[test]
    fn missing_pla_is_rejected() {
        let mut cfg = hf_cfg(0.1, 0.0625);
        cfg.pla_logistic = None;
        let g = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            hf_amp_detect(&[0.5, 0.5], &g, &cfg),
            Err(DetectorError::InvalidConfig(_))
        ));
    }

    #[test]
    fn validity_warning_tracks_beta() {
        assert!(hf_cfg(0.1, 0.0625).hf_validity_warning().is_none());
        assert!(hf_cfg(0.1, 0.25).hf_validity_warning().is_some());
    }

    #[test]
    fn agrees_with_floating_nna_when_feedback_vanishes() {
        // With beta -> 0 the residual updates coincide term for term; the
        // remaining differences are only the PLA approximations, which are
        // exact at tau = 0.125 (f2 hits 8 = 1/0.125 on the grid) and small
        // for saturated probabilities.
        let g = Matrix::from_rows(2, 2, vec![1.0, 0.01, 0.01, 1.0]);
        let b = [0.92, -2.95];
        let mut hf = hf_cfg(0.125, 1e-12);
        hf.iterations = 4;
        let mut nna = DetectorConfig::new(
            DetectorVariant::NnaAmp,
            Constellation::for_qam(16).unwrap(),
            0.125,
            1e-12,
        );
        nna.iterations = 4;
        let a = hf_amp_detect(&b, &g, &hf).unwrap();
        let c = nna_amp_detect(&b, &g, &nna).unwrap();
        for (x, y) in a.iter().zip(&c) {
            assert!((x - y).abs() < 5e-3, "hf {x} nna {y}");
        }
    }

    #[test]
    fn paper_literal_mode_produces_the_stated_pair() {
        let mut cfg = hf_cfg(0.125, 0.0625);
        cfg.hf_rho_mode = HfRhoMode::PaperLiteral;
        // inv_tau = 8, z = 0.25 -> chi = 2, a = 0 -> d_tmp = 2
        // rho1 = -2.125, rho2 = 2.875: not probabilities, by construction
        let g = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let out = hf_amp_detect(&[0.25, 0.25], &g, &cfg);
        assert!(out.is_ok());
    }
}
