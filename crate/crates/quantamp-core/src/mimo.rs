//! System model: Rayleigh MIMO channel, QAM modulation, real-valued
//! equivalent model, matched filter and Gram matrix, bit-error counting.
//!
//! The complex `N_r x N_t` system `y = H x + n` is carried as its standard
//! real equivalent of twice the dimensions; detectors only ever see the real
//! model. All randomness is drawn from caller-provided RNGs so frames are
//! reproducible and parallelizable (see [`crate::rng`]).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub enum MimoError {
    InvalidConfig(String),
    BitCountMismatch { expected: usize, found: usize },
    DimensionMismatch(String),
}

impl fmt::Display for MimoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MimoError::InvalidConfig(msg) => write!(f, "invalid system config: {msg}"),
            MimoError::BitCountMismatch { expected, found } => {
                write!(f, "bit count mismatch: expected {expected}, found {found}")
            }
            MimoError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MimoError {}

/// How `E_s/N_0` maps to the complex-model noise variance. The literature
/// rarely states this mapping, so it is explicit here and recorded in every
/// emitted result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrConvention {
    /// Total received signal power over total noise power:
    /// `sigma2 = N_t * Es / (N_r * 10^(snr/10))`.
    #[default]
    TotalRxOverTotalNoise,
    /// Per-symbol energy over noise variance: `sigma2 = Es / 10^(snr/10)`.
    SymbolEnergyOverN0,
    /// Total transmit power over noise variance:
    /// `sigma2 = N_t * Es / 10^(snr/10)`.
    TxPowerOverN0,
}

impl SnrConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            SnrConvention::TotalRxOverTotalNoise => "total_rx_over_total_noise",
            SnrConvention::SymbolEnergyOverN0 => "symbol_energy_over_n0",
            SnrConvention::TxPowerOverN0 => "tx_power_over_n0",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "total_rx_over_total_noise" => Some(SnrConvention::TotalRxOverTotalNoise),
            "symbol_energy_over_n0" => Some(SnrConvention::SymbolEnergyOverN0),
            "tx_power_over_n0" => Some(SnrConvention::TxPowerOverN0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Transmit antennas.
    pub n_t: usize,
    /// Receive antennas.
    pub n_r: usize,
    /// QAM order `Q` (a power of 4).
    pub qam_order: u32,
    /// Operating `E_s/N_0` in dB.
    pub snr_db: f64,
    pub convention: SnrConvention,
    /// Master seed for frame streams.
    pub seed: u64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), MimoError> {
        if self.n_t < 1 {
            return Err(MimoError::InvalidConfig(String::from("n_t must be >= 1")));
        }
        if self.n_r < self.n_t {
            return Err(MimoError::InvalidConfig(String::from("n_r must be >= n_t")));
        }
        let q = self.qam_order;
        let valid_q = q >= 4 && q.is_power_of_two() && q.trailing_zeros() % 2 == 0;
        if !valid_q {
            return Err(MimoError::InvalidConfig(String::from(
                "QAM order must be a perfect-square power of 4 (4, 16, 64, ...)",
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(MimoError::InvalidConfig(String::from("snr_db must be finite")));
        }
        Ok(())
    }

    /// Load factor `beta = N_t / N_r` (invariant under realification).
    pub fn beta(&self) -> f64 {
        self.n_t as f64 / self.n_r as f64
    }

    /// Transmitted bits per channel use: `N_t * log2(Q)`.
    pub fn bits_per_frame(&self) -> usize {
        self.n_t * self.qam_order.trailing_zeros() as usize
    }
}

/// Real one-dimensional PAM constellation underlying a square QAM: the
/// unnormalized odd-integer grid with a binary-reflected Gray labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    levels: Vec<f64>,
    /// Gray code of each level index, in level order.
    gray_codes: Vec<u16>,
    /// Level index for each Gray code.
    gray_inverse: Vec<usize>,
    bits_per_dim: usize,
    es_real: f64,
}

impl Constellation {
    /// Per-dimension constellation of a square `Q`-QAM. For 16-QAM the
    /// levels are `{-3, -1, 1, 3}` with labels `00, 01, 11, 10`.
    pub fn for_qam(qam_order: u32) -> Result<Self, MimoError> {
        let valid = qam_order >= 4
            && qam_order.is_power_of_two()
            && qam_order.trailing_zeros() % 2 == 0;
        if !valid {
            return Err(MimoError::InvalidConfig(String::from(
                "QAM order must be a perfect-square power of 4",
            )));
        }
        let m = 1usize << (qam_order.trailing_zeros() / 2); // sqrt(Q)
        let bits_per_dim = m.trailing_zeros() as usize;
        let levels: Vec<f64> =
            (0..m).map(|i| (2 * i as i64 - (m as i64 - 1)) as f64).collect();
        let gray_codes: Vec<u16> = (0..m).map(|i| (i ^ (i >> 1)) as u16).collect();
        let mut gray_inverse = vec![0usize; m];
        for (idx, &code) in gray_codes.iter().enumerate() {
            gray_inverse[code as usize] = idx;
        }
        let es_real = levels.iter().map(|l| l * l).sum::<f64>() / m as f64;
        Ok(Self { levels, gray_codes, gray_inverse, bits_per_dim, es_real })
    }

    #[inline]
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    #[inline]
    pub fn bits_per_dim(&self) -> usize {
        self.bits_per_dim
    }

    /// Mean per-real-dimension symbol energy (5 for 16-QAM).
    #[inline]
    pub fn es_real(&self) -> f64 {
        self.es_real
    }

    /// Mean complex symbol energy (10 for 16-QAM).
    #[inline]
    pub fn es_complex(&self) -> f64 {
        2.0 * self.es_real
    }

    /// Map `bits_per_dim` bits (MSB first) to a level.
    pub fn map_bits(&self, bits: &[u8]) -> f64 {
        debug_assert_eq!(bits.len(), self.bits_per_dim);
        let mut code = 0usize;
        for &b in bits {
            code = (code << 1) | (b as usize & 1);
        }
        self.levels[self.gray_inverse[code]]
    }

    /// Bits (MSB first) for the level at `index`.
    pub fn demap_index(&self, index: usize, out: &mut [u8]) {
        debug_assert_eq!(out.len(), self.bits_per_dim);
        let code = self.gray_codes[index];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = ((code >> (self.bits_per_dim - 1 - i)) & 1) as u8;
        }
    }

    /// Index of the nearest level; at midpoints the smaller level wins.
    pub fn hard_decision(&self, v: f64) -> usize {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (i, &l) in self.levels.iter().enumerate() {
            let d = abs(v - l);
            // strict `<` keeps the earlier (smaller) level on ties
            if d < best_dist {
                best_dist = d;
                best = i;
            }
        }
        best
    }
}

/// Complex matrix as a pair of real matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub re: Matrix,
    pub im: Matrix,
}

/// One simulated channel use, with everything a detector needs.
#[derive(Debug, Clone)]
pub struct MimoInstance {
    /// Real-model channel, `2N_r x 2N_t`.
    pub h_real: Matrix,
    /// Transmitted real symbols, length `2N_t`.
    pub x: Vec<f64>,
    /// Transmitted bits.
    pub bits: Vec<u8>,
    /// Received vector, length `2N_r`.
    pub y: Vec<f64>,
    /// Matched-filter output `b = H^T y`.
    pub b: Vec<f64>,
    /// Gram matrix `G = H^T H`.
    pub g: Matrix,
    /// Real-model noise variance.
    pub sigma2_real: f64,
}

/// i.i.d. Rayleigh channel: entries circularly-symmetric complex Gaussian
/// with per-entry variance `1/N_r`.
pub fn generate_channel<R: Rng + ?Sized>(n_r: usize, n_t: usize, rng: &mut R) -> ComplexMatrix {
    let comp_std = sqrt(1.0 / (2.0 * n_r as f64));
    let mut re = Matrix::zeros(n_r, n_t);
    let mut im = Matrix::zeros(n_r, n_t);
    for i in 0..n_r {
        for j in 0..n_t {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            re.set(i, j, a * comp_std);
            im.set(i, j, b * comp_std);
        }
    }
    ComplexMatrix { re, im }
}

/// Real block equivalent `[[Re H, -Im H], [Im H, Re H]]`.
pub fn to_real_matrix(h: &ComplexMatrix) -> Matrix {
    let (n_r, n_t) = (h.re.rows(), h.re.cols());
    let mut out = Matrix::zeros(2 * n_r, 2 * n_t);
    for i in 0..n_r {
        for j in 0..n_t {
            let re = h.re.at(i, j);
            let im = h.im.at(i, j);
            out.set(i, j, re);
            out.set(i, j + n_t, -im);
            out.set(i + n_r, j, im);
            out.set(i + n_r, j + n_t, re);
        }
    }
    out
}

/// Stack `[Re; Im]` of a complex vector.
pub fn to_real_vector(re: &[f64], im: &[f64]) -> Vec<f64> {
    debug_assert_eq!(re.len(), im.len());
    let mut out = Vec::with_capacity(2 * re.len());
    out.extend_from_slice(re);
    out.extend_from_slice(im);
    out
}

/// `(complex variance, real-model variance)` of the noise for `cfg`.
pub fn snr_to_noise_var(cfg: &SystemConfig, cons: &Constellation) -> (f64, f64) {
    let gamma = powf10(cfg.snr_db / 10.0);
    let es = cons.es_complex();
    let complex_var = match cfg.convention {
        SnrConvention::TotalRxOverTotalNoise => cfg.n_t as f64 * es / (cfg.n_r as f64 * gamma),
        SnrConvention::SymbolEnergyOverN0 => es / gamma,
        SnrConvention::TxPowerOverN0 => cfg.n_t as f64 * es / gamma,
    };
    (complex_var, complex_var / 2.0)
}

/// Gray-map a bit sequence onto `2N_t` real symbols. Bits are consumed
/// `bits_per_dim` at a time, MSB first, one group per real dimension in
/// model order (all real parts, then all imaginary parts).
pub fn modulate(bits: &[u8], cons: &Constellation, n_t: usize) -> Result<Vec<f64>, MimoError> {
    let expected = 2 * n_t * cons.bits_per_dim();
    if bits.len() != expected {
        return Err(MimoError::BitCountMismatch { expected, found: bits.len() });
    }
    Ok(bits
        .chunks_exact(cons.bits_per_dim())
        .map(|chunk| cons.map_bits(chunk))
        .collect())
}

/// Hard-decide symbol estimates, demap through the Gray labeling, and count
/// bit disagreements against the transmitted bits.
pub fn count_bit_errors(
    x_hat: &[f64],
    bits: &[u8],
    cons: &Constellation,
) -> Result<(u64, u64), MimoError> {
    let bpd = cons.bits_per_dim();
    if bits.len() != x_hat.len() * bpd {
        return Err(MimoError::DimensionMismatch(String::from(
            "bit count does not match estimate count",
        )));
    }
    let mut errors = 0u64;
    let mut decided = vec![0u8; bpd];
    for (i, &est) in x_hat.iter().enumerate() {
        let idx = cons.hard_decision(est);
        cons.demap_index(idx, &mut decided);
        for (a, b) in decided.iter().zip(&bits[i * bpd..(i + 1) * bpd]) {
            if a != b {
                errors += 1;
            }
        }
    }
    Ok((errors, bits.len() as u64))
}

/// Simulate one channel use: random bits, Gray modulation, Rayleigh channel,
/// AWGN at the configured SNR, matched filter and Gram matrix.
pub fn simulate_frame<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    cons: &Constellation,
    rng: &mut R,
) -> Result<MimoInstance, MimoError> {
    cfg.validate()?;
    let bits: Vec<u8> = (0..cfg.bits_per_frame()).map(|_| rng.gen_range(0..=1u8)).collect();
    let x = modulate(&bits, cons, cfg.n_t)?;
    let h = generate_channel(cfg.n_r, cfg.n_t, rng);
    let h_real = to_real_matrix(&h);
    let (_, sigma2_real) = snr_to_noise_var(cfg, cons);
    let noise_std = sqrt(sigma2_real);
    let mut y = h_real.mul_vec(&x);
    for v in y.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v += n * noise_std;
    }
    let b = h_real.transpose_mul_vec(&y);
    let g = h_real.gram();
    Ok(MimoInstance { h_real, x, bits, y, b, g, sigma2_real })
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
fn abs(v: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        v.abs()
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::abs(v)
    }
}

#[inline]
fn powf10(e: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        10f64.powf(e)
    }
    #[cfg(not(feature = "std"))]
    {
        num_traits::Float::powf(10f64, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Domain};

    fn cfg_128x8() -> SystemConfig {
        SystemConfig {
            n_t: 8,
            n_r: 128,
            qam_order: 16,
            snr_db: 6.0,
            convention: SnrConvention::TotalRxOverTotalNoise,
            seed: 1,
        }
    }

    #[test]
    fn constellation_16qam() {
        let c = Constellation::for_qam(16).unwrap();
        assert_eq!(c.levels(), &[-3.0, -1.0, 1.0, 3.0]);
        assert_eq!(c.es_real(), 5.0);
        assert_eq!(c.map_bits(&[0, 0]), -3.0);
        assert_eq!(c.map_bits(&[0, 1]), -1.0);
        assert_eq!(c.map_bits(&[1, 1]), 1.0);
        assert_eq!(c.map_bits(&[1, 0]), 3.0);
    }

    #[test]
    fn gray_adjacency_holds_for_all_supported_orders() {
        for q in [4u32, 16, 64, 256] {
            let c = Constellation::for_qam(q).unwrap();
            let mut prev = vec![0u8; c.bits_per_dim()];
            let mut cur = vec![0u8; c.bits_per_dim()];
            for i in 1..c.levels().len() {
                c.demap_index(i - 1, &mut prev);
                c.demap_index(i, &mut cur);
                let diff: usize =
                    prev.iter().zip(&cur).map(|(a, b)| usize::from(a != b)).sum();
                assert_eq!(diff, 1, "levels {} and {} differ in {} bits", i - 1, i, diff);
            }
        }
    }

    #[test]
    fn channel_shape_and_determinism() {
        let mut rng = stream_rng(9, Domain::Sweep, 0);
        let h = generate_channel(128, 8, &mut rng);
        assert_eq!(h.re.rows(), 128);
        assert_eq!(h.re.cols(), 8);
        let mut rng2 = stream_rng(9, Domain::Sweep, 0);
        let h2 = generate_channel(128, 8, &mut rng2);
        assert_eq!(h, h2);
    }

    #[test]
    fn channel_variance_statistics() {
        // 1e6 complex entries; real components should have variance 1/(2*128)
        let mut rng = stream_rng(11, Domain::Sweep, 0);
        let n = 1_000_000usize / (128 * 8) + 1;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for _ in 0..n {
            let h = generate_channel(128, 8, &mut rng);
            for v in h.re.data().iter().chain(h.im.data().iter()) {
                sum_sq += v * v;
                count += 1;
            }
        }
        let var = sum_sq / count as f64;
        let expected = 1.0 / 256.0;
        let se = expected * (2.0 / count as f64).sqrt();
        assert!((var - expected).abs() < 3.0 * se, "var={var}, expected={expected}");
    }

    #[test]
    fn to_real_block_form() {
        // H = [[1 + 1j]] -> [[1, -1], [1, 1]]
        let h = ComplexMatrix {
            re: Matrix::from_rows(1, 1, vec![1.0]),
            im: Matrix::from_rows(1, 1, vec![1.0]),
        };
        let r = to_real_matrix(&h);
        assert_eq!(r.data(), &[1.0, -1.0, 1.0, 1.0]);
        // x = [2 + 3j] through identity
        let ident = ComplexMatrix {
            re: Matrix::from_rows(1, 1, vec![1.0]),
            im: Matrix::from_rows(1, 1, vec![0.0]),
        };
        let y = to_real_matrix(&ident).mul_vec(&to_real_vector(&[2.0], &[3.0]));
        assert_eq!(y, vec![2.0, 3.0]);
    }

    #[test]
    fn real_model_matches_complex_arithmetic() {
        let mut rng = stream_rng(3, Domain::Sweep, 4);
        let h = generate_channel(2, 2, &mut rng);
        let xre = [1.0, -3.0];
        let xim = [-1.0, 3.0];
        // complex product
        let mut yre = [0.0; 2];
        let mut yim = [0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                yre[i] += h.re.at(i, j) * xre[j] - h.im.at(i, j) * xim[j];
                yim[i] += h.re.at(i, j) * xim[j] + h.im.at(i, j) * xre[j];
            }
        }
        let real_path = to_real_matrix(&h).mul_vec(&to_real_vector(&xre, &xim));
        let stacked = to_real_vector(&yre, &yim);
        for (a, b) in real_path.iter().zip(&stacked) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_variance_formulas() {
        let cons = Constellation::for_qam(16).unwrap();
        let mut cfg = cfg_128x8();
        cfg.snr_db = 0.0;
        let (c, r) = snr_to_noise_var(&cfg, &cons);
        assert!((c - 0.625).abs() < 1e-15);
        assert!((r - 0.3125).abs() < 1e-15);
        cfg.snr_db = 6.0;
        let (c6, _) = snr_to_noise_var(&cfg, &cons);
        assert!((c6 - 0.625 / 10f64.powf(0.6)).abs() < 1e-12);
        cfg.snr_db = 300.0;
        let (cinf, _) = snr_to_noise_var(&cfg, &cons);
        assert!(cinf < 1e-25);
    }

    #[test]
    fn modulate_round_trip_and_errors() {
        let cons = Constellation::for_qam(16).unwrap();
        let bits: Vec<u8> = (0..32).map(|i| ((i * 7 + 3) % 2) as u8).collect();
        let x = modulate(&bits, &cons, 8).unwrap();
        assert_eq!(x.len(), 16);
        let (e, n) = count_bit_errors(&x, &bits, &cons).unwrap();
        assert_eq!((e, n), (0, 32));
        assert!(matches!(
            modulate(&bits[..30], &cons, 8),
            Err(MimoError::BitCountMismatch { expected: 32, found: 30 })
        ));
    }

    #[test]
    fn single_level_flip_is_one_bit_error() {
        let cons = Constellation::for_qam(16).unwrap();
        let bits: Vec<u8> = vec![0, 1, 1, 1]; // -1 then 1
        let mut x = modulate(&bits, &cons, 1).unwrap();
        x[0] = 1.0; // flip -1 -> 1, Gray neighbors
        let (e, _) = count_bit_errors(&x, &bits, &cons).unwrap();
        assert_eq!(e, 1);
    }

    #[test]
    fn hard_decision_nearest_and_ties() {
        let cons = Constellation::for_qam(16).unwrap();
        assert_eq!(cons.levels()[cons.hard_decision(0.999)], 1.0);
        assert_eq!(cons.levels()[cons.hard_decision(5.0)], 3.0);
        // midpoint ties break toward the smaller level value
        assert_eq!(cons.levels()[cons.hard_decision(0.0)], -1.0);
        assert_eq!(cons.levels()[cons.hard_decision(2.0)], 1.0);
        assert_eq!(cons.levels()[cons.hard_decision(-2.0)], -3.0);
    }

    #[test]
    fn frame_is_consistent_and_deterministic() {
        let cfg = cfg_128x8();
        let cons = Constellation::for_qam(16).unwrap();
        let mut rng = stream_rng(cfg.seed, Domain::Sweep, 0);
        let f = simulate_frame(&cfg, &cons, &mut rng).unwrap();
        // b equals H^T y recomputed
        let b2 = f.h_real.transpose_mul_vec(&f.y);
        assert_eq!(f.b, b2);
        let mut rng2 = stream_rng(cfg.seed, Domain::Sweep, 0);
        let f2 = simulate_frame(&cfg, &cons, &mut rng2).unwrap();
        assert_eq!(f.y, f2.y);
        assert_eq!(f.bits, f2.bits);
    }

    #[test]
    fn noiseless_frame_is_exact() {
        let mut cfg = cfg_128x8();
        cfg.snr_db = 400.0; // noise variance underflows to ~0
        let cons = Constellation::for_qam(16).unwrap();
        let mut rng = stream_rng(5, Domain::Sweep, 0);
        let f = simulate_frame(&cfg, &cons, &mut rng).unwrap();
        let hx = f.h_real.mul_vec(&f.x);
        for (a, b) in f.y.iter().zip(&hx) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gram_diagonal_near_unit_norm() {
        let cfg = cfg_128x8();
        let cons = Constellation::for_qam(16).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..200 {
            let mut rng = stream_rng(17, Domain::Sweep, i);
            let f = simulate_frame(&cfg, &cons, &mut rng).unwrap();
            for d in 0..f.g.rows() {
                sum += f.g.at(d, d);
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean diag {mean}");
    }

    #[test]
    fn noise_calibration() {
        let cfg = cfg_128x8();
        let cons = Constellation::for_qam(16).unwrap();
        let (_, sigma2) = snr_to_noise_var(&cfg, &cons);
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for i in 0..4000 {
            let mut rng = stream_rng(23, Domain::Sweep, i);
            let f = simulate_frame(&cfg, &cons, &mut rng).unwrap();
            let hx = f.h_real.mul_vec(&f.x);
            for (y, s) in f.y.iter().zip(&hx) {
                let n = y - s;
                sum_sq += n * n;
                count += 1;
            }
        }
        let var = sum_sq / count as f64;
        let se = sigma2 * (2.0 / count as f64).sqrt();
        assert!((var - sigma2).abs() < 3.0 * se, "var={var} sigma2={sigma2}");
    }
}
