// scratch probe; replaced by the real CLI later
use quantamp_cli::io::{builtin, parse_profile};
use quantamp_cli::sweep::{ber_sweep, DetectorSpec, SweepConfig};
use quantamp_core::detector::DetectorVariant;
use quantamp_core::mimo::{SnrConvention, SystemConfig};

fn main() {
    let hfp = parse_profile(builtin::HFAMP_AHPQ).unwrap();
    let system = SystemConfig {
        n_t: 32, n_r: 128, qam_order: 16, snr_db: 12.0,
        convention: SnrConvention::TotalRxOverTotalNoise, seed: 1,
    };
    let specs = vec![
        DetectorSpec::floating(DetectorVariant::NnaAmp),
        DetectorSpec::quantized(DetectorVariant::HfAmp, hfp, "hfamp_ahpq"),
    ];
    let cfg = SweepConfig {
        system,
        snrs_db: vec![12.0],
        min_error_events: u64::MAX,
        max_frames: 40_000,
        batch_frames: 4096,
    };
    let t0 = std::time::Instant::now();
    let res = ber_sweep(&cfg, &specs).unwrap();
    println!("({:?})", t0.elapsed());
    let p = &res.points[0];
    println!("nt=32 snr=12: nna_float={:.4e} hf={:.4e} ratio={:.1}", p.ber(0), p.ber(1), p.ber(1)/p.ber(0));
}
