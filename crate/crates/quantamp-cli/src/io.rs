//! File formats: quantization profiles (JSON), BER records (CSV), network
//! checkpoints (JSON), reward histories (CSV), and episode logs (JSON lines).

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use quantamp_core::ppo::{Activation, Mlp};
use quantamp_core::profile::{ProfileOrigin, QuantProfile, Var, ALL_VARS, HF_VARS};
use quantamp_core::quant::QuantScheme;

/// On-disk profile schema.
#[derive(Debug, Serialize, Deserialize)]
pub struct ProfileFile {
    pub version: u32,
    pub origin: String,
    pub variables: Vec<VariableRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VariableRecord {
    pub k: usize,
    pub name: String,
    pub p: u32,
    pub q: u32,
}

/// Bundled profiles, byte-identical to the files under `assets/profiles/`.
pub mod builtin {
    /// Searched hybrid-precision allocation for the 21-variable detector.
    pub const TABLE4_AHPQ: &str = include_str!("../../../assets/profiles/table4_ahpq.json");
    /// Uniform 1-6-6 baseline.
    pub const UQ_166: &str = include_str!("../../../assets/profiles/uq_166.json");
    /// 14-variable allocation for the hardware-friendly detector.
    pub const HFAMP_AHPQ: &str = include_str!("../../../assets/profiles/hfamp_ahpq.json");
}

pub fn parse_profile(json: &str) -> Result<QuantProfile> {
    let file: ProfileFile = serde_json::from_str(json).context("malformed profile JSON")?;
    if file.version != 1 {
        bail!("unsupported profile version {}", file.version);
    }
    let origin = ProfileOrigin::parse(&file.origin)
        .with_context(|| format!("unknown profile origin '{}'", file.origin))?;
    let records = file
        .variables
        .iter()
        .map(|r| (r.k, r.name.as_str(), QuantScheme::new(r.p, r.q)));
    QuantProfile::from_records(records, origin).map_err(|e| anyhow::anyhow!("{e}"))
}

/// Load a complete 21-variable profile.
pub fn load_profile(path: &Path) -> Result<QuantProfile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading profile {}", path.display()))?;
    let profile = parse_profile(&text)?;
    profile.require(&ALL_VARS).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(profile)
}

/// Load a profile that must cover at least the hardware-friendly subset.
pub fn load_hf_profile(path: &Path) -> Result<QuantProfile> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading profile {}", path.display()))?;
    let profile = parse_profile(&text)?;
    profile.require(&HF_VARS).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(profile)
}

pub fn profile_to_json(profile: &QuantProfile) -> String {
    let file = ProfileFile {
        version: 1,
        origin: profile.origin.as_str().to_string(),
        variables: profile
            .iter()
            .map(|(var, s)| VariableRecord {
                k: var.k(),
                name: var.name().to_string(),
                p: s.p,
                q: s.q,
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("profile serializes");
    out.push('\n');
    out
}

pub fn save_profile(profile: &QuantProfile, path: &Path) -> Result<()> {
    fs::write(path, profile_to_json(profile))
        .with_context(|| format!("writing profile {}", path.display()))
}

/// Resolve a `--profile` argument: `float`, a builtin alias, or a path.
pub fn resolve_profile(arg: &str) -> Result<Option<QuantProfile>> {
    match arg {
        "float" | "none" => Ok(None),
        "table4_ahpq" => Ok(Some(parse_profile(builtin::TABLE4_AHPQ)?)),
        "uq_166" => Ok(Some(parse_profile(builtin::UQ_166)?)),
        "hfamp_ahpq" => Ok(Some(parse_profile(builtin::HFAMP_AHPQ)?)),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading profile {path}"))?;
            Ok(Some(parse_profile(&text)?))
        }
    }
}

/// One row of the BER record CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub detector: String,
    pub profile: String,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub seed: u64,
    pub convention: String,
}

pub const BER_CSV_HEADER: &str = "snr_db,detector,profile,bits,errors,ber,seed,convention";

pub fn write_ber_csv(records: &[BerRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{BER_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.snr_db, r.detector, r.profile, r.bits, r.errors, r.ber, r.seed, r.convention
        )?;
    }
    Ok(())
}

pub fn save_ber_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    write_ber_csv(records, std::io::BufWriter::new(file))
}

pub fn read_ber_csv(path: &Path) -> Result<Vec<BerRecord>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().context("empty CSV")?;
    if header != BER_CSV_HEADER {
        bail!("unexpected CSV header: {header}");
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            bail!("line {}: expected 8 fields, found {}", i + 2, fields.len());
        }
        out.push(BerRecord {
            snr_db: fields[0].parse()?,
            detector: fields[1].to_string(),
            profile: fields[2].to_string(),
            bits: fields[3].parse()?,
            errors: fields[4].parse()?,
            ber: fields[5].parse()?,
            seed: fields[6].parse()?,
            convention: fields[7].to_string(),
        });
    }
    Ok(out)
}

/// Versioned JSON dump of one fully connected network: layer sizes,
/// row-major weights and biases per layer, activation id.
#[derive(Debug, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    /// `weights[l]` has `layer_sizes[l+1] * layer_sizes[l]` entries, row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

pub fn checkpoint_from_mlp(net: &Mlp) -> NetworkCheckpoint {
    NetworkCheckpoint {
        version: 1,
        layer_sizes: net.layer_sizes().to_vec(),
        activation: match net.activation() {
            Activation::Tanh => "tanh".to_string(),
            Activation::Relu => "relu".to_string(),
        },
        weights: net.weights_row_major(),
        biases: net.biases().to_vec(),
    }
}

pub fn mlp_from_checkpoint(ck: &NetworkCheckpoint) -> Result<Mlp> {
    if ck.version != 1 {
        bail!("unsupported checkpoint version {}", ck.version);
    }
    let activation = match ck.activation.as_str() {
        "tanh" => Activation::Tanh,
        "relu" => Activation::Relu,
        other => bail!("unknown activation '{other}'"),
    };
    Mlp::from_parameters(&ck.layer_sizes, activation, &ck.weights, &ck.biases)
        .map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn save_checkpoint(net: &Mlp, path: &Path) -> Result<()> {
    let ck = checkpoint_from_mlp(net);
    let mut text = serde_json::to_string(&ck)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing checkpoint {}", path.display()))
}

pub fn load_checkpoint(path: &Path) -> Result<Mlp> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    let ck: NetworkCheckpoint = serde_json::from_str(&text)?;
    mlp_from_checkpoint(&ck)
}

/// Reward history CSV: `update_index,mean_reward`.
pub fn save_reward_history(history: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("update_index,mean_reward\n");
    for (i, r) in history.iter().enumerate() {
        out.push_str(&format!("{i},{r}\n"));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// One environment step in the episode log.
#[derive(Debug, Serialize, Deserialize)]
pub struct EpisodeLogRecord {
    pub episode: u64,
    pub t: u32,
    pub k: usize,
    pub q_vector: Vec<u32>,
    pub action: i64,
    pub reward: f64,
}

pub fn append_episode_log(records: &[EpisodeLogRecord], mut w: impl Write) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Fixed variable order used when flattening a q-vector for the log.
pub fn q_vector_order() -> Vec<Var> {
    ALL_VARS.to_vec()
}
