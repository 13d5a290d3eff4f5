//! `horolab`: run an experiment, write its outputs and a manifest.
//!
//! Exit codes: 0 success, 1 other failure, 2 config error, 3 precision
//! exhausted, 4 verifier assertion failed (witness in `witness.json`) or a
//! replay digest mismatch.

mod commands;
mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use commands::{CliError, CliResult};
use config::Experiment;

#[derive(Parser)]
#[command(name = "horolab", version, about = "Sparse equidistribution experiments on the modular surface")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    precision_bits: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set n=500` or `--set 'times={kind="exponential",lambda=0.2}'`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Reduced orbit points `u(t_n) k_θ g₀Γ`.
    Orbit(Common),
    /// Discrepancy series of one orbit and its density-one extraction.
    Discrepancy(Common),
    /// Discrepancy of the averaged translated measures.
    Translated(Common),
    /// Weak-type maximal inequality verifier.
    Maximal(Common),
    /// Shift maximal inequality fuzzer.
    ShiftMaximal(Common),
    /// Density-one subsequence merge on a synthetic family.
    Merge(Common),
    /// Conjugation trajectories and their unipotent limits.
    Conjugate {
        #[command(flatten)]
        common: Common,
        /// example, jm or appendix.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Correlations of `f_n` along a sparse schedule.
    Correlations(Common),
    /// Ergodic averages of `f_n` along `N_k = k⁴`.
    Lln(Common),
    /// Jacobson–Morozov triple, weight decomposition and `d_𝔥`.
    Jm(Common),
    /// Ball overlap ratio `μ(hB Δ B)/μ(B)`.
    BallOverlap(Common),
    /// Re-run a manifest and check every output digest.
    Replay {
        manifest: PathBuf,
        #[arg(long, default_value = "replay")]
        out: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    #[serde(flatten)]
    experiment: Experiment,
    derived: serde_json::Map<String, serde_json::Value>,
    versions: BTreeMap<String, String>,
    /// File name to sha256 hex digest.
    outputs: BTreeMap<String, String>,
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn load_table(common: &Common, extra: &[(&str, toml::Value)]) -> CliResult<toml::Table> {
    let mut table = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{o}` is not KEY=VALUE")))?;
        table.insert(k.trim().to_string(), parse_value(v.trim()));
    }
    for (k, v) in extra {
        table.insert(k.to_string(), v.clone());
    }
    if let Some(seed) = common.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    if let Some(bits) = common.precision_bits {
        table.insert("precision_bits".into(), toml::Value::Integer(bits as i64));
    }
    Ok(table)
}

fn experiment(name: &str, table: toml::Table) -> CliResult<Experiment> {
    // Round-trip through JSON so the adjacently tagged enum does the dispatch.
    let config = serde_json::to_value(&table).map_err(|e| CliError::Config(e.to_string()))?;
    serde_json::from_value(serde_json::json!({ "subcommand": name, "config": config }))
        .map_err(|e| CliError::Config(format!("{name}: {e}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    fs::write(dir.join(name), bytes).map_err(|e| CliError::Other(format!("{}: {e}", dir.join(name).display())))
}

/// Runs the experiment and writes outputs plus `manifest.json`. Returns the
/// manifest and whether a verifier assertion failed.
fn execute(exp: Experiment, out: &Path) -> CliResult<(Manifest, bool)> {
    let result = commands::run(&exp)?;
    fs::create_dir_all(out).map_err(|e| CliError::Other(format!("{}: {e}", out.display())))?;
    let mut outputs = BTreeMap::new();
    for (name, bytes) in &result.files {
        write_file(out, name, bytes)?;
        outputs.insert(name.clone(), sha256_hex(bytes));
    }
    let failed = result.violation.is_some();
    if let Some(w) = &result.violation {
        let mut bytes = serde_json::to_vec_pretty(w).map_err(|e| CliError::Other(e.to_string()))?;
        bytes.push(b'\n');
        write_file(out, "witness.json", &bytes)?;
        eprintln!("verifier assertion failed; witness written to {}", out.join("witness.json").display());
    }
    let manifest = Manifest {
        experiment: exp,
        derived: result.derived,
        versions: BTreeMap::from([("horolab".to_string(), env!("CARGO_PKG_VERSION").to_string())]),
        outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Other(e.to_string()))?;
    bytes.push(b'\n');
    write_file(out, "manifest.json", &bytes)?;
    Ok((manifest, failed))
}

fn replay(path: &Path, out: &Path) -> CliResult<u8> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let recorded: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (fresh, _) = execute(recorded.experiment, out)?;
    let mismatched: Vec<&String> = recorded
        .outputs
        .iter()
        .filter(|(name, digest)| fresh.outputs.get(*name) != Some(digest))
        .map(|(name, _)| name)
        .collect();
    if mismatched.is_empty() {
        println!("replay matches {} outputs", recorded.outputs.len());
        Ok(0)
    } else {
        eprintln!("digest mismatch: {mismatched:?}");
        Ok(4)
    }
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    let (name, common, extra): (&str, Common, Vec<(&str, toml::Value)>) = match cli.command {
        Command::Replay { manifest, out } => return replay(&manifest, &out),
        Command::Orbit(c) => ("orbit", c, vec![]),
        Command::Discrepancy(c) => ("discrepancy", c, vec![]),
        Command::Translated(c) => ("translated", c, vec![]),
        Command::Maximal(c) => ("maximal", c, vec![]),
        Command::ShiftMaximal(c) => ("shift-maximal", c, vec![]),
        Command::Merge(c) => ("merge", c, vec![]),
        Command::Conjugate { common, mode, alpha } => {
            let mut extra = Vec::new();
            if let Some(m) = mode {
                extra.push(("mode", toml::Value::String(m)));
            }
            if let Some(a) = alpha {
                extra.push(("alpha", toml::Value::Float(a)));
            }
            ("conjugate", common, extra)
        }
        Command::Correlations(c) => ("correlations", c, vec![]),
        Command::Lln(c) => ("lln", c, vec![]),
        Command::Jm(c) => ("jm", c, vec![]),
        Command::BallOverlap(c) => ("ball-overlap", c, vec![]),
    };
    let exp = experiment(name, load_table(&common, &extra)?)?;
    let (manifest, failed) = execute(exp, &common.out)?;
    println!("{} wrote {} files to {}", name, manifest.outputs.len() + 1, common.out.display());
    Ok(if failed { 4 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
