use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use mqed_nmr::cli::{output_dir, run, Command, RunConfig};
use std::path::PathBuf;

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Shielding,
    Dynamics,
    Spectrum,
    Sweep,
    Reconstruct,
    Baseline,
}

/// NMR shielding, FID signals and spectra from thermal molecular QED.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Named parameter set applied before the config file (e.g. `decay-0.1`).
    #[arg(long)]
    preset: Option<String>,
    /// Configuration file (`key = value` with units); output headers work too.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set "delta_uv = 8 mm^-1"`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (default: $MQED_NMR_OUTPUT_DIR or `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let mut cfg = RunConfig::defaults();
    if let Some(name) = &args.preset {
        cfg.apply_preset(name)?;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.parse_into(&text).with_context(|| format!("in {}", path.display()))?;
    }
    for o in &args.overrides {
        let (k, v) = o.split_once('=').context("override must be KEY=VALUE")?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = args.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(w) = args.workers {
        cfg.set("workers", &w.to_string())?;
    }
    let command = match args.command {
        Cmd::Shielding => Command::Shielding,
        Cmd::Dynamics => Command::Dynamics,
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Sweep => Command::Sweep,
        Cmd::Reconstruct => Command::Reconstruct,
        Cmd::Baseline => Command::Baseline,
    };
    let report = run(command, &cfg, &output_dir(args.out.as_deref()))?;
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    for f in &report.files {
        eprintln!("wrote {}", f.display());
    }
    if report.failures > 0 {
        anyhow::bail!("{} computation(s) failed", report.failures);
    }
    Ok(())
}
