//! Drives the command layer from a preset, as the binary does, and replays
//! the run from the header of one of its output files.

use mqed_nmr::cli::{run, Command, RunConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::temp_dir().join("mqed-nmr-cli-presets");
    let mut cfg = RunConfig::defaults();
    cfg.apply_preset("lineshape-mm")?;
    cfg.set("workers", "2")?;
    let report = run(Command::Sweep, &cfg, &out)?;
    println!("{}", serde_json::to_string_pretty(&report.summary)?);

    let header = std::fs::read_to_string(out.join("sweep.csv"))?;
    let mut replay = RunConfig::defaults();
    replay.parse_into(&header)?;
    assert_eq!(replay.entries(), cfg.entries());
    println!("replayed configuration matches; files in {}", out.display());
    Ok(())
}
