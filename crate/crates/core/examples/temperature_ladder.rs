//! Two exchanging sites coalesce into one line as the rotor warms up.

use mqed_nmr::cli::RunConfig;
use mqed_nmr::molecular::cosine_rotor;
use mqed_nmr::reconstruction::{temperature_ladder, SpectralBasis};

fn main() -> anyhow::Result<()> {
    let mut cfg = RunConfig::defaults();
    cfg.apply_preset("ladder")?;
    let basis = SpectralBasis::new(cfg.forward_model()?)?;
    let steps = temperature_ladder(cosine_rotor(cfg.barrier()?, 2), &cfg.ladder()?, &basis)?;
    for s in &steps {
        let peaks: Vec<String> = s.peaks_ppm.iter().map(|p| format!("{p:+.3}")).collect();
        println!(
            "{:>7} K  peaks [{}]  separation {:.3} ppm",
            s.temperature,
            peaks.join(", "),
            s.separation_ppm
        );
    }
    Ok(())
}
