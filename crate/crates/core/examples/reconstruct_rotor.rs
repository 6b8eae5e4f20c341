//! Recovers a hindered-rotor angular density from its spectrum.

use mqed_nmr::cli::{RunConfig, ROUND_TRIP_TARGET, ROUND_TRIP_TRUTH};
use mqed_nmr::io::read_target;
use mqed_nmr::molecular::NuclearDensity;
use mqed_nmr::reconstruction::{reconstruct, ReconstructionOptions, SpectralBasis};

fn main() -> anyhow::Result<()> {
    let mut cfg = RunConfig::defaults();
    cfg.apply_preset("round-trip")?;
    let basis = SpectralBasis::new(cfg.forward_model()?)?;
    let target = read_target(ROUND_TRIP_TARGET)?;
    let truth = NuclearDensity::from_table(ROUND_TRIP_TRUTH)?;
    let initial = cfg.initial_density(basis.grid_size())?;

    let rec = reconstruct(&target, &basis, &initial, &ReconstructionOptions::default())?;
    println!(
        "{} evaluations, relative misfit {:.2e}, total variation to truth {:.3} -> {:.4}",
        rec.evaluations,
        rec.misfit,
        initial.total_variation(&truth)?,
        rec.density.total_variation(&truth)?
    );
    let (got, want) = (rec.density.weights().unwrap(), truth.weights().unwrap());
    println!("angle index   recovered   truth");
    for i in (0..got.len()).step_by(8) {
        println!("{i:>8}      {:.4}      {:.4}", got[i], want[i]);
    }
    Ok(())
}
