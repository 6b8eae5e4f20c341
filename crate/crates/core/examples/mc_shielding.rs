//! Full configuration-space Monte Carlo against the reduced radial integral.
//!
//! The Monte Carlo draws are stratified and split into fixed ChaCha20
//! streams, so the estimate does not depend on the thread count.

use mqed_nmr::integrate::{McConfig, QuadConfig};
use mqed_nmr::molecular::MolecularState;
use mqed_nmr::shielding::{shielding_full, shielding_reduced};
use mqed_nmr::units::{wavenumber_to_si, CouplingFunction, ThermalParams};

fn main() -> mqed_nmr::Result<()> {
    let thermal = ThermalParams::new(293.0)?;
    let state = MolecularState::hydrogen(thermal);
    let mc = McConfig {
        samples: 400_000,
        strata: 64,
        seed: 7,
    };
    for mm in [4.0, 8.0, 11.0] {
        let phi = CouplingFunction::rectangular(0.0, wavenumber_to_si(mm, "mm^-1")?)?;
        let reduced = shielding_reduced(&phi, &thermal, &Default::default(), &QuadConfig::default())?;
        let full = shielding_full(&phi, &state, &mc)?;
        println!(
            "{mm:>4} mm^-1: reduced {:.6e}, Monte Carlo {:.6e} +- {:.1e} ({:+.2} SE)",
            reduced.value,
            full.value,
            full.error_estimate,
            (full.value - reduced.value) / full.error_estimate
        );
    }
    Ok(())
}
