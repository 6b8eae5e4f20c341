//! Shielded equilibrium polarisation: the exact two-level result saturates
//! while the high-temperature expansion grows linearly with the field.

use mqed_nmr::integrate::QuadConfig;
use mqed_nmr::shielding::{equilibrium_iz, shielding_reduced, PolarizationMode};
use mqed_nmr::spin::SpinSpec;
use mqed_nmr::units::{wavenumber_to_si, CouplingFunction, ThermalParams, HBAR};

fn main() -> mqed_nmr::Result<()> {
    let thermal = ThermalParams::new(293.0)?;
    let phi = CouplingFunction::rectangular(0.0, wavenumber_to_si(4.0, "mm^-1")?)?;
    let a = shielding_reduced(&phi, &thermal, &Default::default(), &QuadConfig::default())?.value;
    println!("a = {a:.4e}");
    println!("B (T)      exact reduction / bound   approximate / bound");
    for b in [1.0, 10.0, 100.0, 1e3, 1e4] {
        let exact = equilibrium_iz(SpinSpec::proton(), b, thermal, a, PolarizationMode::Exact)?;
        let approx = equilibrium_iz(SpinSpec::proton(), b, thermal, a, PolarizationMode::Approximate)?;
        let bound = 0.5 * HBAR * exact.coefficient.abs();
        println!("{b:<10} {:<25.4} {:.4}", exact.reduction / bound, approx.reduction / bound);
    }
    Ok(())
}
