//! Reduced shielding of hydrogen against the UV cutoff of a rectangular coupling.

use mqed_nmr::dynamics::linear_fit;
use mqed_nmr::integrate::QuadConfig;
use mqed_nmr::shielding::shielding_reduced;
use mqed_nmr::spectrum::r_squared;
use mqed_nmr::units::{wavenumber_to_si, CouplingFunction, ThermalParams};

fn main() -> mqed_nmr::Result<()> {
    let thermal = ThermalParams::new(293.0)?;
    let mut cutoffs = Vec::new();
    let mut ppm = Vec::new();
    println!("delta_uv (mm^-1)   a (ppm)        error bound");
    for mm in 4..=11 {
        let d = wavenumber_to_si(mm as f64, "mm^-1")?;
        let phi = CouplingFunction::rectangular(0.0, d)?;
        let a = shielding_reduced(&phi, &thermal, &Default::default(), &QuadConfig::default())?;
        println!("{mm:>8}           {:<14.6e} {:.1e}", a.ppm(), a.error_estimate * 1e6);
        cutoffs.push(d);
        ppm.push(a.ppm());
    }
    let (slope, intercept) = linear_fit(&cutoffs, &ppm);
    println!(
        "linear fit: {slope:.4e} ppm per m^-1, intercept {intercept:.2e} ppm, R^2 = {:.6}",
        r_squared(&cutoffs, &ppm)
    );
    Ok(())
}
