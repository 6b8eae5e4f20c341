//! Field-theory FID against a phenomenological effective-relaxation signal
//! with the same shift and T2.

use mqed_nmr::dynamics::{effective_relax_signal, fid_signal, Expansion, FidSpec, Frame};
use mqed_nmr::spectrum::{fit_lorentz, transform, LineMode};
use mqed_nmr::units::{wavenumber_to_si, CouplingFunction, ThermalParams};

fn main() -> mqed_nmr::Result<()> {
    let phi = CouplingFunction::rectangular(0.0, wavenumber_to_si(0.1, "Mm^-1")?)?;
    let spec = FidSpec::hydrogen(phi, ThermalParams::new(293.0)?, 20.0);
    let grid = spec.auto_grid()?;
    let field = fid_signal(&spec, &grid, Frame::Rotating, Expansion::Resummed)?;
    let (offset, rate) = spec.line_parameters()?;
    let shift_ppm = -offset / spec.larmor() * 1e6;
    let effective = effective_relax_signal(shift_ppm, 1.0 / rate, spec.larmor(), &grid)?;

    let worst = field
        .values
        .iter()
        .zip(&effective.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!("largest sample difference {worst:.2e} over {} samples", grid.samples);
    for (name, s) in [("field theory", &field), ("effective", &effective)] {
        let fit = fit_lorentz(&transform(s)?, LineMode::Magnitude)?;
        println!("{name:>13}: centre {:+.6e} ppm, FWHM {:.5e} Hz", fit.center_ppm, fit.fwhm_hz);
    }
    Ok(())
}
