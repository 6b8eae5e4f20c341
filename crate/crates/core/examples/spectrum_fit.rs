//! Spectrum of the hydrogen FID and a single Lorentzian fit, compared with
//! the closed-form line position and width.

use mqed_nmr::dynamics::{fid_signal, Expansion, FidSpec, Frame};
use mqed_nmr::spectrum::{find_peaks, fit_lorentz, transform, LineMode};
use mqed_nmr::units::{wavenumber_to_si, CouplingFunction, ThermalParams};

fn main() -> mqed_nmr::Result<()> {
    let thermal = ThermalParams::new(293.0)?;
    println!("delta_uv   centre fit/closed (ppm)        FWHM fit/closed (Hz)     rms");
    for mm in [4.0, 7.0, 11.0] {
        let phi = CouplingFunction::rectangular(0.0, wavenumber_to_si(mm, "mm^-1")?)?;
        let spec = FidSpec::hydrogen(phi, thermal, 20.0);
        let signal = fid_signal(&spec, &spec.auto_grid()?, Frame::Rotating, Expansion::Resummed)?;
        let spectrum = transform(&signal)?;
        let fit = fit_lorentz(&spectrum, LineMode::Magnitude)?;
        let (offset, rate) = spec.line_parameters()?;
        println!(
            "{mm:>4} mm^-1  {:+.6e} / {:+.6e}   {:.5e} / {:.5e}   {:.2e}",
            fit.center_ppm,
            spectrum.offset_to_ppm(-offset),
            fit.fwhm_hz,
            rate / std::f64::consts::PI,
            fit.rms_residual
        );
        assert_eq!(find_peaks(&spectrum).len(), 1);
    }
    Ok(())
}
