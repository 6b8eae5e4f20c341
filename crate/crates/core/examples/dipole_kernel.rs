//! Field commutators and the field-mediated dipolar kernel between two protons.

use mqed_nmr::field::{dipole_kernel_zz, field_commutator, Axis, SpinSite, Vec3};
use mqed_nmr::integrate::QuadConfig;
use mqed_nmr::spin::SpinSpec;
use mqed_nmr::units::{wavenumber_to_si, CouplingFunction};

fn main() -> mqed_nmr::Result<()> {
    let phi = CouplingFunction::rectangular(0.0, wavenumber_to_si(4.0, "mm^-1")?)?;
    let quad = QuadConfig::default();
    let proton = SpinSpec::proton();
    let site = |x: f64| SpinSite {
        position: Vec3::new(x, 0.0, x),
        gyromagnetic: proton.gyromagnetic,
        larmor: proton.larmor(20.0),
    };
    let (j, i) = (site(0.0), site(1e-4));
    let r = i.position - j.position;
    // A mm^-1 cutoff smears the light cone over millimetres, so the 0.14 mm
    // separation sees a commutator that grows smoothly with the delay.
    for tau in [0.0, 2e-13, 4.7e-13, 1e-12] {
        let c = field_commutator(Axis::Z, Axis::X, &r, tau, &phi, &quad)?;
        println!("[B_z(r, tau), B_x(0, 0)]  tau = {tau:.1e} s: {c:.4e}");
    }
    let k = dipole_kernel_zz(&j, &i, 1e-9, 0.0, 4.7e-13, &phi, &quad)?;
    println!("dipolar kernel: {k:.4e}");
    Ok(())
}
