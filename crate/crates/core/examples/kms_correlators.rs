//! Thermal correlators of spin operators at complex times, from the closed
//! product table, checked against dense 2x2 exponentials.

use mqed_nmr::field::ComplexTime;
use mqed_nmr::spin::{kms_expectation, SpinOp, SpinSpec, SpinState};
use mqed_nmr::units::{ThermalParams, HBAR};
use nalgebra::Matrix2;
use num_complex::Complex64;

fn main() -> mqed_nmr::Result<()> {
    let thermal = ThermalParams::new(0.5)?;
    let state = SpinState::new(SpinSpec::proton(), 20.0, thermal)?;
    let period = 2.0 * std::f64::consts::PI / state.larmor().abs();
    let ops = [
        (SpinOp::raising(0), ComplexTime { re: 0.3 * period, im: 0.2 * thermal.strip_height() }),
        (SpinOp::lowering(0), ComplexTime { re: 1.1 * period, im: 0.7 * thermal.strip_height() }),
    ];
    let closed = kms_expectation(&ops, &state)?;

    let h = SpinOp::iz(0).to_matrix() * Complex64::from(-state.spec.gyromagnetic * state.field_z);
    let rho = (h * Complex64::from(-thermal.beta())).exp();
    let mut prod = Matrix2::<Complex64>::identity();
    for (op, z) in &ops {
        let i_over_hbar = Complex64::new(0.0, 1.0 / HBAR) * z.as_complex();
        prod *= (h * i_over_hbar).exp() * op.to_matrix() * (h * -i_over_hbar).exp();
    }
    let dense = (rho * prod).trace() / rho.trace();
    println!("<I+(z1) I-(z2)> / hbar^2  closed {:.6e}", closed / (HBAR * HBAR));
    println!("                          dense  {:.6e}", dense / (HBAR * HBAR));
    println!("<I_z> / hbar = {:.6}", state.iz_exact() / HBAR);
    Ok(())
}
