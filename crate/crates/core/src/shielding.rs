//! Equilibrium shielding coefficient: the reduced radial integral and the
//! full Monte Carlo route over nuclear, electron, imaginary-time and mode
//! variables, plus the shielded equilibrium polarisation.

use crate::error::Result;
use crate::field::{exchange_kernel, Axis, ComplexTime, KernelPoints, PolarizationRule, Vec3};
use crate::integrate::{quad_1d, McConfig, QuadConfig, Sampler};
use crate::molecular::{molecular_expectation, ElectronDensity, MolecularState};
use crate::spin::{high_temperature_iz, SpinSpec, SpinState};
use crate::units::{
    shielding_prefactor, CouplingFunction, ThermalParams, BOHR_MAGNETON, COUPLING_LENGTH,
    ELECTRON_G, HBAR,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShieldingMethod {
    Reduced,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShieldingResult {
    /// Dimensionless shielding coefficient `a`.
    pub value: f64,
    pub method: ShieldingMethod,
    /// Quadrature error bound or Monte Carlo standard error.
    pub error_estimate: f64,
    pub delta_ir: f64,
    pub delta_uv: f64,
    pub temperature: f64,
}

impl ShieldingResult {
    pub fn ppm(&self) -> f64 {
        self.value * 1e6
    }
}

/// Thermal factor `(e^{-2x}/2 - e^{-x} + 1/2)(1 + 2 rho)` with `x = beta hbar c k`.
pub fn thermal_factor(k: f64, thermal: &ThermalParams) -> f64 {
    let x = thermal.reduced_energy(k);
    if x < 1e-8 {
        // Both factors degenerate; their product is (1 - e^{-2x}) / 2.
        return -0.5 * (-2.0 * x).exp_m1();
    }
    let em = (-x).exp_m1();
    0.5 * em * em * (1.0 + 2.0 / x.exp_m1())
}

/// Radial integrand of the reduced shielding integral (without `phi^2`).
pub fn radial_integrand(k: f64, thermal: &ThermalParams, electron: &ElectronDensity) -> f64 {
    thermal_factor(k, thermal) * k * electron.form_factor(k)
}

/// Shielding coefficient from the one-dimensional radial integral.
pub fn shielding_reduced(
    phi: &CouplingFunction,
    thermal: &ThermalParams,
    electron: &ElectronDensity,
    quad: &QuadConfig,
) -> Result<ShieldingResult> {
    let mut value = 0.0;
    let mut error = 0.0;
    for band in phi.bands() {
        let amp = band.height / COUPLING_LENGTH;
        let est = quad_1d(|k| radial_integrand(k, thermal, electron), band.lo, band.hi, quad)?;
        value += amp * amp * est.value;
        error += amp * amp * est.error;
    }
    let c = shielding_prefactor();
    Ok(ShieldingResult {
        value: c * value,
        method: ShieldingMethod::Reduced,
        error_estimate: c * error,
        delta_ir: phi.delta_ir(),
        delta_uv: phi.delta_uv(),
        temperature: thermal.temperature(),
    })
}

/// Shielding coefficient by direct Monte Carlo over nuclear and electron
/// positions, ordered imaginary times and wave vectors, using the exchange
/// kernel `m^{zz}` itself.
pub fn shielding_full(
    phi: &CouplingFunction,
    state: &MolecularState,
    mc: &McConfig,
) -> Result<ShieldingResult> {
    let thermal = state.thermal;
    let base = ShieldingResult {
        value: 0.0,
        method: ShieldingMethod::MonteCarlo,
        error_estimate: 0.0,
        delta_ir: phi.delta_ir(),
        delta_uv: phi.delta_uv(),
        temperature: thermal.temperature(),
    };
    if phi.is_empty() {
        return Ok(base);
    }
    let extra = [
        Sampler::OrderedPair {
            upper: thermal.beta(),
        },
        Sampler::Shell {
            lo: phi.delta_ir(),
            hi: phi.delta_uv(),
        },
    ];
    let coupling = 0.25 * ELECTRON_G * ELECTRON_G * BOHR_MAGNETON * BOHR_MAGNETON;
    let failure = std::sync::Mutex::new(None);
    let est = molecular_expectation(
        |cfg, rest| {
            let (s1, s2) = (rest[0], rest[1]);
            let k = Vec3::new(rest[2], rest[3], rest[4]);
            let p = KernelPoints {
                alpha: Axis::Z,
                x: cfg.anchor,
                z2: ComplexTime::imaginary(HBAR * s2),
                gamma: Axis::Z,
                y: cfg.electron,
                z1: ComplexTime::imaginary(HBAR * s1),
            };
            match exchange_kernel(&p, &k, phi, &thermal, PolarizationRule::default()) {
                Ok(m) => coupling * m.re,
                Err(e) => {
                    failure.lock().expect("poisoned").get_or_insert(e);
                    0.0
                }
            }
        },
        state,
        &extra,
        mc,
    )?;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(ShieldingResult {
        value: est.value,
        error_estimate: est.std_error,
        ..base
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolarizationMode {
    /// Leading high-temperature order, `hbar^2 beta gamma B (1 - a) / 4`.
    Approximate,
    /// Exact two-level polarisations of nucleus and electron.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarizationResult {
    pub mode: PolarizationMode,
    /// Shielded `<I_z>` in J s.
    pub value: f64,
    /// Unshielded `<I_z>`.
    pub isolated: f64,
    /// Electron-induced reduction `isolated - value`.
    pub reduction: f64,
    /// Coefficient `r` multiplying `<S_z>` in the exact mode.
    pub coefficient: f64,
}

/// Equilibrium `<I_z>` of a nucleus lowered by the electron cloud.
///
/// The exact mode subtracts `r <S_z>` with `r = a gamma_n / gamma_e`, the
/// value that reproduces the approximate mode at high temperature. The
/// electron moment saturates, so the reduction is bounded by `hbar |r| / 2`.
pub fn equilibrium_iz(
    nucleus: SpinSpec,
    field_z: f64,
    thermal: ThermalParams,
    shielding: f64,
    mode: PolarizationMode,
) -> Result<PolarizationResult> {
    let nuc = SpinState::new(nucleus, field_z, thermal)?;
    let electron = SpinSpec::electron();
    let r = shielding * nucleus.gyromagnetic / electron.gyromagnetic;
    let (isolated, reduction) = match mode {
        PolarizationMode::Approximate => {
            let iso = high_temperature_iz(&nuc);
            (iso, iso * shielding)
        }
        PolarizationMode::Exact => {
            let el = SpinState::new(electron, field_z, thermal)?;
            (nuc.iz_exact(), el.iz_exact() * r)
        }
    };
    Ok(PolarizationResult {
        mode,
        value: isolated - reduction,
        isolated,
        reduction,
        coefficient: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermal_factor_identity() {
        let t = ThermalParams::new(293.0).unwrap();
        for k in [1.0, 1e3, 1e5, 1e7] {
            let x = t.reduced_energy(k);
            let closed = -0.5 * (-2.0 * x).exp_m1();
            assert!((thermal_factor(k, &t) / closed - 1.0).abs() < 1e-12);
        }
    }
}
