//! Spin-1/2 operators, free evolution in a static field along z and thermal
//! (KMS) correlators in closed form.

use crate::error::{Error, Result};
use crate::field::ComplexTime;
use crate::units::{ThermalParams, BOHR_MAGNETON, ELECTRON_G, HBAR, PROTON_GYROMAGNETIC};
use nalgebra::Matrix2;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Magnetic character of a spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSpec {
    /// Gyromagnetic ratio in rad/(s T); negative for the electron.
    pub gyromagnetic: f64,
}

impl SpinSpec {
    pub fn proton() -> Self {
        Self {
            gyromagnetic: PROTON_GYROMAGNETIC,
        }
    }

    pub fn electron() -> Self {
        Self {
            gyromagnetic: -ELECTRON_G * BOHR_MAGNETON / HBAR,
        }
    }

    /// Larmor angular frequency `gamma B` for a field `B` along z.
    pub fn larmor(&self, field_z: f64) -> f64 {
        self.gyromagnetic * field_z
    }
}

/// Operator on one spin site, stored in the basis `{1, I_z, I_+, I_-}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinOp {
    pub site: usize,
    coeffs: [Complex64; 4],
}

impl SpinOp {
    fn basis(site: usize, i: usize, c: Complex64) -> Self {
        let mut coeffs = [ZERO; 4];
        coeffs[i] = c;
        Self { site, coeffs }
    }

    pub fn identity(site: usize) -> Self {
        Self::basis(site, 0, ONE)
    }

    pub fn iz(site: usize) -> Self {
        Self::basis(site, 1, ONE)
    }

    pub fn raising(site: usize) -> Self {
        Self::basis(site, 2, ONE)
    }

    pub fn lowering(site: usize) -> Self {
        Self::basis(site, 3, ONE)
    }

    pub fn ix(site: usize) -> Self {
        let mut coeffs = [ZERO; 4];
        coeffs[2] = Complex64::new(0.5, 0.0);
        coeffs[3] = Complex64::new(0.5, 0.0);
        Self { site, coeffs }
    }

    pub fn iy(site: usize) -> Self {
        let mut coeffs = [ZERO; 4];
        coeffs[2] = Complex64::new(0.0, -0.5);
        coeffs[3] = Complex64::new(0.0, 0.5);
        Self { site, coeffs }
    }

    /// Operator `c0 + c1 I_z + c2 I_+ + c3 I_-`.
    pub fn from_coefficients(site: usize, coeffs: [Complex64; 4]) -> Self {
        Self { site, coeffs }
    }

    pub fn coefficients(&self) -> [Complex64; 4] {
        self.coeffs
    }

    /// Heisenberg evolution `e^{izH/hbar} A e^{-izH/hbar}` with `H = -gamma B I_z`.
    pub fn evolve(&self, z: Complex64, larmor: f64) -> Self {
        let mut out = *self;
        let phase = Complex64::new(0.0, -larmor) * z;
        out.coeffs[2] *= phase.exp();
        out.coeffs[3] *= (-phase).exp();
        out
    }

    /// Operator product on the same site.
    pub fn mul(&self, rhs: &SpinOp) -> Result<SpinOp> {
        if self.site != rhs.site {
            return Err(Error::MixedSites);
        }
        let h = HBAR;
        let mut out = [ZERO; 4];
        for (a, &ca) in self.coeffs.iter().enumerate() {
            if ca == ZERO {
                continue;
            }
            for (b, &cb) in rhs.coeffs.iter().enumerate() {
                if cb == ZERO {
                    continue;
                }
                let c = ca * cb;
                match (a, b) {
                    (0, _) => out[b] += c,
                    (_, 0) => out[a] += c,
                    (1, 1) => out[0] += c * (0.25 * h * h),
                    (1, 2) => out[2] += c * (0.5 * h),
                    (2, 1) => out[2] -= c * (0.5 * h),
                    (1, 3) => out[3] -= c * (0.5 * h),
                    (3, 1) => out[3] += c * (0.5 * h),
                    (2, 3) => {
                        out[0] += c * (0.5 * h * h);
                        out[1] += c * h;
                    }
                    (3, 2) => {
                        out[0] += c * (0.5 * h * h);
                        out[1] -= c * h;
                    }
                    _ => {} // I+ I+ = I- I- = 0
                }
            }
        }
        Ok(SpinOp {
            site: self.site,
            coeffs: out,
        })
    }

    /// Dense 2x2 matrix in the `(up, down)` basis.
    pub fn to_matrix(&self) -> Matrix2<Complex64> {
        let h = HBAR;
        let [c0, cz, cp, cm] = self.coeffs;
        Matrix2::new(
            c0 + cz * (0.5 * h),
            cp * h,
            cm * h,
            c0 - cz * (0.5 * h),
        )
    }
}

/// Thermal equilibrium state of one spin in a static field along z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub spec: SpinSpec,
    pub field_z: f64,
    pub thermal: ThermalParams,
}

impl SpinState {
    pub fn new(spec: SpinSpec, field_z: f64, thermal: ThermalParams) -> Result<Self> {
        crate::error::require_finite("field_z", field_z)?;
        Ok(Self {
            spec,
            field_z,
            thermal,
        })
    }

    pub fn larmor(&self) -> f64 {
        self.spec.larmor(self.field_z)
    }

    /// `beta gamma hbar B`, the Zeeman splitting over `k_B T`.
    pub fn zeeman_ratio(&self) -> f64 {
        self.thermal.beta() * self.spec.gyromagnetic * HBAR * self.field_z
    }

    /// Exact `<I_z>` in the Gibbs state.
    pub fn iz_exact(&self) -> f64 {
        0.5 * HBAR * (0.5 * self.zeeman_ratio()).tanh()
    }

    /// Expectation of a single-site operator.
    pub fn expectation(&self, op: &SpinOp) -> Complex64 {
        op.coeffs[0] + op.coeffs[1] * self.iz_exact()
    }
}

/// High-temperature `<I_z> = hbar^2 beta gamma B / 4`; warns when the
/// Zeeman ratio is not small.
pub fn high_temperature_iz(state: &SpinState) -> f64 {
    let h = state.zeeman_ratio();
    if h.abs() > 0.1 {
        log::warn!("high-temperature polarisation used with beta*gamma*hbar*B = {h}");
    }
    0.25 * HBAR * HBAR * state.thermal.beta() * state.spec.gyromagnetic * state.field_z
}

/// `omega(A_1(z_1) A_2(z_2) ...)` for time-evolved operators on one site.
pub fn kms_expectation(ops: &[(SpinOp, ComplexTime)], state: &SpinState) -> Result<Complex64> {
    let Some((first, _)) = ops.first() else {
        return Ok(ONE);
    };
    let larmor = state.larmor();
    let mut acc = SpinOp::identity(first.site);
    for (op, z) in ops {
        acc = acc.mul(&op.evolve(z.as_complex(), larmor))?;
    }
    Ok(state.expectation(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commutation_relation() {
        // [I_x, I_y] = i hbar I_z
        let xy = SpinOp::ix(0).mul(&SpinOp::iy(0)).unwrap();
        let yx = SpinOp::iy(0).mul(&SpinOp::ix(0)).unwrap();
        let m = xy.to_matrix() - yx.to_matrix();
        let expect = SpinOp::iz(0).to_matrix() * Complex64::new(0.0, HBAR);
        assert!((m - expect).norm() < 1e-80);
    }

    #[test]
    fn mixed_sites_rejected() {
        assert_eq!(SpinOp::ix(0).mul(&SpinOp::iy(1)), Err(Error::MixedSites));
    }
}
