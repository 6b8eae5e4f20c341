//! Mode functions of the thermal radiation field, the four-term thermal
//! exchange kernel and the retarded field commutator.

use crate::error::{invalid, require_finite, Error, Result};
use crate::integrate::{quad_1d, QuadConfig};
use crate::units::{
    CouplingFunction, ThermalParams, HBAR, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY,
};
use nalgebra::{Rotation3, Unit, Vector3};
use num_complex::Complex64;
use std::f64::consts::PI;

pub type Vec3 = Vector3<f64>;

/// Cartesian component index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Point of the complex time strip; both parts in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexTime {
    pub re: f64,
    pub im: f64,
}

impl ComplexTime {
    pub fn real(t: f64) -> Self {
        Self { re: t, im: 0.0 }
    }

    pub fn imaginary(s: f64) -> Self {
        Self { re: 0.0, im: s }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Checks `re >= 0` and `0 <= im <= hbar beta`.
    pub fn check_strip(self, thermal: &ThermalParams) -> Result<Self> {
        let h = thermal.strip_height();
        let tol = 1e-12 * h;
        if !(self.re.is_finite() && self.im.is_finite())
            || self.re < 0.0
            || self.im < -tol
            || self.im > h + tol
        {
            return Err(Error::OutsideStrip {
                re: self.re,
                im: self.im,
            });
        }
        Ok(self)
    }
}

/// Choice of transverse polarisation pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PolarizationRule {
    /// Gram-Schmidt on the coordinate axis with the smallest `|k_i|`.
    #[default]
    SmallestComponent,
    /// The default pair rotated about `k` by the given angle.
    Rotated(f64),
}

/// Orthonormal pair `(e1, e2)` transverse to `k` with `k x e1 = |k| e2`.
pub fn polarization_basis(k: &Vec3) -> Result<[Vec3; 2]> {
    let norm = k.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(invalid("k", "wave vector must be non-zero and finite"));
    }
    let khat = k / norm;
    let mut axis = 0;
    for i in 1..3 {
        if khat[i].abs() < khat[axis].abs() {
            axis = i;
        }
    }
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    let e1 = (e - khat * khat[axis]).normalize();
    let e2 = khat.cross(&e1);
    Ok([e1, e2])
}

pub fn polarization_pair(k: &Vec3, rule: PolarizationRule) -> Result<[Vec3; 2]> {
    let [e1, e2] = polarization_basis(k)?;
    match rule {
        PolarizationRule::SmallestComponent => Ok([e1, e2]),
        PolarizationRule::Rotated(angle) => {
            let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*k), angle);
            Ok([rot * e1, rot * e2])
        }
    }
}

fn mode_prefactor() -> f64 {
    (HBAR / (VACUUM_PERMITTIVITY * (2.0 * PI).powi(3))).sqrt()
}

fn mode_value(axis: Axis, x: &Vec3, z: Complex64, k: &Vec3, pol: &Vec3, phi: &CouplingFunction) -> Complex64 {
    let kn = k.norm();
    let omega = SPEED_OF_LIGHT * kn;
    let amp = mode_prefactor() * k.cross(pol)[axis.index()] * phi.amplitude(kn) / omega.sqrt();
    // exp(-i (k.x - omega z))
    let phase = Complex64::new(0.0, -k.dot(x)) + Complex64::i() * omega * z;
    Complex64::i() * amp * phase.exp()
}

/// Magnetic mode function of polarisation `lambda` (0 or 1) at position `x`
/// (m) and complex time `z` (s).
pub fn mode_function(
    axis: Axis,
    x: &Vec3,
    z: ComplexTime,
    k: &Vec3,
    lambda: usize,
    phi: &CouplingFunction,
) -> Result<Complex64> {
    if lambda > 1 {
        return Err(invalid("lambda", "polarisation index must be 0 or 1"));
    }
    require_finite("z", z.re + z.im)?;
    let pol = polarization_basis(k)?[lambda];
    Ok(mode_value(axis, x, z.as_complex(), k, &pol, phi))
}

/// Arguments of the exchange kernel: components and spacetime points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPoints {
    pub alpha: Axis,
    pub x: Vec3,
    pub z2: ComplexTime,
    pub gamma: Axis,
    pub y: Vec3,
    pub z1: ComplexTime,
}

/// Thermal exchange kernel `m^{alpha gamma}(x, z2, y, z1, k)` summed over
/// both polarisations.
///
/// It is symmetric under `z1 <-> z2` whenever both times share the same real
/// part (in particular on the imaginary axis); for unequal real parts the
/// difference is `2i Im(A + C)` with `A, C` the two `(1 + rho)` products.
pub fn exchange_kernel(
    p: &KernelPoints,
    k: &Vec3,
    phi: &CouplingFunction,
    thermal: &ThermalParams,
    rule: PolarizationRule,
) -> Result<Complex64> {
    p.z1.check_strip(thermal)?;
    p.z2.check_strip(thermal)?;
    let kn = k.norm();
    if phi.value(kn) == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rho = crate::units::planck_occupation(kn, thermal)?;
    let pols = polarization_pair(k, rule)?;
    let (z1, z2) = (p.z1.as_complex(), p.z2.as_complex());
    let mut total = Complex64::new(0.0, 0.0);
    for pol in &pols {
        let b = |axis, pos: &Vec3, z| mode_value(axis, pos, z, k, pol, phi);
        let t1 = b(p.alpha, &p.x, z2).conj() * b(p.gamma, &p.y, z1) * (1.0 + rho);
        let t2 = b(p.gamma, &p.y, z1).conj() * b(p.alpha, &p.x, z2) * rho;
        let t3 = b(p.gamma, &p.y, z2).conj() * b(p.alpha, &p.x, z1) * (1.0 + rho);
        let t4 = b(p.alpha, &p.x, z1).conj() * b(p.gamma, &p.y, z2) * rho;
        total += t1 + t2 + t3 + t4;
    }
    Ok(total)
}

/// Spherical Bessel functions `j0, j1, j2`, with series near the origin.
pub fn spherical_bessel_012(x: f64) -> (f64, f64, f64) {
    if x.abs() < 0.1 {
        let x2 = x * x;
        let j0 = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0));
        let j1 = x / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)));
        let j2 = x2 / 15.0 * (1.0 - x2 / 14.0 * (1.0 - x2 / 36.0 * (1.0 - x2 / 66.0)));
        (j0, j1, j2)
    } else {
        let (s, c) = x.sin_cos();
        let j0 = s / x;
        let j1 = s / (x * x) - c / x;
        let j2 = (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
        (j0, j1, j2)
    }
}

/// Equal-frequency angular average of `delta^{ag} - khat^a khat^g` against
/// `exp(i k.r)`: `(j0 - j1/(kr)) delta + j2 rhat rhat`.
fn transverse_angular(kr: f64, rhat: &Vec3, a: Axis, g: Axis) -> f64 {
    let (j0, j1, j2) = spherical_bessel_012(kr);
    let j1_over = if kr.abs() < 0.1 {
        let x2 = kr * kr;
        1.0 / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0 * (1.0 - x2 / 54.0)))
    } else {
        j1 / kr
    };
    let delta = if a == g { 1.0 } else { 0.0 };
    (j0 - j1_over) * delta + j2 * rhat[a.index()] * rhat[g.index()]
}

/// Field commutator `[B^alpha(x, t_x), B^gamma(y, t_y)]` (T², purely
/// imaginary) with `r = x - y` and `tau = t_x - t_y`.
pub fn field_commutator(
    alpha: Axis,
    gamma: Axis,
    r: &Vec3,
    tau: f64,
    phi: &CouplingFunction,
    quad: &QuadConfig,
) -> Result<Complex64> {
    require_finite("tau", tau)?;
    let rn = r.norm();
    let rhat = if rn > 0.0 { r / rn } else { Vec3::zeros() };
    let mut total = 0.0;
    for band in phi.bands() {
        let amp = band.height / crate::units::COUPLING_LENGTH;
        let est = quad_1d(
            |k: f64| {
                k.powi(3)
                    * transverse_angular(k * rn, &rhat, alpha, gamma)
                    * (SPEED_OF_LIGHT * k * tau).sin()
            },
            band.lo,
            band.hi,
            quad,
        )?;
        total += amp * amp * est.value;
    }
    let pref = HBAR / (2.0 * PI * PI * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT);
    Ok(Complex64::new(0.0, -pref * total))
}

/// A spin site for the dipolar kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinSite {
    pub position: Vec3,
    /// Gyromagnetic ratio in rad/(s T).
    pub gyromagnetic: f64,
    /// Larmor angular frequency in rad/s.
    pub larmor: f64,
}

/// Field-mediated dipolar kernel between sites `j` and `i`:
/// `-g_j g_i u_j(t) conj(u_j(t1)) ([B^z_i(t2), B^x_j(t1)] + i [B^z_i(t2), B^y_j(t1)])`.
pub fn dipole_kernel_zz(
    site_j: &SpinSite,
    site_i: &SpinSite,
    t: f64,
    t1: f64,
    t2: f64,
    phi: &CouplingFunction,
    quad: &QuadConfig,
) -> Result<Complex64> {
    let r = site_i.position - site_j.position;
    if r.norm() == 0.0 {
        return Err(invalid("position", "sites coincide"));
    }
    let tau = t2 - t1;
    let cx = field_commutator(Axis::Z, Axis::X, &r, tau, phi, quad)?;
    let cy = field_commutator(Axis::Z, Axis::Y, &r, tau, phi, quad)?;
    let u = |s: f64| Complex64::from_polar(1.0, -site_j.larmor * s);
    Ok(-site_j.gyromagnetic * site_i.gyromagnetic * u(t) * u(t1).conj() * (cx + Complex64::i() * cy))
}
