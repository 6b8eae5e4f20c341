//! Nuclear and electronic densities, thermal (Gibbs) angular densities and
//! expectation values over molecular configurations.

use crate::error::{invalid, Error, Result};
use crate::field::Vec3;
use crate::integrate::{mc_integrate, McConfig, McEstimate, ProductDomain, Sampler};
use crate::units::{ThermalParams, BOHR_RADIUS};
use std::f64::consts::PI;
use std::fmt::Write as _;

const NORM_TOL: f64 = 1e-9;

/// Probability density of the nuclear coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum NuclearDensity {
    /// Single nucleus, isotropic Gaussian (metres).
    Gaussian { center: [f64; 3], width: f64 },
    /// Weighted configurations; each point holds `3K` Cartesian coordinates.
    Grid { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Density over one internal angle on a uniform periodic grid.
    Angular {
        theta: Vec<f64>,
        weights: Vec<f64>,
        /// True when derived from an interpolated energy table.
        interpolated: bool,
    },
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(invalid("weights", "empty density"));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(invalid("weights", "weights must be finite and non-negative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(total));
    }
    Ok(())
}

impl NuclearDensity {
    pub fn gaussian(center: [f64; 3], width: f64) -> Result<Self> {
        crate::error::require_positive("width", width)?;
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("center", "must be finite"));
        }
        Ok(Self::Gaussian { center, width })
    }

    pub fn grid(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        if points.len() != weights.len() {
            return Err(invalid("points", "one weight per point required"));
        }
        let dim = points[0].len();
        if dim == 0 || dim % 3 != 0 || points.iter().any(|p| p.len() != dim) {
            return Err(invalid("points", "each point needs 3K coordinates"));
        }
        Ok(Self::Grid { points, weights })
    }

    /// Angular density on `theta_i = 2 pi i / n`.
    pub fn angular(weights: Vec<f64>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(Self::Angular {
            theta: angle_grid(weights.len()),
            weights,
            interpolated: false,
        })
    }

    /// Normalises non-negative weights on the uniform angle grid.
    pub fn angular_unnormalised(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("weights", "total weight must be positive"));
        }
        Self::angular(weights.iter().map(|w| w / total).collect())
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            Self::Gaussian { .. } => None,
            Self::Grid { weights, .. } | Self::Angular { weights, .. } => Some(weights),
        }
    }

    pub fn is_interpolated(&self) -> bool {
        matches!(self, Self::Angular { interpolated: true, .. })
    }

    /// Monte Carlo sampler for this density (three uniforms per draw).
    pub fn sampler(&self) -> Result<Sampler> {
        match self {
            Self::Gaussian { center, width } => Ok(Sampler::Gaussian {
                center: *center,
                width: *width,
            }),
            Self::Grid { points, weights } => Sampler::discrete(points.clone(), weights),
            Self::Angular { theta, weights, .. } => {
                Sampler::discrete(theta.iter().map(|t| vec![*t]).collect(), weights)
            }
        }
    }

    /// Position of the nucleus the electron is bound to, for a sampled point.
    fn anchor(&self, point: &[f64]) -> Vec3 {
        match self {
            Self::Angular { .. } => Vec3::zeros(),
            _ => Vec3::new(point[0], point[1], point[2]),
        }
    }

    fn point_dims(&self) -> usize {
        match self {
            Self::Gaussian { .. } => 3,
            Self::Grid { points, .. } => points[0].len(),
            Self::Angular { .. } => 1,
        }
    }

    /// Total-variation distance between two angular densities on the same grid.
    pub fn total_variation(&self, other: &Self) -> Result<f64> {
        match (self.weights(), other.weights()) {
            (Some(a), Some(b)) if a.len() == b.len() => {
                Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
            }
            _ => Err(invalid("density", "total variation needs matching discrete grids")),
        }
    }

    /// Plain-text table: a `# representation = ...` header, then one row per point.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        match self {
            Self::Gaussian { center, width } => {
                s.push_str("# representation = gaussian\n# x y z width\n");
                let _ = writeln!(s, "{:?} {:?} {:?} {:?}", center[0], center[1], center[2], width);
            }
            Self::Grid { points, weights } => {
                s.push_str("# representation = grid\n");
                for (p, w) in points.iter().zip(weights) {
                    for c in p {
                        let _ = write!(s, "{c:?} ");
                    }
                    let _ = writeln!(s, "{w:?}");
                }
            }
            Self::Angular {
                theta,
                weights,
                interpolated,
            } => {
                s.push_str("# representation = angular\n");
                let _ = writeln!(s, "# interpolated = {interpolated}");
                s.push_str("# theta weight\n");
                for (t, w) in theta.iter().zip(weights) {
                    let _ = writeln!(s, "{t:?} {w:?}");
                }
            }
        }
        s
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut representation = None;
        let mut interpolated = false;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    match k.trim() {
                        "representation" => representation = Some(v.trim().to_string()),
                        "interpolated" => interpolated = v.trim() == "true",
                        _ => {}
                    }
                }
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            rows.push(row);
        }
        let bad = |reason: &str| Error::Parse {
            line: 0,
            reason: reason.to_string(),
        };
        match representation.as_deref() {
            Some("gaussian") => {
                let r = rows.first().filter(|r| r.len() == 4).ok_or_else(|| bad("gaussian needs x y z width"))?;
                Self::gaussian([r[0], r[1], r[2]], r[3])
            }
            Some("grid") => {
                let points = rows.iter().map(|r| r[..r.len() - 1].to_vec()).collect();
                let weights = rows.iter().map(|r| r[r.len() - 1]).collect();
                Self::grid(points, weights)
            }
            Some("angular") => {
                if rows.iter().any(|r| r.len() != 2) {
                    return Err(bad("angular rows need theta and weight"));
                }
                let weights: Vec<f64> = rows.iter().map(|r| r[1]).collect();
                check_weights(&weights)?;
                Ok(Self::Angular {
                    theta: rows.iter().map(|r| r[0]).collect(),
                    weights,
                    interpolated,
                })
            }
            _ => Err(bad("missing `# representation = ...` header")),
        }
    }
}

pub fn angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// Electronic density around the bound nucleus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElectronDensity {
    /// Hydrogen ground state `|psi_100|^2`.
    OneS { bohr_radius: f64 },
}

impl Default for ElectronDensity {
    fn default() -> Self {
        Self::OneS {
            bohr_radius: BOHR_RADIUS,
        }
    }
}

impl ElectronDensity {
    pub fn bohr_radius(&self) -> f64 {
        match self {
            Self::OneS { bohr_radius } => *bohr_radius,
        }
    }

    /// Fourier transform of the density at wavenumber `k`.
    pub fn form_factor(&self, k: f64) -> f64 {
        let q = 0.25 * k * k * self.bohr_radius() * self.bohr_radius();
        1.0 / ((1.0 + q) * (1.0 + q))
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::HydrogenicOneS {
            bohr_radius: self.bohr_radius(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolecularState {
    pub nuclear: NuclearDensity,
    pub electron: ElectronDensity,
    pub thermal: ThermalParams,
}

impl MolecularState {
    /// Hydrogen atom: a nucleus sharply localised at the origin.
    pub fn hydrogen(thermal: ThermalParams) -> Self {
        Self {
            nuclear: NuclearDensity::Grid {
                points: vec![vec![0.0; 3]],
                weights: vec![1.0],
            },
            electron: ElectronDensity::default(),
            thermal,
        }
    }
}

/// Nuclear and electron coordinates of one configuration.
pub struct Configuration<'a> {
    pub nuclei: &'a [f64],
    /// Nucleus the electron is bound to (origin for angular densities).
    pub anchor: Vec3,
    pub electron: Vec3,
}

/// `omega_M(f)`: Monte Carlo expectation of `f` over nuclear and electron
/// densities. `extra` samplers are appended and their coordinates passed on.
pub fn molecular_expectation<F>(
    f: F,
    state: &MolecularState,
    extra: &[Sampler],
    mc: &McConfig,
) -> Result<McEstimate>
where
    F: Fn(&Configuration, &[f64]) -> f64 + Sync,
{
    let mut samplers = vec![state.nuclear.sampler()?, state.electron.sampler()];
    samplers.extend_from_slice(extra);
    let domain = ProductDomain::new(samplers);
    let nd = state.nuclear.point_dims();
    mc_integrate(
        |p| {
            let nuclei = &p[..nd];
            let anchor = state.nuclear.anchor(nuclei);
            let r = Vec3::new(p[nd], p[nd + 1], p[nd + 2]);
            let cfg = Configuration {
                nuclei,
                anchor,
                electron: anchor + r,
            };
            f(&cfg, &p[nd + 3..])
        },
        &domain,
        mc,
    )
}

/// Gibbs density `exp(-beta E(theta)) / Z` on an `n`-point angle grid.
pub fn gibbs_density<E: Fn(f64) -> f64>(energy: E, thermal: &ThermalParams, n: usize) -> Result<NuclearDensity> {
    if n == 0 {
        return Err(invalid("grid_size", "need at least one point"));
    }
    let theta = angle_grid(n);
    let energies: Vec<f64> = theta.iter().map(|t| energy(*t)).collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(invalid("energy", "energy curve returned a non-finite value"));
    }
    let emin = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies
        .iter()
        .map(|e| (-(e - emin) * thermal.beta()).exp())
        .collect();
    NuclearDensity::angular_unnormalised(&w)
}

/// Tabulated torsional energy (J) with periodic linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTable {
    theta: Vec<f64>,
    energy: Vec<f64>,
}

impl PotentialTable {
    pub fn new(mut rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(invalid("table", "need at least two rows"));
        }
        if rows.iter().any(|(t, e)| !t.is_finite() || !e.is_finite()) {
            return Err(invalid("table", "non-finite entry"));
        }
        for r in rows.iter_mut() {
            r.0 = r.0.rem_euclid(2.0 * PI);
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            theta: rows.iter().map(|r| r.0).collect(),
            energy: rows.iter().map(|r| r.1).collect(),
        })
    }

    pub fn energy(&self, theta: f64) -> f64 {
        let t = theta.rem_euclid(2.0 * PI);
        let n = self.theta.len();
        let i = self.theta.partition_point(|x| *x <= t);
        let (lo, hi) = ((i + n - 1) % n, i % n);
        let mut t_lo = self.theta[lo];
        let mut t_hi = self.theta[hi];
        if i == 0 {
            t_lo -= 2.0 * PI;
        }
        if i == n {
            t_hi += 2.0 * PI;
        }
        let f = (t - t_lo) / (t_hi - t_lo);
        self.energy[lo] + f * (self.energy[hi] - self.energy[lo])
    }

    pub fn gibbs(&self, thermal: &ThermalParams, n: usize) -> Result<NuclearDensity> {
        match gibbs_density(|t| self.energy(t), thermal, n)? {
            NuclearDensity::Angular { theta, weights, .. } => Ok(NuclearDensity::Angular {
                theta,
                weights,
                interpolated: true,
            }),
            _ => unreachable!("gibbs_density returns an angular density"),
        }
    }
}

/// Hindered rotor `V (1 - cos(n theta)) / 2` with barrier `V` in J.
pub fn cosine_rotor(barrier: f64, fold: u32) -> impl Fn(f64) -> f64 {
    move |theta| 0.5 * barrier * (1.0 - (fold as f64 * theta).cos())
}
