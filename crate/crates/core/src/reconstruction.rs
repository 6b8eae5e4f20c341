//! Forward spectra of angle-dependent nuclear densities and the inverse
//! problem of recovering the density from a measured spectrum.

use crate::dynamics::{effective_relax_signal, TimeGrid};
use crate::error::{invalid, require_positive, Error, Result};
use crate::molecular::{angle_grid, gibbs_density, NuclearDensity};
use crate::spectrum::{find_peaks_in, transform_untruncated, Spectrum};
use crate::units::ThermalParams;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;

/// Angle-resolved line positions and widths for a toy molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    /// Line position (ppm) of the reporting nucleus at each grid angle.
    pub shift_ppm: Vec<f64>,
    /// Half width at half maximum (ppm) at each grid angle.
    pub hwhm_ppm: Vec<f64>,
    /// Equivalent nuclei, given as angle offsets in grid steps.
    pub site_offsets: Vec<usize>,
    pub larmor: f64,
}

impl ForwardModel {
    /// Ring-current-like profile: `shift = amplitude cos(theta)` and
    /// `hwhm = width (1 + modulation sin(theta))`.
    pub fn ring_current(
        n: usize,
        amplitude_ppm: f64,
        width_ppm: f64,
        modulation: f64,
        sites: usize,
        larmor: f64,
    ) -> Result<Self> {
        require_positive("width_ppm", width_ppm)?;
        if !(modulation.abs() < 1.0) {
            return Err(invalid("modulation", "must lie in (-1, 1)"));
        }
        if sites == 0 || n % sites != 0 {
            return Err(invalid("sites", "grid size must be a multiple of the site count"));
        }
        let theta = angle_grid(n);
        Ok(Self {
            shift_ppm: theta.iter().map(|t| amplitude_ppm * t.cos()).collect(),
            hwhm_ppm: theta.iter().map(|t| width_ppm * (1.0 + modulation * t.sin())).collect(),
            site_offsets: (0..sites).map(|s| s * n / sites).collect(),
            larmor,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.shift_ppm.len()
    }

    fn check(&self) -> Result<()> {
        if self.shift_ppm.is_empty() || self.shift_ppm.len() != self.hwhm_ppm.len() {
            return Err(invalid("forward model", "shift and width maps must share the grid"));
        }
        if self.hwhm_ppm.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("hwhm_ppm", "widths must be positive"));
        }
        require_positive("larmor", self.larmor.abs())?;
        Ok(())
    }

    /// Time grid resolving every line of the model.
    pub fn time_grid(&self) -> Result<TimeGrid> {
        self.check()?;
        let nu = self.larmor.abs() * 1e-6;
        let max_shift = self.shift_ppm.iter().fold(0.0f64, |m, s| m.max(s.abs())) * nu;
        let min_rate = self.hwhm_ppm.iter().cloned().fold(f64::INFINITY, f64::min) * nu;
        let max_rate = self.hwhm_ppm.iter().cloned().fold(0.0, f64::max) * nu;
        let t_max = (1e5f64).ln() / min_rate;
        let dt = 2.0 * PI / (16.0 * (max_shift + 10.0 * max_rate));
        TimeGrid::new(0.0, dt, (t_max / dt).ceil() as usize + 1)
    }
}

/// Per-angle spectra, precomputed once; the forward map is linear in the density.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub model: ForwardModel,
    template: Spectrum,
    rows: Vec<Vec<Complex64>>,
}

impl SpectralBasis {
    pub fn new(model: ForwardModel) -> Result<Self> {
        let grid = model.time_grid()?;
        let n = model.grid_size();
        let mut rows = Vec::with_capacity(n);
        let mut template = None;
        for i in 0..n {
            let mut acc: Option<Spectrum> = None;
            for off in &model.site_offsets {
                let j = (i + off) % n;
                let t2 = 1.0 / (model.hwhm_ppm[j] * 1e-6 * model.larmor.abs());
                let sig = effective_relax_signal(model.shift_ppm[j], t2, model.larmor, &grid)?;
                let spec = transform_untruncated(&sig)?;
                acc = Some(match acc {
                    None => spec,
                    Some(mut a) => {
                        for (x, y) in a.values.iter_mut().zip(&spec.values) {
                            *x += *y;
                        }
                        a
                    }
                });
            }
            let spec = acc.expect("at least one site");
            rows.push(spec.values.clone());
            template.get_or_insert(spec);
        }
        let mut template = template.expect("non-empty grid");
        template.metadata.insert("model".into(), "angular-forward".into());
        Ok(Self {
            model,
            template,
            rows,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.rows.len()
    }

    /// Spectrum of a density on the model's angle grid.
    pub fn forward(&self, density: &NuclearDensity) -> Result<Spectrum> {
        let w = density
            .weights()
            .filter(|w| w.len() == self.rows.len())
            .ok_or_else(|| invalid("density", "density grid must match the forward model"))?;
        let mut out = self.template.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            *v = self.rows.iter().zip(w).map(|(r, wi)| r[k] * *wi).sum();
        }
        Ok(out)
    }

    /// Real parts of the per-angle spectra interpolated onto `ppm` points.
    fn sampled(&self, ppm: &[f64]) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = (0..self.template.len()).map(|i| self.template.ppm(i)).collect();
        self.rows
            .iter()
            .map(|row| {
                let re: Vec<f64> = row.iter().map(|v| v.re).collect();
                ppm.iter().map(|p| interpolate(&axis, &re, *p)).collect()
            })
            .collect()
    }
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at <= x[0] || at >= x[x.len() - 1] {
        return 0.0;
    }
    let i = x.partition_point(|v| *v <= at);
    let f = (at - x[i - 1]) / (x[i] - x[i - 1]);
    y[i - 1] + f * (y[i] - y[i - 1])
}

/// Real spectrum sampled on a ppm axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpectrum {
    pub ppm: Vec<f64>,
    pub intensity: Vec<f64>,
}

impl TargetSpectrum {
    pub fn from_spectrum(spec: &Spectrum) -> Self {
        Self {
            ppm: (0..spec.len()).map(|i| spec.ppm(i)).collect(),
            intensity: spec.values.iter().map(|v| v.re).collect(),
        }
    }

    /// Restricts to a ppm window.
    pub fn window(&self, lo: f64, hi: f64) -> Self {
        let keep: Vec<usize> = (0..self.ppm.len())
            .filter(|&i| self.ppm[i] >= lo && self.ppm[i] <= hi)
            .collect();
        Self {
            ppm: keep.iter().map(|&i| self.ppm[i]).collect(),
            intensity: keep.iter().map(|&i| self.intensity[i]).collect(),
        }
    }

    /// Every `step`-th point.
    pub fn decimate(&self, step: usize) -> Self {
        let step = step.max(1);
        Self {
            ppm: self.ppm.iter().step_by(step).cloned().collect(),
            intensity: self.intensity.iter().step_by(step).cloned().collect(),
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut tau = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    pub initial_step: f64,
    pub f_tolerance: f64,
    pub seed: u64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 20_000,
            initial_step: 0.02,
            f_tolerance: 1e-13,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each iteration; never increases.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Adaptive Nelder-Mead minimisation. The initial simplex uses seeded
/// random step signs, so runs are reproducible for a fixed seed.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let n = x0.len();
    let nf = n.max(1) as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        x[i] += sign * opts.initial_step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    let mut evaluations = simplex.len();
    let mut trace = Vec::new();
    let mut converged = false;
    while evaluations < opts.max_evaluations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);
        if (values[n] - values[0]).abs() <= opts.f_tolerance * (1.0 + values[0].abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / nf)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect()
        };
        let xr = along(-alpha);
        let fr = f(&xr);
        evaluations += 1;
        if fr < values[0] {
            let xe = along(-alpha * gamma);
            let fe = f(&xe);
            evaluations += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-alpha * rho);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = f(&xc);
                (xc, fc)
            };
            evaluations += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let xi: Vec<f64> = (0..n)
                        .map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j]))
                        .collect();
                    values[i] = f(&xi);
                    simplex[i] = xi;
                }
                evaluations += n;
            }
        }
    }
    let best = (0..=n).min_by(|a, b| values[*a].total_cmp(&values[*b])).unwrap_or(0);
    if let Some(last) = trace.last() {
        if values[best] < *last {
            trace.push(values[best]);
        }
    }
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations,
        trace,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionOptions {
    /// Fourier orders used (two coefficients each); at most 8.
    pub orders: usize,
    /// Weight of the quadratic entropy penalty, relative to the misfit of the initial guess.
    pub regularization: f64,
    pub restarts: usize,
    pub optimizer: NelderMeadOptions,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            orders: 8,
            regularization: 1e-3,
            restarts: 6,
            optimizer: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub density: NuclearDensity,
    pub coefficients: Vec<f64>,
    /// Relative spectral RMS misfit of the final density.
    pub misfit: f64,
    pub objective: f64,
    /// Best objective after every optimizer iteration across restarts.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Recovers an angular density whose forward spectrum matches `target`.
///
/// The density is the simplex projection of `initial + sum_k c_k b_k`, with
/// `b_k` the first Fourier modes; `c` is found by restarted Nelder-Mead.
pub fn reconstruct(
    target: &TargetSpectrum,
    basis: &SpectralBasis,
    initial: &NuclearDensity,
    opts: &ReconstructionOptions,
) -> Result<Reconstruction> {
    if opts.orders == 0 || opts.orders > 8 {
        return Err(invalid("orders", "use between 1 and 8 Fourier orders"));
    }
    if target.ppm.len() != target.intensity.len() || target.ppm.len() < 4 {
        return Err(invalid("target", "need at least four (ppm, intensity) points"));
    }
    let n = basis.grid_size();
    let start = initial
        .weights()
        .filter(|w| w.len() == n)
        .ok_or_else(|| invalid("initial", "initial density must live on the model grid"))?
        .to_vec();
    let norm_t = target.intensity.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm_t > 0.0) {
        return Err(invalid("target", "target spectrum is zero"));
    }
    let rows = basis.sampled(&target.ppm);
    let theta = angle_grid(n);
    let modes: Vec<Vec<f64>> = (1..=opts.orders)
        .flat_map(|k| {
            let kf = k as f64;
            [
                theta.iter().map(|t| (kf * t).cos() / n as f64).collect::<Vec<_>>(),
                theta.iter().map(|t| (kf * t).sin() / n as f64).collect::<Vec<_>>(),
            ]
        })
        .collect();
    let density_of = |c: &[f64]| -> Vec<f64> {
        let v: Vec<f64> = (0..n)
            .map(|i| start[i] + c.iter().zip(&modes).map(|(ci, m)| ci * m[i]).sum::<f64>())
            .collect();
        project_simplex(&v)
    };
    let misfit_of = |p: &[f64]| -> f64 {
        let model: Vec<f64> = (0..target.ppm.len())
            .map(|j| rows.iter().zip(p).map(|(r, w)| r[j] * w).sum())
            .collect();
        let mm: f64 = model.iter().map(|v| v * v).sum();
        let mt: f64 = model.iter().zip(&target.intensity).map(|(a, b)| a * b).sum();
        let scale = if mm > 0.0 { mt / mm } else { 0.0 };
        let r: f64 = model
            .iter()
            .zip(&target.intensity)
            .map(|(a, b)| (scale * a - b).powi(2))
            .sum();
        r.sqrt() / norm_t
    };
    // The penalty weight is relative to the misfit of the initial guess, so
    // it keeps its meaning whatever the target's units or noise level.
    let weight = opts.regularization * misfit_of(&project_simplex(&start));
    let objective = |c: &[f64]| -> f64 {
        let p = density_of(c);
        let entropy_penalty = n as f64 * p.iter().map(|x| x * x).sum::<f64>() - 1.0;
        misfit_of(&p) + weight * entropy_penalty
    };
    let mut c = vec![0.0; 2 * opts.orders];
    let mut trace = Vec::new();
    let mut evaluations = 0;
    let mut best = objective(&c);
    for r in 0..opts.restarts.max(1) {
        let nm = NelderMeadOptions {
            seed: opts.optimizer.seed.wrapping_add(r as u64),
            ..opts.optimizer
        };
        let m = nelder_mead(objective, &c, &nm);
        evaluations += m.evaluations;
        for v in &m.trace {
            let last = trace.last().copied().unwrap_or(f64::INFINITY);
            trace.push(v.min(last).min(best));
        }
        if m.value < best {
            let gain = best - m.value;
            best = m.value;
            c = m.x;
            if gain <= 1e-12 * best.abs() {
                break;
            }
        } else {
            break;
        }
    }
    let p = density_of(&c);
    let misfit = misfit_of(&p);
    let density = NuclearDensity::angular_unnormalised(&p)?;
    Ok(Reconstruction {
        density,
        coefficients: c,
        misfit,
        objective: best,
        trace,
        evaluations,
    })
}

/// Vertex of the parabola through the peak sample and its neighbours.
fn refined_ppm(spectrum: &Spectrum, values: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= values.len() {
        return spectrum.ppm(i);
    }
    let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
    let curvature = l - 2.0 * c + r;
    let shift = if curvature < 0.0 { 0.5 * (l - r) / curvature } else { 0.0 };
    let step = spectrum.ppm(i + 1) - spectrum.ppm(i);
    spectrum.ppm(i) + shift * step
}

/// One temperature of a coalescence ladder.
#[derive(Debug, Clone)]
pub struct LadderStep {
    pub temperature: f64,
    pub density: NuclearDensity,
    pub spectrum: Spectrum,
    /// Peak positions (ppm) of the absorption spectrum.
    pub peaks_ppm: Vec<f64>,
    /// Distance between the outermost peaks; zero once merged.
    pub separation_ppm: f64,
}

/// Forward spectra of Gibbs densities across `temperatures`.
pub fn temperature_ladder<E: Fn(f64) -> f64>(
    energy: E,
    temperatures: &[f64],
    basis: &SpectralBasis,
) -> Result<Vec<LadderStep>> {
    if temperatures.is_empty() {
        return Err(Error::InvalidParameter {
            name: "temperatures",
            reason: "empty ladder".into(),
        });
    }
    temperatures
        .iter()
        .map(|&t| {
            let thermal = ThermalParams::new(t)?;
            let density = gibbs_density(&energy, &thermal, basis.grid_size())?;
            let spectrum = basis.forward(&density)?;
            let re: Vec<f64> = spectrum.values.iter().map(|v| v.re).collect();
            let peaks_ppm: Vec<f64> = find_peaks_in(&re, 0.1, 0.002)
                .into_iter()
                .map(|i| refined_ppm(&spectrum, &re, i))
                .collect();
            let separation_ppm = match (peaks_ppm.first(), peaks_ppm.last()) {
                (Some(a), Some(b)) => b - a,
                _ => 0.0,
            };
            Ok(LadderStep {
                temperature: t,
                density,
                spectrum,
                peaks_ppm,
                separation_ppm,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.8, -0.2]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x >= 0.0));
        let q = project_simplex(&[0.2, 0.3, 0.5]);
        assert!(q.iter().zip([0.2, 0.3, 0.5]).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &NelderMeadOptions { f_tolerance: 1e-20, ..Default::default() });
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
