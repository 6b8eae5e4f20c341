//! Spectra from sampled signals and single-line Lorentzian analysis.

use crate::dynamics::SignalSeries;
use crate::error::{invalid, Error, Result};
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Relative envelope below which a signal is truncated before transforming.
pub const TRUNCATION_LEVEL: f64 = 1e-4;
/// Zero-padding factor applied after truncation.
pub const PADDING_FACTOR: usize = 4;

/// Complex spectrum on an increasing grid of angular offsets from `reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Angular frequency the offsets are measured from (rad/s).
    pub reference: f64,
    /// Bare Larmor frequency defining the ppm axis (rad/s).
    pub larmor: f64,
    pub offsets: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Set when the signal never decayed below the truncation level.
    pub non_decaying: bool,
    pub metadata: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Absolute angular frequency of point `i`.
    pub fn frequency(&self, i: usize) -> f64 {
        self.reference + self.offsets[i]
    }

    pub fn frequency_hz(&self, i: usize) -> f64 {
        self.frequency(i) / (2.0 * PI)
    }

    /// Chemical shift of point `i`, computed from offsets so that tiny
    /// shifts survive next to a large carrier.
    pub fn ppm(&self, i: usize) -> f64 {
        self.offset_to_ppm(self.offsets[i])
    }

    pub fn offset_to_ppm(&self, offset: f64) -> f64 {
        ((self.reference - self.larmor) + offset) / self.larmor * 1e6
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Points with offsets in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Spectrum {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.offsets[i] >= lo && self.offsets[i] <= hi)
            .collect();
        Spectrum {
            offsets: idx.iter().map(|&i| self.offsets[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            metadata: self.metadata.clone(),
            reference: self.reference,
            larmor: self.larmor,
            non_decaying: self.non_decaying,
        }
    }
}

/// `S(nu) = int M_+(t) e^{+i nu t} dt` by the trapezoidal rule.
///
/// The signal is cut where its envelope first stays below
/// `TRUNCATION_LEVEL` of the initial value, zero-padded by
/// `PADDING_FACTOR` and evaluated with an FFT. Offsets are relative to the
/// signal's frame frequency.
pub fn transform(signal: &SignalSeries) -> Result<Spectrum> {
    transform_impl(signal, true)
}

/// Same as `transform` but uses every sample, so spectra of equally long
/// signals share one frequency axis.
pub fn transform_untruncated(signal: &SignalSeries) -> Result<Spectrum> {
    transform_impl(signal, false)
}

fn transform_impl(signal: &SignalSeries, truncate: bool) -> Result<Spectrum> {
    if signal.len() < 2 {
        return Err(invalid("signal", "need at least two samples"));
    }
    if !(signal.dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    let v0 = signal.values[0].norm();
    let threshold = TRUNCATION_LEVEL * v0;
    let last_above = signal.values.iter().rposition(|v| v.norm() >= threshold);
    let n = match last_above {
        Some(i) if truncate => (i + 1).clamp(2, signal.len()),
        _ => signal.len(),
    };
    let non_decaying = n == signal.len() && signal.values[signal.len() - 1].norm() >= threshold;
    let m = (PADDING_FACTOR * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..n].copy_from_slice(&signal.values[..n]);
    buf[0] *= 0.5;
    buf[n - 1] *= 0.5;
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    let dt = signal.dt;
    let step = 2.0 * PI / (m as f64 * dt);
    let half = (m / 2) as i64;
    let mut offsets = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    for j in -half..half {
        let idx = j.rem_euclid(m as i64) as usize;
        let nu = j as f64 * step;
        offsets.push(nu);
        values.push(buf[idx] * dt * Complex64::from_polar(1.0, nu * signal.t0));
    }
    let mut metadata = signal.metadata.clone();
    metadata.insert("transform_samples".into(), n.to_string());
    metadata.insert("transform_padded".into(), m.to_string());
    if non_decaying {
        log::warn!("signal did not decay below {TRUNCATION_LEVEL} of its initial value");
        metadata.insert("non_decaying".into(), "true".into());
    }
    Ok(Spectrum {
        reference: signal.frame_frequency,
        larmor: signal.larmor,
        offsets,
        values,
        non_decaying,
        metadata,
    })
}

/// A local maximum of the magnitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub offset: f64,
    pub height: f64,
}

/// Local maxima of `values` above `min_fraction` of the global maximum and
/// with prominence above `min_prominence` of it.
pub fn find_peaks_in(values: &[f64], min_fraction: f64, min_prominence: f64) -> Vec<usize> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            // handle plateaus
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] && values[i] >= min_fraction * max {
                let mid = (i + j) / 2;
                let left_min = values[..=mid]
                    .iter()
                    .rev()
                    .take_while(|&&v| v <= values[mid])
                    .cloned()
                    .fold(values[mid], f64::min);
                let right_min = values[mid..]
                    .iter()
                    .take_while(|&&v| v <= values[mid])
                    .cloned()
                    .fold(values[mid], f64::min);
                let prominence = values[mid] - left_min.max(right_min);
                if prominence >= min_prominence * max {
                    peaks.push(mid);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Peaks of the magnitude spectrum (10% height, 2% prominence).
pub fn find_peaks(spectrum: &Spectrum) -> Vec<Peak> {
    let mags = spectrum.magnitudes();
    find_peaks_in(&mags, 0.1, 0.02)
        .into_iter()
        .map(|i| Peak {
            index: i,
            offset: spectrum.offsets[i],
            height: mags[i],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineMode {
    /// Fit `|S|` with the modulus of a complex Lorentzian.
    Magnitude,
    /// Fit the zero-order phase-corrected real part with an absorption Lorentzian.
    Absorption,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzFit {
    pub mode: LineMode,
    /// Line centre as an offset from the spectrum reference (rad/s).
    pub center_offset: f64,
    pub center_ppm: f64,
    /// Absorption full width at half maximum in Hz.
    pub fwhm_hz: f64,
    /// Peak value of the fitted line.
    pub height: f64,
    /// Height times half width (rad/s): the line's integrated strength up to `pi`.
    pub amplitude: f64,
    /// Zero-order phase used in absorption mode (rad).
    pub phase: f64,
    /// RMS residual over the fitted window relative to the height.
    pub rms_residual: f64,
    pub points: usize,
}

/// Least-squares single Lorentzian fit around the main peak.
pub fn fit_lorentz(spectrum: &Spectrum, mode: LineMode) -> Result<LorentzFit> {
    let peaks = find_peaks(spectrum);
    if peaks.len() > 1 {
        return Err(Error::Multimodal(peaks.len()));
    }
    let mags = spectrum.magnitudes();
    let (imax, &hmax) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| invalid("spectrum", "empty spectrum"))?;
    if !(hmax > 0.0) {
        return Err(invalid("spectrum", "spectrum is identically zero"));
    }
    let phase = spectrum.values[imax].arg();
    let data: Vec<f64> = match mode {
        LineMode::Magnitude => mags.clone(),
        LineMode::Absorption => spectrum
            .values
            .iter()
            .map(|v| (v * Complex64::from_polar(1.0, -phase)).re)
            .collect(),
    };
    // Contiguous window around the maximum down to 5% of it.
    let mut lo = imax;
    while lo > 0 && mags[lo - 1] >= 0.05 * hmax {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < mags.len() && mags[hi + 1] >= 0.05 * hmax {
        hi += 1;
    }
    if hi - lo < 4 {
        return Err(invalid("spectrum", "line is not resolved by the frequency grid"));
    }
    // Half width from the half-maximum crossing.
    let level = 0.5 * data[imax];
    let mut j = imax;
    while j < hi && data[j] > level {
        j += 1;
    }
    let crossing = (spectrum.offsets[j] - spectrum.offsets[imax]).abs().max(f64::MIN_POSITIVE);
    let hwhm0 = match mode {
        LineMode::Magnitude => crossing / 3f64.sqrt(),
        LineMode::Absorption => crossing,
    };
    let x0 = spectrum.offsets[imax];
    let scale = hwhm0;
    let xs: Vec<f64> = (lo..=hi).map(|i| (spectrum.offsets[i] - x0) / scale).collect();
    let ys: Vec<f64> = (lo..=hi).map(|i| data[i] / data[imax]).collect();
    let p = levenberg_marquardt(&xs, &ys, mode, [0.0, 0.0, 1.0])?;
    let gamma = p[1].exp() * scale;
    let center = x0 + p[0] * scale;
    let height = p[2] * data[imax];
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let (m, _) = model(*x, &p, mode);
            (m - y) * (m - y)
        })
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt()
        / p[2];
    Ok(LorentzFit {
        mode,
        center_offset: center,
        center_ppm: spectrum.offset_to_ppm(center),
        fwhm_hz: gamma / PI,
        height,
        amplitude: height * gamma,
        phase: if mode == LineMode::Absorption { phase } else { 0.0 },
        rms_residual: rms,
        points: xs.len(),
    })
}

/// Model value and gradient for parameters `[center, ln(half width), height]`.
fn model(x: f64, p: &[f64; 3], mode: LineMode) -> (f64, [f64; 3]) {
    let g = p[1].exp();
    let d = x - p[0];
    let den = g * g + d * d;
    match mode {
        LineMode::Magnitude => {
            let m = p[2] * g / den.sqrt();
            (m, [m * d / den, m * d * d / den, m / p[2]])
        }
        LineMode::Absorption => {
            let m = p[2] * g * g / den;
            (m, [2.0 * m * d / den, 2.0 * m * d * d / den, m / p[2]])
        }
    }
}

fn levenberg_marquardt(xs: &[f64], ys: &[f64], mode: LineMode, start: [f64; 3]) -> Result<[f64; 3]> {
    let cost = |p: &[f64; 3]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, y)| {
                let r = model(*x, p, mode).0 - y;
                r * r
            })
            .sum()
    };
    let mut p = start;
    let mut c = cost(&p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (x, y) in xs.iter().zip(ys) {
            let (m, g) = model(*x, &p, mode);
            let gv = Vector3::from(g);
            jtj += gv * gv.transpose();
            jtr += gv * (m - y);
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for i in 0..3 {
                a[(i, i)] *= 1.0 + lambda;
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let ct = cost(&trial);
            if ct.is_finite() && ct < c {
                let rel = (c - ct) / c.max(f64::MIN_POSITIVE);
                p = trial;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return Ok(p);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if p.iter().all(|v| v.is_finite()) {
        Ok(p)
    } else {
        Err(Error::Integration("Lorentzian fit diverged".into()))
    }
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let (slope, intercept) = crate::dynamics::linear_fit(x, y);
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    1.0 - ss_res / ss_tot
}
