//! Free induction decay after a pulse: second-order cumulant of the
//! transverse magnetisation driven by the thermal exchange spectrum.

use crate::error::{invalid, require_positive, Result};
use crate::molecular::ElectronDensity;
use crate::shielding::thermal_factor;
use crate::spin::{SpinSpec, SpinState};
use crate::units::{shielding_prefactor, CouplingFunction, ThermalParams, COUPLING_LENGTH, SPEED_OF_LIGHT};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Contractions kept in the second-order cumulant, reported in metadata.
pub const CUMULANT_TERMS: [&str; 2] = [
    "reactive: zz exchange kernel x omega(I_y tau I_x), imaginary-time ordered, 1s form factor",
    "dissipative: same exchange weights x omega(I_y tau I_y), scaled by the dissipation ratio",
];

/// Discretised exchange spectrum: nodes `k_i` (m⁻¹) and weights whose sum
/// is the shielding coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeSpectrum {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

// 21-point Kronrod nodes and weights on [-1, 1] (half rule, node 0 last).
const KX: [f64; 11] = [
    0.995_657_163_025_808_1, 0.973_906_528_517_171_7, 0.930_157_491_355_708_2,
    0.865_063_366_688_984_5, 0.780_817_726_586_416_9, 0.679_409_568_299_024_4,
    0.562_757_134_668_604_7, 0.433_395_394_129_247_2, 0.294_392_862_701_460_2,
    0.148_874_338_981_631_2, 0.0,
];
const KW: [f64; 11] = [
    0.011_694_638_867_371_874, 0.032_558_162_307_964_73, 0.054_755_896_574_352,
    0.075_039_674_810_919_95, 0.093_125_454_583_697_6, 0.109_387_158_802_297_64,
    0.123_491_976_262_065_85, 0.134_709_217_311_473_33, 0.142_775_938_577_060_08,
    0.147_739_104_901_338_5, 0.149_445_554_002_916_9,
];

impl ExchangeSpectrum {
    /// Tabulates the spectrum with `panels` 21-point panels per band.
    pub fn new(
        phi: &CouplingFunction,
        thermal: &ThermalParams,
        electron: &ElectronDensity,
        panels: usize,
    ) -> Result<Self> {
        if panels == 0 {
            return Err(invalid("panels", "need at least one panel"));
        }
        let c = shielding_prefactor();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for band in phi.bands() {
            let amp = band.height / COUPLING_LENGTH;
            let width = (band.hi - band.lo) / panels as f64;
            for p in 0..panels {
                let center = band.lo + (p as f64 + 0.5) * width;
                let half = 0.5 * width;
                for (j, (&x, &w)) in KX.iter().zip(&KW).enumerate() {
                    let signs: &[f64] = if j == 10 { &[1.0] } else { &[-1.0, 1.0] };
                    for s in signs {
                        let k = center + s * half * x;
                        let density = thermal_factor(k, thermal) * k * electron.form_factor(k);
                        nodes.push(k);
                        weights.push(c * amp * amp * density * w * half);
                    }
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Shielding coefficient carried by the spectrum.
    pub fn shielding(&self) -> f64 {
        crate::integrate::pairwise_sum(&self.weights)
    }

    /// Same spectrum with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }
}

/// `int_0^t dt1 int_0^t1 dt2 W e^{-W (t1 - t2)} = t - (1 - e^{-W t}) / W`.
pub fn mode_memory(rate: f64, t: f64) -> f64 {
    let y = rate * t;
    if y < 1e-3 {
        t * y * (0.5 - y / 6.0 + y * y / 24.0 - y * y * y / 120.0)
    } else {
        (y + (-y).exp_m1()) / rate
    }
}

/// Second-order cumulant `K2(t)` of the transverse magnetisation.
///
/// Each exchanged mode of wavenumber `k` has memory `ck e^{-ck tau}`, so the
/// time-ordered double integral is `mode_memory(ck, t)`. The long-time slope
/// of `Im K2` is `a nu0` (the shielding shift) and that of `Re K2` is
/// `-eta a nu0`, where `eta` is the dissipation ratio.
pub fn second_order_cumulant(spectrum: &ExchangeSpectrum, larmor: f64, dissipation_ratio: f64, t: f64) -> Complex64 {
    let terms: Vec<f64> = spectrum
        .nodes
        .iter()
        .zip(&spectrum.weights)
        .map(|(&k, &w)| w * mode_memory(SPEED_OF_LIGHT * k, t))
        .collect();
    let sum = crate::integrate::pairwise_sum(&terms);
    Complex64::new(-dissipation_ratio, 1.0) * (larmor * sum)
}

/// Excitation pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseSpec {
    /// Instantaneous 90 degree rotation about y.
    Ideal90,
    /// Field along y, `B_p int f(w) cos(w t + phase) dw` with `f` flat on
    /// `[band_lo, band_hi]` (rad/s) and unit area, applied for `duration`.
    Rectangular {
        amplitude: f64,
        duration: f64,
        phase: f64,
        band_lo: f64,
        band_hi: f64,
    },
}

impl PulseSpec {
    fn field(&self, t: f64) -> f64 {
        match *self {
            PulseSpec::Ideal90 => 0.0,
            PulseSpec::Rectangular {
                amplitude,
                phase,
                band_lo,
                band_hi,
                ..
            } => {
                let width = band_hi - band_lo;
                let mid = 0.5 * (band_lo + band_hi);
                // (sin(hi t + p) - sin(lo t + p)) / (width t), written to stay finite at t = 0.
                let x = 0.5 * width * t;
                let sinc = if x.abs() < 1e-8 { 1.0 } else { x.sin() / x };
                amplitude * (mid * t + phase).cos() * sinc
            }
        }
    }

    /// Normalised transverse magnetisation `<I_+>` right after the pulse,
    /// scaled so that the ideal pulse gives 0.5.
    pub fn transverse_amplitude(&self, spin: &SpinState) -> Result<Complex64> {
        match *self {
            PulseSpec::Ideal90 => Ok(Complex64::new(0.5, 0.0)),
            PulseSpec::Rectangular {
                duration,
                band_lo,
                band_hi,
                amplitude,
                ..
            } => {
                require_positive("duration", duration)?;
                require_positive("amplitude", amplitude)?;
                if !(band_hi > band_lo) {
                    return Err(invalid("band", "need band_lo < band_hi"));
                }
                Ok(0.5 * rotate_polarisation(self, spin, duration))
            }
        }
    }
}

/// Evolves the unit polarisation `(0, 0, 1)` through the pulse and returns
/// `m_x + i m_y`. Uses exact SU(2) steps with the field frozen per step.
fn rotate_polarisation(pulse: &PulseSpec, spin: &SpinState, duration: f64) -> Complex64 {
    let gamma = spin.spec.gyromagnetic;
    let b0 = spin.field_z;
    let larmor = (gamma * b0).abs().max(1.0);
    let steps = ((duration * larmor / (2.0 * PI)) * 64.0).ceil().clamp(64.0, 5e7) as usize;
    let dt = duration / steps as f64;
    let mut m = [0.0, 0.0, 1.0];
    for n in 0..steps {
        let t = (n as f64 + 0.5) * dt;
        // dm/dt = gamma m x B  (H = -gamma I.B)
        let omega = [0.0, -gamma * pulse.field(t), -gamma * b0];
        m = rotate(m, omega, dt);
    }
    Complex64::new(m[0], m[1])
}

/// Rotation of `m` about `omega` by angle `|omega| dt` (right-handed).
fn rotate(m: [f64; 3], omega: [f64; 3], dt: f64) -> [f64; 3] {
    let w = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
    if w == 0.0 {
        return m;
    }
    let n = [omega[0] / w, omega[1] / w, omega[2] / w];
    let (s, c) = (w * dt).sin_cos();
    let dot = n[0] * m[0] + n[1] * m[1] + n[2] * m[2];
    let cross = [
        n[1] * m[2] - n[2] * m[1],
        n[2] * m[0] - n[0] * m[2],
        n[0] * m[1] - n[1] * m[0],
    ];
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = m[i] * c + cross[i] * s + n[i] * dot * (1.0 - c);
    }
    out
}

/// Sampled `<M_+>(t) = <I_x> + i <I_y>`, stored in a frame rotating at
/// `frame_frequency` (rad/s): the laboratory value is `value * e^{-i f t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Complex64>,
    pub frame_frequency: f64,
    /// Reference Larmor frequency for chemical-shift axes (rad/s).
    pub larmor: f64,
    pub metadata: BTreeMap<String, String>,
}

impl SignalSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn lab_value(&self, i: usize) -> Complex64 {
        self.values[i] * Complex64::from_polar(1.0, -self.frame_frequency * self.time(i))
    }

    pub fn ix(&self, i: usize) -> f64 {
        self.lab_value(i).re
    }

    pub fn iy(&self, i: usize) -> f64 {
        self.lab_value(i).im
    }
}

/// Uniform sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub samples: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, samples: usize) -> Result<Self> {
        require_positive("dt", dt)?;
        if samples < 2 {
            return Err(invalid("samples", "need at least two samples"));
        }
        Ok(Self { t0, dt, samples })
    }

    /// Grid covering the decay down to `1e-5` of the initial envelope with
    /// `per_cycle` samples per period of the fastest rotating-frame motion.
    pub fn covering(offset: f64, rate: f64, per_cycle: f64) -> Result<Self> {
        require_positive("rate", rate)?;
        let t_max = (1e5f64).ln() / rate;
        let fastest = offset.abs() + rate;
        let dt = 2.0 * PI / (per_cycle * fastest);
        let samples = (t_max / dt).ceil() as usize + 1;
        Self::new(0.0, dt, samples.max(16))
    }
}

/// Which reference frame the samples are stored in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Laboratory,
    /// Rotating at the bare Larmor frequency.
    Rotating,
}

/// How the cumulant enters the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    /// `0.5 u(t) exp(K2)`.
    Resummed,
    /// Truncated series `0.5 u(t) (1 + K2)`, valid at short times only.
    Bare,
}

/// Inputs of a free-induction-decay computation.
#[derive(Debug, Clone, PartialEq)]
pub struct FidSpec {
    pub phi: CouplingFunction,
    pub thermal: ThermalParams,
    pub electron: ElectronDensity,
    pub nucleus: SpinSpec,
    pub field_z: f64,
    pub pulse: PulseSpec,
    pub dissipation_ratio: f64,
    /// Configurations as `(weight, shielding scale)`; weights sum to one.
    pub environments: Vec<(f64, f64)>,
    pub panels: usize,
}

impl FidSpec {
    pub fn hydrogen(phi: CouplingFunction, thermal: ThermalParams, field_z: f64) -> Self {
        Self {
            phi,
            thermal,
            electron: ElectronDensity::default(),
            nucleus: SpinSpec::proton(),
            field_z,
            pulse: PulseSpec::Ideal90,
            dissipation_ratio: 1.0,
            environments: vec![(1.0, 1.0)],
            panels: 64,
        }
    }

    pub fn larmor(&self) -> f64 {
        self.nucleus.larmor(self.field_z)
    }

    pub fn spectrum(&self) -> Result<ExchangeSpectrum> {
        ExchangeSpectrum::new(&self.phi, &self.thermal, &self.electron, self.panels)
    }

    /// Rotating-frame offset and decay rate of the weighted mean line.
    pub fn line_parameters(&self) -> Result<(f64, f64)> {
        let a = self.spectrum()?.shielding();
        let scale: f64 = self.environments.iter().map(|(w, s)| w * s).sum();
        let nu = self.larmor().abs();
        Ok((a * scale * nu, self.dissipation_ratio * a * scale * nu))
    }

    /// A grid adapted to the predicted line (see `TimeGrid::covering`).
    pub fn auto_grid(&self) -> Result<TimeGrid> {
        let (offset, rate) = self.line_parameters()?;
        TimeGrid::covering(offset, rate, 128.0)
    }
}

/// `<M_+>(t)` after the pulse.
pub fn fid_signal(spec: &FidSpec, grid: &TimeGrid, frame: Frame, expansion: Expansion) -> Result<SignalSeries> {
    if !(spec.dissipation_ratio >= 0.0 && spec.dissipation_ratio.is_finite()) {
        return Err(invalid("dissipation_ratio", "must be finite and non-negative"));
    }
    let total: f64 = spec.environments.iter().map(|(w, _)| w).sum();
    if spec.environments.is_empty() || (total - 1.0).abs() > 1e-9 {
        return Err(crate::error::Error::NotNormalized(total));
    }
    let spin = SpinState::new(spec.nucleus, spec.field_z, spec.thermal)?;
    let amplitude = spec.pulse.transverse_amplitude(&spin)?;
    let base = spec.spectrum()?;
    let larmor = spec.larmor();
    let frame_frequency = match frame {
        Frame::Laboratory => 0.0,
        Frame::Rotating => larmor,
    };
    let sites: Vec<(f64, ExchangeSpectrum)> = spec
        .environments
        .iter()
        .map(|(w, s)| (*w, base.scaled(*s)))
        .collect();
    let values = (0..grid.samples)
        .map(|i| {
            let t = grid.t0 + i as f64 * grid.dt;
            let carrier = Complex64::from_polar(1.0, -(larmor - frame_frequency) * t);
            let mut acc = Complex64::new(0.0, 0.0);
            for (w, s) in &sites {
                let k2 = second_order_cumulant(s, larmor, spec.dissipation_ratio, t);
                let envelope = match expansion {
                    Expansion::Resummed => k2.exp(),
                    Expansion::Bare => 1.0 + k2,
                };
                acc += *w * envelope;
            }
            amplitude * carrier * acc
        })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("shielding".into(), format!("{:?}", base.shielding()));
    metadata.insert("dissipation_ratio".into(), format!("{:?}", spec.dissipation_ratio));
    metadata.insert(
        "expansion".into(),
        match expansion {
            Expansion::Resummed => "resummed",
            Expansion::Bare => "bare",
        }
        .into(),
    );
    for (i, term) in CUMULANT_TERMS.iter().enumerate() {
        metadata.insert(format!("term_{i}"), (*term).into());
    }
    Ok(SignalSeries {
        t0: grid.t0,
        dt: grid.dt,
        values,
        frame_frequency,
        larmor,
        metadata,
    })
}

/// Phenomenological reference: `0.5 e^{-i (1 + shift) nu0 t} e^{-t/T2}` with
/// the shift in ppm (positive = deshielded), stored rotating at `nu0`.
pub fn effective_relax_signal(shift_ppm: f64, t2: f64, larmor: f64, grid: &TimeGrid) -> Result<SignalSeries> {
    require_positive("T2", t2)?;
    crate::error::require_finite("shift_ppm", shift_ppm)?;
    let offset = shift_ppm * 1e-6 * larmor;
    let values = (0..grid.samples)
        .map(|i| {
            let t = grid.t0 + i as f64 * grid.dt;
            Complex64::from_polar(0.5 * (-t / t2).exp(), -offset * t)
        })
        .collect();
    let mut metadata = BTreeMap::new();
    metadata.insert("model".into(), "effective-relaxation".into());
    Ok(SignalSeries {
        t0: grid.t0,
        dt: grid.dt,
        values,
        frame_frequency: larmor,
        larmor,
        metadata,
    })
}

/// Time-domain description of a single damped line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayParams {
    /// Envelope decay rate (1/s); `T2 = 1/rate`.
    pub rate: f64,
    /// Angular frequency of the stored samples, in the laboratory sense
    /// `e^{-i w t}` (rad/s).
    pub frequency: f64,
    pub amplitude: f64,
    /// RMS of the envelope against the fitted exponential, relative to the amplitude.
    pub envelope_rms: f64,
}

impl DecayParams {
    pub fn t2(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Least-squares fit of `ln|M|` and the unwrapped phase over the samples
/// whose envelope exceeds `floor` times the first one.
pub fn fit_decay(signal: &SignalSeries, floor: f64) -> Result<DecayParams> {
    let m0 = signal.values.first().map(|v| v.norm()).unwrap_or(0.0);
    if !(m0 > 0.0) {
        return Err(invalid("signal", "zero initial amplitude"));
    }
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut phases = Vec::new();
    let mut prev = 0.0;
    let mut unwrap = 0.0;
    for (i, v) in signal.values.iter().enumerate() {
        if v.norm() < floor * m0 {
            break;
        }
        let arg = v.arg();
        if i > 0 {
            let d = arg - prev;
            if d > PI {
                unwrap -= 2.0 * PI;
            } else if d < -PI {
                unwrap += 2.0 * PI;
            }
        }
        prev = arg;
        ts.push(signal.time(i));
        logs.push(v.norm().ln());
        phases.push(arg + unwrap);
    }
    if ts.len() < 3 {
        return Err(invalid("signal", "too few samples above the floor"));
    }
    let (slope, intercept) = linear_fit(&ts, &logs);
    let (phase_slope, _) = linear_fit(&ts, &phases);
    let amplitude = intercept.exp();
    let rate = -slope;
    let sq: f64 = ts
        .iter()
        .zip(&logs)
        .map(|(t, l)| {
            let d = (l.exp() - amplitude * (-rate * t).exp()) / amplitude;
            d * d
        })
        .sum();
    Ok(DecayParams {
        rate,
        frequency: -phase_slope,
        amplitude,
        envelope_rms: (sq / ts.len() as f64).sqrt(),
    })
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Phase (degrees) by which `<I_y>` trails `<I_x>` at angular frequency
/// `omega`, from the complex demodulation of both laboratory components.
pub fn quadrature_phase(signal: &SignalSeries, omega: f64) -> f64 {
    let mut cx = Complex64::new(0.0, 0.0);
    let mut cy = Complex64::new(0.0, 0.0);
    for i in 0..signal.len() {
        let t = signal.time(i);
        let e = Complex64::from_polar(1.0, omega * t);
        cx += signal.ix(i) * e;
        cy += signal.iy(i) * e;
    }
    let mut d = (cx.arg() - cy.arg()).to_degrees();
    while d > 180.0 {
        d -= 360.0;
    }
    while d <= -180.0 {
        d += 360.0;
    }
    d
}
