//! Independent numerical routes checked against the library.

use mqed_nmr::dynamics::{effective_relax_signal, fid_signal, Expansion, FidSpec, Frame, PulseSpec, TimeGrid};
use mqed_nmr::field::{field_commutator, Axis, Vec3};
use mqed_nmr::integrate::{mc_integrate, quad_1d, time_ordered_2, McConfig, ProductDomain, QuadConfig, Sampler};
use mqed_nmr::molecular::ElectronDensity;
use mqed_nmr::shielding::shielding_reduced;
use mqed_nmr::spectrum::{fit_lorentz, transform, transform_untruncated, LineMode};
use mqed_nmr::spin::{SpinSpec, SpinState};
use mqed_nmr::units::{
    planck_occupation, shielding_prefactor, CouplingFunction, ThermalParams, PRINTED_SHIELDING_PREFACTOR_A2,
};
use std::f64::consts::PI;

// CODATA 2018, spelled out again so the oracles do not share the library's constants.
const HBAR: f64 = 1.054_571_817e-34;
const C: f64 = 299_792_458.0;
const MU_B: f64 = 9.274_010_078_3e-24;
const MU_0: f64 = 1.256_637_062_12e-6;
const K_B: f64 = 1.380_649e-23;
const G_S: f64 = 2.002_319_304_362_56;
const A_0: f64 = 5.291_772_109_03e-11;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Shielding of a unit-area rectangular coupling on `[0, d]` by Simpson's rule,
/// with the thermal weight written as `coth(x) - 1` times the bare product
/// `(1 + 2 rho) (1 - e^{-2x}) / 2 / (1 + 2 rho)` collapsed by hand.
fn shielding_oracle(d: f64, temperature: f64) -> f64 {
    let beta = 1.0 / (K_B * temperature);
    let pref = G_S * G_S * MU_B * MU_B * MU_0 / (6.0 * PI * PI * HBAR * C);
    let g = 1.0 / d / 1e-10;
    let integrand = |k: f64| {
        let x = beta * HBAR * C * k;
        let weight = 0.5 * (1.0 - (-2.0 * x).exp());
        let form = 1.0 / (1.0 + k * k * A_0 * A_0 / 4.0).powi(2);
        weight * k * form
    };
    pref * g * g * simpson(integrand, 0.0, d, 20_000)
}

#[test]
fn shielding_prefactor_value() {
    // g^2 mu_B^2 mu_0 / (6 pi^2 hbar c) = 2.3145e-8 A^2.
    let a2 = shielding_prefactor() / 1e-20;
    assert!((a2 - 2.314_5e-8).abs() < 1e-12, "{a2}");
    // The printed value carries an extra factor pi (agreement to 1e-9; its constants differ slightly).
    assert!((PRINTED_SHIELDING_PREFACTOR_A2 / a2 / PI - 1.0).abs() < 1e-8);
}

#[test]
fn planck_occupation_room_temperature() {
    let t = ThermalParams::new(293.0).unwrap();
    let rho = planck_occupation(1e3, &t).unwrap();
    let x = HBAR * C * 1e3 / (K_B * 293.0);
    assert!((rho - 1.0 / x.exp_m1()).abs() < 1e-9 * rho);
    assert!((rho - 127.46).abs() < 0.01, "{rho}");
}

#[test]
fn reduced_shielding_matches_simpson() {
    let thermal = ThermalParams::new(293.0).unwrap();
    for d_mm in [0.04, 1.0, 4.0, 11.0] {
        let d = d_mm * 1e3;
        let phi = CouplingFunction::rectangular(0.0, d).unwrap();
        let a = shielding_reduced(&phi, &thermal, &ElectronDensity::default(), &QuadConfig::default())
            .unwrap()
            .value;
        let oracle = shielding_oracle(d, 293.0);
        assert!((a / oracle - 1.0).abs() < 1e-9, "d = {d_mm}: {a} vs {oracle}");
    }
}

#[test]
fn frozen_shielding_values() {
    // Frozen from the Simpson oracle above (T = 293 K, delta_ir = 0).
    let thermal = ThermalParams::new(293.0).unwrap();
    for (d_mm, frozen) in [(4.0, 2.356_222_875_82e-10), (11.0, 6.223_842_515_26e-10)] {
        let phi = CouplingFunction::rectangular(0.0, d_mm * 1e3).unwrap();
        let a = shielding_reduced(&phi, &thermal, &ElectronDensity::default(), &QuadConfig::default())
            .unwrap()
            .value;
        assert!((a / frozen - 1.0).abs() < 1e-10, "{a}");
    }
}

#[test]
fn quadrature_against_antiderivatives() {
    let cfg = QuadConfig::default();
    let cases: [(Box<dyn Fn(f64) -> f64>, f64, f64, f64); 4] = [
        (Box::new(f64::sin), 0.0, PI, 2.0),
        (Box::new(|x: f64| (-x).exp()), 0.0, f64::INFINITY, 1.0),
        (Box::new(|x: f64| 1.0 / (1.0 + x * x)), -3.0, 7.0, 7f64.atan() + 3f64.atan()),
        (Box::new(|x: f64| x.sqrt()), 0.0, 4.0, 16.0 / 3.0),
    ];
    for (f, a, b, exact) in cases {
        let est = quad_1d(f, a, b, &cfg).unwrap();
        let err = (est.value - exact).abs();
        assert!(err < 1e-9 * exact.abs(), "{} vs {exact}", est.value);
        assert!(err <= est.error.max(1e-15), "error estimate {} below true error {err}", est.error);
    }
}

#[test]
fn time_ordered_polynomial() {
    // int_0^T ds1 int_0^s1 ds2 s1 s2^2 = T^5 / 15
    let t = 1.7;
    let est = time_ordered_2(|s1, s2| s1 * s2 * s2, t, &QuadConfig::default()).unwrap();
    assert!((est.value - t.powi(5) / 15.0).abs() < 1e-12);
}

#[test]
fn monte_carlo_error_is_calibrated() {
    // int_[0,1]^3 (x + y^2 + z^3) = 1/2 + 1/3 + 1/4, 200 independent runs.
    let exact = 0.5 + 1.0 / 3.0 + 0.25;
    let domain = ProductDomain::new(vec![Sampler::Uniform { lo: 0.0, hi: 1.0 }, Sampler::Uniform { lo: 0.0, hi: 1.0 }, Sampler::Uniform { lo: 0.0, hi: 1.0 }]);
    let mut inside = 0;
    for run in 0..200u64 {
        let cfg = McConfig {
            samples: 4096,
            strata: 32,
            seed: 1000 + run,
        };
        let e = mc_integrate(|p| p[0] + p[1] * p[1] + p[2].powi(3), &domain, &cfg).unwrap();
        if (e.value - exact).abs() <= e.std_error {
            inside += 1;
        }
    }
    let coverage = inside as f64 / 200.0;
    assert!((coverage - 0.68).abs() <= 0.07, "coverage {coverage}");
}

#[test]
fn monte_carlo_ignores_thread_count() {
    let domain = ProductDomain::new(vec![
        Sampler::Gaussian { center: [0.3, 0.0, 0.0], width: 0.7 },
        Sampler::Uniform { lo: 0.0, hi: 1.0 },
    ]);
    let cfg = McConfig {
        samples: 50_000,
        strata: 16,
        seed: 7,
    };
    let f = |p: &[f64]| (p[0] * p[3] + p[1]).cos();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_integrate(f, &domain, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
}

#[test]
fn monte_carlo_gaussian_matches_quadrature() {
    // E[cos x] with x ~ N(0.3, 0.7^2) is cos(0.3) e^{-0.245}.
    let exact = 0.3f64.cos() * (-0.5 * 0.49f64).exp();
    let domain = ProductDomain::new(vec![Sampler::Gaussian { center: [0.3, 0.0, 0.0], width: 0.7 }]);
    let e = mc_integrate(|p| p[0].cos(), &domain, &McConfig::default()).unwrap();
    assert!((e.value - exact).abs() < 3.0 * e.std_error, "{} +- {}", e.value, e.std_error);
}

#[test]
fn commutator_on_site_matches_closed_form() {
    // At r = 0 the angular factor is 2/3 delta, and int_0^K k^3 sin(a k) dk is elementary.
    let (d, tau) = (4e3, 3e-12);
    let phi = CouplingFunction::rectangular(0.0, d).unwrap();
    let got = field_commutator(Axis::Z, Axis::Z, &Vec3::zeros(), tau, &phi, &QuadConfig::default()).unwrap();
    let a = C * tau;
    let (s, c) = (a * d).sin_cos();
    let k = d;
    let integral = -k.powi(3) * c / a + 3.0 * k * k * s / (a * a) + 6.0 * k * c / a.powi(3) - 6.0 * s / a.powi(4);
    let eps0 = 1.0 / (MU_0 * C * C);
    let g = 1.0 / d / 1e-10;
    let expect = -HBAR / (2.0 * PI * PI * eps0 * C) * g * g * (2.0 / 3.0) * integral;
    assert!(got.re == 0.0);
    assert!((got.im / expect - 1.0).abs() < 1e-9, "{} vs {expect}", got.im);
    let zero = field_commutator(Axis::X, Axis::Y, &Vec3::new(1e-4, 2e-4, 0.0), 0.0, &phi, &QuadConfig::default());
    assert_eq!(zero.unwrap().im, 0.0);
}

#[test]
fn resonant_pulse_tips_to_transverse_plane() {
    let thermal = ThermalParams::new(293.0).unwrap();
    let field = 0.05;
    let spin = SpinState::new(SpinSpec::proton(), field, thermal).unwrap();
    let larmor = spin.larmor();
    let amplitude = 1e-3;
    // A linearly polarised field has a co-rotating half of strength B_p / 2.
    let duration = PI / (SpinSpec::proton().gyromagnetic * amplitude);
    let pulse = PulseSpec::Rectangular {
        amplitude,
        duration,
        phase: 0.0,
        band_lo: larmor * (1.0 - 1e-9),
        band_hi: larmor * (1.0 + 1e-9),
    };
    let m = pulse.transverse_amplitude(&spin).unwrap();
    assert!((m.norm() - 0.5).abs() < 0.005, "{m}");
    assert_eq!(PulseSpec::Ideal90.transverse_amplitude(&spin).unwrap().re, 0.5);
}

#[test]
fn transform_of_damped_line() {
    let larmor = 2.675_221_874_4e8 * 20.0;
    let (shift_ppm, t2) = (-0.1, 0.5);
    let grid = TimeGrid::new(0.0, 2e-3, 8192).unwrap();
    let signal = effective_relax_signal(shift_ppm, t2, larmor, &grid).unwrap();
    let spec = transform(&signal).unwrap();
    // S(nu) = 0.5 / (1/T2 - i (nu - offset)): peak 0.5 T2 at the shifted line.
    let fit = fit_lorentz(&spec, LineMode::Absorption).unwrap();
    assert!((fit.center_ppm - shift_ppm).abs() < 1e-4, "{}", fit.center_ppm);
    assert!((fit.fwhm_hz * PI * t2 - 1.0).abs() < 0.01, "{}", fit.fwhm_hz);
    let peak = spec.magnitudes().into_iter().fold(0.0, f64::max);
    assert!((peak / (0.5 * t2) - 1.0).abs() < 0.01, "{peak}");
}

#[test]
fn parseval() {
    let larmor = 1e6;
    let grid = TimeGrid::new(0.0, 1e-3, 1000).unwrap();
    let signal = effective_relax_signal(3.0, 0.1, larmor, &grid).unwrap();
    let spec = transform_untruncated(&signal).unwrap();
    let n = signal.len();
    let time: f64 = signal
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            (w * v).norm_sqr()
        })
        .sum::<f64>()
        * signal.dt;
    let step = spec.offsets[1] - spec.offsets[0];
    let freq: f64 = spec.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * step / (2.0 * PI);
    assert!((freq / time - 1.0).abs() < 1e-12, "{freq} vs {time}");
}

#[test]
fn empty_coupling_never_decays() {
    let thermal = ThermalParams::new(293.0).unwrap();
    let spec = FidSpec::hydrogen(CouplingFunction::empty(), thermal, 20.0);
    let grid = TimeGrid::new(0.0, 1e-3, 256).unwrap();
    let signal = fid_signal(&spec, &grid, Frame::Rotating, Expansion::Resummed).unwrap();
    assert!(signal.values.iter().all(|v| (v.norm() - 0.5).abs() < 1e-15));
    assert!(transform(&signal).unwrap().non_decaying);
}
