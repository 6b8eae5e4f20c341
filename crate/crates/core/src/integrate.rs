//! Shared numerical engine: adaptive Gauss-Kronrod quadrature, nested
//! time-ordered integrals and seeded Monte Carlo with jackknife errors.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

/// Values an integrand may return.
pub trait QuadValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum<T: QuadValue>(xs: &[T]) -> T {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().fold(T::zero(), |acc, &x| acc + x)
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

impl QuadConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_483,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for the odd Kronrod nodes 1, 3, 5, 7, 9.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

fn kronrod21<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Result<(T, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    check_finite(fc.magnitude(), center)?;
    let mut kron = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        check_finite(f1.magnitude() + f2.magnitude(), center + dx)?;
        let pair = f1 + f2;
        kron = kron + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let k = kron * half;
    let g = gauss * half;
    Ok((k, (k - g).magnitude()))
}

fn check_finite(m: f64, x: f64) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::Integration(format!("integrand not finite at {x}")))
    }
}

struct Interval<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Interval<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Interval<T> {}
impl<T> PartialOrd for Interval<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Interval<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 21-point Gauss-Kronrod quadrature of `f` over `[lo, hi]`.
///
/// `hi` may be `f64::INFINITY`; the half line is then mapped onto `[0, 1)`.
pub fn quad_1d<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    lo: f64,
    hi: f64,
    cfg: &QuadConfig,
) -> Result<Estimate<T>> {
    if lo.is_nan() || hi.is_nan() || !lo.is_finite() {
        return Err(invalid("bounds", format!("bad interval [{lo}, {hi}]")));
    }
    if hi.is_infinite() {
        if hi < 0.0 {
            return Err(invalid("bounds", "upper bound is -inf"));
        }
        let mapped = |t: f64| {
            let u = 1.0 - t;
            f(lo + t / u) * (1.0 / (u * u))
        };
        return adaptive(&mapped, 0.0, 1.0, cfg);
    }
    if hi < lo {
        let est = adaptive(&f, hi, lo, cfg)?;
        return Ok(Estimate {
            value: T::zero() - est.value,
            ..est
        });
    }
    adaptive(&f, lo, hi, cfg)
}

fn adaptive<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
            converged: true,
        });
    }
    let (v, e) = kronrod21(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Interval { a, b, value: v, error: e });
    let mut evaluations = 21;
    let mut converged = false;
    loop {
        let (total, err) = heap
            .iter()
            .fold((T::zero(), 0.0), |(s, e), iv| (s + iv.value, e + iv.error));
        if err <= cfg.abs_tol.max(cfg.rel_tol * total.magnitude()) {
            converged = true;
        }
        if converged || heap.len() >= cfg.max_subdivisions {
            let mut parts: Vec<Interval<T>> = heap.into_vec();
            parts.sort_by(|x, y| x.a.total_cmp(&y.a));
            let values: Vec<T> = parts.iter().map(|p| p.value).collect();
            return Ok(Estimate {
                value: pairwise_sum(&values),
                error: err,
                evaluations,
                converged,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            heap.push(worst);
            let mut parts: Vec<Interval<T>> = heap.into_vec();
            parts.sort_by(|x, y| x.a.total_cmp(&y.a));
            let values: Vec<T> = parts.iter().map(|p| p.value).collect();
            return Ok(Estimate {
                value: pairwise_sum(&values),
                error: parts.iter().map(|p| p.error).sum(),
                evaluations,
                converged: false,
            });
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (v, e) = kronrod21(f, lo, hi)?;
            heap.push(Interval { a: lo, b: hi, value: v, error: e });
        }
        evaluations += 42;
    }
}

/// Integral of `f(s1, s2)` over the simplex `0 <= s2 <= s1 <= upper`.
pub fn time_ordered_2<T: QuadValue, F: Fn(f64, f64) -> T>(
    f: F,
    upper: f64,
    cfg: &QuadConfig,
) -> Result<Estimate<T>> {
    if !(upper.is_finite() && upper >= 0.0) {
        return Err(invalid("upper", format!("must be finite and >= 0, got {upper}")));
    }
    let inner_cfg = QuadConfig {
        rel_tol: cfg.rel_tol * 0.1,
        ..*cfg
    };
    let failure = std::cell::RefCell::new(None::<Error>);
    let inner_err = std::cell::Cell::new(0.0f64);
    let inner_evals = std::cell::Cell::new(0usize);
    let all_converged = std::cell::Cell::new(true);
    let outer = quad_1d(
        |s1| match quad_1d(|s2| f(s1, s2), 0.0, s1, &inner_cfg) {
            Ok(est) => {
                inner_err.set(inner_err.get().max(est.error));
                inner_evals.set(inner_evals.get() + est.evaluations);
                all_converged.set(all_converged.get() && est.converged);
                est.value
            }
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                T::zero()
            }
        },
        0.0,
        upper,
        cfg,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(Estimate {
        value: outer.value,
        error: outer.error + inner_err.get() * upper,
        evaluations: inner_evals.get(),
        converged: outer.converged && all_converged.get(),
    })
}

/// How one block of the unit hypercube is mapped onto a physical domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    /// One coordinate uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Pair `(s1, s2)` uniform on `0 <= s2 <= s1 <= upper`.
    OrderedPair { upper: f64 },
    /// Vector uniform in the spherical shell `lo <= |k| <= hi`.
    Shell { lo: f64, hi: f64 },
    /// Displacement distributed as the hydrogen 1s density (normalised).
    HydrogenicOneS { bohr_radius: f64 },
    /// Isotropic Gaussian position (normalised).
    Gaussian { center: [f64; 3], width: f64 },
    /// Weighted discrete points, each with `dim` coordinates (normalised).
    Discrete { points: Vec<Vec<f64>>, cdf: Vec<f64> },
}

impl Sampler {
    pub fn discrete(points: Vec<Vec<f64>>, weights: &[f64]) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(invalid("points", "need one weight per point"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(invalid("weights", "weights must be non-negative with positive sum"));
        }
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(Sampler::Discrete { points, cdf })
    }

    /// Uniform coordinates consumed. Position samplers always take three so
    /// that different nuclear densities share the remaining random stream.
    pub fn input_dims(&self) -> usize {
        match self {
            Sampler::Uniform { .. } => 1,
            Sampler::OrderedPair { .. } => 2,
            _ => 3,
        }
    }

    pub fn output_dims(&self) -> usize {
        match self {
            Sampler::Uniform { .. } => 1,
            Sampler::OrderedPair { .. } => 2,
            Sampler::Discrete { points, .. } => points[0].len(),
            _ => 3,
        }
    }

    /// Maps `u` into `out` and returns the weight (inverse density).
    fn map(&self, u: &[f64], out: &mut Vec<f64>) -> f64 {
        match self {
            Sampler::Uniform { lo, hi } => {
                out.push(lo + (hi - lo) * u[0]);
                hi - lo
            }
            Sampler::OrderedPair { upper } => {
                let (a, b) = (u[0] * upper, u[1] * upper);
                out.push(a.max(b));
                out.push(a.min(b));
                0.5 * upper * upper
            }
            Sampler::Shell { lo, hi } => {
                let (lo3, hi3) = (lo.powi(3), hi.powi(3));
                let r = (lo3 + u[0] * (hi3 - lo3)).cbrt();
                push_direction(r, u[1], u[2], out);
                4.0 * PI / 3.0 * (hi3 - lo3)
            }
            Sampler::HydrogenicOneS { bohr_radius } => {
                let r = 0.5 * bohr_radius * gamma3_quantile(u[0]);
                push_direction(r, u[1], u[2], out);
                1.0
            }
            Sampler::Gaussian { center, width } => {
                for i in 0..3 {
                    out.push(center[i] + width * normal_quantile(u[i]));
                }
                1.0
            }
            Sampler::Discrete { points, cdf } => {
                let i = cdf.partition_point(|c| *c < u[0]).min(points.len() - 1);
                out.extend_from_slice(&points[i]);
                1.0
            }
        }
    }
}

fn push_direction(r: f64, u1: f64, u2: f64, out: &mut Vec<f64>) {
    let cos_t = 1.0 - 2.0 * u1;
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = 2.0 * PI * u2;
    out.push(r * sin_t * phi.cos());
    out.push(r * sin_t * phi.sin());
    out.push(r * cos_t);
}

/// Quantile of the Gamma(3, 1) distribution by Newton iteration.
fn gamma3_quantile(u: f64) -> f64 {
    let u = u.clamp(1e-300, 1.0 - 1e-16);
    let cdf = |x: f64| 1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x);
    let mut x: f64 = 2.674_060_313_723_561; // median
    for _ in 0..100 {
        let pdf = 0.5 * x * x * (-x).exp();
        if pdf <= 0.0 {
            break;
        }
        let step = (cdf(x) - u) / pdf;
        let next = (x - step).max(0.5 * x);
        if (next - x).abs() <= 1e-15 * x.max(1e-300) {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Standard normal quantile (Acklam's rational approximation).
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    let low = 0.024_25;
    if p < low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Cartesian product of samplers; the integrand sees the concatenated outputs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProductDomain {
    pub samplers: Vec<Sampler>,
}

impl ProductDomain {
    pub fn new(samplers: Vec<Sampler>) -> Self {
        Self { samplers }
    }

    pub fn input_dims(&self) -> usize {
        self.samplers.iter().map(Sampler::input_dims).sum()
    }

    fn map(&self, u: &[f64], out: &mut Vec<f64>) -> f64 {
        out.clear();
        let mut w = 1.0;
        let mut offset = 0;
        for s in &self.samplers {
            let n = s.input_dims();
            w *= s.map(&u[offset..offset + n], out);
            offset += n;
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    /// Number of independent strata (one random stream each).
    pub strata: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            strata: 64,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
    /// Set when every stratum produced the same mean, so the error is zero.
    pub degenerate: bool,
}

/// Seeded Monte Carlo mean of `f` over `domain`.
///
/// Samples are split into `strata` equal blocks, each drawn from its own
/// ChaCha stream `(seed, block)`; inside a block the first coordinate is
/// stratified. The standard error is the delete-one-block jackknife. The
/// result does not depend on the number of worker threads.
pub fn mc_integrate<F>(f: F, domain: &ProductDomain, cfg: &McConfig) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if cfg.strata < 2 {
        return Err(invalid("strata", "need at least two strata for an error estimate"));
    }
    if cfg.samples < cfg.strata {
        return Err(invalid("samples", "fewer samples than strata"));
    }
    let dims = domain.input_dims();
    if dims == 0 {
        return Err(invalid("domain", "empty domain"));
    }
    let per_block = cfg.samples.div_ceil(cfg.strata);
    let means: Vec<Result<f64>> = (0..cfg.strata)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(block as u64);
            let mut u = vec![0.0; dims];
            let mut point = Vec::with_capacity(dims);
            let mut values = Vec::with_capacity(per_block);
            for j in 0..per_block {
                for x in u.iter_mut() {
                    *x = rng.gen::<f64>();
                }
                u[0] = (j as f64 + u[0]) / per_block as f64;
                let w = domain.map(&u, &mut point);
                let v = f(&point) * w;
                if !v.is_finite() {
                    return Err(Error::Integration(format!("non-finite sample at {point:?}")));
                }
                values.push(v);
            }
            Ok(pairwise_sum(&values) / per_block as f64)
        })
        .collect();
    let means: Vec<f64> = means.into_iter().collect::<Result<_>>()?;
    let s = means.len() as f64;
    let value = pairwise_sum(&means) / s;
    let dev: Vec<f64> = means.iter().map(|m| (m - value) * (m - value)).collect();
    let std_error = (pairwise_sum(&dev) / (s * (s - 1.0))).sqrt();
    Ok(McEstimate {
        value,
        std_error,
        samples: per_block * cfg.strata,
        degenerate: std_error == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_quantile_inverts_cdf() {
        for &u in &[1e-6, 0.1, 0.5, 0.9, 0.999_999] {
            let x = gamma3_quantile(u);
            let c = 1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x);
            assert!((c - u).abs() < 1e-12, "{u} {x} {c}");
        }
    }

    #[test]
    fn normal_quantile_symmetry() {
        assert!(normal_quantile(0.5).abs() < 1e-12);
        assert!((normal_quantile(0.975) - 1.959_963_985).abs() < 1e-7);
        assert!((normal_quantile(0.01) + normal_quantile(0.99)).abs() < 1e-9);
    }

    #[test]
    fn ordered_pair_volume() {
        let d = ProductDomain::new(vec![Sampler::OrderedPair { upper: 2.0 }]);
        let est = mc_integrate(|_| 1.0, &d, &McConfig::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-14);
        assert!(est.degenerate);
    }
}
