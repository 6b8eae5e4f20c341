//! Command runner behind the `mqed-nmr` binary: run configuration, presets,
//! the six commands and their output files.

use crate::dynamics::{effective_relax_signal, fid_signal, linear_fit, Expansion, FidSpec, Frame, TimeGrid};
use crate::error::{invalid, Error, Result};
use crate::integrate::{McConfig, QuadConfig};
use crate::io;
use crate::molecular::{cosine_rotor, gibbs_density, MolecularState, NuclearDensity, PotentialTable};
use crate::reconstruction::{
    reconstruct, temperature_ladder, ForwardModel, NelderMeadOptions, ReconstructionOptions, SpectralBasis,
    TargetSpectrum,
};
use crate::shielding::{shielding_full, shielding_reduced, ShieldingResult};
use crate::spectrum::{fit_lorentz, r_squared, transform, LineMode, LorentzFit, Spectrum};
use crate::units::{
    parse_field, parse_temperature, parse_time, parse_wavenumber, split_quantity, wavenumber_from_si,
    CouplingFunction, ThermalParams, BOLTZMANN, PROTON_GYROMAGNETIC,
};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "MQED_NMR_OUTPUT_DIR";

/// Value of `target` / `reference` selecting the packaged round-trip fixture.
pub const BUILTIN_ROUND_TRIP: &str = "builtin:round-trip";

/// Synthetic target spectrum shipped with the crate, forward-generated from
/// [`ROUND_TRIP_TRUTH`] with the `round-trip` preset's model.
pub const ROUND_TRIP_TARGET: &str = include_str!("../fixtures/round_trip_target.csv");

/// Angular density behind [`ROUND_TRIP_TARGET`].
pub const ROUND_TRIP_TRUTH: &str = include_str!("../fixtures/round_trip_truth.txt");

/// Recognised configuration keys and their defaults.
pub const KEYS: &[(&str, &str)] = &[
    ("temperature", "293 K"),
    ("B", "20 T"),
    ("delta_ir", "0 mm^-1"),
    ("delta_uv", "4 mm^-1"),
    ("delta_uv_list", "4, 5, 6, 7, 8, 9, 10, 11 mm^-1"),
    ("method", "reduced"),
    ("samples", "1000000"),
    ("strata", "64"),
    ("seed", "1"),
    ("workers", "1"),
    ("dissipation_ratio", "1"),
    ("frame", "rotating"),
    ("expansion", "resummed"),
    ("line_mode", "magnitude"),
    ("shift", "-0.1 ppm"),
    ("t2", "1 s"),
    ("dt", "0.001 s"),
    ("n_samples", "4096"),
    ("target", ""),
    ("reference", ""),
    ("grid", "64"),
    ("shift_amplitude", "1 ppm"),
    ("width", "0.25 ppm"),
    ("width_modulation", "0.6"),
    ("sites", "1"),
    ("energy", "cosine 2"),
    ("barrier", "1 kT"),
    ("orders", "8"),
    ("regularization", "1e-3"),
    ("agreement", "0.02"),
    ("ladder", ""),
];

/// Named parameter sets for the standard experiments.
pub const PRESETS: &[(&str, &[(&str, &str)])] = &[
    (
        "shielding-linearity",
        &[
            ("temperature", "293 K"),
            ("delta_ir", "0 mm^-1"),
            ("delta_uv_list", "4, 5, 6, 7, 8, 9, 10, 11 mm^-1"),
        ],
    ),
    (
        "lineshape-mm",
        &[
            ("temperature", "293 K"),
            ("B", "20 T"),
            ("delta_uv_list", "4, 5, 6, 7, 8, 9, 10, 11 mm^-1"),
        ],
    ),
    (
        "lineshape-Mm",
        &[
            ("temperature", "293 K"),
            ("B", "20 T"),
            ("delta_uv_list", "0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10, 0.11 Mm^-1"),
        ],
    ),
    ("decay-0.05", &[("temperature", "293 K"), ("B", "20 T"), ("delta_uv", "0.05 Mm^-1")]),
    ("decay-0.1", &[("temperature", "293 K"), ("B", "20 T"), ("delta_uv", "0.1 Mm^-1")]),
    (
        "ladder",
        &[
            ("energy", "cosine 2"),
            ("barrier", "100 K"),
            ("grid", "64"),
            ("shift_amplitude", "1 ppm"),
            ("width", "0.9 ppm"),
            ("width_modulation", "0"),
            ("sites", "2"),
            ("ladder", "5, 10, 20, 30, 40, 60, 100, 300, 10000 K"),
        ],
    ),
    (
        "round-trip",
        &[
            ("target", BUILTIN_ROUND_TRIP),
            ("reference", BUILTIN_ROUND_TRIP),
            ("temperature", "35 K"),
            ("energy", "cosine 2"),
            ("barrier", "100 K"),
            ("grid", "64"),
            ("shift_amplitude", "1 ppm"),
            ("width", "0.25 ppm"),
            ("width_modulation", "0.6"),
            ("sites", "1"),
        ],
    ),
];

/// Flat `key = value` configuration; `[section]` lines only group keys.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn defaults() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let (_, entries) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| invalid("preset", format!("unknown preset `{name}`")))?;
        for (k, v) in entries.iter() {
            self.set(k, v)?;
        }
        self.values.insert("preset".into(), name.into());
        Ok(())
    }

    /// Parses a configuration file. Output files (recognised by their
    /// `# command = ...` header) are accepted too: their `# key = value`
    /// lines are read and everything else is skipped.
    pub fn parse_into(&mut self, text: &str) -> Result<()> {
        let replay = text.lines().any(|l| {
            l.trim()
                .strip_prefix('#')
                .and_then(|r| r.split_once('='))
                .is_some_and(|(k, _)| k.trim() == "command")
        });
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            if replay && !line.starts_with('#') {
                continue;
            }
            let (commented, body) = match line.strip_prefix('#') {
                Some(rest) => (true, rest.trim()),
                None => (false, line),
            };
            let Some((k, v)) = body.split_once('=') else {
                if commented {
                    continue;
                }
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = k.trim();
            if key == "preset" {
                self.values.insert("preset".into(), v.trim().into());
                continue;
            }
            if !KEYS.iter().any(|(name, _)| *name == key) {
                if commented {
                    continue;
                }
                return Err(Error::Parse {
                    line: i + 1,
                    reason: format!("unknown key `{key}`"),
                });
            }
            self.values.insert(key.to_string(), v.trim().to_string());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.iter().any(|(name, _)| *name == key) {
            return Err(invalid("key", format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Parses every key so a malformed value fails before any computation.
    pub fn validate(&self) -> Result<()> {
        let checks: &[(&'static str, &dyn Fn() -> Result<()>)] = &[
            ("temperature", &|| self.thermal().map(drop)),
            ("B", &|| self.field().map(drop)),
            ("delta_ir", &|| parse_wavenumber(self.get("delta_ir")).map(drop)),
            ("delta_uv", &|| parse_wavenumber(self.get("delta_uv")).map(drop)),
            ("delta_uv_list", &|| self.delta_uv_list().map(drop)),
            ("samples", &|| self.mc().map(drop)),
            ("workers", &|| self.workers().map(drop)),
            ("dissipation_ratio", &|| self.f64_of("dissipation_ratio").map(drop)),
            ("frame", &|| self.frame().map(drop)),
            ("expansion", &|| self.expansion().map(drop)),
            ("line_mode", &|| self.line_mode().map(drop)),
            ("shift", &|| self.ppm_of("shift").map(drop)),
            ("t2", &|| parse_time(self.get("t2")).map(drop)),
            ("dt", &|| parse_time(self.get("dt")).map(drop)),
            ("n_samples", &|| self.usize_of("n_samples").map(drop)),
            ("grid", &|| self.usize_of("grid").map(drop)),
            ("sites", &|| self.usize_of("sites").map(drop)),
            ("orders", &|| self.usize_of("orders").map(drop)),
            ("shift_amplitude", &|| self.ppm_of("shift_amplitude").map(drop)),
            ("width", &|| self.ppm_of("width").map(drop)),
            ("width_modulation", &|| self.f64_of("width_modulation").map(drop)),
            ("regularization", &|| self.f64_of("regularization").map(drop)),
            ("agreement", &|| self.f64_of("agreement").map(drop)),
            ("barrier", &|| self.barrier().map(drop)),
            ("ladder", &|| self.ladder().map(drop)),
        ];
        for (key, check) in checks {
            check().map_err(|e| match e {
                Error::InvalidParameter { .. } => e,
                other => invalid(key, other.to_string()),
            })?;
        }
        Ok(())
    }

    pub fn thermal(&self) -> Result<ThermalParams> {
        ThermalParams::new(parse_temperature(self.get("temperature"))?)
    }

    pub fn field(&self) -> Result<f64> {
        parse_field(self.get("B"))
    }

    pub fn coupling(&self, delta_uv: f64) -> Result<CouplingFunction> {
        CouplingFunction::rectangular(parse_wavenumber(self.get("delta_ir"))?, delta_uv)
    }

    /// `"4, 5, 6 mm^-1"`: numbers sharing one trailing unit.
    pub fn delta_uv_list(&self) -> Result<Vec<f64>> {
        list_with_unit(self.get("delta_uv_list"), "delta_uv_list")?
            .into_iter()
            .map(|(v, unit)| parse_wavenumber(&format!("{v} {unit}")))
            .collect()
    }

    /// Ladder temperatures in K; empty when no ladder is requested.
    pub fn ladder(&self) -> Result<Vec<f64>> {
        if self.get("ladder").is_empty() {
            return Ok(Vec::new());
        }
        list_with_unit(self.get("ladder"), "ladder")?
            .into_iter()
            .map(|(v, unit)| parse_temperature(&format!("{v} {unit}")))
            .collect()
    }

    /// Rotor barrier in J: `kT` (at the configured temperature), `K` (`V/k_B`) or `J`.
    pub fn barrier(&self) -> Result<f64> {
        let (v, unit) = split_quantity(self.get("barrier"))?;
        match unit {
            "kT" => Ok(v * BOLTZMANN * self.thermal()?.temperature()),
            "K" => Ok(v * BOLTZMANN),
            "J" => Ok(v),
            other => Err(Error::UnknownUnit {
                quantity: "energy",
                unit: other.into(),
            }),
        }
    }

    fn usize_of(&self, key: &'static str) -> Result<usize> {
        self.get(key)
            .parse()
            .map_err(|_| invalid(key, format!("expected an integer, got `{}`", self.get(key))))
    }

    fn f64_of(&self, key: &'static str) -> Result<f64> {
        self.get(key)
            .parse()
            .map_err(|_| invalid(key, format!("expected a number, got `{}`", self.get(key))))
    }

    fn ppm_of(&self, key: &'static str) -> Result<f64> {
        let (v, unit) = split_quantity(self.get(key))?;
        if unit != "ppm" {
            return Err(Error::UnknownUnit {
                quantity: "chemical shift",
                unit: unit.to_string(),
            });
        }
        Ok(v)
    }

    fn seed(&self) -> Result<u64> {
        self.get("seed")
            .parse()
            .map_err(|_| invalid("seed", format!("expected an integer, got `{}`", self.get("seed"))))
    }

    pub fn mc(&self) -> Result<McConfig> {
        Ok(McConfig {
            samples: self.usize_of("samples")?,
            strata: self.usize_of("strata")?,
            seed: self.seed()?,
        })
    }

    pub fn workers(&self) -> Result<usize> {
        let w = self.usize_of("workers")?;
        if w == 0 {
            return Err(invalid("workers", "need at least one worker"));
        }
        Ok(w)
    }

    pub fn fid_spec(&self, delta_uv: f64) -> Result<FidSpec> {
        let mut spec = FidSpec::hydrogen(self.coupling(delta_uv)?, self.thermal()?, self.field()?);
        spec.dissipation_ratio = self.f64_of("dissipation_ratio")?;
        Ok(spec)
    }

    fn frame(&self) -> Result<Frame> {
        match self.get("frame") {
            "rotating" => Ok(Frame::Rotating),
            "lab" | "laboratory" => Ok(Frame::Laboratory),
            other => Err(invalid("frame", format!("unknown frame `{other}`"))),
        }
    }

    fn expansion(&self) -> Result<Expansion> {
        match self.get("expansion") {
            "resummed" => Ok(Expansion::Resummed),
            "bare" => Ok(Expansion::Bare),
            other => Err(invalid("expansion", format!("unknown expansion `{other}`"))),
        }
    }

    fn line_mode(&self) -> Result<LineMode> {
        match self.get("line_mode") {
            "magnitude" => Ok(LineMode::Magnitude),
            "absorption" => Ok(LineMode::Absorption),
            other => Err(invalid("line_mode", format!("unknown line mode `{other}`"))),
        }
    }

    pub fn forward_model(&self) -> Result<ForwardModel> {
        ForwardModel::ring_current(
            self.usize_of("grid")?,
            self.ppm_of("shift_amplitude")?,
            self.ppm_of("width")?,
            self.f64_of("width_modulation")?,
            self.usize_of("sites")?,
            PROTON_GYROMAGNETIC * self.field()?,
        )
    }

    /// Gibbs initial guess from `energy = cosine <fold>` (with `barrier`) or
    /// `energy = table <file>` (theta in rad, energy in J).
    pub fn initial_density(&self, n: usize) -> Result<NuclearDensity> {
        let thermal = self.thermal()?;
        let spec = self.get("energy");
        let mut parts = spec.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("cosine"), Some(fold)) => {
                let fold: u32 = fold.parse().map_err(|_| invalid("energy", "fold must be an integer"))?;
                gibbs_density(cosine_rotor(self.barrier()?, fold), &thermal, n)
            }
            (Some("table"), Some(path)) => potential_table(&std::fs::read_to_string(path)?)?.gibbs(&thermal, n),
            _ => Err(invalid("energy", format!("unknown energy curve `{spec}`"))),
        }
    }
}

fn list_with_unit<'a>(raw: &'a str, key: &'static str) -> Result<Vec<(&'a str, &'a str)>> {
    let (nums, unit) = raw
        .trim()
        .rsplit_once(char::is_whitespace)
        .ok_or_else(|| invalid(key, "expected numbers followed by a unit"))?;
    let unit = unit.trim();
    let items: Vec<(&str, &str)> = nums
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| (s, unit))
        .collect();
    if items.is_empty() {
        return Err(invalid(key, "empty list"));
    }
    Ok(items)
}

/// Two columns `theta energy`, comma or whitespace separated.
fn potential_table(text: &str) -> Result<PotentialTable> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e: std::num::ParseFloatError| Error::Parse {
                line: i + 1,
                reason: e.to_string(),
            })?;
        if v.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                reason: "expected theta and energy".into(),
            });
        }
        rows.push((v[0], v[1]));
    }
    PotentialTable::new(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Shielding,
    Dynamics,
    Spectrum,
    Sweep,
    Reconstruct,
    Baseline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Shielding => "shielding",
            Command::Dynamics => "dynamics",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Reconstruct => "reconstruct",
            Command::Baseline => "baseline",
        }
    }
}

/// Files written by a command and the number of failed computations.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub summary: Value,
    pub failures: usize,
}

/// Directory from `--out`, else `MQED_NMR_OUTPUT_DIR`, else the working directory.
pub fn output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs `command` with `cfg` on a pool of `workers` threads, writing into `out`.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers()?)
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    std::fs::create_dir_all(out)?;
    pool.install(|| Runner::new(command, cfg, out).run())
}

struct Runner<'a> {
    command: Command,
    cfg: &'a RunConfig,
    out: &'a Path,
    meta: BTreeMap<String, String>,
    files: Vec<PathBuf>,
    failures: usize,
}

impl<'a> Runner<'a> {
    fn new(command: Command, cfg: &'a RunConfig, out: &'a Path) -> Self {
        let mut meta = cfg.entries().clone();
        meta.insert("command".into(), command.name().into());
        meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        Self {
            command,
            cfg,
            out,
            meta,
            files: Vec::new(),
            failures: 0,
        }
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        std::fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn run(mut self) -> Result<RunReport> {
        let mut summary = match self.command {
            Command::Shielding => self.shielding()?,
            Command::Dynamics => self.dynamics(true)?,
            Command::Spectrum => self.dynamics(false)?,
            Command::Sweep => self.sweep()?,
            Command::Reconstruct => self.reconstruct()?,
            Command::Baseline => self.baseline()?,
        };
        summary["command"] = json!(self.command.name());
        summary["config"] = json!(self.meta);
        summary["failures"] = json!(self.failures);
        let name = format!("{}_summary.json", self.command.name());
        self.write(&name, &io::to_json(&summary)?)?;
        Ok(RunReport {
            files: self.files,
            summary,
            failures: self.failures,
        })
    }

    fn shielding_at(&self, delta_uv: f64) -> Result<ShieldingResult> {
        let phi = self.cfg.coupling(delta_uv)?;
        let thermal = self.cfg.thermal()?;
        match self.cfg.get("method") {
            "reduced" => shielding_reduced(&phi, &thermal, &Default::default(), &QuadConfig::default()),
            "mc" | "full" => shielding_full(&phi, &MolecularState::hydrogen(thermal), &self.cfg.mc()?),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }

    fn line_at(&self, delta_uv: f64) -> Result<(Spectrum, LorentzFit)> {
        let spec = self.cfg.fid_spec(delta_uv)?;
        let signal = fid_signal(&spec, &spec.auto_grid()?, Frame::Rotating, self.cfg.expansion()?)?;
        let spectrum = transform(&signal)?;
        let fit = fit_lorentz(&spectrum, self.cfg.line_mode()?)?;
        Ok((spectrum, fit))
    }

    fn shielding(&mut self) -> Result<Value> {
        let r = self.shielding_at(parse_wavenumber(self.cfg.get("delta_uv"))?)?;
        Ok(json!({ "result": r, "ppm": r.ppm() }))
    }

    /// FID (when `with_signal`), spectrum and Lorentz fit at `delta_uv`.
    fn dynamics(&mut self, with_signal: bool) -> Result<Value> {
        let spec = self.cfg.fid_spec(parse_wavenumber(self.cfg.get("delta_uv"))?)?;
        let grid = spec.auto_grid()?;
        if with_signal {
            let signal = fid_signal(&spec, &grid, self.cfg.frame()?, self.cfg.expansion()?)?;
            self.write("signal.csv", &io::signal_csv(&signal, &self.meta))?;
        }
        let rotating = fid_signal(&spec, &grid, Frame::Rotating, self.cfg.expansion()?)?;
        let spectrum = transform(&rotating)?;
        self.write("spectrum.csv", &io::spectrum_csv(&spectrum, &self.meta))?;
        let (offset, rate) = spec.line_parameters()?;
        let predicted = json!({
            "center_ppm": spectrum.offset_to_ppm(-offset),
            "t2_s": 1.0 / rate,
            "fwhm_Hz": rate / std::f64::consts::PI,
        });
        Ok(match fit_lorentz(&spectrum, self.cfg.line_mode()?) {
            Ok(fit) => json!({ "fit": fit_json(&fit), "predicted": predicted }),
            Err(e) => {
                self.failures += 1;
                log::error!("line fit failed: {e}");
                json!({ "fit_error": e.to_string(), "predicted": predicted })
            }
        })
    }

    fn sweep(&mut self) -> Result<Value> {
        let list = self.cfg.delta_uv_list()?;
        let mut rows = String::from("delta_uv_m^-1,a_ppm,a_error_ppm,center_ppm,fwhm_Hz,height,rms_residual,status\n");
        let (mut xs, mut shifts, mut centers, mut widths, mut heights) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &d in &list {
            let point = self
                .shielding_at(d)
                .and_then(|a| self.line_at(d).map(|(_, fit)| (a, fit)));
            match point {
                Ok((a, fit)) => {
                    let _ = writeln!(
                        rows,
                        "{d:?},{:?},{:?},{:?},{:?},{:?},{:?},ok",
                        a.ppm(),
                        a.error_estimate * 1e6,
                        fit.center_ppm,
                        fit.fwhm_hz,
                        fit.height,
                        fit.rms_residual
                    );
                    xs.push(d);
                    shifts.push(a.ppm());
                    centers.push(fit.center_ppm);
                    widths.push(fit.fwhm_hz);
                    heights.push(fit.height);
                }
                Err(e) => {
                    self.failures += 1;
                    log::error!("delta_uv = {d} m^-1 failed: {e}");
                    let _ = writeln!(rows, "{d:?},,,,,,,failed: {}", e.to_string().replace(',', ";"));
                }
            }
        }
        let text = io::header(&self.meta) + &rows;
        self.write("sweep.csv", &text)?;
        let regression = |y: &[f64]| {
            if y.len() < 2 {
                return json!(null);
            }
            let (slope, intercept) = linear_fit(&xs, y);
            json!({ "slope_per_m^-1": slope, "intercept": intercept, "r_squared": r_squared(&xs, y) })
        };
        let spread = if heights.is_empty() {
            f64::NAN
        } else {
            let max = heights.iter().cloned().fold(f64::MIN, f64::max);
            let min = heights.iter().cloned().fold(f64::MAX, f64::min);
            (max - min) / max
        };
        Ok(json!({
            "points": list.len(),
            "shielding_ppm": regression(&shifts),
            "center_ppm": regression(&centers),
            "fwhm_Hz": regression(&widths),
            "height_relative_spread": spread,
        }))
    }

    fn reconstruct(&mut self) -> Result<Value> {
        let basis = SpectralBasis::new(self.cfg.forward_model()?)?;
        let temps = self.cfg.ladder()?;
        if !temps.is_empty() {
            return self.ladder(&basis, &temps);
        }
        let target = match self.cfg.get("target") {
            "" => return Err(invalid("target", "reconstruct needs `target = <file>` or a `ladder`")),
            BUILTIN_ROUND_TRIP => io::read_target(ROUND_TRIP_TARGET)?,
            path => io::read_target(&std::fs::read_to_string(path)?)?,
        };
        let initial = self.cfg.initial_density(basis.grid_size())?;
        let opts = ReconstructionOptions {
            orders: self.cfg.usize_of("orders")?,
            regularization: self.cfg.f64_of("regularization")?,
            optimizer: NelderMeadOptions {
                seed: self.cfg.seed()?,
                ..Default::default()
            },
            ..Default::default()
        };
        let rec = reconstruct(&target, &basis, &initial, &opts)?;
        let table = io::header(&self.meta) + &rec.density.to_table();
        self.write("density.txt", &table)?;
        let fitted = TargetSpectrum::from_spectrum(&basis.forward(&rec.density)?);
        self.write("fitted_spectrum.csv", &io::target_csv(&fitted, &self.meta))?;
        let reference = match self.cfg.get("reference") {
            "" => None,
            BUILTIN_ROUND_TRIP => Some(NuclearDensity::from_table(ROUND_TRIP_TRUTH)?),
            path => Some(NuclearDensity::from_table(&std::fs::read_to_string(path)?)?),
        };
        let tv = |d: &NuclearDensity| reference.as_ref().map(|r| d.total_variation(r)).transpose();
        let agreement = self.cfg.f64_of("agreement")?;
        if rec.misfit > agreement {
            log::warn!("relative misfit {:.3e} exceeds the agreement threshold {agreement}", rec.misfit);
        }
        Ok(json!({
            "misfit": rec.misfit,
            "agreement_threshold": agreement,
            "agrees": rec.misfit <= agreement,
            "energy_interpolated": initial.is_interpolated(),
            "objective": rec.objective,
            "evaluations": rec.evaluations,
            "coefficients": rec.coefficients,
            "tv_to_reference": tv(&rec.density)?,
            "initial_tv_to_reference": tv(&initial)?,
        }))
    }

    fn ladder(&mut self, basis: &SpectralBasis, temps: &[f64]) -> Result<Value> {
        let energy = match self.cfg.get("energy").split_whitespace().collect::<Vec<_>>()[..] {
            ["cosine", fold] => {
                let fold: u32 = fold.parse().map_err(|_| invalid("energy", "fold must be an integer"))?;
                let rotor = cosine_rotor(self.cfg.barrier()?, fold);
                Box::new(rotor) as Box<dyn Fn(f64) -> f64>
            }
            ["table", path] => {
                let table = potential_table(&std::fs::read_to_string(path)?)?;
                Box::new(move |t| table.energy(t))
            }
            _ => return Err(invalid("energy", "unknown energy curve")),
        };
        let steps = temperature_ladder(energy, temps, basis)?;
        let mut rows = String::from("temperature_K,peaks,separation_ppm,peak_ppm\n");
        for s in &steps {
            let peaks: Vec<String> = s.peaks_ppm.iter().map(|p| format!("{p:?}")).collect();
            let _ = writeln!(
                rows,
                "{:?},{},{:?},{}",
                s.temperature,
                s.peaks_ppm.len(),
                s.separation_ppm,
                peaks.join(" ")
            );
        }
        self.write("ladder.csv", &(io::header(&self.meta) + &rows))?;
        let separations: Vec<f64> = steps.iter().map(|s| s.separation_ppm).collect();
        Ok(json!({
            "temperatures_K": temps,
            "energy_interpolated": self.cfg.get("energy").starts_with("table"),
            "separations_ppm": separations,
            "peak_counts": steps.iter().map(|s| s.peaks_ppm.len()).collect::<Vec<_>>(),
        }))
    }

    /// Effective-relaxation line next to the field-theoretic one at `delta_uv`.
    fn baseline(&mut self) -> Result<Value> {
        let shift = self.cfg.ppm_of("shift")?;
        let t2 = parse_time(self.cfg.get("t2"))?;
        let larmor = PROTON_GYROMAGNETIC * self.cfg.field()?;
        let grid = TimeGrid::new(0.0, parse_time(self.cfg.get("dt"))?, self.cfg.usize_of("n_samples")?)?;
        let signal = effective_relax_signal(shift, t2, larmor, &grid)?;
        self.write("baseline_signal.csv", &io::signal_csv(&signal, &self.meta))?;
        let spectrum = transform(&signal)?;
        self.write("baseline_spectrum.csv", &io::spectrum_csv(&spectrum, &self.meta))?;
        let mode = self.cfg.line_mode()?;
        let effective = match fit_lorentz(&spectrum, mode) {
            Ok(f) => fit_json(&f),
            Err(e) => {
                self.failures += 1;
                json!({ "error": e.to_string() })
            }
        };
        let delta_uv = parse_wavenumber(self.cfg.get("delta_uv"))?;
        let field_theory = match self.line_at(delta_uv) {
            Ok((_, f)) => fit_json(&f),
            Err(e) => {
                self.failures += 1;
                json!({ "error": e.to_string() })
            }
        };
        Ok(json!({
            "effective": effective,
            "field_theory": field_theory,
            "delta_uv_mm^-1": wavenumber_from_si(delta_uv, "mm^-1")?,
        }))
    }
}

fn fit_json(fit: &LorentzFit) -> Value {
    json!({
        "center_ppm": fit.center_ppm, "fwhm_Hz": fit.fwhm_hz, "height": fit.height,
        "amplitude": fit.amplitude, "rms_residual": fit.rms_residual, "points": fit.points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_units_are_mandatory() {
        let mut c = RunConfig::defaults();
        c.parse_into("[physics]\ndelta_uv = 4 mm^-1\nB = 20 T\n").unwrap();
        assert_eq!(parse_wavenumber(c.get("delta_uv")).unwrap(), 4e3);
        c.set("B", "20").unwrap();
        assert!(c.field().is_err());
        assert!(c.validate().is_err());
        let err = c.parse_into("nonsense = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn output_headers_replay() {
        let mut c = RunConfig::defaults();
        c.parse_into("# command = spectrum\n# delta_uv = 7 mm^-1\n# spectrum.model = x\nnu_Hz,ppm\n1,2\n")
            .unwrap();
        assert_eq!(c.get("delta_uv"), "7 mm^-1");
    }

    #[test]
    fn delta_list() {
        let mut c = RunConfig::defaults();
        c.set("delta_uv_list", "0.04, 0.05 Mm^-1").unwrap();
        let l = c.delta_uv_list().unwrap();
        assert!((l[0] - 0.04e-6).abs() < 1e-22 && l.len() == 2);
    }

    #[test]
    fn presets_validate() {
        for (name, _) in PRESETS {
            let mut c = RunConfig::defaults();
            c.apply_preset(name).unwrap();
            c.validate().unwrap();
        }
        assert!(RunConfig::defaults().apply_preset("nope").is_err());
    }
}
