//! Physical constants (CODATA 2018, SI), unit parsing, thermal parameters and
//! the radial coupling function of the field.

use crate::error::{invalid, require_positive, Error, Result};
use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const PLANCK: f64 = 2.0 * PI * HBAR;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_062_12e-6;
pub const VACUUM_PERMITTIVITY: f64 = 1.0 / (VACUUM_PERMEABILITY * SPEED_OF_LIGHT * SPEED_OF_LIGHT);
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ELECTRON_G: f64 = 2.002_319_304_362_56;
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
pub const PROTON_GYROMAGNETIC: f64 = 2.675_221_874_4e8;
pub const ELECTRON_VOLT: f64 = 1.602_176_634e-19;
pub const ANGSTROM: f64 = 1e-10;

/// Length scale that makes the coupling amplitude `g` dimensionless.
///
/// The normalisation `g = 1/(k_uv - k_ir)` carries a length; dividing by one
/// Ångström is what lets the shielding prefactor be quoted in Å² while the
/// shielding coefficient itself stays a pure number.
pub const COUPLING_LENGTH: f64 = ANGSTROM;

/// Value of the shielding prefactor as it appears in the literature, in Å².
/// It equals `pi * shielding_prefactor()` (see `shielding_prefactor`).
pub const PRINTED_SHIELDING_PREFACTOR_A2: f64 = 7.271_326_950_237_399e-8;

/// `g_s^2 mu_B^2 mu_0 / (6 pi^2 hbar c)` in m², built from the constants above.
pub fn shielding_prefactor() -> f64 {
    ELECTRON_G * ELECTRON_G * BOHR_MAGNETON * BOHR_MAGNETON * VACUUM_PERMEABILITY
        / (6.0 * PI * PI * HBAR * SPEED_OF_LIGHT)
}

/// Shielding prefactor divided by `COUPLING_LENGTH^2` (the number quoted in Å²).
pub fn shielding_prefactor_dimensionless() -> f64 {
    shielding_prefactor() / (COUPLING_LENGTH * COUPLING_LENGTH)
}

/// Angular wavenumber units accepted on input. `Mm^-1` is per megametre.
pub fn wavenumber_scale(unit: &str) -> Result<f64> {
    let s = match unit.trim() {
        "m^-1" | "1/m" => 1.0,
        "km^-1" | "1/km" => 1e-3,
        "Mm^-1" | "1/Mm" => 1e-6,
        "cm^-1" | "1/cm" => 1e2,
        "mm^-1" | "1/mm" => 1e3,
        "um^-1" | "1/um" => 1e6,
        "nm^-1" | "1/nm" => 1e9,
        "A^-1" | "1/A" => 1e10,
        other => {
            return Err(Error::UnknownUnit {
                quantity: "wavenumber",
                unit: other.to_string(),
            })
        }
    };
    Ok(s)
}

/// Converts a wavenumber given in `unit` to m⁻¹.
pub fn wavenumber_to_si(value: f64, unit: &str) -> Result<f64> {
    Ok(value * wavenumber_scale(unit)?)
}

pub fn wavenumber_from_si(value: f64, unit: &str) -> Result<f64> {
    Ok(value / wavenumber_scale(unit)?)
}

/// Photon energy `hbar c k` of a mode with angular wavenumber `k` (m⁻¹), in J.
pub fn wavenumber_to_energy(k: f64) -> f64 {
    HBAR * SPEED_OF_LIGHT * k
}

/// Energy `h c k` for a spectroscopic wavenumber `k` (cycles per metre), in J.
pub fn spectroscopic_wavenumber_to_energy(k: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT * k
}

pub fn joule_to_ev(e: f64) -> f64 {
    e / ELECTRON_VOLT
}

/// Parses `"<number> <unit>"` and returns (value, unit).
pub fn split_quantity(text: &str) -> Result<(f64, &str)> {
    let text = text.trim();
    let (num, unit) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim()),
        None => (text, ""),
    };
    let value: f64 = num
        .parse()
        .map_err(|_| invalid("quantity", format!("cannot parse number in `{text}`")))?;
    Ok((value, unit))
}

pub fn parse_wavenumber(text: &str) -> Result<f64> {
    let (v, unit) = split_quantity(text)?;
    wavenumber_to_si(v, unit)
}

pub fn parse_temperature(text: &str) -> Result<f64> {
    let (v, unit) = split_quantity(text)?;
    match unit {
        "K" => Ok(v),
        "mK" => Ok(v * 1e-3),
        other => Err(Error::UnknownUnit {
            quantity: "temperature",
            unit: other.to_string(),
        }),
    }
}

pub fn parse_field(text: &str) -> Result<f64> {
    let (v, unit) = split_quantity(text)?;
    match unit {
        "T" => Ok(v),
        "mT" => Ok(v * 1e-3),
        "G" => Ok(v * 1e-4),
        other => Err(Error::UnknownUnit {
            quantity: "magnetic field",
            unit: other.to_string(),
        }),
    }
}

pub fn parse_time(text: &str) -> Result<f64> {
    let (v, unit) = split_quantity(text)?;
    let s = match unit {
        "s" => 1.0,
        "ms" => 1e-3,
        "us" => 1e-6,
        "ns" => 1e-9,
        "ps" => 1e-12,
        other => {
            return Err(Error::UnknownUnit {
                quantity: "time",
                unit: other.to_string(),
            })
        }
    };
    Ok(v * s)
}

/// Formats a quantity so that the matching `parse_*` function reads it back exactly.
pub fn format_quantity(value: f64, unit: &str) -> String {
    format!("{value:?} {unit}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams {
    temperature: f64,
    beta: f64,
}

impl ThermalParams {
    pub fn new(temperature: f64) -> Result<Self> {
        require_positive("temperature", temperature)?;
        Ok(Self {
            temperature,
            beta: 1.0 / (BOLTZMANN * temperature),
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Inverse temperature in J⁻¹.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Height `hbar beta` (seconds) of the imaginary-time strip.
    pub fn strip_height(&self) -> f64 {
        HBAR * self.beta
    }

    /// `beta hbar c k` for a mode of wavenumber `k`.
    pub fn reduced_energy(&self, k: f64) -> f64 {
        self.beta * HBAR * SPEED_OF_LIGHT * k
    }
}

/// Bose-Einstein occupation of the mode with wavenumber `k` (m⁻¹).
pub fn planck_occupation(k: f64, thermal: &ThermalParams) -> Result<f64> {
    require_positive("k", k)?;
    Ok(1.0 / thermal.reduced_energy(k).exp_m1())
}

/// One rectangle of a piecewise-constant coupling function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    /// Height in metres.
    pub height: f64,
}

/// Radial, piecewise-constant coupling function of the field modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFunction {
    bands: Vec<Band>,
}

impl CouplingFunction {
    /// Unit-area rectangle on `[delta_ir, delta_uv]` (m⁻¹).
    pub fn rectangular(delta_ir: f64, delta_uv: f64) -> Result<Self> {
        if !(delta_ir.is_finite() && delta_uv.is_finite()) || delta_ir < 0.0 {
            return Err(invalid("delta_ir", format!("need 0 <= delta_ir, got {delta_ir}")));
        }
        if delta_uv <= delta_ir {
            return Err(invalid(
                "delta_uv",
                format!("need delta_ir < delta_uv, got [{delta_ir}, {delta_uv}]"),
            ));
        }
        Ok(Self {
            bands: vec![Band {
                lo: delta_ir,
                hi: delta_uv,
                height: 1.0 / (delta_uv - delta_ir),
            }],
        })
    }

    /// Sum of rectangles. Bands must be disjoint with non-negative edges.
    pub fn from_bands(mut bands: Vec<Band>) -> Result<Self> {
        bands.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for b in &bands {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.height.is_finite())
                || b.lo < 0.0
                || b.hi <= b.lo
            {
                return Err(invalid("band", format!("malformed band {b:?}")));
            }
        }
        for w in bands.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(invalid("band", "bands overlap"));
            }
        }
        Ok(Self { bands })
    }

    pub fn empty() -> Self {
        Self { bands: Vec::new() }
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn delta_ir(&self) -> f64 {
        self.bands.first().map_or(0.0, |b| b.lo)
    }

    pub fn delta_uv(&self) -> f64 {
        self.bands.last().map_or(0.0, |b| b.hi)
    }

    /// Height of the first band in metres.
    pub fn g(&self) -> f64 {
        self.bands.first().map_or(0.0, |b| b.height)
    }

    /// Coupling value in metres; zero outside the support.
    pub fn value(&self, k: f64) -> f64 {
        self.bands
            .iter()
            .find(|b| k >= b.lo && k <= b.hi)
            .map_or(0.0, |b| b.height)
    }

    /// Dimensionless amplitude `value(k) / COUPLING_LENGTH` used in the mode functions.
    pub fn amplitude(&self, k: f64) -> f64 {
        self.value(k) / COUPLING_LENGTH
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        require_positive("scale", factor)?;
        Self::from_bands(
            self.bands
                .iter()
                .map(|b| Band {
                    lo: b.lo * factor,
                    hi: b.hi * factor,
                    height: b.height / factor,
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefactor_relation_to_printed_value() {
        let derived = shielding_prefactor_dimensionless();
        assert!((derived * PI / PRINTED_SHIELDING_PREFACTOR_A2 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wavenumber_round_trip() {
        for unit in ["m^-1", "mm^-1", "Mm^-1", "cm^-1", "A^-1"] {
            let v = 7.25;
            let si = wavenumber_to_si(v, unit).unwrap();
            assert!((wavenumber_from_si(si, unit).unwrap() - v).abs() < 1e-14);
        }
        assert!(wavenumber_to_si(1.0, "furlong^-1").is_err());
    }

    #[test]
    fn one_per_millimetre_energy() {
        let spectroscopic = joule_to_ev(spectroscopic_wavenumber_to_energy(1e3));
        assert!((spectroscopic - 0.00124).abs() < 1e-6);
        let angular = joule_to_ev(wavenumber_to_energy(1e3));
        assert!((angular * 2.0 * PI - spectroscopic).abs() < 1e-15);
    }

    #[test]
    fn occupation_at_room_temperature() {
        let t = ThermalParams::new(293.0).unwrap();
        let n = planck_occupation(1e3, &t).unwrap();
        assert!((n - 127.46).abs() < 0.05, "{n}");
        assert!(planck_occupation(0.0, &t).is_err());
    }

    #[test]
    fn coupling_normalisation() {
        let phi = CouplingFunction::rectangular(0.0, 4e3).unwrap();
        assert!((phi.g() * (phi.delta_uv() - phi.delta_ir()) - 1.0).abs() <= f64::EPSILON);
        assert_eq!(phi.value(5e3), 0.0);
        assert!(CouplingFunction::rectangular(4.0, 4.0).is_err());
        assert!(ThermalParams::new(0.0).is_err());
    }

    #[test]
    fn quantity_parsing() {
        assert_eq!(parse_wavenumber("4 mm^-1").unwrap(), 4e3);
        assert_eq!(parse_field("20 T").unwrap(), 20.0);
        assert_eq!(parse_temperature("293 K").unwrap(), 293.0);
        assert!(parse_field("20").is_err());
        let s = format_quantity(0.1 + 0.2, "K");
        assert_eq!(parse_temperature(&s).unwrap(), 0.1 + 0.2);
    }
}
