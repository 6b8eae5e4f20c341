//! Text formats: signal and spectrum CSV files with `#` metadata headers,
//! target spectra and JSON run summaries.

use crate::dynamics::SignalSeries;
use crate::error::{Error, Result};
use crate::reconstruction::TargetSpectrum;
use crate::spectrum::Spectrum;
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub(crate) fn header(meta: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

/// `t,Re,Im` of the stored samples; the frame frequency is in the header.
pub fn signal_csv(signal: &SignalSeries, meta: &BTreeMap<String, String>) -> String {
    let mut m = meta.clone();
    m.insert("frame_frequency_rad_s".into(), format!("{:?}", signal.frame_frequency));
    m.insert("larmor_rad_s".into(), format!("{:?}", signal.larmor));
    for (k, v) in &signal.metadata {
        m.insert(format!("signal.{k}"), v.clone());
    }
    let mut s = header(&m);
    s.push_str("t,Re,Im\n");
    for (i, v) in signal.values.iter().enumerate() {
        let _ = writeln!(s, "{:?},{:?},{:?}", signal.time(i), v.re, v.im);
    }
    s
}

pub fn spectrum_csv(spec: &Spectrum, meta: &BTreeMap<String, String>) -> String {
    let mut m = meta.clone();
    m.insert("reference_rad_s".into(), format!("{:?}", spec.reference));
    m.insert("larmor_rad_s".into(), format!("{:?}", spec.larmor));
    for (k, v) in &spec.metadata {
        m.insert(format!("spectrum.{k}"), v.clone());
    }
    let mut s = header(&m);
    s.push_str("nu_Hz,ppm,Re,Im,Abs\n");
    for i in 0..spec.len() {
        let v = spec.values[i];
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{:?},{:?}",
            spec.frequency_hz(i),
            spec.ppm(i),
            v.re,
            v.im,
            v.norm()
        );
    }
    s
}

/// Reads a target spectrum: either a spectrum CSV (columns `ppm` and `Re`)
/// or two columns `ppm, intensity` separated by commas or whitespace.
pub fn read_target(text: &str) -> Result<TargetSpectrum> {
    let mut ppm = Vec::new();
    let mut intensity = Vec::new();
    let mut columns: Option<(usize, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if line.contains(',') {
            line.split(',').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        if fields.iter().any(|f| f.parse::<f64>().is_err()) {
            if columns.is_none() && ppm.is_empty() {
                let find = |name: &str| fields.iter().position(|f| *f == name);
                columns = match (find("ppm"), find("Re").or_else(|| find("intensity"))) {
                    (Some(p), Some(r)) => Some((p, r)),
                    _ => {
                        return Err(Error::Parse {
                            line: i + 1,
                            reason: format!("unrecognised header `{line}`"),
                        })
                    }
                };
                continue;
            }
            return Err(Error::Parse {
                line: i + 1,
                reason: format!("non-numeric field in `{line}`"),
            });
        }
        let (pc, ic) = columns.unwrap_or((0, 1));
        if fields.len() <= pc.max(ic) {
            return Err(Error::Parse {
                line: i + 1,
                reason: format!("expected at least {} columns", pc.max(ic) + 1),
            });
        }
        ppm.push(fields[pc].parse::<f64>().expect("checked"));
        intensity.push(fields[ic].parse::<f64>().expect("checked"));
    }
    if ppm.len() < 4 {
        return Err(Error::Parse {
            line: text.lines().count(),
            reason: "fewer than four data rows".into(),
        });
    }
    // Ascending ppm order.
    let mut idx: Vec<usize> = (0..ppm.len()).collect();
    idx.sort_by(|a, b| ppm[*a].total_cmp(&ppm[*b]));
    Ok(TargetSpectrum {
        ppm: idx.iter().map(|&i| ppm[i]).collect(),
        intensity: idx.iter().map(|&i| intensity[i]).collect(),
    })
}

/// Two-column `ppm,intensity` target file.
pub fn target_csv(target: &TargetSpectrum, meta: &BTreeMap<String, String>) -> String {
    let mut s = header(meta);
    s.push_str("ppm,intensity\n");
    for (p, v) in target.ppm.iter().zip(&target.intensity) {
        let _ = writeln!(s, "{p:?},{v:?}");
    }
    s
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))
}
