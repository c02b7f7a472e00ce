use std::fmt;
use std::str::FromStr;

use peaksharp::{estimate_min_hwhm, max_safe_weight, suggest_weight, DataMatrix};

use crate::error::{CliError, Result};

/// Default fraction of the safe weight used by `auto`.
pub const DEFAULT_AUTO_FRACTION: f64 = 0.7;

/// Peaks lower than this fraction of a row's maximum are ignored when
/// estimating the narrowest width.
pub const WIDTH_PROMINENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMode {
    Off,
    Fixed(f64),
    /// Fraction of the safe weight for the narrowest detected peak.
    Auto(f64),
}

impl Default for WeightMode {
    fn default() -> Self {
        WeightMode::Auto(DEFAULT_AUTO_FRACTION)
    }
}

impl FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("off") {
            return Ok(WeightMode::Off);
        }
        if let Some(rest) = s.strip_prefix("auto") {
            let fraction = match rest.strip_prefix(':') {
                Some(f) => f.parse::<f64>().map_err(|e| format!("bad auto fraction `{f}`: {e}"))?,
                None if rest.is_empty() => DEFAULT_AUTO_FRACTION,
                None => return Err(format!("expected auto or auto:<fraction>, got `{s}`")),
            };
            if !(fraction > 0.0 && fraction.is_finite()) {
                return Err(format!("auto fraction must be positive, got {fraction}"));
            }
            return Ok(WeightMode::Auto(fraction));
        }
        let k: f64 = s.parse().map_err(|_| format!("expected <real>, auto[:fraction] or off, got `{s}`"))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(format!("sharpening weight must be positive, got {k}"));
        }
        Ok(WeightMode::Fixed(k))
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightMode::Off => write!(f, "off"),
            WeightMode::Fixed(k) => write!(f, "{k}"),
            WeightMode::Auto(frac) => write!(f, "auto:{frac}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedWeight {
    pub mode: WeightMode,
    /// `None` when sharpening is off.
    pub k: Option<f64>,
    /// Narrowest half width found, in axis units.
    pub estimated_w: Option<f64>,
    pub max_safe: Option<f64>,
    pub warning: Option<String>,
}

/// Half width of the narrowest prominent peak over all rows.
pub fn estimate_width(x: &DataMatrix) -> std::result::Result<f64, peaksharp::Error> {
    let mut best: Option<f64> = None;
    let mut first_err = None;
    for s in x.to_spectra() {
        match estimate_min_hwhm(&s, WIDTH_PROMINENCE) {
            Ok(p) => best = Some(best.map_or(p.hwhm_axis, |b| b.min(p.hwhm_axis))),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one row"))
}

pub fn resolve(mode: WeightMode, x: &DataMatrix) -> Result<ResolvedWeight> {
    let (k, w) = match mode {
        WeightMode::Off => return Ok(ResolvedWeight { mode, k: None, estimated_w: None, max_safe: None, warning: None }),
        WeightMode::Fixed(k) => {
            if !(k > 0.0 && k.is_finite()) {
                return Err(CliError::Config(format!("sharpening weight must be positive, got {k}")));
            }
            (k, estimate_width(x).ok())
        }
        WeightMode::Auto(frac) => {
            let w = estimate_width(x)?;
            (suggest_weight(w, frac)?, Some(w))
        }
    };
    let max_safe = w.map(max_safe_weight).transpose()?;
    let warning = max_safe.filter(|&safe| k > safe).map(|safe| {
        format!("weight {k} exceeds the nonnegativity bound {safe} for the narrowest peak; negative lobes are clamped")
    });
    Ok(ResolvedWeight { mode, k: Some(k), estimated_w: w, max_safe, warning })
}
