//! Scenario files (TOML).
//!
//! ```toml
//! condition = "dps"          # or "sap"
//! epsilon_level = 0.1        # 0 for sap
//! snr_db = 40.0              # optional; omit for noiseless mixtures
//! seed = 7
//! mixing = [[0.6, 0.8], [0.8, 0.6]]
//!
//! [grid]
//! p = 1200
//! dx = 1.0
//! origin = 0.0
//!
//! [[sources]]
//! dominant_window = [792, 808]
//! peaks = [{ center = 150.0, hwhm = 10.0, height = 1.0 }]
//! ```

use std::fs;
use std::path::Path;

use peaksharp::synth::{Condition, Grid, ScenarioConfig, SourceSpec};
use peaksharp::{DenseMatrix, LorentzPeak};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    condition: RawCondition,
    #[serde(default)]
    epsilon_level: f64,
    snr_db: Option<f64>,
    #[serde(default)]
    seed: u64,
    mixing: Vec<Vec<f64>>,
    grid: RawGrid,
    sources: Vec<RawSource>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawCondition {
    Sap,
    Dps,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    p: usize,
    dx: f64,
    #[serde(default)]
    origin: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    peaks: Vec<RawPeak>,
    dominant_window: Option<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPeak {
    center: f64,
    hwhm: f64,
    height: f64,
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<ScenarioConfig> {
    let bad = |message: String| CliError::Scenario { path: path.to_path_buf(), message };
    let raw: RawScenario = toml::from_str(text).map_err(|e| bad(e.to_string().trim_end().to_string()))?;

    let grid = Grid::new(raw.grid.p, raw.grid.dx, raw.grid.origin).map_err(|e| bad(format!("grid: {e}")))?;
    let mut sources = Vec::with_capacity(raw.sources.len());
    for (i, src) in raw.sources.iter().enumerate() {
        let peaks = src
            .peaks
            .iter()
            .enumerate()
            .map(|(j, pk)| {
                LorentzPeak::new(pk.center, pk.hwhm, pk.height)
                    .map_err(|e| bad(format!("sources[{i}].peaks[{j}]: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        sources.push(SourceSpec { peaks, dominant_window: src.dominant_window.map(|[a, b]| (a, b)) });
    }
    let mixing = DenseMatrix::from_rows(&raw.mixing).map_err(|e| bad(format!("mixing: {e}")))?;
    let cfg = ScenarioConfig {
        grid,
        sources,
        mixing,
        condition: match raw.condition {
            RawCondition::Sap => Condition::Sap,
            RawCondition::Dps => Condition::Dps,
        },
        epsilon_level: raw.epsilon_level,
        snr_db: raw.snr_db,
        seed: raw.seed,
    };
    cfg.validate().map_err(|e| bad(e.to_string()))?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text, path)
}
