//! Synthetic Lorentzian sources, linear mixing and calibrated noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lorentzian::LorentzPeak;
use crate::matrix::DenseMatrix;
use crate::signal::Spectrum;
use crate::vca::DataMatrix;

/// Peaks are zeroed beyond this many half widths from their center under
/// the stand-alone condition.
pub const SAP_SUPPORT_HWHM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub p: usize,
    pub dx: f64,
    pub origin: f64,
}

impl Grid {
    pub fn new(p: usize, dx: f64, origin: f64) -> Result<Self> {
        if p < 3 {
            return Err(Error::TooShort(p));
        }
        if !(dx > 0.0 && dx.is_finite() && origin.is_finite()) {
            return Err(Error::domain(format!("grid needs finite origin and positive dx, got {origin}, {dx}")));
        }
        Ok(Self { p, dx, origin })
    }

    pub fn axis(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx
    }

    pub fn end(&self) -> f64 {
        self.axis(self.p - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub peaks: Vec<LorentzPeak>,
    /// Inclusive sample range where this source must dominate.
    pub dominant_window: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Every source owns samples where all others are exactly zero.
    Sap,
    /// Other sources are small but nonzero on each source's window.
    Dps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub grid: Grid,
    pub sources: Vec<SourceSpec>,
    /// Ground-truth mixing matrix, `m x n`.
    pub mixing: DenseMatrix,
    pub condition: Condition,
    pub epsilon_level: f64,
    /// `None` or `+inf` disables noise.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.sources.len();
        if n == 0 {
            return Err(Error::Config("scenario has no sources".into()));
        }
        if self.mixing.cols() != n {
            return Err(Error::Config(format!(
                "mixing matrix has {} columns for {n} sources",
                self.mixing.cols()
            )));
        }
        if self.mixing.as_slice().iter().any(|&v| v < 0.0) {
            return Err(Error::Config("mixing matrix has negative entries".into()));
        }
        match self.condition {
            Condition::Sap if self.epsilon_level != 0.0 => {
                return Err(Error::Config("epsilon_level must be 0 for the sap condition".into()))
            }
            Condition::Dps if !(self.epsilon_level > 0.0 && self.epsilon_level.is_finite()) => {
                return Err(Error::Config("epsilon_level must be positive for the dps condition".into()))
            }
            _ => {}
        }
        if let Some(snr) = self.snr_db {
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(Error::Config(format!("invalid snr_db {snr}")));
            }
        }
        let (lo, hi) = (self.grid.origin, self.grid.end());
        for (i, src) in self.sources.iter().enumerate() {
            if src.peaks.is_empty() {
                return Err(Error::Config(format!("source {i} has no peaks")));
            }
            if let Some(pk) = src.peaks.iter().find(|pk| pk.center() < lo || pk.center() > hi) {
                return Err(Error::Config(format!(
                    "source {i} has a peak at {} outside the grid [{lo}, {hi}]",
                    pk.center()
                )));
            }
            if let Some((a, b)) = src.dominant_window {
                if a > b || b >= self.grid.p {
                    return Err(Error::Config(format!("source {i} window {a}..={b} is outside 0..{}", self.grid.p)));
                }
            }
        }
        Ok(())
    }
}

/// Samples every source on the grid and verifies each declared window.
pub fn synth_sources(cfg: &ScenarioConfig) -> Result<Vec<Spectrum>> {
    cfg.validate()?;
    let g = cfg.grid;
    let truncate = cfg.condition == Condition::Sap;
    let sources = cfg
        .sources
        .iter()
        .map(|src| {
            let values = (0..g.p)
                .map(|i| {
                    let x = g.axis(i);
                    src.peaks
                        .iter()
                        .filter(|pk| !truncate || (x - pk.center()).abs() <= SAP_SUPPORT_HWHM * pk.hwhm())
                        .map(|pk| pk.eval(x))
                        .sum()
                })
                .collect();
            Spectrum::new(values, g.dx, g.origin)
        })
        .collect::<Result<Vec<_>>>()?;

    let limit = match cfg.condition {
        Condition::Sap => 0.0,
        Condition::Dps => cfg.epsilon_level,
    };
    for (i, src) in cfg.sources.iter().enumerate() {
        if let Some((start, end)) = src.dominant_window {
            let ratio = dominance_ratio(&sources, i, start, end)?;
            if ratio > limit {
                return Err(Error::Dominance { source_index: i, start, end, ratio, limit });
            }
        }
    }
    Ok(sources)
}

/// Largest value of any other source on `start..=end`, relative to the
/// largest value of source `i` there.
pub fn dominance_ratio(sources: &[Spectrum], i: usize, start: usize, end: usize) -> Result<f64> {
    let own = sources.get(i).ok_or_else(|| Error::mismatch(format!("no source {i}")))?;
    if start > end || end >= own.len() {
        return Err(Error::mismatch(format!("window {start}..={end} outside 0..{}", own.len())));
    }
    let peak = own.values()[start..=end].iter().copied().fold(0.0, f64::max);
    let other = sources
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .flat_map(|(_, s)| s.values()[start..=end].iter().copied())
        .fold(0.0, f64::max);
    if peak > 0.0 {
        Ok(other / peak)
    } else {
        Ok(f64::INFINITY)
    }
}

/// True when every source has a sample where it alone is nonzero.
pub fn satisfies_nna(sources: &[Spectrum]) -> bool {
    let p = sources.first().map_or(0, Spectrum::len);
    (0..sources.len()).all(|i| {
        (0..p).any(|j| {
            sources[i].values()[j] > 0.0
                && sources.iter().enumerate().all(|(k, s)| k == i || s.values()[j] == 0.0)
        })
    })
}

/// `X = A S`.
pub fn mix(a: &DenseMatrix, sources: &[Spectrum]) -> Result<DataMatrix> {
    if a.cols() != sources.len() {
        return Err(Error::mismatch(format!("{} mixing columns for {} sources", a.cols(), sources.len())));
    }
    let first = &sources[0];
    for (i, s) in sources.iter().enumerate() {
        if s.len() != first.len() || s.dx() != first.dx() || s.origin() != first.origin() {
            return Err(Error::mismatch(format!("source {i} is on a different grid")));
        }
    }
    let rows = (0..a.rows())
        .map(|r| {
            let coef = a.row(r);
            (0..first.len()).map(|j| coef.iter().zip(sources).map(|(c, s)| c * s.values()[j]).sum()).collect()
        })
        .collect();
    DataMatrix::from_rows(rows, first.dx(), first.origin())
}

/// Adds i.i.d. Gaussian noise with variance `mean(X²)/10^(snr/10)` from a
/// ChaCha8 stream seeded with `seed`, then clamps at zero. The draws do not
/// depend on the SNR, so one seed gives one noise pattern at every level.
pub fn add_noise(x: &DataMatrix, snr_db: f64, seed: u64) -> Result<DataMatrix> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::domain(format!("invalid snr {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    let rows = x.rows();
    let count = (x.m() * x.p()) as f64;
    let power = rows.iter().flatten().map(|v| v * v).sum::<f64>() / count;
    if power == 0.0 {
        return Err(Error::domain("cannot calibrate noise on an all-zero matrix"));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (v + sigma * z).max(0.0)
                })
                .collect()
        })
        .collect();
    DataMatrix::from_rows(noisy, x.dx(), x.origin())
}

/// Sources, clean mixtures and (possibly noisy) observed mixtures.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sources: Vec<Spectrum>,
    pub clean: DataMatrix,
    pub mixtures: DataMatrix,
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    let sources = synth_sources(cfg)?;
    let clean = mix(&cfg.mixing, &sources)?;
    let mixtures = match cfg.snr_db {
        Some(snr) => add_noise(&clean, snr, cfg.seed)?,
        None => clean.clone(),
    };
    Ok(Scenario { sources, clean, mixtures })
}
