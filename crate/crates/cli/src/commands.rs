use std::fs;
use std::path::{Path, PathBuf};

use peaksharp::recovery::{separate, Method, RecoveryMode, SeparationReport, Truth};
use peaksharp::synth::{self, generate, satisfies_nna, Condition, ScenarioConfig};
use peaksharp::{metrics, DataMatrix, EstimateOptions, Spectrum};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::scenario::load_scenario;
use crate::table::{fmt_f64, read_table, write_table, write_text, SignalTable};
use crate::weight::{estimate_width, resolve, ResolvedWeight, WeightMode};

pub const SOURCES_CSV: &str = "sources.csv";
pub const MIXTURES_CSV: &str = "mixtures.csv";
pub const MIXING_TRUE_CSV: &str = "mixing_true.csv";
pub const SCENARIO_META: &str = "scenario.meta";
pub const MIXTURES_SHARP_CSV: &str = "mixtures_sharp.csv";
pub const SHARPEN_META: &str = "sharpen.meta";
pub const MIXING_EST_CSV: &str = "mixing_est.csv";
pub const SOURCES_EST_CSV: &str = "sources_est.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const REPORT_META: &str = "report.meta";
pub const METRICS_JSON: &str = "metrics.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_META: &str = "sweep.meta";

/// Cone estimate on raw (`Nn`) or sharpened (`Nnp`) mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum MethodArg {
    Nn,
    #[default]
    Nnp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepOver {
    K,
    Snr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateArgs {
    pub drop_tol: f64,
    pub min_angle_deg: f64,
}

impl Default for EstimateArgs {
    fn default() -> Self {
        let d = EstimateOptions::default();
        Self { drop_tol: d.drop_tol, min_angle_deg: d.min_angle_deg }
    }
}

impl EstimateArgs {
    fn options(&self) -> EstimateOptions {
        EstimateOptions { drop_tol: self.drop_tol, min_angle_deg: self.min_angle_deg, ..EstimateOptions::default() }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_meta<T: Serialize>(path: &Path, meta: &T) -> Result<()> {
    let text = toml::to_string(meta).map_err(|e| CliError::Config(format!("cannot encode {}: {e}", path.display())))?;
    write_text(path, &text)
}

fn read_data(path: &Path) -> Result<DataMatrix> {
    read_table(path)?.to_data().map_err(CliError::from)
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub snr_db: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct ScenarioMeta {
    condition: &'static str,
    epsilon_level: f64,
    sources: usize,
    mixtures: usize,
    samples: usize,
    origin: f64,
    dx: f64,
    snr_db: Option<f64>,
    seed: u64,
    generator: &'static str,
    nna_holds: bool,
}

pub fn load_with_overrides(input: &Path, snr_db: Option<f64>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = load_scenario(input)?;
    if snr_db.is_some() {
        cfg.snr_db = snr_db;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let cfg = load_with_overrides(&args.input, args.snr_db, args.seed)?;
    let scenario = generate(&cfg)?;
    ensure_dir(&args.out)?;
    write_table(&args.out.join(SOURCES_CSV), &SignalTable::from_spectra(&scenario.sources, "s"))?;
    write_table(&args.out.join(MIXTURES_CSV), &SignalTable::from_data(&scenario.mixtures, "x"))?;
    write_table(&args.out.join(MIXING_TRUE_CSV), &SignalTable::from_matrix(&cfg.mixing, "x"))?;
    let meta = ScenarioMeta {
        condition: match cfg.condition {
            Condition::Sap => "sap",
            Condition::Dps => "dps",
        },
        epsilon_level: cfg.epsilon_level,
        sources: cfg.sources.len(),
        mixtures: cfg.mixing.rows(),
        samples: cfg.grid.p,
        origin: cfg.grid.origin,
        dx: cfg.grid.dx,
        snr_db: cfg.snr_db.filter(|s| s.is_finite()),
        seed: cfg.seed,
        generator: "ChaCha8 (rand_chacha), standard normal via rand_distr",
        nna_holds: satisfies_nna(&scenario.sources),
    };
    write_meta(&args.out.join(SCENARIO_META), &meta)
}

// ---------------------------------------------------------------- sharpen

#[derive(Debug, Clone)]
pub struct SharpenArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub weight: WeightMode,
}

#[derive(Debug, Serialize)]
struct WeightMeta {
    mode: String,
    k: f64,
    estimated_w: Option<f64>,
    max_safe_weight: Option<f64>,
    warning: Option<String>,
}

impl WeightMeta {
    fn from(r: &ResolvedWeight) -> Self {
        Self {
            mode: r.mode.to_string(),
            k: r.k.unwrap_or(0.0),
            estimated_w: r.estimated_w,
            max_safe_weight: r.max_safe,
            warning: r.warning.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SharpenMeta {
    #[serde(flatten)]
    weight: WeightMeta,
    clamped_samples: usize,
}

pub fn cmd_sharpen(args: &SharpenArgs) -> Result<ResolvedWeight> {
    let x = read_data(&args.input)?;
    let resolved = resolve(args.weight, &x)?;
    let (sharp, clamped) = match resolved.k {
        Some(k) => x.sharpened(k, true)?,
        None => (x.clone(), 0),
    };
    if let Some(w) = &resolved.warning {
        eprintln!("warning: {w}");
    }
    ensure_dir(&args.out)?;
    write_table(&args.out.join(MIXTURES_SHARP_CSV), &SignalTable::from_data(&sharp, "x"))?;
    write_meta(
        &args.out.join(SHARPEN_META),
        &SharpenMeta { weight: WeightMeta::from(&resolved), clamped_samples: clamped },
    )?;
    Ok(resolved)
}

// ---------------------------------------------------------------- unmix

#[derive(Debug, Clone)]
pub struct UnmixArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub n: usize,
    pub weight: WeightMode,
    pub method: MethodArg,
    pub estimate: EstimateArgs,
}

#[derive(Debug, Serialize)]
struct ReportMeta {
    method: &'static str,
    #[serde(flatten)]
    weight: WeightMeta,
    sources: usize,
    selected_columns: Vec<usize>,
    clamped_samples: usize,
    drop_tol: f64,
    min_angle_deg: f64,
    recovery: &'static str,
}

/// Resolves the weight for a method; `Nn` never sharpens.
pub fn method_weight(method: MethodArg, weight: WeightMode, x: &DataMatrix) -> Result<ResolvedWeight> {
    match (method, weight) {
        (MethodArg::Nn, _) => resolve(WeightMode::Off, x),
        (MethodArg::Nnp, WeightMode::Off) => {
            Err(CliError::Config("method nnp needs a sharpening weight (--k <real> or auto)".into()))
        }
        (MethodArg::Nnp, w) => resolve(w, x),
    }
}

pub fn cmd_unmix(args: &UnmixArgs) -> Result<SeparationReport> {
    let x = read_data(&args.input)?;
    let resolved = method_weight(args.method, args.weight, &x)?;
    if let Some(w) = &resolved.warning {
        eprintln!("warning: {w}");
    }
    let report = separate(&x, args.n, resolved.k, &args.estimate.options(), RecoveryMode::Auto, None)?;
    ensure_dir(&args.out)?;
    write_table(&args.out.join(MIXING_EST_CSV), &SignalTable::from_matrix(report.estimated_a.matrix(), "x"))?;
    write_table(&args.out.join(SOURCES_EST_CSV), &SignalTable::from_spectra(&report.estimated_s, "s"))?;
    let mut scores = String::from("column,score\n");
    for (j, s) in report.scores.kept_indices.iter().zip(&report.scores.scores) {
        scores.push_str(&format!("{j},{}\n", fmt_f64(*s)));
    }
    write_text(&args.out.join(SCORES_CSV), &scores)?;
    let meta = ReportMeta {
        method: report.method.tag(),
        weight: WeightMeta::from(&resolved),
        sources: args.n,
        selected_columns: report.estimated_a.column_indices().unwrap_or_default().to_vec(),
        clamped_samples: report.clamped,
        drop_tol: args.estimate.drop_tol,
        min_angle_deg: args.estimate.min_angle_deg,
        recovery: if x.m() >= args.n { "nnls" } else { "l1" },
    };
    write_meta(&args.out.join(REPORT_META), &meta)?;
    Ok(report)
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone)]
pub struct EvalArgs {
    /// Directory with `mixing_est.csv` and `sources_est.csv`.
    pub input: PathBuf,
    /// Directory with `mixing_true.csv` and `sources.csv`.
    pub truth: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct MetricsJson {
    comon_index: f64,
    per_source_cosine: Vec<f64>,
    column_assignment: Vec<usize>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<metrics::MetricBundle> {
    let a_hat = read_table(&args.input.join(MIXING_EST_CSV))?.to_matrix()?;
    let s_hat = read_table(&args.input.join(SOURCES_EST_CSV))?.rows;
    let a_true = read_table(&args.truth.join(MIXING_TRUE_CSV))?.to_matrix()?;
    let s_true = read_table(&args.truth.join(SOURCES_CSV))?.rows;
    let bundle = metrics::evaluate(&a_true, &a_hat, &s_true, &s_hat)?;
    ensure_dir(&args.out)?;
    let json = MetricsJson {
        comon_index: bundle.comon_index,
        per_source_cosine: bundle.per_source_cosine.clone(),
        column_assignment: bundle.column_assignment.clone(),
    };
    let text = serde_json::to_string_pretty(&json).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(&args.out.join(METRICS_JSON), &(text + "\n"))?;
    Ok(bundle)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone)]
pub struct SweepArgs {
    /// Scenario file.
    pub input: PathBuf,
    pub out: PathBuf,
    pub over: SweepOver,
    /// Sharpening weight for the SNR sweep, resolved once on the clean mixtures.
    pub weight: WeightMode,
    pub k_values: Vec<f64>,
    pub snr_values: Vec<f64>,
    pub seed: Option<u64>,
    pub estimate: EstimateArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// `k` or SNR in dB.
    pub value: f64,
    pub comon_index: f64,
    pub min_cosine: f64,
    pub exceeds_safe_weight: bool,
}

#[derive(Debug, Serialize)]
struct SweepMeta {
    over: &'static str,
    points: usize,
    k: Option<f64>,
    estimated_w: Option<f64>,
    max_safe_weight: Option<f64>,
    nn_comon_index: f64,
    seed: u64,
    drop_tol: f64,
    min_angle_deg: f64,
}

/// `start:stop:step`, inclusive of `stop` (within rounding), or a
/// comma-separated list.
pub fn parse_range(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}"));
    match parts.as_slice() {
        [a, b, c] => {
            let (a, b, c) = (num(a)?, num(b)?, num(c)?);
            if !(c > 0.0) || b < a {
                return Err(format!("range {s} must have start <= stop and a positive step"));
            }
            let count = ((b - a) / c + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| a + i as f64 * c).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(format!("expected start:stop:step or a list, got `{s}`")),
    }
}

fn score_point(report: &SeparationReport) -> (f64, f64) {
    let m = report.metrics.as_ref().expect("truth supplied");
    (m.comon_index, m.per_source_cosine.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn run_sweep(cfg: &ScenarioConfig, args: &SweepArgs) -> Result<(Vec<SweepPoint>, ResolvedWeight, f64)> {
    let opts = args.estimate.options();
    let n = cfg.sources.len();
    let scenario = generate(cfg)?;
    let truth = Truth { mixing: &cfg.mixing, sources: &scenario.sources };
    let (points, resolved, nn) = match args.over {
        SweepOver::K => {
            let x = &scenario.mixtures;
            let w = estimate_width(x).ok();
            let safe = w.map(peaksharp::max_safe_weight).transpose()?;
            let nn = separate(x, n, None, &opts, RecoveryMode::Auto, Some(truth))?;
            let mut points = Vec::with_capacity(args.k_values.len());
            for &k in &args.k_values {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(CliError::Config(format!("sweep weight must be positive, got {k}")));
                }
                let report = separate(x, n, Some(k), &opts, RecoveryMode::Auto, Some(truth))?;
                let (comon, cos) = score_point(&report);
                points.push(SweepPoint {
                    value: k,
                    comon_index: comon,
                    min_cosine: cos,
                    exceeds_safe_weight: safe.is_some_and(|s| k > s),
                });
            }
            let resolved = ResolvedWeight { mode: WeightMode::Off, k: None, estimated_w: w, max_safe: safe, warning: None };
            (points, resolved, score_point(&nn).0)
        }
        SweepOver::Snr => {
            let resolved = resolve(args.weight, &scenario.clean)?;
            if resolved.k.is_none() {
                return Err(CliError::Config("the snr sweep needs a sharpening weight".into()));
            }
            let nn = separate(&scenario.clean, n, None, &opts, RecoveryMode::Auto, Some(truth))?;
            let mut points = Vec::with_capacity(args.snr_values.len());
            for &snr in &args.snr_values {
                let noisy = synth::add_noise(&scenario.clean, snr, cfg.seed)?;
                let report = separate(&noisy, n, resolved.k, &opts, RecoveryMode::Auto, Some(truth))?;
                let (comon, cos) = score_point(&report);
                points.push(SweepPoint {
                    value: snr,
                    comon_index: comon,
                    min_cosine: cos,
                    exceeds_safe_weight: resolved.warning.is_some(),
                });
            }
            (points, resolved, score_point(&nn).0)
        }
    };
    Ok((points, resolved, nn))
}

pub fn render_sweep(over: SweepOver, points: &[SweepPoint]) -> String {
    let key = match over {
        SweepOver::K => "k",
        SweepOver::Snr => "snr_db",
    };
    let mut out = format!("{key},comon_index,min_cosine,exceeds_safe_weight\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.value),
            fmt_f64(p.comon_index),
            fmt_f64(p.min_cosine),
            u8::from(p.exceeds_safe_weight)
        ));
    }
    out
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepPoint>> {
    let cfg = load_with_overrides(&args.input, None, args.seed)?;
    let (points, resolved, nn) = run_sweep(&cfg, args)?;
    if points.iter().any(|p| p.exceeds_safe_weight) {
        eprintln!("warning: some sweep weights exceed the nonnegativity bound; negative lobes are clamped");
    }
    ensure_dir(&args.out)?;
    write_text(&args.out.join(SWEEP_CSV), &render_sweep(args.over, &points))?;
    let meta = SweepMeta {
        over: match args.over {
            SweepOver::K => "k",
            SweepOver::Snr => "snr",
        },
        points: points.len(),
        k: resolved.k,
        estimated_w: resolved.estimated_w,
        max_safe_weight: resolved.max_safe,
        nn_comon_index: nn,
        seed: cfg.seed,
        drop_tol: args.estimate.drop_tol,
        min_angle_deg: args.estimate.min_angle_deg,
    };
    write_meta(&args.out.join(SWEEP_META), &meta)?;
    Ok(points)
}

/// NN and NNP separations of an in-memory scenario, scored against truth.
pub fn compare_methods(
    cfg: &ScenarioConfig,
    weight: WeightMode,
    estimate: &EstimateArgs,
) -> Result<(SeparationReport, SeparationReport, ResolvedWeight)> {
    let scenario = generate(cfg)?;
    let truth = Truth { mixing: &cfg.mixing, sources: &scenario.sources };
    let opts = estimate.options();
    let n = cfg.sources.len();
    let resolved = method_weight(MethodArg::Nnp, weight, &scenario.mixtures)?;
    let nn = separate(&scenario.mixtures, n, None, &opts, RecoveryMode::Auto, Some(truth))?;
    let nnp = separate(&scenario.mixtures, n, resolved.k, &opts, RecoveryMode::Auto, Some(truth))?;
    debug_assert_eq!(nn.method, Method::Nn);
    Ok((nn, nnp, resolved))
}

/// Sources of a scenario as written by `synth`.
pub fn scenario_sources(cfg: &ScenarioConfig) -> Result<Vec<Spectrum>> {
    Ok(synth::synth_sources(cfg)?)
}
