//! Peak sharpening for Lorentzian spectra and nonnegative blind source
//! separation by convex-cone vertex identification.
//!
//! The pipeline: sharpen every mixture row ([`signal::sharpen`]), pick the
//! cone edges among the data columns ([`vca::estimate_mixing`]), then solve a
//! nonnegative problem per column of the original mixtures
//! ([`recovery::recover_sources`]).

pub mod error;
pub mod lorentzian;
pub mod matrix;
pub mod metrics;
pub mod nnls;
pub mod recovery;
pub mod signal;
pub mod synth;
pub mod vca;

pub use error::{Category, Error, Result};
pub use lorentzian::{max_safe_weight, sharpening_factor, LorentzPeak, SharpenWeight};
pub use matrix::DenseMatrix;
pub use metrics::{comon_index, cosine_similarity, match_columns, MetricBundle};
pub use nnls::{bregman_l1, nnls_solve, NnlsSolution};
pub use recovery::{recover_sources, separate, Method, RecoveryMode, SeparationReport, Truth};
pub use signal::{estimate_min_hwhm, sharpen, suggest_weight, PeakEstimate, Spectrum};
pub use synth::{add_noise, mix, synth_sources, Condition, Grid, ScenarioConfig, SourceSpec};
pub use vca::{estimate_mixing, ColumnScores, DataMatrix, EstimateOptions, MixingMatrix};
