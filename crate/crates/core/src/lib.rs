//! Hyperspectral band selection by thresholding average band correlation.
//!
//! Modules follow the experiment: raster I/O ([`cube`]), background masking
//! and per-band standardization ([`preprocess`]), inter-band correlation and
//! ABC thresholding ([`bandcorr`]), the PCA and greedy dissimilarity
//! baselines ([`baselines`]), stratified splitting with a one-vs-rest SMO SVM
//! ([`classify`]), metrics and map rendering ([`evaluate`]), and the
//! orchestration behind the CLI ([`pipeline`]).
//!
//! # Feature flags
//! - `parallel` (default): data-parallel kernels through rayon. Without it
//!   every [`Execution::Parallel`] request runs sequentially. Results are
//!   bit-identical either way.

pub mod bandcorr;
pub mod baselines;
pub mod classify;
pub mod cube;
pub mod error;
pub mod evaluate;
mod exec;
mod kv;
pub mod pipeline;
pub mod preprocess;

pub use bandcorr::{
    average_band_correlation, correlation_matrix, correlation_matrix_with, extract_bands, pearson,
    select_bands_by_abc, AbcVector, BandSelection, CorrelationMatrix, ExtractBands,
    SelectionMethod, DEFAULT_THRESHOLD,
};
pub use baselines::{pca_fit, pca_transform, sb_select, PcaModel};
pub use classify::{
    stratified_split, svm_predict, svm_train, Kernel, SplitIndices, SvmConfig, SvmModel,
};
pub use cube::{
    load_cube, load_ground_truth, save_cube, save_ground_truth, synthesize_cube, GroundTruthMap,
    HyperspectralCube, SyntheticSpec,
};
pub use error::{Error, ErrorKind, Result};
pub use evaluate::{confusion, render_map, report, ConfusionMatrix, EvaluationReport, Palette};
pub use exec::Execution;
pub use preprocess::{mask_background, standardize, BandStats, PixelMatrix};
