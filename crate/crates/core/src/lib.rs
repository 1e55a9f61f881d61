//! Sliding-window embeddings and block-Hankel subspace identification.
//!
//! A windowed embedding of a time series (rows of overlapping windows, then
//! PCA) and the SVD of its block-Hankel matrix are the same computation seen
//! from two sides: the window matrix `Z` is exactly `Hᵀ`. This crate builds
//! both forms, checks that they agree, recovers linear state-space models
//! from the Hankel factorisation, and runs Kalman filtering, smoothing and
//! forecasting on the result.
//!
//! All indices are 0-based.

pub mod error;
pub mod kalman;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod spectral;
pub mod synth;
pub mod sysid;
pub mod timeseries;
pub mod trajectory;

pub use error::{Error, Result};
pub use kalman::{
    forecast, kalman_filter, kalman_filter_with_inputs, next_region_entry, online_forecast_eval,
    rts_smooth, ForecastResult, KalmanState, OnlineEvalConfig, OnlineEvalResult, Region,
    SmoothedTrajectory,
};
pub use spectral::{
    align_embeddings, decompose, decompose_matrix, hankel_embed, hankel_states, pca_embed, select_rank,
    split_components, AlignmentReport, Embedding, EmbeddingSource, RankSpec,
    SpectralDecomposition, SplitComponents, DEFAULT_EPSILON,
};
pub use sysid::{
    estimate_ac, estimate_qr, identify_output_only, identify_with_inputs, observability_matrix,
    simulate, simulate_with_states, AcEstimate, InputIdentification, OutputOnlyIdentification,
    Residuals, StateSpaceModel, StateTrajectory,
};
pub use timeseries::{
    detrend, inverse_scale, load_csv, minmax_scale, CsvConfig, DetrendMethod, ScalingParams,
    TimeSeries, Timestamp,
};
pub use trajectory::{block_hankel, hankel_from_trajectory, trajectory_matrix, BlockHankel, TrajectoryMatrix};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
