use std::fs;
use std::path::Path;

use hankel_core::{
    detrend, inverse_scale, load_csv, minmax_scale, CsvConfig, Embedding, EmbeddingSource,
    RankSpec, ScalingParams, TimeSeries,
};

use crate::args::Step;
use crate::error::CliError;

pub fn load_series(path: &Path) -> Result<TimeSeries, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| CliError::Read {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    load_csv(&bytes[..], &CsvConfig::infer(&bytes)).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_embedding(path: &Path) -> Result<Embedding, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|e| CliError::Read {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    Embedding::read_csv(file, EmbeddingSource::TimeclusterPca, 0).map_err(|source| {
        CliError::Read {
            path: path.to_path_buf(),
            source,
        }
    })
}

pub fn rank_spec(rank: Option<usize>, epsilon: Option<f64>) -> Result<RankSpec, CliError> {
    RankSpec::from_options(rank, epsilon).map_err(|e| CliError::Usage(e.to_string()))
}

pub fn check_window(window: usize) -> Result<(), CliError> {
    if window == 0 {
        return Err(CliError::Usage("window length must be at least 1".into()));
    }
    Ok(())
}

/// A series after its preprocessing steps.
pub struct Prepared {
    pub series: TimeSeries,
    /// Scalings of the trailing run of `scale` steps, innermost last.
    trailing_scales: Vec<ScalingParams>,
    detrended: bool,
}

impl Prepared {
    /// Whether [`Prepared::restore`] gives back original units. Detrending
    /// is not undone.
    pub fn invertible(&self) -> bool {
        !self.detrended
    }

    /// Undoes the trailing scale steps.
    pub fn restore(&self, ts: &TimeSeries) -> Result<TimeSeries, CliError> {
        let mut out = ts.clone();
        for params in self.trailing_scales.iter().rev() {
            out = inverse_scale(&out, params)?;
        }
        Ok(out)
    }

    /// Per-channel factor that maps a variance back through the trailing
    /// scale steps.
    pub fn spans(&self, channels: usize) -> Vec<f64> {
        (0..channels)
            .map(|i| self.trailing_scales.iter().map(|p| p.span(i)).product())
            .collect()
    }
}

pub fn prepare(path: &Path, steps: &[Step]) -> Result<Prepared, CliError> {
    let mut series = load_series(path)?;
    let mut trailing_scales = Vec::new();
    let mut detrended = false;
    for step in steps {
        match step {
            Step::Scale => {
                let (scaled, params) = minmax_scale(&series);
                series = scaled;
                trailing_scales.push(params);
            }
            Step::Detrend(method) => {
                series = detrend(&series, *method)?;
                trailing_scales.clear();
                detrended = true;
            }
        }
    }
    Ok(Prepared {
        series,
        trailing_scales,
        detrended,
    })
}
