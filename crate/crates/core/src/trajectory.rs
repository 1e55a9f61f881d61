//! Window matrix `Z` and block-Hankel matrix `H` of a series.
//!
//! Windows are flattened time-major with channels inner: the window starting
//! at `t` is `[y_t,0 … y_t,D-1, y_t+1,0 …]`. With stride 1, `Z = Hᵀ` exactly.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeSeries;

/// Overlapping windows as rows: `W × LD`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    pub data: DMatrix<f64>,
    pub window_length: usize,
    pub stride: usize,
    pub channels: usize,
}

impl TrajectoryMatrix {
    pub fn windows(&self) -> usize {
        self.data.nrows()
    }

    /// Start index of window `w` in the source series.
    pub fn window_start(&self, w: usize) -> usize {
        w * self.stride
    }

    pub fn envelope(&self) -> MatrixEnvelope {
        MatrixEnvelope::new(&self.data, self.window_length, self.stride, self.channels)
    }
}

/// Observation blocks constant along anti-diagonals: `LD × (T-L+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHankel {
    pub data: DMatrix<f64>,
    pub window_length: usize,
    pub channels: usize,
}

impl BlockHankel {
    pub fn windows(&self) -> usize {
        self.data.ncols()
    }

    /// Block `(i, j)`, which equals `y_{i+j}`.
    pub fn block(&self, i: usize, j: usize) -> Vec<f64> {
        self.data
            .column(j)
            .rows(i * self.channels, self.channels)
            .iter()
            .copied()
            .collect()
    }

    pub fn envelope(&self) -> MatrixEnvelope {
        MatrixEnvelope::new(&self.data, self.window_length, 1, self.channels)
    }
}

fn check_window(t: usize, window_length: usize) -> Result<()> {
    if window_length == 0 {
        return Err(Error::InvalidParameter(
            "window length must be at least 1".into(),
        ));
    }
    if window_length > t {
        return Err(Error::InvalidParameter(format!(
            "window length {window_length} exceeds series length {t}"
        )));
    }
    Ok(())
}

/// Builds `Z` with `⌊(T−L)/s⌋ + 1` rows.
pub fn trajectory_matrix(
    ts: &TimeSeries,
    window_length: usize,
    stride: usize,
) -> Result<TrajectoryMatrix> {
    let (t, d) = (ts.len(), ts.channels());
    check_window(t, window_length)?;
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let rows = (t - window_length) / stride + 1;
    let y = ts.values();
    let data = DMatrix::from_fn(rows, window_length * d, |w, k| {
        y[(w * stride + k / d, k % d)]
    });
    Ok(TrajectoryMatrix {
        data,
        window_length,
        stride,
        channels: d,
    })
}

/// Builds `H` with block `(i, j) = y_{i+j}`.
pub fn block_hankel(ts: &TimeSeries, window_length: usize) -> Result<BlockHankel> {
    let (t, d) = (ts.len(), ts.channels());
    check_window(t, window_length)?;
    let cols = t - window_length + 1;
    let y = ts.values();
    let data = DMatrix::from_fn(window_length * d, cols, |k, j| y[(j + k / d, k % d)]);
    Ok(BlockHankel {
        data,
        window_length,
        channels: d,
    })
}

/// `H = Zᵀ`. Only defined for stride 1.
pub fn hankel_from_trajectory(z: &TrajectoryMatrix) -> Result<BlockHankel> {
    if z.stride != 1 {
        return Err(Error::NotHankel(z.stride));
    }
    Ok(BlockHankel {
        data: z.data.transpose(),
        window_length: z.window_length,
        channels: z.channels,
    })
}

/// JSON envelope for an exported matrix, data row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEnvelope {
    pub rows: usize,
    pub cols: usize,
    #[serde(rename = "L")]
    pub window_length: usize,
    #[serde(rename = "s")]
    pub stride: usize,
    #[serde(rename = "D")]
    pub channels: usize,
    pub data: Vec<f64>,
}

impl MatrixEnvelope {
    fn new(m: &DMatrix<f64>, window_length: usize, stride: usize, channels: usize) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            window_length,
            stride,
            channels,
            data: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// Writes a matrix as headerless row-major CSV.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
