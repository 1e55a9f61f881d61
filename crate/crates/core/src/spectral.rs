//! Truncated SVD of Hankel / window matrices, embeddings and their alignment.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, center_rows, column_means};
use crate::sysid::StateTrajectory;
use crate::trajectory::{BlockHankel, TrajectoryMatrix};

/// Relative singular-value threshold used when no rank is requested.
pub const DEFAULT_EPSILON: f64 = 1e-2;

/// How many singular directions to keep.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSpec {
    /// Threshold at [`DEFAULT_EPSILON`].
    #[default]
    Auto,
    Fixed(usize),
    /// Keep `σᵢ/σ₁ > ε`.
    Threshold(f64),
}

impl RankSpec {
    /// Builds a spec from optional `rank` / `epsilon` arguments; at most one
    /// may be given.
    pub fn from_options(rank: Option<usize>, epsilon: Option<f64>) -> Result<Self> {
        match (rank, epsilon) {
            (Some(_), Some(_)) => Err(Error::InvalidParameter(
                "give either a rank or an epsilon, not both".into(),
            )),
            (Some(0), None) => Err(Error::InvalidParameter("rank must be at least 1".into())),
            (Some(r), None) => Ok(RankSpec::Fixed(r)),
            (None, Some(e)) if !(e > 0.0 && e < 1.0) => Err(Error::InvalidParameter(format!(
                "epsilon {e} must lie strictly between 0 and 1"
            ))),
            (None, Some(e)) => Ok(RankSpec::Threshold(e)),
            (None, None) => Ok(RankSpec::Auto),
        }
    }
}

/// `H = U·diag(σ)·Vᵀ`, all `k = min(rows, cols)` factors kept, with the
/// working rank `rank` selected from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
    pub threshold: Option<f64>,
}

impl SpectralDecomposition {
    /// Rank-`rank` reconstruction `U₁:ᵣ Σ₁:ᵣ V₁:ᵣᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let r = self.rank;
        let sigma = DMatrix::from_diagonal(&DVector::from_row_slice(&self.singular_values[..r]));
        self.u.columns(0, r) * sigma * self.v.columns(0, r).transpose()
    }

    /// `U₁:ᵣ`, the estimated column space of the extended observability matrix.
    pub fn observability_basis(&self) -> DMatrix<f64> {
        self.u.columns(0, self.rank).into_owned()
    }
}

fn check_threshold(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Number of singular values with `σᵢ/σ₁ > ε`; 0 when all are zero.
pub fn select_rank(singular_values: &[f64], epsilon: f64) -> usize {
    let Some(&first) = singular_values.first() else {
        return 0;
    };
    if first <= 0.0 {
        return 0;
    }
    singular_values
        .iter()
        .take_while(|&&s| s / first > epsilon)
        .count()
}

/// SVD of an arbitrary matrix with rank selection.
pub fn decompose_matrix(m: &DMatrix<f64>, rank: RankSpec) -> Result<SpectralDecomposition> {
    let k = m.nrows().min(m.ncols());
    let (rank, threshold) = match rank {
        RankSpec::Fixed(r) if r == 0 || r > k => {
            return Err(Error::InvalidParameter(format!(
                "rank {r} outside 1..={k} for a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )))
        }
        RankSpec::Fixed(r) => (Some(r), None),
        RankSpec::Threshold(e) => {
            check_threshold(e)?;
            (None, Some(e))
        }
        RankSpec::Auto => (None, Some(DEFAULT_EPSILON)),
    };
    let (u, singular_values, v) = linalg::thin_svd(m)?;
    let rank = rank.unwrap_or_else(|| select_rank(&singular_values, threshold.unwrap_or(DEFAULT_EPSILON)));
    Ok(SpectralDecomposition {
        u,
        singular_values,
        v,
        rank,
        threshold,
    })
}

/// SVD of the block-Hankel matrix.
pub fn decompose(h: &BlockHankel, rank: RankSpec) -> Result<SpectralDecomposition> {
    decompose_matrix(&h.data, rank)
}

/// `X̂ = Σ₁:ᵣ V₁:ᵣᵀ`, one column per window.
pub fn hankel_states(dec: &SpectralDecomposition) -> StateTrajectory {
    let r = dec.rank;
    let mut states = dec.v.columns(0, r).transpose();
    for (i, mut row) in states.row_iter_mut().enumerate() {
        row *= dec.singular_values[i];
    }
    StateTrajectory {
        states,
        window_length: None,
    }
}

/// Hankel-SVD embedding of a block-Hankel matrix: the rows of `X̂ᵀ`.
/// With `center`, each Hankel row (window position) has its mean removed
/// first, matching centered PCA of the window matrix.
pub fn hankel_embed(
    h: &BlockHankel,
    rank: RankSpec,
    center: bool,
) -> Result<(SpectralDecomposition, Embedding)> {
    let dec = if center {
        let means = column_means(&h.data.transpose());
        let mut data = h.data.clone();
        for mut col in data.column_iter_mut() {
            col -= &means;
        }
        decompose_matrix(&data, rank)?
    } else {
        decompose(h, rank)?
    };
    let embedding = Embedding::from_states(&hankel_states(&dec), EmbeddingSource::HankelSvd, h.window_length);
    Ok((dec, embedding))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    TimeclusterPca,
    HankelSvd,
    Smoothed,
    TrueStates,
}

impl EmbeddingSource {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingSource::TimeclusterPca => "timecluster_pca",
            EmbeddingSource::HankelSvd => "hankel_svd",
            EmbeddingSource::Smoothed => "smoothed",
            EmbeddingSource::TrueStates => "true_states",
        }
    }
}

/// Window coordinates, one row per window in start order.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: DMatrix<f64>,
    pub source: EmbeddingSource,
    pub window_length: usize,
    pub stride: usize,
}

/// JSON form of an [`Embedding`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingJson {
    #[serde(rename = "L")]
    pub window_length: usize,
    pub r: usize,
    pub source: EmbeddingSource,
    pub window_starts: Vec<usize>,
    pub coords: Vec<Vec<f64>>,
}

impl Embedding {
    /// Embedding whose rows are the columns of a state trajectory.
    pub fn from_states(states: &StateTrajectory, source: EmbeddingSource, window_length: usize) -> Self {
        Self {
            coords: states.states.transpose(),
            source,
            window_length,
            stride: 1,
        }
    }

    pub fn windows(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dims(&self) -> usize {
        self.coords.ncols()
    }

    pub fn window_starts(&self) -> Vec<usize> {
        (0..self.windows()).map(|w| w * self.stride).collect()
    }

    pub fn to_json(&self) -> EmbeddingJson {
        EmbeddingJson {
            window_length: self.window_length,
            r: self.dims(),
            source: self.source,
            window_starts: self.window_starts(),
            coords: linalg::to_rows(&self.coords),
        }
    }

    /// CSV with header `window_start_index,c1..cr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["window_start_index".to_string()];
        header.extend((1..=self.dims()).map(|i| format!("c{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for (row, start) in self.coords.row_iter().zip(self.window_starts()) {
            let mut rec = vec![start.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV produced by [`Embedding::write_csv`]. Source and window
    /// length are not stored in the CSV and must be supplied.
    pub fn read_csv<R: Read>(input: R, source: EmbeddingSource, window_length: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let mut starts = Vec::new();
        let mut data = Vec::new();
        let mut width = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let line = i as u64 + 2;
            if rec.len() < 2 {
                return Err(Error::Parse {
                    line,
                    column: rec.len(),
                    message: "embedding rows need an index and at least one coordinate".into(),
                });
            }
            match width {
                None => width = Some(rec.len()),
                Some(w) if w != rec.len() => {
                    return Err(Error::Ragged {
                        line,
                        found: rec.len(),
                        expected: w,
                    })
                }
                _ => {}
            }
            for (j, cell) in rec.iter().enumerate() {
                let parse_err = || Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("not a number: {cell:?}"),
                };
                if j == 0 {
                    starts.push(cell.trim().parse::<usize>().map_err(|_| parse_err())?);
                } else {
                    data.push(cell.trim().parse::<f64>().map_err(|_| parse_err())?);
                }
            }
        }
        let width = width.ok_or(Error::EmptyInput)?;
        let stride = if starts.len() > 1 { starts[1] - starts[0] } else { 1 };
        Ok(Self {
            coords: DMatrix::from_row_slice(starts.len(), width - 1, &data),
            source,
            window_length,
            stride: stride.max(1),
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// PCA of the window matrix: `coords = Z·V₁:ᵣ` with `V` from the SVD of `Z`
/// (after subtracting column means when `center` is set).
pub fn pca_embed(z: &TrajectoryMatrix, r: usize, center: bool) -> Result<Embedding> {
    let k = z.data.nrows().min(z.data.ncols());
    if r == 0 || r > k {
        return Err(Error::InvalidParameter(format!(
            "cannot take {r} components from a {}x{} window matrix",
            z.data.nrows(),
            z.data.ncols()
        )));
    }
    let data = if center {
        center_rows(&z.data, &column_means(&z.data))
    } else {
        z.data.clone()
    };
    // Loadings are the left singular vectors of Zᵀ, so the sign convention
    // matches the Hankel factorisation.
    let (loadings, _, _) = linalg::thin_svd(&data.transpose())?;
    let coords = &data * loadings.columns(0, r);
    Ok(Embedding {
        coords,
        source: EmbeddingSource::TimeclusterPca,
        window_length: z.window_length,
        stride: z.stride,
    })
}

/// Best orthogonal map plus translation taking `b` onto `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    /// `r×r` orthogonal; reflections allowed.
    pub rotation: DMatrix<f64>,
    pub translation: DVector<f64>,
    /// `‖A − (B·R + 1tᵀ)‖_F / ‖A − mean(A)‖_F`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentReportJson {
    pub rotation: Vec<Vec<f64>>,
    pub translation: Vec<f64>,
    pub residual: f64,
}

impl AlignmentReport {
    pub fn to_json(&self) -> AlignmentReportJson {
        AlignmentReportJson {
            rotation: linalg::to_rows(&self.rotation),
            translation: self.translation.iter().copied().collect(),
            residual: self.residual,
        }
    }

    /// Applies the alignment to `b`.
    pub fn apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b * &self.rotation;
        for mut row in out.row_iter_mut() {
            row += self.translation.transpose();
        }
        out
    }
}

/// Orthogonal Procrustes with translation, minimising
/// `‖A − (B·R + 1tᵀ)‖_F` over orthogonal `R` and `t`.
pub fn align_embeddings(a: &Embedding, b: &Embedding) -> Result<AlignmentReport> {
    align_matrices(&a.coords, &b.coords)
}

pub fn align_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<AlignmentReport> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "cannot align {}x{} with {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("empty embeddings".into()));
    }
    let mean_a = column_means(a);
    let mean_b = column_means(b);
    let ac = center_rows(a, &mean_a);
    let bc = center_rows(b, &mean_b);
    let cross = bc.transpose() * &ac;
    let (u, _, v) = linalg::thin_svd(&cross)?;
    let rotation = u * v.transpose();
    let translation = &mean_a - rotation.transpose() * &mean_b;
    let report = AlignmentReport {
        rotation,
        translation,
        residual: 0.0,
    };
    let diff = (a - report.apply(b)).norm();
    let spread = ac.norm();
    let residual = if spread > 0.0 { diff / spread } else { diff };
    Ok(AlignmentReport { residual, ..report })
}

/// Consecutive coordinate pairs of an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitComponents {
    pub pairs: Vec<Embedding>,
    /// Set when the embedding had an odd number of coordinates and the last
    /// one was dropped.
    pub dropped_last: bool,
}

/// Splits an `r`-dimensional embedding into `⌊r/2⌋` planar embeddings from
/// coordinates (0,1), (2,3), …
pub fn split_components(e: &Embedding) -> Result<SplitComponents> {
    let r = e.dims();
    if r < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 coordinates to split, got {r}"
        )));
    }
    let pairs = (0..r / 2)
        .map(|p| Embedding {
            coords: e.coords.columns(2 * p, 2).into_owned(),
            ..e.clone()
        })
        .collect();
    Ok(SplitComponents {
        pairs,
        dropped_last: r % 2 == 1,
    })
}
