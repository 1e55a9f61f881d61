//! Comparison measures for state estimates and embeddings.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{center_rows, column_means, pinv, PINV_RCOND};

/// Mean squared error of `estimate` against `truth` after the best affine map
/// `truth ≈ M·estimate + c` (least squares). Both are `n × N`, one column per
/// time step; the result is averaged over the `N` steps.
///
/// Estimated states live in an arbitrary basis, so this is the only fair way
/// to compare them with ground truth.
pub fn aligned_mse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.ncols() != truth.ncols() || estimate.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "estimate has {} steps, truth {}",
            estimate.ncols(),
            truth.ncols()
        )));
    }
    let n = estimate.ncols();
    let mut design = DMatrix::from_element(estimate.nrows() + 1, n, 1.0);
    design.rows_mut(0, estimate.nrows()).copy_from(estimate);
    let (design_pinv, _) = pinv(&design, PINV_RCOND)?;
    let map = truth * design_pinv;
    Ok((truth - map * design).norm_squared() / n as f64)
}

/// Root mean square of all entries of `a − b`.
pub fn rmse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    ((a - b).norm_squared() / a.len().max(1) as f64).sqrt()
}

/// Share of an embedding's spread that is within-group: `tr(S_T⁻¹ S_W) / r`
/// for the total and pooled within-group scatter matrices of the `W × r`
/// coordinates. The value is in `[0, 1]` and invariant to any invertible
/// linear change of coordinates, so embeddings in different bases compare
/// directly. Lower means tighter groups.
pub fn within_group_scatter_ratio(coords: &DMatrix<f64>, labels: &[usize]) -> Result<f64> {
    if coords.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} labels",
            coords.nrows(),
            labels.len()
        )));
    }
    let centered = center_rows(coords, &column_means(coords));
    let total = centered.transpose() * &centered;

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &g) in labels.iter().enumerate() {
        groups.entry(g).or_default().push(i);
    }
    let r = coords.ncols();
    let mut within = DMatrix::zeros(r, r);
    for rows in groups.values() {
        let sub = coords.select_rows(rows.iter());
        let c = center_rows(&sub, &column_means(&sub));
        within += c.transpose() * &c;
    }
    let (total_pinv, rank) = pinv(&total, PINV_RCOND)?;
    if rank == 0 {
        return Err(Error::InvalidParameter("embedding has no spread".into()));
    }
    Ok((total_pinv * within).trace() / rank as f64)
}
