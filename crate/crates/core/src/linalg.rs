//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used by every pseudoinverse in the crate.
pub const PINV_RCOND: f64 = 1e-12;

/// Thin SVD `m = U·diag(s)·Vᵀ` with singular values sorted in non-increasing
/// order and a deterministic sign: each column of `U` is flipped so that its
/// largest-magnitude entry is positive (the matching column of `V` follows).
pub fn thin_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok((DMatrix::zeros(rows, 0), Vec::new(), DMatrix::zeros(cols, 0)));
    }
    // nalgebra's bidiagonal iteration can stop early and return factors that
    // do not reproduce `m` (errors of 1e-2 and worse). Which tolerance and
    // orientation trips it depends on the matrix, so several are tried: the
    // first accurate one wins, otherwise the best one that is merely loose.
    let scale = m.norm();
    if scale == 0.0 {
        let u = DMatrix::identity(rows, k);
        let v = DMatrix::identity(cols, k);
        return Ok((u, vec![0.0; k], v));
    }
    let unit = m / scale;
    let mut best: Option<(f64, Factors)> = None;
    'attempts: for eps in [5.0 * f64::EPSILON, f64::EPSILON, 1e-13] {
        for flip in [false, true] {
            let Some((err, f)) = raw_svd(&unit, eps, flip) else { continue };
            let better = best.as_ref().map_or(true, |(e, _)| err < *e);
            if better {
                best = Some((err, f));
            }
            if err <= 1e-12 {
                break 'attempts;
            }
        }
    }
    let (u_raw, s_raw, v_raw) = match best {
        Some((err, f)) if err <= 1e-6 => f,
        _ => return Err(Error::SvdFailed),
    };
    let s_raw = s_raw * scale;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s_raw[b].total_cmp(&s_raw[a]));

    let mut u = DMatrix::zeros(rows, k);
    let mut v = DMatrix::zeros(cols, k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let ucol = u_raw.column(src);
        let pivot = ucol
            .iter()
            .copied()
            .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        u.set_column(dst, &(ucol * sign));
        v.set_column(dst, &(v_raw.column(src) * sign));
        s.push(s_raw[src].max(0.0));
    }
    Ok((u, s, v))
}

/// Unsorted SVD factors `(U, σ, V)`, or `None` when nalgebra fails or its
/// factors miss `m` grossly (relative error above 1e-8).
type Factors = (DMatrix<f64>, DVector<f64>, DMatrix<f64>);

/// SVD of `m` (or of its transpose, with the factors swapped back) plus the
/// relative reconstruction error. `m` is expected to have unit norm.
fn raw_svd(m: &DMatrix<f64>, eps: f64, flip: bool) -> Option<(f64, Factors)> {
    let target = if flip { m.transpose() } else { m.clone() };
    let svd = target.try_svd(true, true, eps, 0)?;
    let (mut u, mut v) = (svd.u?, svd.v_t?.transpose());
    if flip {
        std::mem::swap(&mut u, &mut v);
    }
    let s = svd.singular_values;
    let err = (&u * DMatrix::from_diagonal(&s) * v.transpose() - m).norm();
    err.is_finite().then_some((err, (u, s, v)))
}

/// Moore–Penrose pseudoinverse via SVD with relative cutoff `rcond·σ₁`.
/// Returns the pseudoinverse and the numerical rank.
pub fn pinv(m: &DMatrix<f64>, rcond: f64) -> Result<(DMatrix<f64>, usize)> {
    let (rows, cols) = m.shape();
    let (u, s, v) = thin_svd(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let cutoff = rcond * smax;
    let mut out = DMatrix::zeros(cols, rows);
    let mut rank = 0;
    for (i, &sigma) in s.iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            rank += 1;
            out += (v.column(i) / sigma) * u.column(i).transpose();
        }
    }
    Ok((out, rank))
}

/// `(M + Mᵀ) / 2`
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric square root `S` with `S·Sᵀ = M` for a PSD matrix; negative
/// eigenvalues from rounding are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Frobenius norm.
pub fn fro(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Column means of an `N×k` matrix as a length-`k` vector.
pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Subtracts `mean` from every row.
pub fn center_rows(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        row -= mean.transpose();
    }
    out
}

/// Converts a matrix to row-major nested vectors.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a `rows×cols` matrix from row-major nested vectors. `cols` is
/// needed to shape empty rows (e.g. an `n×0` input matrix).
pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch(format!(
            "row {bad} has {} entries, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}
