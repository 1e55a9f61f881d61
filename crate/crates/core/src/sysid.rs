//! State-space models and their recovery from Hankel factorisations.
//!
//! Output-only identification follows the Hankel route directly: the states
//! are `Σ₁:ₙV₁:ₙᵀ`, then `Â`, `Ĉ` come from least squares against the shifted
//! states and the window-start outputs, and `Q̂`, `R̂` from the residuals.
//!
//! With exogenous inputs the input Hankel rows are projected out of the output
//! Hankel matrix before the SVD (a MOESP-style simplification). The column
//! space of the projection gives `Ĉ` and `Â` by shift invariance; `x̂₀`, `B̂`,
//! `D̂` follow from one linear least-squares fit of the outputs.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, pinv, symmetrize, PINV_RCOND};
use crate::rng::NoiseStream;
use crate::spectral::{decompose, decompose_matrix, hankel_states, RankSpec, SpectralDecomposition};
use crate::timeseries::TimeSeries;
use crate::trajectory::block_hankel;

/// Linear time-invariant model
///
/// ```text
/// x_{t+1} = A x_t + B u_t + w_t,   w_t ~ N(0, Q)
/// y_t     = C x_t + D u_t + v_t,   v_t ~ N(0, R)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let p = c.nrows();
        let m = b.ncols();
        let checks = [
            ("A", a.shape(), (n, n)),
            ("B", b.shape(), (n, m)),
            ("C", c.shape(), (p, n)),
            ("D", d.shape(), (p, m)),
            ("Q", q.shape(), (n, n)),
            ("R", r.shape(), (p, p)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {}x{}",
                    got.0, got.1, want.0, want.1
                )));
            }
        }
        Ok(Self { a, b, c, d, q, r })
    }

    /// Model without inputs (`m = 0`).
    pub fn output_only(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let (n, p) = (a.nrows(), c.nrows());
        Self::new(a, DMatrix::zeros(n, 0), c, DMatrix::zeros(p, 0), q, r)
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            n: self.n(),
            m: self.m(),
            a: linalg::to_rows(&self.a),
            b: linalg::to_rows(&self.b),
            c: linalg::to_rows(&self.c),
            d: linalg::to_rows(&self.d),
            q: linalg::to_rows(&self.q),
            r: linalg::to_rows(&self.r),
        }
    }

    pub fn from_json(json: &ModelJson) -> Result<Self> {
        let (n, m) = (json.n, json.m);
        let p = json.c.len();
        Self::new(
            linalg::from_rows(&json.a, n)?,
            linalg::from_rows(&json.b, m)?,
            linalg::from_rows(&json.c, n)?,
            linalg::from_rows(&json.d, m)?,
            linalg::from_rows(&json.q, n)?,
            linalg::from_rows(&json.r, p)?,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json: ModelJson = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_json(&json)
    }
}

/// Serialised model; matrices as row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

/// Estimated hidden states, one column per time index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub states: DMatrix<f64>,
    /// Window length of the Hankel matrix the states came from, if any.
    pub window_length: Option<usize>,
}

impl StateTrajectory {
    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }
}

/// Extended observability matrix `[C; CA; …; CA^{L−1}]`.
pub fn observability_matrix(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    window_length: usize,
) -> Result<DMatrix<f64>> {
    if window_length == 0 {
        return Err(Error::InvalidParameter("window length must be at least 1".into()));
    }
    if !a.is_square() || c.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, C is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let p = c.nrows();
    let mut out = DMatrix::zeros(window_length * p, a.ncols());
    let mut block = c.clone();
    for i in 0..window_length {
        out.rows_mut(i * p, p).copy_from(&block);
        block = &block * a;
    }
    Ok(out)
}

/// Residual sequences of a fitted model: `w_t = x_{t+1} − Âx_t` (columns of
/// `w`) and `v_t = y_t − Ĉx_t` (columns of `v`).
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcEstimate {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub residuals: Residuals,
    /// Set when the state matrix was numerically rank deficient and the
    /// minimum-norm least-squares branch was taken.
    pub rank_deficient: bool,
}

/// Least-squares `Â = X₁ X₀†` (states shifted by one) and `Ĉ = Y X̂†`, with
/// `y_windows` holding the outputs at the same time indices as the states.
pub fn estimate_ac(x: &StateTrajectory, y_windows: &DMatrix<f64>) -> Result<AcEstimate> {
    let states = &x.states;
    let (n, w) = states.shape();
    if n == 0 {
        return Err(Error::InvalidParameter("state dimension is zero".into()));
    }
    if w < n + 1 {
        return Err(Error::InvalidParameter(format!(
            "{w} states are too few to fit a {n}-dimensional transition"
        )));
    }
    if y_windows.ncols() != w {
        return Err(Error::DimensionMismatch(format!(
            "{} outputs for {w} states",
            y_windows.ncols()
        )));
    }
    let past = states.columns(0, w - 1).into_owned();
    let future = states.columns(1, w - 1).into_owned();
    let (past_pinv, past_rank) = pinv(&past, PINV_RCOND)?;
    let (all_pinv, all_rank) = pinv(states, PINV_RCOND)?;
    let a = &future * past_pinv;
    let c = y_windows * all_pinv;
    let residuals = Residuals {
        w: &future - &a * &past,
        v: y_windows - &c * states,
    };
    Ok(AcEstimate {
        a,
        c,
        residuals,
        rank_deficient: past_rank < n || all_rank < n,
    })
}

/// Empirical noise covariances: `Q̂ = Σ wwᵀ / (T−1)` over the `T−1` transition
/// residuals and `R̂ = Σ vvᵀ / T` over the `T` output residuals, symmetrised.
pub fn estimate_qr(residuals: &Residuals) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let nw = residuals.w.ncols();
    let nv = residuals.v.ncols();
    if nw < 2 || nv < 1 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 transition residuals and 1 output residual, got {nw} and {nv}"
        )));
    }
    let q = &residuals.w * residuals.w.transpose() / nw as f64;
    let r = &residuals.v * residuals.v.transpose() / nv as f64;
    Ok((symmetrize(&q), symmetrize(&r)))
}

/// Result of output-only identification.
#[derive(Debug, Clone)]
pub struct OutputOnlyIdentification {
    pub model: StateSpaceModel,
    pub states: StateTrajectory,
    pub decomposition: SpectralDecomposition,
    pub rank_deficient: bool,
}

/// Hankel SVD → states → `Â, Ĉ` → `Q̂, R̂`. `B` and `D` are empty.
pub fn identify_output_only(
    ts: &TimeSeries,
    window_length: usize,
    rank: RankSpec,
) -> Result<OutputOnlyIdentification> {
    let h = block_hankel(ts, window_length)?;
    let decomposition = decompose(&h, rank)?;
    if decomposition.rank == 0 {
        return Err(Error::InvalidParameter(
            "no singular value above threshold; the series is identically zero".into(),
        ));
    }
    let mut states = hankel_states(&decomposition);
    states.window_length = Some(window_length);
    let w = states.len();
    let y_windows = ts.values().rows(0, w).transpose();
    let fit = estimate_ac(&states, &y_windows)?;
    let (q, r) = estimate_qr(&fit.residuals)?;
    let model = StateSpaceModel::output_only(fit.a, fit.c, q, r)?;
    Ok(OutputOnlyIdentification {
        model,
        states,
        decomposition,
        rank_deficient: fit.rank_deficient,
    })
}

/// Removes the row space of `hu` from `hy`:
/// `Hy·(I − Huᵀ(HuHuᵀ)†Hu)`, computed without forming the `W×W` projector.
pub fn project_out_inputs(hy: &DMatrix<f64>, hu: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if hy.ncols() != hu.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "output Hankel has {} columns, input Hankel {}",
            hy.ncols(),
            hu.ncols()
        )));
    }
    let (gram_pinv, _) = pinv(&(hu * hu.transpose()), PINV_RCOND)?;
    Ok(hy - (hy * hu.transpose()) * gram_pinv * hu)
}

/// Result of input-output identification.
#[derive(Debug, Clone)]
pub struct InputIdentification {
    pub model: StateSpaceModel,
    /// Deterministic state trajectory at window starts `0..T−L+1`.
    pub states: StateTrajectory,
    /// SVD of the projected output Hankel matrix (or of the plain output
    /// Hankel matrix on the fallback path).
    pub decomposition: SpectralDecomposition,
    /// Estimated initial state.
    pub x0: DVector<f64>,
    /// Set when the inputs were identically zero and the output-only path
    /// was used instead.
    pub fallback: Option<String>,
}

/// Input-output identification via orthogonal projection of the input
/// Hankel rows.
pub fn identify_with_inputs(
    y: &TimeSeries,
    u: &TimeSeries,
    window_length: usize,
    rank: RankSpec,
) -> Result<InputIdentification> {
    let t = y.len();
    if u.len() != t {
        return Err(Error::DimensionMismatch(format!(
            "{t} outputs but {} inputs",
            u.len()
        )));
    }
    let p = y.channels();
    let m = u.channels();

    if u.values().iter().all(|&v| v == 0.0) {
        let out = identify_output_only(y, window_length, rank)?;
        let n = out.model.n();
        let model = StateSpaceModel::new(
            out.model.a,
            DMatrix::zeros(n, m),
            out.model.c,
            DMatrix::zeros(p, m),
            out.model.q,
            out.model.r,
        )?;
        let x0 = out.states.states.column(0).into_owned();
        return Ok(InputIdentification {
            model,
            states: out.states,
            decomposition: out.decomposition,
            x0,
            fallback: Some("inputs are identically zero; used output-only identification".into()),
        });
    }

    if window_length < 2 {
        return Err(Error::InvalidParameter(
            "input-output identification needs a window length of at least 2".into(),
        ));
    }
    let hy = block_hankel(y, window_length)?;
    let hu = block_hankel(u, window_length)?;
    let projected = project_out_inputs(&hy.data, &hu.data)?;
    let decomposition = decompose_matrix(&projected, rank)?;
    let n = decomposition.rank;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "projected output Hankel matrix has no significant singular value".into(),
        ));
    }
    if (window_length - 1) * p < n {
        return Err(Error::InvalidParameter(format!(
            "window length {window_length} too short to resolve {n} states from {p} outputs"
        )));
    }

    // Shift invariance of the observability basis.
    let gamma = decomposition.observability_basis();
    let rows = (window_length - 1) * p;
    let c = gamma.rows(0, p).into_owned();
    let (upper_pinv, _) = pinv(&gamma.rows(0, rows).into_owned(), PINV_RCOND)?;
    let a = upper_pinv * gamma.rows(p, rows);

    let (x0, b, _) = fit_initial_state_and_inputs(&a, &c, y, u)?;
    let states = propagate_states(&a, &b, &x0, u.values());

    // Θ = [A B; C D] by least squares on the stacked one-step equations.
    let regress = stack_rows(&states.columns(0, t).into_owned(), &u.values().transpose());
    let (reg_pinv, _) = pinv(&regress.columns(0, t - 1).into_owned(), PINV_RCOND)?;
    let ab = states.columns(1, t - 1) * reg_pinv;
    let (reg_all_pinv, _) = pinv(&regress, PINV_RCOND)?;
    let cd = y.values().transpose() * reg_all_pinv;
    let a_hat = ab.columns(0, n).into_owned();
    let b_hat = ab.columns(n, m).into_owned();
    let c_hat = cd.columns(0, n).into_owned();
    let d_hat = cd.columns(n, m).into_owned();

    let residuals = Residuals {
        w: states.columns(1, t - 1) - &ab * regress.columns(0, t - 1),
        v: y.values().transpose() - &cd * &regress,
    };
    let (q, r) = estimate_qr(&residuals)?;
    let model = StateSpaceModel::new(a_hat, b_hat, c_hat, d_hat, q, r)?;

    let w = hy.windows();
    Ok(InputIdentification {
        model,
        states: StateTrajectory {
            states: states.columns(0, w).into_owned(),
            window_length: Some(window_length),
        },
        decomposition,
        x0,
        fallback: None,
    })
}

fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// States `x_0 … x_T` (T+1 columns) of `x_{t+1} = A x_t + B u_t`.
fn propagate_states(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let t = u.nrows();
    let mut states = DMatrix::zeros(a.nrows(), t + 1);
    states.set_column(0, x0);
    for k in 0..t {
        let next = a * states.column(k) + b * u.row(k).transpose();
        states.set_column(k + 1, &next);
    }
    states
}

/// Least squares for `(x₀, B, D)` given `A` and `C`: the outputs are linear
/// in all three, so each parameter's unit response forms one regressor column.
fn fit_initial_state_and_inputs(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    y: &TimeSeries,
    u: &TimeSeries,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (t, p, m, n) = (y.len(), y.channels(), u.channels(), a.nrows());
    let params = n + n * m + p * m;
    let mut design = DMatrix::zeros(t * p, params);

    let mut col = 0;
    for i in 0..n {
        let mut x = DVector::zeros(n);
        x[i] = 1.0;
        for k in 0..t {
            design.view_mut((k * p, col), (p, 1)).copy_from(&(c * &x));
            x = a * x;
        }
        col += 1;
    }
    for j in 0..m {
        for i in 0..n {
            let mut x = DVector::<f64>::zeros(n);
            for k in 0..t {
                design.view_mut((k * p, col), (p, 1)).copy_from(&(c * &x));
                x = a * x;
                x[i] += u.values()[(k, j)];
            }
            col += 1;
        }
    }
    for j in 0..m {
        for i in 0..p {
            for k in 0..t {
                design[(k * p + i, col)] = u.values()[(k, j)];
            }
            col += 1;
        }
    }

    let target = DVector::from_iterator(t * p, y.values().row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()));
    let (design_pinv, _) = pinv(&design, PINV_RCOND)?;
    let theta = design_pinv * target;

    let x0 = theta.rows(0, n).into_owned();
    let b = DMatrix::from_fn(n, m, |i, j| theta[n + j * n + i]);
    let d = DMatrix::from_fn(p, m, |i, j| theta[n + n * m + j * p + i]);
    Ok((x0, b, d))
}

/// Iterates the model for `steps` samples from `x0`. Returns the outputs.
pub fn simulate(
    model: &StateSpaceModel,
    x0: &DVector<f64>,
    inputs: Option<&TimeSeries>,
    steps: usize,
    noise: bool,
    seed: u64,
) -> Result<TimeSeries> {
    simulate_with_states(model, x0, inputs, steps, noise, seed).map(|(y, _)| y)
}

/// Like [`simulate`], also returning the `n × steps` state sequence.
///
/// With noise on, each step draws `v_t` (output noise) then `w_t` (process
/// noise) from one seeded stream, each as a PSD square root of the
/// covariance times standard normals.
pub fn simulate_with_states(
    model: &StateSpaceModel,
    x0: &DVector<f64>,
    inputs: Option<&TimeSeries>,
    steps: usize,
    noise: bool,
    seed: u64,
) -> Result<(TimeSeries, DMatrix<f64>)> {
    let (n, p, m) = (model.n(), model.outputs(), model.m());
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries, model has {n} states",
            x0.len()
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("need at least one step".into()));
    }
    if let Some(u) = inputs {
        if u.channels() != m {
            return Err(Error::DimensionMismatch(format!(
                "inputs have {} channels, model expects {m}",
                u.channels()
            )));
        }
        if u.len() < steps {
            return Err(Error::DimensionMismatch(format!(
                "{} input samples for {steps} steps",
                u.len()
            )));
        }
    }
    let q_sqrt = linalg::psd_sqrt(&model.q);
    let r_sqrt = linalg::psd_sqrt(&model.r);
    let mut rng = NoiseStream::new(seed);

    let mut ys = DMatrix::zeros(steps, p);
    let mut xs = DMatrix::zeros(n, steps);
    let mut x = x0.clone();
    for t in 0..steps {
        let u_t = match inputs {
            Some(u) => u.observation(t),
            None => DVector::zeros(m),
        };
        let mut y_t = &model.c * &x + &model.d * &u_t;
        let mut x_next = &model.a * &x + &model.b * &u_t;
        if noise {
            y_t += &r_sqrt * DVector::from_vec(rng.normals(p));
            x_next += &q_sqrt * DVector::from_vec(rng.normals(n));
        }
        ys.set_row(t, &y_t.transpose());
        xs.set_column(t, &x);
        x = x_next;
    }
    Ok((TimeSeries::new(ys)?, xs))
}

/// Eigenvalues of a square matrix as `(re, im)` pairs.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<(f64, f64)> {
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}
