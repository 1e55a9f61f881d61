//! Kalman filtering, RTS smoothing, forecasting and region-entry queries.
//!
//! One filter step, in order:
//!
//! ```text
//! x̂_{t|t-1} = A x̂_{t-1|t-1}
//! P_{t|t-1} = A P_{t-1|t-1} Aᵀ + Q
//! K_t       = P_{t|t-1} Cᵀ (C P_{t|t-1} Cᵀ + R)⁻¹
//! x̂_{t|t}   = x̂_{t|t-1} + K_t (y_t − C x̂_{t|t-1})
//! P_{t|t}   = (I − K_t C) P_{t|t-1}
//! ```
//!
//! The prior `(x̂₀, P₀)` plays the role of `(x̂_{-1|-1}, P_{-1|-1})`, so the
//! first step predicts before it updates. Covariances are symmetrised after
//! every step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize, PINV_RCOND};
use crate::spectral::RankSpec;
use crate::sysid::{identify_output_only, StateSpaceModel, StateTrajectory};
use crate::timeseries::TimeSeries;

/// Filter quantities after processing one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x_pred: DVector<f64>,
    pub p_pred: DMatrix<f64>,
    pub x_filt: DVector<f64>,
    pub p_filt: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// `y_t − C x̂_{t|t-1}`
    pub innovation: DVector<f64>,
}

/// Runs the filter over every observation of `y`.
///
/// Defaults: `x̂₀ = 0`, `P₀ = I`.
pub fn kalman_filter(
    model: &StateSpaceModel,
    y: &TimeSeries,
    x0: Option<&DVector<f64>>,
    p0: Option<&DMatrix<f64>>,
) -> Result<Vec<KalmanState>> {
    kalman_filter_with_inputs(model, y, None, x0, p0)
}

/// [`kalman_filter`] with the `Bu_t` and `Du_t` terms included.
pub fn kalman_filter_with_inputs(
    model: &StateSpaceModel,
    y: &TimeSeries,
    inputs: Option<&TimeSeries>,
    x0: Option<&DVector<f64>>,
    p0: Option<&DMatrix<f64>>,
) -> Result<Vec<KalmanState>> {
    let n = model.n();
    if y.channels() != model.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "series has {} channels, model has {} outputs",
            y.channels(),
            model.outputs()
        )));
    }
    if let Some(u) = inputs {
        if u.channels() != model.m() || u.len() < y.len() {
            return Err(Error::DimensionMismatch(format!(
                "inputs are {}x{}, need at least {}x{}",
                u.len(),
                u.channels(),
                y.len(),
                model.m()
            )));
        }
    }
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut p = p0.cloned().unwrap_or_else(|| DMatrix::identity(n, n));
    if x.len() != n || p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} states and a {}x{} covariance, model has {n} states",
            x.len(),
            p.nrows(),
            p.ncols()
        )));
    }
    let mut out = Vec::with_capacity(y.len());
    let mut u_prev = DVector::zeros(model.m());
    for t in 0..y.len() {
        let u_t = inputs.map(|u| u.observation(t)).unwrap_or_else(|| DVector::zeros(model.m()));
        let step = filter_step(model, &x, &p, &u_prev, &u_t, &y.observation(t), t)?;
        x = step.x_filt.clone();
        p = step.p_filt.clone();
        u_prev = u_t;
        out.push(step);
    }
    Ok(out)
}

/// One predict/update cycle. `u_prev` drives the transition into `t`,
/// `u_t` the feed-through at `t`.
pub fn filter_step(
    model: &StateSpaceModel,
    x_prev: &DVector<f64>,
    p_prev: &DMatrix<f64>,
    u_prev: &DVector<f64>,
    u_t: &DVector<f64>,
    y_t: &DVector<f64>,
    step: usize,
) -> Result<KalmanState> {
    let (a, c) = (&model.a, &model.c);
    let x_pred = a * x_prev + &model.b * u_prev;
    let p_pred = symmetrize(&(a * p_prev * a.transpose() + &model.q));
    let innovation = y_t - c * &x_pred - &model.d * u_t;
    let s = symmetrize(&(c * &p_pred * c.transpose() + &model.r));
    let pct = &p_pred * c.transpose();

    // K = P Cᵀ S⁻¹, i.e. solve S Kᵀ = C P.
    let gain = match s.clone().cholesky() {
        Some(chol) => chol.solve(&pct.transpose()).transpose(),
        None => {
            let (s_pinv, _) = linalg::pinv(&s, PINV_RCOND)?;
            // A singular S is acceptable only while the innovation stays in
            // its range (e.g. exact, noise-free data).
            let leak = &innovation - &s * (&s_pinv * &innovation);
            if leak.norm() > 1e-8 * (1.0 + innovation.norm()) {
                return Err(Error::SingularInnovation { step });
            }
            &pct * s_pinv
        }
    };
    let x_filt = &x_pred + &gain * &innovation;
    let n = model.n();
    // Joseph form: stays positive semidefinite when R ≈ 0 collapses P to
    // roundoff, where (I − KC)P can turn indefinite and blow up the next gain.
    let i_kc = DMatrix::identity(n, n) - &gain * c;
    let p_filt = symmetrize(&(&i_kc * &p_pred * i_kc.transpose() + &gain * &model.r * gain.transpose()));
    Ok(KalmanState {
        x_pred,
        p_pred,
        x_filt,
        p_filt,
        gain,
        innovation,
    })
}

/// Output of the RTS backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTrajectory {
    pub states: StateTrajectory,
    pub covariances: Vec<DMatrix<f64>>,
    /// Set when a predicted covariance was singular and the smoother gain
    /// used a pseudoinverse.
    pub used_pseudoinverse: bool,
}

/// Rauch–Tung–Striebel fixed-interval smoother over a filtered pass.
pub fn rts_smooth(model: &StateSpaceModel, filtered: &[KalmanState]) -> Result<SmoothedTrajectory> {
    let Some(last) = filtered.last() else {
        return Err(Error::InvalidParameter("nothing to smooth: empty filter pass".into()));
    };
    let n = model.n();
    let t = filtered.len();
    let mut states = DMatrix::zeros(n, t);
    let mut covariances = vec![DMatrix::zeros(n, n); t];
    let mut used_pseudoinverse = false;

    let mut xs = last.x_filt.clone();
    let mut ps = last.p_filt.clone();
    states.set_column(t - 1, &xs);
    covariances[t - 1] = ps.clone();

    for k in (0..t - 1).rev() {
        let cur = &filtered[k];
        let next = &filtered[k + 1];
        let cross = &cur.p_filt * model.a.transpose();
        // G = P_{k|k} Aᵀ P_{k+1|k}⁻¹
        let gain = match next.p_pred.clone().cholesky() {
            Some(chol) => chol.solve(&cross.transpose()).transpose(),
            None => {
                used_pseudoinverse = true;
                cross * linalg::pinv(&next.p_pred, PINV_RCOND)?.0
            }
        };
        xs = &cur.x_filt + &gain * (&xs - &next.x_pred);
        ps = symmetrize(&(&cur.p_filt + &gain * (&ps - &next.p_pred) * gain.transpose()));
        states.set_column(k, &xs);
        covariances[k] = ps.clone();
    }
    Ok(SmoothedTrajectory {
        states: StateTrajectory {
            states,
            window_length: None,
        },
        covariances,
        used_pseudoinverse,
    })
}

/// Mean and covariance forecasts for steps `1..=h` ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub horizon: usize,
    /// `h × n`
    pub predicted_states: DMatrix<f64>,
    /// `h × D`
    pub predicted_outputs: DMatrix<f64>,
    pub output_covariances: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastJson {
    pub horizon: usize,
    pub predicted_states: Vec<Vec<f64>>,
    pub predicted_outputs: Vec<Vec<f64>>,
    pub output_covariances: Vec<Vec<Vec<f64>>>,
}

impl ForecastResult {
    pub fn to_json(&self) -> ForecastJson {
        ForecastJson {
            horizon: self.horizon,
            predicted_states: linalg::to_rows(&self.predicted_states),
            predicted_outputs: linalg::to_rows(&self.predicted_outputs),
            output_covariances: self.output_covariances.iter().map(linalg::to_rows).collect(),
        }
    }

    /// CSV with header `step,y_hat_1..y_hat_D,var_1..var_D`; steps are 1-based
    /// offsets from the last observation.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let d = self.predicted_outputs.ncols();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string()];
        header.extend((1..=d).map(|i| format!("y_hat_{i}")));
        header.extend((1..=d).map(|i| format!("var_{i}")));
        w.write_record(&header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        for k in 0..self.horizon {
            let mut rec = vec![(k + 1).to_string()];
            rec.extend(self.predicted_outputs.row(k).iter().map(|v| format!("{v:?}")));
            rec.extend(self.output_covariances[k].diagonal().iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Propagates `x̂_{t|t}` and `P_{t|t}` `h` steps with zero input.
pub fn forecast(model: &StateSpaceModel, last: &KalmanState, horizon: usize) -> Result<ForecastResult> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("forecast horizon must be at least 1".into()));
    }
    let (n, p) = (model.n(), model.outputs());
    let mut x = last.x_filt.clone();
    let mut cov = last.p_filt.clone();
    let mut predicted_states = DMatrix::zeros(horizon, n);
    let mut predicted_outputs = DMatrix::zeros(horizon, p);
    let mut output_covariances = Vec::with_capacity(horizon);
    for k in 0..horizon {
        x = &model.a * x;
        cov = symmetrize(&(&model.a * &cov * model.a.transpose() + &model.q));
        predicted_states.set_row(k, &x.transpose());
        predicted_outputs.set_row(k, &(&model.c * &x).transpose());
        output_covariances.push(symmetrize(&(&model.c * &cov * model.c.transpose() + &model.r)));
    }
    Ok(ForecastResult {
        horizon,
        predicted_states,
        predicted_outputs,
        output_covariances,
    })
}

/// Settings for the rolling one-step-ahead evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineEvalConfig {
    pub window_length: usize,
    pub rank: RankSpec,
    /// Re-identify every this many steps (1 = every step).
    pub refit_every: usize,
    /// After each refit the filter is restarted from the identified state
    /// this many samples back and run forward to the present.
    pub warmup: usize,
}

impl Default for OnlineEvalConfig {
    fn default() -> Self {
        Self {
            window_length: 10,
            rank: RankSpec::Auto,
            refit_every: 1,
            warmup: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineEvalResult {
    /// Index of the first predicted sample.
    pub start: usize,
    /// `(T − start) × D` one-step-ahead predictions `ŷ_{t|t-1}`.
    pub predictions: DMatrix<f64>,
    pub rmse: f64,
    /// RMSE of `ŷ_t = y_{t−1}` over the same samples.
    pub persistence_rmse: f64,
    pub refits: usize,
}

/// Walks forward from `start`, emitting `ŷ_{t|t-1}` before filtering `y_t`,
/// re-identifying the model from `y_0..y_{t-1}` on the configured cadence.
///
/// A refit changes the state basis, so the filter is re-seeded from the new
/// Hankel state at index `T_fit − L − warmup` (clamped at 0) with `P = I` and
/// run over the remaining fitted samples.
pub fn online_forecast_eval(
    config: &OnlineEvalConfig,
    y: &TimeSeries,
    start: usize,
) -> Result<OnlineEvalResult> {
    let t_total = y.len();
    let l = config.window_length;
    if config.refit_every == 0 {
        return Err(Error::InvalidParameter("refit_every must be at least 1".into()));
    }
    if start >= t_total {
        return Err(Error::InvalidParameter(format!(
            "start {start} leaves nothing to predict in {t_total} samples"
        )));
    }
    if start < l + 2 || start < 1 {
        return Err(Error::InvalidParameter(format!(
            "start {start} leaves too little history for window length {l}"
        )));
    }

    let d = y.channels();
    let mut predictions = DMatrix::zeros(t_total - start, d);
    let mut model: Option<StateSpaceModel> = None;
    let mut x = DVector::zeros(0);
    let mut p = DMatrix::zeros(0, 0);
    let mut refits = 0;

    for t in start..t_total {
        if (t - start) % config.refit_every == 0 {
            let history = y.slice(0, t)?;
            let id = identify_output_only(&history, l, config.rank)?;
            let w = id.states.len();
            let seed_idx = w.saturating_sub(1 + config.warmup);
            let n = id.model.n();
            x = id.states.states.column(seed_idx).into_owned();
            p = DMatrix::identity(n, n);
            let none = DVector::zeros(0);
            for s in seed_idx + 1..t {
                let st = filter_step(&id.model, &x, &p, &none, &none, &y.observation(s), s)?;
                x = st.x_filt;
                p = st.p_filt;
            }
            model = Some(id.model);
            refits += 1;
        }
        let m = model.as_ref().expect("fitted on the first iteration");
        let x_pred = &m.a * &x;
        predictions.set_row(t - start, &(&m.c * &x_pred).transpose());
        let none = DVector::zeros(0);
        let st = filter_step(m, &x, &p, &none, &none, &y.observation(t), t)?;
        x = st.x_filt;
        p = st.p_filt;
    }

    let actual = y.values().rows(start, t_total - start);
    let count = ((t_total - start) * d) as f64;
    let rmse = ((&predictions - actual).norm_squared() / count).sqrt();
    let persisted = y.values().rows(start - 1, t_total - start);
    let persistence_rmse = ((persisted - actual).norm_squared() / count).sqrt();
    Ok(OnlineEvalResult {
        start,
        predictions,
        rmse,
        persistence_rmse,
        refits,
    })
}

/// Target set in state (embedding) coordinates. A region with fewer
/// dimensions than the state constrains only the leading coordinates, as
/// shown in a 2-D embedding plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { min: Vec<f64>, max: Vec<f64> },
}

impl Region {
    pub fn dims(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { min, .. } => min.len(),
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let d2: f64 = center.iter().enumerate().map(|(i, c)| (x[i] - c).powi(2)).sum();
                d2 <= radius * radius
            }
            Region::Box { min, max } => {
                (0..min.len()).all(|i| x[i] >= min[i] && x[i] <= max[i])
            }
        }
    }

    fn validate(&self, state_dim: usize) -> Result<()> {
        let dims = self.dims();
        if dims == 0 || dims > state_dim {
            return Err(Error::DimensionMismatch(format!(
                "region has {dims} dimensions, state has {state_dim}"
            )));
        }
        match self {
            Region::Ball { radius, .. } if radius.is_nan() || *radius < 0.0 => {
                Err(Error::InvalidParameter(format!("radius {radius} must be non-negative")))
            }
            Region::Box { min, max } if min.len() != max.len() => Err(Error::DimensionMismatch(
                "box min and max differ in length".into(),
            )),
            Region::Box { min, max } if min.iter().zip(max).any(|(a, b)| a > b) => {
                Err(Error::InvalidParameter("box min exceeds max".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Smallest `k` in `1..=cap` with the mean forecast `A^k x̂_{t|t}` inside the
/// region, or `None`.
pub fn next_region_entry(
    model: &StateSpaceModel,
    last: &KalmanState,
    region: &Region,
    cap: usize,
) -> Result<Option<usize>> {
    if cap < 1 {
        return Err(Error::InvalidParameter("horizon cap must be at least 1".into()));
    }
    region.validate(model.n())?;
    let mut x = last.x_filt.clone();
    for k in 1..=cap {
        x = &model.a * x;
        if region.contains(&x) {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_sym_eigenvalue;
    use crate::rng::NoiseStream;
    use crate::sysid::simulate_with_states;
    use std::f64::consts::TAU;

    fn scalar(a: f64, q: f64, r: f64) -> StateSpaceModel {
        StateSpaceModel::output_only(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, r),
        )
        .unwrap()
    }

    fn rotation(theta: f64, q: f64, r: f64) -> StateSpaceModel {
        StateSpaceModel::output_only(
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::identity(2, 2) * q,
            DMatrix::identity(1, 1) * r,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_scalar_pass_through() {
        let m = scalar(1.0, 0.0, 0.0);
        let y = TimeSeries::from_column(&[2.5; 8]).unwrap();
        let x0 = DVector::from_vec(vec![2.5]);
        let states = kalman_filter(&m, &y, Some(&x0), None).unwrap();
        for s in &states {
            assert_eq!(s.x_filt[0], 2.5);
        }
    }

    #[test]
    fn inconsistent_exact_model_errors() {
        let m = scalar(1.0, 0.0, 0.0);
        let y = TimeSeries::from_column(&[1.0, 2.0, 3.0]).unwrap();
        let err = kalman_filter(&m, &y, None, None).unwrap_err();
        assert!(matches!(err, Error::SingularInnovation { step: 1 }));
        assert!(err.to_string().contains("regularising R"));
    }

    #[test]
    fn huge_r_ignores_measurements() {
        let m = scalar(1.0, 0.0, 1e12);
        let y = TimeSeries::from_column(&[5.0, -3.0, 8.0, 1.0, 4.0]).unwrap();
        for s in kalman_filter(&m, &y, None, None).unwrap() {
            assert!((s.x_filt[0] - s.x_pred[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn scalar_riccati_fixed_point() {
        // oracle: bisection on f(P) = P − (P+Q) + (P+Q)²/(P+Q+R) for P_{t|t}
        let (q, r) = (1.0, 1.0);
        let f = |p: f64| {
            let pp = p + q;
            pp - pp * pp / (pp + r) - p
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let fixed = 0.5 * (lo + hi);
        let m = scalar(1.0, q, r);
        let mut rng = NoiseStream::new(1);
        let y = TimeSeries::from_column(&rng.normals(60)).unwrap();
        let p0 = DMatrix::from_element(1, 1, 1.0);
        let states = kalman_filter(&m, &y, None, Some(&p0)).unwrap();
        assert!((states[49].p_filt[(0, 0)] - fixed).abs() < 1e-6);
        assert!((fixed - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn exact_model_tracks_true_states() {
        let theta = TAU / 12.0;
        let m = rotation(theta, 0.0, 0.0);
        let x0 = DVector::from_vec(vec![1.0, 0.3]);
        let (y, truth) = simulate_with_states(&m, &x0, None, 100, false, 0).unwrap();
        let states = kalman_filter(&m, &y, None, None).unwrap();
        // after two observations the state is determined
        for (t, s) in states.iter().enumerate().skip(1) {
            assert!((&s.x_filt - truth.column(t)).amax() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn covariances_stay_psd() {
        let m = rotation(0.4, 0.05, 0.5);
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let (y, _) = simulate_with_states(&m, &x0, None, 300, true, 4).unwrap();
        for s in kalman_filter(&m, &y, None, None).unwrap() {
            assert!(min_sym_eigenvalue(&s.p_pred) >= -1e-10);
            assert!(min_sym_eigenvalue(&s.p_filt) >= -1e-10);
            assert_eq!(s.p_filt, s.p_filt.transpose());
        }
    }

    #[test]
    fn prefix_causality() {
        let m = rotation(0.4, 0.05, 0.5);
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let (y, _) = simulate_with_states(&m, &x0, None, 120, true, 5).unwrap();
        let full = kalman_filter(&m, &y, None, None).unwrap();
        for cut in [1, 17, 60, 119] {
            let part = kalman_filter(&m, &y.slice(0, cut).unwrap(), None, None).unwrap();
            assert_eq!(&full[..cut], &part[..]);
        }
    }

    #[test]
    fn smoother_base_cases() {
        let m = scalar(1.0, 0.0, 0.0);
        let y = TimeSeries::from_column(&[3.0; 10]).unwrap();
        let filtered = kalman_filter(&m, &y, None, None).unwrap();
        let smoothed = rts_smooth(&m, &filtered).unwrap();
        for (k, s) in filtered.iter().enumerate() {
            assert!((smoothed.states.states[(0, k)] - s.x_filt[0]).abs() < 1e-10);
        }

        // exact prior, no noise anywhere
        let rot = rotation(0.3, 0.0, 0.0);
        let x0 = DVector::from_vec(vec![0.7, -0.2]);
        let (y, _) = simulate_with_states(&rot, &x0, None, 30, false, 0).unwrap();
        let prior = &rot.a.transpose() * &x0;
        let filtered =
            kalman_filter(&rot, &y, Some(&prior), Some(&DMatrix::zeros(2, 2))).unwrap();
        let smoothed = rts_smooth(&rot, &filtered).unwrap();
        for (k, s) in filtered.iter().enumerate() {
            assert!((smoothed.states.states.column(k) - &s.x_filt).amax() < 1e-10);
        }

        let one = kalman_filter(&scalar(0.9, 0.1, 0.2), &TimeSeries::from_column(&[1.0]).unwrap(), None, None)
            .unwrap();
        let s = rts_smooth(&scalar(0.9, 0.1, 0.2), &one).unwrap();
        assert_eq!(s.states.states[(0, 0)], one[0].x_filt[0]);
        assert!(rts_smooth(&scalar(0.9, 0.1, 0.2), &[]).is_err());
    }

    #[test]
    fn smoother_beats_filter_with_true_model() {
        let m = rotation(TAU / 20.0, 0.01, 0.25);
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let (y, truth) = simulate_with_states(&m, &x0, None, 400, true, 8).unwrap();
        let filtered = kalman_filter(&m, &y, Some(&x0), None).unwrap();
        let smoothed = rts_smooth(&m, &filtered).unwrap();
        let mse = |k: usize, est: &DVector<f64>| (est - truth.column(k)).norm_squared();
        let f: f64 = filtered.iter().enumerate().map(|(k, s)| mse(k, &s.x_filt)).sum();
        let s: f64 = (0..400).map(|k| mse(k, &smoothed.states.states.column(k).into_owned())).sum();
        assert!(s < f, "smoothed {s} filtered {f}");
    }

    fn state_at(x: &[f64]) -> KalmanState {
        let n = x.len();
        KalmanState {
            x_pred: DVector::from_row_slice(x),
            p_pred: DMatrix::identity(n, n),
            x_filt: DVector::from_row_slice(x),
            p_filt: DMatrix::zeros(n, n),
            gain: DMatrix::zeros(n, 1),
            innovation: DVector::zeros(1),
        }
    }

    #[test]
    fn forecast_stationary_and_rotation() {
        let still = StateSpaceModel::output_only(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let f = forecast(&still, &state_at(&[0.4, -1.0]), 5).unwrap();
        for k in 0..5 {
            assert_eq!(f.predicted_states.row(k).iter().copied().collect::<Vec<_>>(), vec![0.4, -1.0]);
        }
        assert!(forecast(&still, &state_at(&[0.4, -1.0]), 0).is_err());

        let period = 16;
        let m = rotation(TAU / period as f64, 0.0, 0.0);
        let last = state_at(&[0.8, 0.6]);
        let f = forecast(&m, &last, period).unwrap();
        assert!((f.predicted_outputs[(period - 1, 0)] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn forecast_uncertainty_grows() {
        let m = rotation(0.5, 0.1, 0.2);
        let mut last = state_at(&[1.0, 0.0]);
        last.p_filt = DMatrix::identity(2, 2) * 0.05;
        let f = forecast(&m, &last, 30).unwrap();
        let traces: Vec<f64> = f.output_covariances.iter().map(|c| c.trace()).collect();
        assert!(traces.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        for c in &f.output_covariances {
            assert!(min_sym_eigenvalue(c) >= -1e-10);
        }
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("step,y_hat_1,var_1\n1,"));
    }

    #[test]
    fn region_entry() {
        let still = StateSpaceModel::output_only(
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let here = Region::Ball { center: vec![1.0, 1.0], radius: 0.1 };
        assert_eq!(next_region_entry(&still, &state_at(&[1.0, 1.0]), &here, 10).unwrap(), Some(1));
        assert!(next_region_entry(&still, &state_at(&[1.0, 1.0]), &here, 0).is_err());

        let period = 24;
        let m = rotation(TAU / period as f64, 0.0, 0.0);
        let antipode = Region::Ball { center: vec![-1.0, 0.0], radius: 0.05 };
        let k = next_region_entry(&m, &state_at(&[1.0, 0.0]), &antipode, 100).unwrap();
        assert_eq!(k, Some(period / 2));

        let far = Region::Box { min: vec![3.0, 3.0], max: vec![4.0, 4.0] };
        assert_eq!(next_region_entry(&m, &state_at(&[1.0, 0.0]), &far, 500).unwrap(), None);

        let bad = Region::Ball { center: vec![0.0; 3], radius: 1.0 };
        assert!(next_region_entry(&m, &state_at(&[1.0, 0.0]), &bad, 5).is_err());

        let json: Region = serde_json::from_str(r#"{"min":[0,0],"max":[1,1]}"#).unwrap();
        assert!(matches!(json, Region::Box { .. }));
        let json: Region = serde_json::from_str(r#"{"center":[0,0],"radius":1}"#).unwrap();
        assert!(matches!(json, Region::Ball { .. }));
    }

    #[test]
    fn online_eval_sinusoid_and_noise() {
        let y: Vec<f64> = (0..400).map(|t| (TAU * t as f64 / 25.0).sin() + 0.5).collect();
        let cfg = OnlineEvalConfig { window_length: 8, ..Default::default() };
        let res = online_forecast_eval(&cfg, &TimeSeries::from_column(&y).unwrap(), 200).unwrap();
        assert!(res.rmse < 1e-6, "{}", res.rmse);
        assert!(res.persistence_rmse > 0.1);
        assert_eq!(res.refits, 200);

        let mut rng = NoiseStream::new(31);
        let noise = TimeSeries::from_column(&rng.normals(600)).unwrap();
        let cfg = OnlineEvalConfig {
            window_length: 6,
            rank: RankSpec::Threshold(0.5),
            refit_every: 10,
            warmup: 50,
        };
        let res = online_forecast_eval(&cfg, &noise, 300).unwrap();
        assert!(res.rmse <= 1.1 * res.persistence_rmse, "{} vs {}", res.rmse, res.persistence_rmse);
        assert_eq!(res.refits, 30);

        assert!(online_forecast_eval(&cfg, &noise, 5).is_err());
        assert!(online_forecast_eval(&cfg, &noise, 600).is_err());
    }
}
