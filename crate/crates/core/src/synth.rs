//! Seeded generators for synthetic series with known ground truth.
//!
//! Every generator is a pure function of its parameters and seed. Noise is
//! drawn from [`NoiseStream`](crate::rng::NoiseStream). State-space generators
//! keep the true hidden states (`n × T`, one column per sample) so estimates
//! can be scored against them.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows};
use crate::rng::NoiseStream;
use crate::sysid::{simulate_with_states, ModelJson, StateSpaceModel};
use crate::timeseries::TimeSeries;

/// Generator parameters, serialised as the sidecar of a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Ar2 {
        phi1: f64,
        phi2: f64,
        noise_sd: f64,
        #[serde(rename = "T")]
        length: usize,
        seed: u64,
    },
    DoublePeriodic {
        #[serde(rename = "T")]
        length: usize,
        f1: f64,
        f2: f64,
        amplitudes: [f64; 2],
        noise_sd: f64,
        seed: u64,
    },
    PeriodicSsm {
        theta: f64,
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
        q_sd: f64,
        r_sd: f64,
        #[serde(rename = "T")]
        length: usize,
        seed: u64,
    },
    ExogenousStepped {
        system: ModelJson,
        schedule: Vec<StepSegment>,
        noise_sd: f64,
        #[serde(rename = "T")]
        length: usize,
        seed: u64,
        train_frac: f64,
    },
}

impl GeneratorSpec {
    /// Runs the generator this spec describes.
    pub fn generate(&self) -> Result<SynthOutput> {
        match self {
            GeneratorSpec::Ar2 {
                phi1,
                phi2,
                noise_sd,
                length,
                seed,
            } => gen_ar2(*phi1, *phi2, *noise_sd, *length, *seed),
            GeneratorSpec::DoublePeriodic {
                length,
                f1,
                f2,
                amplitudes,
                noise_sd,
                seed,
            } => gen_double_periodic(*length, *f1, *f2, *amplitudes, *noise_sd, *seed),
            GeneratorSpec::PeriodicSsm {
                theta,
                c,
                q_sd,
                r_sd,
                length,
                seed,
            } => {
                let c = from_rows(c, 2)?;
                gen_periodic_ssm(*theta, &c, *q_sd, *r_sd, *length, *seed)
            }
            GeneratorSpec::ExogenousStepped {
                system,
                schedule,
                noise_sd,
                length,
                seed,
                train_frac,
            } => gen_exogenous_stepped(
                &StateSpaceModel::from_json(system)?,
                schedule,
                *noise_sd,
                *length,
                *seed,
                *train_frac,
            ),
        }
    }
}

/// A generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub series: TimeSeries,
    pub true_states: Option<DMatrix<f64>>,
    pub inputs: Option<TimeSeries>,
    pub spec: GeneratorSpec,
    /// First test sample of a train/test split, when the generator defines one.
    pub split_index: Option<usize>,
}

/// Input held at `level` on samples `start..end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSegment {
    pub start: usize,
    pub end: usize,
    pub level: Vec<f64>,
}

/// Cycles through `levels`, switching every `period` samples, up to `length`.
pub fn cyclic_schedule(levels: &[Vec<f64>], period: usize, length: usize) -> Vec<StepSegment> {
    if levels.is_empty() || period == 0 {
        return Vec::new();
    }
    (0..length)
        .step_by(period)
        .enumerate()
        .map(|(k, start)| StepSegment {
            start,
            end: (start + period).min(length),
            level: levels[k % levels.len()].clone(),
        })
        .collect()
}

/// Expands a schedule to an input series. Segments must tile `[0, length)`
/// in order, with no gap or overlap, and agree on the input dimension.
pub fn schedule_inputs(schedule: &[StepSegment], length: usize) -> Result<TimeSeries> {
    let m = schedule
        .first()
        .map(|s| s.level.len())
        .ok_or_else(|| Error::InvalidParameter("empty step schedule".into()))?;
    if m == 0 {
        return Err(Error::InvalidParameter("step level has no entries".into()));
    }
    let mut u = DMatrix::zeros(length, m);
    let mut cursor = 0;
    for seg in schedule {
        if seg.start != cursor {
            return Err(Error::InvalidParameter(format!(
                "step schedule has a gap or overlap at sample {cursor}"
            )));
        }
        if seg.end <= seg.start {
            return Err(Error::InvalidParameter(format!(
                "empty step segment at sample {}",
                seg.start
            )));
        }
        if seg.level.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "step level has {} entries, expected {m}",
                seg.level.len()
            )));
        }
        for t in seg.start..seg.end.min(length) {
            for (k, &v) in seg.level.iter().enumerate() {
                u[(t, k)] = v;
            }
        }
        cursor = seg.end;
    }
    if cursor < length {
        return Err(Error::InvalidParameter(format!(
            "step schedule ends at {cursor}, series has {length} samples"
        )));
    }
    TimeSeries::new(u)
}

fn check_noise(name: &str, sd: f64) -> Result<()> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and non-negative, got {sd}"
        )));
    }
    Ok(())
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// AR(2) process `y_t = φ₁y_{t−1} + φ₂y_{t−2} + σε_t`, started from
/// `(y_{−1}, y_0) = (0, 1)`. True states are the companion pairs
/// `[y_t, y_{t−1}]`.
pub fn gen_ar2(phi1: f64, phi2: f64, noise_sd: f64, length: usize, seed: u64) -> Result<SynthOutput> {
    if !(phi2.abs() < 1.0 && phi1 + phi2 < 1.0 && phi2 - phi1 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "AR(2) coefficients ({phi1}, {phi2}) are not stationary"
        )));
    }
    if length < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 samples, got {length}"
        )));
    }
    check_noise("noise_sd", noise_sd)?;
    let mut rng = NoiseStream::new(seed);
    let mut states = DMatrix::zeros(2, length);
    let mut y = vec![0.0; length];
    let (mut prev, mut cur) = (0.0, 1.0);
    for t in 0..length {
        if t > 0 {
            let next = phi1 * cur + phi2 * prev + noise_sd * rng.normal();
            prev = cur;
            cur = next;
        }
        y[t] = cur;
        states[(0, t)] = cur;
        states[(1, t)] = prev;
    }
    Ok(SynthOutput {
        series: TimeSeries::from_column(&y)?,
        true_states: Some(states),
        inputs: None,
        spec: GeneratorSpec::Ar2 {
            phi1,
            phi2,
            noise_sd,
            length,
            seed,
        },
        split_index: None,
    })
}

fn integer_period(f: f64) -> Option<usize> {
    let p = 1.0 / f;
    ((p - p.round()).abs() < 1e-9).then(|| p.round() as usize)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Sum of two cosines `a₁cos(2πf₁t) + a₂cos(2πf₂t)` plus white observation
/// noise. True states are two rotation blocks
/// `[a₁cos ω₁t, a₁sin ω₁t, a₂cos ω₂t, a₂sin ω₂t]`.
///
/// The series must cover two joint periods: `2·lcm(1/f₁, 1/f₂)` when both
/// periods are whole numbers, otherwise twice the longer period rounded up.
pub fn gen_double_periodic(
    length: usize,
    f1: f64,
    f2: f64,
    amplitudes: [f64; 2],
    noise_sd: f64,
    seed: u64,
) -> Result<SynthOutput> {
    for f in [f1, f2] {
        if !(f > 0.0 && f <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "frequency {f} is outside (0, 0.5]"
            )));
        }
    }
    check_noise("noise_sd", noise_sd)?;
    let joint = match (integer_period(f1), integer_period(f2)) {
        (Some(p1), Some(p2)) => p1 / gcd(p1, p2) * p2,
        _ => (1.0 / f1.min(f2)).ceil() as usize,
    };
    if length < 2 * joint {
        return Err(Error::InvalidParameter(format!(
            "need at least {} samples for two joint periods, got {length}",
            2 * joint
        )));
    }
    let mut rng = NoiseStream::new(seed);
    let mut states = DMatrix::zeros(4, length);
    let mut y = vec![0.0; length];
    for t in 0..length {
        for (block, (f, a)) in [(f1, amplitudes[0]), (f2, amplitudes[1])].into_iter().enumerate() {
            let (s, c) = (TAU * f * t as f64).sin_cos();
            states[(2 * block, t)] = a * c;
            states[(2 * block + 1, t)] = a * s;
        }
        y[t] = states[(0, t)] + states[(2, t)] + noise_sd * rng.normal();
    }
    Ok(SynthOutput {
        series: TimeSeries::from_column(&y)?,
        true_states: Some(states),
        inputs: None,
        spec: GeneratorSpec::DoublePeriodic {
            length,
            f1,
            f2,
            amplitudes,
            noise_sd,
            seed,
        },
        split_index: None,
    })
}

/// Two-state rotation system `x_{t+1} = R(θ)x_t + w_t`, `y_t = Cx_t + v_t`
/// with `Q = q_sd²I`, `R = r_sd²I` and `x_0 = [1, 0]`.
pub fn gen_periodic_ssm(
    theta: f64,
    c: &DMatrix<f64>,
    q_sd: f64,
    r_sd: f64,
    length: usize,
    seed: u64,
) -> Result<SynthOutput> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!(
            "rotation angle must lie in (0, π), got {theta}"
        )));
    }
    if c.ncols() != 2 || c.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "C must be p×2, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    check_noise("q_sd", q_sd)?;
    check_noise("r_sd", r_sd)?;
    let p = c.nrows();
    let model = StateSpaceModel::output_only(
        rotation(theta),
        c.clone(),
        DMatrix::identity(2, 2) * q_sd * q_sd,
        DMatrix::identity(p, p) * r_sd * r_sd,
    )?;
    let x0 = DVector::from_row_slice(&[1.0, 0.0]);
    let noisy = q_sd > 0.0 || r_sd > 0.0;
    let (series, states) = simulate_with_states(&model, &x0, None, length, noisy, seed)?;
    Ok(SynthOutput {
        series,
        true_states: Some(states),
        inputs: None,
        spec: GeneratorSpec::PeriodicSsm {
            theta,
            c: to_rows(c),
            q_sd,
            r_sd,
            length,
            seed,
        },
        split_index: None,
    })
}

/// The stable two-state, one-input system used as the default stepped-input
/// analog: `A = 0.9·R(0.35)`, `B = [1, 0.5]ᵀ`, `C = [1, −0.3]`, `D = 0.2`.
pub fn default_stepped_system() -> StateSpaceModel {
    StateSpaceModel::new(
        rotation(0.35) * 0.9,
        DMatrix::from_column_slice(2, 1, &[1.0, 0.5]),
        DMatrix::from_row_slice(1, 2, &[1.0, -0.3]),
        DMatrix::from_element(1, 1, 0.2),
        DMatrix::zeros(2, 2),
        DMatrix::zeros(1, 1),
    )
    .expect("static dimensions")
}

/// Simulates `system` from `x_0 = 0` under a piecewise-constant input, with
/// white observation noise of standard deviation `noise_sd` on every output.
/// The system's own `Q` and `R` are ignored. `split_index = ⌊train_frac·T⌋`.
pub fn gen_exogenous_stepped(
    system: &StateSpaceModel,
    schedule: &[StepSegment],
    noise_sd: f64,
    length: usize,
    seed: u64,
    train_frac: f64,
) -> Result<SynthOutput> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    check_noise("noise_sd", noise_sd)?;
    let inputs = schedule_inputs(schedule, length)?;
    if inputs.channels() != system.m() {
        return Err(Error::DimensionMismatch(format!(
            "schedule has {} inputs, system expects {}",
            inputs.channels(),
            system.m()
        )));
    }
    let (n, p) = (system.n(), system.outputs());
    let model = StateSpaceModel::new(
        system.a.clone(),
        system.b.clone(),
        system.c.clone(),
        system.d.clone(),
        DMatrix::zeros(n, n),
        DMatrix::identity(p, p) * noise_sd * noise_sd,
    )?;
    let x0 = DVector::zeros(n);
    let (series, states) =
        simulate_with_states(&model, &x0, Some(&inputs), length, noise_sd > 0.0, seed)?;
    Ok(SynthOutput {
        series,
        true_states: Some(states),
        inputs: Some(inputs),
        spec: GeneratorSpec::ExogenousStepped {
            system: system.to_json(),
            schedule: schedule.to_vec(),
            noise_sd,
            length,
            seed,
            train_frac,
        },
        split_index: Some((train_frac * length as f64).floor() as usize),
    })
}
