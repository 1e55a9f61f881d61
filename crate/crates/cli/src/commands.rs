use std::io::Write;
use std::net::SocketAddr;

use hankel_core::linalg::{center_rows, column_means, to_rows};
use hankel_core::metrics::aligned_mse;
use hankel_core::synth::{
    cyclic_schedule, default_stepped_system, GeneratorSpec, SynthOutput,
};
use hankel_core::sysid::eigenvalues;
use hankel_core::trajectory::write_matrix_csv;
use hankel_core::{
    align_embeddings, block_hankel, decompose_matrix, forecast, hankel_embed,
    identify_output_only, identify_with_inputs, kalman_filter_with_inputs, online_forecast_eval,
    pca_embed, rts_smooth, trajectory_matrix, Embedding, EmbeddingSource, ForecastResult,
    OnlineEvalConfig, RankSpec, SpectralDecomposition, StateSpaceModel, StateTrajectory,
    TimeSeries,
};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::args::*;
use crate::error::CliError;
use crate::output::Outputs;
use crate::prep::{check_window, load_embedding, load_series, prepare, rank_spec};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => generate(cli, a),
        Command::Embed(a) => embed(cli, a),
        Command::Identify(a) => identify(cli, a),
        Command::Smooth(a) => smooth(cli, a),
        Command::Forecast(a) => run_forecast(cli, a),
        Command::Compare(a) => compare(cli, a),
        Command::Serve(a) => serve(a),
    }
}

fn csv_err(e: hankel_core::Error) -> CliError {
    CliError::Core(e)
}

fn write_embedding(out: &mut Outputs, stem: &str, e: &Embedding) -> Result<(), CliError> {
    let name = out.name(stem);
    match out.format {
        Format::Csv => out.write(&name, |w| e.write_csv(w).map_err(csv_err)),
        Format::Json => out.json(&name, &e.to_json()),
    }
}

fn default_spec(generator: Generator) -> GeneratorSpec {
    match generator {
        Generator::Ar2 => GeneratorSpec::Ar2 {
            phi1: 0.6,
            phi2: -0.3,
            noise_sd: 1.0,
            length: 1000,
            seed: 0,
        },
        Generator::DoublePeriodic => GeneratorSpec::DoublePeriodic {
            length: 300,
            f1: 1.0 / 3.0,
            f2: 1.0 / 5.0,
            amplitudes: [1.0, 0.5],
            noise_sd: 0.0,
            seed: 0,
        },
        Generator::PeriodicSsm => GeneratorSpec::PeriodicSsm {
            theta: std::f64::consts::TAU / 20.0,
            c: vec![vec![1.0, 0.5]],
            q_sd: 0.05,
            r_sd: 0.3,
            length: 500,
            seed: 0,
        },
        Generator::ExogenousStepped => GeneratorSpec::ExogenousStepped {
            system: default_stepped_system().to_json(),
            schedule: cyclic_schedule(&[vec![1.0], vec![-0.5]], 60, 1200),
            noise_sd: 0.1,
            length: 1200,
            seed: 0,
            train_frac: 0.8,
        },
    }
}

fn override_spec(spec: &mut GeneratorSpec, length: Option<usize>, seed: Option<u64>) {
    let (len, sd, schedule) = match spec {
        GeneratorSpec::Ar2 { length, seed, .. }
        | GeneratorSpec::DoublePeriodic { length, seed, .. }
        | GeneratorSpec::PeriodicSsm { length, seed, .. } => (length, seed, None),
        GeneratorSpec::ExogenousStepped {
            length,
            seed,
            schedule,
            ..
        } => (length, seed, Some(schedule)),
    };
    if let Some(s) = seed {
        *sd = s;
    }
    if let Some(t) = length {
        // a default cyclic schedule follows the new length
        if let Some(schedule) = schedule {
            if *schedule == cyclic_schedule(&[vec![1.0], vec![-0.5]], 60, *len) {
                *schedule = cyclic_schedule(&[vec![1.0], vec![-0.5]], 60, t);
            }
        }
        *len = t;
    }
}

/// `n × T` states as a `T × n` series with columns `x1..xn`.
fn state_series(states: &DMatrix<f64>) -> Result<TimeSeries, CliError> {
    let names = (1..=states.nrows()).map(|i| format!("x{i}")).collect();
    Ok(TimeSeries::with_metadata(states.transpose(), None, Some(names))?)
}

fn generate(cli: &Cli, a: &GenerateArgs) -> Result<(), CliError> {
    let mut spec = match (&a.spec, a.generator) {
        (Some(path), _) => {
            if !path.is_file() {
                return Err(CliError::MissingInput(path.clone()));
            }
            let raw = std::fs::read(path).map_err(|e| CliError::Read {
                path: path.clone(),
                source: e.into(),
            })?;
            serde_json::from_slice(&raw)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(g)) => default_spec(g),
        (None, None) => return Err(CliError::Usage("give --generator or --spec".into())),
    };
    override_spec(&mut spec, a.length, a.seed);
    let SynthOutput {
        series,
        true_states,
        inputs,
        spec,
        split_index,
    } = spec.generate()?;

    let mut out = Outputs::create(&a.output_dir, Format::Csv)?;
    out.write("series.csv", |w| series.write_csv(w).map_err(csv_err))?;
    if let Some(states) = &true_states {
        let ts = state_series(states)?;
        out.write("states.csv", |w| ts.write_csv(w).map_err(csv_err))?;
    }
    if let Some(u) = &inputs {
        out.write("inputs.csv", |w| u.write_csv(w).map_err(csv_err))?;
    }
    out.json("spec.json", &spec)?;
    out.finish(
        cli,
        json!({ "T": series.len(), "D": series.channels(), "split_index": split_index }),
    )
}

/// Decomposition and both embeddings for one parameter set. The subspace
/// form only exists for stride 1.
struct Embeddings {
    decomposition: SpectralDecomposition,
    timecluster: Embedding,
    subspace: Option<Embedding>,
}

fn embed_both(
    series: &TimeSeries,
    window: usize,
    stride: usize,
    rank: RankSpec,
    center: bool,
) -> Result<(hankel_core::TrajectoryMatrix, Embeddings), CliError> {
    let z = trajectory_matrix(series, window, stride)?;
    let (decomposition, subspace) = if stride == 1 {
        let h = block_hankel(series, window)?;
        let (dec, e) = hankel_embed(&h, rank, center)?;
        (dec, Some(e))
    } else {
        let rows = if center {
            center_rows(&z.data, &column_means(&z.data))
        } else {
            z.data.clone()
        };
        (decompose_matrix(&rows.transpose(), rank)?, None)
    };
    if decomposition.rank == 0 {
        return Err(CliError::Failed(
            "no singular value above threshold; the series is identically zero".into(),
        ));
    }
    let timecluster = pca_embed(&z, decomposition.rank, center)?;
    Ok((
        z,
        Embeddings {
            decomposition,
            timecluster,
            subspace,
        },
    ))
}

fn embed(cli: &Cli, a: &EmbedArgs) -> Result<(), CliError> {
    check_window(a.window.window)?;
    let rank = rank_spec(a.window.rank, a.window.epsilon)?;
    if a.stride == 0 {
        return Err(CliError::Usage("stride must be at least 1".into()));
    }
    if a.stride > 1 && a.method == Method::Subspace {
        return Err(CliError::Usage(
            "the subspace method needs stride 1; use --method timecluster".into(),
        ));
    }
    let prepared = prepare(&a.input.input, &a.input.preprocess)?;
    let (z, both) = embed_both(&prepared.series, a.window.window, a.stride, rank, a.center)?;
    let chosen = match a.method {
        Method::Timecluster => &both.timecluster,
        Method::Subspace => both.subspace.as_ref().expect("stride 1 checked above"),
    };

    let mut out = Outputs::create(&a.output.output_dir, a.output.format)?;
    write_embedding(&mut out, "embedding", chosen)?;

    let sv = &both.decomposition.singular_values;
    match out.format {
        Format::Csv => out.write("singular_values.csv", |w| {
            let mut text = String::from("index,sigma,ratio\n");
            for (i, s) in sv.iter().enumerate() {
                text.push_str(&format!("{i},{s:?},{:?}\n", s / sv[0]));
            }
            w.write_all(text.as_bytes()).map_err(|e| CliError::Core(e.into()))
        })?,
        Format::Json => out.json("singular_values.json", sv)?,
    }
    match out.format {
        Format::Csv => out.write("trajectory.csv", |w| write_matrix_csv(&z.data, w).map_err(csv_err))?,
        Format::Json => out.json("trajectory.json", &z.envelope())?,
    }

    let mut summary = json!({
        "windows": z.windows(),
        "rank": both.decomposition.rank,
        "method": a.method,
    });
    if let Some(subspace) = &both.subspace {
        let report = align_embeddings(&both.timecluster, subspace)?;
        summary["align_residual"] = json!(report.residual);
        out.json("comparison.json", &report.to_json())?;
    }
    out.finish(cli, summary)
}

struct Fit {
    model: StateSpaceModel,
    states: StateTrajectory,
    decomposition: SpectralDecomposition,
    inputs: Option<TimeSeries>,
    details: Value,
}

fn fit(series: &TimeSeries, inputs: Option<&std::path::Path>, w: &WindowArgs) -> Result<Fit, CliError> {
    check_window(w.window)?;
    let rank = rank_spec(w.rank, w.epsilon)?;
    match inputs {
        Some(path) => {
            let u = load_series(path)?;
            let id = identify_with_inputs(series, &u, w.window, rank)?;
            Ok(Fit {
                model: id.model,
                states: id.states,
                decomposition: id.decomposition,
                inputs: Some(u),
                details: json!({ "x0": id.x0.as_slice(), "fallback": id.fallback }),
            })
        }
        None => {
            let id = identify_output_only(series, w.window, rank)?;
            Ok(Fit {
                model: id.model,
                states: id.states,
                decomposition: id.decomposition,
                inputs: None,
                details: json!({ "rank_deficient": id.rank_deficient }),
            })
        }
    }
}

fn identify(cli: &Cli, a: &IdentifyArgs) -> Result<(), CliError> {
    let prepared = prepare(&a.input.input, &a.input.preprocess)?;
    let fit = fit(&prepared.series, a.inputs.as_deref(), &a.window)?;
    let mut out = Outputs::create(&a.output.output_dir, a.output.format)?;
    out.json("model.json", &fit.model.to_json())?;
    let states = Embedding::from_states(&fit.states, EmbeddingSource::HankelSvd, a.window.window);
    write_embedding(&mut out, "states", &states)?;
    let mut report = json!({
        "n": fit.model.n(),
        "m": fit.model.m(),
        "singular_values": fit.decomposition.singular_values,
        "eigenvalues": eigenvalues(&fit.model.a),
    });
    if let (Value::Object(r), Value::Object(d)) = (&mut report, fit.details) {
        r.extend(d);
    }
    out.json("identification.json", &report)?;
    out.finish(cli, json!({ "n": fit.model.n() }))
}

fn smooth(cli: &Cli, a: &SmoothArgs) -> Result<(), CliError> {
    let prepared = prepare(&a.input.input, &a.input.preprocess)?;
    let truth = a.truth.as_deref().map(load_series).transpose()?;
    let fit = fit(&prepared.series, a.inputs.as_deref(), &a.window)?;
    let filtered =
        kalman_filter_with_inputs(&fit.model, &prepared.series, fit.inputs.as_ref(), None, None)?;
    let smoothed = rts_smooth(&fit.model, &filtered)?;

    let mut metrics = json!({
        "n": fit.model.n(),
        "used_pseudoinverse": smoothed.used_pseudoinverse,
    });
    if let Some(truth) = truth {
        let t = prepared.series.len();
        if truth.len() != t {
            return Err(CliError::Usage(format!(
                "truth has {} rows, the series {t}",
                truth.len()
            )));
        }
        let truth = truth.values().transpose();
        let mut filt = DMatrix::zeros(fit.model.n(), t);
        for (k, s) in filtered.iter().enumerate() {
            filt.set_column(k, &s.x_filt);
        }
        let w = fit.states.len();
        metrics["aligned_mse"] = json!({
            "smoothed": aligned_mse(&smoothed.states.states, &truth)?,
            "filtered": aligned_mse(&filt, &truth)?,
            "hankel_first_windows": aligned_mse(&fit.states.states, &truth.columns(0, w).into_owned())?,
        });
    }

    let mut out = Outputs::create(&a.output.output_dir, a.output.format)?;
    let e = Embedding::from_states(&smoothed.states, EmbeddingSource::Smoothed, a.window.window);
    write_embedding(&mut out, "smoothed", &e)?;
    out.json("metrics.json", &metrics)?;
    out.finish(cli, json!({ "n": fit.model.n() }))
}

fn run_forecast(cli: &Cli, a: &ForecastArgs) -> Result<(), CliError> {
    if a.horizon == 0 {
        return Err(CliError::Usage("horizon must be at least 1".into()));
    }
    if a.refit_every == 0 {
        return Err(CliError::Usage("refit-every must be at least 1".into()));
    }
    let prepared = prepare(&a.input.input, &a.input.preprocess)?;
    let series = &prepared.series;
    let fit = fit(series, None, &a.window)?;
    let filtered = kalman_filter_with_inputs(&fit.model, series, None, None, None)?;
    let last = filtered
        .last()
        .ok_or_else(|| CliError::Failed("series has no observations".into()))?;
    let raw = forecast(&fit.model, last, a.horizon)?;

    // back through any trailing scale steps
    let outputs = prepared.restore(&TimeSeries::new(raw.predicted_outputs.clone())?)?;
    let spans = prepared.spans(series.channels());
    let result = ForecastResult {
        predicted_outputs: outputs.values().clone(),
        output_covariances: raw
            .output_covariances
            .iter()
            .map(|c| DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * spans[i] * spans[j]))
            .collect(),
        ..raw
    };
    let units = if prepared.invertible() { "original" } else { "preprocessed" };

    let mut metrics = json!({
        "n": fit.model.n(),
        "horizon": a.horizon,
        "start": series.len(),
        "units": units,
    });
    if a.eval {
        let t = series.len();
        let start = a.eval_start.unwrap_or((t / 2).max(a.window.window + 2));
        let config = OnlineEvalConfig {
            window_length: a.window.window,
            rank: rank_spec(a.window.rank, a.window.epsilon)?,
            refit_every: a.refit_every,
            warmup: a.warmup,
        };
        let eval = online_forecast_eval(&config, series, start)?;
        metrics["eval"] = json!({
            "start": eval.start,
            "rmse": eval.rmse,
            "persistence_rmse": eval.persistence_rmse,
            "refits": eval.refits,
            "units": "preprocessed",
        });
    }

    let mut out = Outputs::create(&a.output.output_dir, a.output.format)?;
    match out.format {
        Format::Csv => out.write("forecast.csv", |w| result.write_csv(w).map_err(csv_err))?,
        Format::Json => {
            let mut body = serde_json::to_value(result.to_json()).expect("plain data");
            body["units"] = json!(units);
            body["start"] = json!(series.len());
            out.json("forecast.json", &body)?
        }
    }
    out.json("metrics.json", &metrics)?;
    let mut summary = json!({ "n": fit.model.n() });
    if let Some(e) = metrics.get("eval") {
        summary["eval_rmse"] = e["rmse"].clone();
    }
    out.finish(cli, summary)
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<(), CliError> {
    let report = match (&a.a, &a.b, &a.input) {
        (Some(pa), Some(pb), _) => {
            let ea = load_embedding(pa)?;
            let eb = load_embedding(pb)?;
            align_embeddings(&ea, &eb)?
        }
        (_, _, Some(input)) => {
            let window = a
                .window
                .ok_or_else(|| CliError::Usage("--input needs --window".into()))?;
            check_window(window)?;
            let rank = rank_spec(a.rank, a.epsilon)?;
            let prepared = prepare(input, &a.preprocess)?;
            let (_, both) = embed_both(&prepared.series, window, 1, rank, a.center)?;
            let subspace = both.subspace.expect("stride 1");
            align_embeddings(&both.timecluster, &subspace)?
        }
        _ => return Err(CliError::Usage("give --a and --b, or --input".into())),
    };
    let mut out = Outputs::create(&a.output_dir, Format::Json)?;
    out.json("alignment.json", &report.to_json())?;
    out.finish(
        cli,
        json!({ "residual": report.residual, "rotation": to_rows(&report.rotation) }),
    )
}

fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address {}:{}: {e}", a.host, a.port)))?;
    let config = hankel_service::ServiceConfig {
        data_dir: a.data_dir.clone(),
        allowed_origins: a.allow_origin.clone(),
        static_dir: a.static_dir.clone(),
    };
    let _ = tracing_subscriber::fmt().try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Failed(e.to_string()))?;
    runtime
        .block_on(hankel_service::serve(addr, config))
        .map_err(|e| CliError::Failed(format!("server error: {e}")))
}
