//! Command-line front end.
//!
//! Five subcommands cover the identification pipeline end to end:
//! `simulate` writes datasets, `identify` fits models, `evaluate` scores
//! a fit and emits plot data, `predict` writes predicted outputs, and
//! `sweep` reruns identification across a noise grid. Every command is
//! deterministic given its flags, never modifies its inputs, and writes
//! output files atomically.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 divergence-degraded result,
//! 4 validation failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::em::{best_of_restarts_with_progress, EmReport, IterationRecord, RestartRun};
use crate::error::Error;
use crate::io::config::{resolve_out_dir, RunConfig};
use crate::io::{
    atomic_write, read_dataset_csv, write_dataset_csv, write_error_csv, write_modes_csv,
    write_overlay_csv, write_predictions_csv,
};
use crate::metrics::{evaluate_predictions, EvalResult};
use crate::mode::WindowConfig;
use crate::model::{load_model, save_model, Dataset, SwitchingModel, FORMAT_VERSION};
use crate::predict::{one_step, rollout_on, Prediction};
use crate::sim::{simulate_benchmark, simulate_model, Benchmark, BenchmarkSpec, InputLaw};
use crate::sweep::{run_noise_sweep, SweepConfig, TrajectoryScore, DEFAULT_NOISE_GRID};

#[derive(Parser)]
#[command(
    name = "switchid",
    version,
    about = "Identify switching nonlinear state-space models from input/output data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a dataset from the built-in benchmark or a saved model.
    Simulate(SimulateArgs),
    /// Fit a switching model to a dataset (EM with restarts).
    Identify(IdentifyArgs),
    /// Score a fitted model on a dataset and emit plot data.
    Evaluate(EvaluateArgs),
    /// Write model predictions along a dataset or fresh trajectories.
    Predict(PredictArgs),
    /// Re-identify the benchmark across a noise grid and summarize.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Built-in generator ("two-mode").
    #[arg(long, default_value_t = Benchmark::TwoMode, conflicts_with = "model")]
    pub benchmark: Benchmark,
    /// Simulate from this saved model instead of the benchmark.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Trajectory length.
    #[arg(long, default_value_t = 1000)]
    pub t: usize,
    /// Noise variance for the benchmark; noise scale (default 1.0) when
    /// simulating from a model, which carries its own covariances.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (default "<out-dir>/dataset.csv").
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output directory (default "$SWITCHID_OUT_DIR" or ".").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct IdentifyArgs {
    /// Dataset CSV to fit.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// TOML run configuration; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of modes.
    #[arg(long)]
    pub k: Option<usize>,
    /// Moving-window length for mode decoding.
    #[arg(long)]
    pub tw: Option<usize>,
    /// Maximum EM iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Filter sweeps per parameter update.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent restarts; the lowest-cost run wins.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// State dimension of the fitted submodels.
    #[arg(long)]
    pub nx: Option<usize>,
    /// Hidden-layer widths, comma separated (e.g. "6" or "8,8").
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Output directory (default "$SWITCHID_OUT_DIR" or ".").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Stream per-iteration progress as JSON lines on stderr.
    #[arg(long)]
    pub progress: bool,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Fitted model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV to score against.
    #[arg(long)]
    pub data: PathBuf,
    /// Moving-window length for mode decoding.
    #[arg(long, default_value_t = 3)]
    pub tw: usize,
    /// Also score free-run rollout predictions (reported separately).
    #[arg(long)]
    pub rollout: bool,
    /// Output directory (default "$SWITCHID_OUT_DIR" or ".").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Fitted model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV to predict along.
    #[arg(long, conflicts_with = "batch")]
    pub data: Option<PathBuf>,
    /// Free-run rollout instead of one-step-ahead predictions.
    #[arg(long)]
    pub rollout: bool,
    /// Moving-window length for mode decoding.
    #[arg(long, default_value_t = 3)]
    pub tw: usize,
    /// Predict N freshly simulated trajectories (seeds seed..seed+N-1)
    /// and write an aggregate summary.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Batch generator; omit to simulate from the model itself.
    #[arg(long)]
    pub benchmark: Option<Benchmark>,
    /// Batch trajectory length.
    #[arg(long, default_value_t = 1000)]
    pub t: usize,
    /// Batch noise: variance for the benchmark generator, scale for the
    /// model generator.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path for a single prediction
    /// (default "<out-dir>/predictions.csv").
    #[arg(long, conflicts_with = "batch")]
    pub out: Option<PathBuf>,
    /// Output directory (default "$SWITCHID_OUT_DIR" or ".").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Noise variances, comma separated (default "1e-3,1e-2,1e-1,2e-1").
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    /// Training trajectory length.
    #[arg(long, default_value_t = 1000)]
    pub t: usize,
    /// Evaluation trajectory length (default: same as --t).
    #[arg(long)]
    pub eval_t: Option<usize>,
    /// Evaluation trajectories per noise level.
    #[arg(long, default_value_t = 10)]
    pub trajectories: usize,
    /// TOML run configuration for the identification options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub tw: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Output directory (default "$SWITCHID_OUT_DIR" or ".").
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Either a user mistake on the command line (exit 1) or a library error
/// (exit code from [`Error::exit_code`]).
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult = std::result::Result<i32, CliError>;

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Identify(a) => cmd_identify(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Lib(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Sidecar record written next to every simulated dataset.
#[derive(Serialize)]
struct DatasetMeta<'a> {
    format_version: u32,
    generator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a Path>,
    t: usize,
    noise: f64,
    seed: u64,
    n_u: usize,
    n_y: usize,
    has_modes: bool,
    has_states: bool,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> crate::error::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invalid(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let (ds, generator) = match &a.model {
        Some(path) => {
            let model = load_model(path)?;
            let scale = a.noise.unwrap_or(1.0);
            let ds = simulate_model(&model, a.t, a.seed, InputLaw::default(), scale)?;
            (ds, "model".to_string())
        }
        None => {
            let spec = BenchmarkSpec {
                t: a.t,
                noise_var: a.noise.unwrap_or(1e-3),
                seed: a.seed,
                input: InputLaw::default(),
            };
            (simulate_benchmark(a.benchmark, &spec)?, a.benchmark.to_string())
        }
    };

    let out = a
        .out
        .unwrap_or_else(|| resolve_out_dir(a.out_dir.as_deref()).join("dataset.csv"));
    write_dataset_csv(&ds, &out)?;
    let meta = DatasetMeta {
        format_version: FORMAT_VERSION,
        generator,
        model: a.model.as_deref(),
        t: a.t,
        noise: a.noise.unwrap_or(if a.model.is_some() { 1.0 } else { 1e-3 }),
        seed: a.seed,
        n_u: ds.n_u(),
        n_y: ds.n_y(),
        has_modes: ds.true_modes.is_some(),
        has_states: ds.true_states.is_some(),
    };
    let meta_path = out.with_extension("meta.json");
    write_json(&meta, &meta_path)?;
    println!(
        "wrote {} ({} steps, noise {}, seed {}) and {}",
        out.display(),
        ds.len(),
        meta.noise,
        a.seed,
        meta_path.display()
    );
    Ok(0)
}

/// The identification report written by `identify`: restart bookkeeping
/// around the winning run's per-iteration history.
#[derive(Serialize)]
struct IdentifyReport<'a> {
    k: usize,
    restarts: usize,
    best_restart: usize,
    runs: &'a [RestartRun],
    failures: &'a [(usize, String)],
    report: &'a EmReport,
}

fn progress_line(restart: usize, record: &IterationRecord) {
    if let Ok(serde_json::Value::Object(mut map)) = serde_json::to_value(record) {
        map.insert("restart".into(), serde_json::json!(restart));
        // Emit in one call so parallel restarts cannot interleave a line.
        eprintln!("{}", serde_json::Value::Object(map));
    }
}

fn cmd_identify(a: IdentifyArgs) -> CliResult {
    let flags = RunConfig {
        dataset: a.data,
        out_dir: a.out_dir,
        k: a.k,
        restarts: a.restarts,
        seed: a.seed,
        iters: a.iters,
        t_w: a.tw,
        epochs: a.epochs,
        n_x: a.nx,
        hidden: a.hidden,
        ..RunConfig::default()
    };
    let file = match &a.config {
        Some(p) => RunConfig::from_toml_file(p)?,
        None => RunConfig::default(),
    };
    let merged = file.overlay(&flags);
    let em = merged.em_config()?;
    let restarts = merged.restart_count()?;
    let data_path = merged.dataset.clone().ok_or_else(|| {
        CliError::Usage("no dataset: pass --data or set `dataset` in the config file".into())
    })?;
    let ds = read_dataset_csv(&data_path)?;
    let out_dir = resolve_out_dir(merged.out_dir.as_deref());

    let show = a.progress;
    let outcome = best_of_restarts_with_progress(&ds, &em, restarts, |i, r| {
        if show {
            progress_line(i, r);
        }
    })?;
    for (i, msg) in &outcome.failures {
        eprintln!("warning: restart {i} failed: {msg}");
    }

    let model_path = out_dir.join("model.json");
    let report_path = out_dir.join("report.json");
    let modes_path = out_dir.join("modes.csv");
    save_model(&outcome.best.model, &model_path)?;
    write_json(
        &IdentifyReport {
            k: em.k,
            restarts,
            best_restart: outcome.best_index,
            runs: &outcome.runs,
            failures: &outcome.failures,
            report: &outcome.best.report,
        },
        &report_path,
    )?;
    write_modes_csv(ds.true_modes.as_ref(), &outcome.best.modes, &modes_path)?;

    let report = &outcome.best.report;
    println!("model:  {}", model_path.display());
    println!("report: {}", report_path.display());
    println!("modes:  {}", modes_path.display());
    println!(
        "stop: {:?} after {} iterations; final cost {:.6}; best restart {} of {}",
        report.stop,
        report.iterations.len(),
        report.final_cost,
        outcome.best_index + 1,
        restarts
    );
    if report.degraded {
        eprintln!("warning: filter diverged; the model comes from the last stable epoch");
        return Ok(3);
    }
    Ok(0)
}

/// Metrics block of the `evaluate` report (the per-step error series
/// lives in error.csv, not here).
#[derive(Serialize)]
struct MetricsSummary {
    t: usize,
    mse: f64,
    bfr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode_match_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode_perm: Option<Vec<usize>>,
}

impl From<&EvalResult> for MetricsSummary {
    fn from(e: &EvalResult) -> Self {
        MetricsSummary {
            t: e.t,
            mse: e.mse,
            bfr: e.bfr,
            mode_match_pct: e.mode_match_pct,
            mode_perm: e.mode_perm.clone(),
        }
    }
}

#[derive(Serialize)]
struct EvaluateReport {
    one_step: MetricsSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    rollout: Option<MetricsSummary>,
}

fn eval_against(
    model: &SwitchingModel,
    ds: &Dataset,
    pred: &Prediction,
) -> crate::error::Result<EvalResult> {
    evaluate_predictions(&ds.y, &pred.y_pred, ds.true_modes.as_ref(), Some(&pred.modes), model.k())
}

fn cmd_evaluate(a: EvaluateArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let ds = read_dataset_csv(&a.data)?;
    let wcfg = WindowConfig { t_w: a.tw, ..WindowConfig::default() };
    let out_dir = resolve_out_dir(a.out_dir.as_deref());

    let pred = one_step(&model, &ds, &wcfg)?;
    let eval = eval_against(&model, &ds, &pred)?;
    let rollout_eval = if a.rollout {
        let free = rollout_on(&model, &ds, &wcfg)?;
        Some(eval_against(&model, &ds, &free)?)
    } else {
        None
    };

    let overlay_path = out_dir.join("overlay.csv");
    let error_path = out_dir.join("error.csv");
    let modes_path = out_dir.join("modes.csv");
    let report_path = out_dir.join("report.json");
    write_overlay_csv(&ds.y, &pred.y_pred, &overlay_path)?;
    write_error_csv(&eval.step_sq_error, &error_path)?;
    write_modes_csv(ds.true_modes.as_ref(), &pred.modes, &modes_path)?;
    write_json(
        &EvaluateReport {
            one_step: MetricsSummary::from(&eval),
            rollout: rollout_eval.as_ref().map(MetricsSummary::from),
        },
        &report_path,
    )?;

    print_metrics("one-step", &eval);
    if let Some(r) = &rollout_eval {
        print_metrics("rollout", r);
    }
    println!(
        "wrote {}, {}, {}, {}",
        overlay_path.display(),
        error_path.display(),
        modes_path.display(),
        report_path.display()
    );
    Ok(0)
}

fn print_metrics(tag: &str, e: &EvalResult) {
    match e.mode_match_pct {
        Some(m) => println!("{tag}: MSE {:.6e}, BFR {:.2}%, mode match {:.2}%", e.mse, e.bfr, m),
        None => println!("{tag}: MSE {:.6e}, BFR {:.2}%", e.mse, e.bfr),
    }
}

#[derive(Serialize)]
struct BatchRun {
    seed: u64,
    file: String,
    mse: f64,
    bfr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode_match_pct: Option<f64>,
}

#[derive(Serialize)]
struct BatchSummary {
    runs: Vec<BatchRun>,
    median_mse: f64,
    median_bfr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    median_mode_match: Option<f64>,
}

fn cmd_predict(a: PredictArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let wcfg = WindowConfig { t_w: a.tw, ..WindowConfig::default() };
    let out_dir = resolve_out_dir(a.out_dir.as_deref());
    let predict = |ds: &Dataset| {
        if a.rollout {
            rollout_on(&model, ds, &wcfg)
        } else {
            one_step(&model, ds, &wcfg)
        }
    };
    let kind = if a.rollout { "rollout" } else { "one-step" };

    match a.batch {
        None => {
            let data_path = a.data.as_ref().ok_or_else(|| {
                CliError::Usage("no dataset: pass --data (or --batch N to simulate)".into())
            })?;
            let ds = read_dataset_csv(data_path)?;
            let pred = predict(&ds)?;
            let out = a
                .out
                .clone()
                .unwrap_or_else(|| out_dir.join("predictions.csv"));
            write_predictions_csv(&pred.y_pred, &pred.modes, &out)?;
            let eval = eval_against(&model, &ds, &pred)?;
            print_metrics(kind, &eval);
            println!("wrote {}", out.display());
            Ok(0)
        }
        Some(n) => {
            if n == 0 {
                return Err(CliError::Usage("--batch must be at least 1".into()));
            }
            let width = n.to_string().len().max(3);
            let mut runs = Vec::with_capacity(n);
            for i in 0..n {
                let seed = a.seed.wrapping_add(i as u64);
                let ds = match a.benchmark {
                    Some(b) => simulate_benchmark(
                        b,
                        &BenchmarkSpec {
                            t: a.t,
                            noise_var: a.noise.unwrap_or(1e-3),
                            seed,
                            input: InputLaw::default(),
                        },
                    )?,
                    None => simulate_model(
                        &model,
                        a.t,
                        seed,
                        InputLaw::default(),
                        a.noise.unwrap_or(1.0),
                    )?,
                };
                let pred = predict(&ds)?;
                let file = format!("pred_{i:0width$}.csv");
                write_predictions_csv(&pred.y_pred, &pred.modes, &out_dir.join(&file))?;
                let eval = eval_against(&model, &ds, &pred)?;
                runs.push(BatchRun {
                    seed,
                    file,
                    mse: eval.mse,
                    bfr: eval.bfr,
                    mode_match_pct: eval.mode_match_pct,
                });
            }
            let mses: Vec<f64> = runs.iter().map(|r| r.mse).collect();
            let bfrs: Vec<f64> = runs.iter().map(|r| r.bfr).collect();
            let matches: Vec<f64> = runs.iter().filter_map(|r| r.mode_match_pct).collect();
            let summary = BatchSummary {
                median_mse: crate::sweep::median(&mses),
                median_bfr: crate::sweep::median(&bfrs),
                median_mode_match: if matches.len() == runs.len() {
                    Some(crate::sweep::median(&matches))
                } else {
                    None
                },
                runs,
            };
            let summary_path = out_dir.join("predict_summary.json");
            write_json(&summary, &summary_path)?;
            println!(
                "{kind} batch of {n}: median MSE {:.6e}, median BFR {:.2}%",
                summary.median_mse, summary.median_bfr
            );
            println!("wrote {} prediction files and {}", n, summary_path.display());
            Ok(0)
        }
    }
}

#[derive(Serialize)]
struct SweepCellSummary {
    noise: f64,
    train_seed: u64,
    best_restart: usize,
    final_cost: f64,
    degraded: bool,
    model: String,
    scores: Vec<TrajectoryScore>,
    median_mse: f64,
    median_bfr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    median_mode_match: Option<f64>,
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let flags = RunConfig {
        k: a.k,
        t_w: a.tw,
        iters: a.iters,
        epochs: a.epochs,
        seed: a.seed,
        restarts: a.restarts,
        out_dir: a.out_dir,
        ..RunConfig::default()
    };
    let file = match &a.config {
        Some(p) => RunConfig::from_toml_file(p)?,
        None => RunConfig::default(),
    };
    let merged = file.overlay(&flags);
    let em = merged.em_config()?;
    let cfg = SweepConfig {
        noise_levels: a.noise.unwrap_or_else(|| DEFAULT_NOISE_GRID.to_vec()),
        t: a.t,
        eval_trajectories: a.trajectories,
        eval_t: a.eval_t.unwrap_or(a.t),
        restarts: merged.restart_count()?,
        data_seed: em.seed,
        em,
    };
    let out_dir = resolve_out_dir(merged.out_dir.as_deref());

    let cells = run_noise_sweep(&cfg)?;

    let mut summaries = Vec::with_capacity(cells.len());
    let mut csv = String::from("noise,median_mse,median_bfr,median_mode_match\n");
    for cell in &cells {
        let cell_dir = out_dir.join(format!("noise_{:e}", cell.noise));
        let model_path = cell_dir.join("model.json");
        save_model(&cell.model, &model_path)?;
        write_json(&cell.report, &cell_dir.join("report.json"))?;
        csv.push_str(&format!(
            "{:e},{},{},{}\n",
            cell.noise,
            cell.median_mse,
            cell.median_bfr,
            cell.median_mode_match.map(|v| v.to_string()).unwrap_or_default()
        ));
        match cell.median_mode_match {
            Some(m) => println!(
                "noise {:e}: median MSE {:.6e}, median BFR {:.2}%, median mode match {:.2}%",
                cell.noise, cell.median_mse, cell.median_bfr, m
            ),
            None => println!(
                "noise {:e}: median MSE {:.6e}, median BFR {:.2}%",
                cell.noise, cell.median_mse, cell.median_bfr
            ),
        }
        summaries.push(SweepCellSummary {
            noise: cell.noise,
            train_seed: cell.train_seed,
            best_restart: cell.best_restart,
            final_cost: cell.report.final_cost,
            degraded: cell.report.degraded,
            model: model_path.display().to_string(),
            scores: cell.scores.clone(),
            median_mse: cell.median_mse,
            median_bfr: cell.median_bfr,
            median_mode_match: cell.median_mode_match,
        });
    }
    let csv_path = out_dir.join("sweep_summary.csv");
    let json_path = out_dir.join("sweep_summary.json");
    atomic_write(&csv_path, csv.as_bytes())?;
    write_json(&summaries, &json_path)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());

    if cells.iter().any(|c| c.report.degraded) {
        eprintln!("warning: at least one noise level degraded on a diverged filter");
        return Ok(3);
    }
    Ok(0)
}
