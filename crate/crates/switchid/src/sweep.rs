//! Noise-robustness sweep: re-identify the built-in benchmark at several
//! noise levels and score each fit on fresh evaluation trajectories.
//!
//! For each noise level the sweep simulates a training set, fits a model
//! (best of `restarts`), simulates `eval_trajectories` further sets at the
//! same noise level, and records one-step-ahead fit metrics per set plus
//! their medians. Levels run on worker threads; all seeds are derived
//! deterministically, so the report does not depend on scheduling.

use serde::{Deserialize, Serialize};

use crate::em::{best_of_restarts, EmConfig, EmReport};
use crate::error::{Error, Result};
use crate::metrics::evaluate_predictions;
use crate::mode::WindowConfig;
use crate::model::SwitchingModel;
use crate::predict::one_step;
use crate::sim::{simulate_benchmark, Benchmark, BenchmarkSpec, InputLaw};

/// Noise grid of the robustness protocol.
pub const DEFAULT_NOISE_GRID: [f64; 4] = [1e-3, 1e-2, 1e-1, 2e-1];

/// What a noise sweep should run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Noise variances to train and evaluate at.
    pub noise_levels: Vec<f64>,
    /// Training trajectory length.
    pub t: usize,
    /// Fresh evaluation trajectories per level.
    pub eval_trajectories: usize,
    /// Evaluation trajectory length.
    pub eval_t: usize,
    /// Restarts per identification.
    pub restarts: usize,
    /// Base seed for data generation; each level and trajectory derives
    /// its own seed from it.
    pub data_seed: u64,
    /// Identification options; `em.seed` is offset per level so restarts
    /// never share an initialization across levels.
    pub em: EmConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            noise_levels: DEFAULT_NOISE_GRID.to_vec(),
            t: 1000,
            eval_trajectories: 10,
            eval_t: 1000,
            restarts: 1,
            data_seed: 0,
            em: EmConfig::default(),
        }
    }
}

/// Fit metrics of one evaluation trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryScore {
    pub seed: u64,
    pub mse: f64,
    pub bfr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_match_pct: Option<f64>,
}

/// One noise level's results.
#[derive(Debug)]
pub struct SweepCell {
    pub noise: f64,
    pub train_seed: u64,
    pub model: SwitchingModel,
    pub report: EmReport,
    pub best_restart: usize,
    pub scores: Vec<TrajectoryScore>,
    pub median_mse: f64,
    pub median_bfr: f64,
    pub median_mode_match: Option<f64>,
}

/// Median of an unsorted slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn run_cell(cfg: &SweepConfig, level_index: usize) -> Result<SweepCell> {
    let noise = cfg.noise_levels[level_index];
    let train_seed = cfg.data_seed.wrapping_add(1000 * level_index as u64);
    let train = simulate_benchmark(
        Benchmark::TwoMode,
        &BenchmarkSpec { t: cfg.t, noise_var: noise, seed: train_seed, input: InputLaw::default() },
    )?;

    let em = EmConfig {
        seed: cfg.em.seed.wrapping_add(100 * level_index as u64),
        ..cfg.em.clone()
    };
    let fit = best_of_restarts(&train, &em, cfg.restarts)?;

    let wcfg = WindowConfig {
        t_w: em.t_w,
        candidate_cap: em.candidate_cap,
        p0_state: em.ekf.p0_state,
    };
    let mut scores = Vec::with_capacity(cfg.eval_trajectories);
    for j in 0..cfg.eval_trajectories {
        let seed = train_seed.wrapping_add(1 + j as u64);
        let ds = simulate_benchmark(
            Benchmark::TwoMode,
            &BenchmarkSpec {
                t: cfg.eval_t,
                noise_var: noise,
                seed,
                input: InputLaw::default(),
            },
        )?;
        let pred = one_step(&fit.best.model, &ds, &wcfg)?;
        let eval = evaluate_predictions(
            &ds.y,
            &pred.y_pred,
            ds.true_modes.as_ref(),
            Some(&pred.modes),
            em.k,
        )?;
        scores.push(TrajectoryScore {
            seed,
            mse: eval.mse,
            bfr: eval.bfr,
            mode_match_pct: eval.mode_match_pct,
        });
    }

    let median_mse = median(&scores.iter().map(|s| s.mse).collect::<Vec<_>>());
    let median_bfr = median(&scores.iter().map(|s| s.bfr).collect::<Vec<_>>());
    let matches: Vec<f64> = scores.iter().filter_map(|s| s.mode_match_pct).collect();
    let median_mode_match =
        if matches.len() == scores.len() { Some(median(&matches)) } else { None };

    Ok(SweepCell {
        noise,
        train_seed,
        model: fit.best.model,
        report: fit.best.report,
        best_restart: fit.best_index,
        scores,
        median_mse,
        median_bfr,
        median_mode_match,
    })
}

/// Runs every noise level (in parallel) and returns the cells in the
/// order the levels were given.
pub fn run_noise_sweep(cfg: &SweepConfig) -> Result<Vec<SweepCell>> {
    if cfg.noise_levels.is_empty() {
        return Err(Error::Invalid("sweep needs at least one noise level".into()));
    }
    if cfg.eval_trajectories == 0 {
        return Err(Error::Invalid("sweep needs at least one evaluation trajectory".into()));
    }
    for &n in &cfg.noise_levels {
        if !n.is_finite() || n < 0.0 {
            return Err(Error::Invalid(format!("noise level must be finite and >= 0, got {n}")));
        }
    }
    if cfg.noise_levels.len() == 1 {
        return Ok(vec![run_cell(cfg, 0)?]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.noise_levels.len())
            .map(|i| scope.spawn(move || run_cell(cfg, i)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep cell thread panicked"))
            .collect()
    })
}
