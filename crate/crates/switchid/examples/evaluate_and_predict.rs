//! Save a fitted model, reload it, and score it on held-out data.
//!
//! A quick two-mode linear fit stands in for a long training run; the
//! point here is everything that happens after training: the model file
//! round-trip, one-step-ahead versus free-run rollout predictions on
//! fresh data, the standard fit metrics, and the plot-ready CSV files
//! (output overlay, per-step squared error, mode overlay).
//!
//! Run with: `cargo run --example evaluate_and_predict`

use nalgebra::{DMatrix, DVector};
use switchid::em::{best_of_restarts, ArchConfig, EmConfig, NoiseSpec};
use switchid::io::{write_error_csv, write_modes_csv, write_overlay_csv};
use switchid::metrics::evaluate_predictions;
use switchid::mode::WindowConfig;
use switchid::model::{load_model, save_model, Submodel, SwitchingModel, TransitionMatrix};
use switchid::predict::{one_step, rollout_on};
use switchid::rnn::affine_net;
use switchid::sim::{simulate_markov_modes, simulate_with_modes, stream_rng, InputLaw, STREAM_MODES};

/// A two-mode system whose output maps are well separated.
fn truth() -> SwitchingModel {
    let state = affine_net(DMatrix::from_row_slice(1, 2, &[0.7, 1.0]), DVector::zeros(1));
    let out = |c: f64, d: f64, b: f64| {
        affine_net(DMatrix::from_row_slice(1, 2, &[c, d]), DVector::from_element(1, b))
    };
    SwitchingModel {
        n_x: 1,
        n_u: 1,
        n_y: 1,
        submodels: vec![
            Submodel { state_net: state.clone(), output_net: out(1.0, 0.5, 3.0) },
            Submodel { state_net: state, output_net: out(0.8, -0.5, -3.0) },
        ],
        trans: TransitionMatrix::new(
            DMatrix::from_row_slice(2, 2, &[0.98, 0.02, 0.02, 0.98]),
            DVector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap(),
        sigma1: DMatrix::from_element(1, 1, 1e-2),
        sigma2: DMatrix::from_element(1, 1, 1e-2),
        sigma_theta: 0.0,
        x0: DVector::zeros(1),
    }
}

fn simulate(t: usize, seed: u64) -> switchid::Result<switchid::Dataset> {
    let system = truth();
    let modes = simulate_markov_modes(&system.trans, t, &mut stream_rng(seed, STREAM_MODES));
    simulate_with_modes(&system, &modes, seed, InputLaw::Uniform { lo: 0.5, hi: 1.5 }, 1.0)
}

fn main() -> switchid::Result<()> {
    let train = simulate(250, 11)?;
    let test = simulate(250, 12)?;

    // Fit affine submodels (no hidden layers) — quick and exact here.
    // Random initialization can land in a poor local optimum, so take the
    // best of a few restarts; each gets a different parameter draw.
    let cfg = EmConfig {
        k: 2,
        arch: ArchConfig { n_x: 1, hidden: vec![], ..ArchConfig::default() },
        sigma1: NoiseSpec::Scalar(1e-2),
        sigma2: NoiseSpec::Scalar(1e-2),
        max_iterations: 20,
        seed: 3,
        ..EmConfig::default()
    };
    let picked = best_of_restarts(&train, &cfg, 4)?;
    for r in &picked.runs {
        println!(
            "  restart {} (seed {:>2}): final cost {:>10.2}, {:?}",
            r.index, r.seed, r.final_cost, r.stop
        );
    }
    let outcome = picked.best;
    println!(
        "fitted on {} steps; kept restart {} of 4",
        train.len(),
        picked.best_index
    );

    // Round-trip through the model file; the reloaded model must behave
    // identically.
    let dir = std::env::temp_dir().join("switchid_evaluate_and_predict");
    std::fs::create_dir_all(&dir)?;
    let model_path = dir.join("model.json");
    save_model(&outcome.model, &model_path)?;
    let model = load_model(&model_path)?;
    assert_eq!(model, outcome.model, "the model file preserves every parameter");
    println!("saved and reloaded {}", model_path.display());

    // Score on held-out data, both prediction regimes.
    let wcfg = WindowConfig { t_w: cfg.t_w, ..WindowConfig::default() };
    let one = one_step(&model, &test, &wcfg)?;
    let free = rollout_on(&model, &test, &wcfg)?;
    let truth_modes = test.true_modes.as_ref();
    let eval_one = evaluate_predictions(&test.y, &one.y_pred, truth_modes, Some(&one.modes), 2)?;
    let eval_free = evaluate_predictions(&test.y, &free.y_pred, truth_modes, Some(&free.modes), 2)?;
    println!();
    println!("held-out fit ({} steps):", test.len());
    println!(
        "  one-step: BFR {:>6.2}%, MSE {:.3e}, mode match {:.2}%",
        eval_one.bfr,
        eval_one.mse,
        eval_one.mode_match_pct.unwrap()
    );
    println!(
        "  rollout:  BFR {:>6.2}%, MSE {:.3e}, mode match {:.2}%",
        eval_free.bfr,
        eval_free.mse,
        eval_free.mode_match_pct.unwrap()
    );
    assert!(eval_one.bfr > 80.0);
    assert!(eval_one.mode_match_pct.unwrap() > 95.0);

    // Plot data: three small CSVs any plotting tool can read.
    let overlay = dir.join("overlay.csv");
    let error = dir.join("error.csv");
    let modes = dir.join("modes.csv");
    write_overlay_csv(&test.y, &one.y_pred, &overlay)?;
    write_error_csv(&eval_one.step_sq_error, &error)?;
    write_modes_csv(truth_modes, &one.modes, &modes)?;
    println!();
    println!("plot data written:");
    for p in [&overlay, &error, &modes] {
        println!("  {} ({} bytes)", p.display(), std::fs::metadata(p)?.len());
    }
    Ok(())
}
