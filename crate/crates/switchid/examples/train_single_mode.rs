//! Train one neural state-space model with the extended Kalman filter.
//!
//! With a single mode there is nothing to decode, which isolates the
//! parameter-estimation machinery: the filter runs on an augmented
//! vector holding the hidden state and every network weight, and each
//! measurement updates both. Repeated sweeps over the data (epochs) keep
//! shrinking the one-step prediction error.
//!
//! Run with: `cargo run --example train_single_mode`

use switchid::ekf::{train, AugmentedBelief, EkfConfig};
use switchid::em::{init_model, ArchConfig, EmConfig, NoiseSpec};
use switchid::metrics::bfr;
use switchid::mode::WindowConfig;
use switchid::model::ModeSequence;
use switchid::predict::one_step;
use switchid::sim::{simulate_model, InputLaw};

fn main() -> switchid::Result<()> {
    let arch = ArchConfig { n_x: 2, hidden: vec![4], ..ArchConfig::default() };

    // The system to learn: a randomly weighted network of the same shape,
    // simulated with mild noise. Large initial weights make it clearly
    // nonlinear; the student starts from small ones.
    let truth = init_model(
        &EmConfig {
            k: 1,
            arch: arch.clone(),
            init_weight_std: 0.6,
            seed: 99,
            sigma1: NoiseSpec::Scalar(1e-5),
            sigma2: NoiseSpec::Scalar(1e-5),
            ..EmConfig::default()
        },
        1,
        1,
    )?;
    let ds = simulate_model(&truth, 500, 5, InputLaw::Uniform { lo: -1.0, hi: 1.0 }, 1.0)?;
    println!("simulated {} steps from a hidden single-mode system", ds.len());

    let student_cfg = EmConfig {
        k: 1,
        arch,
        init_weight_std: 0.1,
        seed: 0,
        sigma1: NoiseSpec::Scalar(1e-5),
        sigma2: NoiseSpec::Scalar(1e-5),
        ekf: EkfConfig { epochs: 30, ..EkfConfig::default() },
        ..EmConfig::default()
    };
    let student = init_model(&student_cfg, ds.n_u(), ds.n_y())?;
    let modes = ModeSequence::from_zero_based(vec![0; ds.len()], 1)?;

    let belief = AugmentedBelief::init(&student, &student_cfg.ekf);
    let run = train(&student, &ds, &modes, belief, &student_cfg.ekf)?;
    assert!(run.diverged.is_none(), "the filter stayed healthy");

    println!();
    println!("one-step mean squared error per training epoch:");
    for (i, m) in run.epoch_mse.iter().enumerate() {
        if i % 3 == 0 || i + 1 == run.epoch_mse.len() {
            println!("  epoch {:>2}: {:.3e}", i + 1, m);
        }
    }
    let (first, last) = (run.epoch_mse[0], *run.epoch_mse.last().unwrap());
    assert!(
        last < first / 50.0,
        "training should cut the error at least fiftyfold, got {first:.3e} -> {last:.3e}"
    );

    // Score the trained model on fresh data from the same system.
    let fresh = simulate_model(&truth, 500, 6, InputLaw::Uniform { lo: -1.0, hi: 1.0 }, 1.0)?;
    let pred = one_step(&run.model, &fresh, &WindowConfig::default())?;
    let fit = bfr(&fresh.y, &pred.y_pred)?;
    println!();
    println!("one-step fit on fresh data: BFR {fit:.2}%");
    assert!(fit > 80.0, "expected a solid fit, got {fit:.2}%");
    Ok(())
}
