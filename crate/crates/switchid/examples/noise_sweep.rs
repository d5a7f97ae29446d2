//! How noisy can the benchmark get before identification breaks down?
//!
//! Runs a scaled-down robustness sweep: at each measurement-noise
//! variance the built-in two-mode benchmark is re-simulated, a model is
//! identified from scratch, and the fit is scored on several fresh
//! trajectories at the same noise level. The medians across those
//! trajectories make up one row of the table below.
//!
//! The full-size protocol (longer data, the complete noise grid, more
//! evaluation trajectories, multiple restarts) is what `switchid sweep`
//! runs from the command line.
//!
//! Run with: `cargo run --example noise_sweep`

use switchid::em::EmConfig;
use switchid::sweep::{run_noise_sweep, SweepConfig};

fn main() -> switchid::Result<()> {
    let cfg = SweepConfig {
        noise_levels: vec![1e-3, 1e-2, 1e-1],
        t: 400,
        eval_trajectories: 5,
        eval_t: 400,
        restarts: 1,
        data_seed: 0,
        em: EmConfig { k: 2, ..EmConfig::default() },
    };
    println!(
        "sweeping {} noise levels (train {} steps, {} eval trajectories each)...",
        cfg.noise_levels.len(),
        cfg.t,
        cfg.eval_trajectories
    );
    let start = std::time::Instant::now();
    let cells = run_noise_sweep(&cfg)?;
    println!("done in {:.1}s (levels run in parallel)", start.elapsed().as_secs_f64());

    println!();
    println!("noise var   median MSE   median BFR   median mode match");
    for cell in &cells {
        println!(
            "{:>9.0e}   {:>10.3e}   {:>9.2}%   {:>16.2}%",
            cell.noise,
            cell.median_mse,
            cell.median_bfr,
            cell.median_mode_match.unwrap()
        );
    }

    // More noise can only hurt: the cleanest level should fit best.
    let first = &cells[0];
    let last = &cells[cells.len() - 1];
    assert!(first.median_mse <= last.median_mse, "MSE should grow with noise");
    assert!(first.median_bfr >= last.median_bfr, "BFR should shrink with noise");
    println!();
    println!(
        "fit degrades as expected: MSE {:.1e} -> {:.1e}, BFR {:.1}% -> {:.1}%",
        first.median_mse, last.median_mse, first.median_bfr, last.median_bfr
    );
    Ok(())
}
