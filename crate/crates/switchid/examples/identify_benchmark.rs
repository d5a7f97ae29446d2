//! Identify the two-mode benchmark end to end.
//!
//! Nothing about the system is given to the fitter except the number of
//! modes: starting from randomly initialized networks and a uniform
//! transition matrix, it alternates mode decoding (a moving-window
//! search under the current parameters) with parameter re-estimation
//! (transition counts, then Kalman-filter training along the decoded
//! sequence). The committed cost falls across iterations, and the
//! recovered mode chain is compared against the hidden truth —
//! identified labels are arbitrary, so the match is scored over label
//! permutations.
//!
//! Run with: `cargo run --example identify_benchmark`
//! (about half a minute; pass `--release` to speed it up)

use switchid::em::{run_with_progress, EmConfig};
use switchid::metrics::{evaluate_predictions, mode_match};
use switchid::mode::WindowConfig;
use switchid::predict::one_step;
use switchid::sim::{simulate_benchmark, Benchmark, BenchmarkSpec, InputLaw};

fn main() -> switchid::Result<()> {
    let spec = BenchmarkSpec {
        t: 1000,
        noise_var: 1e-3,
        seed: 1000,
        input: InputLaw::Uniform { lo: 0.0, hi: 1.0 },
    };
    let ds = simulate_benchmark(Benchmark::TwoMode, &spec)?;
    println!("simulated {} steps; fitting two modes from scratch", ds.len());
    println!();
    println!("iter   total cost     labels changed   seconds");

    let cfg = EmConfig { k: 2, max_iterations: 10, t_w: 3, seed: 0, ..EmConfig::default() };
    let outcome = run_with_progress(&ds, &cfg, |r| {
        println!(
            "{:>4}   {:>12.2}   {:>14}   {:>7.1}",
            r.iteration, r.total_cost, r.modes_changed, r.seconds
        );
    })?;

    println!();
    println!("stopped: {:?} (final cost {:.2})", outcome.report.stop, outcome.report.final_cost);

    let truth = ds.true_modes.as_ref().expect("benchmark data carries its mode chain");
    let m = mode_match(truth, &outcome.modes, 2)?;
    println!(
        "mode sequence: {:.2}% of labels match the hidden truth (up to relabeling)",
        m.pct
    );

    // One-step output fit on the training record.
    let wcfg = WindowConfig { t_w: cfg.t_w, ..WindowConfig::default() };
    let pred = one_step(&outcome.model, &ds, &wcfg)?;
    let eval = evaluate_predictions(&ds.y, &pred.y_pred, None, None, 2)?;
    println!("one-step output fit: BFR {:.2}%, MSE {:.3e}", eval.bfr, eval.mse);

    let pi = &outcome.model.trans.pi;
    println!();
    println!("recovered transition matrix (columns = current mode, rows = next):");
    println!("  [{:.3}  {:.3}]", pi[(0, 0)], pi[(0, 1)]);
    println!("  [{:.3}  {:.3}]", pi[(1, 0)], pi[(1, 1)]);
    println!("(the generator's diagonal is 0.98)");

    assert!(m.pct >= 95.0, "expected at least 95% mode match, got {:.2}%", m.pct);
    assert!(eval.bfr >= 85.0, "expected at least 85% BFR, got {:.2}%", eval.bfr);
    Ok(())
}
