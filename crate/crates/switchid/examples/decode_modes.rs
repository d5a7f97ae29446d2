//! Decode a hidden mode sequence with a known model.
//!
//! Given the true submodels and transition matrix, the moving-window
//! estimator recovers which mode was active at each step from the
//! input/output record alone. Wider windows look further ahead before
//! committing a label, trading an exponentially larger candidate set for
//! better decisions near mode switches. On short data the window can
//! cover everything, which makes the search exact — this example checks
//! that against the brute-force enumeration.
//!
//! Run with: `cargo run --example decode_modes`

use nalgebra::{DMatrix, DVector};
use switchid::metrics::mode_match;
use switchid::mode::{exhaustive_estimate, moving_window_estimate, ExhaustiveConfig, WindowConfig};
use switchid::model::{ModeSequence, Submodel, SwitchingModel, TransitionMatrix};
use switchid::rnn::affine_net;
use switchid::sim::{simulate_markov_modes, simulate_with_modes, stream_rng, InputLaw, STREAM_MODES};

/// Two scalar-state modes sharing their dynamics; only the output maps
/// differ, and only moderately, so single-step evidence is ambiguous.
fn two_close_modes() -> SwitchingModel {
    let state = affine_net(DMatrix::from_row_slice(1, 2, &[0.7, 1.0]), DVector::zeros(1));
    let out = |c: f64, d: f64, b: f64| {
        affine_net(DMatrix::from_row_slice(1, 2, &[c, d]), DVector::from_element(1, b))
    };
    SwitchingModel {
        n_x: 1,
        n_u: 1,
        n_y: 1,
        submodels: vec![
            Submodel { state_net: state.clone(), output_net: out(1.0, 0.4, 0.3) },
            Submodel { state_net: state, output_net: out(0.8, -0.4, -0.3) },
        ],
        trans: TransitionMatrix::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]),
            DVector::from_row_slice(&[0.5, 0.5]),
        )
        .unwrap(),
        sigma1: DMatrix::from_element(1, 1, 1e-2),
        sigma2: DMatrix::from_element(1, 1, 4e-2),
        sigma_theta: 0.0,
        x0: DVector::zeros(1),
    }
}

fn main() -> switchid::Result<()> {
    let model = two_close_modes();
    let seeds: Vec<u64> = (0..10).collect();
    println!(
        "decoding {} trajectories of 400 steps each (fast switching, noisy outputs)",
        seeds.len()
    );
    println!();
    println!("window  candidates/run  mean match rate");

    let mut means = Vec::new();
    for t_w in [1, 2, 3, 5] {
        let cfg = WindowConfig { t_w, ..WindowConfig::default() };
        let mut total = 0.0;
        let mut candidates = 0;
        for &seed in &seeds {
            let truth = simulate_markov_modes(&model.trans, 400, &mut stream_rng(seed, STREAM_MODES));
            let ds =
                simulate_with_modes(&model, &truth, seed, InputLaw::Uniform { lo: -1.0, hi: 1.0 }, 1.0)?;
            let trace = moving_window_estimate(&model, &ds, &cfg)?;
            total += mode_match(&truth, &trace.modes, model.k())?.pct;
            candidates = trace.stats.candidates;
        }
        let mean = total / seeds.len() as f64;
        means.push(mean);
        println!("  {t_w:>3}  {candidates:>14}  {:>14.2}%", mean);
    }
    assert!(
        means.last().unwrap() > means.first().unwrap(),
        "the widest window should beat the greedy one on average"
    );

    let truth = simulate_markov_modes(&model.trans, 400, &mut stream_rng(3, STREAM_MODES));
    let ds = simulate_with_modes(&model, &truth, 3, InputLaw::Uniform { lo: -1.0, hi: 1.0 }, 1.0)?;

    // On a short prefix, a window spanning the whole record reproduces the
    // exhaustive search over every K^T mode sequence exactly.
    let t_short = 10;
    let short = truncate(&ds, &truth, t_short)?;
    let full_window = WindowConfig { t_w: t_short - 1, ..WindowConfig::default() };
    let windowed = moving_window_estimate(&model, &short, &full_window)?;
    let exact = exhaustive_estimate(&model, &short, &ExhaustiveConfig::default())?;
    assert_eq!(
        windowed.modes, exact.modes,
        "a full-length window must agree with brute-force enumeration"
    );
    println!();
    println!(
        "first {t_short} steps: full-window decode matches the exhaustive search over {} sequences",
        (model.k() as u128).pow(t_short as u32)
    );
    Ok(())
}

/// The first `t` steps of a dataset (keeping the matching truth labels).
fn truncate(
    ds: &switchid::Dataset,
    truth: &ModeSequence,
    t: usize,
) -> switchid::Result<switchid::Dataset> {
    let mut short = switchid::Dataset::new(ds.u[..t].to_vec(), ds.y[..t].to_vec())?;
    short.true_modes = Some(ModeSequence::from_zero_based(truth.as_slice()[..t].to_vec(), 2)?);
    Ok(short)
}
