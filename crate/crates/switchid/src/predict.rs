//! Output prediction from a fitted model.
//!
//! Two regimes are supported:
//!
//! * **one-step-ahead** (default everywhere): at each step the filter's
//!   prior output estimate is reported, then the state is corrected with
//!   the measured output before moving on. This is the quantity the fit
//!   metrics are computed on.
//! * **free-run rollout**: the model's own dynamics are iterated from
//!   `x0` without ever looking at measured outputs. This exposes how far
//!   the learned dynamics can run open-loop.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::mode::{moving_window_estimate, DecodeStats, WindowConfig};
use crate::model::{Dataset, ModeSequence, SwitchingModel};
use crate::rnn;

/// Predicted outputs along a dataset, with the mode sequence they used.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub y_pred: Vec<DVector<f64>>,
    pub modes: ModeSequence,
    /// Filtered (one-step) or open-loop (rollout) state means.
    pub states: Vec<DVector<f64>>,
    /// Decoder work counters, when a decode ran.
    pub stats: Option<DecodeStats>,
}

/// One-step-ahead predictions: decodes the mode sequence with the moving
/// window and reports each step's filter-predicted output.
pub fn one_step(model: &SwitchingModel, ds: &Dataset, cfg: &WindowConfig) -> Result<Prediction> {
    let trace = moving_window_estimate(model, ds, cfg)?;
    Ok(Prediction {
        y_pred: trace.predicted_outputs,
        modes: trace.modes,
        states: trace.filtered_states,
        stats: Some(trace.stats),
    })
}

/// Free-run rollout along a fixed mode sequence: iterates the noiseless
/// recursion `x(t+1) = f_{s_t}(x(t), u(t))`, `y(t) = g_{s_t}(x(t), u(t))`
/// from the model's `x0`, ignoring any measured outputs.
pub fn rollout(
    model: &SwitchingModel,
    u: &[DVector<f64>],
    modes: &ModeSequence,
) -> Result<Prediction> {
    model.validate()?;
    if u.len() != modes.len() {
        return Err(Error::Dim(format!(
            "{} inputs but {} modes",
            u.len(),
            modes.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Invalid("rollout needs at least one step".into()));
    }
    for (t, ut) in u.iter().enumerate() {
        if ut.len() != model.n_u {
            return Err(Error::Dim(format!(
                "input at step {} has {} entries, model expects {}",
                t + 1,
                ut.len(),
                model.n_u
            )));
        }
    }

    let mut x = model.x0.clone();
    let mut y_pred = Vec::with_capacity(u.len());
    let mut states = Vec::with_capacity(u.len());
    for (t, ut) in u.iter().enumerate() {
        let sub = &model.submodels[modes[t]];
        y_pred.push(rnn::forward_output(&sub.output_net, &x, ut));
        states.push(x.clone());
        x = rnn::forward_state(&sub.state_net, &x, ut);
    }
    Ok(Prediction { y_pred, modes: modes.clone(), states, stats: None })
}

/// Free-run rollout on measured data: first decodes the mode sequence
/// from the measurements (one-step filter), then rolls the dynamics
/// open-loop along that sequence.
pub fn rollout_on(model: &SwitchingModel, ds: &Dataset, cfg: &WindowConfig) -> Result<Prediction> {
    let trace = moving_window_estimate(model, ds, cfg)?;
    let mut out = rollout(model, &ds.u, &trace.modes)?;
    out.stats = Some(trace.stats);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_with_modes, InputLaw};
    use crate::model::{Activation, Net, NetParams, NetSpec, Submodel, TransitionMatrix};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    /// Two well-separated scalar modes: y = x + 3 vs y = x - 3.
    fn two_mode_model() -> SwitchingModel {
        let state = |a: f64, b: f64| {
            let spec = NetSpec::new(2, vec![1], vec![Activation::Identity]).unwrap();
            let mut p = NetParams::zeros(&spec);
            p.weights[0][(0, 0)] = a;
            p.weights[0][(0, 1)] = b;
            Net { spec, params: p }
        };
        let output = |c: f64, bias: f64| {
            let spec = NetSpec::new(2, vec![1], vec![Activation::Identity]).unwrap();
            let mut p = NetParams::zeros(&spec);
            p.weights[0][(0, 0)] = c;
            p.biases[0][0] = bias;
            Net { spec, params: p }
        };
        SwitchingModel {
            n_x: 1,
            n_u: 1,
            n_y: 1,
            submodels: vec![
                Submodel { state_net: state(0.7, 1.0), output_net: output(1.0, 3.0) },
                Submodel { state_net: state(0.7, 1.0), output_net: output(0.8, -3.0) },
            ],
            trans: TransitionMatrix::new(
                DMatrix::from_row_slice(2, 2, &[0.95, 0.05, 0.05, 0.95]),
                DVector::from_row_slice(&[0.5, 0.5]),
            )
            .unwrap(),
            sigma1: DMatrix::identity(1, 1) * 1e-2,
            sigma2: DMatrix::identity(1, 1) * 1e-2,
            sigma_theta: 0.0,
            x0: DVector::zeros(1),
        }
    }

    #[test]
    fn rollout_reproduces_noiseless_simulation() {
        let model = two_mode_model();
        let modes =
            ModeSequence::from_zero_based(vec![0, 0, 1, 1, 0, 1, 0, 0], 2).unwrap();
        let ds = simulate_with_modes(&model, &modes, 11, InputLaw::Uniform { lo: -1.0, hi: 1.0 }, 0.0)
            .unwrap();
        let pred = rollout(&model, &ds.u, &modes).unwrap();
        for (a, b) in pred.y_pred.iter().zip(&ds.y) {
            assert_relative_eq!(a[0], b[0], epsilon = 1e-12);
        }
        assert!(pred.stats.is_none());
    }

    #[test]
    fn one_step_tracks_noiseless_data_exactly() {
        let model = two_mode_model();
        let modes = ModeSequence::from_zero_based(vec![0, 0, 0, 1, 1, 1, 0, 0, 1, 0], 2).unwrap();
        let ds = simulate_with_modes(&model, &modes, 3, InputLaw::Uniform { lo: -1.0, hi: 1.0 }, 0.0)
            .unwrap();
        let cfg = WindowConfig::default();
        let pred = one_step(&model, &ds, &cfg).unwrap();
        assert_eq!(pred.modes, modes);
        // With the true model and zero noise the filter converges onto the
        // trajectory; late-step predictions are near-exact.
        for t in 3..ds.len() {
            assert_relative_eq!(pred.y_pred[t][0], ds.y[t][0], epsilon = 1e-6);
        }
        assert!(pred.stats.is_some());
    }

    #[test]
    fn rollout_and_one_step_differ_on_noisy_data() {
        let model = two_mode_model();
        let modes = ModeSequence::from_zero_based(vec![0; 40], 2).unwrap();
        let ds = simulate_with_modes(&model, &modes, 5, InputLaw::Uniform { lo: -1.0, hi: 1.0 }, 1.0)
            .unwrap();
        let cfg = WindowConfig::default();
        let one = one_step(&model, &ds, &cfg).unwrap();
        let free = rollout_on(&model, &ds, &cfg).unwrap();
        let max_gap = one
            .y_pred
            .iter()
            .zip(&free.y_pred)
            .map(|(a, b)| (a[0] - b[0]).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_gap > 1e-6, "corrected and open-loop paths should diverge, gap {max_gap}");
    }

    #[test]
    fn rollout_rejects_mismatched_lengths() {
        let model = two_mode_model();
        let modes = ModeSequence::from_zero_based(vec![0, 1], 2).unwrap();
        let u = vec![DVector::zeros(1); 3];
        assert!(rollout(&model, &u, &modes).is_err());
        let u_bad = vec![DVector::zeros(2); 2];
        assert!(rollout(&model, &u_bad, &modes).is_err());
    }
}
