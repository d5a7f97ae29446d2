//! Prediction-quality and mode-recovery metrics.
//!
//! * [`mse`] — mean squared prediction error over all channels.
//! * [`bfr`] — best-fit ratio in percent: `100 (1 - ||y - y_hat|| /
//!   ||y - y_mean||)` with the norms taken over the whole series and
//!   `y_mean` the per-channel mean of the true outputs. 100 is a perfect
//!   fit, 0 is no better than predicting the mean, and worse-than-mean
//!   predictions go negative.
//! * [`mode_match`] — percentage of steps whose decoded mode agrees with
//!   the truth, maximized over all relabelings of the decoded modes
//!   (decoded label numbers are arbitrary).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModeSequence;

fn check_series(
    y_true: &[DVector<f64>],
    y_pred: &[DVector<f64>],
) -> Result<()> {
    if y_true.is_empty() || y_true.len() != y_pred.len() {
        return Err(Error::Metric(format!(
            "series lengths differ or are empty: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    let n_y = y_true[0].len();
    if y_true
        .iter()
        .chain(y_pred.iter())
        .any(|v| v.len() != n_y)
    {
        return Err(Error::Metric("series rows have inconsistent widths".into()));
    }
    Ok(())
}

/// Mean squared error `sum ||y - y_hat||^2 / T`.
pub fn mse(y_true: &[DVector<f64>], y_pred: &[DVector<f64>]) -> Result<f64> {
    check_series(y_true, y_pred)?;
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(sum / y_true.len() as f64)
}

/// Best-fit ratio in percent. Errs on a constant true series (the
/// reference deviation is zero, so the ratio is undefined).
pub fn bfr(y_true: &[DVector<f64>], y_pred: &[DVector<f64>]) -> Result<f64> {
    check_series(y_true, y_pred)?;
    let n_y = y_true[0].len();
    let mut mean = DVector::zeros(n_y);
    for y in y_true {
        mean += y;
    }
    mean /= y_true.len() as f64;

    let err: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    let dev: f64 = y_true.iter().map(|y| (y - &mean).norm_squared()).sum();
    if dev <= 0.0 {
        return Err(Error::Metric(
            "best-fit ratio is undefined for a constant output series".into(),
        ));
    }
    Ok(100.0 * (1.0 - (err / dev).sqrt()))
}

/// Largest mode count accepted by [`mode_match`] (the search is over all
/// `K!` relabelings).
pub const MODE_MATCH_MAX_K: usize = 6;

/// Mode-agreement result: the best percentage and the relabeling (decoded
/// label `m` read as `perm[m]`) that achieves it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMatch {
    pub pct: f64,
    pub perm: Vec<usize>,
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for sub in permutations(k - 1) {
        for slot in 0..k {
            let mut p = sub.clone();
            p.insert(slot, k - 1);
            out.push(p);
        }
    }
    out
}

/// Fraction of steps (in percent) where the decoded mode agrees with the
/// truth under the best relabeling of decoded labels. Ties keep the first
/// relabeling in generation order.
pub fn mode_match(truth: &ModeSequence, decoded: &ModeSequence, k: usize) -> Result<ModeMatch> {
    if truth.len() != decoded.len() || truth.is_empty() {
        return Err(Error::Metric(format!(
            "mode sequences differ in length or are empty: {} vs {}",
            truth.len(),
            decoded.len()
        )));
    }
    if k == 0 || k > MODE_MATCH_MAX_K {
        return Err(Error::Metric(format!(
            "mode agreement supports 1 <= K <= {MODE_MATCH_MAX_K}, got {k}"
        )));
    }
    if truth.as_slice().iter().chain(decoded.as_slice()).any(|&m| m >= k) {
        return Err(Error::Metric(format!("mode label out of range for K = {k}")));
    }

    let mut best: Option<ModeMatch> = None;
    for perm in permutations(k) {
        let hits = truth
            .as_slice()
            .iter()
            .zip(decoded.as_slice())
            .filter(|&(&t, &d)| t == perm[d])
            .count();
        let pct = 100.0 * hits as f64 / truth.len() as f64;
        if best.as_ref().is_none_or(|b| pct > b.pct) {
            best = Some(ModeMatch { pct, perm });
        }
    }
    Ok(best.expect("at least one permutation exists"))
}

/// Prediction-quality report for one evaluated trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Steps evaluated.
    pub t: usize,
    pub mse: f64,
    pub bfr: f64,
    /// Present when the dataset carried true modes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_match_pct: Option<f64>,
    /// Relabeling achieving `mode_match_pct`, 1-based labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_perm: Option<Vec<usize>>,
    /// Squared prediction error at each step.
    pub step_sq_error: Vec<f64>,
}

/// Bundles the metrics for predicted outputs against a reference series,
/// with mode agreement included when the truth is available.
pub fn evaluate_predictions(
    y_true: &[DVector<f64>],
    y_pred: &[DVector<f64>],
    true_modes: Option<&ModeSequence>,
    decoded_modes: Option<&ModeSequence>,
    k: usize,
) -> Result<EvalResult> {
    let mse = mse(y_true, y_pred)?;
    let bfr = bfr(y_true, y_pred)?;
    let step_sq_error = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b).norm_squared())
        .collect();
    let matched = match (true_modes, decoded_modes) {
        (Some(t), Some(d)) => Some(mode_match(t, d, k)?),
        _ => None,
    };
    Ok(EvalResult {
        t: y_true.len(),
        mse,
        bfr,
        mode_match_pct: matched.as_ref().map(|m| m.pct),
        mode_perm: matched.map(|m| m.perm.iter().map(|&p| p + 1).collect()),
        step_sq_error,
    })
}
