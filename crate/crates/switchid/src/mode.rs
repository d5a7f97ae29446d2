//! Mode-sequence decoding with a moving-window search.
//!
//! Decoding treats the submodel parameters as fixed and asks which mode
//! sequence best explains the data. Exact decoding would score all `K^T`
//! sequences; the moving-window search instead slides a window of length
//! `T_w` along the data, scores every `K^T_w` candidate inside it with a
//! state-only Kalman filter, commits the first mode of the winner, and
//! advances one step (committing the whole window at the end of the data).
//! With `T_w = T - 1` the window covers everything after the first step
//! and the search coincides with the exhaustive one.
//!
//! Scores are negative log-likelihoods: each step contributes its
//! innovation term `(e' S^-1 e + ln det S) / 2` plus the mode-transition
//! penalty `-ln pi[next, prev]` (`-ln pi0[first]` at the start). The
//! `2 pi` constant is the same for every candidate and is accounted for
//! once in the total-cost bookkeeping, not per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModeSequence, SwitchingModel};
use crate::rnn;

/// Gaussian belief over the hidden state alone (parameters frozen).
#[derive(Debug, Clone, PartialEq)]
pub struct StateBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl StateBelief {
    /// Belief at the first step: the model's `x0` with `p0_state * I`.
    pub fn init(model: &SwitchingModel, p0_state: f64) -> Self {
        StateBelief {
            mean: model.x0.clone(),
            cov: DMatrix::identity(model.n_x, model.n_x) * p0_state,
        }
    }

    fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.cov.iter().all(|v| v.is_finite())
    }
}

/// Moving-window search knobs.
#[derive(Debug, Clone)]
pub struct WindowConfig {
    /// Window length; clamped to `T - 1` on short datasets.
    pub t_w: usize,
    /// Refuse windows whose candidate count `K^T_w` exceeds this.
    pub candidate_cap: u128,
    /// Initial state covariance scale.
    pub p0_state: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { t_w: 3, candidate_cap: 1 << 20, p0_state: 1.0 }
    }
}

/// Exhaustive-search knobs.
#[derive(Debug, Clone)]
pub struct ExhaustiveConfig {
    /// Refuse problems whose sequence count `K^T` exceeds this.
    pub limit: u128,
    /// Initial state covariance scale.
    pub p0_state: f64,
}

impl Default for ExhaustiveConfig {
    fn default() -> Self {
        ExhaustiveConfig { limit: 1 << 20, p0_state: 1.0 }
    }
}

/// Search effort accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeStats {
    /// Candidate sequences scored (each full window candidate counts once,
    /// as does each first-step mode candidate).
    pub candidates: u128,
    /// Windows decoded.
    pub windows: usize,
}

/// Decoded sequence plus everything the filter saw along it.
#[derive(Debug, Clone)]
pub struct DecodeTrace {
    pub modes: ModeSequence,
    /// Committed cost of each step: innovation term plus transition penalty.
    pub step_costs: Vec<f64>,
    /// One-step-ahead output prediction at each step.
    pub predicted_outputs: Vec<DVector<f64>>,
    /// Posterior state mean at each step.
    pub filtered_states: Vec<DVector<f64>>,
    pub stats: DecodeStats,
}

/// One scored measurement step.
struct MeasurementStep {
    nll: f64,
    y_hat: DVector<f64>,
    posterior: StateBelief,
}

/// Time update of the state belief under one mode: the mean advances
/// through the mode's state net and the covariance through its state
/// Jacobian, inflated by `sigma1`.
pub fn predict_state(
    model: &SwitchingModel,
    mode: usize,
    belief: &StateBelief,
    u: &DVector<f64>,
) -> StateBelief {
    let net = &model.submodels[mode].state_net;
    let a = rnn::jacobian_state(net, &belief.mean, u).d_wrt_state;
    let mut cov = &a * &belief.cov * a.transpose() + &model.sigma1;
    symmetrize(&mut cov);
    StateBelief { mean: rnn::forward_state(net, &belief.mean, u), cov }
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let n = p.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

fn measurement_step(
    model: &SwitchingModel,
    mode: usize,
    prior: &StateBelief,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<MeasurementStep> {
    if !prior.is_finite() {
        return Err(Error::Invalid("state belief is not finite".into()));
    }
    let net = &model.submodels[mode].output_net;
    let y_hat = rnn::forward_output(net, &prior.mean, u);
    let e = y - &y_hat;
    let h = rnn::jacobian_output(net, &prior.mean, u).d_wrt_state;

    let pht = &prior.cov * h.transpose();
    let mut s = &h * &pht + &model.sigma2;
    symmetrize(&mut s);
    if e.iter().any(|v| !v.is_finite()) || s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("innovation is not finite".into()));
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("innovation covariance is not positive definite".into()))?;

    let ln_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let nll = 0.5 * (e.dot(&chol.solve(&e)) + ln_det);

    let gamma = chol.solve(&pht.transpose()).transpose();
    let mean = &prior.mean + &gamma * &e;
    let mut cov = &prior.cov - &gamma * h * &prior.cov;
    symmetrize(&mut cov);
    Ok(MeasurementStep { nll, y_hat, posterior: StateBelief { mean, cov } })
}

/// Innovation negative log-likelihood of measurement `y` under `mode`,
/// `(e' S^-1 e + ln det S) / 2`, plus the updated belief.
pub fn step_nll(
    model: &SwitchingModel,
    mode: usize,
    prior: &StateBelief,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(f64, StateBelief)> {
    let step = measurement_step(model, mode, prior, u, y)?;
    Ok((step.nll, step.posterior))
}

/// Committed outcome of one decoded step.
#[derive(Debug, Clone)]
struct StepRecord {
    cost: f64,
    y_hat: DVector<f64>,
    posterior: StateBelief,
}

/// Picks the first step's mode: argmin over modes of
/// `step_nll - ln pi0[mode]` on the initial belief. Ties go to the
/// smaller label. Returns the winner, its step record, and all scores.
fn decode_first_step(
    model: &SwitchingModel,
    u: &DVector<f64>,
    y: &DVector<f64>,
    belief0: &StateBelief,
    stats: &mut DecodeStats,
) -> Result<(usize, StepRecord, Vec<f64>)> {
    let mut scores = Vec::with_capacity(model.k());
    let mut best: Option<(usize, StepRecord)> = None;
    for m in 0..model.k() {
        stats.candidates += 1;
        let score = match measurement_step(model, m, belief0, u, y) {
            Ok(step) => {
                let cost = step.nll - model.trans.ln_pi0(m);
                if cost.is_finite() && best.as_ref().is_none_or(|(_, b)| cost < b.cost) {
                    best = Some((
                        m,
                        StepRecord { cost, y_hat: step.y_hat, posterior: step.posterior },
                    ));
                }
                cost
            }
            Err(_) => f64::INFINITY,
        };
        scores.push(score);
    }
    let (mode, record) = best.ok_or(Error::NoFeasibleCandidate { t: 1 })?;
    Ok((mode, record, scores))
}

/// Picks the first step's mode by scoring each mode's innovation
/// likelihood against its prior probability. Returns the winning mode and
/// the per-mode scores.
pub fn initial_mode(
    model: &SwitchingModel,
    u: &DVector<f64>,
    y: &DVector<f64>,
    belief0: &StateBelief,
) -> Result<(usize, Vec<f64>)> {
    let mut stats = DecodeStats::default();
    let (mode, _, scores) = decode_first_step(model, u, y, belief0, &mut stats)?;
    Ok((mode, scores))
}

/// Winning candidate of one window.
#[derive(Debug, Clone)]
struct WindowDecision {
    modes: Vec<usize>,
    steps: Vec<StepRecord>,
}

/// Scores every `K^t_w` mode sequence for the window starting at step
/// `t_start`, entered with committed mode `prev_mode` and the filtered
/// belief from the previous step. Candidates are enumerated in
/// lexicographic order and ties keep the earliest, so the winner is the
/// lexicographically smallest minimizer. Candidates whose cost is not
/// finite are disqualified; if that removes all of them the search fails
/// with [`Error::NoFeasibleCandidate`].
#[allow(clippy::too_many_arguments)]
fn window_decode(
    model: &SwitchingModel,
    ds: &Dataset,
    t_start: usize,
    prev_mode: usize,
    belief: &StateBelief,
    t_w: usize,
    cap: u128,
    stats: &mut DecodeStats,
) -> Result<WindowDecision> {
    let k = model.k();
    let n_candidates = (k as u128)
        .checked_pow(t_w as u32)
        .filter(|&c| c <= cap)
        .ok_or(Error::CandidateCap {
            candidates: (k as u128).saturating_pow(t_w as u32),
            cap,
        })?;

    // The time update into the window's first step runs under the already
    // committed previous mode, so every candidate shares this prior.
    let first_prior = predict_state(model, prev_mode, belief, &ds.u[t_start - 1]);

    let mut candidate = vec![0usize; t_w];
    let mut best: Option<(f64, WindowDecision)> = None;
    for _ in 0..n_candidates {
        stats.candidates += 1;
        let mut cost = 0.0;
        let mut steps: Vec<StepRecord> = Vec::with_capacity(t_w);
        let mut prev = prev_mode;
        let mut prior = first_prior.clone();
        for (i, &m) in candidate.iter().enumerate() {
            let t = t_start + i;
            if i > 0 {
                prior = predict_state(model, prev, &steps[i - 1].posterior, &ds.u[t - 1]);
            }
            let step_cost;
            match measurement_step(model, m, &prior, &ds.u[t], &ds.y[t]) {
                Ok(step) => {
                    step_cost = step.nll - model.trans.ln_pi(m, prev);
                    steps.push(StepRecord {
                        cost: step_cost,
                        y_hat: step.y_hat,
                        posterior: step.posterior,
                    });
                }
                Err(_) => {
                    cost = f64::INFINITY;
                    break;
                }
            }
            cost += step_cost;
            if !cost.is_finite() {
                cost = f64::INFINITY;
                break;
            }
            prev = m;
        }
        if cost.is_finite() && best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, WindowDecision { modes: candidate.clone(), steps }));
        }

        // Lexicographic odometer over the candidate digits.
        for d in (0..t_w).rev() {
            candidate[d] += 1;
            if candidate[d] < k {
                break;
            }
            candidate[d] = 0;
        }
    }
    stats.windows += 1;
    best.map(|(_, d)| d)
        .ok_or(Error::NoFeasibleCandidate { t: t_start + 1 })
}

/// Decodes the full mode sequence with the moving-window search.
///
/// The first step's mode comes from [`initial_mode`]; each interior window
/// then commits only its first mode, and the last window (the one touching
/// the end of the data) commits its whole winning sequence. The candidate
/// counter in the returned stats is exactly
/// `(T - T_w) * K^T_w + K` when `T_w` fits the data.
pub fn moving_window_estimate(
    model: &SwitchingModel,
    ds: &Dataset,
    cfg: &WindowConfig,
) -> Result<DecodeTrace> {
    ds.check_model(model)?;
    let t_len = ds.len();
    let t_w = cfg.t_w.min(t_len - 1).max(1);

    let mut stats = DecodeStats::default();
    let belief0 = StateBelief::init(model, cfg.p0_state);
    let (first_mode, first_rec, _) =
        decode_first_step(model, &ds.u[0], &ds.y[0], &belief0, &mut stats)?;

    let mut modes = Vec::with_capacity(t_len);
    let mut step_costs = Vec::with_capacity(t_len);
    let mut predicted = Vec::with_capacity(t_len);
    let mut filtered = Vec::with_capacity(t_len);
    let mut push = |m: usize, rec: &StepRecord| {
        modes.push(m);
        step_costs.push(rec.cost);
        predicted.push(rec.y_hat.clone());
        filtered.push(rec.posterior.mean.clone());
    };
    push(first_mode, &first_rec);

    let mut belief = first_rec.posterior;
    let mut prev_mode = first_mode;
    if t_len > 1 {
        let last_start = t_len - t_w;
        for t in 1..=last_start {
            let decision = window_decode(
                model,
                ds,
                t,
                prev_mode,
                &belief,
                t_w,
                cfg.candidate_cap,
                &mut stats,
            )?;
            if t < last_start {
                push(decision.modes[0], &decision.steps[0]);
                prev_mode = decision.modes[0];
                belief = decision.steps[0].posterior.clone();
            } else {
                for (m, rec) in decision.modes.iter().zip(&decision.steps) {
                    push(*m, rec);
                }
            }
        }
    }

    Ok(DecodeTrace {
        modes: ModeSequence::from_zero_based(modes, model.k())?,
        step_costs,
        predicted_outputs: predicted,
        filtered_states: filtered,
        stats,
    })
}

/// Decodes by scoring every mode sequence outright (first step anchored
/// the same way as the moving-window search, then all `K^(T-1)` tails).
/// Fails with [`Error::CandidateCap`] when `K^T` exceeds `cfg.limit`.
///
/// The enumeration here is deliberately self-contained rather than a call
/// into the window machinery, so the two can check each other.
pub fn exhaustive_estimate(
    model: &SwitchingModel,
    ds: &Dataset,
    cfg: &ExhaustiveConfig,
) -> Result<DecodeTrace> {
    ds.check_model(model)?;
    let t_len = ds.len();
    let k = model.k();
    if (k as u128)
        .checked_pow(t_len as u32)
        .is_none_or(|c| c > cfg.limit)
    {
        return Err(Error::CandidateCap {
            candidates: (k as u128).saturating_pow(t_len as u32),
            cap: cfg.limit,
        });
    }

    let mut stats = DecodeStats::default();
    let belief0 = StateBelief::init(model, cfg.p0_state);
    let (first_mode, first_rec, _) =
        decode_first_step(model, &ds.u[0], &ds.y[0], &belief0, &mut stats)?;

    let tail_len = t_len - 1;
    let mut best: Option<(f64, Vec<usize>, Vec<StepRecord>)> = None;
    let mut candidate = vec![0usize; tail_len];
    let n_tails = (k as u128).pow(tail_len as u32);
    for _ in 0..n_tails {
        stats.candidates += 1;
        let mut cost = 0.0;
        let mut steps: Vec<StepRecord> = Vec::with_capacity(tail_len);
        let mut prev = first_mode;
        let mut belief = first_rec.posterior.clone();
        let mut feasible = true;
        for (i, &m) in candidate.iter().enumerate() {
            let t = i + 1;
            let prior = predict_state(model, prev, &belief, &ds.u[t - 1]);
            match measurement_step(model, m, &prior, &ds.u[t], &ds.y[t]) {
                Ok(step) => {
                    let step_cost = step.nll - model.trans.ln_pi(m, prev);
                    cost += step_cost;
                    belief = step.posterior.clone();
                    steps.push(StepRecord {
                        cost: step_cost,
                        y_hat: step.y_hat,
                        posterior: step.posterior,
                    });
                }
                Err(_) => {
                    feasible = false;
                    break;
                }
            }
            if !cost.is_finite() {
                feasible = false;
                break;
            }
            prev = m;
        }
        if feasible && cost.is_finite() && best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
            best = Some((cost, candidate.clone(), steps));
        }
        for d in (0..tail_len).rev() {
            candidate[d] += 1;
            if candidate[d] < k {
                break;
            }
            candidate[d] = 0;
        }
    }

    let (_, tail, tail_steps) = if tail_len == 0 {
        (0.0, Vec::new(), Vec::new())
    } else {
        best.ok_or(Error::NoFeasibleCandidate { t: 2 })?
    };

    let mut modes = vec![first_mode];
    modes.extend(&tail);
    let mut step_costs = vec![first_rec.cost];
    let mut predicted = vec![first_rec.y_hat.clone()];
    let mut filtered = vec![first_rec.posterior.mean.clone()];
    for rec in &tail_steps {
        step_costs.push(rec.cost);
        predicted.push(rec.y_hat.clone());
        filtered.push(rec.posterior.mean.clone());
    }
    Ok(DecodeTrace {
        modes: ModeSequence::from_zero_based(modes, k)?,
        step_costs,
        predicted_outputs: predicted,
        filtered_states: filtered,
        stats,
    })
}

/// Per-step filter record along a fixed mode sequence.
#[derive(Debug, Clone)]
pub struct WalkTrace {
    /// Innovation negative log-likelihood at each step.
    pub nll: Vec<f64>,
    /// Mode-sequence penalty at each step (`-ln pi0` then `-ln pi`).
    pub trans: Vec<f64>,
    pub predicted_outputs: Vec<DVector<f64>>,
    pub filtered_states: Vec<DVector<f64>>,
}

/// Runs the state-only filter along a fixed, fully known mode sequence,
/// reporting each step's likelihood and transition terms separately.
pub fn walk_sequence(
    model: &SwitchingModel,
    ds: &Dataset,
    modes: &ModeSequence,
    p0_state: f64,
) -> Result<WalkTrace> {
    ds.check_model(model)?;
    if modes.len() != ds.len() {
        return Err(Error::Dim(format!(
            "mode sequence has {} entries, dataset has {}",
            modes.len(),
            ds.len()
        )));
    }
    let mut belief = StateBelief::init(model, p0_state);
    let mut out = WalkTrace {
        nll: Vec::with_capacity(ds.len()),
        trans: Vec::with_capacity(ds.len()),
        predicted_outputs: Vec::with_capacity(ds.len()),
        filtered_states: Vec::with_capacity(ds.len()),
    };
    for t in 0..ds.len() {
        if t > 0 {
            belief = predict_state(model, modes[t - 1], &belief, &ds.u[t - 1]);
        }
        let step = measurement_step(model, modes[t], &belief, &ds.u[t], &ds.y[t])?;
        out.nll.push(step.nll);
        out.trans.push(if t == 0 {
            -model.trans.ln_pi0(modes[0])
        } else {
            -model.trans.ln_pi(modes[t], modes[t - 1])
        });
        out.predicted_outputs.push(step.y_hat.clone());
        out.filtered_states.push(step.posterior.mean.clone());
        belief = step.posterior;
    }
    Ok(out)
}
