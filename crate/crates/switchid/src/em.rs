//! Alternating identification loop for switching models.
//!
//! Each iteration altenates two halves:
//!
//! 1. decode the mode sequence with the current parameters frozen
//!    (moving-window search, [`crate::mode`]), then re-estimate the
//!    transition matrix from the decoded chain's pair counts, and
//! 2. re-train every submodel's parameters with the joint state+parameter
//!    filter ([`crate::ekf`]) sweeping the data under the decoded modes.
//!
//! Progress is tracked through the regularized cost `J`: the innovation
//! negative log-likelihood of the data (with its Gaussian constant), the
//! decoded chain's probability under the transition matrix, and a
//! zero-centered Gaussian penalty on the parameters matching their prior
//! covariance. The loop stops when the decoded modes stop changing, the
//! relative cost improvement falls below tolerance, or the iteration
//! budget runs out.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::ekf::{train, AugmentedBelief, EkfConfig};
use crate::error::{Error, Result};
use crate::metrics;
use crate::mode::{moving_window_estimate, walk_sequence, WindowConfig};
use crate::model::{
    vectorize, Activation, Dataset, ModeSequence, Net, NetParams, NetSpec, Submodel,
    SwitchingModel, TransitionMatrix,
};
use crate::sim::stream_rng;

/// RNG stream (of the run seed) drawing the initial parameters.
const STREAM_PARAM_INIT: u64 = 4;

/// Network architecture for freshly initialized submodels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Hidden-state dimension of the fitted model.
    pub n_x: usize,
    /// Hidden-layer widths shared by both nets (the final layer is sized
    /// by the state/output dimension automatically).
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            n_x: 3,
            hidden: vec![6],
            hidden_activation: Activation::Arctan,
            output_activation: Activation::Identity,
        }
    }
}

/// Noise covariance specification: one scale for a diagonal, or a full
/// matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Scalar(1e-3)
    }
}

impl NoiseSpec {
    pub fn to_matrix(&self, dim: usize, what: &str) -> Result<DMatrix<f64>> {
        match self {
            NoiseSpec::Scalar(s) => {
                if !s.is_finite() || *s <= 0.0 {
                    return Err(Error::Config(format!(
                        "{what}: noise scale must be finite and > 0, got {s}"
                    )));
                }
                Ok(DMatrix::identity(dim, dim) * *s)
            }
            NoiseSpec::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Config(format!(
                        "{what}: noise matrix must be {dim} x {dim}"
                    )));
                }
                let mut m = DMatrix::zeros(dim, dim);
                for (i, row) in rows.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        m[(i, j)] = v;
                    }
                }
                Ok(m)
            }
        }
    }
}

/// Identification settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Number of modes to fit.
    pub k: usize,
    pub max_iterations: usize,
    /// Decoding window length.
    pub t_w: usize,
    /// Cap on `K^t_w` candidates per window.
    pub candidate_cap: u128,
    /// Stop when the relative cost improvement falls below this.
    pub tol_rel_cost: f64,
    /// Additive smoothing of transition counts.
    pub dirichlet_floor: f64,
    /// Standard deviation of the initial weights (biases start at zero).
    pub init_weight_std: f64,
    pub seed: u64,
    pub arch: ArchConfig,
    pub sigma1: NoiseSpec,
    pub sigma2: NoiseSpec,
    pub ekf: EkfConfig,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            k: 2,
            max_iterations: 10,
            t_w: 3,
            candidate_cap: 1 << 20,
            tol_rel_cost: 1e-4,
            dirichlet_floor: 1e-3,
            init_weight_std: 0.1,
            seed: 0,
            arch: ArchConfig::default(),
            sigma1: NoiseSpec::default(),
            sigma2: NoiseSpec::default(),
            ekf: EkfConfig::default(),
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("mode count must be at least 1".into()));
        }
        if self.k > metrics::MODE_MATCH_MAX_K {
            return Err(Error::Config(format!(
                "mode count {} exceeds the supported maximum {}",
                self.k,
                metrics::MODE_MATCH_MAX_K
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("iteration budget must be at least 1".into()));
        }
        if self.t_w == 0 {
            return Err(Error::Config("window length must be at least 1".into()));
        }
        if !self.tol_rel_cost.is_finite() || self.tol_rel_cost < 0.0 {
            return Err(Error::Config("cost tolerance must be finite and >= 0".into()));
        }
        if !self.dirichlet_floor.is_finite() || self.dirichlet_floor < 0.0 {
            return Err(Error::Config("count smoothing must be finite and >= 0".into()));
        }
        if !self.init_weight_std.is_finite() || self.init_weight_std < 0.0 {
            return Err(Error::Config("initial weight scale must be finite and >= 0".into()));
        }
        if self.arch.n_x == 0 {
            return Err(Error::Config("state dimension must be at least 1".into()));
        }
        Ok(())
    }
}

/// Re-estimates the transition matrix from a decoded chain: column `l`
/// holds the smoothed frequencies of each successor of mode `l` among the
/// chain's consecutive pairs, `(epsilon + count) / sum(epsilon + count)`.
/// A mode never left (no outgoing pairs, `epsilon = 0`) gets a uniform
/// column. The initial distribution is the smoothed indicator of the
/// chain's first mode.
pub fn update_transition(
    decoded: &ModeSequence,
    k: usize,
    epsilon: f64,
) -> Result<TransitionMatrix> {
    if decoded.is_empty() {
        return Err(Error::Invalid("cannot re-estimate transitions from an empty chain".into()));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::Invalid(format!(
            "count smoothing must be finite and >= 0, got {epsilon}"
        )));
    }
    if decoded.as_slice().iter().any(|&m| m >= k) {
        return Err(Error::Invalid(format!("decoded label out of range for K = {k}")));
    }

    let mut counts: DMatrix<f64> = DMatrix::zeros(k, k);
    for w in decoded.as_slice().windows(2) {
        counts[(w[1], w[0])] += 1.0;
    }

    let mut pi = DMatrix::zeros(k, k);
    for l in 0..k {
        let total: f64 = counts.column(l).sum() + epsilon * k as f64;
        if total > 0.0 {
            for j in 0..k {
                pi[(j, l)] = (counts[(j, l)] + epsilon) / total;
            }
        } else {
            for j in 0..k {
                pi[(j, l)] = 1.0 / k as f64;
            }
        }
    }

    let mut pi0 = DVector::from_element(k, epsilon);
    pi0[decoded[0]] += 1.0;
    pi0 /= 1.0 + epsilon * k as f64;

    TransitionMatrix::new(pi, pi0)
}

/// The regularized cost split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParts {
    /// Innovation negative log-likelihood of the data, Gaussian constant
    /// included.
    pub data_nll: f64,
    /// Negative log-probability of the mode chain.
    pub mode_cost: f64,
    /// Zero-centered Gaussian parameter penalty.
    pub param_prior: f64,
}

impl CostParts {
    pub fn total(&self) -> f64 {
        self.data_nll + self.mode_cost + self.param_prior
    }
}

/// Evaluates the full cost of `(model, modes)` on a dataset: filtering
/// likelihood along the chain plus `T n_y ln(2 pi) / 2`, the chain's
/// transition cost, and the parameter penalty `||theta||^2 / (2 p0)`
/// summed over submodels.
pub fn total_cost(
    model: &SwitchingModel,
    ds: &Dataset,
    modes: &ModeSequence,
    ekf: &EkfConfig,
) -> Result<CostParts> {
    let walk = walk_sequence(model, ds, modes, ekf.p0_state)?;
    let two_pi_term = 0.5 * (ds.len() * model.n_y) as f64 * (2.0 * std::f64::consts::PI).ln();
    let data_nll = walk.nll.iter().sum::<f64>() + two_pi_term;
    let mode_cost = walk.trans.iter().sum::<f64>();
    let param_prior = model
        .submodels
        .iter()
        .map(|s| vectorize(s).norm_squared())
        .sum::<f64>()
        / (2.0 * ekf.p0_param);
    Ok(CostParts { data_nll, mode_cost, param_prior })
}

/// What ended the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The decoded mode sequence repeated exactly.
    ModeFixpoint,
    /// The relative cost improvement fell below tolerance.
    CostTolerance,
    /// The iteration budget ran out.
    MaxIterations,
    /// The parameter filter diverged; results come from the last stable
    /// training epoch.
    FilterDiverged,
}

/// One iteration's progress snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub total_cost: f64,
    /// Improvement over the previous iteration (previous minus current);
    /// absent on the first.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_cost: Option<f64>,
    pub data_nll: f64,
    pub mode_cost: f64,
    pub param_prior: f64,
    /// Transition matrix after this iteration, rows indexed by successor.
    pub transition: Vec<Vec<f64>>,
    pub initial_distribution: Vec<f64>,
    /// Steps whose decoded mode changed from the previous iteration
    /// (first iteration: the full length).
    pub modes_changed: usize,
    /// Wall-clock seconds this iteration took.
    pub seconds: f64,
}

/// Loop summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmReport {
    pub iterations: Vec<IterationRecord>,
    pub stop: StopReason,
    /// True when training aborted on a diverged filter; the model then
    /// comes from the last stable epoch.
    pub degraded: bool,
    pub final_cost: f64,
}

/// Identification result: the fitted model, the last decoded mode chain,
/// and the per-iteration report.
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub model: SwitchingModel,
    pub modes: ModeSequence,
    pub report: EmReport,
}

/// Builds the initial model: `K` identical-architecture submodels with
/// weights drawn from `N(0, init_weight_std^2)` and zero biases, a
/// uniform transition matrix, and the configured noise covariances.
pub fn init_model(cfg: &EmConfig, n_u: usize, n_y: usize) -> Result<SwitchingModel> {
    cfg.validate()?;
    let arch = &cfg.arch;
    let mut state_dims = arch.hidden.clone();
    state_dims.push(arch.n_x);
    let mut output_dims = arch.hidden.clone();
    output_dims.push(n_y);
    let mut acts = vec![arch.hidden_activation; arch.hidden.len()];
    acts.push(arch.output_activation);
    let state_spec = NetSpec::new(arch.n_x + n_u, state_dims, acts.clone())?;
    let output_spec = NetSpec::new(arch.n_x + n_u, output_dims, acts)?;

    let mut rng = stream_rng(cfg.seed, STREAM_PARAM_INIT);
    let normal = Normal::new(0.0, cfg.init_weight_std)
        .map_err(|e| Error::Config(format!("initial weight scale: {e}")))?;
    let mut draw_net = |spec: &NetSpec| {
        let mut params = NetParams::zeros(spec);
        for w in &mut params.weights {
            for v in w.iter_mut() {
                *v = rng.sample(normal);
            }
        }
        Net { spec: spec.clone(), params }
    };
    let submodels: Vec<Submodel> = (0..cfg.k)
        .map(|_| Submodel {
            state_net: draw_net(&state_spec),
            output_net: draw_net(&output_spec),
        })
        .collect();

    let model = SwitchingModel {
        n_x: arch.n_x,
        n_u,
        n_y,
        submodels,
        trans: TransitionMatrix::uniform(cfg.k),
        sigma1: cfg.sigma1.to_matrix(arch.n_x, "sigma1")?,
        sigma2: cfg.sigma2.to_matrix(n_y, "sigma2")?,
        sigma_theta: cfg.ekf.sigma_theta0,
        x0: DVector::zeros(arch.n_x),
    };
    model.validate()?;
    Ok(model)
}

/// Runs the identification loop. See [`run_with_progress`].
pub fn run(ds: &Dataset, cfg: &EmConfig) -> Result<EmOutcome> {
    run_with_progress(ds, cfg, |_| {})
}

/// Runs the identification loop, invoking `on_iteration` after each
/// iteration's record is complete. Identical configurations and data give
/// identical outcomes (the `seconds` field aside).
pub fn run_with_progress(
    ds: &Dataset,
    cfg: &EmConfig,
    mut on_iteration: impl FnMut(&IterationRecord),
) -> Result<EmOutcome> {
    cfg.validate()?;
    ds.validate()?;
    let mut model = init_model(cfg, ds.n_u(), ds.n_y())?;
    let window = WindowConfig {
        t_w: cfg.t_w,
        candidate_cap: cfg.candidate_cap,
        p0_state: cfg.ekf.p0_state,
    };

    let mut report = EmReport {
        iterations: Vec::with_capacity(cfg.max_iterations),
        stop: StopReason::MaxIterations,
        degraded: false,
        final_cost: f64::NAN,
    };
    let mut prev_modes: Option<ModeSequence> = None;
    let mut prev_cost: Option<f64> = None;
    let mut modes = ModeSequence::from_zero_based(vec![], cfg.k)?;
    // The filter belief persists across iterations: parameter confidence
    // keeps accumulating, so later refits are proximal corrections rather
    // than refits from scratch.
    let mut carried: Option<AugmentedBelief> = None;

    for iteration in 1..=cfg.max_iterations {
        let started = Instant::now();

        // Decode under frozen parameters. The iteration's cost is the
        // decode's committed cost: data likelihood and chain probability
        // under exactly the model the decoder saw, plus the parameter
        // penalty.
        let trace = moving_window_estimate(&model, ds, &window)?;
        modes = trace.modes;
        let parts = total_cost(&model, ds, &modes, &cfg.ekf)?;
        let cost = parts.total();

        // Refresh the chain statistics, then re-train the submodels along
        // the decoded chain.
        model.trans = update_transition(&modes, cfg.k, cfg.dirichlet_floor)?;
        let belief = carried
            .take()
            .unwrap_or_else(|| AugmentedBelief::init(&model, &cfg.ekf));
        let run = train(&model, ds, &modes, belief, &cfg.ekf)?;
        model = run.model;
        carried = Some(run.belief);
        if run.diverged.is_some() {
            report.degraded = true;
        }
        let modes_changed = prev_modes
            .as_ref()
            .map_or(modes.len(), |p| modes.changes_from(p));
        let record = IterationRecord {
            iteration,
            total_cost: cost,
            delta_cost: prev_cost.map(|p| p - cost),
            data_nll: parts.data_nll,
            mode_cost: parts.mode_cost,
            param_prior: parts.param_prior,
            transition: (0..cfg.k)
                .map(|j| (0..cfg.k).map(|l| model.trans.pi[(j, l)]).collect())
                .collect(),
            initial_distribution: model.trans.pi0.iter().copied().collect(),
            modes_changed,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_iteration(&record);
        report.iterations.push(record);
        report.final_cost = cost;

        if report.degraded {
            report.stop = StopReason::FilterDiverged;
            break;
        }
        if prev_modes.is_some() && modes_changed == 0 {
            report.stop = StopReason::ModeFixpoint;
            break;
        }
        if let Some(p) = prev_cost {
            if (p - cost).abs() <= cfg.tol_rel_cost * p.abs().max(1.0) {
                report.stop = StopReason::CostTolerance;
                break;
            }
        }
        prev_modes = Some(modes.clone());
        prev_cost = Some(cost);
    }

    Ok(EmOutcome { model, modes, report })
}

/// Summary of one restart inside a [`RestartOutcome`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartRun {
    /// Restart index (0-based); its seed is the base seed plus the index.
    pub index: usize,
    pub seed: u64,
    pub final_cost: f64,
    pub degraded: bool,
    pub stop: StopReason,
    pub iterations: usize,
}

/// Best-of-restarts identification result.
#[derive(Debug)]
pub struct RestartOutcome {
    pub best: EmOutcome,
    /// Index of the winning restart.
    pub best_index: usize,
    /// Every restart that completed, in index order.
    pub runs: Vec<RestartRun>,
    /// Restarts that aborted with an error, as (index, message).
    pub failures: Vec<(usize, String)>,
}

/// Runs [`run`] `restarts` times with seeds `cfg.seed + 0..restarts`
/// (only the parameter initialization changes) and keeps the best run.
pub fn best_of_restarts(ds: &Dataset, cfg: &EmConfig, restarts: usize) -> Result<RestartOutcome> {
    best_of_restarts_with_progress(ds, cfg, restarts, |_, _| {})
}

/// Best-of-restarts with a per-iteration callback `(restart_index, record)`.
///
/// Restarts run on worker threads, but the reduction is deterministic:
/// non-degraded runs beat degraded ones, then lower final cost wins, and
/// an exact tie goes to the smaller restart index. Errors in individual
/// restarts are tolerated as long as at least one restart completes.
pub fn best_of_restarts_with_progress(
    ds: &Dataset,
    cfg: &EmConfig,
    restarts: usize,
    on_iteration: impl Fn(usize, &IterationRecord) + Sync,
) -> Result<RestartOutcome> {
    if restarts == 0 {
        return Err(Error::Invalid("restart count must be at least 1".into()));
    }
    let configs: Vec<EmConfig> = (0..restarts)
        .map(|i| EmConfig { seed: cfg.seed.wrapping_add(i as u64), ..cfg.clone() })
        .collect();

    let results: Vec<Result<EmOutcome>> = if restarts == 1 {
        vec![run_with_progress(ds, &configs[0], |r| on_iteration(0, r))]
    } else {
        let on_iteration = &on_iteration;
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    scope.spawn(move || run_with_progress(ds, c, |r| on_iteration(i, r)))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("restart thread panicked")).collect()
        })
    };

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut outcomes = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(out) => {
                runs.push(RestartRun {
                    index: i,
                    seed: configs[i].seed,
                    final_cost: out.report.final_cost,
                    degraded: out.report.degraded,
                    stop: out.report.stop,
                    iterations: out.report.iterations.len(),
                });
                outcomes.push((i, out));
            }
            Err(e) => failures.push((i, e.to_string())),
        }
    }

    let best_pos = outcomes
        .iter()
        .enumerate()
        .min_by(|(_, (ia, a)), (_, (ib, b))| {
            let ka = (a.report.degraded, a.report.final_cost);
            let kb = (b.report.degraded, b.report.final_cost);
            ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ia.cmp(ib))
        })
        .map(|(pos, _)| pos);
    match best_pos {
        Some(pos) => {
            let (best_index, best) = outcomes.swap_remove(pos);
            Ok(RestartOutcome { best, best_index, runs, failures })
        }
        None => Err(Error::Invalid(format!(
            "all {restarts} restarts failed; first error: {}",
            failures.first().map(|(_, m)| m.as_str()).unwrap_or("unknown")
        ))),
    }
}
