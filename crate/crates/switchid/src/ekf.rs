//! Joint state and parameter estimation with an extended Kalman filter.
//!
//! The filter runs on an augmented vector `[x; theta_1; ...; theta_K]`
//! holding the hidden state plus every submodel's flat parameter vector.
//! At each step only the active mode's blocks enter the Jacobians:
//!
//! * the transition Jacobian couples `x` to the active mode's state-net
//!   parameters and is identity over all parameter blocks,
//! * the output Jacobian couples the measurement to `x` and the active
//!   mode's output-net parameters, and is zero elsewhere,
//! * process noise inflates the state block by `sigma1` and the active
//!   parameter block by the model's `sigma_theta` scale.
//!
//! Inactive blocks still receive gain corrections once cross-covariances
//! with the state exist; that is what lets a single sweep over a
//! mixed-mode trajectory train every submodel.
//!
//! [`predict`] exploits the block sparsity of the transition Jacobian, so
//! a step costs `O((n_x + n_theta_active) * n^2 / n)` rather than the
//! dense `O(n^3)`; tests check it against a dense textbook filter.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    devectorize, vectorize, Dataset, ModeSequence, SubmodelLayout, SwitchingModel,
};
use crate::rnn;

/// Filter tuning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfConfig {
    /// Initial state-block covariance scale (diagonal).
    pub p0_state: f64,
    /// Initial parameter-block covariance scale (diagonal).
    pub p0_param: f64,
    /// Parameter process-noise scale at epoch 0.
    pub sigma_theta0: f64,
    /// Geometric decay of the parameter process noise per epoch.
    pub sigma_theta_decay: f64,
    /// Training sweeps over the data per call to [`train`].
    pub epochs: usize,
    /// Diagonal floor applied when the posterior covariance diagonal
    /// collapses below it; a no-op on healthy steps.
    pub jitter: f64,
    /// Use the Joseph-form covariance update (slower, more robust).
    pub joseph: bool,
}

impl Default for EkfConfig {
    fn default() -> Self {
        EkfConfig {
            p0_state: 1.0,
            p0_param: 0.1,
            sigma_theta0: 1e-2,
            sigma_theta_decay: 0.9,
            epochs: 10,
            jitter: 1e-12,
            joseph: false,
        }
    }
}

/// Index map of the augmented vector `[x; theta_1; ...; theta_K]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugLayout {
    pub n_x: usize,
    subs: Vec<SubmodelLayout>,
    /// Absolute start of each mode's parameter block.
    offsets: Vec<usize>,
    total: usize,
}

impl AugLayout {
    /// Layout of a belief that is all state and no parameter blocks.
    ///
    /// Lets the measurement-update primitives ([`gain`], [`update`]) run on
    /// plain Gaussian filtering problems of dimension `n`.
    pub fn state_only(n: usize) -> Self {
        AugLayout { n_x: n, subs: vec![], offsets: vec![], total: n }
    }

    pub fn new(model: &SwitchingModel) -> Self {
        let subs: Vec<SubmodelLayout> =
            model.submodels.iter().map(SubmodelLayout::for_submodel).collect();
        let mut offsets = Vec::with_capacity(subs.len());
        let mut off = model.n_x;
        for sub in &subs {
            offsets.push(off);
            off += sub.len;
        }
        AugLayout { n_x: model.n_x, subs, offsets, total: off }
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn k(&self) -> usize {
        self.subs.len()
    }

    /// Absolute range of mode `m`'s whole parameter block.
    pub fn block(&self, m: usize) -> std::ops::Range<usize> {
        self.offsets[m]..self.offsets[m] + self.subs[m].len
    }

    /// Absolute range of mode `m`'s state-net parameters.
    pub fn f_block(&self, m: usize) -> std::ops::Range<usize> {
        let r = self.subs[m].state_range();
        self.offsets[m] + r.start..self.offsets[m] + r.end
    }

    /// Absolute range of mode `m`'s output-net parameters.
    pub fn g_block(&self, m: usize) -> std::ops::Range<usize> {
        let r = self.subs[m].output_range();
        self.offsets[m] + r.start..self.offsets[m] + r.end
    }
}

/// Gaussian belief over the augmented vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Completed training epochs; drives the process-noise decay.
    pub epoch: usize,
    pub layout: AugLayout,
}

impl AugmentedBelief {
    /// Fresh belief: mean `[x0; current parameters]`, covariance
    /// `blockdiag(p0_state * I, p0_param * I)`, epoch 0.
    pub fn init(model: &SwitchingModel, cfg: &EkfConfig) -> Self {
        let layout = AugLayout::new(model);
        let n = layout.total_dim();
        let mut mean = DVector::zeros(n);
        mean.rows_mut(0, layout.n_x).copy_from(&model.x0);
        for (m, sub) in model.submodels.iter().enumerate() {
            let v = vectorize(sub);
            let r = layout.block(m);
            mean.rows_mut(r.start, r.len()).copy_from(&v);
        }
        let mut cov = DMatrix::zeros(n, n);
        for i in 0..layout.n_x {
            cov[(i, i)] = cfg.p0_state;
        }
        for i in layout.n_x..n {
            cov[(i, i)] = cfg.p0_param;
        }
        AugmentedBelief { mean, cov, epoch: 0, layout }
    }

    pub fn state_mean(&self) -> DVector<f64> {
        self.mean.rows(0, self.layout.n_x).into_owned()
    }

    /// Rebuilds mode `m`'s submodel from the belief mean.
    pub fn submodel(&self, model: &SwitchingModel, m: usize) -> Result<crate::model::Submodel> {
        let r = self.layout.block(m);
        let v = self.mean.rows(r.start, r.len()).into_owned();
        devectorize(
            &model.submodels[m].state_net.spec,
            &model.submodels[m].output_net.spec,
            &v,
        )
    }

    /// Copies every parameter block back into a model.
    pub fn to_model(&self, model: &SwitchingModel) -> Result<SwitchingModel> {
        let mut out = model.clone();
        for m in 0..model.k() {
            out.submodels[m] = self.submodel(model, m)?;
        }
        Ok(out)
    }

    /// Resets the state block to `x0` with `p0_state * I` covariance and no
    /// state/parameter cross-covariance; parameter blocks are untouched.
    /// Applied at the start of every epoch after the first.
    pub fn reset_state_block(&mut self, model: &SwitchingModel, cfg: &EkfConfig) {
        let s = self.layout.n_x;
        let n = self.layout.total_dim();
        self.mean.rows_mut(0, s).copy_from(&model.x0);
        self.cov.view_mut((0, 0), (s, s)).fill(0.0);
        self.cov.view_mut((0, s), (s, n - s)).fill(0.0);
        self.cov.view_mut((s, 0), (n - s, s)).fill(0.0);
        for i in 0..s {
            self.cov[(i, i)] = cfg.p0_state;
        }
    }

    fn check_layout(&self, model: &SwitchingModel) -> Result<()> {
        let expect = AugLayout::new(model);
        if expect != self.layout {
            return Err(Error::Dim("belief layout does not match the model".into()));
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.cov.iter().all(|v| v.is_finite())
    }
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

/// Raises the whole diagonal when its minimum falls below `floor`.
fn floor_diagonal(p: &mut DMatrix<f64>, floor: f64) {
    let min_diag = p.diagonal().min();
    if min_diag < floor {
        let bump = floor - min_diag;
        for i in 0..p.nrows() {
            p[(i, i)] += bump;
        }
    }
}

/// Time update under the active mode.
///
/// The state block advances through the mode's state net (evaluated at the
/// belief's own parameter block); the covariance applies the block-sparse
/// transition Jacobian and then adds `sigma1` on the state block and
/// `model.sigma_theta` on the active parameter block's diagonal.
pub fn predict(
    belief: &AugmentedBelief,
    model: &SwitchingModel,
    mode: usize,
    u: &DVector<f64>,
) -> Result<AugmentedBelief> {
    belief.check_layout(model)?;
    let layout = &belief.layout;
    let s = layout.n_x;
    let n = layout.total_dim();
    let sub = belief.submodel(model, mode)?;
    let x = belief.state_mean();

    let jac = rnn::jacobian_state(&sub.state_net, &x, u);
    let a = &jac.d_wrt_state;
    let b = &jac.d_wrt_params;
    let f_rng = layout.f_block(mode);
    let n_f = f_rng.len();

    // Top block-rows of F * P: A picks the state rows, B the active
    // state-net parameter rows.
    let r = a * belief.cov.rows(0, s) + b * belief.cov.rows(f_rng.start, n_f);

    let mut cov = belief.cov.clone();
    let new_xx = r.columns(0, s) * a.transpose()
        + r.columns(f_rng.start, n_f) * b.transpose()
        + &model.sigma1;
    cov.view_mut((0, 0), (s, s)).copy_from(&new_xx);
    cov.view_mut((0, s), (s, n - s)).copy_from(&r.columns(s, n - s));
    cov.view_mut((s, 0), (n - s, s))
        .copy_from(&r.columns(s, n - s).transpose());
    let active = layout.block(mode);
    for i in active {
        cov[(i, i)] += model.sigma_theta;
    }
    symmetrize(&mut cov);

    let mut mean = belief.mean.clone();
    mean.rows_mut(0, s)
        .copy_from(&rnn::forward_state(&sub.state_net, &x, u));

    let out = AugmentedBelief { mean, cov, epoch: belief.epoch, layout: layout.clone() };
    if !out.is_finite() {
        return Err(Error::Invalid("predict produced a non-finite belief".into()));
    }
    Ok(out)
}

/// Measurement residual and the output Jacobian row block.
///
/// `h` is `n_y x n` with nonzero columns only over the state block and the
/// active mode's output-net parameters.
pub fn innovation(
    prior: &AugmentedBelief,
    model: &SwitchingModel,
    mode: usize,
    u: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    prior.check_layout(model)?;
    let layout = &prior.layout;
    let sub = prior.submodel(model, mode)?;
    let x = prior.state_mean();

    let y_hat = rnn::forward_output(&sub.output_net, &x, u);
    if y.len() != y_hat.len() {
        return Err(Error::Dim(format!(
            "measurement has {} entries, model emits {}",
            y.len(),
            y_hat.len()
        )));
    }
    let e = y - y_hat;

    let jac = rnn::jacobian_output(&sub.output_net, &x, u);
    let mut h = DMatrix::zeros(model.n_y, layout.total_dim());
    h.view_mut((0, 0), (model.n_y, layout.n_x))
        .copy_from(&jac.d_wrt_state);
    let g_rng = layout.g_block(mode);
    h.view_mut((0, g_rng.start), (model.n_y, g_rng.len()))
        .copy_from(&jac.d_wrt_params);
    Ok((e, h))
}

/// Kalman gain `P- H^T (H P- H^T + sigma2)^{-1}`, solved through a
/// Cholesky factorization of the innovation covariance.
pub fn gain(prior: &AugmentedBelief, h: &DMatrix<f64>, sigma2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let pht = &prior.cov * h.transpose();
    let mut s = h * &pht + sigma2;
    symmetrize(&mut s);
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Invalid("innovation covariance is not positive definite".into()))?;
    Ok(chol.solve(&pht.transpose()).transpose())
}

/// Measurement update: mean correction `gamma * e` and the short-form
/// covariance `(I - gamma H) P-` (Joseph form behind [`EkfConfig::joseph`]).
///
/// Debug builds cross-check the short form against the long form
/// `P- - gamma (H P- H^T + sigma2) gamma^T`, which agrees when `gamma`
/// comes from [`gain`].
pub fn update(
    prior: &AugmentedBelief,
    e: &DVector<f64>,
    h: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    sigma2: &DMatrix<f64>,
    cfg: &EkfConfig,
) -> Result<AugmentedBelief> {
    let n = prior.layout.total_dim();
    let mean = &prior.mean + gamma * e;
    let mut cov = if cfg.joseph {
        let a = DMatrix::identity(n, n) - gamma * h;
        &a * &prior.cov * a.transpose() + gamma * sigma2 * gamma.transpose()
    } else {
        let hp = h * &prior.cov;
        &prior.cov - gamma * hp
    };

    #[cfg(debug_assertions)]
    {
        let s = h * &prior.cov * h.transpose() + sigma2;
        let long_form = &prior.cov - gamma * s * gamma.transpose();
        let tol = 1e-7 * (1.0 + prior.cov.amax());
        debug_assert!(
            (&cov - &long_form).amax() <= tol || cfg.joseph,
            "short- and long-form covariance updates disagree; \
             was `update` called with a gain not from `gain`?"
        );
    }

    symmetrize(&mut cov);
    floor_diagonal(&mut cov, cfg.jitter);
    let out = AugmentedBelief { mean, cov, epoch: prior.epoch, layout: prior.layout.clone() };
    if !out.is_finite() {
        return Err(Error::Invalid("update produced a non-finite belief".into()));
    }
    Ok(out)
}

/// One training epoch's outcome.
#[derive(Debug, Clone)]
pub struct TrainPass {
    pub model: SwitchingModel,
    pub belief: AugmentedBelief,
    /// Squared innovation norm at each step.
    pub sq_residuals: Vec<f64>,
}

/// One full filtering sweep over the data under a fixed mode sequence.
///
/// Step `t` first advances the belief under the previous step's mode (the
/// mode in force during the transition into `t`), then corrects with
/// `y(t)` under `modes[t]`. Afterwards every submodel is devectorized from
/// the posterior mean and the epoch counter advances; the parameter
/// process noise for the sweep is `sigma_theta0 * decay^epoch`.
pub fn train_pass(
    model: &SwitchingModel,
    dataset: &Dataset,
    modes: &ModeSequence,
    belief: AugmentedBelief,
    cfg: &EkfConfig,
) -> Result<TrainPass> {
    dataset.check_model(model)?;
    belief.check_layout(model)?;
    if modes.len() != dataset.len() {
        return Err(Error::Dim(format!(
            "mode sequence has {} entries, dataset has {}",
            modes.len(),
            dataset.len()
        )));
    }
    let epoch = belief.epoch;
    let mut model_eff = model.clone();
    model_eff.sigma_theta = cfg.sigma_theta0 * cfg.sigma_theta_decay.powi(epoch as i32);

    let mut belief = belief;
    if epoch > 0 {
        belief.reset_state_block(model, cfg);
    }

    let diverged = |t: usize| Error::FilterDiverged { t: t + 1, epoch };
    let mut sq_residuals = Vec::with_capacity(dataset.len());
    for t in 0..dataset.len() {
        if t > 0 {
            belief = predict(&belief, &model_eff, modes[t - 1], &dataset.u[t - 1])
                .map_err(|_| diverged(t))?;
        }
        let (e, h) = innovation(&belief, &model_eff, modes[t], &dataset.u[t], &dataset.y[t])
            .map_err(|_| diverged(t))?;
        let gamma = gain(&belief, &h, &model.sigma2).map_err(|_| diverged(t))?;
        belief = update(&belief, &e, &h, &gamma, &model.sigma2, cfg).map_err(|_| diverged(t))?;
        sq_residuals.push(e.norm_squared());
    }

    let trained = belief.to_model(model)?;
    belief.epoch += 1;
    Ok(TrainPass { model: trained, belief, sq_residuals })
}

/// Multi-epoch training outcome. `diverged` carries the step and epoch of
/// the aborting divergence, with `model` holding the last stable epoch's
/// parameters.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub model: SwitchingModel,
    pub belief: AugmentedBelief,
    /// Mean squared innovation norm per completed epoch.
    pub epoch_mse: Vec<f64>,
    pub diverged: Option<(usize, usize)>,
}

/// Runs [`train_pass`] for `cfg.epochs` sweeps starting from `belief`
/// (pass [`AugmentedBelief::init`] for a fresh start).
pub fn train(
    model: &SwitchingModel,
    dataset: &Dataset,
    modes: &ModeSequence,
    belief: AugmentedBelief,
    cfg: &EkfConfig,
) -> Result<TrainRun> {
    let mut current = model.clone();
    let mut belief = belief;
    let mut epoch_mse = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        match train_pass(&current, dataset, modes, belief.clone(), cfg) {
            Ok(pass) => {
                epoch_mse.push(
                    pass.sq_residuals.iter().sum::<f64>() / pass.sq_residuals.len() as f64,
                );
                current = pass.model;
                belief = pass.belief;
            }
            Err(Error::FilterDiverged { t, epoch }) => {
                return Ok(TrainRun {
                    model: current,
                    belief,
                    epoch_mse,
                    diverged: Some((t, epoch)),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrainRun { model: current, belief, epoch_mse, diverged: None })
}

/// Builds the dense transition Jacobian for one step; quadratic in the
/// augmented dimension, intended for tests and diagnostics rather than the
/// filtering loop (which uses the sparse structure directly).
pub fn dense_transition_jacobian(
    belief: &AugmentedBelief,
    model: &SwitchingModel,
    mode: usize,
    u: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    belief.check_layout(model)?;
    let layout = &belief.layout;
    let n = layout.total_dim();
    let s = layout.n_x;
    let sub = belief.submodel(model, mode)?;
    let jac = rnn::jacobian_state(&sub.state_net, &belief.state_mean(), u);
    let mut f = DMatrix::identity(n, n);
    f.view_mut((0, 0), (s, s)).copy_from(&jac.d_wrt_state);
    let f_rng = layout.f_block(mode);
    f.view_mut((0, f_rng.start), (s, f_rng.len()))
        .copy_from(&jac.d_wrt_params);
    Ok(f)
}
