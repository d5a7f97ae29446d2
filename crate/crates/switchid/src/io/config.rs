//! Run configuration: a flat TOML file mirroring the identification
//! options, merged with command-line flags (flags win).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::em::{EmConfig, NoiseSpec};
use crate::error::{Error, Result};
use crate::model::Activation;

/// Every identification option as an optional field. A value of `None`
/// means "use the default" (or, when overlaying, "keep the other layer's
/// value"), so a config file can set just the keys it cares about and
/// command-line flags can override individual keys from the file.
///
/// Unknown keys in the file are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Dataset CSV to read.
    pub dataset: Option<PathBuf>,
    /// Model JSON to read or write.
    pub model: Option<PathBuf>,
    /// Directory for output artifacts.
    pub out_dir: Option<PathBuf>,

    /// Number of modes to fit.
    pub k: Option<usize>,
    /// Independent restarts; the run with the lowest final cost wins.
    pub restarts: Option<usize>,
    /// Base RNG seed.
    pub seed: Option<u64>,

    /// Maximum EM iterations.
    pub iters: Option<usize>,
    /// Moving-window length for mode decoding.
    pub t_w: Option<usize>,
    /// Refuse decodes whose per-window candidate count exceeds this.
    pub candidate_cap: Option<u64>,
    /// Relative cost change below which EM stops.
    pub tol_rel_cost: Option<f64>,
    /// Additive smoothing for transition-matrix re-estimation.
    pub dirichlet_floor: Option<f64>,
    /// Std-dev of the random initial network weights.
    pub init_weight_std: Option<f64>,

    /// State dimension of the fitted submodels.
    pub n_x: Option<usize>,
    /// Hidden-layer widths of each network (empty = affine).
    pub hidden: Option<Vec<usize>>,
    /// Activation on hidden layers.
    pub hidden_activation: Option<Activation>,
    /// Activation on the final layer.
    pub output_activation: Option<Activation>,

    /// Process-noise variance assumed during fitting (scalar, times I).
    pub sigma1: Option<f64>,
    /// Measurement-noise variance assumed during fitting (scalar, times I).
    pub sigma2: Option<f64>,

    /// Initial state covariance scale.
    pub p0_state: Option<f64>,
    /// Initial parameter covariance scale.
    pub p0_param: Option<f64>,
    /// Parameter process-noise scale at epoch 0.
    pub sigma_theta0: Option<f64>,
    /// Geometric decay of the parameter process noise per epoch.
    pub sigma_theta_decay: Option<f64>,
    /// Filter training sweeps per M-step.
    pub epochs: Option<usize>,
    /// Covariance diagonal floor.
    pub jitter: Option<f64>,
    /// Use the Joseph-form covariance update.
    pub joseph: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:ident, $over:ident; $($field:ident),+ $(,)?) => {
        $(if $over.$field.is_some() {
            $base.$field = $over.$field.clone();
        })+
    };
}

macro_rules! apply_fields {
    ($cfg:ident => $target:expr; $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $cfg.$field.clone() {
            $target.$field = v;
        })+
    };
}

impl RunConfig {
    /// Parses a flat TOML file.
    pub fn from_toml_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))
    }

    /// Returns `self` with every field that is set in `over` replaced by
    /// `over`'s value. Used to let command-line flags override the file.
    pub fn overlay(mut self, over: &RunConfig) -> RunConfig {
        overlay_fields!(self, over;
            dataset, model, out_dir, k, restarts, seed, iters, t_w,
            candidate_cap, tol_rel_cost, dirichlet_floor, init_weight_std,
            n_x, hidden, hidden_activation, output_activation, sigma1, sigma2,
            p0_state, p0_param, sigma_theta0, sigma_theta_decay, epochs,
            jitter, joseph,
        );
        self
    }

    /// Builds a validated [`EmConfig`], starting from defaults and applying
    /// every set field.
    pub fn em_config(&self) -> Result<EmConfig> {
        let mut em = EmConfig::default();
        apply_fields!(self => em; k, t_w, tol_rel_cost, dirichlet_floor,
            init_weight_std, seed);
        if let Some(v) = self.iters {
            em.max_iterations = v;
        }
        if let Some(v) = self.candidate_cap {
            em.candidate_cap = v as u128;
        }
        apply_fields!(self => em.arch; n_x, hidden, hidden_activation,
            output_activation);
        if let Some(v) = self.sigma1 {
            em.sigma1 = NoiseSpec::Scalar(v);
        }
        if let Some(v) = self.sigma2 {
            em.sigma2 = NoiseSpec::Scalar(v);
        }
        apply_fields!(self => em.ekf; p0_state, p0_param, sigma_theta0,
            sigma_theta_decay, epochs, jitter, joseph);
        em.validate()?;
        Ok(em)
    }

    /// Restart count (default 1).
    pub fn restart_count(&self) -> Result<usize> {
        let r = self.restarts.unwrap_or(1);
        if r == 0 {
            return Err(Error::Invalid("restarts must be at least 1".into()));
        }
        Ok(r)
    }
}

/// Resolves the output directory: the explicit choice, else the
/// `SWITCHID_OUT_DIR` environment variable, else the current directory.
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(d) = explicit {
        return d.to_path_buf();
    }
    if let Some(d) = std::env::var_os("SWITCHID_OUT_DIR") {
        if !d.is_empty() {
            return PathBuf::from(d);
        }
    }
    PathBuf::from(".")
}
