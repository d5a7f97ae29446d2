//! Core model types: networks, submodels, transition matrix, datasets.
//!
//! A [`SwitchingModel`] bundles `K` submodels (state net + output net per
//! mode), a column-stochastic [`TransitionMatrix`], noise covariances and
//! the initial state mean. Mode labels are `1..=K` in files and on the
//! command line, `0..K-1` everywhere in memory.

mod params;
mod serialize;

pub use params::{vectorize, devectorize, NetLayout, ParamVector, SubmodelLayout};
pub use serialize::{load_model, save_model, FORMAT_VERSION};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column sums of a stochastic matrix may deviate from 1 by at most this.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Scalar activation applied elementwise between network layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Arctan,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Arctan => z.atan(),
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                // Split to avoid overflow of exp for large |z|.
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Identity => z,
        }
    }

    /// Pointwise derivative; the ReLU derivative at 0 is defined as 0.
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Arctan => 1.0 / (1.0 + z * z),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = Activation::Sigmoid.apply(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Arctan => "arctan",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

/// Shape of one feedforward network.
///
/// `layer_dims[i]` is the width of layer `i`; the last entry is the output
/// dimension. `activations[i]` belongs to layer `i`: for a state net the
/// final entry is unused (the last layer stays affine), for an output net
/// it is applied after the last affine layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub input_dim: usize,
    pub layer_dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl NetSpec {
    pub fn new(input_dim: usize, layer_dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = NetSpec { input_dim, layer_dims, activations };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Invalid("net input_dim must be positive".into()));
        }
        if self.layer_dims.is_empty() {
            return Err(Error::Invalid("net needs at least one layer".into()));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::Invalid("net layer widths must be positive".into()));
        }
        if self.activations.len() != self.layer_dims.len() {
            return Err(Error::Dim(format!(
                "net has {} layers but {} activations",
                self.layer_dims.len(),
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated: non-empty")
    }

    /// Input width of layer `i` (the previous layer's width, or `input_dim`).
    pub fn layer_input_dim(&self, i: usize) -> usize {
        if i == 0 {
            self.input_dim
        } else {
            self.layer_dims[i - 1]
        }
    }

    /// Total parameter count: per layer, a weight matrix plus a bias.
    pub fn n_params(&self) -> usize {
        (0..self.n_layers())
            .map(|i| self.layer_dims[i] * (self.layer_input_dim(i) + 1))
            .sum()
    }
}

/// Weights and biases matching a [`NetSpec`], one `(W, b)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl NetParams {
    pub fn zeros(spec: &NetSpec) -> Self {
        let weights = (0..spec.n_layers())
            .map(|i| DMatrix::zeros(spec.layer_dims[i], spec.layer_input_dim(i)))
            .collect();
        let biases = (0..spec.n_layers())
            .map(|i| DVector::zeros(spec.layer_dims[i]))
            .collect();
        NetParams { weights, biases }
    }

    pub fn validate(&self, spec: &NetSpec) -> Result<()> {
        if self.weights.len() != spec.n_layers() || self.biases.len() != spec.n_layers() {
            return Err(Error::Dim(format!(
                "params have {} weight / {} bias layers, spec has {}",
                self.weights.len(),
                self.biases.len(),
                spec.n_layers()
            )));
        }
        for i in 0..spec.n_layers() {
            let (rows, cols) = (spec.layer_dims[i], spec.layer_input_dim(i));
            if self.weights[i].shape() != (rows, cols) {
                return Err(Error::Dim(format!(
                    "layer {} weight is {:?}, expected ({rows}, {cols})",
                    i,
                    self.weights[i].shape()
                )));
            }
            if self.biases[i].len() != rows {
                return Err(Error::Dim(format!(
                    "layer {} bias has {} entries, expected {rows}",
                    i,
                    self.biases[i].len()
                )));
            }
        }
        Ok(())
    }
}

/// One network: its shape plus current parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub spec: NetSpec,
    pub params: NetParams,
}

impl Net {
    pub fn zeros(spec: NetSpec) -> Self {
        let params = NetParams::zeros(&spec);
        Net { spec, params }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.params.validate(&self.spec)
    }
}

/// One regime: a state-transition network and an output network.
///
/// Both nets read the stacked input `[x; u]`; the state net emits the next
/// state (width `n_x`), the output net the measurement (width `n_y`).
#[derive(Debug, Clone, PartialEq)]
pub struct Submodel {
    pub state_net: Net,
    pub output_net: Net,
}

impl Submodel {
    pub fn validate(&self, n_x: usize, n_u: usize, n_y: usize) -> Result<()> {
        self.state_net.validate()?;
        self.output_net.validate()?;
        if self.state_net.spec.input_dim != n_x + n_u {
            return Err(Error::Dim(format!(
                "state net input_dim {} != n_x + n_u = {}",
                self.state_net.spec.input_dim,
                n_x + n_u
            )));
        }
        if self.output_net.spec.input_dim != n_x + n_u {
            return Err(Error::Dim(format!(
                "output net input_dim {} != n_x + n_u = {}",
                self.output_net.spec.input_dim,
                n_x + n_u
            )));
        }
        if self.state_net.spec.output_dim() != n_x {
            return Err(Error::Dim(format!(
                "state net output dim {} != n_x = {n_x}",
                self.state_net.spec.output_dim()
            )));
        }
        if self.output_net.spec.output_dim() != n_y {
            return Err(Error::Dim(format!(
                "output net output dim {} != n_y = {n_y}",
                self.output_net.spec.output_dim()
            )));
        }
        Ok(())
    }

    /// Parameter count of both nets (state net first in the flat layout).
    pub fn n_params(&self) -> usize {
        self.state_net.spec.n_params() + self.output_net.spec.n_params()
    }
}

/// Column-stochastic mode transition matrix plus initial distribution.
///
/// `pi[(j, l)]` is the probability of moving to mode `j` given the previous
/// mode `l`; every column sums to 1 within [`STOCHASTIC_TOL`]. `pi0` is the
/// distribution of the first mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub pi: DMatrix<f64>,
    pub pi0: DVector<f64>,
}

impl TransitionMatrix {
    pub fn new(pi: DMatrix<f64>, pi0: DVector<f64>) -> Result<Self> {
        let t = TransitionMatrix { pi, pi0 };
        t.validate()?;
        Ok(t)
    }

    pub fn uniform(k: usize) -> Self {
        let p = 1.0 / k as f64;
        TransitionMatrix {
            pi: DMatrix::from_element(k, k, p),
            pi0: DVector::from_element(k, p),
        }
    }

    pub fn k(&self) -> usize {
        self.pi0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.pi0.len();
        if k == 0 {
            return Err(Error::Invalid("transition matrix needs K >= 1".into()));
        }
        if self.pi.shape() != (k, k) {
            return Err(Error::Dim(format!(
                "transition matrix is {:?}, expected ({k}, {k})",
                self.pi.shape()
            )));
        }
        for v in self.pi.iter().chain(self.pi0.iter()) {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::Invalid(
                    "transition probabilities must be finite and non-negative".into(),
                ));
            }
        }
        for l in 0..k {
            let s: f64 = self.pi.column(l).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Invalid(format!(
                    "transition column {} sums to {s:.17}, expected 1",
                    l + 1
                )));
            }
        }
        let s0: f64 = self.pi0.sum();
        if (s0 - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::Invalid(format!(
                "initial mode distribution sums to {s0:.17}, expected 1"
            )));
        }
        Ok(())
    }

    /// `ln pi[(next, prev)]`; `-inf` for zero entries.
    pub fn ln_pi(&self, next: usize, prev: usize) -> f64 {
        self.pi[(next, prev)].ln()
    }

    /// `ln pi0[first]`; `-inf` for zero entries.
    pub fn ln_pi0(&self, first: usize) -> f64 {
        self.pi0[first].ln()
    }
}

/// A decoded or simulated mode sequence, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeSequence(Vec<usize>);

impl ModeSequence {
    /// Wraps 0-based labels, checking each is `< k`.
    pub fn from_zero_based(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&m| m >= k) {
            return Err(Error::Invalid(format!(
                "mode label {} out of range for K = {k}",
                bad + 1
            )));
        }
        Ok(ModeSequence(labels))
    }

    /// Converts 1-based labels (the file and CLI convention), checking range.
    pub fn from_one_based(labels: &[usize], k: usize) -> Result<Self> {
        let mut out = Vec::with_capacity(labels.len());
        for &m in labels {
            if m == 0 || m > k {
                return Err(Error::Invalid(format!(
                    "mode label {m} out of range 1..={k}"
                )));
            }
            out.push(m - 1);
        }
        Ok(ModeSequence(out))
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&m| m + 1).collect()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of positions where the two sequences differ.
    pub fn changes_from(&self, other: &ModeSequence) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| a != b)
            .count()
            + self.0.len().abs_diff(other.0.len())
    }

    /// Applies a mode relabeling: label `m` becomes `perm[m]`.
    pub fn relabeled(&self, perm: &[usize]) -> ModeSequence {
        ModeSequence(self.0.iter().map(|&m| perm[m]).collect())
    }
}

impl std::ops::Index<usize> for ModeSequence {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Complete switching model: `K` submodels, mode chain, noise, initial state.
///
/// `sigma_theta` is the parameter process-noise scale used by the joint
/// EKF when this model is being trained; it is runtime state and is not
/// persisted in model files.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingModel {
    pub n_x: usize,
    pub n_u: usize,
    pub n_y: usize,
    pub submodels: Vec<Submodel>,
    pub trans: TransitionMatrix,
    pub sigma1: DMatrix<f64>,
    pub sigma2: DMatrix<f64>,
    pub sigma_theta: f64,
    pub x0: DVector<f64>,
}

impl SwitchingModel {
    pub fn k(&self) -> usize {
        self.submodels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.submodels.is_empty() {
            return Err(Error::Invalid("model needs at least one submodel".into()));
        }
        for (i, sub) in self.submodels.iter().enumerate() {
            sub.validate(self.n_x, self.n_u, self.n_y).map_err(|e| {
                Error::Invalid(format!("submodel {}: {e}", i + 1))
            })?;
        }
        if self.trans.k() != self.k() {
            return Err(Error::Dim(format!(
                "transition matrix has K = {}, model has K = {}",
                self.trans.k(),
                self.k()
            )));
        }
        self.trans.validate()?;
        validate_spd(&self.sigma1, self.n_x, "sigma1")?;
        validate_spd(&self.sigma2, self.n_y, "sigma2")?;
        if !(self.sigma_theta.is_finite() && self.sigma_theta >= 0.0) {
            return Err(Error::Invalid("sigma_theta must be finite and >= 0".into()));
        }
        if self.x0.len() != self.n_x {
            return Err(Error::Dim(format!(
                "x0 has {} entries, expected n_x = {}",
                self.x0.len(),
                self.n_x
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("x0 must be finite".into()));
        }
        Ok(())
    }

    /// Returns the model with submodel `m` moved to index `perm[m]`, and the
    /// transition matrix and initial distribution permuted to match.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<SwitchingModel> {
        let k = self.k();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Invalid(format!("not a permutation of 0..{k}")));
        }
        let mut subs = self.submodels.clone();
        let mut pi = DMatrix::zeros(k, k);
        let mut pi0 = DVector::zeros(k);
        for m in 0..k {
            subs[perm[m]] = self.submodels[m].clone();
            pi0[perm[m]] = self.trans.pi0[m];
            for l in 0..k {
                pi[(perm[m], perm[l])] = self.trans.pi[(m, l)];
            }
        }
        Ok(SwitchingModel {
            submodels: subs,
            trans: TransitionMatrix { pi, pi0 },
            ..self.clone()
        })
    }
}

fn validate_spd(m: &DMatrix<f64>, dim: usize, name: &str) -> Result<()> {
    if m.shape() != (dim, dim) {
        return Err(Error::Dim(format!(
            "{name} is {:?}, expected ({dim}, {dim})",
            m.shape()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("{name} must be finite")));
    }
    for i in 0..dim {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * (1.0 + m[(i, j)].abs()) {
                return Err(Error::Invalid(format!("{name} is not symmetric")));
            }
        }
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::Invalid(format!("{name} is not positive definite")));
    }
    Ok(())
}

/// An input/output record of length `T`, optionally with the generating
/// mode sequence and state trajectory attached (simulated data has both).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub true_modes: Option<ModeSequence>,
    pub true_states: Option<Vec<DVector<f64>>>,
}

impl Dataset {
    pub fn new(u: Vec<DVector<f64>>, y: Vec<DVector<f64>>) -> Result<Self> {
        let ds = Dataset { u, y, true_modes: None, true_states: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.is_empty() || self.u.len() != self.y.len() {
            return Err(Error::Dim(format!(
                "dataset has {} inputs and {} outputs; need equal lengths >= 1",
                self.u.len(),
                self.y.len()
            )));
        }
        let (n_u, n_y) = (self.u[0].len(), self.y[0].len());
        if n_u == 0 || n_y == 0 {
            return Err(Error::Invalid("dataset needs n_u >= 1 and n_y >= 1".into()));
        }
        if self.u.iter().any(|v| v.len() != n_u) || self.y.iter().any(|v| v.len() != n_y) {
            return Err(Error::Dim("dataset rows have inconsistent widths".into()));
        }
        if let Some(modes) = &self.true_modes {
            if modes.len() != self.u.len() {
                return Err(Error::Dim("true_modes length differs from T".into()));
            }
        }
        if let Some(xs) = &self.true_states {
            if xs.len() != self.u.len() {
                return Err(Error::Dim("true_states length differs from T".into()));
            }
            let n_x = xs[0].len();
            if xs.iter().any(|v| v.len() != n_x) {
                return Err(Error::Dim("true_states rows have inconsistent widths".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn n_u(&self) -> usize {
        self.u[0].len()
    }

    pub fn n_y(&self) -> usize {
        self.y[0].len()
    }

    /// Checks the dataset's widths against a model's `n_u`/`n_y`.
    pub fn check_model(&self, model: &SwitchingModel) -> Result<()> {
        if self.n_u() != model.n_u || self.n_y() != model.n_y {
            return Err(Error::Dim(format!(
                "dataset is n_u = {}, n_y = {}; model expects n_u = {}, n_y = {}",
                self.n_u(),
                self.n_y(),
                model.n_u,
                model.n_y
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_values() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        assert_eq!(Activation::Relu.deriv(0.0), 0.0);
        assert_eq!(Activation::Relu.deriv(1e-12), 1.0);
        assert_eq!(Activation::Identity.apply(3.5), 3.5);
        assert_eq!(Activation::Identity.deriv(-7.0), 1.0);
        assert!((Activation::Sigmoid.apply(0.0) - 0.5).abs() < 1e-15);
        assert!((Activation::Tanh.deriv(0.0) - 1.0).abs() < 1e-15);
        assert!((Activation::Arctan.deriv(1.0) - 0.5).abs() < 1e-15);
        // No overflow far in the tails.
        assert!(Activation::Sigmoid.apply(-750.0) >= 0.0);
        assert!(Activation::Sigmoid.apply(750.0) <= 1.0);
    }

    #[test]
    fn activation_derivative_matches_finite_differences() {
        let acts = [
            Activation::Tanh,
            Activation::Arctan,
            Activation::Sigmoid,
            Activation::Identity,
            Activation::Relu,
        ];
        let h = 1e-6;
        for act in acts {
            for z in [-2.0, -0.73, 0.4, 1.9] {
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!(
                    (act.deriv(z) - fd).abs() < 1e-8,
                    "{} deriv mismatch at {z}",
                    act.name()
                );
            }
        }
    }

    #[test]
    fn net_spec_validation() {
        assert!(NetSpec::new(4, vec![6, 3], vec![Activation::Arctan, Activation::Identity]).is_ok());
        assert!(NetSpec::new(4, vec![], vec![]).is_err());
        assert!(NetSpec::new(4, vec![6, 3], vec![Activation::Arctan]).is_err());
        assert!(NetSpec::new(0, vec![3], vec![Activation::Identity]).is_err());
    }

    #[test]
    fn net_param_count() {
        let spec = NetSpec::new(4, vec![6, 3], vec![Activation::Arctan, Activation::Identity]).unwrap();
        assert_eq!(spec.n_params(), 6 * 5 + 3 * 7);
    }

    #[test]
    fn transition_validation() {
        let t = TransitionMatrix::uniform(3);
        assert!(t.validate().is_ok());

        let bad = TransitionMatrix {
            pi: DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.9]),
            pi0: DVector::from_vec(vec![0.5, 0.5]),
        };
        assert!(bad.validate().is_err());

        let neg = TransitionMatrix {
            pi: DMatrix::from_row_slice(2, 2, &[1.1, 0.0, -0.1, 1.0]),
            pi0: DVector::from_vec(vec![0.5, 0.5]),
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn mode_sequence_label_conventions() {
        let s = ModeSequence::from_one_based(&[1, 2, 2, 1], 2).unwrap();
        assert_eq!(s.as_slice(), &[0, 1, 1, 0]);
        assert_eq!(s.one_based(), vec![1, 2, 2, 1]);
        assert!(ModeSequence::from_one_based(&[0], 2).is_err());
        assert!(ModeSequence::from_one_based(&[3], 2).is_err());
        assert!(ModeSequence::from_zero_based(vec![2], 2).is_err());

        let t = ModeSequence::from_one_based(&[1, 1, 2, 1], 2).unwrap();
        assert_eq!(s.changes_from(&t), 1);
        assert_eq!(s.changes_from(&s), 0);
    }

    #[test]
    fn permute_modes_roundtrip() {
        let spec = NetSpec::new(3, vec![2], vec![Activation::Identity]).unwrap();
        let out_spec = NetSpec::new(3, vec![1], vec![Activation::Identity]).unwrap();
        let mk = |v: f64| Submodel {
            state_net: Net {
                spec: spec.clone(),
                params: NetParams {
                    weights: vec![DMatrix::from_element(2, 3, v)],
                    biases: vec![DVector::from_element(2, v)],
                },
            },
            output_net: Net::zeros(out_spec.clone()),
        };
        let model = SwitchingModel {
            n_x: 2,
            n_u: 1,
            n_y: 1,
            submodels: vec![mk(1.0), mk(2.0)],
            trans: TransitionMatrix::new(
                DMatrix::from_row_slice(2, 2, &[0.9, 0.3, 0.1, 0.7]),
                DVector::from_vec(vec![0.8, 0.2]),
            )
            .unwrap(),
            sigma1: DMatrix::identity(2, 2),
            sigma2: DMatrix::identity(1, 1),
            sigma_theta: 0.0,
            x0: DVector::zeros(2),
        };
        model.validate().unwrap();

        let swapped = model.permute_modes(&[1, 0]).unwrap();
        assert_eq!(swapped.submodels[1], model.submodels[0]);
        assert_eq!(swapped.trans.pi[(0, 1)], model.trans.pi[(1, 0)]);
        assert_eq!(swapped.trans.pi0[1], model.trans.pi0[0]);
        let back = swapped.permute_modes(&[1, 0]).unwrap();
        assert_eq!(back, model);
        assert!(model.permute_modes(&[0, 0]).is_err());
    }

    #[test]
    fn dataset_validation() {
        let u = vec![DVector::from_vec(vec![1.0]); 4];
        let y = vec![DVector::from_vec(vec![0.0, 1.0]); 4];
        let ds = Dataset::new(u.clone(), y).unwrap();
        assert_eq!((ds.len(), ds.n_u(), ds.n_y()), (4, 1, 2));

        assert!(Dataset::new(u.clone(), vec![]).is_err());
        let ragged = vec![
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![1.0]),
            DVector::from_vec(vec![1.0]),
        ];
        assert!(Dataset::new(u, ragged).is_err());
    }
}
