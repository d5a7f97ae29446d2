//! Trajectory simulation: the built-in two-mode benchmark and arbitrary
//! saved models, all driven by stream-split deterministic randomness.
//!
//! One `u64` seed expands into four independent ChaCha20 streams — mode
//! chain, inputs, process noise, measurement noise — so changing, say,
//! the noise level never perturbs which modes or inputs are drawn.
//!
//! Timing convention shared with the estimators: at step `t` the system
//! first emits `y(t) = g_{s(t)}(x(t), u(t)) + xi(t)` and then advances
//! `x(t+1) = f_{s(t)}(x(t), u(t)) + zeta(t)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModeSequence, SwitchingModel, TransitionMatrix};
use crate::rnn;

/// RNG stream drawing the mode chain.
pub const STREAM_MODES: u64 = 0;
/// RNG stream drawing the input sequence.
pub const STREAM_INPUTS: u64 = 1;
/// RNG stream drawing process noise.
pub const STREAM_PROCESS_NOISE: u64 = 2;
/// RNG stream drawing measurement noise.
pub const STREAM_MEASUREMENT_NOISE: u64 = 3;

/// ChaCha20 generator on one of the named streams of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Distribution of each input coordinate, drawn independently per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "law")]
pub enum InputLaw {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl Default for InputLaw {
    fn default() -> Self {
        InputLaw::Uniform { lo: 0.0, hi: 1.0 }
    }
}

impl InputLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InputLaw::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::Invalid(format!(
                        "uniform input law needs finite lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
            InputLaw::Gaussian { mean, std } => {
                if !mean.is_finite() || !std.is_finite() || std < 0.0 {
                    return Err(Error::Invalid(format!(
                        "gaussian input law needs finite mean and std >= 0, got ({mean}, {std})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> f64 {
        match *self {
            InputLaw::Uniform { lo, hi } => {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
            InputLaw::Gaussian { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
        }
    }
}

/// Built-in data generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    /// Two-mode system: three states driven through `tanh`, one input,
    /// one output read through `sin`, sticky mode chain (2% switching).
    TwoMode,
}

impl std::str::FromStr for Benchmark {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-mode" | "eq27" => Ok(Benchmark::TwoMode),
            other => Err(Error::Invalid(format!(
                "unknown benchmark {other:?}; expected \"two-mode\""
            ))),
        }
    }
}

impl std::fmt::Display for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Benchmark::TwoMode => write!(f, "two-mode"),
        }
    }
}

/// Benchmark simulation request.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub t: usize,
    /// Variance of both the process and the measurement noise.
    pub noise_var: f64,
    pub seed: u64,
    pub input: InputLaw,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec { t: 1000, noise_var: 1e-3, seed: 0, input: InputLaw::default() }
    }
}

struct TwoModeSystem {
    a: [DMatrix<f64>; 2],
    b: [DVector<f64>; 2],
    c: [DMatrix<f64>; 2],
    d: [f64; 2],
    y_bias: f64,
}

impl TwoModeSystem {
    fn new() -> Self {
        TwoModeSystem {
            a: [
                DMatrix::from_row_slice(3, 3, &[0.8, 0.2, -0.1, 0.0, 0.9, 0.1, 0.1, -0.1, 0.7]),
                DMatrix::from_row_slice(3, 3, &[0.5, -0.2, -0.1, 0.0, 0.9, 0.1, -0.1, -0.3, 0.8]),
            ],
            b: [
                DVector::from_vec(vec![-1.0, 0.5, 1.0]),
                DVector::from_vec(vec![-0.5, 0.1, 0.5]),
            ],
            c: [
                DMatrix::from_row_slice(1, 3, &[-1.0, 1.5, 0.5]),
                DMatrix::from_row_slice(1, 3, &[-0.1, -0.5, 0.8]),
            ],
            d: [0.1, -0.1],
            y_bias: -2.0,
        }
    }

    fn output(&self, m: usize, x: &DVector<f64>, u: f64) -> f64 {
        (&self.c[m] * x.map(f64::sin))[(0, 0)] + self.d[m] * u + self.y_bias
    }

    fn next_state(&self, m: usize, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a[m] * x.map(f64::tanh) + &self.b[m] * u
    }
}

/// The benchmark's sticky mode chain: 98% stay, 2% switch, uniform start.
pub fn benchmark_transition() -> TransitionMatrix {
    TransitionMatrix::new(
        DMatrix::from_row_slice(2, 2, &[0.98, 0.02, 0.02, 0.98]),
        DVector::from_vec(vec![0.5, 0.5]),
    )
    .expect("benchmark transition matrix is valid")
}

/// Samples a mode chain of length `t` from `trans` (start from `pi0`,
/// then column `prev` of `pi` each step).
pub fn simulate_markov_modes(
    trans: &TransitionMatrix,
    t: usize,
    rng: &mut ChaCha20Rng,
) -> ModeSequence {
    let k = trans.k();
    let draw = |probs: &dyn Fn(usize) -> f64, rng: &mut ChaCha20Rng| -> usize {
        let v: f64 = rng.random();
        let mut acc = 0.0;
        for m in 0..k {
            acc += probs(m);
            if v < acc {
                return m;
            }
        }
        k - 1
    };
    let mut modes = Vec::with_capacity(t);
    for i in 0..t {
        let m = if i == 0 {
            draw(&|m| trans.pi0[m], rng)
        } else {
            let prev = modes[i - 1];
            draw(&|m| trans.pi[(m, prev)], rng)
        };
        modes.push(m);
    }
    ModeSequence::from_zero_based(modes, k).expect("sampled labels are in range")
}

/// Simulates the two-mode benchmark. The returned dataset carries the true
/// mode chain and state trajectory.
pub fn simulate_benchmark(_which: Benchmark, spec: &BenchmarkSpec) -> Result<Dataset> {
    if spec.t == 0 {
        return Err(Error::Invalid("simulation length must be at least 1".into()));
    }
    if !spec.noise_var.is_finite() || spec.noise_var < 0.0 {
        return Err(Error::Invalid(format!(
            "noise variance must be finite and >= 0, got {}",
            spec.noise_var
        )));
    }
    spec.input.validate()?;

    let sys = TwoModeSystem::new();
    let modes = simulate_markov_modes(
        &benchmark_transition(),
        spec.t,
        &mut stream_rng(spec.seed, STREAM_MODES),
    );
    let mut in_rng = stream_rng(spec.seed, STREAM_INPUTS);
    let mut zeta_rng = stream_rng(spec.seed, STREAM_PROCESS_NOISE);
    let mut xi_rng = stream_rng(spec.seed, STREAM_MEASUREMENT_NOISE);
    let sd = spec.noise_var.sqrt();

    let mut x = DVector::zeros(3);
    let mut us = Vec::with_capacity(spec.t);
    let mut ys = Vec::with_capacity(spec.t);
    let mut xs = Vec::with_capacity(spec.t);
    for t in 0..spec.t {
        let m = modes[t];
        let u = spec.input.sample(&mut in_rng);
        let xi: f64 = xi_rng.sample::<f64, _>(StandardNormal) * sd;
        let zeta = DVector::from_fn(3, |_, _| {
            zeta_rng.sample::<f64, _>(StandardNormal) * sd
        });
        xs.push(x.clone());
        ys.push(DVector::from_element(1, sys.output(m, &x, u) + xi));
        x = sys.next_state(m, &x, u) + zeta;
        us.push(DVector::from_element(1, u));
    }

    let mut ds = Dataset::new(us, ys)?;
    ds.true_modes = Some(modes);
    ds.true_states = Some(xs);
    ds.validate()?;
    Ok(ds)
}

/// Simulates a switching model along a given mode chain. Noise is drawn
/// from the model's `sigma1`/`sigma2` (through their Cholesky factors)
/// scaled by `noise_scale`; zero gives a deterministic trajectory.
pub fn simulate_with_modes(
    model: &SwitchingModel,
    modes: &ModeSequence,
    seed: u64,
    input: InputLaw,
    noise_scale: f64,
) -> Result<Dataset> {
    model.validate()?;
    input.validate()?;
    if modes.is_empty() {
        return Err(Error::Invalid("simulation length must be at least 1".into()));
    }
    if !noise_scale.is_finite() || noise_scale < 0.0 {
        return Err(Error::Invalid(format!(
            "noise scale must be finite and >= 0, got {noise_scale}"
        )));
    }
    let l1 = model
        .sigma1
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("sigma1 is not positive definite".into()))?
        .unpack();
    let l2 = model
        .sigma2
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Invalid("sigma2 is not positive definite".into()))?
        .unpack();

    let mut in_rng = stream_rng(seed, STREAM_INPUTS);
    let mut zeta_rng = stream_rng(seed, STREAM_PROCESS_NOISE);
    let mut xi_rng = stream_rng(seed, STREAM_MEASUREMENT_NOISE);
    let gauss = |rng: &mut ChaCha20Rng, dim: usize| {
        DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
    };

    let mut x = model.x0.clone();
    let mut us = Vec::with_capacity(modes.len());
    let mut ys = Vec::with_capacity(modes.len());
    let mut xs = Vec::with_capacity(modes.len());
    for t in 0..modes.len() {
        let sub = &model.submodels[modes[t]];
        let u = DVector::from_fn(model.n_u, |_, _| input.sample(&mut in_rng));
        let xi = &l2 * gauss(&mut xi_rng, model.n_y) * noise_scale;
        let zeta = &l1 * gauss(&mut zeta_rng, model.n_x) * noise_scale;
        xs.push(x.clone());
        ys.push(rnn::forward_output(&sub.output_net, &x, &u) + xi);
        x = rnn::forward_state(&sub.state_net, &x, &u) + zeta;
        us.push(u);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "simulated state diverged at step {}",
                t + 1
            )));
        }
    }

    let mut ds = Dataset::new(us, ys)?;
    ds.true_modes = Some(modes.clone());
    ds.true_states = Some(xs);
    ds.validate()?;
    Ok(ds)
}

/// Simulates a switching model for `t` steps: the mode chain comes from
/// the model's own transition matrix, inputs from `input`, noise from the
/// model's covariances scaled by `noise_scale`.
pub fn simulate_model(
    model: &SwitchingModel,
    t: usize,
    seed: u64,
    input: InputLaw,
    noise_scale: f64,
) -> Result<Dataset> {
    if t == 0 {
        return Err(Error::Invalid("simulation length must be at least 1".into()));
    }
    let modes = simulate_markov_modes(&model.trans, t, &mut stream_rng(seed, STREAM_MODES));
    simulate_with_modes(model, &modes, seed, input, noise_scale)
}
