//! Identification of switching nonlinear state-space systems.
//!
//! A system that jumps between `K` regimes is modeled by `K` neural
//! submodels (one state-transition network and one output network each)
//! together with a Markov chain over the regime labels. Identification
//! alternates two steps until the cost settles:
//!
//! * mode estimation: a moving-window search decodes the most likely
//!   mode sequence under the current submodels ([`mode`]),
//! * parameter estimation: an extended Kalman filter jointly re-estimates
//!   the hidden state and all submodel weights along the decoded
//!   sequence, and the transition matrix is re-fit from mode counts
//!   ([`ekf`], [`em`]).
//!
//! [`sim`] provides reference data generators (including a built-in
//! two-mode benchmark), [`metrics`] the usual fit scores, and [`io`] the
//! file formats used by the `switchid` binary. Start with the runnable
//! programs under `examples/`.

pub mod ekf;
pub mod em;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mode;
pub mod model;
pub mod predict;
pub mod rnn;
pub mod sim;
pub mod sweep;

pub mod cli;

pub use error::{Error, Result};
pub use model::{
    Activation, Dataset, ModeSequence, NetParams, NetSpec, Submodel, SwitchingModel,
    TransitionMatrix,
};
