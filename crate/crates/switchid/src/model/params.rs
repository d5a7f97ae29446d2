//! Flat parameter vector for one submodel.
//!
//! Layout, pinned so that saved vectors and Jacobian columns line up:
//! state net first, then output net; within a net, layers in order; within
//! a layer, the weight matrix row-major, then the bias.

use nalgebra::DVector;

use super::{NetParams, NetSpec, Submodel};
use crate::error::{Error, Result};

/// Flat `f64` vector holding one submodel's parameters.
pub type ParamVector = DVector<f64>;

/// Offsets of one network's layers inside a flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetLayout {
    /// Per layer: (weight offset, rows, cols, bias offset).
    pub layers: Vec<(usize, usize, usize, usize)>,
    pub len: usize,
}

impl NetLayout {
    /// Layout of `spec` starting at `base` within the enclosing vector.
    pub fn new(spec: &NetSpec, base: usize) -> Self {
        let mut layers = Vec::with_capacity(spec.n_layers());
        let mut off = base;
        for i in 0..spec.n_layers() {
            let rows = spec.layer_dims[i];
            let cols = spec.layer_input_dim(i);
            let w_off = off;
            off += rows * cols;
            let b_off = off;
            off += rows;
            layers.push((w_off, rows, cols, b_off));
        }
        NetLayout { layers, len: off - base }
    }
}

/// Offsets of a submodel's two nets inside its flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmodelLayout {
    pub state: NetLayout,
    pub output: NetLayout,
    pub len: usize,
}

impl SubmodelLayout {
    pub fn new(state_spec: &NetSpec, output_spec: &NetSpec) -> Self {
        let state = NetLayout::new(state_spec, 0);
        let output = NetLayout::new(output_spec, state.len);
        let len = state.len + output.len;
        SubmodelLayout { state, output, len }
    }

    pub fn for_submodel(sub: &Submodel) -> Self {
        SubmodelLayout::new(&sub.state_net.spec, &sub.output_net.spec)
    }

    /// Range of the state net's parameters within the flat vector.
    pub fn state_range(&self) -> std::ops::Range<usize> {
        0..self.state.len
    }

    /// Range of the output net's parameters within the flat vector.
    pub fn output_range(&self) -> std::ops::Range<usize> {
        self.state.len..self.len
    }
}

fn write_net(params: &NetParams, layout: &NetLayout, out: &mut [f64]) {
    for (i, &(w_off, rows, cols, b_off)) in layout.layers.iter().enumerate() {
        let w = &params.weights[i];
        for r in 0..rows {
            for c in 0..cols {
                out[w_off + r * cols + c] = w[(r, c)];
            }
        }
        for r in 0..rows {
            out[b_off + r] = params.biases[i][r];
        }
    }
}

fn read_net(spec: &NetSpec, layout: &NetLayout, v: &[f64]) -> NetParams {
    let mut params = NetParams::zeros(spec);
    for (i, &(w_off, rows, cols, b_off)) in layout.layers.iter().enumerate() {
        for r in 0..rows {
            for c in 0..cols {
                params.weights[i][(r, c)] = v[w_off + r * cols + c];
            }
        }
        for r in 0..rows {
            params.biases[i][r] = v[b_off + r];
        }
    }
    params
}

/// Flattens a submodel's parameters (state net first, row-major weights,
/// then bias, per layer).
pub fn vectorize(sub: &Submodel) -> ParamVector {
    let layout = SubmodelLayout::for_submodel(sub);
    let mut out = vec![0.0; layout.len];
    write_net(&sub.state_net.params, &layout.state, &mut out);
    write_net(&sub.output_net.params, &layout.output, &mut out);
    DVector::from_vec(out)
}

/// Rebuilds a submodel from a flat vector; exact inverse of [`vectorize`].
pub fn devectorize(
    state_spec: &NetSpec,
    output_spec: &NetSpec,
    v: &ParamVector,
) -> Result<Submodel> {
    let layout = SubmodelLayout::new(state_spec, output_spec);
    if v.len() != layout.len {
        return Err(Error::Dim(format!(
            "parameter vector has {} entries, layout expects {}",
            v.len(),
            layout.len
        )));
    }
    let s = v.as_slice();
    Ok(Submodel {
        state_net: super::Net {
            spec: state_spec.clone(),
            params: read_net(state_spec, &layout.state, s),
        },
        output_net: super::Net {
            spec: output_spec.clone(),
            params: read_net(output_spec, &layout.output, s),
        },
    })
}
