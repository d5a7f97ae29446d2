//! Network evaluation and analytic Jacobians.
//!
//! Both network forms read the stacked input `[x; u]` and run the same
//! affine-then-activation recursion; they differ only at the end:
//!
//! * state form ([`forward_state`]): the last layer stays affine, so its
//!   activation entry in the [`NetSpec`] is ignored;
//! * output form ([`forward_output`]): the last activation is applied
//!   after the final affine layer.
//!
//! Jacobians are computed layer by layer from the same recursion, with the
//! parameter columns ordered exactly like the flat layout in
//! [`crate::model::vectorize`] (row-major weights, then bias, per layer).

use nalgebra::{DMatrix, DVector};

use crate::model::{Net, NetLayout, NetSpec};

/// Jacobians of one network evaluation at a point.
#[derive(Debug, Clone)]
pub struct JacobianPair {
    /// Derivative w.r.t. the state part of the input, `out_dim x n_x`.
    pub d_wrt_state: DMatrix<f64>,
    /// Derivative w.r.t. the net's own parameters, `out_dim x n_params`,
    /// columns in flat-layout order.
    pub d_wrt_params: DMatrix<f64>,
}

fn stack_input(x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut input = DVector::zeros(x.len() + u.len());
    input.rows_mut(0, x.len()).copy_from(x);
    input.rows_mut(x.len(), u.len()).copy_from(u);
    input
}

/// Pre-activations `z_i = W_i a_{i-1} + b_i` for every layer, plus the
/// post-activation inputs `a` (with `a[0]` the stacked input).
fn forward_trace(net: &Net, input: DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let l = net.spec.n_layers();
    let mut z = Vec::with_capacity(l);
    let mut a = Vec::with_capacity(l + 1);
    a.push(input);
    for i in 0..l {
        let zi = &net.params.weights[i] * &a[i] + &net.params.biases[i];
        if i + 1 < l {
            let act = net.spec.activations[i];
            a.push(zi.map(|v| act.apply(v)));
        }
        z.push(zi);
    }
    (z, a)
}

fn forward(net: &Net, x: &DVector<f64>, u: &DVector<f64>, final_activation: bool) -> DVector<f64> {
    debug_assert_eq!(x.len() + u.len(), net.spec.input_dim);
    let (z, _) = forward_trace(net, stack_input(x, u));
    let last = z.into_iter().next_back().expect("validated: >= 1 layer");
    if final_activation {
        let act = *net.spec.activations.last().expect("validated");
        last.map(|v| act.apply(v))
    } else {
        last
    }
}

/// Evaluates the state form: affine last layer, no trailing activation.
pub fn forward_state(net: &Net, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    forward(net, x, u, false)
}

/// Evaluates the output form: trailing activation after the last layer.
pub fn forward_output(net: &Net, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    forward(net, x, u, true)
}

/// Shared backward accumulation.
///
/// `g` starts as d(out)/d(z_last) and is pulled back layer by layer;
/// at layer `i` it holds d(out)/d(z_i), from which the weight and bias
/// columns are `g[:, r] * a_{i-1}[c]` and `g[:, r]`.
fn jacobians(net: &Net, x: &DVector<f64>, u: &DVector<f64>, final_activation: bool) -> JacobianPair {
    let spec = &net.spec;
    let l = spec.n_layers();
    let out_dim = spec.output_dim();
    let n_x = x.len();
    let layout = NetLayout::new(spec, 0);
    let (z, a) = forward_trace(net, stack_input(x, u));

    let mut d_params = DMatrix::zeros(out_dim, layout.len);
    let mut g = if final_activation {
        let act = *spec.activations.last().expect("validated");
        DMatrix::from_diagonal(&z[l - 1].map(|v| act.deriv(v)))
    } else {
        DMatrix::identity(out_dim, out_dim)
    };

    for i in (0..l).rev() {
        let (w_off, rows, cols, b_off) = layout.layers[i];
        let a_in = &a[i];
        for r in 0..rows {
            let g_col = g.column(r);
            for c in 0..cols {
                d_params
                    .column_mut(w_off + r * cols + c)
                    .axpy(a_in[c], &g_col, 1.0);
            }
            d_params.column_mut(b_off + r).copy_from(&g_col);
        }
        if i > 0 {
            // d z_i / d z_{i-1} = W_i diag(act'_{i-1}(z_{i-1}))
            let act = spec.activations[i - 1];
            let mut gw = &g * &net.params.weights[i];
            let dz = z[i - 1].map(|v| act.deriv(v));
            for c in 0..gw.ncols() {
                gw.column_mut(c).scale_mut(dz[c]);
            }
            g = gw;
        } else {
            g *= &net.params.weights[0];
        }
    }

    // After the loop `g` is d(out)/d(input); keep the state columns.
    let d_state = g.columns(0, n_x).into_owned();
    JacobianPair { d_wrt_state: d_state, d_wrt_params: d_params }
}

/// Jacobians of [`forward_state`] w.r.t. `x` and the net's parameters.
pub fn jacobian_state(net: &Net, x: &DVector<f64>, u: &DVector<f64>) -> JacobianPair {
    jacobians(net, x, u, false)
}

/// Jacobians of [`forward_output`] w.r.t. `x` and the net's parameters.
pub fn jacobian_output(net: &Net, x: &DVector<f64>, u: &DVector<f64>) -> JacobianPair {
    jacobians(net, x, u, true)
}

/// Builds a single-layer affine net computing `W [x; u] + b`.
///
/// With the identity activation this is exact for linear systems; used by
/// tests and the linear benchmarks.
pub fn affine_net(w: DMatrix<f64>, b: DVector<f64>) -> Net {
    let spec = NetSpec {
        input_dim: w.ncols(),
        layer_dims: vec![w.nrows()],
        activations: vec![crate::model::Activation::Identity],
    };
    Net { spec, params: crate::model::NetParams { weights: vec![w], biases: vec![b] } }
}
