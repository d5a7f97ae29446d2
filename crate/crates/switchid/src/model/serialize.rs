//! Model file format: versioned JSON, lossless for finite doubles.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Net, NetParams, NetSpec, Submodel, SwitchingModel, TransitionMatrix};
use crate::error::{Error, Result};
use crate::io::atomic_write;

/// Version written to and required from model files.
pub const FORMAT_VERSION: u32 = 1;

/// `sigma_theta` is runtime tuning state, not part of the file format;
/// loaded models start from this scale.
const DEFAULT_SIGMA_THETA: f64 = 1e-2;

#[derive(Serialize, Deserialize)]
struct NetFile {
    spec: NetSpec,
    params: NetParamsFile,
}

#[derive(Serialize, Deserialize)]
struct NetParamsFile {
    /// One row-major matrix per layer.
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SubmodelFile {
    state_net: NetFile,
    output_net: NetFile,
}

#[derive(Serialize, Deserialize)]
struct TransitionFile {
    /// Row-major; `pi[j][l]` is P(next = j+1 | prev = l+1).
    pi: Vec<Vec<f64>>,
    pi0: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    n_x: usize,
    n_u: usize,
    n_y: usize,
    #[serde(rename = "K")]
    k: usize,
    submodels: Vec<SubmodelFile>,
    transition: TransitionFile,
    sigma1: Vec<Vec<f64>>,
    sigma2: Vec<Vec<f64>>,
    x0: Vec<f64>,
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::ModelFormat(format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::ModelFormat(format!("{what}: ragged or empty rows")));
    }
    let mut m = DMatrix::zeros(rows.len(), ncols);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

fn net_to_file(net: &Net) -> NetFile {
    NetFile {
        spec: net.spec.clone(),
        params: NetParamsFile {
            weights: net.params.weights.iter().map(matrix_to_rows).collect(),
            biases: net.params.biases.iter().map(|b| b.as_slice().to_vec()).collect(),
        },
    }
}

fn net_from_file(f: &NetFile, what: &str) -> Result<Net> {
    f.spec
        .validate()
        .map_err(|e| Error::ModelFormat(format!("{what}.spec: {e}")))?;
    let weights = f
        .params
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| rows_to_matrix(w, &format!("{what}.params.weights[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let biases = f
        .params
        .biases
        .iter()
        .map(|b| DVector::from_vec(b.clone()))
        .collect();
    let net = Net { spec: f.spec.clone(), params: NetParams { weights, biases } };
    net.validate()
        .map_err(|e| Error::ModelFormat(format!("{what}: {e}")))?;
    Ok(net)
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &str) -> Result<()> {
    for (i, v) in values.into_iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::ModelFormat(format!(
                "{what} entry {i} is {v}; model files hold finite numbers only"
            )));
        }
    }
    Ok(())
}

fn check_model_finite(model: &SwitchingModel) -> Result<()> {
    for (k, sub) in model.submodels.iter().enumerate() {
        for (name, net) in [("state_net", &sub.state_net), ("output_net", &sub.output_net)] {
            for (i, w) in net.params.weights.iter().enumerate() {
                check_finite(w.iter(), &format!("submodels[{k}].{name}.params.weights[{i}]"))?;
            }
            for (i, b) in net.params.biases.iter().enumerate() {
                check_finite(b.iter(), &format!("submodels[{k}].{name}.params.biases[{i}]"))?;
            }
        }
    }
    check_finite(model.trans.pi.iter(), "transition.pi")?;
    check_finite(model.trans.pi0.iter(), "transition.pi0")?;
    check_finite(model.sigma1.iter(), "sigma1")?;
    check_finite(model.sigma2.iter(), "sigma2")?;
    check_finite(model.x0.iter(), "x0")?;
    Ok(())
}

/// Serializes a validated model to pretty JSON at `path` (written
/// atomically: temp file in the same directory, then rename).
pub fn save_model(model: &SwitchingModel, path: &Path) -> Result<()> {
    model.validate()?;
    check_model_finite(model)?;
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        n_x: model.n_x,
        n_u: model.n_u,
        n_y: model.n_y,
        k: model.k(),
        submodels: model
            .submodels
            .iter()
            .map(|s| SubmodelFile {
                state_net: net_to_file(&s.state_net),
                output_net: net_to_file(&s.output_net),
            })
            .collect(),
        transition: TransitionFile {
            pi: matrix_to_rows(&model.trans.pi),
            pi0: model.trans.pi0.as_slice().to_vec(),
        },
        sigma1: matrix_to_rows(&model.sigma1),
        sigma2: matrix_to_rows(&model.sigma2),
        x0: model.x0.as_slice().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Loads and fully validates a model file; never returns a partial model.
pub fn load_model(path: &Path) -> Result<SwitchingModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| {
        Error::ModelFormat(format!("{} (at line {}, column {})", e, e.line(), e.column()))
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "format_version {} unsupported; this build reads version {FORMAT_VERSION}",
            file.format_version
        )));
    }
    if file.submodels.len() != file.k {
        return Err(Error::ModelFormat(format!(
            "K = {} but {} submodels present",
            file.k,
            file.submodels.len()
        )));
    }
    let submodels = file
        .submodels
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(Submodel {
                state_net: net_from_file(&s.state_net, &format!("submodels[{i}].state_net"))?,
                output_net: net_from_file(&s.output_net, &format!("submodels[{i}].output_net"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pi = rows_to_matrix(&file.transition.pi, "transition.pi")?;
    let pi0 = DVector::from_vec(file.transition.pi0.clone());
    let trans = TransitionMatrix::new(pi, pi0)
        .map_err(|e| Error::ModelFormat(format!("transition: {e}")))?;
    let model = SwitchingModel {
        n_x: file.n_x,
        n_u: file.n_u,
        n_y: file.n_y,
        submodels,
        trans,
        sigma1: rows_to_matrix(&file.sigma1, "sigma1")?,
        sigma2: rows_to_matrix(&file.sigma2, "sigma2")?,
        sigma_theta: DEFAULT_SIGMA_THETA,
        x0: DVector::from_vec(file.x0.clone()),
    };
    check_model_finite(&model)?;
    model
        .validate()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(model)
}
