//! Dataset and result CSV formats.
//!
//! Dataset schema: header `t,u1..u{n_u},y1..y{n_y}[,mode][,x1..x{n_x}]`,
//! LF line endings, UTF-8, `t` counting from 1, mode labels 1-based.
//! Floats carry 17 significant digits so a write/read cycle is lossless.

use std::path::Path;

use nalgebra::DVector;

use super::{atomic_write, fmt_f64};
use crate::error::{Error, Result};
use crate::model::{Dataset, ModeSequence};

fn csv_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Csv { line, msg: msg.into() }
}

/// Writes a dataset; mode and state columns appear when the dataset has them.
pub fn write_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let mut header = String::from("t");
    for i in 1..=ds.n_u() {
        header.push_str(&format!(",u{i}"));
    }
    for i in 1..=ds.n_y() {
        header.push_str(&format!(",y{i}"));
    }
    if ds.true_modes.is_some() {
        header.push_str(",mode");
    }
    let n_x = ds.true_states.as_ref().map(|xs| xs[0].len()).unwrap_or(0);
    for i in 1..=n_x {
        header.push_str(&format!(",x{i}"));
    }

    let mut out = header;
    out.push('\n');
    for t in 0..ds.len() {
        out.push_str(&(t + 1).to_string());
        for v in ds.u[t].iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        for v in ds.y[t].iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        if let Some(modes) = &ds.true_modes {
            out.push(',');
            out.push_str(&(modes[t] + 1).to_string());
        }
        if let Some(xs) = &ds.true_states {
            for v in xs[t].iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

fn parse_f64(field: &str, line: usize, col: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| csv_err(line, format!("column {col}: cannot parse {field:?} as a number")))
}

/// Reads a dataset CSV, inferring the column groups from the header.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_err(1, "empty file; expected a header row"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") {
        return Err(csv_err(1, format!("first column is {:?}, expected \"t\"", cols.first())));
    }
    let count_prefixed = |prefix: &str, start: usize| -> usize {
        let mut n = 0;
        while start + n < cols.len() && cols[start + n] == format!("{prefix}{}", n + 1) {
            n += 1;
        }
        n
    };
    let n_u = count_prefixed("u", 1);
    let n_y = count_prefixed("y", 1 + n_u);
    if n_u == 0 || n_y == 0 {
        return Err(csv_err(1, format!("header {header:?} lacks u1../y1.. columns")));
    }
    let mut idx = 1 + n_u + n_y;
    let has_mode = cols.get(idx) == Some(&"mode");
    if has_mode {
        idx += 1;
    }
    let n_x = count_prefixed("x", idx);
    idx += n_x;
    if idx != cols.len() {
        return Err(csv_err(1, format!("unexpected trailing column {:?}", cols[idx])));
    }

    let mut u = Vec::new();
    let mut y = Vec::new();
    let mut modes: Vec<usize> = Vec::new();
    let mut states: Vec<DVector<f64>> = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != cols.len() {
            return Err(csv_err(
                line_no,
                format!("{} fields, header has {}", fields.len(), cols.len()),
            ));
        }
        let t: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| csv_err(line_no, format!("column t: cannot parse {:?}", fields[0])))?;
        if t != u.len() + 1 {
            return Err(csv_err(line_no, format!("t = {t}, expected {}", u.len() + 1)));
        }
        let mut f = 1;
        let mut row_u = DVector::zeros(n_u);
        for j in 0..n_u {
            row_u[j] = parse_f64(fields[f], line_no, &format!("u{}", j + 1))?;
            f += 1;
        }
        let mut row_y = DVector::zeros(n_y);
        for j in 0..n_y {
            row_y[j] = parse_f64(fields[f], line_no, &format!("y{}", j + 1))?;
            f += 1;
        }
        u.push(row_u);
        y.push(row_y);
        if has_mode {
            let m: usize = fields[f].trim().parse().map_err(|_| {
                csv_err(line_no, format!("column mode: cannot parse {:?}", fields[f]))
            })?;
            if m == 0 {
                return Err(csv_err(line_no, "mode labels are 1-based; found 0"));
            }
            modes.push(m);
            f += 1;
        }
        if n_x > 0 {
            let mut row_x = DVector::zeros(n_x);
            for j in 0..n_x {
                row_x[j] = parse_f64(fields[f], line_no, &format!("x{}", j + 1))?;
                f += 1;
            }
            states.push(row_x);
        }
    }
    if u.is_empty() {
        return Err(csv_err(2, "no data rows"));
    }
    let mut ds = Dataset::new(u, y)?;
    if has_mode {
        let k = *modes.iter().max().expect("non-empty");
        ds.true_modes = Some(ModeSequence::from_one_based(&modes, k)?);
    }
    if n_x > 0 {
        ds.true_states = Some(states);
    }
    ds.validate()?;
    Ok(ds)
}

/// Prediction table: `t,yhat1..,mode` with the decoded 1-based mode.
pub fn write_predictions_csv(
    y_pred: &[DVector<f64>],
    modes: &ModeSequence,
    path: &Path,
) -> Result<()> {
    let n_y = y_pred.first().map(|v| v.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 1..=n_y {
        out.push_str(&format!(",yhat{i}"));
    }
    out.push_str(",mode\n");
    for (t, v) in y_pred.iter().enumerate() {
        out.push_str(&(t + 1).to_string());
        for x in v.iter() {
            out.push(',');
            out.push_str(&fmt_f64(*x));
        }
        out.push_str(&format!(",{}\n", modes[t] + 1));
    }
    atomic_write(path, out.as_bytes())
}

/// Overlay table for plotting: `t,y_true1..,y_pred1..`.
pub fn write_overlay_csv(
    y_true: &[DVector<f64>],
    y_pred: &[DVector<f64>],
    path: &Path,
) -> Result<()> {
    let n_y = y_true.first().map(|v| v.len()).unwrap_or(0);
    let mut out = String::from("t");
    for i in 1..=n_y {
        out.push_str(&format!(",y_true{i}"));
    }
    for i in 1..=n_y {
        out.push_str(&format!(",y_pred{i}"));
    }
    out.push('\n');
    for t in 0..y_true.len() {
        out.push_str(&(t + 1).to_string());
        for v in y_true[t].iter().chain(y_pred[t].iter()) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Per-step squared prediction error: `t,squared_error`.
pub fn write_error_csv(sq_err: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("t,squared_error\n");
    for (t, v) in sq_err.iter().enumerate() {
        out.push_str(&format!("{},{}\n", t + 1, fmt_f64(*v)));
    }
    atomic_write(path, out.as_bytes())
}

/// Mode overlay: `t,s_true,s_est` (or `t,s_est` when truth is unknown).
pub fn write_modes_csv(
    s_true: Option<&ModeSequence>,
    s_est: &ModeSequence,
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    match s_true {
        Some(truth) => {
            out.push_str("t,s_true,s_est\n");
            for t in 0..s_est.len() {
                out.push_str(&format!("{},{},{}\n", t + 1, truth[t] + 1, s_est[t] + 1));
            }
        }
        None => {
            out.push_str("t,s_est\n");
            for t in 0..s_est.len() {
                out.push_str(&format!("{},{}\n", t + 1, s_est[t] + 1));
            }
        }
    }
    atomic_write(path, out.as_bytes())
}
