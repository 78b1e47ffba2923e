//! Result documents: a JSON value for scripting plus an aligned text
//! rendering for reading. serde_json prints floats in shortest
//! round-trip form, so values survive a parse bit for bit; the text
//! rendering uses 17 significant digits.

use holq_core::{solver::Diagnostics, Matrix, ModeConstraint, Tensor};
use serde_json::{json, Value};

use crate::constraints::letter_of;

pub struct Report {
    pub doc: Value,
    pub converged: bool,
}

pub fn mat_json(m: &Matrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| {
                Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect())
            })
            .collect(),
    )
}

pub fn mats_json(ms: &[Matrix]) -> Value {
    Value::Array(ms.iter().map(mat_json).collect())
}

pub fn constraints_json(cs: &[ModeConstraint]) -> Value {
    Value::Array(
        cs.iter()
            .map(|c| Value::String(letter_of(*c).to_string()))
            .collect(),
    )
}

pub fn diagnostics_json(d: &Diagnostics) -> Value {
    json!({
        "iterations": d.iterations,
        "converged": d.converged,
        "criterion_history": d.criterion_history,
        "exit_residuals": d.exit_residuals,
    })
}

pub fn options_json(tol: f64, max_iter: usize, plain: bool) -> Value {
    json!({
        "tol": tol,
        "max_iter": max_iter,
        "variant": if plain { "plain" } else { "orthogonalized" },
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn is_matrix(v: &Value) -> bool {
    matches!(v, Value::Array(rows) if !rows.is_empty()
        && rows.iter().all(|r| matches!(r, Value::Array(cells)
            if cells.iter().all(|c| matches!(c, Value::Number(_))))))
}

fn render_value(out: &mut String, key: &str, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Array(items) if !items.is_empty() && items.iter().all(is_matrix) => {
            for (k, item) in items.iter().enumerate() {
                render_value(out, &format!("{key}[{k}]"), item, indent);
            }
        }
        Value::Array(rows) if is_matrix(v) => {
            out.push_str(&format!("{pad}{key}:\n"));
            for row in rows {
                let Value::Array(cells) = row else { unreachable!() };
                let line: Vec<String> = cells
                    .iter()
                    .map(|c| match c {
                        Value::Number(n) => format!("{:>24}", fmt(n.as_f64().unwrap())),
                        other => format!("{other}"),
                    })
                    .collect();
                out.push_str(&format!("{pad}  {}\n", line.join(" ")));
            }
        }
        Value::Array(items) => {
            let line: Vec<String> = items
                .iter()
                .map(|c| match c {
                    Value::Number(n) => fmt(n.as_f64().unwrap()),
                    other => format!("{other}"),
                })
                .collect();
            out.push_str(&format!("{pad}{key}: [{}]\n", line.join(", ")));
        }
        Value::Object(map) => {
            out.push_str(&format!("{pad}{key}:\n"));
            for (k, v) in map {
                render_value(out, k, v, indent + 1);
            }
        }
        Value::Number(n) if n.is_f64() => {
            out.push_str(&format!("{pad}{key}: {}\n", fmt(n.as_f64().unwrap())));
        }
        other => out.push_str(&format!("{pad}{key}: {other}\n")),
    }
}

/// Human-readable rendering of a result document.
pub fn render_text(doc: &Value) -> String {
    let mut out = String::new();
    if let Value::Object(map) = doc {
        for (k, v) in map {
            render_value(&mut out, k, v, 0);
        }
    }
    out
}

/// The factor lists rendered as `"factors"` blocks keep a matrix per mode;
/// tensors go to sidecar files in the tensor text format. This helper
/// names the default sidecar next to the input.
pub fn default_core_path(input: &std::path::Path, cmd: &str) -> std::path::PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "result".into());
    input.with_file_name(format!("{stem}.{cmd}.core.tsr"))
}

pub fn write_core(
    path: &std::path::Path,
    core: &Tensor,
) -> Result<(), holq_core::Error> {
    holq_core::io::write_tensor_file(path, core)
}
