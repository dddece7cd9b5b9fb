//! Model files.
//!
//! Either `{"builder": NAME, "params": {...}}` or
//! `{"explicit": {"d_obj", "d_probe", "x0", "y0", "X0", "U", "xi0", "hbar"}}`
//! with row-major matrices of `[re, im]` pairs.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{BuilderSpec, Coupling, MeasurementModel, ModelSource, VALIDATION_TOL};
use crate::error::{Error, Result};
use crate::hilbert::{Operator, StateVector, C64};

type Matrix = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitModel {
    d_obj: usize,
    d_probe: usize,
    x0: Matrix,
    y0: Matrix,
    #[serde(rename = "X0")]
    readout: Matrix,
    #[serde(rename = "U")]
    coupling: Matrix,
    xi0: Vec<[f64; 2]>,
    #[serde(default = "one")]
    hbar: f64,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    canonical_pair: bool,
}

fn one() -> f64 {
    1.0
}

fn to_operator(field: &str, rows: &Matrix) -> Result<Operator> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::parse(field, "empty matrix"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::parse(
            format!("{field}[{i}]"),
            format!("row has {} entries, expected {n}", r.len()),
        ));
    }
    Operator::new(DMatrix::from_fn(n, n, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}

fn from_operator(op: &Operator) -> Matrix {
    op.rows()
        .into_iter()
        .map(|r| r.into_iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

/// Parses a model document; `origin` prefixes error locations.
pub fn model_from_json(text: &str, origin: &str) -> Result<MeasurementModel> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        Error::parse(
            format!("{origin}:{}:{}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse(origin, "model file must be a JSON object"))?;
    if let Some(name) = obj.get("builder") {
        let name = name
            .as_str()
            .ok_or_else(|| Error::parse(format!("{origin}:builder"), "expected a string"))?;
        let params = match obj.get("params") {
            None => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(_) => {
                return Err(Error::parse(
                    format!("{origin}:params"),
                    "expected an object",
                ))
            }
        };
        return BuilderSpec {
            name: name.to_string(),
            params,
        }
        .build();
    }
    let explicit = obj
        .get("explicit")
        .ok_or_else(|| Error::parse(origin, "expected a \"builder\" or an \"explicit\" key"))?;
    let e: ExplicitModel = serde_json::from_value(explicit.clone())
        .map_err(|err| Error::parse(format!("{origin}:explicit"), err.to_string()))?;

    let xi: Vec<C64> = e.xi0.iter().map(|p| C64::new(p[0], p[1])).collect();
    let norm = xi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= VALIDATION_TOL) {
        return Err(Error::Validation(vec![format!(
            "xi0 not normalized: norm deviation {:.1e}",
            (norm - 1.0).abs()
        )]));
    }
    Ok(MeasurementModel {
        label: e.label.unwrap_or_else(|| "explicit".into()),
        description: e.description.unwrap_or_default(),
        d_obj: e.d_obj,
        d_probe: e.d_probe,
        x0: to_operator("explicit.x0", &e.x0)?,
        y0: to_operator("explicit.y0", &e.y0)?,
        readout: to_operator("explicit.X0", &e.readout)?,
        coupling: Coupling::Dense(to_operator("explicit.U", &e.coupling)?),
        xi0: StateVector::normalized(xi)?,
        hbar: e.hbar,
        canonical_pair: e.canonical_pair,
        grid: None,
        source: ModelSource::Explicit,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MeasurementModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text, &path.display().to_string())
}

/// Builder-made models serialize as their builder spec, everything else as
/// explicit matrices.
pub fn model_to_json(m: &MeasurementModel) -> Result<Value> {
    match &m.source {
        ModelSource::Builder(spec) => Ok(json!({
            "builder": spec.name,
            "params": Value::Object(spec.params.clone()),
        })),
        ModelSource::Explicit => {
            let e = ExplicitModel {
                d_obj: m.d_obj,
                d_probe: m.d_probe,
                x0: from_operator(&m.x0),
                y0: from_operator(&m.y0),
                readout: from_operator(&m.readout),
                coupling: from_operator(&m.coupling.to_operator()?),
                xi0: m.xi0.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
                hbar: m.hbar,
                label: Some(m.label.clone()),
                description: Some(m.description.clone()),
                canonical_pair: m.canonical_pair,
            };
            Ok(json!({ "explicit": serde_json::to_value(e).expect("plain data") }))
        }
    }
}

pub fn save_model(m: &MeasurementModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&model_to_json(m)?).expect("plain data");
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}
