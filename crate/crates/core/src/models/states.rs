use std::fmt;

use super::{gaussian_state, MeasurementModel};
use crate::error::{Error, Result};
use crate::hilbert::{StateVector, C64};

/// How an object (or probe) state is specified on the command line and in
/// sweep/search specs.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    /// `zero`, `one`, `plus` (uniform superposition), `minus`, `sy+`, `sy-`.
    Named(String),
    /// Explicit amplitudes, normalized on resolution.
    Amplitudes(Vec<C64>),
    /// Gaussian on a grid model's object sites.
    Gaussian { center: f64, width: f64 },
}

impl StateSpec {
    /// Parses `plus`, `gaussian:CENTER,WIDTH`, or a JSON list of `[re, im]`
    /// pairs.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("gaussian:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::parse("state", "expected gaussian:CENTER,WIDTH"));
            }
            let num = |p: &str| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse("state", format!("bad number '{p}': {e}")))
            };
            return Ok(StateSpec::Gaussian {
                center: num(parts[0])?,
                width: num(parts[1])?,
            });
        }
        if s.starts_with('[') {
            let pairs: Vec<[f64; 2]> = serde_json::from_str(s).map_err(|e| {
                Error::parse(
                    format!("state:{}:{}", e.line(), e.column()),
                    format!("expected a list of [re, im] pairs: {e}"),
                )
            })?;
            return Ok(StateSpec::Amplitudes(
                pairs.iter().map(|p| C64::new(p[0], p[1])).collect(),
            ));
        }
        match s {
            "zero" | "one" | "plus" | "minus" | "sy+" | "sy-" => Ok(StateSpec::Named(s.into())),
            other => Err(Error::parse("state", format!("unknown state '{other}'"))),
        }
    }

    /// Object state for `model`.
    pub fn resolve(&self, model: &MeasurementModel) -> Result<StateVector> {
        self.resolve_in(
            model.d_obj,
            model.grid.as_ref().map(|g| g.object_positions()),
        )
    }

    /// State in a space of dimension `dim`; `positions` enables Gaussians.
    pub fn resolve_in(&self, dim: usize, positions: Option<Vec<f64>>) -> Result<StateVector> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let qubit = |a: C64, b: C64| -> Result<StateVector> {
            if dim != 2 {
                return Err(Error::invalid(format!(
                    "state '{self}' needs a qubit, space has dimension {dim}"
                )));
            }
            StateVector::new(vec![a, b])
        };
        match self {
            StateSpec::Named(name) => match name.as_str() {
                "zero" => StateVector::basis(dim, 0),
                "one" => StateVector::basis(dim, 1),
                "plus" => StateVector::normalized(vec![C64::new(1.0, 0.0); dim]),
                "minus" => qubit(C64::new(h, 0.0), C64::new(-h, 0.0)),
                "sy+" => qubit(C64::new(h, 0.0), C64::new(0.0, h)),
                "sy-" => qubit(C64::new(h, 0.0), C64::new(0.0, -h)),
                other => Err(Error::invalid(format!("unknown state '{other}'"))),
            },
            StateSpec::Amplitudes(a) => {
                if a.len() != dim {
                    return Err(Error::invalid(format!(
                        "state has {} amplitudes, space has dimension {dim}",
                        a.len()
                    )));
                }
                StateVector::normalized(a.clone())
            }
            StateSpec::Gaussian { center, width } => {
                let positions =
                    positions.ok_or_else(|| Error::invalid("gaussian states need a grid model"))?;
                gaussian_state(&positions, *center, *width)
            }
        }
    }

    /// Default object state: centered unit Gaussian on grids, `plus` elsewhere.
    pub fn default_for(model: &MeasurementModel) -> StateSpec {
        if model.grid.is_some() {
            StateSpec::Gaussian {
                center: 0.0,
                width: 1.0,
            }
        } else {
            StateSpec::Named("plus".into())
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Named(n) => write!(f, "{n}"),
            StateSpec::Amplitudes(a) => {
                let parts: Vec<String> = a.iter().map(|z| format!("[{},{}]", z.re, z.im)).collect();
                write!(f, "[{}]", parts.join(","))
            }
            StateSpec::Gaussian { center, width } => write!(f, "gaussian:{center},{width}"),
        }
    }
}
