//! Signed-slack evaluation of the five uncertainty relations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hilbert::StateVector;
use crate::measurement::{Estimator, ReadoutFrame};
use crate::metrics::MetricsBundle;
use crate::models::MeasurementModel;

/// Residual at or below which `f` counts as unbiased.
pub const PREMISE_TOL: f64 = 1e-9;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InequalityId {
    EQ2,
    EQ3,
    EQ4,
    EQ18,
    EQ19,
}

impl InequalityId {
    pub const ALL: [InequalityId; 5] = [
        InequalityId::EQ2,
        InequalityId::EQ3,
        InequalityId::EQ4,
        InequalityId::EQ18,
        InequalityId::EQ19,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InequalityId::EQ2 => "EQ2",
            InequalityId::EQ3 => "EQ3",
            InequalityId::EQ4 => "EQ4",
            InequalityId::EQ18 => "EQ18",
            InequalityId::EQ19 => "EQ19",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityResult {
    pub id: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub premise_ok: bool,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl InequalityResult {
    fn new(id: InequalityId, lhs: f64, rhs: f64, premise_ok: bool, tol: f64) -> Self {
        let slack = lhs - rhs;
        InequalityResult {
            id,
            lhs,
            rhs,
            slack,
            holds: slack >= -tol,
            premise_ok,
            tol,
            note: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdrReport {
    pub model: String,
    pub state: String,
    pub estimator: String,
    pub metrics: MetricsBundle,
    pub inequalities: Vec<InequalityResult>,
    pub non_informative: bool,
}

impl EdrReport {
    pub fn get(&self, id: InequalityId) -> &InequalityResult {
        self.inequalities
            .iter()
            .find(|r| r.id == id)
            .expect("every report carries all five relations")
    }
}

/// The five relations from a metrics bundle.
pub fn inequalities_from(
    m: &MeasurementModel,
    b: &MetricsBundle,
    tol: f64,
) -> Vec<InequalityResult> {
    let premise = b.unbias_residual <= PREMISE_TOL;
    let eq18 = if m.canonical_pair {
        InequalityResult::new(
            InequalityId::EQ18,
            b.epsilon_xt * b.eta_y0,
            m.hbar / 2.0,
            premise,
            tol,
        )
    } else {
        InequalityResult {
            note: Some("not-canonical".into()),
            ..InequalityResult::new(InequalityId::EQ18, 0.0, 0.0, premise, tol)
        }
    };
    vec![
        InequalityResult::new(
            InequalityId::EQ2,
            b.epsilon_x0 * b.eta_y0,
            b.commutator_0,
            true,
            tol,
        ),
        InequalityResult::new(
            InequalityId::EQ3,
            b.epsilon_x0 * b.eta_y0 + b.epsilon_x0 * b.sigma_y0 + b.sigma_x0 * b.eta_y0,
            b.commutator_0,
            true,
            tol,
        ),
        InequalityResult::new(
            InequalityId::EQ4,
            b.epsilon_xt * b.eta_y0,
            b.commutator_t,
            premise,
            tol,
        ),
        eq18,
        InequalityResult::new(
            InequalityId::EQ19,
            b.epsilon_xt * b.sigma_yt,
            b.commutator_t,
            true,
            tol,
        ),
    ]
}

impl ReadoutFrame<'_> {
    pub fn report(
        &self,
        phi0: &StateVector,
        state_label: &str,
        f: &Estimator,
        tol: f64,
    ) -> Result<EdrReport> {
        let m = self.model();
        let metrics = self.metrics(phi0, f)?;
        let inequalities = inequalities_from(m, &metrics, tol);
        Ok(EdrReport {
            model: m.label.clone(),
            state: state_label.to_string(),
            estimator: f.provenance().as_str().to_string(),
            metrics,
            inequalities,
            non_informative: self.is_non_informative()?,
        })
    }
}

/// Short descriptor for an explicit state.
pub fn describe_state(phi0: &StateVector) -> String {
    if phi0.dim() > 8 {
        return format!("vector[{}]", phi0.dim());
    }
    let parts: Vec<String> = phi0
        .amplitudes()
        .iter()
        .map(|z| format!("[{},{}]", z.re, z.im))
        .collect();
    format!("[{}]", parts.join(","))
}

pub fn evaluate_report(
    m: &MeasurementModel,
    phi0: &StateVector,
    f: &Estimator,
    tol: f64,
) -> Result<EdrReport> {
    ReadoutFrame::new(m)?.report(phi0, &describe_state(phi0), f, tol)
}
