//! Parameter sweeps over builder families and derivative-free slack search.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{StateVector, C64};
use crate::inequalities::{EdrReport, InequalityId};
use crate::measurement::{EstimatorChoice, ReadoutFrame};
use crate::models::{BuilderSpec, MeasurementModel, ModelSource, StateSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRange {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub spacing: Spacing,
}

impl SweepRange {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps < 2 {
            return Err(Error::invalid(format!(
                "sweep needs at least 2 steps, got {}",
                self.steps
            )));
        }
        if !(self.from < self.to) || !self.from.is_finite() || !self.to.is_finite() {
            return Err(Error::invalid(format!(
                "sweep range must satisfy from < to, got {}..{}",
                self.from, self.to
            )));
        }
        if self.spacing == Spacing::Log && self.from <= 0.0 {
            return Err(Error::invalid("log spacing needs a positive lower bound"));
        }
        let last = (self.steps - 1) as f64;
        Ok((0..self.steps)
            .map(|i| {
                if i == self.steps - 1 {
                    return self.to;
                }
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.from + (self.to - self.from) * t,
                    Spacing::Log => self.from * (self.to / self.from).powf(t),
                }
            })
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    /// Builder name plus the fixed parameters.
    pub base: BuilderSpec,
    pub param: String,
    pub range: SweepRange,
    /// `None` uses the family default state.
    pub state: Option<StateSpec>,
    pub estimator: EstimatorChoice,
    pub record: Vec<InequalityId>,
    /// `None` uses each model's default tolerance.
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub report: EdrReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub param: String,
    pub record: Vec<InequalityId>,
    pub rows: Vec<SweepRow>,
}

pub const METRIC_COLUMNS: [&str; 9] = [
    "epsilon_xt",
    "epsilon_x0",
    "eta_y0",
    "sigma_x0",
    "sigma_y0",
    "sigma_yt",
    "unbias_residual",
    "commutator_t",
    "commutator_0",
];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param");
        for c in METRIC_COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        for id in &self.record {
            write!(out, ",slack_{id}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            let b = &row.report.metrics;
            let metrics = [
                b.epsilon_xt,
                b.epsilon_x0,
                b.eta_y0,
                b.sigma_x0,
                b.sigma_y0,
                b.sigma_yt,
                b.unbias_residual,
                b.commutator_t,
                b.commutator_0,
            ];
            out.push_str(&num(row.value));
            for v in metrics {
                out.push(',');
                out.push_str(&num(v));
            }
            for id in &self.record {
                out.push(',');
                out.push_str(&num(row.report.get(*id).slack));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates a single sweep point exactly as `eval` would.
pub fn evaluate_point(
    spec: &BuilderSpec,
    state: Option<&StateSpec>,
    estimator: &EstimatorChoice,
    tol: Option<f64>,
) -> Result<EdrReport> {
    let model = spec.build()?;
    let state = state
        .cloned()
        .unwrap_or_else(|| StateSpec::default_for(&model));
    let phi = state.resolve(&model)?;
    let frame = ReadoutFrame::new(&model)?;
    let f = estimator.resolve(&frame, &phi)?;
    frame.report(
        &phi,
        &state.to_string(),
        &f,
        tol.unwrap_or_else(|| model.default_tolerance()),
    )
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    if !BuilderSpec::parameter_names(&spec.base.name).contains(&spec.param.as_str()) {
        return Err(Error::invalid(format!(
            "family '{}' has no parameter '{}'",
            spec.base.name, spec.param
        )));
    }
    let values = spec.range.values()?;
    let rows = values
        .par_iter()
        .map(|&v| {
            let point = spec.base.clone().with(&spec.param, v);
            evaluate_point(&point, spec.state.as_ref(), &spec.estimator, spec.tol)
                .map(|report| SweepRow { value: v, report })
                .map_err(|e| e.context(&format!("{}={v}", spec.param)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        param: spec.param.clone(),
        record: spec.record.clone(),
        rows,
    })
}

/// One block of search coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum Variable {
    ObjectState,
    ProbeState,
    /// Builder parameter confined to `[lower, upper]` through a logistic map.
    Parameter {
        name: String,
        lower: f64,
        upper: f64,
    },
}

#[derive(Clone, Debug)]
pub struct SearchSpec {
    pub model: MeasurementModel,
    pub objective: InequalityId,
    pub variables: Vec<Variable>,
    /// Object state used when the object state is not searched.
    pub state: Option<StateSpec>,
    pub estimator: EstimatorChoice,
    pub budget: usize,
    pub starts: usize,
    pub seed: u64,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub best_slack: f64,
    /// Raw search coordinates of the best point.
    pub best_point: Vec<f64>,
    pub best_object_state: Option<StateVector>,
    pub best_probe_state: Option<StateVector>,
    pub best_parameters: Vec<(String, f64)>,
    /// Objective value of every evaluation, in start order.
    pub trace: Vec<f64>,
}

/// Unit vector from `2d − 2` angles: `d − 1` hyperspherical angles for the
/// moduli, then `d − 1` relative phases. The first amplitude is real.
pub fn state_from_angles(angles: &[f64]) -> Result<StateVector> {
    if angles.is_empty() || angles.len() % 2 != 0 {
        return Err(Error::invalid("state parametrization needs 2d-2 angles"));
    }
    let k = angles.len() / 2;
    let (theta, phase) = angles.split_at(k);
    let mut amps = Vec::with_capacity(k + 1);
    let mut sin_prod = 1.0;
    for (j, t) in theta.iter().enumerate() {
        let r = sin_prod * t.cos();
        amps.push(if j == 0 {
            C64::new(r, 0.0)
        } else {
            C64::from_polar(r, phase[j - 1])
        });
        sin_prod *= t.sin();
    }
    amps.push(C64::from_polar(sin_prod, phase[k - 1]));
    StateVector::normalized(amps)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Decoded {
    object: Option<StateVector>,
    probe: Option<StateVector>,
    params: Vec<(String, f64)>,
}

impl SearchSpec {
    fn dims(&self) -> Vec<usize> {
        self.variables
            .iter()
            .map(|v| match v {
                Variable::ObjectState => 2 * self.model.d_obj - 2,
                Variable::ProbeState => 2 * self.model.d_probe - 2,
                Variable::Parameter { .. } => 1,
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("search budget must be at least 1"));
        }
        if self.variables.is_empty() {
            return Err(Error::invalid("search needs at least one variable"));
        }
        if self.starts == 0 {
            return Err(Error::invalid("search needs at least one start"));
        }
        for v in &self.variables {
            if let Variable::Parameter { name, lower, upper } = v {
                let ModelSource::Builder(spec) = &self.model.source else {
                    return Err(Error::invalid(format!(
                        "parameter '{name}' can only be searched on builder models"
                    )));
                };
                if !BuilderSpec::parameter_names(&spec.name).contains(&name.as_str()) {
                    return Err(Error::invalid(format!(
                        "family '{}' has no parameter '{name}'",
                        spec.name
                    )));
                }
                if !(lower < upper) {
                    return Err(Error::invalid(format!(
                        "parameter '{name}' needs lower < upper"
                    )));
                }
            }
        }
        Ok(())
    }

    fn decode(&self, x: &[f64]) -> Result<Decoded> {
        let mut d = Decoded {
            object: None,
            probe: None,
            params: Vec::new(),
        };
        let mut rest = x;
        for (v, n) in self.variables.iter().zip(self.dims()) {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            match v {
                Variable::ObjectState => d.object = Some(state_from_angles(head)?),
                Variable::ProbeState => d.probe = Some(state_from_angles(head)?),
                Variable::Parameter { name, lower, upper } => {
                    d.params
                        .push((name.clone(), lower + (upper - lower) * sigmoid(head[0])));
                }
            }
        }
        Ok(d)
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let d = self.decode(x)?;
        let mut model = if d.params.is_empty() {
            self.model.clone()
        } else {
            let ModelSource::Builder(spec) = &self.model.source else {
                unreachable!("checked in validate")
            };
            let mut spec = spec.clone();
            for (name, value) in &d.params {
                spec = spec.with(name, *value);
            }
            spec.build()?
        };
        if let Some(xi) = d.probe {
            model = model.with_probe_state(xi)?;
        }
        let phi = match d.object {
            Some(phi) => phi,
            None => self
                .state
                .clone()
                .unwrap_or_else(|| StateSpec::default_for(&model))
                .resolve(&model)?,
        };
        let frame = ReadoutFrame::new(&model)?;
        let f = self.estimator.resolve(&frame, &phi)?;
        let tol = self.tol.unwrap_or_else(|| model.default_tolerance());
        let report = frame.report(&phi, "search", &f, tol)?;
        Ok(report.get(self.objective).slack)
    }

    fn objective(&self, x: &[f64]) -> f64 {
        match self.evaluate(x) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }
}

/// Nelder–Mead with the standard coefficients. Stops on budget or when the
/// simplex collapses.
fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: Vec<f64>,
    step: f64,
    budget: usize,
    trace: &mut Vec<f64>,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let eval = |x: &[f64], trace: &mut Vec<f64>| {
        let v = f(x);
        trace.push(v);
        v
    };
    let mut best = (x0.clone(), f64::INFINITY);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if trace.len() >= budget {
            break;
        }
        let mut x = x0.clone();
        if i > 0 {
            x[i - 1] += step;
        }
        let v = eval(&x, trace);
        simplex.push((x, v));
    }
    for (x, v) in &simplex {
        if *v < best.1 {
            best = (x.clone(), *v);
        }
    }
    if simplex.len() < n + 1 {
        return best;
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect()
    };
    while trace.len() < budget {
        order(&mut simplex);
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= 1e-15) || size <= 1e-12 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let xr = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&xr, trace);
        if fr < simplex[0].1 {
            if trace.len() >= budget {
                simplex[n] = (xr, fr);
                break;
            }
            let xe = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&xe, trace);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            if trace.len() >= budget {
                break;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = lerp(&centroid, &xr, 0.5);
                let fc = eval(&xc, trace);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &worst.0, 0.5);
                let fc = eval(&xc, trace);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    if trace.len() >= budget {
                        break;
                    }
                    let x = lerp(&x_best, &s.0, 0.5);
                    let v = eval(&x, trace);
                    *s = (x, v);
                }
            }
        }
        for (x, v) in &simplex {
            if *v < best.1 {
                best = (x.clone(), *v);
            }
        }
    }
    for (x, v) in &simplex {
        if *v < best.1 {
            best = (x.clone(), *v);
        }
    }
    best
}

pub fn run_search(spec: &SearchSpec) -> Result<SearchResult> {
    spec.validate()?;
    let dim: usize = spec.dims().iter().sum();
    if dim == 0 {
        return Err(Error::invalid("search space is empty"));
    }
    let per_start = spec.budget / spec.starts;
    let extra = spec.budget % spec.starts;
    let runs: Vec<(Vec<f64>, f64, Vec<f64>)> = (0..spec.starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(s as u64);
            let x0: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let budget = per_start + usize::from(s < extra);
            let mut trace = Vec::with_capacity(budget);
            let (x, v) = nelder_mead(|x| spec.objective(x), x0, 0.5, budget, &mut trace);
            (x, v, trace)
        })
        .collect();

    let mut trace = Vec::with_capacity(spec.budget);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (x, v, t) in runs {
        trace.extend(t);
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((x, v));
        }
    }
    let (best_point, best_slack) = best.expect("at least one start");
    let decoded = spec.decode(&best_point)?;
    Ok(SearchResult {
        best_slack,
        best_point,
        best_object_state: decoded.object,
        best_probe_state: decoded.probe,
        best_parameters: decoded.params,
        trace,
    })
}
