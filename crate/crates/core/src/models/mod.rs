//! Indirect measurement models: construction, loading and validation.

mod grid;
mod io;
pub mod random;
mod states;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hilbert::{cnot, pauli_x, pauli_z, Operator, StateVector, C64};

#[cfg(test)]
pub(crate) use grid::assemble_von_neumann;
pub use grid::{build_von_neumann_model, gaussian_state, GridConfig, GridInfo};
pub use io::{load_model, model_from_json, model_to_json, save_model};
pub use random::build_random_model;
pub use states::StateSpec;

/// Tolerance used by [`validate_model`].
pub const VALIDATION_TOL: f64 = 1e-10;

/// Largest joint dimension materialized as a dense coupling matrix.
pub const MAX_DENSE_DIM: usize = 2048;

/// The object-probe interaction.
#[derive(Clone, Debug, PartialEq)]
pub enum Coupling {
    Dense(Operator),
    Impulsive(ImpulsiveCoupling),
}

/// `U = exp(-i·strength·A⊗G)` with `A` diagonal in the object computational
/// basis and `G` given by its eigendecomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpulsiveCoupling {
    pub object_values: Vec<f64>,
    pub generator_values: Vec<f64>,
    pub generator_basis: DMatrix<C64>,
    pub strength: f64,
}

impl ImpulsiveCoupling {
    /// `exp(-i·strength·a·G) v` for one object eigenvalue `a`, where
    /// `v_in_basis` is `W† v`.
    fn probe_unitary_apply(&self, a: f64, v_in_basis: &DVector<C64>) -> DVector<C64> {
        let phased = DVector::from_iterator(
            v_in_basis.len(),
            v_in_basis
                .iter()
                .zip(&self.generator_values)
                .map(|(c, &g)| c * C64::from_polar(1.0, -self.strength * a * g)),
        );
        &self.generator_basis * phased
    }
}

impl Coupling {
    pub fn dim(&self) -> usize {
        match self {
            Coupling::Dense(u) => u.dim(),
            Coupling::Impulsive(c) => c.object_values.len() * c.generator_values.len(),
        }
    }

    /// Dense matrix of the coupling. Refused above [`MAX_DENSE_DIM`].
    pub fn to_operator(&self) -> Result<Operator> {
        match self {
            Coupling::Dense(u) => Ok(u.clone()),
            Coupling::Impulsive(c) => {
                let dim = self.dim();
                if dim > MAX_DENSE_DIM {
                    return Err(Error::invalid(format!(
                        "joint dimension {dim} too large for a dense coupling matrix"
                    )));
                }
                let dp = c.generator_values.len();
                let w = &c.generator_basis;
                let mut out = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
                for (n, &a) in c.object_values.iter().enumerate() {
                    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
                        dp,
                        c.generator_values
                            .iter()
                            .map(|&g| C64::from_polar(1.0, -c.strength * a * g)),
                    ));
                    let block = w * phases * w.adjoint();
                    out.view_mut((n * dp, n * dp), (dp, dp)).copy_from(&block);
                }
                Ok(Operator::from_matrix_unchecked(out))
            }
        }
    }

    /// `V = U (I ⊗ |ξ⟩)`, the map from object states to evolved joint states.
    pub fn probe_isometry(&self, xi: &StateVector) -> Result<ProbeIsometry> {
        match self {
            Coupling::Dense(u) => {
                let dp = xi.dim();
                if u.dim() % dp != 0 {
                    return Err(Error::invalid(format!(
                        "coupling dimension {} is not a multiple of probe dimension {dp}",
                        u.dim()
                    )));
                }
                let d_obj = u.dim() / dp;
                let m = u.matrix();
                let columns = (0..d_obj)
                    .map(|n| {
                        let mut joint = DVector::from_element(u.dim(), C64::new(0.0, 0.0));
                        for (a, &xa) in xi.amplitudes().iter().enumerate() {
                            joint.axpy(xa, &m.column(n * dp + a), C64::new(1.0, 0.0));
                        }
                        (0..d_obj)
                            .filter_map(|i| {
                                let row = joint.rows(i * dp, dp).into_owned();
                                row.iter()
                                    .any(|z| *z != C64::new(0.0, 0.0))
                                    .then_some((i, row))
                            })
                            .collect()
                    })
                    .collect();
                Ok(ProbeIsometry {
                    d_obj,
                    d_probe: dp,
                    columns,
                })
            }
            Coupling::Impulsive(c) => {
                let dp = c.generator_values.len();
                if xi.dim() != dp {
                    return Err(Error::invalid(format!(
                        "probe state dimension {} does not match coupling probe dimension {dp}",
                        xi.dim()
                    )));
                }
                let xi_in_basis = c.generator_basis.adjoint() * xi.as_vector();
                let columns = c
                    .object_values
                    .iter()
                    .enumerate()
                    .map(|(n, &a)| vec![(n, c.probe_unitary_apply(a, &xi_in_basis))])
                    .collect();
                Ok(ProbeIsometry {
                    d_obj: c.object_values.len(),
                    d_probe: dp,
                    columns,
                })
            }
        }
    }
}

/// Column `n` holds the joint vector `U(|n⟩⊗|ξ⟩)` as its nonzero object rows.
#[derive(Clone, Debug)]
pub struct ProbeIsometry {
    d_obj: usize,
    d_probe: usize,
    columns: Vec<Vec<(usize, DVector<C64>)>>,
}

impl ProbeIsometry {
    pub fn d_obj(&self) -> usize {
        self.d_obj
    }

    pub fn d_probe(&self) -> usize {
        self.d_probe
    }

    pub fn column(&self, n: usize) -> &[(usize, DVector<C64>)] {
        &self.columns[n]
    }

    /// Re-expresses every probe row in a new orthonormal basis: `r → W† r`.
    pub fn in_basis(&self, w: &DMatrix<C64>) -> ProbeIsometry {
        let wa = w.adjoint();
        let columns = self
            .columns
            .iter()
            .map(|col| col.iter().map(|(i, r)| (*i, &wa * r)).collect())
            .collect();
        ProbeIsometry {
            d_obj: self.d_obj,
            d_probe: self.d_probe,
            columns,
        }
    }

    /// `V c` as a `d_obj × d_probe` amplitude matrix. `c` need not be normalized.
    pub fn apply(&self, c: &DVector<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::from_element(self.d_obj, self.d_probe, C64::new(0.0, 0.0));
        for (col, &cn) in self.columns.iter().zip(c.iter()) {
            if cn == C64::new(0.0, 0.0) {
                continue;
            }
            for (i, r) in col {
                let mut row = out.row_mut(*i);
                for (dst, src) in row.iter_mut().zip(r.iter()) {
                    *dst += cn * src;
                }
            }
        }
        out
    }

    /// `V†(A⊗I)V + V†(I⊗D)V` where `D` is diagonal in the current probe basis.
    /// Either part may be omitted.
    pub fn sandwich(&self, object: Option<&Operator>, probe_diag: Option<&[f64]>) -> DMatrix<C64> {
        let d = self.d_obj;
        let mut out = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for m in 0..d {
            for n in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (rm, vm) in &self.columns[m] {
                    for (rn, vn) in &self.columns[n] {
                        if let Some(a) = object {
                            let amn = a.matrix()[(*rm, *rn)];
                            if amn != C64::new(0.0, 0.0) {
                                acc += amn * vm.dotc(vn);
                            }
                        }
                        if rm == rn {
                            if let Some(f) = probe_diag {
                                acc += vm
                                    .iter()
                                    .zip(vn.iter())
                                    .zip(f)
                                    .map(|((a, b), &w)| a.conj() * b * w)
                                    .sum::<C64>();
                            }
                        }
                    }
                }
                out[(m, n)] = acc;
            }
        }
        out
    }
}

/// How a model was produced; used for equality and re-serialization.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSource {
    Builder(BuilderSpec),
    Explicit,
}

/// A named builder with its resolved parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BuilderSpec {
    pub name: String,
    pub params: Map<String, Value>,
}

impl BuilderSpec {
    pub fn new(name: impl Into<String>) -> Self {
        BuilderSpec {
            name: name.into(),
            params: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| {
                Error::parse(
                    format!("params.{key}"),
                    format!("expected a number, got {v}"),
                )
            }),
        }
    }

    pub fn integer(&self, key: &str, default: u64) -> Result<u64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .or_else(|| {
                    v.as_f64()
                        .filter(|x| x.fract() == 0.0 && *x >= 0.0)
                        .map(|x| x as u64)
                })
                .ok_or_else(|| {
                    Error::parse(
                        format!("params.{key}"),
                        format!("expected a non-negative integer, got {v}"),
                    )
                }),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::parse(
                    format!("params.{k}"),
                    format!("unknown parameter for builder '{}'", self.name),
                ));
            }
        }
        Ok(())
    }

    /// Parameter names accepted by the builder.
    pub fn parameter_names(name: &str) -> &'static [&'static str] {
        match name {
            "von_neumann" => &[
                "n_points",
                "half_width",
                "hbar",
                "probe_width",
                "probe_center",
            ],
            "random" => &["d_obj", "d_probe", "seed"],
            _ => &[],
        }
    }

    pub fn build(&self) -> Result<MeasurementModel> {
        self.check_keys(Self::parameter_names(&self.name))?;
        match self.name.as_str() {
            "cnot" => Ok(build_cnot_model()),
            "identity" => Ok(build_identity_model()),
            "von_neumann" => {
                let grid = GridConfig::new(
                    self.integer("n_points", grid::DEFAULT_POINTS as u64)? as usize,
                    self.number("half_width", grid::DEFAULT_HALF_WIDTH)?,
                    self.number("hbar", 1.0)?,
                )?;
                build_von_neumann_model(
                    &grid,
                    self.number("probe_width", 1.0)?,
                    self.number("probe_center", 0.0)?,
                )
            }
            "random" => build_random_model(
                self.integer("d_obj", 2)? as usize,
                self.integer("d_probe", 2)? as usize,
                self.integer("seed", 0)?,
            ),
            other => Err(Error::invalid(format!(
                "unknown builder '{other}' (expected cnot, identity, von_neumann, random)"
            ))),
        }
    }
}

/// Object and probe observables, coupling, probe state and constants.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementModel {
    pub label: String,
    pub description: String,
    pub d_obj: usize,
    pub d_probe: usize,
    /// Measured object observable.
    pub x0: Operator,
    /// Disturbed object observable.
    pub y0: Operator,
    /// Probe readout observable.
    pub readout: Operator,
    pub coupling: Coupling,
    pub xi0: StateVector,
    pub hbar: f64,
    /// Set when `(x0, y0)` is a canonical position-momentum pair.
    pub canonical_pair: bool,
    pub grid: Option<GridInfo>,
    pub source: ModelSource,
}

impl MeasurementModel {
    pub fn joint_dim(&self) -> usize {
        self.d_obj * self.d_probe
    }

    /// Dense coupling matrix.
    pub fn coupling_operator(&self) -> Result<Operator> {
        self.coupling.to_operator()
    }

    /// The same model with a different probe state.
    pub fn with_probe_state(&self, xi0: StateVector) -> Result<MeasurementModel> {
        if xi0.dim() != self.d_probe {
            return Err(Error::invalid(format!(
                "probe state has dimension {}, model probe dimension is {}",
                xi0.dim(),
                self.d_probe
            )));
        }
        let mut m = self.clone();
        m.xi0 = xi0;
        m.source = ModelSource::Explicit;
        Ok(m)
    }

    /// Tolerance for inequality classification: tighter for exact models.
    pub fn default_tolerance(&self) -> f64 {
        if self.grid.is_some() {
            1e-3
        } else {
            1e-9
        }
    }

    /// Resolution-ready check. Errors carry every violation.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_model(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

pub fn build_cnot_model() -> MeasurementModel {
    MeasurementModel {
        label: "cnot".into(),
        description: "qubit object and probe coupled by CNOT (object control)".into(),
        d_obj: 2,
        d_probe: 2,
        x0: pauli_z(),
        y0: pauli_x(),
        readout: pauli_z(),
        coupling: Coupling::Dense(cnot()),
        xi0: StateVector::basis(2, 0).expect("dim 2"),
        hbar: 1.0,
        canonical_pair: false,
        grid: None,
        source: ModelSource::Builder(BuilderSpec::new("cnot")),
    }
}

/// Uncoupled qubit probe: the readout carries no information.
pub fn build_identity_model() -> MeasurementModel {
    MeasurementModel {
        label: "identity".into(),
        description: "qubit object and probe with no interaction".into(),
        d_obj: 2,
        d_probe: 2,
        x0: pauli_z(),
        y0: pauli_x(),
        readout: pauli_z(),
        coupling: Coupling::Dense(Operator::identity(4)),
        xi0: StateVector::basis(2, 0).expect("dim 2"),
        hbar: 1.0,
        canonical_pair: false,
        grid: None,
        source: ModelSource::Builder(BuilderSpec::new("identity")),
    }
}

/// Re-checks every model invariant; empty iff valid.
pub fn validate_model(m: &MeasurementModel) -> Vec<String> {
    let mut out = Vec::new();
    if m.d_obj == 0 || m.d_probe == 0 {
        out.push(format!(
            "dimensions must be positive: d_obj={}, d_probe={}",
            m.d_obj, m.d_probe
        ));
        return out;
    }
    for (name, op, dim) in [
        ("x0", &m.x0, m.d_obj),
        ("y0", &m.y0, m.d_obj),
        ("X0", &m.readout, m.d_probe),
    ] {
        if op.dim() != dim {
            out.push(format!("{name} has dimension {}, expected {dim}", op.dim()));
            continue;
        }
        if op
            .matrix()
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            out.push(format!("{name} has non-finite entries"));
            continue;
        }
        let dev = op.hermitian_deviation();
        if dev > VALIDATION_TOL {
            out.push(format!("{name} not Hermitian: max deviation {dev:.1e}"));
        }
    }
    if m.coupling.dim() != m.joint_dim() {
        out.push(format!(
            "U has dimension {}, expected {}",
            m.coupling.dim(),
            m.joint_dim()
        ));
    } else {
        match &m.coupling {
            Coupling::Dense(u) => {
                let dev = u.unitary_deviation();
                if dev.is_nan() || dev > VALIDATION_TOL {
                    out.push(format!("U not unitary: max deviation {dev:.1e}"));
                }
            }
            Coupling::Impulsive(c) => {
                let w = Operator::from_matrix_unchecked(c.generator_basis.clone());
                if c.object_values.len() != m.d_obj || c.generator_values.len() != m.d_probe {
                    out.push("U factor dimensions do not match d_obj/d_probe".into());
                }
                let dev = w.unitary_deviation();
                if dev.is_nan() || dev > VALIDATION_TOL {
                    out.push(format!(
                        "U generator basis not unitary: max deviation {dev:.1e}"
                    ));
                }
                if c.object_values
                    .iter()
                    .chain(&c.generator_values)
                    .chain(std::iter::once(&c.strength))
                    .any(|x| !x.is_finite())
                {
                    out.push("U has non-finite generator data".into());
                }
            }
        }
    }
    if m.xi0.dim() != m.d_probe {
        out.push(format!(
            "xi0 has dimension {}, expected {}",
            m.xi0.dim(),
            m.d_probe
        ));
    } else {
        let dev = (m.xi0.as_vector().norm() - 1.0).abs();
        if !(dev <= VALIDATION_TOL) {
            out.push(format!("xi0 not normalized: norm deviation {dev:.1e}"));
        }
    }
    if !(m.hbar > 0.0 && m.hbar.is_finite()) {
        out.push(format!("hbar must be positive, got {}", m.hbar));
    }
    out
}
