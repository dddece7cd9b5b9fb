//! Readout statistics, conditional post-measurement states and estimators.
//!
//! Everything here runs through the probe isometry `V = U(I⊗|ξ₀⟩)` with its
//! probe rows expressed in the eigenbasis of the readout observable. In that
//! frame the spectral projectors of `X̂₀` select columns and any `f(X̂₀)` is
//! diagonal, so grid models never need a dense joint-space matrix.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    heisenberg_evolve, spectral_decomposition, Operator, SpectralDecomposition, StateVector, C64,
    DEGENERACY_TOL,
};
use crate::models::{MeasurementModel, ProbeIsometry};

/// Readouts with probability below this carry no conditional state.
pub const DEFAULT_CUTOFF: f64 = 1e-12;

/// A validated model prepared for repeated evaluation.
#[derive(Clone, Debug)]
pub struct ReadoutFrame<'a> {
    model: &'a MeasurementModel,
    readout_spectrum: SpectralDecomposition,
    object_spectrum: SpectralDecomposition,
    column_block: Vec<usize>,
    isometry: ProbeIsometry,
}

impl<'a> ReadoutFrame<'a> {
    pub fn new(model: &'a MeasurementModel) -> Result<Self> {
        model.ensure_valid()?;
        let readout_spectrum = spectral_decomposition(&model.readout)?;
        let object_spectrum = spectral_decomposition(&model.x0)?;
        let mut isometry = model.coupling.probe_isometry(&model.xi0)?;
        if !readout_spectrum.is_standard() {
            isometry = isometry.in_basis(readout_spectrum.basis());
        }
        Ok(ReadoutFrame {
            model,
            column_block: readout_spectrum.column_blocks().to_vec(),
            readout_spectrum,
            object_spectrum,
            isometry,
        })
    }

    pub fn model(&self) -> &'a MeasurementModel {
        self.model
    }

    /// Distinct readout eigenvalues, ascending.
    pub fn readouts(&self) -> &[f64] {
        self.readout_spectrum.eigenvalues()
    }

    pub fn readout_spectrum(&self) -> &SpectralDecomposition {
        &self.readout_spectrum
    }

    pub fn object_spectrum(&self) -> &SpectralDecomposition {
        &self.object_spectrum
    }

    pub fn isometry(&self) -> &ProbeIsometry {
        &self.isometry
    }

    pub(crate) fn check_object_state(&self, phi0: &StateVector) -> Result<()> {
        if phi0.dim() != self.model.d_obj {
            return Err(Error::invalid(format!(
                "object state has dimension {}, model object dimension is {}",
                phi0.dim(),
                self.model.d_obj
            )));
        }
        Ok(())
    }

    /// `U|φ₀,ξ₀⟩` as a `d_obj × d_probe` matrix, probe columns in the
    /// readout eigenbasis.
    pub fn evolve(&self, phi0: &StateVector) -> Result<DMatrix<C64>> {
        self.check_object_state(phi0)?;
        Ok(self.isometry.apply(phi0.as_vector()))
    }

    /// `f(X̂₀)` as its diagonal in the readout eigenbasis.
    pub fn probe_diagonal(&self, f: &Estimator) -> Result<Vec<f64>> {
        let per_block = f.values_on(self.readouts())?;
        Ok(self.column_block.iter().map(|&b| per_block[b]).collect())
    }

    pub fn readout_distribution(&self, phi0: &StateVector) -> Result<ConditionalEnsemble> {
        let psi = self.evolve(phi0)?;
        Ok(self.ensemble_from(&psi, false))
    }

    pub fn conditional_states(&self, phi0: &StateVector) -> Result<ConditionalEnsemble> {
        let psi = self.evolve(phi0)?;
        Ok(self.ensemble_from(&psi, true))
    }

    /// Columns of `Ψ` belonging to readouts below the cutoff.
    pub(crate) fn columns_below(&self, ens: &ConditionalEnsemble) -> Vec<usize> {
        self.column_block
            .iter()
            .enumerate()
            .filter(|(_, &b)| ens.probabilities[b] < ens.cutoff)
            .map(|(c, _)| c)
            .collect()
    }

    pub(crate) fn ensemble_from(
        &self,
        psi: &DMatrix<C64>,
        with_states: bool,
    ) -> ConditionalEnsemble {
        let n = self.readouts().len();
        let mut probabilities = vec![0.0; n];
        for (col, &b) in self.column_block.iter().enumerate() {
            probabilities[b] += psi.column(col).norm_squared();
        }
        let states = with_states.then(|| {
            (0..n)
                .map(|j| {
                    if probabilities[j] < DEFAULT_CUTOFF {
                        return None;
                    }
                    let cols: Vec<usize> = self
                        .column_block
                        .iter()
                        .enumerate()
                        .filter(|(_, &b)| b == j)
                        .map(|(c, _)| c)
                        .collect();
                    Some(if cols.len() == 1 {
                        let v = psi.column(cols[0]).into_owned();
                        ConditionalState::Pure(
                            StateVector::from_unnormalized(v)
                                .expect("probability above cutoff")
                                .with_fixed_phase(),
                        )
                    } else {
                        let d = psi.nrows();
                        let mut rho = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
                        for c in cols {
                            let v = psi.column(c);
                            rho += &v * v.adjoint();
                        }
                        rho /= C64::from(probabilities[j]);
                        ConditionalState::Mixed(
                            Operator::from_matrix_unchecked(rho).hermitian_part(),
                        )
                    })
                })
                .collect()
        });
        ConditionalEnsemble {
            readouts: self.readouts().to_vec(),
            probabilities,
            states,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

/// Post-measurement object state for one readout. Degenerate readouts leave
/// the object in a mixture over the readout eigenspace.
#[derive(Clone, Debug, PartialEq)]
pub enum ConditionalState {
    Pure(StateVector),
    Mixed(Operator),
}

impl ConditionalState {
    pub fn density(&self) -> Operator {
        match self {
            ConditionalState::Pure(s) => {
                let v = s.as_vector();
                Operator::from_matrix_unchecked(v * v.adjoint())
            }
            ConditionalState::Mixed(rho) => rho.clone(),
        }
    }

    pub fn expectation(&self, a: &Operator) -> f64 {
        match self {
            ConditionalState::Pure(s) => {
                let v = s.as_vector();
                v.dotc(&(a.matrix() * v)).re
            }
            ConditionalState::Mixed(rho) => (rho.matrix() * a.matrix()).trace().re,
        }
    }

    /// Probability of each eigenspace of `spectrum`.
    pub fn distribution(&self, spectrum: &SpectralDecomposition) -> Vec<f64> {
        match self {
            ConditionalState::Pure(s) => spectrum.weights(s.as_vector()),
            ConditionalState::Mixed(rho) => spectrum.density_weights(rho.matrix()),
        }
    }
}

/// Readouts `X_j`, their probabilities, and (optionally) the conditional
/// object states.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalEnsemble {
    pub readouts: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// `None` for a distribution-only ensemble; per-readout `None` below the cutoff.
    pub states: Option<Vec<Option<ConditionalState>>>,
    pub cutoff: f64,
}

impl ConditionalEnsemble {
    pub fn states(&self) -> Result<&[Option<ConditionalState>]> {
        self.states
            .as_deref()
            .ok_or_else(|| Error::invalid("ensemble carries no conditional states"))
    }

    pub fn retained(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.readouts.len()).filter(|&j| self.probabilities[j] >= self.cutoff)
    }
}

pub fn readout_distribution(
    m: &MeasurementModel,
    phi0: &StateVector,
) -> Result<ConditionalEnsemble> {
    ReadoutFrame::new(m)?.readout_distribution(phi0)
}

pub fn conditional_states(m: &MeasurementModel, phi0: &StateVector) -> Result<ConditionalEnsemble> {
    ReadoutFrame::new(m)?.conditional_states(phi0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    OptimalForState,
    Identity,
    Constant,
    Custom,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::OptimalForState => "optimal-for-state",
            Provenance::Identity => "identity",
            Provenance::Constant => "constant",
            Provenance::Custom => "custom",
        }
    }
}

/// Measurement value `f(X_j)` for each readout eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    readouts: Vec<f64>,
    values: Vec<f64>,
    provenance: Provenance,
}

impl Estimator {
    pub fn identity(readouts: &[f64]) -> Self {
        Estimator {
            readouts: readouts.to_vec(),
            values: readouts.to_vec(),
            provenance: Provenance::Identity,
        }
    }

    pub fn constant(readouts: &[f64], c: f64) -> Self {
        Estimator {
            readouts: readouts.to_vec(),
            values: vec![c; readouts.len()],
            provenance: Provenance::Constant,
        }
    }

    pub fn custom(readouts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if readouts.len() != values.len() {
            return Err(Error::invalid(format!(
                "estimator has {} readouts but {} values",
                readouts.len(),
                values.len()
            )));
        }
        if values.iter().chain(&readouts).any(|v| !v.is_finite()) {
            return Err(Error::invalid("estimator values must be finite"));
        }
        Ok(Estimator {
            readouts,
            values,
            provenance: Provenance::Custom,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        #[derive(Deserialize)]
        struct File {
            readouts: Vec<f64>,
            values: Vec<f64>,
        }
        let f: File = serde_json::from_str(&text).map_err(|e| {
            Error::parse(
                format!("{}:{}:{}", path.display(), e.line(), e.column()),
                e.to_string(),
            )
        })?;
        Self::custom(f.readouts, f.values)
    }

    pub fn readouts(&self) -> &[f64] {
        &self.readouts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `f(x)` for a readout matching `x` within the degeneracy tolerance.
    pub fn value(&self, x: f64) -> Option<f64> {
        self.readouts
            .iter()
            .position(|&r| (r - x).abs() <= DEGENERACY_TOL)
            .map(|i| self.values[i])
    }

    /// Values on every listed readout; fails if any is missing.
    pub fn values_on(&self, readouts: &[f64]) -> Result<Vec<f64>> {
        if self.readouts.len() == readouts.len()
            && self.readouts.iter().zip(readouts).all(|(a, b)| a == b)
        {
            return Ok(self.values.clone());
        }
        readouts
            .iter()
            .map(|&x| {
                self.value(x).ok_or_else(|| {
                    Error::invalid(format!("estimator has no value for readout {x}"))
                })
            })
            .collect()
    }
}

/// Posterior mean `f(X_j) = ⟨φ_t|x̂₀|φ_t⟩_{X_j}`. Readouts under the cutoff get
/// the overall mean.
pub fn optimal_estimator(ens: &ConditionalEnsemble, x0: &Operator) -> Result<Estimator> {
    let states = ens.states()?;
    let means: Vec<Option<f64>> = states
        .iter()
        .map(|s| s.as_ref().map(|s| s.expectation(x0)))
        .collect();
    let (num, den) = means
        .iter()
        .zip(&ens.probabilities)
        .filter_map(|(m, &p)| m.map(|m| (m * p, p)))
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let global = if den > 0.0 { num / den } else { 0.0 };
    Ok(Estimator {
        readouts: ens.readouts.clone(),
        values: means.into_iter().map(|m| m.unwrap_or(global)).collect(),
        provenance: Provenance::OptimalForState,
    })
}

/// `(x̂_t)_m = U†(I⊗f(X̂₀))U` as a dense joint operator.
pub fn measurement_value_operator(m: &MeasurementModel, f: &Estimator) -> Result<Operator> {
    let spectrum = spectral_decomposition(&m.readout)?;
    let fx = spectrum.apply_values(&f.values_on(spectrum.eigenvalues())?)?;
    let u = m.coupling_operator()?;
    heisenberg_evolve(&Operator::identity(m.d_obj).kron(&fx), &u)
}

/// Adds independent `N(0, scale²)` noise to every value.
pub fn perturb_estimator(f: &Estimator, seed: u64, scale: f64) -> Result<Estimator> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "perturbation scale must be positive, got {scale}"
        )));
    }
    let normal = Normal::new(0.0, scale).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Estimator {
        readouts: f.readouts.clone(),
        values: f
            .values
            .iter()
            .map(|v| v + normal.sample(&mut rng))
            .collect(),
        provenance: Provenance::Custom,
    })
}

/// Estimator selection as given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimatorChoice {
    Optimal,
    Identity,
    Constant(f64),
    Fixed(Estimator),
}

impl EstimatorChoice {
    /// `optimal`, `identity`, `constant:C` or `file:PATH`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "optimal" => Ok(EstimatorChoice::Optimal),
            "identity" => Ok(EstimatorChoice::Identity),
            _ => {
                if let Some(c) = s.strip_prefix("constant:") {
                    let c: f64 = c.trim().parse().map_err(|e| {
                        Error::parse("estimator", format!("bad constant '{c}': {e}"))
                    })?;
                    Ok(EstimatorChoice::Constant(c))
                } else if let Some(p) = s.strip_prefix("file:") {
                    Ok(EstimatorChoice::Fixed(Estimator::load(p)?))
                } else {
                    Err(Error::parse(
                        "estimator",
                        format!(
                            "unknown estimator '{s}' (optimal, identity, constant:C, file:PATH)"
                        ),
                    ))
                }
            }
        }
    }

    pub fn resolve(&self, frame: &ReadoutFrame<'_>, phi0: &StateVector) -> Result<Estimator> {
        match self {
            EstimatorChoice::Optimal => {
                optimal_estimator(&frame.conditional_states(phi0)?, &frame.model().x0)
            }
            EstimatorChoice::Identity => Ok(Estimator::identity(frame.readouts())),
            EstimatorChoice::Constant(c) => Ok(Estimator::constant(frame.readouts(), *c)),
            EstimatorChoice::Fixed(e) => Ok(e.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{pauli_z, tensor_product, TensorOperand};
    use crate::models::{
        build_cnot_model, build_identity_model, build_random_model, build_von_neumann_model,
        gaussian_state, GridConfig,
    };

    fn plus() -> StateVector {
        StateVector::normalized(vec![C64::new(1.0, 0.0); 2]).unwrap()
    }

    fn vn128() -> MeasurementModel {
        build_von_neumann_model(&GridConfig::new(128, 8.0, 1.0).unwrap(), 1.0, 0.0).unwrap()
    }

    fn unit_gaussian(m: &MeasurementModel) -> StateVector {
        gaussian_state(&m.grid.as_ref().unwrap().object_positions(), 0.0, 1.0).unwrap()
    }

    fn moments(xs: &[f64], ps: &[f64]) -> (f64, f64) {
        let tot: f64 = ps.iter().sum();
        let mean = xs.iter().zip(ps).map(|(x, p)| x * p).sum::<f64>() / tot;
        let var = xs
            .iter()
            .zip(ps)
            .map(|(x, p)| (x - mean).powi(2) * p)
            .sum::<f64>()
            / tot;
        (mean, var.sqrt())
    }

    #[test]
    fn cnot_distribution_and_states() {
        let m = build_cnot_model();
        let ens = conditional_states(&m, &plus()).unwrap();
        assert_eq!(ens.readouts, vec![-1.0, 1.0]);
        assert!((ens.probabilities[0] - 0.5).abs() < 1e-15);
        assert!((ens.probabilities[1] - 0.5).abs() < 1e-15);
        let states = ens.states().unwrap();
        let one = StateVector::basis(2, 1).unwrap();
        let zero = StateVector::basis(2, 0).unwrap();
        assert_eq!(states[0], Some(ConditionalState::Pure(one)));
        assert_eq!(states[1], Some(ConditionalState::Pure(zero)));

        let f = optimal_estimator(&ens, &m.x0).unwrap();
        assert_eq!(f.values(), &[-1.0, 1.0]);
        assert_eq!(f.provenance(), Provenance::OptimalForState);
    }

    #[test]
    fn identity_model_ignores_object() {
        let m = build_identity_model();
        let phi = StateVector::normalized(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let ens = conditional_states(&m, &phi).unwrap();
        assert_eq!(ens.probabilities, vec![0.0, 1.0]);
        let states = ens.states().unwrap();
        assert!(states[0].is_none());
        let Some(ConditionalState::Pure(s)) = &states[1] else {
            panic!()
        };
        assert!((s.inner(&phi).unwrap().norm() - 1.0).abs() < 1e-15);
        let f = optimal_estimator(&ens, &m.x0).unwrap();
        let mean = phi.expectation(&pauli_z()).unwrap().re;
        assert!((f.value(1.0).unwrap() - mean).abs() < 1e-15);
        // the zero-probability branch falls back to the overall mean
        assert!((f.value(-1.0).unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn von_neumann_readout_is_convolved_gaussian() {
        let m = vn128();
        let ens = readout_distribution(&m, &unit_gaussian(&m)).unwrap();
        assert!(ens.states.is_none());
        let (mean, std) = moments(&ens.readouts, &ens.probabilities);
        assert!(mean.abs() < 1e-9);
        assert!((std - 2f64.sqrt()).abs() < 1e-3, "{std}");
    }

    #[test]
    fn von_neumann_posterior_is_gaussian_product() {
        let m = vn128();
        let positions = m.grid.as_ref().unwrap().object_positions();
        let ens = conditional_states(&m, &unit_gaussian(&m)).unwrap();
        let f = optimal_estimator(&ens, &m.x0).unwrap();
        let states = ens.states().unwrap();
        let want_std = 1.0 / 2f64.sqrt();
        let mut checked = 0;
        for j in ens.retained() {
            let x = ens.readouts[j];
            let Some(ConditionalState::Pure(s)) = &states[j] else {
                panic!()
            };
            let ps: Vec<f64> = s.amplitudes().iter().map(|a| a.norm_sqr()).collect();
            let (mean, std) = moments(&positions, &ps);
            assert!((std - want_std).abs() < 1e-3, "X={x}: std {std}");
            assert!((mean - x / 2.0).abs() < 1e-3, "X={x}: mean {mean}");
            assert!((f.value(x).unwrap() - x / 2.0).abs() < 1e-3, "X={x}");
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn measurement_value_operator_cases() {
        let m = build_cnot_model();
        let id = Estimator::identity(&[-1.0, 1.0]);
        let op = measurement_value_operator(&m, &id).unwrap();
        assert!((&op - &pauli_z().kron(&pauli_z())).max_abs() < 1e-15);

        for mm in [build_cnot_model(), build_random_model(3, 2, 4).unwrap()] {
            let readouts = spectral_decomposition(&mm.readout)
                .unwrap()
                .eigenvalues()
                .to_vec();
            let op = measurement_value_operator(&mm, &Estimator::constant(&readouts, 2.5)).unwrap();
            let want = Operator::identity(mm.joint_dim()).scale(C64::from(2.5));
            assert!((&op - &want).max_abs() < 1e-12);
        }

        let bad = Estimator::custom(vec![1.0], vec![0.0]).unwrap();
        assert!(measurement_value_operator(&m, &bad).is_err());
    }

    #[test]
    fn measurement_value_operator_on_small_grid() {
        let g = GridConfig::new(8, 2.0, 1.0).unwrap();
        let m = crate::models::assemble_von_neumann(&g, 0.5, 0.0).unwrap();
        let frame = ReadoutFrame::new(&m).unwrap();
        let op = measurement_value_operator(&m, &Estimator::identity(frame.readouts())).unwrap();
        let shifted = &m.x0.kron(&Operator::identity(m.d_probe))
            + &Operator::identity(m.d_obj).kron(&m.readout);
        let q = g.positions();
        let big_x = g.probe_positions();
        for (i, x) in q.iter().enumerate() {
            for (a, xx) in big_x.iter().enumerate() {
                if (-2.0 * g.half_width..2.0 * g.half_width - 1e-9).contains(&(x + xx)) {
                    let k = i * m.d_probe + a;
                    assert!((op.matrix()[(k, k)] - shifted.matrix()[(k, k)]).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn perturbation_properties() {
        let f = Estimator::identity(&[-1.0, 0.5, 2.0]);
        let tiny = perturb_estimator(&f, 1, 1e-300).unwrap();
        for (a, b) in tiny.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert_eq!(
            perturb_estimator(&f, 9, 0.1).unwrap(),
            perturb_estimator(&f, 9, 0.1).unwrap()
        );
        assert_ne!(
            perturb_estimator(&f, 9, 0.1).unwrap(),
            perturb_estimator(&f, 10, 0.1).unwrap()
        );
        assert_eq!(
            perturb_estimator(&f, 9, 0.1).unwrap().provenance(),
            Provenance::Custom
        );
        assert!(perturb_estimator(&f, 9, 0.0).is_err());
    }

    #[test]
    fn estimator_choice_parsing() {
        assert_eq!(
            EstimatorChoice::parse("optimal").unwrap(),
            EstimatorChoice::Optimal
        );
        assert_eq!(
            EstimatorChoice::parse("constant:-0.5").unwrap(),
            EstimatorChoice::Constant(-0.5)
        );
        assert!(EstimatorChoice::parse("median").is_err());
        assert!(EstimatorChoice::parse("constant:x").is_err());
    }

    #[test]
    fn ensemble_invariants_on_random_models() {
        for seed in 0..40u64 {
            let m =
                build_random_model(2 + (seed % 3) as usize, 2 + (seed % 2) as usize, seed).unwrap();
            let frame = ReadoutFrame::new(&m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let phi = crate::models::random::random_state(&mut rng, m.d_obj);
            let ens = frame.conditional_states(&phi).unwrap();
            let total: f64 = ens.probabilities.iter().sum();
            assert!((total - 1.0).abs() < 1e-10);

            // dense oracle: evolve the joint vector and marginalize directly
            let u = m.coupling_operator().unwrap();
            let TensorOperand::State(joint) = tensor_product(
                &TensorOperand::State(phi.clone()),
                &TensorOperand::State(m.xi0.clone()),
            )
            .unwrap() else {
                unreachable!()
            };
            let psi_t = u.apply(&joint).unwrap();
            let xspec = frame.object_spectrum();
            let mut marginal = vec![0.0; xspec.len()];
            let readout_spec = frame.readout_spectrum();
            for (j, &p) in ens.probabilities.iter().enumerate() {
                let pj = Operator::identity(m.d_obj).kron(&readout_spec.projector(j));
                let pv = pj.matrix() * &psi_t;
                assert!((pv.norm_squared() - p).abs() < 1e-12);
            }
            for (i, slot) in marginal.iter_mut().enumerate() {
                let pi = xspec.projector(i).kron(&Operator::identity(m.d_probe));
                *slot = (pi.matrix() * &psi_t).norm_squared();
            }
            let states = ens.states().unwrap();
            let mut mixture = vec![0.0; xspec.len()];
            let mut rho = DMatrix::from_element(m.d_obj, m.d_obj, C64::new(0.0, 0.0));
            for j in ens.retained() {
                let s = states[j].as_ref().unwrap();
                let d = s.density();
                assert!((d.trace().re - 1.0).abs() < 1e-10);
                for (acc, p) in mixture.iter_mut().zip(s.distribution(xspec)) {
                    *acc += ens.probabilities[j] * p;
                }
                rho += d.matrix() * C64::from(ens.probabilities[j]);
            }
            for (a, b) in mixture.iter().zip(&marginal) {
                assert!((a - b).abs() < 1e-10);
            }
            // reduced object state dephased in the readout basis
            let mut dephased = DMatrix::from_element(m.d_obj, m.d_obj, C64::new(0.0, 0.0));
            for j in 0..readout_spec.len() {
                let pj = Operator::identity(m.d_obj).kron(&readout_spec.projector(j));
                let v = pj.matrix() * &psi_t;
                let mat = DMatrix::from_row_slice(m.d_obj, m.d_probe, v.as_slice());
                dephased += &mat * mat.adjoint();
            }
            let diff = Operator::from_matrix_unchecked(rho - dephased);
            let trace_distance: f64 = 0.5
                * diff
                    .into_matrix()
                    .symmetric_eigenvalues()
                    .iter()
                    .map(|e| e.abs())
                    .sum::<f64>();
            assert!(trace_distance < 1e-10, "seed {seed}: {trace_distance}");
        }
    }

    #[test]
    fn degenerate_readout_gives_mixed_state() {
        // probe readout I on a 2-dim probe: one merged readout
        let mut m = build_cnot_model();
        m.readout = Operator::identity(2);
        let ens = conditional_states(&m, &plus()).unwrap();
        assert_eq!(ens.readouts.len(), 1);
        assert!((ens.probabilities[0] - 1.0).abs() < 1e-15);
        let Some(ConditionalState::Mixed(rho)) = &ens.states().unwrap()[0] else {
            panic!()
        };
        // CNOT entangles: object is maximally mixed
        assert!((rho - &Operator::identity(2).scale(C64::from(0.5))).max_abs() < 1e-15);
    }

    #[test]
    fn missing_states_are_an_error() {
        let m = build_cnot_model();
        let ens = readout_distribution(&m, &plus()).unwrap();
        assert!(optimal_estimator(&ens, &m.x0).is_err());
    }
}
