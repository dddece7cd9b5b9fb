//! Scalar functionals of a measurement: resolution, precision, disturbance,
//! standard deviations, the unbiasedness residual and informativeness.
//!
//! Joint quantities are evaluated on `Ψ = U|φ₀,ξ₀⟩` held as a
//! `d_obj × d_probe` matrix in the readout frame, where `x̂₀⊗I` acts from the
//! left and `I⊗f(X̂₀)` scales columns.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpectralDecomposition, StateVector, C64};
use crate::measurement::{ConditionalEnsemble, Estimator, ReadoutFrame};
use crate::models::MeasurementModel;

/// Below this total-variation spread a model is flagged non-informative.
pub const INFORMATIVENESS_THRESHOLD: f64 = 1e-9;

/// Allowed gap between the operator and conditional routes to `ε(x_t)`,
/// relative to `1 + ε`.
pub const ROUTE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutError {
    pub readout: f64,
    pub probability: f64,
    pub epsilon: f64,
    pub sigma: f64,
    pub mean: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub epsilon_xt: f64,
    /// `ε(x_t)` through the conditional states; kept for the consistency check.
    pub epsilon_xt_conditional: f64,
    pub epsilon_x0: f64,
    pub eta_y0: f64,
    pub sigma_x0: f64,
    pub sigma_y0: f64,
    pub sigma_yt: f64,
    pub per_readout: Vec<ReadoutError>,
    pub unbias_residual: f64,
    pub commutator_t: f64,
    pub commutator_0: f64,
    /// `⟨x̂_t⟩` in the joint state.
    pub mean_xt: f64,
    /// `Σ_j P_j f(X_j)`.
    pub mean_estimate: f64,
}

fn distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm()
}

fn scale_columns(psi: &DMatrix<C64>, diag: &[f64]) -> DMatrix<C64> {
    let mut out = psi.clone();
    for (mut col, &d) in out.column_iter_mut().zip(diag) {
        col *= C64::from(d);
    }
    out
}

/// `ε_{X_j}`, `σ_{X_j}` and `⟨x⟩_{X_j}` for each retained readout.
pub fn per_readout_error(
    ens: &ConditionalEnsemble,
    f: &Estimator,
    x0: &Operator,
) -> Result<Vec<ReadoutError>> {
    let spectrum = crate::hilbert::spectral_decomposition(x0)?;
    per_readout_in(ens, f, &spectrum)
}

pub(crate) fn per_readout_in(
    ens: &ConditionalEnsemble,
    f: &Estimator,
    x0: &SpectralDecomposition,
) -> Result<Vec<ReadoutError>> {
    let states = ens.states()?;
    let values = f.values_on(&ens.readouts)?;
    let xs = x0.eigenvalues();
    let mut out = Vec::new();
    for j in ens.retained() {
        let state = states[j].as_ref().ok_or_else(|| {
            Error::invalid(format!(
                "no conditional state for readout {}",
                ens.readouts[j]
            ))
        })?;
        let p = state.distribution(x0);
        let mean: f64 = xs.iter().zip(&p).map(|(x, p)| x * p).sum();
        let var: f64 = xs.iter().zip(&p).map(|(x, p)| p * (x - mean).powi(2)).sum();
        let fj = values[j];
        let err: f64 = xs.iter().zip(&p).map(|(x, p)| p * (fj - x).powi(2)).sum();
        out.push(ReadoutError {
            readout: ens.readouts[j],
            probability: ens.probabilities[j],
            epsilon: err.max(0.0).sqrt(),
            sigma: var.max(0.0).sqrt(),
            mean,
            value: fj,
        });
    }
    Ok(out)
}

impl ReadoutFrame<'_> {
    /// Resolution by the operator route and by the conditional route.
    pub fn resolution_routes(&self, phi0: &StateVector, f: &Estimator) -> Result<(f64, f64)> {
        let psi = self.evolve(phi0)?;
        let diag = self.probe_diagonal(f)?;
        let op = self.resolution_op(&psi, &diag);
        let ens = self.ensemble_from(&psi, true);
        let per = per_readout_in(&ens, f, self.object_spectrum())?;
        let tail = self.tail_error(&ens, &psi, &diag, &(self.model().x0.matrix() * &psi));
        Ok((op, conditional_resolution(&per, tail)))
    }

    /// `Σ_j ‖(f_j − x̂₀)ψ̃_j‖²` over readouts too rare for a conditional state.
    fn tail_error(
        &self,
        ens: &ConditionalEnsemble,
        psi: &DMatrix<C64>,
        diag: &[f64],
        x_psi: &DMatrix<C64>,
    ) -> f64 {
        self.columns_below(ens)
            .into_iter()
            .map(|c| (psi.column(c) * C64::from(diag[c]) - x_psi.column(c)).norm_squared())
            .sum()
    }

    fn resolution_op(&self, psi: &DMatrix<C64>, diag: &[f64]) -> f64 {
        distance(&scale_columns(psi, diag), &(self.model().x0.matrix() * psi))
    }

    pub fn resolution(&self, phi0: &StateVector, f: &Estimator) -> Result<f64> {
        let (op, cond) = self.resolution_routes(phi0, f)?;
        check_routes(op, cond)?;
        Ok(op)
    }

    pub fn precision(&self, phi0: &StateVector, f: &Estimator) -> Result<f64> {
        let psi = self.evolve(phi0)?;
        let diag = self.probe_diagonal(f)?;
        let moved = self
            .isometry()
            .apply(&(self.model().x0.matrix() * phi0.as_vector()));
        Ok(distance(&scale_columns(&psi, &diag), &moved))
    }

    pub fn disturbance(&self, phi0: &StateVector) -> Result<f64> {
        let psi = self.evolve(phi0)?;
        Ok(self.disturbance_of(&psi, phi0))
    }

    fn disturbance_of(&self, psi: &DMatrix<C64>, phi0: &StateVector) -> f64 {
        let y0 = self.model().y0.matrix();
        distance(
            &(y0 * psi),
            &self.isometry().apply(&(y0 * phi0.as_vector())),
        )
    }

    /// `‖⟨ξ₀|(x̂_t)_m − x̂_t|ξ₀⟩‖`, largest singular value.
    pub fn unbiasedness_residual(&self, f: &Estimator) -> Result<f64> {
        let diag = self.probe_diagonal(f)?;
        let v = self.isometry();
        let r = v.sandwich(None, Some(&diag)) - v.sandwich(Some(&self.model().x0), None);
        Ok(Operator::from_matrix_unchecked(r)
            .hermitian_part()
            .operator_norm())
    }

    /// `(σ(x₀), σ(y₀), σ(y_t))` in the initial joint state.
    pub fn state_deviations(&self, phi0: &StateVector) -> Result<(f64, f64, f64)> {
        let psi = self.evolve(phi0)?;
        Ok(self.deviations_of(&psi, phi0))
    }

    fn deviations_of(&self, psi: &DMatrix<C64>, phi0: &StateVector) -> (f64, f64, f64) {
        let m = self.model();
        let phi = phi0.as_vector();
        (
            spread(phi, &(m.x0.matrix() * phi)),
            spread(phi, &(m.y0.matrix() * phi)),
            spread(psi, &(m.y0.matrix() * psi)),
        )
    }

    /// Maximum total-variation distance between readout distributions.
    pub fn informativeness(&self, states: &[StateVector]) -> Result<f64> {
        if states.len() < 2 {
            return Err(Error::invalid("informativeness needs at least two states"));
        }
        let dists = states
            .iter()
            .map(|s| Ok(self.readout_distribution(s)?.probabilities))
            .collect::<Result<Vec<_>>>()?;
        let mut best: f64 = 0.0;
        for (i, a) in dists.iter().enumerate() {
            for b in &dists[i + 1..] {
                let tv = 0.5 * a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>();
                best = best.max(tv);
            }
        }
        Ok(best)
    }

    fn tomographic_states(&self) -> Result<Vec<StateVector>> {
        let d = self.model().d_obj;
        let mut states = Vec::with_capacity(3 * d);
        for k in 0..d {
            states.push(StateVector::basis(d, k)?);
            if k > 0 {
                for phase in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
                    let mut a = vec![C64::new(0.0, 0.0); d];
                    a[0] = C64::new(1.0, 0.0);
                    a[k] = phase;
                    states.push(StateVector::normalized(a)?);
                }
            }
        }
        Ok(states)
    }

    /// Informativeness over `|k⟩`, `(|0⟩+|k⟩)/√2`, `(|0⟩+i|k⟩)/√2`. Their
    /// densities span all object operators, so a zero here means every state
    /// gives the same readout statistics.
    pub fn tomographic_informativeness(&self) -> Result<f64> {
        self.informativeness(&self.tomographic_states()?)
    }

    /// Whether the tomographic informativeness falls below the threshold.
    /// Distances to the first state bound the pairwise maximum within a
    /// factor of two, so the full scan only runs when that is inconclusive.
    pub fn is_non_informative(&self) -> Result<bool> {
        let states = self.tomographic_states()?;
        let first = self.readout_distribution(&states[0])?.probabilities;
        let mut to_first: f64 = 0.0;
        for s in &states[1..] {
            let p = self.readout_distribution(s)?.probabilities;
            to_first = to_first.max(
                0.5 * first
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>(),
            );
            if to_first >= INFORMATIVENESS_THRESHOLD {
                return Ok(false);
            }
        }
        if 2.0 * to_first < INFORMATIVENESS_THRESHOLD {
            return Ok(true);
        }
        Ok(is_non_informative(self.informativeness(&states)?))
    }

    pub fn metrics(&self, phi0: &StateVector, f: &Estimator) -> Result<MetricsBundle> {
        let m = self.model();
        let psi = self.evolve(phi0)?;
        let diag = self.probe_diagonal(f)?;
        let ens = self.ensemble_from(&psi, true);
        let per_readout = per_readout_in(&ens, f, self.object_spectrum())?;

        let x_psi = m.x0.matrix() * &psi;
        let y_psi = m.y0.matrix() * &psi;
        let f_psi = scale_columns(&psi, &diag);
        let epsilon_xt = distance(&f_psi, &x_psi);
        let tail = self.tail_error(&ens, &psi, &diag, &x_psi);
        let epsilon_xt_conditional = conditional_resolution(&per_readout, tail);
        check_routes(epsilon_xt, epsilon_xt_conditional)?;

        let phi = phi0.as_vector();
        let x_phi = m.x0.matrix() * phi;
        let y_phi = m.y0.matrix() * phi;
        let epsilon_x0 = distance(&f_psi, &self.isometry().apply(&x_phi));
        let eta_y0 = distance(&y_psi, &self.isometry().apply(&y_phi));

        // ⟨[A, B]⟩ = 2i Im⟨Aψ|Bψ⟩ for Hermitian A, B
        let commutator_t = psi_commutator(&x_psi, &y_psi);
        let commutator_0 = psi_commutator(&x_phi, &y_phi);
        let mean_xt = psi.dotc(&x_psi).re;
        let sigma_x0 = spread(phi, &x_phi);
        let sigma_y0 = spread(phi, &y_phi);
        let sigma_yt = spread(&psi, &y_psi);

        let values = f.values_on(&ens.readouts)?;
        let mean_estimate = ens
            .probabilities
            .iter()
            .zip(&values)
            .map(|(p, v)| p * v)
            .sum();

        Ok(MetricsBundle {
            epsilon_xt,
            epsilon_xt_conditional,
            epsilon_x0,
            eta_y0,
            sigma_x0,
            sigma_y0,
            sigma_yt,
            per_readout,
            unbias_residual: self.unbiasedness_residual(f)?,
            commutator_t,
            commutator_0,
            mean_xt,
            mean_estimate,
        })
    }
}

fn psi_commutator<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::Storage<C64, R, C>>(
    a_psi: &nalgebra::Matrix<C64, R, C, S>,
    b_psi: &nalgebra::Matrix<C64, R, C, S>,
) -> f64 {
    a_psi.dotc(b_psi).im.abs()
}

/// `‖(A − ⟨A⟩)ψ‖` given `ψ` and `Aψ`.
fn spread<R: nalgebra::Dim, C: nalgebra::Dim, S1, S2>(
    psi: &nalgebra::Matrix<C64, R, C, S1>,
    a_psi: &nalgebra::Matrix<C64, R, C, S2>,
) -> f64
where
    S1: nalgebra::Storage<C64, R, C>,
    S2: nalgebra::Storage<C64, R, C>,
{
    let mean = psi.dotc(a_psi).re;
    let mut acc = 0.0;
    for (a, p) in a_psi.iter().zip(psi.iter()) {
        acc += (a - p * mean).norm_sqr();
    }
    acc.sqrt()
}

fn conditional_resolution(per: &[ReadoutError], tail: f64) -> f64 {
    (per.iter()
        .map(|r| r.probability * r.epsilon * r.epsilon)
        .sum::<f64>()
        + tail)
        .sqrt()
}

fn check_routes(op: f64, cond: f64) -> Result<()> {
    if (op - cond).abs() > ROUTE_TOL * (1.0 + op) {
        return Err(Error::InvariantBreach(format!(
            "resolution routes disagree: operator {op:.17e}, conditional {cond:.17e}"
        )));
    }
    Ok(())
}

pub fn resolution(m: &MeasurementModel, phi0: &StateVector, f: &Estimator) -> Result<f64> {
    ReadoutFrame::new(m)?.resolution(phi0, f)
}

pub fn precision(m: &MeasurementModel, phi0: &StateVector, f: &Estimator) -> Result<f64> {
    ReadoutFrame::new(m)?.precision(phi0, f)
}

pub fn disturbance(m: &MeasurementModel, phi0: &StateVector) -> Result<f64> {
    ReadoutFrame::new(m)?.disturbance(phi0)
}

pub fn unbiasedness_residual(m: &MeasurementModel, f: &Estimator) -> Result<f64> {
    ReadoutFrame::new(m)?.unbiasedness_residual(f)
}

pub fn state_deviations(m: &MeasurementModel, phi0: &StateVector) -> Result<(f64, f64, f64)> {
    ReadoutFrame::new(m)?.state_deviations(phi0)
}

pub fn informativeness(m: &MeasurementModel, states: &[StateVector]) -> Result<f64> {
    ReadoutFrame::new(m)?.informativeness(states)
}

pub fn is_non_informative(spread: f64) -> bool {
    spread < INFORMATIVENESS_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{heisenberg_evolve, partial_inner_product_probe, pauli_x, pauli_z};
    use crate::measurement::{measurement_value_operator, optimal_estimator, perturb_estimator};
    use crate::models::random::random_state;
    use crate::models::{
        build_cnot_model, build_identity_model, build_random_model, build_von_neumann_model,
        gaussian_state, GridConfig, StateSpec,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn named(m: &MeasurementModel, s: &str) -> StateVector {
        StateSpec::parse(s).unwrap().resolve(m).unwrap()
    }

    fn optimal(frame: &ReadoutFrame<'_>, phi: &StateVector) -> Estimator {
        optimal_estimator(&frame.conditional_states(phi).unwrap(), &frame.model().x0).unwrap()
    }

    fn vn128() -> MeasurementModel {
        build_von_neumann_model(&GridConfig::new(128, 8.0, 1.0).unwrap(), 1.0, 0.0).unwrap()
    }

    fn gauss(m: &MeasurementModel, c: f64, w: f64) -> StateVector {
        gaussian_state(&m.grid.as_ref().unwrap().object_positions(), c, w).unwrap()
    }

    #[test]
    fn cnot_oracles() {
        let m = build_cnot_model();
        let frame = ReadoutFrame::new(&m).unwrap();
        let plus = named(&m, "plus");
        let f = optimal(&frame, &plus);
        let b = frame.metrics(&plus, &f).unwrap();
        assert!(b.epsilon_xt.abs() < 1e-12);
        assert!(b.epsilon_x0.abs() < 1e-12);
        assert!((b.eta_y0 - SQRT_2).abs() < 1e-12);
        assert!((b.sigma_x0 - 1.0).abs() < 1e-12);
        assert!(b.sigma_y0.abs() < 1e-12);
        assert!((b.sigma_yt - 1.0).abs() < 1e-12);
        assert!(b.unbias_residual < 1e-12);
        for r in &b.per_readout {
            assert_eq!((r.epsilon, r.sigma), (0.0, 0.0));
            assert_eq!(r.mean, r.readout);
        }
        let biased = Estimator::custom(vec![-1.0, 1.0], vec![-1.0, 0.5]).unwrap();
        let per =
            per_readout_error(&frame.conditional_states(&plus).unwrap(), &biased, &m.x0).unwrap();
        assert!((per[1].epsilon - 0.5).abs() < 1e-15 && per[1].sigma == 0.0);

        let id = Estimator::identity(frame.readouts());
        assert!(frame.precision(&plus, &id).unwrap() < 1e-12);
        assert!(frame.unbiasedness_residual(&id).unwrap() < 1e-12);
        for s in ["zero", "one", "plus", "minus", "sy+"] {
            assert!((frame.disturbance(&named(&m, s)).unwrap() - SQRT_2).abs() < 1e-12);
        }
        let zero = named(&m, "zero");
        let one = named(&m, "one");
        assert_eq!(frame.state_deviations(&zero).unwrap().0, 0.0);
        assert!((frame.informativeness(&[zero, one]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_model_oracles() {
        let m = build_identity_model();
        let frame = ReadoutFrame::new(&m).unwrap();
        let sy = named(&m, "sy+");
        let f = optimal(&frame, &sy);
        assert!((frame.resolution(&sy, &f).unwrap() - 1.0).abs() < 1e-12);
        assert!((frame.precision(&sy, &f).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(frame.disturbance(&sy).unwrap(), 0.0);
        let phi = StateVector::normalized(vec![C64::new(0.8, 0.0), C64::new(0.6, 0.0)]).unwrap();
        let f = optimal(&frame, &phi);
        let mz: f64 = 0.64 - 0.36;
        assert!((frame.resolution(&phi, &f).unwrap() - (1.0 - mz * mz).sqrt()).abs() < 1e-12);
        let states = ["zero", "one", "plus"].map(|s| named(&m, s));
        let spread = frame.informativeness(&states).unwrap();
        assert!(spread < 1e-15);
        assert!(is_non_informative(spread));
        assert!(is_non_informative(
            frame.tomographic_informativeness().unwrap()
        ));
        assert!(frame.informativeness(&states[..1]).is_err());
    }

    #[test]
    fn von_neumann_oracles() {
        let m = vn128();
        let frame = ReadoutFrame::new(&m).unwrap();
        let phi = gauss(&m, 0.0, 1.0);
        let id = Estimator::identity(frame.readouts());
        let b = frame.metrics(&phi, &id).unwrap();
        assert!((b.epsilon_xt - 1.0).abs() < 1e-3, "{}", b.epsilon_xt);
        assert!((b.epsilon_x0 - 1.0).abs() < 1e-3, "{}", b.epsilon_x0);
        assert!((b.eta_y0 - 0.5).abs() < 1e-3, "{}", b.eta_y0);
        assert!((b.sigma_x0 - 1.0).abs() < 1e-3);
        assert!((b.sigma_y0 - 0.5).abs() < 1e-3);
        assert!(b.unbias_residual < 1e-8, "{}", b.unbias_residual);

        let f = optimal(&frame, &phi);
        let b = frame.metrics(&phi, &f).unwrap();
        assert!(
            (b.epsilon_xt - FRAC_1_SQRT_2).abs() < 1e-3,
            "{}",
            b.epsilon_xt
        );
        assert!(b.unbias_residual > 1e-3);
        assert!(
            (b.unbias_residual - 4.0).abs() < 0.4,
            "{}",
            b.unbias_residual
        );
        for r in b.per_readout.iter().filter(|r| r.readout.abs() <= 4.0) {
            assert!((r.epsilon - FRAC_1_SQRT_2).abs() < 1e-2, "{r:?}");
            assert!((r.epsilon - r.sigma).abs() <= 1e-12);
        }

        let spread = frame
            .informativeness(&[gauss(&m, -3.0, 1.0), gauss(&m, 3.0, 1.0)])
            .unwrap();
        assert!(spread >= 0.95, "{spread}");
    }

    #[test]
    fn disturbance_ignores_estimator() {
        let m = build_random_model(3, 3, 5).unwrap();
        let frame = ReadoutFrame::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let phi = random_state(&mut rng, 3);
        let a = frame.metrics(&phi, &optimal(&frame, &phi)).unwrap();
        let b = frame
            .metrics(&phi, &Estimator::constant(frame.readouts(), 3.0))
            .unwrap();
        assert_eq!(a.eta_y0.to_bits(), b.eta_y0.to_bits());
    }

    /// Dense joint-space oracle for every functional.
    #[test]
    fn matches_dense_operator_definitions() {
        for seed in 0..25u64 {
            let m =
                build_random_model(2 + (seed % 3) as usize, 2 + (seed % 3) as usize, seed).unwrap();
            let frame = ReadoutFrame::new(&m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let phi = random_state(&mut rng, m.d_obj);
            let f = perturb_estimator(&optimal(&frame, &phi), seed, 0.3).unwrap();
            let b = frame.metrics(&phi, &f).unwrap();

            let u = m.coupling_operator().unwrap();
            let ip = Operator::identity(m.d_probe);
            let io = Operator::identity(m.d_obj);
            let joint = phi.kron(&m.xi0);
            let xm = measurement_value_operator(&m, &f).unwrap();
            let x0j = m.x0.kron(&ip);
            let y0j = m.y0.kron(&ip);
            let xt = heisenberg_evolve(&x0j, &u).unwrap();
            let yt = heisenberg_evolve(&y0j, &u).unwrap();
            let norm_of = |a: &Operator| a.apply(&joint).unwrap().norm();

            assert!((b.epsilon_xt - norm_of(&(&xm - &xt))).abs() < 1e-10);
            assert!((b.epsilon_x0 - norm_of(&(&xm - &x0j))).abs() < 1e-10);
            assert!((b.eta_y0 - norm_of(&(&yt - &y0j))).abs() < 1e-10);
            let comm = xt.commutator(&yt).unwrap();
            assert!(
                (b.commutator_t - 0.5 * joint.expectation(&comm).unwrap().norm()).abs() < 1e-10
            );
            let mean_yt = joint.expectation(&yt).unwrap().re;
            let dev = &yt - &Operator::identity(m.joint_dim()).scale(C64::from(mean_yt));
            assert!((b.sigma_yt - norm_of(&dev)).abs() < 1e-10);
            let res = partial_inner_product_probe(&(&xm - &xt), &m.xi0).unwrap();
            assert!((b.unbias_residual - res.operator_norm()).abs() < 1e-10);
            assert!((b.mean_xt - joint.expectation(&xt).unwrap().re).abs() < 1e-10);
            let _ = (io, pauli_x(), pauli_z());
        }
    }

    #[test]
    fn corpus_properties() {
        for seed in 0..60u64 {
            let m =
                build_random_model(2 + (seed % 3) as usize, 2 + ((seed / 3) % 3) as usize, seed)
                    .unwrap();
            let frame = ReadoutFrame::new(&m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
            let phi = random_state(&mut rng, m.d_obj);
            let f = optimal(&frame, &phi);
            let b = frame.metrics(&phi, &f).unwrap();
            assert!((b.epsilon_xt - b.epsilon_xt_conditional).abs() <= 1e-10);
            assert!((b.mean_estimate - b.mean_xt).abs() <= 1e-10);
            for r in &b.per_readout {
                assert!((r.epsilon - r.sigma).abs() <= 1e-12, "{r:?}");
                let lhs = r.epsilon.powi(2);
                let rhs = r.sigma.powi(2) + (r.mean - r.value).powi(2);
                assert!((lhs - rhs).abs() <= 1e-10);
            }
            for k in 0..20u64 {
                let scale = [1e-3, 1e-1, 1.0][(k % 3) as usize];
                let g = perturb_estimator(&f, seed * 1000 + k, scale).unwrap();
                assert!(frame.resolution(&phi, &g).unwrap() >= b.epsilon_xt - 1e-12);
            }
        }
    }

    #[test]
    fn cnot_perturbation_strictly_worse() {
        let m = build_cnot_model();
        let frame = ReadoutFrame::new(&m).unwrap();
        let plus = named(&m, "plus");
        let f = optimal(&frame, &plus);
        let g = perturb_estimator(&f, 3, 0.1).unwrap();
        assert!(frame.resolution(&plus, &g).unwrap() > frame.resolution(&plus, &f).unwrap());
    }

    #[test]
    fn state_dimension_is_checked() {
        let m = build_cnot_model();
        let phi = StateVector::basis(3, 0).unwrap();
        assert!(disturbance(&m, &phi).is_err());
    }
}
