//! Seeded random models: GUE observables, Haar couplings, Gaussian states.
//!
//! Everything is drawn from a `ChaCha8Rng` seeded with the model seed, in a
//! fixed order (x0, y0, X0, U, xi0), so a seed pins the model bit for bit.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BuilderSpec, Coupling, MeasurementModel, ModelSource};
use crate::error::{Error, Result};
use crate::hilbert::{Operator, StateVector, C64};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 16;

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<C64> {
    // row-major fill so the draw order does not depend on storage layout
    let entries: Vec<C64> = (0..d * d).map(|_| complex_gaussian(rng)).collect();
    DMatrix::from_row_slice(d, d, &entries)
}

/// Gaussian unitary ensemble: `(G + G†)/2` for a Ginibre `G`.
pub fn gue<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Operator {
    Operator::from_matrix_unchecked(ginibre(rng, d)).hermitian_part()
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix,
/// with the phases of `R`'s diagonal pushed into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Operator {
    let qr = ginibre(rng, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / C64::from(rjj.norm())
        } else {
            C64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    Operator::from_matrix_unchecked(q)
}

/// Normalized complex Gaussian vector (uniform on the unit sphere).
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> StateVector {
    let amps: Vec<C64> = (0..d).map(|_| complex_gaussian(rng)).collect();
    StateVector::normalized(amps).expect("gaussian vector is nonzero with probability one")
}

pub fn build_random_model(d_obj: usize, d_probe: usize, seed: u64) -> Result<MeasurementModel> {
    for (name, d) in [("d_obj", d_obj), ("d_probe", d_probe)] {
        if !(MIN_DIM..=MAX_DIM).contains(&d) {
            return Err(Error::invalid(format!(
                "{name} must lie in {MIN_DIM}..={MAX_DIM}, got {d}"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = gue(&mut rng, d_obj);
    let y0 = gue(&mut rng, d_obj);
    let readout = gue(&mut rng, d_probe);
    let u = haar_unitary(&mut rng, d_obj * d_probe);
    let xi0 = random_state(&mut rng, d_probe);
    Ok(MeasurementModel {
        label: "random".into(),
        description: format!("random model d_obj={d_obj} d_probe={d_probe} seed={seed}"),
        d_obj,
        d_probe,
        x0,
        y0,
        readout,
        coupling: Coupling::Dense(u),
        xi0,
        hbar: 1.0,
        canonical_pair: false,
        grid: None,
        source: ModelSource::Builder(
            BuilderSpec::new("random")
                .with("d_obj", d_obj as u64)
                .with("d_probe", d_probe as u64)
                .with("seed", seed),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::validate_model;
    use std::collections::HashSet;

    #[test]
    fn same_seed_same_model() {
        let a = build_random_model(3, 4, 11).unwrap();
        let b = build_random_model(3, 4, 11).unwrap();
        assert_eq!(a, b);
        let bits = |m: &MeasurementModel| -> Vec<u64> {
            m.coupling_operator()
                .unwrap()
                .matrix()
                .iter()
                .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn seed_42_is_unitary() {
        let m = build_random_model(4, 4, 42).unwrap();
        assert!(m.coupling_operator().unwrap().unitary_deviation() <= 1e-12);
    }

    #[test]
    fn dims_out_of_range() {
        assert!(build_random_model(1, 2, 0).is_err());
        assert!(build_random_model(2, 17, 0).is_err());
    }

    #[test]
    fn corpus_is_valid_and_distinct() {
        let mut seen = HashSet::new();
        for seed in 0..200u64 {
            let d_obj = 2 + (seed % 3) as usize;
            let d_probe = 2 + ((seed / 3) % 3) as usize;
            let m = build_random_model(d_obj, d_probe, seed).unwrap();
            let v = validate_model(&m);
            assert!(v.is_empty(), "seed {seed}: {v:?}");
            let key: Vec<u64> = m.x0.matrix().iter().map(|z| z.re.to_bits()).collect();
            assert!(seen.insert(key), "seed {seed} collides");
        }
    }

    /// Eigenphases of a unitary. The Hermitian and anti-Hermitian parts of a
    /// normal matrix commute, so a generic real combination of them shares
    /// the eigenvectors.
    fn eigenphases(u: &Operator) -> Vec<f64> {
        let m = u.matrix();
        let h = (m + m.adjoint()) * C64::from(0.5);
        let k = (m - m.adjoint()) * C64::new(0.0, -0.5);
        let mix = h + k * C64::from(std::f64::consts::E);
        let eig = mix.symmetric_eigen();
        (0..u.dim())
            .map(|j| {
                let v = eig.eigenvectors.column(j);
                v.dotc(&(m * v)).arg()
            })
            .collect()
    }

    #[test]
    fn haar_eigenphases_are_uniform() {
        // chi-squared over 8 bins; critical value for p = 0.001 at 7 dof
        const CRITICAL: f64 = 24.322;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 8];
        let mut total = 0usize;
        for _ in 0..200 {
            let u = haar_unitary(&mut rng, 4);
            for phase in eigenphases(&u) {
                let t = (phase + std::f64::consts::PI) / (2.0 * std::f64::consts::PI);
                counts[((t * 8.0) as usize).min(7)] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < CRITICAL, "chi2 {chi2}, counts {counts:?}");
    }

    #[test]
    fn eigenphase_helper_recovers_known_spectrum() {
        let phases = [0.3, -1.2, 2.5];
        let d = Operator::from_matrix_unchecked(DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                C64::from_polar(1.0, phases[i])
            } else {
                C64::new(0.0, 0.0)
            }
        }));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = haar_unitary(&mut rng, 3);
        let u = &(&v * &d) * &v.adjoint();
        let mut got = eigenphases(&u);
        got.sort_by(f64::total_cmp);
        let mut want = phases.to_vec();
        want.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn gue_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(gue(&mut rng, 7).is_hermitian());
    }
}
