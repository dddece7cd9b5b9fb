//! Position grids and the von Neumann position meter.
//!
//! The object lives on `n_points` sites spanning `[-L, L)`. The probe grid has
//! the same spacing but twice the extent, `[-2L, 2L)`, so a probe confined to
//! `[-L, L]` can be shifted by any object position without wrapping around
//! the periodic boundary.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{BuilderSpec, Coupling, ImpulsiveCoupling, MeasurementModel, ModelSource};
use crate::error::{Error, Result};
use crate::hilbert::{Operator, StateVector, C64};

pub(crate) const DEFAULT_POINTS: usize = 256;
pub(crate) const DEFAULT_HALF_WIDTH: f64 = 16.0;

/// Largest probe probability mass allowed outside `[-L, L]`.
pub const PROBE_LEAKAGE_LIMIT: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub n_points: usize,
    pub half_width: f64,
    pub hbar: f64,
}

impl GridConfig {
    pub fn new(n_points: usize, half_width: f64, hbar: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid(format!(
                "grid point count must be a power of two >= 2, got {n_points}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::invalid(format!("hbar must be positive, got {hbar}")));
        }
        Ok(GridConfig {
            n_points,
            half_width,
            hbar,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    /// Object sites `-L + jΔ`.
    pub fn positions(&self) -> Vec<f64> {
        sites(self.n_points, self.half_width, self.spacing())
    }

    /// Probe sites `-2L + jΔ`, `2n` of them.
    pub fn probe_positions(&self) -> Vec<f64> {
        sites(2 * self.n_points, 2.0 * self.half_width, self.spacing())
    }

    pub fn position_operator(&self) -> Operator {
        Operator::diagonal(&self.positions())
    }

    /// Spectral momentum `ħ F† diag(k) F` on the object grid.
    pub fn momentum_operator(&self) -> Operator {
        momentum_matrix(self.n_points, self.spacing(), self.hbar)
    }
}

fn sites(n: usize, half: f64, dx: f64) -> Vec<f64> {
    (0..n).map(|j| -half + j as f64 * dx).collect()
}

/// Angular wavenumbers `2πm/(nΔ)`, `m = -n/2 .. n/2-1`, ascending.
fn wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let half = (n / 2) as i64;
    (-half..(n as i64 - half))
        .map(|m| 2.0 * PI * m as f64 / (n as f64 * dx))
        .collect()
}

/// Plane-wave eigenbasis: column `m` is `exp(i k_m x)/√n` on the sites.
fn plane_wave_basis(positions: &[f64], ks: &[f64]) -> DMatrix<C64> {
    let n = positions.len() as f64;
    DMatrix::from_fn(positions.len(), ks.len(), |a, m| {
        C64::from_polar(1.0 / n.sqrt(), ks[m] * positions[a])
    })
}

fn momentum_matrix(n: usize, dx: f64, hbar: f64) -> Operator {
    let ks = wavenumbers(n, dx);
    // entry (j, l) depends only on j - l
    let kernel: Vec<C64> = (0..2 * n - 1)
        .map(|idx| {
            let d = idx as f64 - (n as f64 - 1.0);
            ks.iter()
                .map(|&k| C64::from_polar(k, k * d * dx))
                .sum::<C64>()
                * (hbar / n as f64)
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |j, l| kernel[j + n - 1 - l]);
    Operator::from_matrix_unchecked(m).hermitian_part()
}

/// Normalized discrete Gaussian with position-density standard deviation
/// `width`: amplitudes `∝ exp(-(x - center)² / (4 width²))`.
pub fn gaussian_state(positions: &[f64], center: f64, width: f64) -> Result<StateVector> {
    if !(width > 0.0 && width.is_finite()) || !center.is_finite() {
        return Err(Error::invalid(format!(
            "gaussian needs finite center and positive width, got center {center}, width {width}"
        )));
    }
    let amps = DVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|&x| C64::from((-(x - center).powi(2) / (4.0 * width * width)).exp())),
    );
    StateVector::from_unnormalized(amps)
}

/// Sites of a grid model, kept so states can be specified by position.
#[derive(Clone, Debug, PartialEq)]
pub struct GridInfo {
    pub config: GridConfig,
    pub probe_width: f64,
    pub probe_center: f64,
}

impl GridInfo {
    pub fn object_positions(&self) -> Vec<f64> {
        self.config.positions()
    }

    pub fn probe_positions(&self) -> Vec<f64> {
        self.config.probe_positions()
    }
}

/// Position meter with impulsive coupling `exp(-(i/ħ) q̂⊗P̂)`, which maps
/// `φ(x)ξ(X)` to `φ(x)ξ(X - x)`.
pub fn build_von_neumann_model(
    grid: &GridConfig,
    probe_width: f64,
    probe_center: f64,
) -> Result<MeasurementModel> {
    let dx = grid.spacing();
    if !(probe_width >= 2.0 * dx) {
        return Err(Error::Precondition(format!(
            "probe width {probe_width} below twice the grid spacing {dx}"
        )));
    }
    let l = grid.half_width;
    let probe_sites = grid.probe_positions();
    let xi0 = gaussian_state(&probe_sites, probe_center, probe_width)?;
    let leakage: f64 = probe_sites
        .iter()
        .zip(xi0.amplitudes())
        .filter(|(x, _)| x.abs() > l)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    if leakage > PROBE_LEAKAGE_LIMIT {
        return Err(Error::Precondition(format!(
            "probe leaks past the grid boundary ±{l}: mass {leakage:.3e} exceeds {PROBE_LEAKAGE_LIMIT:.0e}"
        )));
    }
    assemble_von_neumann(grid, probe_width, probe_center)
}

/// [`build_von_neumann_model`] without the width and leakage preconditions.
pub(crate) fn assemble_von_neumann(
    grid: &GridConfig,
    probe_width: f64,
    probe_center: f64,
) -> Result<MeasurementModel> {
    let dx = grid.spacing();
    let probe_sites = grid.probe_positions();
    let xi0 = gaussian_state(&probe_sites, probe_center, probe_width)?;
    let positions = grid.positions();
    let probe_ks = wavenumbers(probe_sites.len(), dx);
    let coupling = ImpulsiveCoupling {
        object_values: positions.clone(),
        generator_values: probe_ks.iter().map(|k| grid.hbar * k).collect(),
        generator_basis: plane_wave_basis(&probe_sites, &probe_ks),
        strength: 1.0 / grid.hbar,
    };

    let spec = BuilderSpec::new("von_neumann")
        .with("n_points", grid.n_points as u64)
        .with("half_width", grid.half_width)
        .with("hbar", grid.hbar)
        .with("probe_width", probe_width)
        .with("probe_center", probe_center);

    Ok(MeasurementModel {
        label: "von_neumann".into(),
        description: format!(
            "position meter on {} sites, L={}, hbar={}, probe width {}, probe center {}",
            grid.n_points, grid.half_width, grid.hbar, probe_width, probe_center
        ),
        d_obj: grid.n_points,
        d_probe: probe_sites.len(),
        x0: Operator::diagonal(&positions),
        y0: grid.momentum_operator(),
        readout: Operator::diagonal(&probe_sites),
        coupling: Coupling::Impulsive(coupling),
        xi0,
        hbar: grid.hbar,
        canonical_pair: true,
        grid: Some(GridInfo {
            config: *grid,
            probe_width,
            probe_center,
        }),
        source: ModelSource::Builder(spec),
    })
}
