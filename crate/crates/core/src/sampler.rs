//! Monte Carlo readout sampling.
//!
//! Draws come from ChaCha8 (`rand_chacha`). The `n` draws are cut into fixed
//! chunks of [`CHUNK`]; chunk `k` uses the generator seeded with `seed` on
//! stream `k`, so counts do not depend on how many threads run the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Operator, StateVector};
use crate::measurement::{ConditionalEnsemble, Estimator, ReadoutFrame};
use crate::metrics::per_readout_error;
use crate::models::MeasurementModel;

pub const CHUNK: u64 = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub n_samples: u64,
    pub seed: u64,
    pub readouts: Vec<f64>,
    pub counts: Vec<u64>,
    /// `counts / n`, aligned with `readouts`.
    pub empirical_p: Vec<f64>,
    #[serde(default)]
    pub empirical: Option<EmpiricalMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMetrics {
    pub eps2_xt: f64,
    pub eps2_xt_stderr: f64,
    pub eps_xt: f64,
    /// Delta-method error of `√ε²`; zero when `ε² = 0`.
    pub eps_xt_stderr: f64,
    pub f_mean: f64,
    pub f_mean_stderr: f64,
}

impl SampleRun {
    pub fn frequency(&self, readout: f64) -> Option<f64> {
        self.readouts
            .iter()
            .position(|&r| r == readout)
            .map(|j| self.empirical_p[j])
    }
}

/// Draws `n` readout indices from `probabilities` by inverse CDF and returns
/// the count per index.
pub fn sample_counts(probabilities: &[f64], n: u64, seed: u64) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut cdf = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for &p in probabilities {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::invalid("readout distribution has no mass"));
    }
    let last = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let len = CHUNK.min(n - k * CHUNK);
            let mut counts = vec![0u64; cdf.len()];
            for _ in 0..len {
                let u = rng.random::<f64>() * acc;
                let j = cdf.partition_point(|&c| c <= u).min(last);
                counts[j] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; cdf.len()];
    for c in partial {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    Ok(counts)
}

pub fn sample_readouts(
    m: &MeasurementModel,
    phi0: &StateVector,
    n: u64,
    seed: u64,
) -> Result<SampleRun> {
    let ens = ReadoutFrame::new(m)?.readout_distribution(phi0)?;
    sample_ensemble(&ens, n, seed)
}

pub fn sample_ensemble(ens: &ConditionalEnsemble, n: u64, seed: u64) -> Result<SampleRun> {
    let counts = sample_counts(&ens.probabilities, n, seed)?;
    Ok(SampleRun {
        n_samples: n,
        seed,
        readouts: ens.readouts.clone(),
        empirical_p: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        counts,
        empirical: None,
    })
}

fn weighted_mean_and_stderr(counts: &[u64], values: &[f64], n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = counts
        .iter()
        .zip(values)
        .map(|(&c, v)| c as f64 * v)
        .sum::<f64>()
        / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = counts
        .iter()
        .zip(values)
        .map(|(&c, v)| c as f64 * (v - mean).powi(2))
        .sum();
    (mean, (ss / (nf - 1.0) / nf).sqrt())
}

/// Sample averages of `ε²_{X_j}` and `f(X_j)` over the drawn readouts.
pub fn empirical_metrics(
    mut run: SampleRun,
    ens: &ConditionalEnsemble,
    f: &Estimator,
    x0: &Operator,
) -> Result<SampleRun> {
    if run.readouts != ens.readouts {
        return Err(Error::invalid(
            "sample run and ensemble have different readouts",
        ));
    }
    let per = per_readout_error(ens, f, x0)?;
    let mut eps2 = vec![0.0; run.readouts.len()];
    for r in &per {
        let j = run
            .readouts
            .iter()
            .position(|&x| x == r.readout)
            .expect("readouts agree");
        eps2[j] = r.epsilon * r.epsilon;
    }
    for (j, &c) in run.counts.iter().enumerate() {
        if c > 0 && ens.probabilities[j] < ens.cutoff {
            return Err(Error::invalid(format!(
                "readout {} was drawn but carries no conditional state",
                run.readouts[j]
            )));
        }
    }
    let values = f.values_on(&run.readouts)?;
    let (eps2_xt, eps2_xt_stderr) = weighted_mean_and_stderr(&run.counts, &eps2, run.n_samples);
    let (f_mean, f_mean_stderr) = weighted_mean_and_stderr(&run.counts, &values, run.n_samples);
    let eps_xt = eps2_xt.max(0.0).sqrt();
    run.empirical = Some(EmpiricalMetrics {
        eps2_xt,
        eps2_xt_stderr,
        eps_xt,
        eps_xt_stderr: if eps_xt > 0.0 {
            eps2_xt_stderr / (2.0 * eps_xt)
        } else {
            0.0
        },
        f_mean,
        f_mean_stderr,
    });
    Ok(run)
}
