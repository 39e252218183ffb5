//! Sparse selection core: orthogonal matching pursuit and its randomized
//! ensemble.
//!
//! Given a unit-norm dictionary and an aligned target, OMP greedily picks
//! the column most correlated with the current residual, refits all
//! coefficients by least squares on the support, and iterates until the
//! sparsity budget is spent or the residual is negligible. The ensemble
//! variant samples each step's pick from the top-`tau` most correlated
//! columns (probability proportional to |correlation|), repeats the whole
//! pursuit `draws` times on independent RNG streams, and averages.
//!
//! Determinism contract: for a fixed seed the ensemble result is bitwise
//! identical regardless of thread count or the `parallel` feature. Draw
//! `i` always uses ChaCha stream `i` of the seed, and the reduction over
//! draws runs in draw order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::targets::TargetVector;

mod linalg;

pub use linalg::{dot, norm2};

/// Result of one pursuit: selected columns with their least-squares refit.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    /// Column indices in selection order.
    pub support: Vec<usize>,
    /// Refit coefficients, aligned with `support`.
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Averaged outcome of the randomized ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Mean over draws of each draw's full-length coefficient vector
    /// (columns a draw did not select contribute zero).
    pub avg_coefficients: Vec<f64>,
    /// Fraction of draws that selected each column.
    pub selection_frequency: Vec<f64>,
    pub draws: usize,
    pub seed: u64,
    pub sparsity_kappa: f64,
    pub tau: usize,
}

/// Ensemble hyperparameters. `kappa` is the sparsity budget as a fraction
/// of the column count: `k_max = max(1, floor(kappa * C))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleParams {
    pub kappa: f64,
    pub tau: usize,
    pub draws: usize,
    pub seed: u64,
    /// Pursuit stops once `residual_norm <= fidelity_epsilon * ||t||`.
    pub fidelity_epsilon: f64,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            tau: 5,
            draws: 50_000,
            seed: 0,
            fidelity_epsilon: 1e-6,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SparseError {
    #[error("dictionary has {rows} rows but target has {target}")]
    DimensionMismatch { rows: usize, target: usize },
    #[error("kappa {0} outside (0, 1]")]
    InvalidKappa(f64),
    #[error("tau must be at least 1")]
    InvalidTau,
    #[error("draw count must be at least 1")]
    InvalidDraws,
    #[error("k_max must be at least 1")]
    InvalidKMax,
    #[error("dictionary column {0} is not unit-norm; normalize first")]
    NotNormalized(usize),
}

fn check_inputs(d: &Dictionary, t: &[f64]) -> Result<(), SparseError> {
    if d.n_rows() != t.len() {
        return Err(SparseError::DimensionMismatch {
            rows: d.n_rows(),
            target: t.len(),
        });
    }
    for c in 0..d.n_cols() {
        let norm = norm2(d.column(c));
        if (norm - 1.0).abs() > 1e-6 {
            return Err(SparseError::NotNormalized(c));
        }
    }
    Ok(())
}

/// Classic OMP on a unit-norm dictionary.
///
/// Ties in the correlation argmax break toward the lowest column index.
/// Rank deficiency in the refit drops the newest column and stops.
pub fn omp(
    d: &Dictionary,
    t: &TargetVector,
    k_max: usize,
    fidelity_epsilon: f64,
) -> Result<SparseSolution, SparseError> {
    check_inputs(d, &t.values)?;
    if k_max == 0 {
        return Err(SparseError::InvalidKMax);
    }
    let k_max = k_max.min(d.n_cols());
    Ok(pursuit(d, &t.values, k_max, fidelity_epsilon, 1, |_, _| 0))
}

/// Randomized ensemble of OMP passes.
///
/// With `tau == 1` the candidate distribution is degenerate, every draw is
/// the same deterministic pursuit, and the average equals that single
/// solution exactly, so it is computed once.
pub fn ensemble_omp(
    d: &Dictionary,
    t: &TargetVector,
    params: &EnsembleParams,
) -> Result<EnsembleResult, SparseError> {
    run_ensemble(d, t, params, true)
}

/// Sequential reference path for the ensemble. [`ensemble_omp`] must agree
/// with this bitwise; the benches compare their throughput.
pub fn ensemble_omp_sequential(
    d: &Dictionary,
    t: &TargetVector,
    params: &EnsembleParams,
) -> Result<EnsembleResult, SparseError> {
    run_ensemble(d, t, params, false)
}

fn run_ensemble(
    d: &Dictionary,
    t: &TargetVector,
    params: &EnsembleParams,
    parallel: bool,
) -> Result<EnsembleResult, SparseError> {
    check_inputs(d, &t.values)?;
    if !(params.kappa > 0.0 && params.kappa <= 1.0) {
        return Err(SparseError::InvalidKappa(params.kappa));
    }
    if params.tau == 0 {
        return Err(SparseError::InvalidTau);
    }
    if params.draws == 0 {
        return Err(SparseError::InvalidDraws);
    }

    let n_cols = d.n_cols();
    let k_max = ((params.kappa * n_cols as f64).floor() as usize).max(1);

    let result = |solutions: Vec<(Vec<usize>, Vec<f64>)>, draws: usize| {
        let mut sums = vec![0.0f64; n_cols];
        let mut counts = vec![0usize; n_cols];
        for (support, coeffs) in &solutions {
            for (&col, &x) in support.iter().zip(coeffs) {
                sums[col] += x;
                counts[col] += 1;
            }
        }
        let inv = 1.0 / draws as f64;
        EnsembleResult {
            avg_coefficients: sums.iter().map(|s| s * inv).collect(),
            selection_frequency: counts.iter().map(|&c| c as f64 * inv).collect(),
            draws: params.draws,
            seed: params.seed,
            sparsity_kappa: params.kappa,
            tau: params.tau,
        }
    };

    if params.tau == 1 {
        let sol = pursuit(d, &t.values, k_max, params.fidelity_epsilon, 1, |_, _| 0);
        // Every draw is identical; averaging R copies is the value itself.
        let mut avg = vec![0.0f64; n_cols];
        let mut freq = vec![0.0f64; n_cols];
        for (&col, &x) in sol.support.iter().zip(&sol.coefficients) {
            avg[col] = x;
            freq[col] = 1.0;
        }
        return Ok(EnsembleResult {
            avg_coefficients: avg,
            selection_frequency: freq,
            draws: params.draws,
            seed: params.seed,
            sparsity_kappa: params.kappa,
            tau: params.tau,
        });
    }

    let draw_one = |i: usize| -> (Vec<usize>, Vec<f64>) {
        // One independent ChaCha stream per draw: reproducible regardless
        // of how draws are scheduled across threads.
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(i as u64);
        let sol = pursuit(
            d,
            &t.values,
            k_max,
            params.fidelity_epsilon,
            params.tau,
            |candidates, total| sample_weighted(&mut rng, candidates, total),
        );
        (sol.support, sol.coefficients)
    };

    let solutions: Vec<(Vec<usize>, Vec<f64>)> = if parallel {
        #[cfg(feature = "parallel")]
        {
            (0..params.draws).into_par_iter().map(draw_one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..params.draws).map(draw_one).collect()
        }
    } else {
        (0..params.draws).map(draw_one).collect()
    };

    Ok(result(solutions, params.draws))
}

/// Samples an index into `candidates` with probability proportional to the
/// candidate's |correlation|. `total` is the precomputed weight sum (> 0).
fn sample_weighted<R: Rng>(rng: &mut R, candidates: &[(usize, f64)], total: f64) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &(_, w)) in candidates.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    candidates.len() - 1
}

/// Shared pursuit loop. `choose` receives the top-`tau` candidates as
/// `(column, |correlation|)` sorted by descending correlation (ties toward
/// the lower index) together with their weight sum, and returns the index
/// of the pick within that slice.
fn pursuit<F>(
    d: &Dictionary,
    t: &[f64],
    k_max: usize,
    fidelity_epsilon: f64,
    tau: usize,
    mut choose: F,
) -> SparseSolution
where
    F: FnMut(&[(usize, f64)], f64) -> usize,
{
    let n_cols = d.n_cols();
    let target_norm = norm2(t);
    let stop_below = fidelity_epsilon * target_norm;

    let mut residual = t.to_vec();
    let mut residual_norm = target_norm;
    let mut selected = vec![false; n_cols];
    let mut support: Vec<usize> = Vec::new();
    let mut coefficients: Vec<f64> = Vec::new();
    let mut iterations = 0usize;

    while support.len() < k_max && residual_norm > stop_below {
        let mut candidates: Vec<(usize, f64)> = (0..n_cols)
            .filter(|&j| !selected[j])
            .map(|j| (j, dot(d.column(j), &residual).abs()))
            .collect();
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        candidates.truncate(tau);
        if candidates.is_empty() || candidates[0].1 == 0.0 {
            break; // residual orthogonal to everything left
        }
        let total: f64 = candidates.iter().map(|c| c.1).sum();
        let pick = candidates[choose(&candidates, total)].0;

        selected[pick] = true;
        support.push(pick);
        let columns: Vec<&[f64]> = support.iter().map(|&j| d.column(j)).collect();
        match linalg::least_squares(&columns, t) {
            Some(x) => coefficients = x,
            None => {
                // Newest column made the support rank-deficient: drop it
                // and stop with the previous refit.
                selected[pick] = false;
                support.pop();
                break;
            }
        }

        residual.copy_from_slice(t);
        for (&x, col) in coefficients.iter().zip(&columns) {
            for (r, v) in residual.iter_mut().enumerate() {
                *v -= x * col[r];
            }
        }
        residual_norm = norm2(&residual);
        iterations += 1;
    }

    SparseSolution {
        support,
        coefficients,
        residual_norm,
        iterations,
    }
}
