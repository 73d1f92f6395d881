//! Variance-based Sobol indices with the Jansen estimators.

use rand::prelude::*;

use super::{ParameterSpace, SensitivityError};

/// The two base samples and the column-swapped blocks of a Sobol design.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolDesign {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    /// `ab[j]` is A with column j replaced by B's column j.
    pub ab: Vec<Vec<Vec<f64>>>,
}

impl SobolDesign {
    pub fn samples(&self) -> usize {
        self.a.len()
    }

    pub fn dimensions(&self) -> usize {
        self.ab.len()
    }

    /// All rows in evaluation order: A, B, then each swapped block;
    /// `n * (k + 2)` rows in total.
    pub fn stacked(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(self.samples() * (self.dimensions() + 2));
        rows.extend(self.a.iter().cloned());
        rows.extend(self.b.iter().cloned());
        for block in &self.ab {
            rows.extend(block.iter().cloned());
        }
        rows
    }

    /// Splits a stacked evaluation vector back into `(f_A, f_B, f_AB)`.
    pub fn split_evaluations(&self, evals: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.samples();
        let k = self.dimensions();
        assert_eq!(evals.len(), n * (k + 2), "evaluations must match the design");
        let f_a = evals[..n].to_vec();
        let f_b = evals[n..2 * n].to_vec();
        let f_ab = (0..k)
            .map(|j| evals[(2 + j) * n..(3 + j) * n].to_vec())
            .collect();
        (f_a, f_b, f_ab)
    }
}

/// Independent uniform base samples A and B over the bounds plus the k
/// column-swapped blocks; the total evaluation budget is `n * (k + 2)`.
pub fn sobol_design<R: Rng>(space: &ParameterSpace, n: usize, rng: &mut R) -> SobolDesign {
    let k = space.dimensions();
    let draw = |rng: &mut R| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                space
                    .bounds
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                    .collect()
            })
            .collect()
    };
    let a = draw(rng);
    let b = draw(rng);
    let ab = (0..k)
        .map(|j| {
            a.iter()
                .zip(&b)
                .map(|(ra, rb)| {
                    let mut row = ra.clone();
                    row[j] = rb[j];
                    row
                })
                .collect()
        })
        .collect();
    SobolDesign { a, b, ab }
}

/// Jansen estimators for the first-order and total-order indices:
///
/// - `S_j  = (V - sum((f_B - f_AB_j)^2) / 2n) / V`
/// - `ST_j = (sum((f_A - f_AB_j)^2) / 2n) / V`
///
/// with V the empirical variance over the combined A and B evaluations.
/// Estimates may fall slightly outside [0, 1] from sampling noise and are
/// deliberately not clipped.
pub fn sobol_indices(
    f_a: &[f64],
    f_b: &[f64],
    f_ab: &[Vec<f64>],
) -> Result<Vec<(f64, f64)>, SensitivityError> {
    let n = f_a.len();
    if n < 2 || f_b.len() != n || f_ab.iter().any(|col| col.len() != n) {
        return Err(SensitivityError::TooFewSamples {
            what: "sobol indices",
            needed: 2,
            got: n,
        });
    }
    let combined: Vec<f64> = f_a.iter().chain(f_b).cloned().collect();
    let mean = combined.iter().sum::<f64>() / combined.len() as f64;
    let variance = combined.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (combined.len() - 1) as f64;
    if variance <= 0.0 {
        return Err(SensitivityError::DegenerateResponse);
    }
    let half = 1.0 / (2.0 * n as f64);
    Ok(f_ab
        .iter()
        .map(|col| {
            let first_gap: f64 = f_b
                .iter()
                .zip(col)
                .map(|(b, ab)| (b - ab).powi(2))
                .sum::<f64>()
                * half;
            let total_gap: f64 = f_a
                .iter()
                .zip(col)
                .map(|(a, ab)| (a - ab).powi(2))
                .sum::<f64>()
                * half;
            ((variance - first_gap) / variance, total_gap / variance)
        })
        .collect())
}
