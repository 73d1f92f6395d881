//! Latin hypercube sampling.

use rand::prelude::*;

use super::ParameterSpace;

/// Draws an n-row Latin hypercube over the space: per dimension, the n
/// equal-width strata are permuted independently and each sample lands
/// uniformly inside its stratum, so every stratum holds exactly one sample.
pub fn lhs_sample<R: Rng>(space: &ParameterSpace, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let k = space.dimensions();
    let mut design = vec![vec![0.0; k]; n];
    for (j, &(lo, hi)) in space.bounds.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, &stratum) in strata.iter().enumerate() {
            let u = rng.random::<f64>();
            design[i][j] = lo + (hi - lo) * (stratum as f64 + u) / n as f64;
        }
    }
    design
}
