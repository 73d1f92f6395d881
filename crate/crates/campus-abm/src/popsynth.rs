//! Population synthesis: reconstructs the N x n visit-probability matrix and
//! the initial agent population from published marginals.
//!
//! The survey that produced the original per-student rows is not available,
//! so rows are synthesized from a Dirichlet distribution around the mean
//! visit probabilities. The mean vector itself is recovered by inverting the
//! contact-probability formula, anchored at the observed MU marginal. Both
//! the mean vector and a full per-agent matrix can be overridden through the
//! config file for users who hold real data.

use rand::prelude::*;
use rand_distr::Gamma;

use crate::core::{Agent, DrinkingState, ModelError, CLASS_YEARS, DURATION_UNSET, PROB_TOL};

/// Inputs for synthesizing the visit matrix and the initial population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    /// Number of agents N.
    pub count: usize,
    pub context_names: Vec<String>,
    /// Mean visit probability per context; sums to one.
    pub mean_visit_probs: Vec<f64>,
    /// Dirichlet concentration controlling row dispersion around the mean.
    pub concentration: f64,
    pub class_year_fractions: [f64; CLASS_YEARS],
    pub initial_drinker_fraction: f64,
    /// Explicit per-agent rows loaded from a matrix file; bypasses the
    /// Dirichlet synthesis when present.
    pub matrix_override: Option<Vec<Vec<f64>>>,
}

impl PopulationSpec {
    /// Baseline: marginals anchored at the MU mean of 0.33, concentration 10.
    pub fn baseline() -> Self {
        let sigmas = [0.1429, 0.4492, 0.2043, 0.2037];
        let mean_visit_probs = derive_context_marginals(&sigmas, 0.33)
            .expect("baseline anchor is feasible");
        PopulationSpec {
            count: 538,
            context_names: crate::core::CONTEXT_NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            mean_visit_probs,
            concentration: 10.0,
            class_year_fractions: [0.30, 0.25, 0.23, 0.18, 0.04],
            initial_drinker_fraction: 0.05,
            matrix_override: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.count == 0 {
            return Err(ModelError::invalid("population.count", "must be positive"));
        }
        let n = self.mean_visit_probs.len();
        if self.context_names.len() != n {
            return Err(ModelError::invalid(
                "population.context_names",
                "length must match mean_visit_probs",
            ));
        }
        let sum: f64 = self.mean_visit_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ModelError::invalid(
                "population.mean_visit_probs",
                "must sum to 1",
            ));
        }
        if self.mean_visit_probs.iter().any(|&p| p < 0.0) {
            return Err(ModelError::invalid(
                "population.mean_visit_probs",
                "must be non-negative",
            ));
        }
        if self.concentration <= 0.0 {
            return Err(ModelError::invalid(
                "population.concentration",
                "must be positive",
            ));
        }
        let cy: f64 = self.class_year_fractions.iter().sum();
        if (cy - 1.0).abs() > PROB_TOL {
            return Err(ModelError::invalid(
                "population.class_year_fractions",
                "must sum to 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.initial_drinker_fraction) {
            return Err(ModelError::invalid(
                "population.initial_drinker_fraction",
                "must lie in [0, 1]",
            ));
        }
        if let Some(matrix) = &self.matrix_override {
            if matrix.len() != self.count {
                return Err(ModelError::invalid(
                    "population.matrix_file",
                    "row count must equal N",
                ));
            }
            for (i, row) in matrix.iter().enumerate() {
                validate_row(row, n, i)?;
            }
        }
        Ok(())
    }
}

fn validate_row(row: &[f64], n: usize, index: usize) -> Result<(), ModelError> {
    if row.len() != n {
        return Err(ModelError::invalid(
            "population.matrix_file",
            &format!("row {index} has {} entries, expected {n}", row.len()),
        ));
    }
    if row.iter().any(|&p| p < 0.0) {
        return Err(ModelError::invalid(
            "population.matrix_file",
            &format!("row {index} has a negative entry"),
        ));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ModelError::invalid(
            "population.matrix_file",
            &format!("row {index} sums to {sum}, expected 1"),
        ));
    }
    Ok(())
}

/// Inverts the contact-probability formula: given the four target contact
/// probabilities and the mean visit probability of the anchor context (the
/// one with the largest contact probability), returns the full five-entry
/// mean visit vector with the remainder assigned to the last context.
pub fn derive_context_marginals(
    target_sigmas: &[f64],
    anchor_p: f64,
) -> Result<Vec<f64>, ModelError> {
    if target_sigmas.iter().any(|&s| s <= 0.0) {
        return Err(ModelError::invalid(
            "target_sigmas",
            "entries must be positive",
        ));
    }
    if !(anchor_p > 0.0 && anchor_p < 1.0) {
        return Err(ModelError::InvalidAnchor);
    }
    let anchor = target_sigmas
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = target_sigmas
        .iter()
        .map(|s| (s / anchor).powi(2) * anchor_p)
        .collect();
    let used: f64 = probs.iter().sum();
    let rest = 1.0 - used;
    if rest < 0.0 {
        return Err(ModelError::InvalidAnchor);
    }
    probs.push(rest);
    Ok(probs)
}

/// Draws the N x n visit matrix: each row is Dirichlet with parameter
/// `concentration * mean_visit_probs`. Contexts with zero mean get exact
/// zeros in every row; rows sum to one.
pub fn synthesize_visit_matrix<R: Rng>(spec: &PopulationSpec, rng: &mut R) -> Vec<Vec<f64>> {
    if let Some(matrix) = &spec.matrix_override {
        return matrix.clone();
    }
    let n = spec.mean_visit_probs.len();
    let active: Vec<usize> = (0..n).filter(|&i| spec.mean_visit_probs[i] > 0.0).collect();
    if active.len() == 1 {
        // Degenerate mean: every agent deterministically visits one context.
        let mut row = vec![0.0; n];
        row[active[0]] = 1.0;
        return vec![row; spec.count];
    }
    // Dirichlet via normalized Gamma draws; rand_distr's Dirichlet wants a
    // compile-time dimension.
    let gammas: Vec<Gamma<f64>> = active
        .iter()
        .map(|&i| {
            Gamma::new(spec.concentration * spec.mean_visit_probs[i], 1.0)
                .expect("validated alpha")
        })
        .collect();
    (0..spec.count)
        .map(|_| {
            let draws: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            let mut row = vec![0.0; n];
            for (slot, value) in active.iter().zip(draws) {
                row[*slot] = value / total;
            }
            row
        })
        .collect()
}

/// Builds the initial population: one matrix row per agent, class-year drawn
/// from the configured fractions, an initial context drawn from the agent's
/// own row, and `initial_drinker_fraction` of agents starting as drinkers
/// with an unassigned drinking duration.
pub fn initialize_population<R: Rng>(
    spec: &PopulationSpec,
    matrix: &[Vec<f64>],
    rng: &mut R,
) -> Vec<Agent> {
    assert_eq!(matrix.len(), spec.count, "matrix must have N rows");
    let mut agents = Vec::with_capacity(spec.count);
    for (id, row) in matrix.iter().enumerate() {
        let class_year = sample_class_year(&spec.class_year_fractions, rng.random::<f64>());
        let state = if rng.random::<f64>() < spec.initial_drinker_fraction {
            DrinkingState::Drinker
        } else {
            DrinkingState::NonDrinker
        };
        let current_context = crate::engine::sample_context(row, rng.random::<f64>());
        agents.push(Agent {
            id,
            class_year,
            visit_probs: row.clone(),
            current_context,
            state,
            drinking_period: DURATION_UNSET,
        });
    }
    agents
}

fn sample_class_year(fractions: &[f64; CLASS_YEARS], u: f64) -> u8 {
    let mut acc = 0.0;
    for (year, f) in fractions.iter().enumerate() {
        acc += f;
        if u <= acc {
            return year as u8;
        }
    }
    (CLASS_YEARS - 1) as u8
}
