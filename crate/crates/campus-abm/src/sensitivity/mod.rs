//! Sensitivity analysis over the four context transmission composites:
//! local one-at-a-time sweeps, Latin hypercube sampling with PCC/SRC
//! regression indices, and Sobol first/total-order indices, all with
//! bootstrap confidence intervals.
//!
//! The parameter of interest is `beta_tilde_C = sigma_C * beta_C` per
//! transmitting context, in Table-6 order (Dorm, Library, MU, SDFC); the
//! quantity of interest is the mean drinker fraction over the
//! quasi-stationary window. Design rows are evaluated independently with
//! fixed per-row seeds, so results do not depend on the evaluation schedule.

mod bootstrap;
mod lhs;
mod regression;
mod sobol;

pub use bootstrap::bootstrap_ci;
pub use lhs::lhs_sample;
pub use regression::{pcc, src};
pub use sobol::{sobol_design, sobol_indices, SobolDesign};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::core::{ModelConfig, ModelError, RngStream};
use crate::engine;
use crate::Scenario;

/// SA dimension order (Dorm, Library, MU, SDFC) mapped to model context
/// indices.
pub const TRANSMISSION_DIMENSIONS: [(&str, usize); 4] =
    [("Dorm", 3), ("Library", 0), ("MU", 1), ("SDFC", 2)];

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("degenerate response: zero variance in the QOI evaluations")]
    DegenerateResponse,
    #[error("need more than {needed} samples for {what}, got {got}")]
    TooFewSamples {
        what: &'static str,
        needed: usize,
        got: usize,
    },
}

/// A box-bounded parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    pub names: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
}

impl ParameterSpace {
    pub fn new(names: Vec<String>, bounds: Vec<(f64, f64)>) -> Self {
        ParameterSpace { names, bounds }
    }

    /// The default space over the four transmission composites, each in
    /// `[0, factor * beta_tilde_baseline]` (factor 2 unless overridden).
    pub fn transmission(model: &ModelConfig, factor: f64) -> Self {
        let names = TRANSMISSION_DIMENSIONS
            .iter()
            .map(|(name, _)| format!("beta_tilde_{name}"))
            .collect();
        let bounds = TRANSMISSION_DIMENSIONS
            .iter()
            .map(|&(_, ctx)| (0.0, factor * model.beta_tilde(ctx)))
            .collect();
        ParameterSpace { names, bounds }
    }

    pub fn dimensions(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.names.len() != self.bounds.len() {
            return Err(ModelError::invalid(
                "sa.bounds",
                "one bound pair per parameter name",
            ));
        }
        for (name, &(lo, hi)) in self.names.iter().zip(&self.bounds) {
            if !(lo < hi) {
                return Err(ModelError::invalid(
                    name,
                    "lower bound must be below upper bound",
                ));
            }
        }
        Ok(())
    }

    /// Baseline point: the scenario's current composites in SA order.
    pub fn baseline_point(model: &ModelConfig) -> Vec<f64> {
        TRANSMISSION_DIMENSIONS
            .iter()
            .map(|&(_, ctx)| model.beta_tilde(ctx))
            .collect()
    }
}

/// Applies an SA point to a scenario: each transmission composite is
/// decomposed back into a per-context influence success.
pub fn apply_point(scenario: &Scenario, point: &[f64]) -> Scenario {
    let mut out = scenario.clone();
    for (dim, &(_, ctx)) in TRANSMISSION_DIMENSIONS.iter().enumerate() {
        let sigma = out.model.context_sigmas[ctx];
        out.model.context_betas[ctx] = if sigma > 0.0 { point[dim] / sigma } else { 0.0 };
    }
    out
}

/// The QOI: mean drinker fraction over the quasi-stationary window,
/// averaged over `replicates` replicates seeded `seed .. seed+replicates`.
pub fn evaluate_qoi(
    point: &[f64],
    scenario: &Scenario,
    replicates: usize,
    seed: u64,
) -> Result<f64, ModelError> {
    let candidate = apply_point(scenario, point);
    let summary = engine::run_ensemble(&candidate, replicates, seed)?;
    Ok(summary.qs_mean)
}

/// One grid point of a local sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub beta_tilde: f64,
    pub qoi_mean: f64,
    pub ci: (f64, f64),
}

/// One-at-a-time sweep: varies one composite over a uniform grid in its
/// bounds while the others stay at the scenario baseline. Every grid point
/// reuses the same replicate seed set (common random numbers), and the 95%
/// interval is the normal approximation across replicates. A single-point
/// grid degenerates to the baseline point.
pub fn oat_sweep(
    space: &ParameterSpace,
    dimension: usize,
    grid_points: usize,
    scenario: &Scenario,
    replicates: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>, SensitivityError> {
    space.validate()?;
    scenario.validate()?;
    if dimension >= space.dimensions() {
        return Err(SensitivityError::Model(ModelError::invalid(
            "dimension",
            "outside the parameter space",
        )));
    }
    if grid_points == 0 || replicates == 0 {
        return Err(SensitivityError::Model(ModelError::invalid(
            "sa.oat_grid_points/replicates",
            "must be at least 1",
        )));
    }
    let baseline = ParameterSpace::baseline_point(&scenario.model);
    let (lo, hi) = space.bounds[dimension];
    let grid: Vec<f64> = if grid_points == 1 {
        vec![baseline[dimension]]
    } else {
        (0..grid_points)
            .map(|g| lo + (hi - lo) * g as f64 / (grid_points - 1) as f64)
            .collect()
    };

    let mut curve = Vec::with_capacity(grid.len());
    for x in grid {
        let mut point = baseline.clone();
        point[dimension] = x;
        let candidate = apply_point(scenario, &point);
        let series = engine::run_ensemble_series(&candidate, replicates, seed)?;
        let qs: Vec<f64> = series
            .iter()
            .map(|ts| ts.qs_mean(candidate.model.qs_window))
            .collect();
        let mean = qs.iter().sum::<f64>() / qs.len() as f64;
        let sd = if qs.len() > 1 {
            (qs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (qs.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * sd / (qs.len() as f64).sqrt();
        curve.push(SweepPoint {
            beta_tilde: x,
            qoi_mean: mean,
            ci: (mean - half, mean + half),
        });
    }
    Ok(curve)
}

/// Evaluates each design row with its own fixed seed
/// (`seed + 1 + row*replicates`), in parallel.
pub fn evaluate_design(
    design: &[Vec<f64>],
    scenario: &Scenario,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>, ModelError> {
    design
        .par_iter()
        .enumerate()
        .map(|(row, point)| {
            evaluate_qoi(point, scenario, replicates, seed + 1 + (row * replicates) as u64)
        })
        .collect()
}

/// One estimated index with its 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEstimate {
    pub parameter: String,
    pub method: &'static str,
    pub estimate: f64,
    pub ci: (f64, f64),
}

impl IndexEstimate {
    /// Percentile intervals from a finite bootstrap can miss the plug-in
    /// estimate by a hair; widen so the interval always contains it.
    fn containing(parameter: &str, method: &'static str, estimate: f64, ci: (f64, f64)) -> Self {
        IndexEstimate {
            parameter: parameter.to_string(),
            method,
            estimate,
            ci: (ci.0.min(estimate), ci.1.max(estimate)),
        }
    }
}

/// A sampled design, its QOI vector and the index estimates computed from
/// them, ready for serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub parameter_names: Vec<String>,
    /// Every evaluated parameter point (for Sobol: A, B, then the k
    /// column-swapped blocks, in that order).
    pub design: Vec<Vec<f64>>,
    pub qoi: Vec<f64>,
    pub indices: Vec<IndexEstimate>,
    pub method: &'static str,
    pub replicates_per_sample: usize,
    pub seed: u64,
}

/// LHS design + PCC/SRC indices with percentile-bootstrap intervals.
pub fn run_regression_analysis(
    scenario: &Scenario,
    space: &ParameterSpace,
    samples: usize,
    replicates_per_sample: usize,
    bootstrap_resamples: usize,
    seed: u64,
) -> Result<SensitivityResult, SensitivityError> {
    space.validate()?;
    let k = space.dimensions();
    if samples <= k + 2 {
        return Err(SensitivityError::TooFewSamples {
            what: "regression indices",
            needed: k + 2,
            got: samples,
        });
    }
    let mut rng = RngStream::seeded(seed);
    let design = lhs_sample(space, samples, &mut rng);
    let qoi = evaluate_design(&design, scenario, replicates_per_sample, seed)?;

    let pcc_estimates = pcc(&design, &qoi)?;
    let src_estimates = src(&design, &qoi)?;

    // Joint bootstrap over rows: resample (row, qoi) pairs and recompute
    // both index families from each resample.
    let mut pcc_boot: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap_resamples); k];
    let mut src_boot: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap_resamples); k];
    for _ in 0..bootstrap_resamples {
        let idx: Vec<usize> = (0..samples).map(|_| rng.random_range(0..samples)).collect();
        let d: Vec<Vec<f64>> = idx.iter().map(|&i| design[i].clone()).collect();
        let y: Vec<f64> = idx.iter().map(|&i| qoi[i]).collect();
        // A bootstrap resample of a real-valued LHS design is collinear
        // only with vanishing probability; surface it if it happens.
        let p = pcc(&d, &y)?;
        let s = src(&d, &y)?;
        for j in 0..k {
            pcc_boot[j].push(p[j]);
            src_boot[j].push(s[j]);
        }
    }

    let mut indices = Vec::with_capacity(2 * k);
    for j in 0..k {
        indices.push(IndexEstimate::containing(
            &space.names[j],
            "pcc",
            pcc_estimates[j],
            bootstrap::percentile_interval(&pcc_boot[j], 0.95),
        ));
    }
    for j in 0..k {
        indices.push(IndexEstimate::containing(
            &space.names[j],
            "src",
            src_estimates[j],
            bootstrap::percentile_interval(&src_boot[j], 0.95),
        ));
    }

    Ok(SensitivityResult {
        parameter_names: space.names.clone(),
        design,
        qoi,
        indices,
        method: "lhs-regression",
        replicates_per_sample,
        seed,
    })
}

/// Sobol design + Jansen first/total-order indices with
/// percentile-bootstrap intervals over design rows.
pub fn run_sobol_analysis(
    scenario: &Scenario,
    space: &ParameterSpace,
    samples: usize,
    replicates_per_sample: usize,
    bootstrap_resamples: usize,
    seed: u64,
) -> Result<SensitivityResult, SensitivityError> {
    space.validate()?;
    let k = space.dimensions();
    if samples < 2 {
        return Err(SensitivityError::TooFewSamples {
            what: "sobol indices",
            needed: 2,
            got: samples,
        });
    }
    let mut rng = RngStream::seeded(seed);
    let design = sobol_design(space, samples, &mut rng);
    let stacked = design.stacked();
    let evals = evaluate_design(&stacked, scenario, replicates_per_sample, seed)?;
    let (f_a, f_b, f_ab) = design.split_evaluations(&evals);

    let point = sobol_indices(&f_a, &f_b, &f_ab)?;

    // Bootstrap: resample rows jointly across A, B and the swapped blocks.
    let mut main_boot: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap_resamples); k];
    let mut total_boot: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap_resamples); k];
    for _ in 0..bootstrap_resamples {
        let idx: Vec<usize> = (0..samples).map(|_| rng.random_range(0..samples)).collect();
        let ra: Vec<f64> = idx.iter().map(|&i| f_a[i]).collect();
        let rb: Vec<f64> = idx.iter().map(|&i| f_b[i]).collect();
        let rab: Vec<Vec<f64>> = f_ab
            .iter()
            .map(|col| idx.iter().map(|&i| col[i]).collect())
            .collect();
        match sobol_indices(&ra, &rb, &rab) {
            Ok(resampled) => {
                for j in 0..k {
                    main_boot[j].push(resampled[j].0);
                    total_boot[j].push(resampled[j].1);
                }
            }
            // A zero-variance resample carries no information; skip it.
            Err(SensitivityError::DegenerateResponse) => continue,
            Err(e) => return Err(e),
        }
    }

    let mut indices = Vec::with_capacity(2 * k);
    for j in 0..k {
        indices.push(IndexEstimate::containing(
            &space.names[j],
            "sobol_main",
            point[j].0,
            bootstrap::percentile_interval(&main_boot[j], 0.95),
        ));
    }
    for j in 0..k {
        indices.push(IndexEstimate::containing(
            &space.names[j],
            "sobol_total",
            point[j].1,
            bootstrap::percentile_interval(&total_boot[j], 0.95),
        ));
    }

    Ok(SensitivityResult {
        parameter_names: space.names.clone(),
        design: stacked,
        qoi: evals,
        indices,
        method: "sobol",
        replicates_per_sample,
        seed,
    })
}
