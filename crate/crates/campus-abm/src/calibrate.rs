//! Simulated-moments calibration of the composite transmission probability.
//!
//! The transmission composite `beta_tilde = sigma * beta` is assumed common
//! to all transmitting contexts. The single moment is the quasi-stationary
//! drinker prevalence; calibration minimizes the squared gap to the target
//! with a golden-section search over `[0, beta_tilde_max]`. Every objective
//! evaluation reuses the same replicate seed set (common random numbers), so
//! the objective is a deterministic function of `beta_tilde` and the search
//! is reproducible. The fitted composite decomposes into per-context
//! influence successes as `beta_i = beta_tilde / sigma_i`.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::core::ModelError;
use crate::engine;
use crate::Scenario;

const INV_GOLDEN: f64 = 0.618_033_988_749_894_9; // 1/phi

/// Calibration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSpec {
    /// Target quasi-stationary drinker prevalence.
    pub target_prevalence: f64,
    /// Upper end of the search interval `[0, beta_tilde_max]`.
    pub beta_tilde_max: f64,
    pub replicates_per_eval: usize,
    /// Convergence tolerance on the prevalence moment.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl CalibrationSpec {
    pub fn baseline() -> Self {
        CalibrationSpec {
            target_prevalence: 0.20,
            beta_tilde_max: 0.003,
            replicates_per_eval: 200,
            tolerance: 0.005,
            max_iterations: 40,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=1.0).contains(&self.target_prevalence) {
            return Err(ModelError::invalid(
                "calibrate.target_prevalence",
                "must lie in [0, 1]",
            ));
        }
        if self.beta_tilde_max <= 0.0 {
            return Err(ModelError::invalid(
                "calibrate.beta_tilde_max",
                "must be positive",
            ));
        }
        if self.replicates_per_eval == 0 {
            return Err(ModelError::invalid(
                "calibrate.replicates_per_eval",
                "must be at least 1",
            ));
        }
        if self.tolerance <= 0.0 {
            return Err(ModelError::invalid(
                "calibrate.tolerance",
                "must be positive",
            ));
        }
        if self.max_iterations == 0 {
            return Err(ModelError::invalid(
                "calibrate.max_iterations",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Which end of the search interval the optimum collided with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Lower,
    Upper,
}

/// A fitted composite and its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub beta_tilde: f64,
    /// Per-context influence successes `beta_tilde / sigma_i`; zero for
    /// contexts without contact.
    pub betas: Vec<f64>,
    pub achieved_prevalence: f64,
    pub objective: f64,
    /// Objective evaluations spent.
    pub iterations: usize,
    /// Set when the target is unreachable inside the interval.
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "no convergence after {} evaluations: best beta_tilde {:.6} reaches prevalence {:.4}",
        best.iterations, best.beta_tilde, best.achieved_prevalence
    )]
    NotConverged { best: Box<Calibration> },
}

/// Quasi-stationary prevalence at a common composite, evaluated with common
/// random numbers seeded from the scenario's model seed.
pub fn evaluate_prevalence(
    beta_tilde: f64,
    scenario: &Scenario,
    spec: &CalibrationSpec,
) -> Result<f64, ModelError> {
    let mut candidate = scenario.clone();
    candidate.model.set_common_beta_tilde(beta_tilde);
    let summary = engine::run_ensemble(
        &candidate,
        spec.replicates_per_eval,
        scenario.model.seed,
    )?;
    Ok(summary.qs_mean)
}

/// Squared moment gap `(qs_mean(beta_tilde) - target)^2`.
pub fn msm_objective(
    beta_tilde: f64,
    scenario: &Scenario,
    spec: &CalibrationSpec,
) -> Result<f64, ModelError> {
    let prevalence = evaluate_prevalence(beta_tilde, scenario, spec)?;
    Ok((prevalence - spec.target_prevalence).powi(2))
}

fn calibration_at(
    beta_tilde: f64,
    prevalence: f64,
    spec: &CalibrationSpec,
    scenario: &Scenario,
    iterations: usize,
    boundary: Option<Boundary>,
) -> Calibration {
    let betas = scenario
        .model
        .context_sigmas
        .iter()
        .map(|&s| if s > 0.0 { beta_tilde / s } else { 0.0 })
        .collect();
    Calibration {
        beta_tilde,
        betas,
        achieved_prevalence: prevalence,
        objective: (prevalence - spec.target_prevalence).powi(2),
        iterations,
        boundary,
    }
}

/// Fits the composite by golden-section search on the squared moment gap.
///
/// The prevalence is empirically nondecreasing in the composite, so the
/// squared gap is unimodal and the search is noise-tolerant under common
/// random numbers. Returns a boundary-flagged result when the target lies
/// outside the reachable prevalence range, and a convergence error carrying
/// the best iterate when the moment cannot be matched within tolerance in
/// the iteration budget.
pub fn calibrate_beta(
    scenario: &Scenario,
    spec: &CalibrationSpec,
) -> Result<Calibration, CalibrateError> {
    scenario.validate()?;
    spec.validate()?;

    let target = spec.target_prevalence;
    let mut evals = 0usize;
    let evaluate = |evals: &mut usize, bt: f64| -> Result<f64, ModelError> {
        *evals += 1;
        evaluate_prevalence(bt, scenario, spec)
    };

    // Reachability at the interval ends; the moment is monotone in the
    // composite.
    let at_lower = evaluate(&mut evals, 0.0)?;
    if at_lower > target + spec.tolerance {
        return Ok(calibration_at(
            0.0,
            at_lower,
            spec,
            scenario,
            evals,
            Some(Boundary::Lower),
        ));
    }
    if (at_lower - target).abs() <= spec.tolerance {
        return Ok(calibration_at(0.0, at_lower, spec, scenario, evals, None));
    }
    let at_upper = evaluate(&mut evals, spec.beta_tilde_max)?;
    if at_upper < target - spec.tolerance {
        return Ok(calibration_at(
            spec.beta_tilde_max,
            at_upper,
            spec,
            scenario,
            evals,
            Some(Boundary::Upper),
        ));
    }
    if (at_upper - target).abs() <= spec.tolerance {
        return Ok(calibration_at(
            spec.beta_tilde_max,
            at_upper,
            spec,
            scenario,
            evals,
            None,
        ));
    }

    let mut lo = 0.0f64;
    let mut hi = spec.beta_tilde_max;
    let mut x1 = hi - (hi - lo) * INV_GOLDEN;
    let mut x2 = lo + (hi - lo) * INV_GOLDEN;
    let mut p1 = evaluate(&mut evals, x1)?;
    let mut p2 = evaluate(&mut evals, x2)?;
    let mut best = if (p1 - target).abs() <= (p2 - target).abs() {
        (x1, p1)
    } else {
        (x2, p2)
    };

    while evals < spec.max_iterations + 2 {
        if (best.1 - target).abs() <= spec.tolerance {
            return Ok(calibration_at(best.0, best.1, spec, scenario, evals, None));
        }
        if (p1 - target).powi(2) <= (p2 - target).powi(2) {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - (hi - lo) * INV_GOLDEN;
            p1 = evaluate(&mut evals, x1)?;
            if (p1 - target).abs() < (best.1 - target).abs() {
                best = (x1, p1);
            }
        } else {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + (hi - lo) * INV_GOLDEN;
            p2 = evaluate(&mut evals, x2)?;
            if (p2 - target).abs() < (best.1 - target).abs() {
                best = (x2, p2);
            }
        }
    }
    if (best.1 - target).abs() <= spec.tolerance {
        return Ok(calibration_at(best.0, best.1, spec, scenario, evals, None));
    }
    Err(CalibrateError::NotConverged {
        best: Box::new(calibration_at(best.0, best.1, spec, scenario, evals, None)),
    })
}

/// Plain-text key=value report, one line per quantity.
pub fn report_string(calibration: &Calibration, context_names: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "beta_tilde = {:.10}", calibration.beta_tilde);
    for (name, beta) in context_names.iter().zip(&calibration.betas) {
        let _ = writeln!(out, "beta_{} = {:.10}", name, beta);
    }
    let _ = writeln!(
        out,
        "achieved_prevalence = {:.6}",
        calibration.achieved_prevalence
    );
    let _ = writeln!(out, "objective = {:.6e}", calibration.objective);
    let _ = writeln!(out, "iterations = {}", calibration.iterations);
    let _ = writeln!(
        out,
        "boundary = {}",
        match calibration.boundary {
            None => "none",
            Some(Boundary::Lower) => "lower",
            Some(Boundary::Upper) => "upper",
        }
    );
    out
}

pub fn write_report(
    calibration: &Calibration,
    context_names: &[String],
    path: &Path,
) -> std::io::Result<()> {
    std::fs::write(path, report_string(calibration, context_names))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scenario() -> Scenario {
        let mut scenario = Scenario::baseline();
        scenario.model.population = 80;
        scenario.population.count = 80;
        scenario.model.horizon_ticks = 50;
        scenario.model.qs_window = (25, 50);
        scenario
    }

    fn quick_spec() -> CalibrationSpec {
        CalibrationSpec {
            target_prevalence: 0.20,
            beta_tilde_max: 0.003,
            replicates_per_eval: 24,
            tolerance: 0.01,
            max_iterations: 30,
        }
    }

    #[test]
    fn objective_is_nonnegative_and_deterministic() {
        let scenario = small_scenario();
        let spec = quick_spec();
        for bt in [0.0, 0.001, 0.003] {
            let a = msm_objective(bt, &scenario, &spec).unwrap();
            let b = msm_objective(bt, &scenario, &spec).unwrap();
            assert!(a >= 0.0);
            assert_eq!(a, b, "common random numbers make the objective deterministic");
        }
    }

    #[test]
    fn prevalence_is_monotone_in_the_composite() {
        let scenario = small_scenario();
        let spec = quick_spec();
        let low = evaluate_prevalence(0.0, &scenario, &spec).unwrap();
        let mid = evaluate_prevalence(0.0015, &scenario, &spec).unwrap();
        let high = evaluate_prevalence(0.003, &scenario, &spec).unwrap();
        assert!(low <= mid + 0.02, "low {low} mid {mid}");
        assert!(mid <= high + 0.02, "mid {mid} high {high}");
    }

    #[test]
    fn zero_transmission_with_zero_rho_decays() {
        let mut scenario = small_scenario();
        scenario.model.rho = 0.0;
        let spec = quick_spec();
        let prevalence = evaluate_prevalence(0.0, &scenario, &spec).unwrap();
        assert!(prevalence < 0.02, "drinkers decay without any source: {prevalence}");
        let objective = msm_objective(0.0, &scenario, &spec).unwrap();
        assert!((objective - (prevalence - 0.2).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn near_zero_target_with_zero_rho_drives_composite_to_zero() {
        let mut scenario = small_scenario();
        scenario.model.rho = 0.0;
        let mut spec = quick_spec();
        spec.target_prevalence = 0.0;
        spec.tolerance = 0.02;
        let fit = calibrate_beta(&scenario, &spec).unwrap();
        assert!(fit.beta_tilde < 5e-4, "beta_tilde {}", fit.beta_tilde);
    }

    #[test]
    fn unreachable_target_reports_upper_boundary() {
        let scenario = small_scenario();
        let mut spec = quick_spec();
        spec.target_prevalence = 0.95;
        let fit = calibrate_beta(&scenario, &spec).unwrap();
        assert_eq!(fit.boundary, Some(Boundary::Upper));
        assert_eq!(fit.beta_tilde, spec.beta_tilde_max);
        assert!(fit.achieved_prevalence < 0.95);
    }

    #[test]
    fn overshooting_floor_reports_lower_boundary() {
        // With rho high, prevalence at zero transmission already exceeds a
        // tiny target.
        let mut scenario = small_scenario();
        scenario.model.rho = 0.5;
        let mut spec = quick_spec();
        spec.target_prevalence = 0.01;
        spec.tolerance = 0.001;
        let fit = calibrate_beta(&scenario, &spec).unwrap();
        assert_eq!(fit.boundary, Some(Boundary::Lower));
        assert_eq!(fit.beta_tilde, 0.0);
    }

    #[test]
    fn decomposition_identity_holds_to_machine_precision() {
        let scenario = small_scenario();
        let spec = quick_spec();
        let fit = calibrate_beta(&scenario, &spec).unwrap();
        for (i, &sigma) in scenario.model.context_sigmas.iter().enumerate() {
            if sigma > 0.0 {
                assert!((fit.betas[i] * sigma - fit.beta_tilde).abs() <= 1e-18);
            } else {
                assert_eq!(fit.betas[i], 0.0);
            }
        }
    }

    #[test]
    fn repeated_calibration_is_identical() {
        let scenario = small_scenario();
        let spec = quick_spec();
        let a = calibrate_beta(&scenario, &spec).unwrap();
        let b = calibrate_beta(&scenario, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_lists_every_context() {
        let scenario = small_scenario();
        let spec = quick_spec();
        let fit = calibrate_beta(&scenario, &spec).unwrap();
        let report = report_string(&fit, &scenario.population.context_names);
        assert!(report.contains("beta_tilde = "));
        assert!(report.contains("beta_MU = "));
        assert!(report.contains("beta_Others = "));
        assert!(report.contains("achieved_prevalence = "));
        assert!(report.contains("boundary = none"));
    }

    #[test]
    fn rejects_invalid_spec() {
        let scenario = small_scenario();
        let mut spec = quick_spec();
        spec.tolerance = 0.0;
        assert!(calibrate_beta(&scenario, &spec).is_err());
    }
}
