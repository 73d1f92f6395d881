//! Domain types and the closed-form probability kernels used everywhere else.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Hours represented by one tick.
pub const TICK_HOURS: u64 = 2;
/// Ticks per 16-hour day (7am-11pm).
pub const TICKS_PER_DAY: u64 = 8;
/// Ticks per academic year; class-year updates run on this cadence.
pub const TICKS_PER_YEAR: u64 = 1440;
/// Number of class years (Freshman .. Graduate).
pub const CLASS_YEARS: usize = 5;

/// Sentinel for a drinking duration that has not been assigned yet.
pub const DURATION_UNSET: f64 = -1.0;

/// Absolute tolerance for probability comparisons; all quantities are O(1).
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("all visit marginals outside the last context are zero")]
    AllZeroMarginals,
    #[error("visit marginal at index {0} is negative")]
    NegativeMarginal(usize),
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("anchor visit probability leaves a negative remainder for the last context")]
    InvalidAnchor,
}

impl ModelError {
    pub fn invalid(field: &str, reason: &str) -> Self {
        ModelError::InvalidConfig {
            field: field.to_string(),
            reason: reason.to_string(),
        }
    }
}

/// Behavioral state of one agent. Legal transitions are
/// `NonDrinker -> Drinker`, `Drinker -> FormerDrinker` and
/// `FormerDrinker -> Drinker`; non-drinker is re-entered only through
/// class-year replacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DrinkingState {
    NonDrinker,
    Drinker,
    FormerDrinker,
}

impl DrinkingState {
    /// Short code used in output headers and reports.
    pub fn code(self) -> &'static str {
        match self {
            DrinkingState::NonDrinker => "ND",
            DrinkingState::Drinker => "D",
            DrinkingState::FormerDrinker => "FD",
        }
    }
}

/// One student.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    /// 0 = Freshman .. 4 = Graduate.
    pub class_year: u8,
    /// Per-tick probability of visiting each context; sums to one.
    pub visit_probs: Vec<f64>,
    pub current_context: usize,
    pub state: DrinkingState,
    /// Remaining drinking duration in ticks; [`DURATION_UNSET`] until the
    /// first recovery phase after becoming a drinker.
    pub drinking_period: f64,
}

impl Agent {
    pub fn is_drinker(&self) -> bool {
        self.state == DrinkingState::Drinker
    }
}

/// One campus location.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub id: usize,
    /// Probability of contact between two agents visiting this context.
    pub sigma: f64,
    /// Probability that a contact transmits the behavior.
    pub beta: f64,
    /// Number of drinkers present, recomputed after each movement phase.
    pub drinker_count: usize,
}

/// All parameters of a simulation run; the single source of truth together
/// with [`crate::PopulationSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Population size N.
    pub population: usize,
    /// Per-tick reinitiation probability for former drinkers.
    pub rho: f64,
    /// Per-tick recovery rate; mean drinking duration is 1/gamma ticks.
    pub gamma: f64,
    /// Initial class-year fractions, Freshman first.
    pub class_year_fractions: [f64; CLASS_YEARS],
    pub initial_drinker_fraction: f64,
    /// Contact probability per context; the last context carries zero.
    pub context_sigmas: Vec<f64>,
    /// Influence success per context.
    pub context_betas: Vec<f64>,
    pub horizon_ticks: u64,
    /// Inclusive tick window over which the quasi-stationary mean is taken.
    pub qs_window: (u64, u64),
    /// Default base seed; runners take an explicit seed that overrides it.
    pub seed: u64,
}

/// Context labels in model order; the last one never hosts transmission.
pub const CONTEXT_NAMES: [&str; 5] = ["Library", "MU", "SDFC", "Dorm", "Others"];

impl ModelConfig {
    /// Published baseline: N = 538, calibrated influence successes, survey
    /// contact probabilities, rho = gamma = 0.0187 per tick, 5% initial
    /// drinkers, 100-tick horizon with quasi-stationary window [50, 100].
    pub fn baseline() -> Self {
        ModelConfig {
            population: 538,
            rho: 0.0187,
            gamma: 0.0187,
            class_year_fractions: [0.30, 0.25, 0.23, 0.18, 0.04],
            initial_drinker_fraction: 0.05,
            context_sigmas: vec![0.1429, 0.4492, 0.2043, 0.2037, 0.0],
            context_betas: vec![0.0105, 0.0033, 0.0073, 0.0074, 0.0],
            horizon_ticks: 100,
            qs_window: (50, 100),
            seed: 42,
        }
    }

    pub fn context_count(&self) -> usize {
        self.context_sigmas.len()
    }

    /// Composite transmission probability sigma*beta for one context.
    pub fn beta_tilde(&self, context: usize) -> f64 {
        self.context_sigmas[context] * self.context_betas[context]
    }

    /// Overwrites every transmitting context's influence success so that
    /// sigma*beta equals `beta_tilde`; contexts with zero contact
    /// probability keep beta = 0.
    pub fn set_common_beta_tilde(&mut self, beta_tilde: f64) {
        for i in 0..self.context_count() {
            self.context_betas[i] = if self.context_sigmas[i] > 0.0 {
                beta_tilde / self.context_sigmas[i]
            } else {
                0.0
            };
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.population == 0 {
            return Err(ModelError::invalid("population", "must be positive"));
        }
        let n = self.context_count();
        if n < 2 {
            return Err(ModelError::invalid(
                "context_sigmas",
                "need at least two contexts",
            ));
        }
        if self.context_betas.len() != n {
            return Err(ModelError::invalid(
                "context_betas",
                "length must match context_sigmas",
            ));
        }
        for (field, value) in [
            ("rho", self.rho),
            ("gamma", self.gamma),
            ("initial_drinker_fraction", self.initial_drinker_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::invalid(field, "must lie in [0, 1]"));
            }
        }
        if self.gamma == 0.0 {
            return Err(ModelError::invalid("gamma", "must be positive"));
        }
        let sum: f64 = self.class_year_fractions.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(ModelError::invalid(
                "class_year_fractions",
                "must sum to 1",
            ));
        }
        if self.class_year_fractions.iter().any(|&f| f < 0.0) {
            return Err(ModelError::invalid(
                "class_year_fractions",
                "must be non-negative",
            ));
        }
        for i in 0..n {
            let (s, b) = (self.context_sigmas[i], self.context_betas[i]);
            if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&b) {
                return Err(ModelError::invalid(
                    "context_sigmas/context_betas",
                    "entries must lie in [0, 1]",
                ));
            }
        }
        if *self.context_sigmas.last().unwrap() != 0.0 {
            return Err(ModelError::invalid(
                "context_sigmas",
                "the last context must have zero contact probability",
            ));
        }
        let (lo, hi) = self.qs_window;
        if lo > hi || hi > self.horizon_ticks {
            return Err(ModelError::invalid(
                "qs_window",
                "window must satisfy lo <= hi <= horizon_ticks",
            ));
        }
        Ok(())
    }
}

/// Deterministic pseudorandom stream, seeded per replicate. Identical seeds
/// produce identical draw sequences on every platform.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn seeded(seed: u64) -> Self {
        RngStream(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}

/// Contact probabilities from mean visit probabilities.
///
/// With `N_i = N * p_i` agents expected per context, the contact
/// probability is `sqrt(N_i) / sum_j sqrt(N_j)` over the first n-1
/// contexts; N cancels, so only the marginals matter. The last context
/// ("Others") gets zero by construction.
pub fn contact_probabilities(mean_visit_probs: &[f64]) -> Result<Vec<f64>, ModelError> {
    let n = mean_visit_probs.len();
    if n < 2 {
        return Err(ModelError::invalid(
            "mean_visit_probs",
            "need at least two contexts",
        ));
    }
    if let Some(i) = mean_visit_probs.iter().position(|&p| p < 0.0) {
        return Err(ModelError::NegativeMarginal(i));
    }
    let roots: Vec<f64> = mean_visit_probs[..n - 1].iter().map(|p| p.sqrt()).collect();
    let total: f64 = roots.iter().sum();
    if total <= 0.0 {
        return Err(ModelError::AllZeroMarginals);
    }
    let mut sigmas: Vec<f64> = roots.iter().map(|r| r / total).collect();
    sigmas.push(0.0);
    Ok(sigmas)
}

/// Probability that one contact between a drinker and a target with
/// resistancy `phi` transmits the behavior: sigma * beta * (1 - phi).
pub fn per_contact_success(sigma: f64, beta: f64, phi: f64) -> f64 {
    sigma * beta * (1.0 - phi)
}

/// Aggregated conversion probability for a target facing `drinkers`
/// independent contacts with a common resistancy:
/// `1 - (1 - sigma*beta*(1-phi))^drinkers`.
pub fn aggregate_conversion_prob(sigma: f64, beta: f64, phi: f64, drinkers: usize) -> f64 {
    let per_contact = per_contact_success(sigma, beta, phi);
    1.0 - (1.0 - per_contact).powi(drinkers as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn contact_probabilities_match_published_column() {
        // Marginals derived by inverting the contact formula at p_MU = 0.33.
        let p = [0.0334, 0.33, 0.0683, 0.0679, 0.5004];
        let sigma = contact_probabilities(&p).unwrap();
        // Published values are rounded to four decimals.
        let expected = [0.1429, 0.4492, 0.2043, 0.2037, 0.0];
        for (got, want) in sigma.iter().zip(expected) {
            assert!((got - want).abs() < 2e-4, "got {got}, want {want}");
        }
        let head: f64 = sigma[..4].iter().sum();
        assert!((head - 1.0).abs() < PROB_TOL);
    }

    #[test]
    fn contact_probabilities_single_active_context() {
        let sigma = contact_probabilities(&[0.25, 0.0, 0.0, 0.0, 0.75]).unwrap();
        assert_eq!(sigma, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn contact_probabilities_symmetric() {
        let q = 0.17;
        let sigma = contact_probabilities(&[q, q, q, q, 1.0 - 4.0 * q]).unwrap();
        for s in &sigma[..4] {
            assert!((s - 0.25).abs() < PROB_TOL);
        }
        assert_eq!(sigma[4], 0.0);
    }

    #[test]
    fn contact_probabilities_rejects_degenerate_input() {
        assert_eq!(
            contact_probabilities(&[0.0, 0.0, 0.0, 0.0, 1.0]),
            Err(ModelError::AllZeroMarginals)
        );
        assert_eq!(
            contact_probabilities(&[0.1, -0.2, 0.3, 0.4, 0.4]),
            Err(ModelError::NegativeMarginal(1))
        );
    }

    #[test]
    fn per_contact_success_published_row() {
        // MU row, most susceptible target.
        assert!((per_contact_success(0.4492, 0.0033, 0.0) - 0.00148236).abs() < 1e-12);
        // Full resistancy blocks transmission.
        assert_eq!(per_contact_success(0.7, 0.9, 1.0), 0.0);
        // Direct product hand-check.
        assert!((per_contact_success(0.1429, 0.0105, 0.5) - 0.000750225).abs() < 1e-12);
    }

    #[test]
    fn aggregate_conversion_closed_form() {
        assert_eq!(aggregate_conversion_prob(0.4, 0.5, 0.3, 0), 0.0);
        // Certain transmission once sigma*beta*(1-phi) = 1.
        assert_eq!(aggregate_conversion_prob(1.0, 1.0, 0.0, 1), 1.0);
        // Closed-form evaluation frozen from 1 - (1 - 0.00148236)^100.
        let p = aggregate_conversion_prob(0.4492, 0.0033, 0.0, 100);
        assert!((p - 0.137867215861).abs() < 1e-9, "got {p}");
    }

    #[test]
    fn aggregate_conversion_matches_monte_carlo() {
        // Cross-check the closed form by simulating 10^6 Bernoulli exposure
        // batches of 100 contacts each.
        let mut rng = RngStream::seeded(7);
        let per = per_contact_success(0.4492, 0.0033, 0.0);
        let trials = 1_000_000usize;
        let mut hits = 0usize;
        for _ in 0..trials {
            for _ in 0..100 {
                if rng.random::<f64>() < per {
                    hits += 1;
                    break;
                }
            }
        }
        let estimate = hits as f64 / trials as f64;
        let expect = aggregate_conversion_prob(0.4492, 0.0033, 0.0, 100);
        assert!((estimate - expect).abs() < 0.002, "mc {estimate} vs closed {expect}");
    }

    #[test]
    fn aggregate_equals_per_contact_at_one_drinker() {
        for &(s, b, phi) in &[(0.4492, 0.0033, 0.0), (0.1, 0.9, 0.25), (0.9, 0.2, 0.99)] {
            let lhs = aggregate_conversion_prob(s, b, phi, 1);
            let rhs = per_contact_success(s, b, phi);
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn baseline_config_is_valid() {
        let config = ModelConfig::baseline();
        config.validate().unwrap();
        // All four transmitting contexts share beta_tilde ~ 0.0015.
        for i in 0..4 {
            let bt = config.beta_tilde(i);
            assert!((bt - 0.0015).abs() < 1e-4, "context {i}: {bt}");
        }
    }

    #[test]
    fn set_common_beta_tilde_decomposes_exactly() {
        let mut config = ModelConfig::baseline();
        config.set_common_beta_tilde(0.00123);
        for i in 0..4 {
            assert!((config.beta_tilde(i) - 0.00123).abs() < 1e-18);
        }
        assert_eq!(config.context_betas[4], 0.0);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut config = ModelConfig::baseline();
        config.rho = 1.5;
        assert!(config.validate().is_err());

        let mut config = ModelConfig::baseline();
        config.qs_window = (80, 200);
        assert!(config.validate().is_err());

        let mut config = ModelConfig::baseline();
        config.class_year_fractions = [0.3, 0.3, 0.3, 0.3, 0.3];
        assert!(config.validate().is_err());

        let mut config = ModelConfig::baseline();
        config.context_sigmas[4] = 0.1;
        assert!(config.validate().is_err());
    }

    #[test]
    fn rng_stream_is_deterministic() {
        let mut a = RngStream::seeded(99);
        let mut b = RngStream::seeded(99);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = RngStream::seeded(100);
        assert_ne!(RngStream::seeded(99).next_u64(), c.next_u64());
    }

    proptest! {
        /// First n-1 contact probabilities always sum to one.
        #[test]
        fn contact_probabilities_sum_to_one(
            raw in proptest::collection::vec(0.0f64..1.0, 2..8),
            active in 0usize..7,
        ) {
            let mut p = raw;
            let idx = active % (p.len() - 1);
            p[idx] = p[idx].max(1e-6); // keep at least one active context
            let sigma = contact_probabilities(&p).unwrap();
            let head: f64 = sigma[..sigma.len() - 1].iter().sum();
            prop_assert!((head - 1.0).abs() < PROB_TOL);
            prop_assert_eq!(*sigma.last().unwrap(), 0.0);
        }

        /// Scaling every marginal by c > 0 leaves the output unchanged.
        #[test]
        fn contact_probabilities_scale_invariant(
            raw in proptest::collection::vec(1e-6f64..1.0, 3..8),
            scale in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = raw.iter().map(|p| p * scale).collect();
            let a = contact_probabilities(&raw).unwrap();
            let b = contact_probabilities(&scaled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < PROB_TOL);
            }
        }

        /// Aggregate conversion probability is monotone in sigma, beta and
        /// drinker count, and antitone in phi.
        #[test]
        fn aggregate_conversion_monotone(
            s in 0.0f64..1.0, b in 0.0f64..1.0, phi in 0.0f64..1.0,
            drinkers in 0usize..200,
        ) {
            let base = aggregate_conversion_prob(s, b, phi, drinkers);
            prop_assert!(aggregate_conversion_prob((s * 1.1).min(1.0), b, phi, drinkers) >= base - 1e-12);
            prop_assert!(aggregate_conversion_prob(s, (b * 1.1).min(1.0), phi, drinkers) >= base - 1e-12);
            prop_assert!(aggregate_conversion_prob(s, b, phi, drinkers + 1) >= base - 1e-12);
            prop_assert!(aggregate_conversion_prob(s, b, (phi * 1.1).min(1.0), drinkers) <= base + 1e-12);
        }
    }
}
