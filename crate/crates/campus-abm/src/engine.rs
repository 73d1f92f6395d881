//! The tick loop: movement, transmission, recovery, reinitiation and
//! class-year phases, plus the seeded replicate and ensemble runners.
//!
//! A tick is two hours; phases run in a fixed order and each phase processes
//! agents in a fresh random order. Within one tick the set of transmitting
//! drinkers is frozen at tick start, and agents converted during the tick
//! (the newly-converted set) are skipped by the remaining phases.

use rand::prelude::*;
use rand_distr::Exp;
use rayon::prelude::*;

use crate::core::{
    Agent, Context, DrinkingState, ModelConfig, ModelError, RngStream, DURATION_UNSET,
    TICKS_PER_YEAR,
};
use crate::popsynth;
use crate::Scenario;

/// Full simulation state for one replicate.
#[derive(Debug, Clone)]
pub struct SimState {
    pub tick: u64,
    pub agents: Vec<Agent>,
    pub contexts: Vec<Context>,
    /// Agents converted during the current tick; cleared by [`step`].
    pub newly_converted: Vec<bool>,
}

impl SimState {
    pub fn new(agents: Vec<Agent>, config: &ModelConfig) -> Self {
        let n = agents.len();
        let mut contexts: Vec<Context> = (0..config.context_count())
            .map(|id| Context {
                id,
                sigma: config.context_sigmas[id],
                beta: config.context_betas[id],
                drinker_count: 0,
            })
            .collect();
        for agent in &agents {
            if agent.is_drinker() {
                contexts[agent.current_context].drinker_count += 1;
            }
        }
        SimState {
            tick: 0,
            agents,
            contexts,
            newly_converted: vec![false; n],
        }
    }

    pub fn population(&self) -> usize {
        self.agents.len()
    }

    /// (non-drinkers, drinkers, former drinkers)
    pub fn state_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for agent in &self.agents {
            match agent.state {
                DrinkingState::NonDrinker => counts.0 += 1,
                DrinkingState::Drinker => counts.1 += 1,
                DrinkingState::FormerDrinker => counts.2 += 1,
            }
        }
        counts
    }

    fn refresh_drinker_counts(&mut self) {
        for context in &mut self.contexts {
            context.drinker_count = 0;
        }
        for agent in &self.agents {
            if agent.is_drinker() {
                self.contexts[agent.current_context].drinker_count += 1;
            }
        }
    }

    fn shuffled_ids<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.agents.len()).collect();
        ids.shuffle(rng);
        ids
    }
}

/// Inverts the cumulative visit distribution: returns the smallest index m
/// with `sum(visit_probs[..=m]) >= u` (upper bound inclusive).
pub fn sample_context(visit_probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in visit_probs.iter().enumerate() {
        acc += p;
        if u <= acc {
            return i;
        }
    }
    visit_probs.len() - 1
}

/// Every agent draws a context from its own visit distribution; per-context
/// drinker counts are recomputed afterwards.
pub fn movement_phase<R: Rng>(state: &mut SimState, rng: &mut R) {
    for id in state.shuffled_ids(rng) {
        let u = rng.random::<f64>();
        let agent = &mut state.agents[id];
        agent.current_context = sample_context(&agent.visit_probs, u);
    }
    state.refresh_drinker_counts();
}

/// Pairwise transmission: every drinker (frozen at tick start, random
/// order) challenges each co-located non-drinker or former drinker not yet
/// converted this tick. A pair transmits when `u1 <= sigma*beta*u2` with
/// fresh uniforms per pair, i.e. with a fresh resistancy complement, so the
/// marginal pair success is sigma*beta/2. Converted targets do not transmit
/// until the next tick.
pub fn transmission_phase<R: Rng>(state: &mut SimState, rng: &mut R) {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); state.contexts.len()];
    for agent in &state.agents {
        members[agent.current_context].push(agent.id);
    }
    let mut drinkers: Vec<usize> = state
        .agents
        .iter()
        .filter(|a| a.is_drinker())
        .map(|a| a.id)
        .collect();
    drinkers.shuffle(rng);

    for drinker in drinkers {
        let context = state.agents[drinker].current_context;
        let success = state.contexts[context].sigma * state.contexts[context].beta;
        if success == 0.0 {
            continue;
        }
        for &target in &members[context] {
            if target == drinker
                || state.newly_converted[target]
                || state.agents[target].state == DrinkingState::Drinker
            {
                continue;
            }
            let u1 = rng.random::<f64>();
            let u2 = rng.random::<f64>();
            if u1 <= success * u2 {
                let agent = &mut state.agents[target];
                agent.state = DrinkingState::Drinker;
                agent.drinking_period = DURATION_UNSET;
                state.newly_converted[target] = true;
            }
        }
    }
}

/// Drinking-period bookkeeping for agents that were drinkers at tick start:
/// unassigned periods get `max(1 tick, Exp(gamma))`, running periods count
/// down one tick, and expired drinkers become former drinkers.
pub fn recovery_phase<R: Rng>(state: &mut SimState, gamma: f64, rng: &mut R) {
    let duration = Exp::new(gamma).expect("gamma validated positive");
    for id in state.shuffled_ids(rng) {
        if state.newly_converted[id] || !state.agents[id].is_drinker() {
            continue;
        }
        let agent = &mut state.agents[id];
        if agent.drinking_period == DURATION_UNSET {
            agent.drinking_period = duration.sample(rng).max(1.0);
        } else if agent.drinking_period > 0.0 {
            agent.drinking_period = (agent.drinking_period - 1.0).max(0.0);
        } else {
            agent.state = DrinkingState::FormerDrinker;
            agent.drinking_period = DURATION_UNSET;
        }
    }
}

/// Former drinkers not converted this tick relapse with probability `rho`,
/// independent of their environment.
pub fn reinitiation_phase<R: Rng>(state: &mut SimState, rho: f64, rng: &mut R) {
    for id in state.shuffled_ids(rng) {
        if state.newly_converted[id]
            || state.agents[id].state != DrinkingState::FormerDrinker
        {
            continue;
        }
        if rng.random::<f64>() < rho {
            let agent = &mut state.agents[id];
            agent.state = DrinkingState::Drinker;
            agent.drinking_period = DURATION_UNSET;
            state.newly_converted[id] = true;
        }
    }
}

/// End-of-year promotion: every class year advances; graduates are replaced
/// in place by non-drinking freshmen that keep the same visit row and id,
/// so the population size is conserved.
pub fn class_year_phase(state: &mut SimState) {
    for agent in &mut state.agents {
        agent.class_year += 1;
        if agent.class_year as usize == crate::core::CLASS_YEARS {
            agent.class_year = 0;
            agent.state = DrinkingState::NonDrinker;
            agent.drinking_period = DURATION_UNSET;
        }
    }
}

/// One tick: clear the newly-converted set, then movement, transmission,
/// recovery and reinitiation in that order; the class-year phase runs when
/// the current tick is a positive multiple of [`TICKS_PER_YEAR`]. The tick
/// counter increments last.
pub fn step<R: Rng>(state: &mut SimState, config: &ModelConfig, rng: &mut R) {
    state.newly_converted.iter_mut().for_each(|f| *f = false);
    movement_phase(state, rng);
    transmission_phase(state, rng);
    recovery_phase(state, config.gamma, rng);
    reinitiation_phase(state, config.rho, rng);
    if state.tick > 0 && state.tick % TICKS_PER_YEAR == 0 {
        class_year_phase(state);
    }
    state.tick += 1;
}

/// Per-tick snapshot of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub n_nd: usize,
    pub n_d: usize,
    pub n_fd: usize,
    /// Drinkers per context at record time.
    pub context_drinkers: Vec<usize>,
}

/// State counts for every tick of one replicate, tick 0 included.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub population: usize,
    pub records: Vec<TickRecord>,
}

impl TimeSeries {
    fn record(state: &SimState) -> TickRecord {
        let (n_nd, n_d, n_fd) = state.state_counts();
        let mut context_drinkers = vec![0usize; state.contexts.len()];
        for agent in &state.agents {
            if agent.is_drinker() {
                context_drinkers[agent.current_context] += 1;
            }
        }
        TickRecord {
            tick: state.tick,
            n_nd,
            n_d,
            n_fd,
            context_drinkers,
        }
    }

    pub fn drinker_fraction(&self, record: &TickRecord) -> f64 {
        record.n_d as f64 / self.population as f64
    }

    /// Mean drinker fraction over the inclusive tick window.
    pub fn qs_mean(&self, window: (u64, u64)) -> f64 {
        let (lo, hi) = window;
        let mut sum = 0.0;
        let mut count = 0usize;
        for record in &self.records {
            if record.tick >= lo && record.tick <= hi {
                sum += self.drinker_fraction(record);
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

/// Runs one replicate: synthesizes the population, then iterates the tick
/// loop for the configured horizon. Fully deterministic given
/// `(scenario, seed)`.
pub fn run_replicate(scenario: &Scenario, seed: u64) -> Result<TimeSeries, ModelError> {
    scenario.validate()?;
    let mut rng = RngStream::seeded(seed);
    let matrix = popsynth::synthesize_visit_matrix(&scenario.population, &mut rng);
    let agents = popsynth::initialize_population(&scenario.population, &matrix, &mut rng);
    let mut state = SimState::new(agents, &scenario.model);

    let mut series = TimeSeries {
        population: state.population(),
        records: Vec::with_capacity(scenario.model.horizon_ticks as usize + 1),
    };
    series.records.push(TimeSeries::record(&state));
    for _ in 0..scenario.model.horizon_ticks {
        step(&mut state, &scenario.model, &mut rng);
        series.records.push(TimeSeries::record(&state));
    }
    Ok(series)
}

/// Cross-replicate aggregate: per-tick mean and standard deviation of each
/// state fraction, and the quasi-stationary prevalence with its normal 95%
/// confidence interval across replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub replicates: usize,
    pub population: usize,
    pub ticks: Vec<u64>,
    /// Per tick: mean [non-drinker, drinker, former-drinker] fractions.
    pub mean: Vec<[f64; 3]>,
    pub sd: Vec<[f64; 3]>,
    pub qs_mean: f64,
    pub qs_sd: f64,
    pub qs_ci: (f64, f64),
}

/// Aggregates replicate series; order-independent, so any parallel schedule
/// that produced `series` yields the same summary.
pub fn summarize(series: &[TimeSeries], qs_window: (u64, u64)) -> EnsembleSummary {
    assert!(!series.is_empty(), "need at least one replicate");
    let replicates = series.len();
    let population = series[0].population;
    let ticks: Vec<u64> = series[0].records.iter().map(|r| r.tick).collect();
    let n = population as f64;

    let mut mean = vec![[0.0f64; 3]; ticks.len()];
    let mut sd = vec![[0.0f64; 3]; ticks.len()];
    for (t, _) in ticks.iter().enumerate() {
        for s in 0..3 {
            let values: Vec<f64> = series
                .iter()
                .map(|ts| {
                    let r = &ts.records[t];
                    [r.n_nd, r.n_d, r.n_fd][s] as f64 / n
                })
                .collect();
            let m = values.iter().sum::<f64>() / replicates as f64;
            let var = if replicates > 1 {
                values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (replicates - 1) as f64
            } else {
                0.0
            };
            mean[t][s] = m;
            sd[t][s] = var.sqrt();
        }
    }

    let qs: Vec<f64> = series.iter().map(|ts| ts.qs_mean(qs_window)).collect();
    let qs_mean = qs.iter().sum::<f64>() / replicates as f64;
    let qs_var = if replicates > 1 {
        qs.iter().map(|v| (v - qs_mean).powi(2)).sum::<f64>() / (replicates - 1) as f64
    } else {
        0.0
    };
    let qs_sd = qs_var.sqrt();
    let half = 1.96 * qs_sd / (replicates as f64).sqrt();

    EnsembleSummary {
        replicates,
        population,
        ticks,
        mean,
        sd,
        qs_mean,
        qs_sd,
        qs_ci: (qs_mean - half, qs_mean + half),
    }
}

/// Runs `replicates` independent replicates in parallel with seeds
/// `base_seed + i`.
pub fn run_ensemble_series(
    scenario: &Scenario,
    replicates: usize,
    base_seed: u64,
) -> Result<Vec<TimeSeries>, ModelError> {
    scenario.validate()?;
    (0..replicates)
        .into_par_iter()
        .map(|i| run_replicate(scenario, base_seed + i as u64))
        .collect()
}

pub fn run_ensemble(
    scenario: &Scenario,
    replicates: usize,
    base_seed: u64,
) -> Result<EnsembleSummary, ModelError> {
    if replicates == 0 {
        return Err(ModelError::invalid("replicates", "must be at least 1"));
    }
    let series = run_ensemble_series(scenario, replicates, base_seed)?;
    Ok(summarize(&series, scenario.model.qs_window))
}
