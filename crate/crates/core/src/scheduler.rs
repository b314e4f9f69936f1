//! Temporal update schemes and the per-run event loop.
//!
//! Exactly one link is active at a time, for a fixed duration `tau`. With
//! replacement, every event picks a link uniformly at random. Without
//! replacement, links are consumed in the order of a random permutation
//! that is redrawn after each full round.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::census::{TriadCensus, DEFAULT_EPSILON};
use crate::dynamics::{
    evolve_link_closed_form, evolve_link_numeric, evolve_self_loop, local_field, ModelSpec, ModelVariant,
    WeightState, DEFAULT_TOL,
};
use crate::error::{Error, Result};

/// Events between slow consistency checks in debug builds.
const SHADOW_CHECK_EVERY: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    WithReplacement,
    WithoutReplacement,
}

impl SchedulerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerKind::WithReplacement => "with_replacement",
            SchedulerKind::WithoutReplacement => "without_replacement",
        }
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "with_replacement" => Ok(SchedulerKind::WithReplacement),
            "without_replacement" => Ok(SchedulerKind::WithoutReplacement),
            other => Err(format!(
                "unknown scheduler `{other}` (expected with_replacement or without_replacement)"
            )),
        }
    }
}

/// Update scheme plus the activation duration of each event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scheduler {
    pub kind: SchedulerKind,
    pub tau: f64,
}

impl Scheduler {
    pub fn new(kind: SchedulerKind, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::config(format!("tau must be positive, got {tau}")));
        }
        Ok(Scheduler { kind, tau })
    }
}

/// The activatable links: every `i < j`, followed by the self-pairs
/// `(i, i)` for the self-loop variant.
pub fn link_set(n: usize, variant: ModelVariant) -> Vec<(u32, u32)> {
    let mut links = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n as u32 {
        for j in i + 1..n as u32 {
            links.push((i, j));
        }
    }
    if variant == ModelVariant::SelfLoops {
        links.extend((0..n as u32).map(|i| (i, i)));
    }
    links
}

/// Per-run knobs that are not part of the model or the scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunParams {
    pub epsilon: f64,
    pub t_max: f64,
    pub sample_interval: f64,
    pub tol: f64,
    pub keep_final_state: bool,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams {
            epsilon: DEFAULT_EPSILON,
            t_max: 2e6,
            sample_interval: 10.0,
            tol: DEFAULT_TOL,
            keep_final_state: false,
        }
    }
}

/// Mutable state of one run.
#[derive(Clone, Debug)]
pub struct RunState {
    spec: ModelSpec,
    scheduler: Scheduler,
    weights: WeightState,
    census: TriadCensus,
    event_count: u64,
    links: Vec<(u32, u32)>,
    order: Vec<u32>,
    cursor: usize,
    rounds: u64,
    diag_below_eps: usize,
    epsilon: f64,
    tol: f64,
    rng: ChaCha8Rng,
}

impl RunState {
    pub fn new(
        initial: WeightState,
        spec: ModelSpec,
        scheduler: Scheduler,
        epsilon: f64,
        tol: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if initial.n() != spec.n {
            return Err(Error::config(format!(
                "state has n = {}, model has n = {}",
                initial.n(),
                spec.n
            )));
        }
        if initial.has_diagonal() != spec.variant.has_diagonal() {
            return Err(Error::config("diagonal presence must match the model variant"));
        }
        let r = spec.r_bound;
        if initial.max_abs() > r {
            return Err(Error::StateCorruption {
                value: initial.max_abs(),
                bound: r,
            });
        }
        if !(epsilon > 0.0) {
            return Err(Error::config("epsilon must be positive"));
        }
        let census = TriadCensus::build(&initial, epsilon);
        let links = link_set(spec.n, spec.variant);
        let order = match scheduler.kind {
            SchedulerKind::WithReplacement => Vec::new(),
            SchedulerKind::WithoutReplacement => (0..links.len() as u32).collect(),
        };
        let cursor = order.len();
        let diag_below_eps = initial
            .diagonal()
            .map_or(0, |d| d.iter().filter(|&&x| x < epsilon).count());
        Ok(RunState {
            spec,
            scheduler,
            weights: initial,
            census,
            event_count: 0,
            links,
            order,
            cursor,
            rounds: 0,
            diag_below_eps,
            epsilon,
            tol,
            rng,
        })
    }

    /// `event_count * tau`, computed as a product.
    #[inline]
    pub fn clock(&self) -> f64 {
        self.event_count as f64 * self.scheduler.tau
    }

    pub fn event_count(&self) -> u64 {
        self.event_count
    }

    pub fn weights(&self) -> &WeightState {
        &self.weights
    }

    pub fn census(&self) -> &TriadCensus {
        &self.census
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    /// Size of the activatable link set (`M`, or `M'` with self-pairs).
    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Completed permutation draws (without replacement only).
    pub fn rounds_drawn(&self) -> u64 {
        self.rounds
    }

    /// Position within the current permutation round.
    pub fn permutation_cursor(&self) -> usize {
        self.cursor
    }

    pub fn into_weights(self) -> WeightState {
        self.weights
    }

    /// Picks the next active link. Self-pairs come back as `(i, i)`.
    pub fn next_pair(&mut self) -> (usize, usize) {
        let idx = match self.scheduler.kind {
            SchedulerKind::WithReplacement => self.rng.random_range(0..self.links.len()),
            SchedulerKind::WithoutReplacement => {
                if self.cursor == self.order.len() {
                    self.order.shuffle(&mut self.rng);
                    self.cursor = 0;
                    self.rounds += 1;
                }
                let idx = self.order[self.cursor] as usize;
                self.cursor += 1;
                idx
            }
        };
        let (i, j) = self.links[idx];
        (i as usize, j as usize)
    }

    /// Evolves the weight of `pair` for one activation and updates the census.
    pub fn apply_event(&mut self, pair: (usize, usize)) -> Result<()> {
        let (i, j) = pair;
        let tau = self.scheduler.tau;
        let r = self.spec.r_bound;
        if i == j {
            let x0 = self
                .weights
                .diag(i)
                .ok_or_else(|| Error::contract("self-pair activated without a diagonal"))?;
            let x = evolve_self_loop(x0, &self.weights, i, tau, &self.spec, self.tol)?;
            self.weights.set_diag(i, x)?;
            let was = (x0 < self.epsilon) as usize;
            let now = (x < self.epsilon) as usize;
            self.diag_below_eps = self.diag_below_eps + now - was;
        } else {
            let coeff = local_field(&self.weights, i, j, &self.spec)?;
            let x0 = self.weights.get(i, j);
            let x = match self.spec.variant {
                ModelVariant::NoSelfLoops => evolve_link_closed_form(x0, &coeff, tau, r)?,
                ModelVariant::SelfLoops => evolve_link_numeric(x0, &coeff, tau, r, self.tol)?,
            };
            self.weights.set(i, j, x);
            self.census.apply_link_change(i, j, x);
        }
        self.event_count += 1;
        if cfg!(debug_assertions) && self.event_count % SHADOW_CHECK_EVERY == 0 {
            self.census.verify(&self.weights)?;
        }
        Ok(())
    }

    /// One scheduled event. Returns the pair that was updated.
    pub fn step(&mut self) -> Result<(usize, usize)> {
        let pair = self.next_pair();
        self.apply_event(pair)?;
        Ok(pair)
    }

    /// Balanced population, and for the self-loop variant every `x_ii >= eps`.
    #[inline]
    pub fn is_terminal(&self) -> bool {
        self.census.is_population_balanced() && self.diag_below_eps == 0
    }
}

/// Outcome of a single run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub finished: bool,
    /// Time at which the termination predicate first held.
    pub t_balance: Option<f64>,
    pub events: u64,
    pub sample_interval: f64,
    /// `N_U` at `t = 0, dt, 2 dt, ...` with `dt = sample_interval`.
    pub timecourse: Vec<u32>,
    pub total_triads: u64,
    pub final_state: Option<WeightState>,
}

impl RunOutcome {
    pub fn sample_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.timecourse.len()).map(|m| m as f64 * self.sample_interval)
    }
}

#[inline]
fn time_slack(t: f64) -> f64 {
    1e-9 * t.abs().max(1.0)
}

/// Number of events needed for the clock to reach `t_max`.
pub fn events_to_reach(t_max: f64, tau: f64) -> u64 {
    (t_max / tau - 1e-9).ceil().max(1.0) as u64
}

/// Runs events from `state` until it terminates or the clock reaches `t_max`.
///
/// The predicate is checked after every event. Sample `m` records the count
/// left by the latest event ending at or before `m * sample_interval`.
pub fn run_from_state(mut state: RunState, params: &RunParams) -> Result<RunOutcome> {
    if !(params.t_max > 0.0) || !(params.sample_interval > 0.0) {
        return Err(Error::config("t_max and sample_interval must be positive"));
    }
    if state.census.total_triads() > u32::MAX as u64 {
        return Err(Error::config("n too large for 32-bit triad counts"));
    }
    let dt = params.sample_interval;
    let tau = state.scheduler.tau;
    let max_events = events_to_reach(params.t_max, tau);
    let mut samples: Vec<u32> = Vec::new();
    let mut finished = false;
    while state.event_count < max_events {
        let next_clock = (state.event_count + 1) as f64 * tau;
        let limit = next_clock - time_slack(next_clock);
        let count = state.census.unbalanced_count() as u32;
        while (samples.len() as f64) * dt < limit {
            samples.push(count);
        }
        state.step()?;
        if state.is_terminal() {
            finished = true;
            break;
        }
    }
    let clock = state.clock();
    if !finished {
        let end = params.t_max + time_slack(params.t_max);
        let count = state.census.unbalanced_count() as u32;
        while (samples.len() as f64) * dt <= end {
            samples.push(count);
        }
    }
    Ok(RunOutcome {
        finished,
        t_balance: finished.then_some(clock),
        events: state.event_count,
        sample_interval: dt,
        timecourse: samples,
        total_triads: state.census.total_triads(),
        final_state: params.keep_final_state.then(|| state.into_weights()),
    })
}

/// Runs one realization of the temporal dynamics from `initial`.
pub fn run_single(
    initial: WeightState,
    spec: ModelSpec,
    scheduler: Scheduler,
    params: &RunParams,
    rng: ChaCha8Rng,
) -> Result<RunOutcome> {
    let state = RunState::new(initial, spec, scheduler, params.epsilon, params.tol, rng)?;
    run_from_state(state, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::init_weights;
    use rand::SeedableRng;
    use std::collections::HashMap;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn no_loops(n: usize) -> ModelSpec {
        ModelSpec::new(ModelVariant::NoSelfLoops, 10.0, n).unwrap()
    }

    #[test]
    fn scheduler_rejects_nonpositive_tau() {
        assert!(Scheduler::new(SchedulerKind::WithReplacement, 0.0).is_err());
        assert!(Scheduler::new(SchedulerKind::WithReplacement, -1.0).is_err());
    }

    #[test]
    fn link_sets() {
        assert_eq!(link_set(3, ModelVariant::NoSelfLoops), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(link_set(4, ModelVariant::SelfLoops).len(), 10);
    }

    #[test]
    fn n3_draws_only_real_links() {
        let s = WeightState::constant(3, 1.0, false).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 0.1).unwrap();
        let mut st = RunState::new(s, no_loops(3), sched, 1e-6, 1e-10, rng(1)).unwrap();
        for _ in 0..1000 {
            let (i, j) = st.next_pair();
            assert!(i < j && j < 3);
        }
    }

    #[test]
    fn without_replacement_rounds_cover_every_link() {
        let n = 12;
        let s = WeightState::constant(n, 1.0, false).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithoutReplacement, 0.1).unwrap();
        let mut st = RunState::new(s, no_loops(n), sched, 1e-6, 1e-10, rng(2)).unwrap();
        let m = st.link_count();
        for _ in 0..4 {
            let mut seen = HashMap::new();
            for _ in 0..m {
                *seen.entry(st.next_pair()).or_insert(0) += 1;
            }
            assert_eq!(seen.len(), m);
            assert!(seen.values().all(|&c| c == 1));
            assert_eq!(st.permutation_cursor(), m);
        }
        assert_eq!(st.rounds_drawn(), 4);
    }

    #[test]
    fn zero_field_event_only_advances_clock() {
        let s = WeightState::constant(5, 0.0, false).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 0.25).unwrap();
        let mut st = RunState::new(s.clone(), no_loops(5), sched, 1e-6, 1e-10, rng(3)).unwrap();
        st.step().unwrap();
        assert_eq!(st.weights(), &s);
        assert_eq!(st.clock(), 0.25);
    }

    #[test]
    fn saturated_link_stays_put() {
        let s = WeightState::constant(5, 10.0, false).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 1.0).unwrap();
        let mut st = RunState::new(s.clone(), no_loops(5), sched, 1e-6, 1e-10, rng(3)).unwrap();
        for _ in 0..20 {
            st.step().unwrap();
        }
        assert_eq!(st.weights(), &s);
    }

    #[test]
    fn pre_balanced_start_finishes_after_one_event() {
        let s = WeightState::constant(6, 10.0, false).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 0.5).unwrap();
        let params = RunParams { sample_interval: 0.1, ..Default::default() };
        let out = run_single(s, no_loops(6), sched, &params, rng(4)).unwrap();
        assert!(out.finished);
        assert_eq!(out.t_balance, Some(0.5));
        assert_eq!(out.events, 1);
        assert!(out.timecourse.iter().all(|&c| c == 0));
        assert_eq!(out.timecourse.len(), 5);
    }

    #[test]
    fn one_event_cap_leaves_run_unfinished() {
        let mut r = rng(5);
        let s = init_weights(20, 0.0, 1.0, 10.0, false, &mut r).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 1.0).unwrap();
        let params = RunParams { t_max: 1.0, sample_interval: 0.5, ..Default::default() };
        let out = run_single(s, no_loops(20), sched, &params, r).unwrap();
        assert!(!out.finished);
        assert_eq!(out.t_balance, None);
        assert_eq!(out.events, 1);
        assert_eq!(out.timecourse.len(), 3);
    }

    #[test]
    fn clock_is_product_not_sum() {
        let s = WeightState::constant(4, 0.0, false).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 0.1).unwrap();
        let mut st = RunState::new(s, no_loops(4), sched, 1e-6, 1e-10, rng(6)).unwrap();
        for _ in 0..1000 {
            st.step().unwrap();
        }
        assert_eq!(st.clock(), 1000.0 * 0.1);
    }

    #[test]
    fn census_tracks_state_through_events() {
        let mut r = rng(8);
        let s = init_weights(15, 0.0, 1.0, 10.0, true, &mut r).unwrap();
        let spec = ModelSpec::new(ModelVariant::SelfLoops, 10.0, 15).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithoutReplacement, 0.3).unwrap();
        let mut st = RunState::new(s, spec, sched, 1e-6, 1e-10, r).unwrap();
        for _ in 0..3000 {
            st.step().unwrap();
            st.census().verify(st.weights()).unwrap();
        }
        assert!(st.weights().max_abs() <= 10.0);
    }

    #[test]
    fn identical_seeds_identical_outcomes() {
        let mut r = rng(10);
        let s = init_weights(12, 0.5, 1.0, 10.0, false, &mut r).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 0.5).unwrap();
        let params = RunParams { t_max: 1e5, keep_final_state: true, ..Default::default() };
        let a = run_single(s.clone(), no_loops(12), sched, &params, rng(77)).unwrap();
        let b = run_single(s, no_loops(12), sched, &params, rng(77)).unwrap();
        assert_eq!(a, b);
        assert!(a.finished);
    }

    #[test]
    fn mismatched_variant_rejected() {
        let s = WeightState::constant(4, 1.0, false).unwrap();
        let spec = ModelSpec::new(ModelVariant::SelfLoops, 10.0, 4).unwrap();
        let sched = Scheduler::new(SchedulerKind::WithReplacement, 0.5).unwrap();
        assert!(RunState::new(s, spec, sched, 1e-6, 1e-10, rng(0)).is_err());
    }
}
