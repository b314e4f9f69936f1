//! Browser bindings for the temporal balance model. The plain-Rust functions
//! are what the page calls through thin `wasm_bindgen` wrappers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

use temporal_balance::census::DEFAULT_EPSILON;
use temporal_balance::dynamics::{
    evolve_link_closed_form, init_weights, LinkCoefficients, ModelSpec, ModelVariant, DEFAULT_TOL,
};
use temporal_balance::experiments::expected_initial_unbalanced_fraction;
use temporal_balance::scheduler::{RunState, Scheduler, SchedulerKind};

const R_BOUND: f64 = 10.0;

/// Closed-form trajectory of one link under a frozen field `c`, sampled at
/// `points` evenly spaced times in `[0, duration]`.
pub fn link_trajectory(x0: f64, c: f64, duration: f64, points: usize) -> Result<Vec<f64>, String> {
    let coeff = LinkCoefficients { s_const: c, b_linear: 0.0, normalizer: 1.0 };
    let points = points.max(2);
    (0..points)
        .map(|k| {
            let t = duration * k as f64 / (points - 1) as f64;
            evolve_link_closed_form(x0, &coeff, t, R_BOUND).map_err(|e| e.to_string())
        })
        .collect()
}

/// Expected unbalanced fraction at `t = 0` for `mu` on an even grid.
pub fn initial_fraction_curve(mu_min: f64, mu_max: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|k| {
            let mu = mu_min + (mu_max - mu_min) * k as f64 / (points - 1) as f64;
            expected_initial_unbalanced_fraction(mu, 1.0)
        })
        .collect()
}

#[wasm_bindgen(js_name = linkCurve)]
pub fn link_curve(x0: f64, c: f64, duration: f64, points: usize) -> Result<Vec<f64>, JsError> {
    link_trajectory(x0, c, duration, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = initialFractionCurve)]
pub fn initial_fraction_curve_js(mu_min: f64, mu_max: f64, points: usize) -> Vec<f64> {
    initial_fraction_curve(mu_min, mu_max, points)
}

/// A single run that the page advances in batches of events.
#[wasm_bindgen]
pub struct Simulation {
    state: RunState,
    balanced_at: Option<f64>,
}

impl Simulation {
    pub fn create(n: usize, mu: f64, tau: f64, without_replacement: bool, seed: u64) -> Result<Self, String> {
        let err = |e: temporal_balance::Error| e.to_string();
        let spec = ModelSpec::new(ModelVariant::NoSelfLoops, R_BOUND, n).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = init_weights(n, mu, 1.0, R_BOUND, false, &mut rng).map_err(err)?;
        let kind = if without_replacement {
            SchedulerKind::WithoutReplacement
        } else {
            SchedulerKind::WithReplacement
        };
        let sched = Scheduler::new(kind, tau).map_err(err)?;
        let state = RunState::new(init, spec, sched, DEFAULT_EPSILON, DEFAULT_TOL, rng).map_err(err)?;
        let balanced_at = state.is_terminal().then_some(0.0);
        Ok(Self { state, balanced_at })
    }

    /// Applies up to `events` events, stopping at balance. Returns the
    /// unbalanced fraction afterwards.
    pub fn run_events(&mut self, events: u32) -> Result<f64, String> {
        for _ in 0..events {
            if self.balanced_at.is_some() {
                break;
            }
            self.state.step().map_err(|e| e.to_string())?;
            if self.state.is_terminal() {
                self.balanced_at = Some(self.state.clock());
            }
        }
        Ok(self.state.census().unbalanced_fraction())
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(n: usize, mu: f64, tau: f64, without_replacement: bool, seed: u64) -> Result<Simulation, JsError> {
        Self::create(n, mu, tau, without_replacement, seed).map_err(|e| JsError::new(&e))
    }

    pub fn advance(&mut self, events: u32) -> Result<f64, JsError> {
        self.run_events(events).map_err(|e| JsError::new(&e))
    }

    pub fn n(&self) -> usize {
        self.state.weights().n()
    }

    pub fn clock(&self) -> f64 {
        self.state.clock()
    }

    pub fn events(&self) -> f64 {
        self.state.event_count() as f64
    }

    #[wasm_bindgen(js_name = isBalanced)]
    pub fn is_balanced(&self) -> bool {
        self.balanced_at.is_some()
    }

    #[wasm_bindgen(js_name = unbalancedFraction)]
    pub fn unbalanced_fraction(&self) -> f64 {
        self.state.census().unbalanced_fraction()
    }

    /// Row-major `n x n` weights with a zero diagonal.
    pub fn weights(&self) -> Vec<f64> {
        let w = self.state.weights();
        (0..w.n()).flat_map(|i| w.row(i).to_vec()).collect()
    }
}
