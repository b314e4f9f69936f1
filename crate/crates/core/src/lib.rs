//! Continuous-valued structural-balance dynamics on temporal complete graphs.
//!
//! One link is active at a time for a fixed duration `tau`; while active its
//! weight follows the saturating balance dynamics with every other weight
//! frozen. The crate provides the single-link integrators, an incremental
//! census of unbalanced triads, the two edge-sequence schedulers, and the
//! ensemble protocol that compares time-to-balance across `tau`.

pub mod census;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod output;
pub mod scheduler;
pub mod validate;

pub use census::{diagonal_nonnegative, sgn_eps, triad_balanced, SignClass, TriadCensus};
pub use config::{parse_config, ConfigFile};
pub use dynamics::{
    evolve_link_closed_form, evolve_link_numeric, evolve_self_loop, init_weights, integrate_aggregate,
    local_field, LinkCoefficients, ModelSpec, ModelVariant, WeightState,
};
pub use error::{Error, Result};
pub use experiments::{
    average_timecourse, coupon_collector_line, run_ensemble, run_ensemble_with, size_sweep, updates_per_link,
    EnsembleConfig, EnsembleStats,
};
pub use output::{emit_results, emit_sweep};
pub use scheduler::{run_single, RunOutcome, RunParams, RunState, Scheduler, SchedulerKind};
