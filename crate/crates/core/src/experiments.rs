//! Ensemble protocol: shared initial conditions across a grid of activation
//! durations, the discard rule, and the derived statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::{triad_count, DEFAULT_EPSILON};
use crate::dynamics::{init_weights, ModelSpec, ModelVariant, WeightState, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::scheduler::{run_single, RunOutcome, RunParams, Scheduler, SchedulerKind};

/// Activation durations used by default.
pub const DEFAULT_TAU_GRID: [f64; 8] = [0.01, 0.02, 0.05, 0.1, 0.22, 0.5, 1.0, 2.25];
/// Node counts used by default for size sweeps.
pub const DEFAULT_N_GRID: [usize; 4] = [50, 100, 200, 400];
/// Logarithmic histogram resolution.
pub const HISTOGRAM_BINS_PER_DECADE: u32 = 10;

/// RNG stream for the initial condition of `run`.
pub fn initial_rng(master_seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((run as u64) << 16);
    rng
}

/// RNG stream for the event sequence of `run` at grid position `tau_index`.
pub fn scheduler_rng(master_seed: u64, run: usize, tau_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((run as u64) << 16) | (tau_index as u64 + 1));
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub mu: f64,
    pub sigma: f64,
    pub r_bound: f64,
    pub epsilon: f64,
    pub tau_grid: Vec<f64>,
    pub variant: ModelVariant,
    pub scheduler: SchedulerKind,
    pub runs: usize,
    pub t_max: f64,
    pub sample_interval: f64,
    pub master_seed: u64,
    pub tol: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n: 200,
            mu: 0.0,
            sigma: 1.0,
            r_bound: 10.0,
            epsilon: DEFAULT_EPSILON,
            tau_grid: DEFAULT_TAU_GRID.to_vec(),
            variant: ModelVariant::NoSelfLoops,
            scheduler: SchedulerKind::WithReplacement,
            runs: 1000,
            t_max: 2e6,
            sample_interval: 10.0,
            master_seed: 1,
            tol: DEFAULT_TOL,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::config(format!("n must be at least 3, got {}", self.n)));
        }
        if self.tau_grid.is_empty() {
            return Err(Error::config("tau_grid must not be empty"));
        }
        if let Some(t) = self.tau_grid.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::config(format!("tau values must be positive, got {t}")));
        }
        if self.runs < 1 {
            return Err(Error::config("runs must be at least 1"));
        }
        let positive = [
            ("sigma", self.sigma),
            ("r_bound", self.r_bound),
            ("epsilon", self.epsilon),
            ("t_max", self.t_max),
            ("sample_interval", self.sample_interval),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu.is_finite() {
            return Err(Error::config("mu must be finite"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.variant, self.r_bound, self.n)
    }

    pub fn run_params(&self) -> RunParams {
        RunParams {
            epsilon: self.epsilon,
            t_max: self.t_max,
            sample_interval: self.sample_interval,
            tol: self.tol,
            keep_final_state: false,
        }
    }

    /// Initial condition `run`, identical for every tau.
    pub fn initial_condition(&self, run: usize) -> Result<WeightState> {
        let mut rng = initial_rng(self.master_seed, run);
        init_weights(
            self.n,
            self.mu,
            self.sigma,
            self.r_bound,
            self.variant.has_diagonal(),
            &mut rng,
        )
    }
}

/// Compact per-(run, tau) result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub tau_index: usize,
    pub tau: f64,
    pub finished: bool,
    pub t_balance: Option<f64>,
    pub events: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimecoursePoint {
    pub t: f64,
    pub mean_fraction: f64,
    /// Runs still running at `t` (finished runs count as zero afterwards).
    pub runs_contributing: u64,
}

/// Exact integer sums of sampled unbalanced counts; order of accumulation
/// does not affect the result.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimecourseAccumulator {
    sums: Vec<u64>,
    covering: Vec<u64>,
    runs: u64,
    sample_interval: Option<f64>,
}

impl TimecourseAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, outcome: &RunOutcome) -> Result<()> {
        match self.sample_interval {
            Some(dt) if dt != outcome.sample_interval => {
                return Err(Error::contract("outcomes must share sample_interval"))
            }
            _ => self.sample_interval = Some(outcome.sample_interval),
        }
        let len = outcome.timecourse.len();
        if self.sums.len() < len {
            self.sums.resize(len, 0);
            self.covering.resize(len, 0);
        }
        for (m, &c) in outcome.timecourse.iter().enumerate() {
            self.sums[m] += c as u64;
            self.covering[m] += 1;
        }
        self.runs += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: TimecourseAccumulator) -> Result<()> {
        if let (Some(a), Some(b)) = (self.sample_interval, other.sample_interval) {
            if a != b {
                return Err(Error::contract("outcomes must share sample_interval"));
            }
        }
        self.sample_interval = self.sample_interval.or(other.sample_interval);
        if self.sums.len() < other.sums.len() {
            self.sums.resize(other.sums.len(), 0);
            self.covering.resize(other.sums.len(), 0);
        }
        for (m, (s, c)) in other.sums.into_iter().zip(other.covering).enumerate() {
            self.sums[m] += s;
            self.covering[m] += c;
        }
        self.runs += other.runs;
        Ok(())
    }

    /// Mean of `N_U / N_total` over every added run.
    pub fn finish(&self, total_triads: u64) -> Vec<TimecoursePoint> {
        let dt = self.sample_interval.unwrap_or(0.0);
        let denom = self.runs as f64 * total_triads as f64;
        self.sums
            .iter()
            .zip(&self.covering)
            .enumerate()
            .map(|(m, (&s, &c))| TimecoursePoint {
                t: m as f64 * dt,
                mean_fraction: s as f64 / denom,
                runs_contributing: c,
            })
            .collect()
    }
}

/// Pointwise ensemble mean of `N_U / N_total`, with finished runs
/// contributing zero after their balance time.
pub fn average_timecourse(outcomes: &[RunOutcome], total_triads: u64) -> Result<Vec<TimecoursePoint>> {
    let mut acc = TimecourseAccumulator::new();
    for o in outcomes {
        acc.add(o)?;
    }
    Ok(acc.finish(total_triads))
}

/// `mean_T / (M tau)` with `M = N(N-1)/2`.
pub fn updates_per_link(mean_t: f64, n: usize, tau: f64) -> f64 {
    let m = (n * (n - 1) / 2) as f64;
    mean_t / (m * tau)
}

/// Harmonic number `H_M`, the expected number of updates per link until
/// every one of the `M = N(N-1)/2` links has been picked at least once.
pub fn coupon_collector_line(n: usize) -> f64 {
    harmonic(n * (n - 1) / 2)
}

pub fn harmonic(m: usize) -> f64 {
    (1..=m).rev().map(|k| 1.0 / k as f64).sum()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that a triad of i.i.d. `N(mu, sigma)` weights has a negative
/// sign product: `3 p q^2 + p^3` with `p = P(x < 0)`.
pub fn expected_initial_unbalanced_fraction(mu: f64, sigma: f64) -> f64 {
    let p = normal_cdf(-mu / sigma);
    let q = 1.0 - p;
    3.0 * p * q * q + p * p * p
}

/// Logarithmic histogram with `HISTOGRAM_BINS_PER_DECADE` bins per decade.
pub fn log_histogram(values: &[f64]) -> Vec<HistogramBin> {
    let per = HISTOGRAM_BINS_PER_DECADE as f64;
    let idx = |v: f64| (v.log10() * per).floor() as i64;
    let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    let (Some(lo), Some(hi)) = (
        positive.iter().map(|&v| idx(v)).min(),
        positive.iter().map(|&v| idx(v)).max(),
    ) else {
        return Vec::new();
    };
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for v in positive {
        counts[(idx(v) - lo) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let e = lo + k as i64;
            HistogramBin {
                lo: 10f64.powf(e as f64 / per),
                hi: 10f64.powf((e + 1) as f64 / per),
                count,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TauStats {
    pub tau: f64,
    /// Runs finished at this tau (before the discard rule).
    pub finished: usize,
    /// Mean T over initial conditions that finished at every tau.
    pub mean_t: Option<f64>,
    pub updates_per_link: Option<f64>,
    /// `updates_per_link <= H_M`: slowing is a pure coverage effect.
    pub trivial: bool,
    pub histogram: Vec<HistogramBin>,
    pub timecourse: Vec<TimecoursePoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub n: usize,
    pub runs: usize,
    pub link_count: usize,
    pub total_triads: u64,
    pub coupon_line: f64,
    pub per_tau: Vec<TauStats>,
    /// Initial conditions unfinished for at least one tau.
    pub discarded: Vec<usize>,
    /// All (run, tau) records ordered by run, then tau index.
    pub records: Vec<RunRecord>,
}

impl EnsembleStats {
    /// T of `run` at grid position `tau_index`, if finished.
    pub fn t_balance(&self, run: usize, tau_index: usize) -> Option<f64> {
        let k = self.per_tau.len();
        self.records[run * k + tau_index].t_balance
    }

    pub fn kept_runs(&self) -> Vec<usize> {
        (0..self.runs)
            .filter(|r| self.discarded.binary_search(r).is_err())
            .collect()
    }
}

struct Partial {
    records: Vec<RunRecord>,
    timecourses: Vec<TimecourseAccumulator>,
}

impl Partial {
    fn new(k: usize) -> Self {
        Partial {
            records: Vec::new(),
            timecourses: vec![TimecourseAccumulator::new(); k],
        }
    }

    fn merge(mut self, other: Partial) -> Result<Self> {
        self.records.extend(other.records);
        for (a, b) in self.timecourses.iter_mut().zip(other.timecourses) {
            a.merge(b)?;
        }
        Ok(self)
    }
}

/// Runs the protocol with generated Gaussian initial conditions.
pub fn run_ensemble(config: &EnsembleConfig) -> Result<EnsembleStats> {
    run_ensemble_with(config, |run| config.initial_condition(run))
}

/// Runs the protocol with caller-supplied initial conditions.
///
/// `initial(run)` is evaluated once per run and shared by every tau. The
/// (run x tau) grid executes on the current rayon pool; the result does not
/// depend on the number of threads.
pub fn run_ensemble_with<F>(config: &EnsembleConfig, initial: F) -> Result<EnsembleStats>
where
    F: Fn(usize) -> Result<WeightState> + Sync,
{
    config.validate()?;
    let spec = config.model()?;
    let params = config.run_params();
    let k = config.tau_grid.len();
    let schedulers: Vec<Scheduler> = config
        .tau_grid
        .iter()
        .map(|&tau| Scheduler::new(config.scheduler, tau))
        .collect::<Result<_>>()?;

    let partial = (0..config.runs)
        .into_par_iter()
        .map(|run| -> Result<Partial> {
            let ic = initial(run)?;
            let results: Vec<(RunRecord, RunOutcome)> = schedulers
                .par_iter()
                .enumerate()
                .map(|(tau_index, sched)| {
                    let rng = scheduler_rng(config.master_seed, run, tau_index);
                    let out = run_single(ic.clone(), spec, *sched, &params, rng).map_err(|e| {
                        Error::RunFailed {
                            run,
                            tau_index,
                            source: Box::new(e),
                        }
                    })?;
                    let rec = RunRecord {
                        run,
                        tau_index,
                        tau: sched.tau,
                        finished: out.finished,
                        t_balance: out.t_balance,
                        events: out.events,
                    };
                    Ok((rec, out))
                })
                .collect::<Result<_>>()?;
            let mut p = Partial::new(k);
            for (tau_index, (rec, out)) in results.into_iter().enumerate() {
                p.timecourses[tau_index].add(&out)?;
                p.records.push(rec);
            }
            Ok(p)
        })
        .try_reduce(|| Partial::new(k), |a, b| a.merge(b))?;

    let mut records = partial.records;
    records.sort_by_key(|r| (r.run, r.tau_index));
    Ok(assemble(config, records, &partial.timecourses))
}

fn assemble(config: &EnsembleConfig, records: Vec<RunRecord>, timecourses: &[TimecourseAccumulator]) -> EnsembleStats {
    let n = config.n;
    let k = config.tau_grid.len();
    let total = triad_count(n);
    let coupon = coupon_collector_line(n);
    let discarded: Vec<usize> = (0..config.runs)
        .filter(|&r| records[r * k..(r + 1) * k].iter().any(|rec| !rec.finished))
        .collect();
    let kept: Vec<usize> = (0..config.runs)
        .filter(|r| discarded.binary_search(r).is_err())
        .collect();
    let per_tau = config
        .tau_grid
        .iter()
        .enumerate()
        .map(|(ti, &tau)| {
            let finished = (0..config.runs).filter(|&r| records[r * k + ti].finished).count();
            let ts: Vec<f64> = kept
                .iter()
                .filter_map(|&r| records[r * k + ti].t_balance)
                .collect();
            let mean_t = (!ts.is_empty()).then(|| ts.iter().sum::<f64>() / ts.len() as f64);
            let upl = mean_t.map(|m| updates_per_link(m, n, tau));
            TauStats {
                tau,
                finished,
                mean_t,
                updates_per_link: upl,
                trivial: upl.is_some_and(|u| u <= coupon),
                histogram: log_histogram(&ts),
                timecourse: timecourses[ti].finish(total),
            }
        })
        .collect();
    EnsembleStats {
        n,
        runs: config.runs,
        link_count: n * (n - 1) / 2,
        total_triads: total,
        coupon_line: coupon,
        per_tau,
        discarded,
        records,
    }
}

/// One row of a size sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub tau: f64,
    pub updates_per_link: Option<f64>,
    /// `updates_per_link / updates_per_link(reference tau)`.
    pub normalized: Option<f64>,
    /// `H_M / updates_per_link(reference tau)`.
    pub coupon_normalized: Option<f64>,
    /// `reference_tau / tau`, the slope of a tau-independent T.
    pub trivial_line: f64,
    pub discarded: usize,
}

/// Runs the ensemble at each `n` and normalizes by the smallest tau in the grid.
pub fn size_sweep(base: &EnsembleConfig, n_grid: &[usize]) -> Result<Vec<SweepRow>> {
    if n_grid.is_empty() {
        return Err(Error::config("n_grid must not be empty"));
    }
    let (ref_index, &ref_tau) = base
        .tau_grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::config("tau_grid must not be empty"))?;
    let mut rows = Vec::new();
    for &n in n_grid {
        let config = EnsembleConfig { n, ..base.clone() };
        let stats = run_ensemble(&config)?;
        let reference = stats.per_tau[ref_index].updates_per_link;
        for ts in &stats.per_tau {
            rows.push(SweepRow {
                n,
                tau: ts.tau,
                updates_per_link: ts.updates_per_link,
                normalized: ts.updates_per_link.zip(reference).map(|(u, r)| u / r),
                coupon_normalized: reference.map(|r| stats.coupon_line / r),
                trivial_line: ref_tau / ts.tau,
                discarded: stats.discarded.len(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, runs: usize) -> EnsembleConfig {
        EnsembleConfig {
            n,
            runs,
            mu: 1.0,
            tau_grid: vec![0.1, 1.0],
            t_max: 1e5,
            ..Default::default()
        }
    }

    #[test]
    fn updates_per_link_arithmetic() {
        let m = (200 * 199 / 2) as f64;
        assert_eq!(m, 19_900.0);
        assert!((updates_per_link(m * 0.3, 200, 0.3) - 1.0).abs() < 1e-15);
        assert!((updates_per_link(2000.0, 200, 0.01) - 2000.0 / 199.0).abs() < 1e-12);
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(1), 1.0);
        assert!((coupon_collector_line(200) - 10.476).abs() < 1e-3);
        assert!((coupon_collector_line(50) - 7.688).abs() < 1e-3);
    }

    #[test]
    fn orthant_formula() {
        assert!((expected_initial_unbalanced_fraction(0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((expected_initial_unbalanced_fraction(1.0, 1.0) - 0.341).abs() < 1e-3);
        assert!((expected_initial_unbalanced_fraction(-1.0, 1.0) - 0.659).abs() < 1e-3);
    }

    #[test]
    fn histogram_bins_are_logarithmic() {
        let h = log_histogram(&[1.0, 1.1, 9.0, 10.0, 0.0]);
        assert_eq!(h.iter().map(|b| b.count).sum::<u64>(), 4);
        assert_eq!(h.len(), 11);
        assert!((h[0].lo - 1.0).abs() < 1e-12);
        assert_eq!(h[0].count, 2);
        assert!(log_histogram(&[]).is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(EnsembleConfig::default().validate().is_ok());
        let bad = EnsembleConfig { tau_grid: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EnsembleConfig { tau_grid: vec![0.1, 0.0], ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EnsembleConfig { runs: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = EnsembleConfig { n: 2, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pre_balanced_ensemble() {
        let cfg = small(8, 3);
        let stats = run_ensemble_with(&cfg, |_| WeightState::constant(8, 10.0, false)).unwrap();
        assert!(stats.discarded.is_empty());
        for (ts, &tau) in stats.per_tau.iter().zip(&cfg.tau_grid) {
            assert_eq!(ts.finished, 3);
            assert!((ts.mean_t.unwrap() - tau).abs() < 1e-15);
            assert!(ts.timecourse.iter().all(|p| p.mean_fraction == 0.0));
        }
    }

    #[test]
    fn discard_rule_excludes_partially_unfinished_ics() {
        // tiny cap: the slow tau cannot finish
        let cfg = EnsembleConfig {
            n: 10,
            runs: 6,
            mu: 0.0,
            tau_grid: vec![0.05, 5.0],
            t_max: 40.0,
            sample_interval: 1.0,
            ..Default::default()
        };
        let stats = run_ensemble(&cfg).unwrap();
        for r in 0..cfg.runs {
            let all = (0..2).all(|ti| stats.t_balance(r, ti).is_some());
            assert_eq!(all, stats.discarded.binary_search(&r).is_err());
        }
        for ts in &stats.per_tau {
            let kept = stats.kept_runs().len();
            assert!(ts.histogram.iter().map(|b| b.count).sum::<u64>() == kept as u64);
            assert!(ts.timecourse.iter().all(|p| (0.0..=1.0).contains(&p.mean_fraction)));
            assert_eq!(ts.timecourse[0].runs_contributing, cfg.runs as u64);
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let cfg = small(12, 6);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ensemble(&cfg)).unwrap();
        let b = four.install(|| run_ensemble(&cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn timecourse_mean_counts_finished_runs_as_zero() {
        let mk = |tc: Vec<u32>| RunOutcome {
            finished: true,
            t_balance: Some(1.0),
            events: 1,
            sample_interval: 10.0,
            timecourse: tc,
            total_triads: 10,
            final_state: None,
        };
        let tc = average_timecourse(&[mk(vec![4, 2]), mk(vec![6])], 10).unwrap();
        assert_eq!(tc.len(), 2);
        assert!((tc[0].mean_fraction - 0.5).abs() < 1e-15);
        assert!((tc[1].mean_fraction - 0.1).abs() < 1e-15);
        assert_eq!(tc[1].runs_contributing, 1);
        assert_eq!(tc[1].t, 10.0);
    }

    #[test]
    fn sweep_self_normalizes() {
        let base = EnsembleConfig {
            runs: 4,
            mu: 1.0,
            tau_grid: vec![0.5, 0.1, 1.0],
            t_max: 1e5,
            ..Default::default()
        };
        let rows = size_sweep(&base, &[8, 10]).unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows.iter().filter(|r| r.tau == 0.1) {
            assert_eq!(r.normalized, Some(1.0));
            assert_eq!(r.trivial_line, 1.0);
        }
        assert!(rows.iter().all(|r| r.normalized.is_some_and(|v| v.is_finite() && v >= 0.0)));
        assert!(size_sweep(&base, &[]).is_err());
    }
}
