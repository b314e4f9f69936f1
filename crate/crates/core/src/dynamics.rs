//! Link-weight state and the equations of motion.
//!
//! Two variants of the saturating balance dynamics are supported. Without
//! self-loops a link evolves as
//!
//! ```text
//! dx_ij/dt = 1/(N-2) (1 - x_ij^2/R^2) sum_{k != i,j} x_ik x_kj
//! ```
//!
//! and with self-loops the sum runs over every `k` (including `i` and `j`)
//! and the normalizer becomes `N`. During a temporal update event only one
//! link moves, so every other weight is frozen and the right-hand side
//! collapses to a scalar ODE in the active weight.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for the adaptive scalar integrator.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Hard cap on integrator steps for a single update.
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Sum over third parties only, normalized by `N - 2`.
    NoSelfLoops,
    /// Sum over all nodes including the endpoints, normalized by `N`.
    SelfLoops,
}

impl ModelVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::NoSelfLoops => "no_self_loops",
            ModelVariant::SelfLoops => "self_loops",
        }
    }

    pub fn has_diagonal(self) -> bool {
        matches!(self, ModelVariant::SelfLoops)
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "no_self_loops" => Ok(ModelVariant::NoSelfLoops),
            "self_loops" => Ok(ModelVariant::SelfLoops),
            other => Err(format!(
                "unknown variant `{other}` (expected no_self_loops or self_loops)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub r_bound: f64,
    pub n: usize,
}

impl ModelSpec {
    pub fn new(variant: ModelVariant, r_bound: f64, n: usize) -> Result<Self> {
        if !(r_bound > 0.0 && r_bound.is_finite()) {
            return Err(Error::config(format!("r_bound must be positive, got {r_bound}")));
        }
        if n < 3 {
            return Err(Error::config(format!("n must be at least 3, got {n}")));
        }
        Ok(ModelSpec { variant, r_bound, n })
    }

    /// Normalizer of the link drift: `N - 2` or `N`.
    pub fn normalizer(&self) -> f64 {
        match self.variant {
            ModelVariant::NoSelfLoops => (self.n - 2) as f64,
            ModelVariant::SelfLoops => self.n as f64,
        }
    }
}

/// Symmetric link weights of a complete graph on `n` nodes.
///
/// Off-diagonal weights live in a dense row-major `n x n` buffer whose
/// diagonal is kept at zero, so the dot product of rows `i` and `j` is
/// exactly the sum over third parties. The only mutator writes both mirror
/// entries. Self-loop weights, when present, are stored separately.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightState {
    n: usize,
    x: Vec<f64>,
    diagonal: Option<Vec<f64>>,
}

impl WeightState {
    /// All off-diagonal weights (and the diagonal, if requested) set to `value`.
    pub fn constant(n: usize, value: f64, with_diagonal: bool) -> Result<Self> {
        Self::from_fn(n, |_, _| value, with_diagonal.then(|| vec![value; n]))
    }

    /// Builds a state from `f(i, j)` evaluated for every `i < j`.
    pub fn from_fn(
        n: usize,
        mut f: impl FnMut(usize, usize) -> f64,
        diagonal: Option<Vec<f64>>,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::config(format!("n must be at least 3, got {n}")));
        }
        if let Some(d) = &diagonal {
            if d.len() != n {
                return Err(Error::config(format!(
                    "diagonal has length {}, expected {n}",
                    d.len()
                )));
            }
        }
        let mut state = WeightState {
            n,
            x: vec![0.0; n * n],
            diagonal,
        };
        for i in 0..n {
            for j in i + 1..n {
                state.set(i, j, f(i, j));
            }
        }
        Ok(state)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of unordered distinct pairs, `N(N-1)/2`.
    pub fn link_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.x[i * self.n + j]
    }

    /// Writes `x_ij` and `x_ji`. Panics on `i == j`; use [`Self::set_diag`].
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert_ne!(i, j, "off-diagonal setter called with i == j");
        self.x[i * self.n + j] = value;
        self.x[j * self.n + i] = value;
    }

    /// Row `i` of the off-diagonal matrix (entry `i` is zero).
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }

    pub fn has_diagonal(&self) -> bool {
        self.diagonal.is_some()
    }

    pub fn diag(&self, i: usize) -> Option<f64> {
        self.diagonal.as_ref().map(|d| d[i])
    }

    pub fn set_diag(&mut self, i: usize, value: f64) -> Result<()> {
        match self.diagonal.as_mut() {
            Some(d) => {
                d[i] = value;
                Ok(())
            }
            None => Err(Error::contract("state has no diagonal")),
        }
    }

    /// Iterates `(i, j, x_ij)` over `i < j`.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    /// Largest absolute weight, diagonal included.
    pub fn max_abs(&self) -> f64 {
        let off = self.x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let diag = self
            .diagonal
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        off.max(diag)
    }

    fn raw(&self) -> &[f64] {
        &self.x
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0_f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Draws an initial state with i.i.d. Gaussian weights.
///
/// Off-diagonal weights are drawn in row-major order over `i < j`, then the
/// diagonal (if requested) from the same distribution. Samples with
/// `|x| >= r_bound` are redrawn.
pub fn init_weights<R: Rng + ?Sized>(
    n: usize,
    mu: f64,
    sigma: f64,
    r_bound: f64,
    with_diagonal: bool,
    rng: &mut R,
) -> Result<WeightState> {
    if n < 3 {
        return Err(Error::config(format!("n must be at least 3, got {n}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::config(format!("sigma must be positive, got {sigma}")));
    }
    if !(r_bound > 0.0) || !mu.is_finite() {
        return Err(Error::config("r_bound must be positive and mu finite"));
    }
    let normal = Normal::new(mu, sigma).map_err(|e| Error::config(e.to_string()))?;
    let draw = |rng: &mut R| loop {
        let v: f64 = normal.sample(rng);
        if v.abs() < r_bound {
            break v;
        }
    };
    let mut state = WeightState::from_fn(n, |_, _| 0.0, None)?;
    for i in 0..n {
        for j in i + 1..n {
            let v = draw(rng);
            state.set(i, j, v);
        }
    }
    if with_diagonal {
        state.diagonal = Some((0..n).map(|_| draw(rng)).collect());
    }
    Ok(state)
}

/// Frozen-environment coefficients of a single link's drift:
/// `dx/dt = (1 - x^2/R^2) (s_const + b_linear x) / normalizer`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkCoefficients {
    pub s_const: f64,
    pub b_linear: f64,
    pub normalizer: f64,
}

impl LinkCoefficients {
    #[inline]
    pub fn drift(&self, x: f64, r_bound: f64) -> f64 {
        (1.0 - (x * x) / (r_bound * r_bound)) * (self.s_const + self.b_linear * x) / self.normalizer
    }
}

pub fn local_field(state: &WeightState, i: usize, j: usize, spec: &ModelSpec) -> Result<LinkCoefficients> {
    let n = state.n();
    if i == j {
        return Err(Error::contract("local_field needs i != j; self-loops use evolve_self_loop"));
    }
    if i >= n || j >= n {
        return Err(Error::contract(format!("node index out of range ({i}, {j}) for n = {n}")));
    }
    let s_const = dot(state.row(i), state.row(j));
    let b_linear = match (spec.variant, state.diagonal()) {
        (ModelVariant::NoSelfLoops, _) => 0.0,
        (ModelVariant::SelfLoops, Some(d)) => d[i] + d[j],
        (ModelVariant::SelfLoops, None) => {
            return Err(Error::contract("self-loop model on a state without diagonal"))
        }
    };
    Ok(LinkCoefficients {
        s_const,
        b_linear,
        normalizer: spec.normalizer(),
    })
}

fn check_bound(x0: f64, r_bound: f64) -> Result<()> {
    if x0.abs() > r_bound || x0.is_nan() {
        Err(Error::StateCorruption { value: x0, bound: r_bound })
    } else {
        Ok(())
    }
}

/// Exact solution of `dx/dt = c (1 - x^2/R^2)` after `tau`, with
/// `c = s_const / normalizer`.
///
/// Uses `x(tau)/R = (u + h) / (1 + u h)` with `u = x0/R` and
/// `h = tanh(c tau / R)`, which is the tanh addition formula applied to
/// `R tanh(c tau / R + artanh(x0/R))` and never forms the artanh.
pub fn evolve_link_closed_form(x0: f64, coeff: &LinkCoefficients, tau: f64, r_bound: f64) -> Result<f64> {
    check_bound(x0, r_bound)?;
    if coeff.b_linear != 0.0 {
        return Err(Error::contract("closed form applies only when b_linear = 0"));
    }
    let c = coeff.s_const / coeff.normalizer;
    if c == 0.0 || x0.abs() == r_bound {
        return Ok(x0);
    }
    let u = x0 / r_bound;
    let h = (c * tau / r_bound).tanh();
    let v = (u + h) / (1.0 + u * h);
    Ok((r_bound * v).clamp(-r_bound, r_bound))
}

/// Adaptive step-doubling RK4 for a scalar autonomous ODE.
///
/// Each step compares one full step against two half steps; the local
/// error estimate `|two_half - full| / 15` must stay below
/// `tol * max(|x|, 1) * h / duration`. Accepted steps keep the
/// Richardson-extrapolated value.
#[derive(Clone, Copy, Debug)]
pub struct StepDoublingRk4 {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for StepDoublingRk4 {
    fn default() -> Self {
        StepDoublingRk4 {
            tol: DEFAULT_TOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl StepDoublingRk4 {
    pub fn new(tol: f64) -> Self {
        StepDoublingRk4 {
            tol,
            ..Default::default()
        }
    }

    #[inline]
    fn rk4(f: &impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// Integrates `dx/dt = f(x)` from `x0` over `duration`, clamping to
    /// `[-bound, bound]` after every accepted step.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, x0: f64, duration: f64, bound: f64) -> Result<f64> {
        let mut x = x0;
        let mut t = 0.0;
        let mut h = duration;
        let mut steps = 0usize;
        while t < duration {
            if steps >= self.max_steps {
                return Err(Error::IntegrationFailure { steps });
            }
            steps += 1;
            let last = h >= duration - t;
            let step = if last { duration - t } else { h };
            let full = Self::rk4(&f, x, step);
            let mid = Self::rk4(&f, x, 0.5 * step);
            let fine = Self::rk4(&f, mid, 0.5 * step);
            let err = (fine - full).abs() / 15.0;
            if !err.is_finite() {
                // trial step overshot far past the bound; retry smaller
                h = 0.2 * step;
                continue;
            }
            // error per unit step keeps the accumulated error below tol
            let allowed = self.tol * x.abs().max(fine.abs()).max(1.0) * (step / duration);
            if err <= allowed {
                x = (fine + (fine - full) / 15.0).clamp(-bound, bound);
                t = if last { duration } else { t + step };
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 5.0)
            };
            h = step * factor;
        }
        Ok(x)
    }
}

/// Numerically integrates the general single-link drift
/// `(1 - x^2/R^2)(s_const + b_linear x)/normalizer` over `tau`.
pub fn evolve_link_numeric(x0: f64, coeff: &LinkCoefficients, tau: f64, r_bound: f64, tol: f64) -> Result<f64> {
    check_bound(x0, r_bound)?;
    if x0.abs() == r_bound {
        return Ok(x0);
    }
    let c = *coeff;
    StepDoublingRk4::new(tol).integrate(move |x| c.drift(x, r_bound), x0, tau, r_bound)
}

/// Evolves the self-loop weight `x_ii` over `tau` with every other weight frozen:
/// `dx/dt = (1/N)(1 - x^2/R^2)(S + x^2)`, `S = sum_{k != i} x_ik^2`.
pub fn evolve_self_loop(
    x0: f64,
    state: &WeightState,
    i: usize,
    tau: f64,
    spec: &ModelSpec,
    tol: f64,
) -> Result<f64> {
    if spec.variant != ModelVariant::SelfLoops {
        return Err(Error::contract("evolve_self_loop requires the self-loop variant"));
    }
    let r = spec.r_bound;
    check_bound(x0, r)?;
    if x0.abs() == r {
        return Ok(x0);
    }
    let row = state.row(i);
    let s = dot(row, row);
    let norm = spec.n as f64;
    StepDoublingRk4::new(tol).integrate(
        move |x| (1.0 - (x * x) / (r * r)) * (s + x * x) / norm,
        x0,
        tau,
        r,
    )
}

/// Full-system drift: every link (and diagonal entry) at once.
fn aggregate_drift(spec: &ModelSpec, state: &WeightState, out: &mut WeightState) {
    let n = state.n();
    let r2 = spec.r_bound * spec.r_bound;
    let norm = spec.normalizer();
    for i in 0..n {
        let ri = state.row(i);
        for j in i + 1..n {
            let x = state.get(i, j);
            let mut s = dot(ri, state.row(j));
            if let Some(d) = state.diagonal() {
                s += (d[i] + d[j]) * x;
            }
            out.set(i, j, (1.0 - x * x / r2) * s / norm);
        }
    }
    if let (Some(d), Some(od)) = (state.diagonal(), out.diagonal.as_mut()) {
        let nf = n as f64;
        for i in 0..n {
            let row = state.row(i);
            let x = d[i];
            od[i] = (1.0 - x * x / r2) * (dot(row, row) + x * x) / nf;
        }
    }
}

/// `out = base + h * k`, clamped to `[-R, R]`.
fn axpy_into(out: &mut WeightState, base: &WeightState, h: f64, k: &WeightState, bound: f64) {
    for ((o, b), v) in out.x.iter_mut().zip(base.raw()).zip(k.raw()) {
        *o = (b + h * v).clamp(-bound, bound);
    }
    if let (Some(o), Some(b), Some(v)) = (out.diagonal.as_mut(), base.diagonal(), k.diagonal()) {
        for ((o, b), v) in o.iter_mut().zip(b).zip(v) {
            *o = (b + h * v).clamp(-bound, bound);
        }
    }
}

/// Integrates all links simultaneously with fixed-step classical RK4.
///
/// `observer(t, state)` is called at `t = 0`, after every `sample_every`
/// steps, and at `t_end`. Returns the final state. This is the aggregate
/// reference; the temporal engine never calls it.
pub fn integrate_aggregate(
    initial: &WeightState,
    spec: &ModelSpec,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    mut observer: impl FnMut(f64, &WeightState),
) -> Result<WeightState> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::config("integrate_aggregate needs dt > 0 and t_end >= 0"));
    }
    if spec.variant.has_diagonal() != initial.has_diagonal() {
        return Err(Error::contract("variant and diagonal presence disagree"));
    }
    let bound = spec.r_bound;
    let mut x = initial.clone();
    let mut k1 = initial.clone();
    let mut k2 = initial.clone();
    let mut k3 = initial.clone();
    let mut k4 = initial.clone();
    let mut tmp = initial.clone();
    observer(0.0, &x);
    let full_steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let every = sample_every.max(1);
    for step in 0..full_steps {
        let t0 = step as f64 * dt;
        let h = (t_end - t0).min(dt);
        aggregate_drift(spec, &x, &mut k1);
        axpy_into(&mut tmp, &x, 0.5 * h, &k1, bound);
        aggregate_drift(spec, &tmp, &mut k2);
        axpy_into(&mut tmp, &x, 0.5 * h, &k2, bound);
        aggregate_drift(spec, &tmp, &mut k3);
        axpy_into(&mut tmp, &x, h, &k3, bound);
        aggregate_drift(spec, &tmp, &mut k4);
        for idx in 0..x.x.len() {
            let v = x.x[idx] + h / 6.0 * (k1.x[idx] + 2.0 * k2.x[idx] + 2.0 * k3.x[idx] + k4.x[idx]);
            x.x[idx] = v.clamp(-bound, bound);
        }
        if let Some(d) = x.diagonal.as_mut() {
            let (a, b, c, e) = (
                k1.diagonal().unwrap(),
                k2.diagonal().unwrap(),
                k3.diagonal().unwrap(),
                k4.diagonal().unwrap(),
            );
            for i in 0..d.len() {
                d[i] = (d[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + e[i])).clamp(-bound, bound);
            }
        }
        let done = step + 1 == full_steps;
        if (step + 1) % every == 0 || done {
            let t = if done { t_end } else { (step + 1) as f64 * dt };
            observer(t, &x);
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(variant: ModelVariant, n: usize) -> ModelSpec {
        ModelSpec::new(variant, 10.0, n).unwrap()
    }

    /// Fixed-grid RK4, independent of the adaptive integrator.
    fn fixed_grid(f: impl Fn(f64) -> f64, x0: f64, t: f64, dt: f64) -> f64 {
        let steps = (t / dt).round() as usize;
        let h = t / steps as f64;
        let mut x = x0;
        for _ in 0..steps {
            let k1 = f(x);
            let k2 = f(x + 0.5 * h * k1);
            let k3 = f(x + 0.5 * h * k2);
            let k4 = f(x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn init_tiny_sigma_is_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = init_weights(3, 0.0, 1e-300, 10.0, false, &mut rng).unwrap();
        assert!(s.max_abs() < 1e-250);
    }

    #[test]
    fn init_counts_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = init_weights(200, 0.0, 1.0, 10.0, false, &mut rng).unwrap();
        assert_eq!(s.link_count(), 19_900);
        assert_eq!(s.links().count(), 19_900);
        let neg = s.links().filter(|&(_, _, x)| x < 0.0).count() as f64 / 19_900.0;
        // binomial concentration: 3 sigma of a fair coin over M draws
        assert!((neg - 0.5).abs() <= 3.0 * (0.25_f64 / 19_900.0).sqrt(), "{neg}");
        for i in 0..200 {
            assert_eq!(s.get(i, i), 0.0);
            for j in 0..200 {
                assert_eq!(s.get(i, j), s.get(j, i));
            }
        }
        assert!(s.diagonal().is_none());
    }

    #[test]
    fn init_rejects_bad_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(init_weights(2, 0.0, 1.0, 10.0, false, &mut rng), Err(Error::Config(_))));
        assert!(matches!(init_weights(5, 0.0, 0.0, 10.0, false, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn init_redraws_out_of_bound_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = init_weights(30, 0.0, 5.0, 1.0, true, &mut rng).unwrap();
        assert!(s.max_abs() < 1.0);
    }

    #[test]
    fn local_field_examples() {
        let mut s = WeightState::constant(3, 0.0, false).unwrap();
        s.set(0, 2, 2.0);
        s.set(1, 2, 3.0);
        let c = local_field(&s, 0, 1, &spec(ModelVariant::NoSelfLoops, 3)).unwrap();
        assert_eq!(c.s_const, 6.0);
        assert_eq!(c.normalizer, 1.0);
        assert_eq!(c.b_linear, 0.0);

        let z = WeightState::constant(3, 0.0, false).unwrap();
        assert_eq!(local_field(&z, 0, 1, &spec(ModelVariant::NoSelfLoops, 3)).unwrap().s_const, 0.0);

        let ones = WeightState::constant(4, 1.0, false).unwrap();
        let c = local_field(&ones, 0, 1, &spec(ModelVariant::NoSelfLoops, 4)).unwrap();
        assert_eq!((c.s_const, c.normalizer), (2.0, 2.0));

        assert!(matches!(
            local_field(&ones, 1, 1, &spec(ModelVariant::NoSelfLoops, 4)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn local_field_self_loop_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = init_weights(6, 0.3, 1.0, 10.0, true, &mut rng).unwrap();
        let sp = spec(ModelVariant::SelfLoops, 6);
        let (i, j) = (1, 4);
        let c = local_field(&s, i, j, &sp).unwrap();
        // full sum over k including k = i, j
        let full: f64 = (0..6)
            .map(|k| {
                let xik = if k == i { s.diag(i).unwrap() } else { s.get(i, k) };
                let xkj = if k == j { s.diag(j).unwrap() } else { s.get(k, j) };
                xik * xkj
            })
            .sum();
        let split = c.s_const + c.b_linear * s.get(i, j);
        assert!((full - split).abs() < 1e-12);
        assert_eq!(c.normalizer, 6.0);
    }

    #[test]
    fn closed_form_fixed_points() {
        let c = LinkCoefficients { s_const: 0.0, b_linear: 0.0, normalizer: 3.0 };
        assert_eq!(evolve_link_closed_form(3.7, &c, 5.0, 10.0).unwrap(), 3.7);
        let c = LinkCoefficients { s_const: -4.0, b_linear: 0.0, normalizer: 3.0 };
        assert_eq!(evolve_link_closed_form(10.0, &c, 7.0, 10.0).unwrap(), 10.0);
        assert_eq!(evolve_link_closed_form(-10.0, &c, 7.0, 10.0).unwrap(), -10.0);
    }

    #[test]
    fn closed_form_matches_fixed_grid_oracle() {
        let c = LinkCoefficients { s_const: 1.0, b_linear: 0.0, normalizer: 1.0 };
        let got = evolve_link_closed_form(0.0, &c, 1.0, 10.0).unwrap();
        let oracle = fixed_grid(|x| 1.0 - x * x / 100.0, 0.0, 1.0, 1e-4);
        assert!((got - oracle).abs() <= 1e-9, "{got} vs {oracle}");
        assert!((got - 0.996_679_946_249_558_2).abs() < 1e-12);
    }

    #[test]
    fn closed_form_rejects_corrupt_state_and_linear_term() {
        let c = LinkCoefficients { s_const: 1.0, b_linear: 0.0, normalizer: 1.0 };
        assert!(matches!(
            evolve_link_closed_form(10.5, &c, 1.0, 10.0),
            Err(Error::StateCorruption { .. })
        ));
        let c = LinkCoefficients { s_const: 1.0, b_linear: 1.0, normalizer: 1.0 };
        assert!(matches!(evolve_link_closed_form(1.0, &c, 1.0, 10.0), Err(Error::Contract(_))));
    }

    #[test]
    fn numeric_reduces_to_closed_form() {
        let c = LinkCoefficients { s_const: 3.3, b_linear: 0.0, normalizer: 2.0 };
        let a = evolve_link_numeric(-2.0, &c, 0.7, 10.0, 1e-10).unwrap();
        let b = evolve_link_closed_form(-2.0, &c, 0.7, 10.0).unwrap();
        assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
    }

    #[test]
    fn numeric_with_linear_term_matches_fixed_grid() {
        let c = LinkCoefficients { s_const: 2.0, b_linear: 1.0, normalizer: 4.0 };
        let got = evolve_link_numeric(1.0, &c, 1.0, 10.0, 1e-10).unwrap();
        let oracle = fixed_grid(|x| (1.0 - x * x / 100.0) * (2.0 + x) / 4.0, 1.0, 1.0, 1e-6);
        assert!((got - oracle).abs() <= 1e-7 * oracle.abs(), "{got} vs {oracle}");
        assert_eq!(evolve_link_numeric(10.0, &c, 1.0, 10.0, 1e-10).unwrap(), 10.0);
    }

    #[test]
    fn numeric_step_cap_reports_failure() {
        let c = LinkCoefficients { s_const: 5.0, b_linear: 0.0, normalizer: 1.0 };
        let rk = StepDoublingRk4 { tol: 1e-300, max_steps: 10 };
        assert!(matches!(
            rk.integrate(|x| c.drift(x, 10.0), 0.0, 100.0, 10.0),
            Err(Error::IntegrationFailure { .. })
        ));
    }

    #[test]
    fn stiff_drift_near_bound_recovers() {
        // drift of order 100 near R: a full-length trial step overflows
        let f = |x: f64| (1.0 - x * x / 100.0) * (1e4 + x * x) / 100.0;
        let got = StepDoublingRk4::new(1e-10).integrate(f, 9.0, 1.0, 10.0).unwrap();
        let oracle = fixed_grid(f, 9.0, 1.0, 1e-6);
        assert!((got - oracle).abs() <= 1e-7 * oracle.abs(), "{got} vs {oracle}");
    }

    #[test]
    fn self_loop_examples() {
        let sp = spec(ModelVariant::SelfLoops, 3);
        let mut s = WeightState::constant(3, 0.0, true).unwrap();
        assert_eq!(evolve_self_loop(0.0, &s, 0, 1.0, &sp, 1e-10).unwrap(), 0.0);
        assert_eq!(evolve_self_loop(10.0, &s, 0, 1.0, &sp, 1e-10).unwrap(), 10.0);
        s.set(0, 1, 1.0);
        s.set(0, 2, 1.0);
        let got = evolve_self_loop(0.0, &s, 0, 1.0, &sp, 1e-10).unwrap();
        let oracle = fixed_grid(|x| (1.0 - x * x / 100.0) * (2.0 + x * x) / 3.0, 0.0, 1.0, 1e-6);
        assert!((got - oracle).abs() <= 1e-7 * oracle.abs(), "{got} vs {oracle}");
        let ns = spec(ModelVariant::NoSelfLoops, 3);
        assert!(evolve_self_loop(0.0, &s, 0, 1.0, &ns, 1e-10).is_err());
    }

    #[test]
    fn aggregate_identity_and_fixed_point() {
        let sp = spec(ModelVariant::NoSelfLoops, 5);
        let s = WeightState::constant(5, 10.0, false).unwrap();
        let mut seen = 0;
        let out = integrate_aggregate(&s, &sp, 3.0, 0.1, 1, |_, st| {
            assert_eq!(st, &s);
            seen += 1;
        })
        .unwrap();
        assert_eq!(out, s);
        assert_eq!(seen, 31);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = init_weights(5, 0.0, 1.0, 10.0, false, &mut rng).unwrap();
        let out = integrate_aggregate(&g, &sp, 0.0, 0.1, 1, |_, _| {}).unwrap();
        assert_eq!(out, g);
    }

    #[test]
    fn aggregate_single_triad_matches_scalar_oracle() {
        // n = 3, equal weights x: dx/dt = (1 - x^2/R^2) x^2
        let sp = spec(ModelVariant::NoSelfLoops, 3);
        let s = WeightState::constant(3, 0.5, false).unwrap();
        let out = integrate_aggregate(&s, &sp, 1.5, 1e-3, 100, |_, _| {}).unwrap();
        let oracle = fixed_grid(|x| (1.0 - x * x / 100.0) * x * x, 0.5, 1.5, 1e-5);
        for (_, _, x) in out.links() {
            assert!((x - oracle).abs() < 1e-9, "{x} vs {oracle}");
        }
    }

    #[test]
    fn aggregate_self_loop_diagonal_grows() {
        let sp = spec(ModelVariant::SelfLoops, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = init_weights(4, 0.0, 1.0, 10.0, true, &mut rng).unwrap();
        let out = integrate_aggregate(&s, &sp, 0.5, 0.01, 10, |_, _| {}).unwrap();
        for i in 0..4 {
            assert!(out.diag(i).unwrap() >= s.diag(i).unwrap());
        }
    }
}
