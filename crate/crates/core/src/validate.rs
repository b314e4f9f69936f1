//! Self-check battery behind `tbal validate`.
//!
//! Each check pits an implementation path against an independent oracle
//! (fixed-grid integration, brute-force enumeration, the Gaussian orthant
//! formula) on a small randomized workload.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::census::{sgn_eps, triad_balanced, TriadCensus, DEFAULT_EPSILON};
use crate::dynamics::{
    evolve_link_closed_form, evolve_link_numeric, init_weights, LinkCoefficients, ModelSpec, ModelVariant,
    WeightState, DEFAULT_TOL,
};
use crate::experiments::expected_initial_unbalanced_fraction;
use crate::scheduler::{RunState, Scheduler, SchedulerKind};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn fixed_grid_rk4(f: impl Fn(f64) -> f64, x0: f64, t: f64, dt: f64) -> f64 {
    let steps = (t / dt).ceil().max(1.0) as usize;
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

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn closed_vs_numeric(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let r = rng.random_range(1.0..20.0);
        let x0 = rng.random_range(-r..r);
        let c = rng.random_range(-5.0..5.0);
        let tau = rng.random_range(1e-3..3.0);
        let coeff = LinkCoefficients { s_const: c, b_linear: 0.0, normalizer: 1.0 };
        let a = evolve_link_closed_form(x0, &coeff, tau, r);
        let b = evolve_link_numeric(x0, &coeff, tau, r, DEFAULT_TOL);
        match (a, b) {
            (Ok(a), Ok(b)) => worst = worst.max(rel_err(b, a)),
            _ => return check("closed form vs adaptive numeric", false, "integrator error".into()),
        }
    }
    check(
        "closed form vs adaptive numeric",
        worst <= 1e-9,
        format!("{cases} cases, worst relative error {worst:.3e} (limit 1e-9)"),
    )
}

fn numeric_vs_fixed_grid(rng: &mut ChaCha8Rng, cases: usize) -> Check {
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let r = 10.0;
        let coeff = LinkCoefficients {
            s_const: rng.random_range(-3.0..3.0),
            b_linear: rng.random_range(-2.0..2.0),
            normalizer: rng.random_range(3.0..50.0),
        };
        let x0 = rng.random_range(-9.0..9.0);
        let tau = rng.random_range(0.01..0.5);
        let Ok(a) = evolve_link_numeric(x0, &coeff, tau, r, DEFAULT_TOL) else {
            return check("adaptive numeric vs fixed grid", false, "integrator error".into());
        };
        let b = fixed_grid_rk4(|x| coeff.drift(x, r), x0, tau, 1e-5);
        worst = worst.max(rel_err(a, b));
    }
    check(
        "adaptive numeric vs fixed grid",
        worst <= 1e-7,
        format!("{cases} cases, worst relative error {worst:.3e} (limit 1e-7)"),
    )
}

fn brute_unbalanced(state: &WeightState, eps: f64) -> u64 {
    let n = state.n();
    let mut u = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let s = |a, b| sgn_eps(state.get(a, b), eps);
                u += !triad_balanced(s(i, j), s(j, k), s(i, k)) as u64;
            }
        }
    }
    u
}

fn census_vs_brute(rng: &mut ChaCha8Rng, changes: usize) -> Check {
    let n = 20;
    let Ok(mut s) = init_weights(n, 0.0, 1.0, 10.0, false, rng) else {
        return check("incremental census vs recount", false, "init failed".into());
    };
    let mut c = TriadCensus::build(&s, DEFAULT_EPSILON);
    let mut mismatches = 0;
    for step in 0..changes {
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let v = rng.random_range(-1.0..1.0);
        s.set(i, j, v);
        c.apply_link_change(i, j, v);
        if step % 500 == 0 && c.unbalanced_count() != brute_unbalanced(&s, DEFAULT_EPSILON) {
            mismatches += 1;
        }
    }
    let ok = mismatches == 0 && c.unbalanced_count() == brute_unbalanced(&s, DEFAULT_EPSILON);
    check(
        "incremental census vs recount",
        ok,
        format!("{changes} random link changes at n = {n}, {mismatches} checkpoint mismatches"),
    )
}

fn orthant(rng: &mut ChaCha8Rng) -> Vec<Check> {
    [-1.0, 0.0, 1.0]
        .iter()
        .map(|&mu| {
            let expect = expected_initial_unbalanced_fraction(mu, 1.0);
            let reps = 5;
            let mean = (0..reps)
                .map(|_| {
                    let s = init_weights(200, mu, 1.0, 10.0, false, rng).expect("valid init");
                    TriadCensus::build(&s, DEFAULT_EPSILON).unbalanced_fraction()
                })
                .sum::<f64>()
                / reps as f64;
            check(
                "initial unbalanced fraction vs orthant formula",
                (mean - expect).abs() <= 0.01,
                format!("mu = {mu}: sampled {mean:.4}, formula {expect:.4}"),
            )
        })
        .collect()
}

fn permutation_rounds(rng: &mut ChaCha8Rng) -> Check {
    let n = 20;
    let spec = ModelSpec::new(ModelVariant::NoSelfLoops, 10.0, n).expect("valid spec");
    let sched = Scheduler::new(SchedulerKind::WithoutReplacement, 0.1).expect("valid tau");
    let s = WeightState::constant(n, 1.0, false).expect("valid state");
    let seed: u64 = rng.random();
    let Ok(mut st) = RunState::new(s, spec, sched, DEFAULT_EPSILON, DEFAULT_TOL, ChaCha8Rng::seed_from_u64(seed)) else {
        return check("without-replacement rounds", false, "setup failed".into());
    };
    let m = st.link_count();
    let mut orders = HashSet::new();
    let mut ok = true;
    for _ in 0..5 {
        let round: Vec<(usize, usize)> = (0..m).map(|_| st.next_pair()).collect();
        let distinct: HashSet<_> = round.iter().collect();
        ok &= distinct.len() == m;
        orders.insert(round);
    }
    check(
        "without-replacement rounds",
        ok && orders.len() >= 2,
        format!("5 rounds of {m} links, {} distinct orders", orders.len()),
    )
}

fn fixed_points() -> Check {
    let r = 10.0;
    let coeff = LinkCoefficients { s_const: 3.0, b_linear: 0.0, normalizer: 2.0 };
    let zero = LinkCoefficients { s_const: 0.0, ..coeff };
    let mut ok = true;
    let (mut a, mut b, mut z) = (r, -r, 1.234);
    for _ in 0..1000 {
        a = evolve_link_closed_form(a, &coeff, 0.7, r).unwrap_or(f64::NAN);
        b = evolve_link_numeric(b, &coeff, 0.7, r, DEFAULT_TOL).unwrap_or(f64::NAN);
        z = evolve_link_closed_form(z, &zero, 0.7, r).unwrap_or(f64::NAN);
    }
    ok &= a == r && b == -r && z == 1.234;
    check("fixed points are bit-stable", ok, "1000 repeated applications".into())
}

/// Runs the whole battery with a fixed seed.
pub fn run_battery(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        closed_vs_numeric(&mut rng, 2000),
        numeric_vs_fixed_grid(&mut rng, 50),
        census_vs_brute(&mut rng, 5000),
    ];
    out.extend(orthant(&mut rng));
    out.push(permutation_rounds(&mut rng));
    out.push(fixed_points());
    out
}
