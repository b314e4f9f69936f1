//! Three-valued link signs and the running count of unbalanced triads.

use crate::dynamics::WeightState;
use crate::error::{Error, Result};

/// Sign threshold used by the experiments.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum SignClass {
    Negative = -1,
    Zero = 0,
    Positive = 1,
}

impl SignClass {
    #[inline]
    pub fn value(self) -> i8 {
        self as i8
    }
}

/// `+1` for `x >= eps`, `-1` for `x <= -eps`, `0` in between.
#[inline]
pub fn sgn_eps(x: f64, epsilon: f64) -> SignClass {
    if x >= epsilon {
        SignClass::Positive
    } else if x <= -epsilon {
        SignClass::Negative
    } else {
        SignClass::Zero
    }
}

/// A triad is balanced iff the product of its three signs is exactly `+1`.
#[inline]
pub fn triad_balanced(a: SignClass, b: SignClass, c: SignClass) -> bool {
    a.value() * b.value() * c.value() == 1
}

/// `N(N-1)(N-2)/6`.
pub fn triad_count(n: usize) -> u64 {
    let n = n as u64;
    n * (n.saturating_sub(1)) * (n.saturating_sub(2)) / 6
}

/// Cached link signs plus the number of unbalanced triads.
///
/// Signs are kept in a dense `n x n` `i8` matrix with a zero diagonal. A
/// zero on the diagonal makes the product for `k = i` or `k = j` vanish, so
/// incremental updates can sweep whole rows without special cases.
#[derive(Clone, Debug, PartialEq)]
pub struct TriadCensus {
    n: usize,
    epsilon: f64,
    signs: Vec<i8>,
    unbalanced: u64,
    total: u64,
}

impl TriadCensus {
    /// Classifies every link and counts unbalanced triads by full enumeration.
    pub fn build(state: &WeightState, epsilon: f64) -> Self {
        let n = state.n();
        let mut signs = vec![0i8; n * n];
        for (i, j, x) in state.links() {
            let s = sgn_eps(x, epsilon).value();
            signs[i * n + j] = s;
            signs[j * n + i] = s;
        }
        let mut census = TriadCensus {
            n,
            epsilon,
            signs,
            unbalanced: 0,
            total: triad_count(n),
        };
        census.unbalanced = census.recount();
        census
    }

    /// Brute-force `O(N^3)` count over the cached signs.
    pub fn recount(&self) -> u64 {
        let n = self.n;
        let mut balanced = 0u64;
        for i in 0..n {
            let ri = &self.signs[i * n..(i + 1) * n];
            for j in i + 1..n {
                let sij = ri[j];
                if sij == 0 {
                    continue;
                }
                let rj = &self.signs[j * n..(j + 1) * n];
                balanced += ri[j + 1..]
                    .iter()
                    .zip(&rj[j + 1..])
                    .filter(|&(&a, &b)| sij * a * b == 1)
                    .count() as u64;
            }
        }
        self.total - balanced
    }

    #[inline]
    pub fn sign(&self, i: usize, j: usize) -> SignClass {
        match self.signs[i * self.n + j] {
            1 => SignClass::Positive,
            -1 => SignClass::Negative,
            _ => SignClass::Zero,
        }
    }

    /// Reclassifies link `(i, j)` after its weight became `new_weight`.
    ///
    /// Only the `N - 2` triads through the link can change class, and only
    /// when its sign changes. Returns `true` if the cached sign changed.
    pub fn apply_link_change(&mut self, i: usize, j: usize, new_weight: f64) -> bool {
        debug_assert!(i != j);
        let n = self.n;
        let new = sgn_eps(new_weight, self.epsilon).value();
        let old = self.signs[i * n + j];
        if new == old {
            return false;
        }
        let ri = &self.signs[i * n..(i + 1) * n];
        let rj = &self.signs[j * n..(j + 1) * n];
        let (mut was, mut now) = (0u64, 0u64);
        for (&a, &b) in ri.iter().zip(rj) {
            let p = a * b;
            was += (old * p == 1) as u64;
            now += (new * p == 1) as u64;
        }
        self.unbalanced = self.unbalanced + was - now;
        self.signs[i * n + j] = new;
        self.signs[j * n + i] = new;
        true
    }

    pub fn unbalanced_count(&self) -> u64 {
        self.unbalanced
    }

    pub fn total_triads(&self) -> u64 {
        self.total
    }

    pub fn unbalanced_fraction(&self) -> f64 {
        self.unbalanced as f64 / self.total as f64
    }

    pub fn is_population_balanced(&self) -> bool {
        self.unbalanced == 0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Checks the cache against `state` and the count against a recount.
    pub fn verify(&self, state: &WeightState) -> Result<()> {
        for (i, j, x) in state.links() {
            if self.signs[i * self.n + j] != sgn_eps(x, self.epsilon).value() {
                return Err(Error::Invariant(format!("stale sign cache at ({i}, {j})")));
            }
        }
        let fresh = self.recount();
        if fresh != self.unbalanced {
            return Err(Error::Invariant(format!(
                "incremental count {} differs from recount {fresh}",
                self.unbalanced
            )));
        }
        Ok(())
    }
}

/// `true` iff every self-loop weight is at least `epsilon`.
pub fn diagonal_nonnegative(state: &WeightState, epsilon: f64) -> Result<bool> {
    state
        .diagonal()
        .map(|d| d.iter().all(|&x| x >= epsilon))
        .ok_or_else(|| Error::contract("diagonal_nonnegative needs the self-loop variant"))
}
