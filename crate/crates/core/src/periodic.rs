//! Eventually periodic subsets of the naturals.

use serde::Serialize;

use crate::constraints::Atom;
use crate::ir::{lcm, Int};
use crate::qe::{QeError, SizeFormula};

/// Largest `B + P` table [`to_periodic_set`] will materialise.
pub const MAX_TABLE: u64 = 1 << 24;

/// `n ∈ S` iff `prefix_bits[n]` for `n < B`, else `period_bits[(n - B) mod P]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PeriodicSet {
    prefix_bound: u64,
    period: u64,
    prefix_bits: Vec<bool>,
    period_bits: Vec<bool>,
}

impl PeriodicSet {
    pub fn empty() -> Self {
        PeriodicSet {
            prefix_bound: 0,
            period: 1,
            prefix_bits: Vec::new(),
            period_bits: vec![false],
        }
    }

    /// Tabulates `member` on `[0, B + P)`, then canonicalises.
    pub fn from_fn(prefix_bound: u64, period: u64, mut member: impl FnMut(u64) -> bool) -> Self {
        assert!(period >= 1, "period must be positive");
        let prefix_bits = (0..prefix_bound).map(&mut member).collect();
        let period_bits = (prefix_bound..prefix_bound + period).map(&mut member).collect();
        PeriodicSet {
            prefix_bound,
            period,
            prefix_bits,
            period_bits,
        }
        .canonical()
    }

    pub fn from_tables(prefix_bits: Vec<bool>, period_bits: Vec<bool>) -> Self {
        assert!(!period_bits.is_empty(), "period must be positive");
        PeriodicSet {
            prefix_bound: prefix_bits.len() as u64,
            period: period_bits.len() as u64,
            prefix_bits,
            period_bits,
        }
    }

    pub fn prefix_bound(&self) -> u64 {
        self.prefix_bound
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn prefix_bits(&self) -> &[bool] {
        &self.prefix_bits
    }

    pub fn period_bits(&self) -> &[bool] {
        &self.period_bits
    }

    pub fn contains(&self, n: u64) -> bool {
        if n < self.prefix_bound {
            self.prefix_bits[n as usize]
        } else {
            self.period_bits[((n - self.prefix_bound) % self.period) as usize]
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.prefix_bits.iter().chain(&self.period_bits).any(|&b| b)
    }

    pub fn min_element(&self) -> Option<u64> {
        self.prefix_bits
            .iter()
            .chain(&self.period_bits)
            .position(|&b| b)
            .map(|k| k as u64)
    }

    /// Minimal period, then minimal prefix for that period.
    pub fn canonical(&self) -> PeriodicSet {
        let p = self.period_bits.len();
        let mut period = self.period_bits.clone();
        for d in 1..=p {
            if p.is_multiple_of(d) && (0..p).all(|k| period[k] == period[(k + d) % p]) {
                period.truncate(d);
                break;
            }
        }
        let mut prefix = self.prefix_bits.clone();
        while let Some(&last) = prefix.last() {
            if last != *period.last().expect("nonempty period") {
                break;
            }
            prefix.pop();
            period.rotate_right(1);
        }
        PeriodicSet::from_tables(prefix, period)
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonical()
    }

    pub fn bits_string(bits: &[bool]) -> String {
        bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// `1 + ⌈|c| / |a|⌉` over comparison atoms `a·n + c`: beyond it every
/// comparison has constant truth value.
fn crossing_bound(f: &SizeFormula) -> u64 {
    let mut bound: Int = 0;
    for a in f.atoms() {
        if let Atom::Le(e) | Atom::Eq(e) = a {
            let coeff = e.coeff(&f.size_param);
            let c = e.constant_term();
            let cross = if coeff == 0 {
                0
            } else {
                crate::ir::ceil_div(c.abs(), coeff.abs())
            };
            bound = bound.max(cross);
        }
    }
    u64::try_from(bound.saturating_add(1)).unwrap_or(u64::MAX)
}

fn modulus_period(f: &SizeFormula) -> Result<u64, QeError> {
    let mut p: Int = 1;
    for a in f.atoms() {
        if let Atom::Div(m, _) | Atom::NotDiv(m, _) = a {
            p = lcm(p, *m)?;
        }
    }
    Ok(u64::try_from(p).unwrap_or(u64::MAX))
}

/// Exact solution set of `f` over `n >= 0`.
pub fn to_periodic_set(f: &SizeFormula) -> Result<PeriodicSet, QeError> {
    if f.disjuncts.is_empty() {
        return Ok(PeriodicSet::empty());
    }
    let b = crossing_bound(f);
    let p = modulus_period(f)?;
    if b.saturating_add(p) > MAX_TABLE {
        return Err(QeError::LimitExceeded {
            what: "periodic table size",
            limit: MAX_TABLE as usize,
        });
    }
    Ok(PeriodicSet::from_fn(b, p, |n| f.holds(n as Int)))
}
