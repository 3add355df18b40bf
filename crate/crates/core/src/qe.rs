//! Integer quantifier elimination over conjunctions of [`Atom`]s.
//!
//! Cooper's method, specialised to conjunctive input and kept free of the
//! global coefficient scaling:
//!
//! 1. An equality `c·x + t = 0` (`c > 0`) is used directly: `c | t`, and
//!    `x := -t / c` in every other atom after multiplying it by `c`.
//! 2. Otherwise let `δ` be the lcm of the periods `m / gcd(m, c)` of the
//!    divisibility atoms `m | c·x + s`. For a lower bound `a·x >= t` the
//!    least admissible `x` is `(t + r) / a` for the one `r in 0..a` with
//!    `a | t + r`. The least solution lies within `δ` of the greatest of
//!    these, so the projection is the disjunction, over every lower bound,
//!    `r` and `k in 0..δ`, of `a | t + r` and `x := (t + r) / a + k`.
//!    With no lower bounds, the upper bounds are satisfied by sufficiently
//!    small `x` and only the residue of `x` mod `δ` matters. The mirror image
//!    is used when the upper bounds yield fewer candidates.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::constraints::{Atom, ConstraintSystem};
use crate::ir::{lcm, AffineExpr, ArithError, Int, Var};

pub const DEFAULT_MAX_DISJUNCTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QeConfig {
    pub max_disjuncts: usize,
}

impl Default for QeConfig {
    fn default() -> Self {
        QeConfig {
            max_disjuncts: DEFAULT_MAX_DISJUNCTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QeError {
    #[error("{what} limit of {limit} exceeded")]
    LimitExceeded { what: &'static str, limit: usize },
    #[error("integer overflow during elimination")]
    Overflow,
}

impl From<ArithError> for QeError {
    fn from(_: ArithError) -> Self {
        QeError::Overflow
    }
}

/// Disjunction of systems over the size parameter only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeFormula {
    pub size_param: Var,
    pub disjuncts: Vec<ConstraintSystem>,
}

impl SizeFormula {
    pub fn empty(size_param: Var) -> Self {
        SizeFormula {
            size_param,
            disjuncts: Vec::new(),
        }
    }

    pub fn holds(&self, n: Int) -> bool {
        let look = |v: &Var| (*v == self.size_param).then_some(n);
        self.disjuncts
            .iter()
            .any(|d| d.holds(look).expect("size formula mentions only the size parameter"))
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> + '_ {
        self.disjuncts.iter().flat_map(|d| d.atoms.iter())
    }

    pub fn union(mut self, other: SizeFormula) -> SizeFormula {
        self.disjuncts.extend(other.disjuncts);
        self.disjuncts.sort();
        self.disjuncts.dedup();
        self
    }
}

/// `atom` with `x := num / d`, multiplied through by `d > 0`. Exact when
/// `d | num`, which the caller asserts separately.
fn substitute_ratio(atom: &Atom, x: &Var, num: &AffineExpr, d: Int) -> Result<Atom, ArithError> {
    let a = atom.expr().coeff(x);
    if a == 0 {
        return Ok(atom.clone());
    }
    let e = num.scale(a)?.add(&atom.expr().without(x).scale(d)?)?;
    let scaled = |m: Int| m.checked_mul(d).ok_or(ArithError::Overflow);
    Ok(match atom {
        Atom::Le(_) => Atom::Le(e),
        Atom::Eq(_) => Atom::Eq(e),
        Atom::Div(m, _) => Atom::Div(scaled(*m)?, e),
        Atom::NotDiv(m, _) => Atom::NotDiv(scaled(*m)?, e),
    })
}

fn substituted(
    rest: &[Atom],
    with_x: &[Atom],
    x: &Var,
    num: &AffineExpr,
    d: Int,
) -> Result<Option<ConstraintSystem>, ArithError> {
    let mut atoms = rest.to_vec();
    for a in with_x {
        atoms.push(substitute_ratio(a, x, num, d)?);
    }
    if d > 1 {
        atoms.push(Atom::Div(d, num.clone()));
    }
    ConstraintSystem::new(atoms).simplified()
}

/// A bound `coeff·x >= t` (or `<= t`).
struct Bound {
    coeff: Int,
    t: AffineExpr,
}

/// Projects `∃x. sys` into a disjunction of systems without `x`.
pub fn eliminate_variable(sys: &ConstraintSystem, x: &Var, cfg: &QeConfig) -> Result<Vec<ConstraintSystem>, QeError> {
    let Some(sys) = sys.simplified()? else {
        return Ok(Vec::new());
    };
    let (with_x, rest): (Vec<Atom>, Vec<Atom>) = sys.atoms.into_iter().partition(|a| a.mentions(x));
    if with_x.is_empty() {
        return Ok(vec![ConstraintSystem::new(rest)]);
    }

    if let Some(pos) = with_x.iter().position(|a| matches!(a, Atom::Eq(_))) {
        let mut others = with_x;
        let eq = others.swap_remove(pos);
        let c = eq.expr().coeff(x);
        // c·x + t = 0  <=>  |c|·x = -sign(c)·t
        let t = eq.expr().without(x);
        let num = if c > 0 { t.neg()? } else { t };
        return Ok(substituted(&rest, &others, x, &num, c.abs())?.into_iter().collect());
    }

    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    let mut divs = Vec::new();
    let mut delta: Int = 1;
    for a in &with_x {
        let c = a.expr().coeff(x);
        match a {
            // c·x + w <= 0 with c < 0  <=>  |c|·x >= w
            Atom::Le(e) if c < 0 => lowers.push(Bound {
                coeff: -c,
                t: e.without(x),
            }),
            // c·x + w <= 0 with c > 0  <=>  c·x <= -w
            Atom::Le(e) => uppers.push(Bound {
                coeff: c,
                t: e.without(x).neg()?,
            }),
            Atom::Div(m, _) | Atom::NotDiv(m, _) => {
                delta = lcm(delta, m / crate::ir::gcd(*m, c))?;
                divs.push(a.clone());
            }
            Atom::Eq(_) => unreachable!("equalities handled above"),
        }
    }

    let cost = |bs: &[Bound]| -> Int {
        if bs.is_empty() {
            1
        } else {
            bs.iter().map(|b| b.coeff).sum()
        }
    };
    let use_lower = cost(&lowers) <= cost(&uppers);
    let (bounds, step): (&[Bound], Int) = if use_lower { (&lowers, 1) } else { (&uppers, -1) };
    let limit = Int::try_from(cfg.max_disjuncts).unwrap_or(Int::MAX);
    if cost(bounds).saturating_mul(delta) > limit {
        return Err(QeError::LimitExceeded {
            what: "disjunct",
            limit: cfg.max_disjuncts,
        });
    }

    let mut out = BTreeSet::new();
    if bounds.is_empty() {
        // x unbounded in the chosen direction: only residues matter.
        for k in 0..delta {
            if let Some(s) = substituted(&rest, &divs, x, &AffineExpr::constant(k), 1)? {
                out.insert(s);
            }
        }
    } else {
        for b in bounds {
            for r in 0..b.coeff {
                // num / coeff is the extreme admissible x for this bound
                let base = b.t.add_constant(step * r)?;
                for k in 0..delta {
                    let num = base.add_constant(step * k * b.coeff)?;
                    if let Some(s) = substituted(&rest, &with_x, x, &num, b.coeff)? {
                        out.insert(s);
                    }
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// Eliminates `counters` (given outermost first) innermost-first.
pub fn project_to_size(
    systems: &[ConstraintSystem],
    counters: &[Var],
    size_param: &Var,
    cfg: &QeConfig,
) -> Result<SizeFormula, QeError> {
    let mut current: BTreeSet<ConstraintSystem> = BTreeSet::new();
    for s in systems {
        if let Some(s) = s.simplified()? {
            current.insert(s);
        }
    }
    for x in counters.iter().rev() {
        let mut next = BTreeSet::new();
        for s in &current {
            for d in eliminate_variable(s, x, cfg)? {
                next.insert(d);
                if next.len() > cfg.max_disjuncts {
                    return Err(QeError::LimitExceeded {
                        what: "disjunct",
                        limit: cfg.max_disjuncts,
                    });
                }
            }
        }
        current = next;
    }
    debug_assert!(current.iter().all(|s| s.variables().iter().all(|v| v == size_param)));
    Ok(SizeFormula {
        size_param: size_param.clone(),
        disjuncts: current.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::parse_affine;
    use std::collections::BTreeMap;

    fn le(text: &str) -> Atom {
        Atom::Le(parse_affine(text).unwrap())
    }

    fn sys(atoms: &[&str]) -> ConstraintSystem {
        ConstraintSystem::new(atoms.iter().map(|a| le(a)).collect())
    }

    fn n() -> Var {
        Var::new("n")
    }

    fn projected_holds(ds: &[ConstraintSystem], nv: Int) -> bool {
        ds.iter().any(|d| d.holds(|v| (*v == n()).then_some(nv)).unwrap())
    }

    fn brute(s: &ConstraintSystem, x: &str, nv: Int, range: std::ops::RangeInclusive<Int>) -> bool {
        range.into_iter().any(|xv| {
            let val: BTreeMap<Var, Int> = [(n(), nv), (Var::new(x), xv)].into_iter().collect();
            s.holds_at(&val).unwrap()
        })
    }

    // ∃i. 0 <= i <= n-1 ∧ n <= i+1   oracle: solvable iff n >= 1.
    #[test]
    fn tail_overflow_projection() {
        let s = sys(&["-i", "i - n + 1", "n - i - 1"]);
        let ds = eliminate_variable(&s, &Var::new("i"), &QeConfig::default()).unwrap();
        for nv in 0..=200 {
            assert_eq!(projected_holds(&ds, nv), brute(&s, "i", nv, 0..=200));
            assert_eq!(projected_holds(&ds, nv), nv >= 1);
        }
    }

    // ∃i. 0 <= i <= n-1 ∧ n <= 2i ∧ 2i <= n oracle: n even and >= 2.
    #[test]
    fn even_projection_introduces_divisibility() {
        let s = sys(&["-i", "i - n + 1", "n - 2*i", "2*i - n"]);
        let ds = eliminate_variable(&s, &Var::new("i"), &QeConfig::default()).unwrap();
        assert!(ds.iter().any(|d| d.atoms.iter().any(|a| matches!(a, Atom::Div(2, _)))));
        for nv in 0..=200 {
            assert_eq!(projected_holds(&ds, nv), brute(&s, "i", nv, 0..=200));
            assert_eq!(projected_holds(&ds, nv), nv >= 2 && nv % 2 == 0);
        }
    }

    #[test]
    fn contradictory_bounds_project_to_nothing() {
        let s = sys(&["-i", "i + 1"]);
        let ds = eliminate_variable(&s, &Var::new("i"), &QeConfig::default()).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn equality_substitution() {
        let s = ConstraintSystem::new(vec![
            Atom::Eq(parse_affine("3*i - n").unwrap()),
            le("-i"),
            le("i - 4"),
        ]);
        let ds = eliminate_variable(&s, &Var::new("i"), &QeConfig::default()).unwrap();
        assert_eq!(ds.len(), 1);
        for nv in -20..=40 {
            assert_eq!(projected_holds(&ds, nv), nv % 3 == 0 && (0..=12).contains(&nv));
        }
    }

    #[test]
    fn unbounded_below_uses_residues() {
        // x <= n ∧ 3 | x + n ∧ 2 !| x : always satisfiable
        let s = ConstraintSystem::new(vec![
            le("x - n"),
            Atom::Div(3, parse_affine("x + n").unwrap()),
            Atom::NotDiv(2, parse_affine("x").unwrap()),
        ]);
        let ds = eliminate_variable(&s, &Var::new("x"), &QeConfig::default()).unwrap();
        for nv in -10..=10 {
            assert!(projected_holds(&ds, nv));
        }
        // 2 | x ∧ 2 !| x : never
        let s = ConstraintSystem::new(vec![
            le("x - n"),
            Atom::Div(2, parse_affine("x").unwrap()),
            Atom::NotDiv(2, parse_affine("x").unwrap()),
        ]);
        let ds = eliminate_variable(&s, &Var::new("x"), &QeConfig::default()).unwrap();
        assert!(ds.iter().all(|d| !projected_holds(std::slice::from_ref(d), 0)));
    }

    #[test]
    fn variable_not_present_is_identity() {
        let s = sys(&["n - 3"]);
        let ds = eliminate_variable(&s, &Var::new("i"), &QeConfig::default()).unwrap();
        assert_eq!(ds, vec![s]);
    }

    #[test]
    fn nested_triangular_loop_projection() {
        // a[i+j], i in 0..n, j in 0..i, length n: overflow system.
        let s = sys(&["-i", "i - n + 1", "-j", "j - i + 1", "n - i - j"]);
        let f = project_to_size(std::slice::from_ref(&s), &[Var::new("i"), Var::new("j")], &n(), &QeConfig::default())
            .unwrap();
        for nv in 0..=100 {
            let oracle = (0..=100).any(|i| {
                (0..=100).any(|j| {
                    let val: BTreeMap<Var, Int> =
                        [(n(), nv), (Var::new("i"), i), (Var::new("j"), j)].into_iter().collect();
                    s.holds_at(&val).unwrap()
                })
            });
            assert_eq!(f.holds(nv), oracle, "n = {nv}");
        }
        // first unsafe size is 3: max index 2n-3 >= n
        assert!(!f.holds(2) && f.holds(3));
    }

    #[test]
    fn disjunct_limit_is_a_hard_error() {
        let s = ConstraintSystem::new(vec![
            le("-x"),
            le("1 - x + n"),
            le("x - 100"),
            Atom::Div(7, parse_affine("x + n").unwrap()),
            Atom::Div(11, parse_affine("x").unwrap()),
        ]);
        let cfg = QeConfig { max_disjuncts: 20 };
        let r = eliminate_variable(&s, &Var::new("x"), &cfg);
        assert!(matches!(r, Err(QeError::LimitExceeded { limit: 20, .. })));
    }
}
