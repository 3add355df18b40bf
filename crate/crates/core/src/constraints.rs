//! Affine constraint systems for array access sites.
//!
//! A site is unsafe at size `n` iff one of its violation systems has an
//! integer solution with that `n`. Each system is a pure conjunction; the
//! disjunctions introduced by `!=` guards and by the underflow/overflow split
//! are kept as separate systems.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::ir::{gcd, AffineExpr, ArithError, Guard, Int, Program, RelOp, RhsTerm, Stmt, Subscript, Var};
use crate::span::SourceSpan;

/// Presburger atom in normal form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// `e <= 0`
    Le(AffineExpr),
    /// `e == 0`
    Eq(AffineExpr),
    /// `m | e`, with `m >= 2`
    Div(Int, AffineExpr),
    /// `!(m | e)`, with `m >= 2`
    NotDiv(Int, AffineExpr),
}

/// Result of simplifying a single atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Simplified {
    True,
    False,
    Atom(Atom),
}

impl Atom {
    pub fn expr(&self) -> &AffineExpr {
        match self {
            Atom::Le(e) | Atom::Eq(e) | Atom::Div(_, e) | Atom::NotDiv(_, e) => e,
        }
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.expr().mentions(v)
    }

    pub fn map_expr<F>(&self, f: F) -> Result<Atom, ArithError>
    where
        F: FnOnce(&AffineExpr) -> Result<AffineExpr, ArithError>,
    {
        Ok(match self {
            Atom::Le(e) => Atom::Le(f(e)?),
            Atom::Eq(e) => Atom::Eq(f(e)?),
            Atom::Div(m, e) => Atom::Div(*m, f(e)?),
            Atom::NotDiv(m, e) => Atom::NotDiv(*m, f(e)?),
        })
    }

    pub fn substitute(&self, v: &Var, r: &AffineExpr) -> Result<Atom, ArithError> {
        self.map_expr(|e| e.substitute(v, r))
    }

    pub fn holds<F>(&self, lookup: F) -> Result<bool, ArithError>
    where
        F: FnMut(&Var) -> Option<Int>,
    {
        Ok(match self {
            Atom::Le(e) => e.eval(lookup)? <= 0,
            Atom::Eq(e) => e.eval(lookup)? == 0,
            Atom::Div(m, e) => e.eval(lookup)?.rem_euclid(*m) == 0,
            Atom::NotDiv(m, e) => e.eval(lookup)?.rem_euclid(*m) != 0,
        })
    }

    /// Gcd tightening, residue reduction and ground evaluation.
    pub fn simplify(&self) -> Result<Simplified, ArithError> {
        match self {
            Atom::Le(e) => {
                let g = e.coeff_gcd();
                if g == 0 {
                    return Ok(truth(e.constant_term() <= 0));
                }
                if g == 1 {
                    return Ok(Simplified::Atom(self.clone()));
                }
                // g·e' + c <= 0  <=>  e' + ceil(c/g) <= 0
                let c = e.constant_term();
                let reduced = AffineExpr::from_parts(
                    e.coeffs().map(|(v, k)| (v.clone(), k / g)),
                    crate::ir::ceil_div(c, g),
                )?;
                Ok(Simplified::Atom(Atom::Le(reduced)))
            }
            Atom::Eq(e) => {
                let g = e.coeff_gcd();
                let c = e.constant_term();
                if g == 0 {
                    return Ok(truth(c == 0));
                }
                if c % g != 0 {
                    return Ok(Simplified::False);
                }
                let lead = e.coeffs().next().map(|(_, k)| k).unwrap_or(1);
                let g = if lead < 0 { -g } else { g };
                let reduced = AffineExpr::from_parts(e.coeffs().map(|(v, k)| (v.clone(), k / g)), c / g)?;
                Ok(Simplified::Atom(Atom::Eq(reduced)))
            }
            Atom::Div(m, e) | Atom::NotDiv(m, e) => {
                let positive = matches!(self, Atom::Div(..));
                let reduced = AffineExpr::from_parts(
                    e.coeffs().map(|(v, k)| (v.clone(), k.rem_euclid(*m))),
                    e.constant_term().rem_euclid(*m),
                )?;
                let c = reduced.constant_term();
                let h = gcd(*m, reduced.coeff_gcd());
                if c % h != 0 {
                    // h divides every variable term but not the constant.
                    return Ok(truth(!positive));
                }
                let g = gcd(h, c);
                let m2 = m / g;
                if m2 == 1 {
                    return Ok(truth(positive));
                }
                let e2 = if g == 1 {
                    reduced
                } else {
                    AffineExpr::from_parts(reduced.coeffs().map(|(v, k)| (v.clone(), k / g)), c / g)?
                };
                if e2.is_constant() {
                    let divides = e2.constant_term() % m2 == 0;
                    return Ok(truth(divides == positive));
                }
                Ok(Simplified::Atom(if positive {
                    Atom::Div(m2, e2)
                } else {
                    Atom::NotDiv(m2, e2)
                }))
            }
        }
    }
}

fn truth(b: bool) -> Simplified {
    if b {
        Simplified::True
    } else {
        Simplified::False
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Le(e) => write!(f, "{e} <= 0"),
            Atom::Eq(e) => write!(f, "{e} == 0"),
            Atom::Div(m, e) => write!(f, "{m} | {e}"),
            Atom::NotDiv(m, e) => write!(f, "{m} !| {e}"),
        }
    }
}

/// Conjunction of atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ConstraintSystem {
    pub atoms: Vec<Atom>,
}

impl ConstraintSystem {
    pub fn new(atoms: Vec<Atom>) -> Self {
        ConstraintSystem { atoms }
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        self.atoms.iter().flat_map(|a| a.expr().vars().cloned()).collect()
    }

    pub fn with(&self, atom: Atom) -> ConstraintSystem {
        let mut out = self.clone();
        out.atoms.push(atom);
        out
    }

    pub fn holds<F>(&self, mut lookup: F) -> Result<bool, ArithError>
    where
        F: FnMut(&Var) -> Option<Int>,
    {
        for a in &self.atoms {
            if !a.holds(&mut lookup)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn holds_at(&self, valuation: &BTreeMap<Var, Int>) -> Result<bool, ArithError> {
        self.holds(|v| valuation.get(v).copied())
    }

    /// Simplifies every atom, sorts and dedups. `None` if some atom is false.
    pub fn simplified(&self) -> Result<Option<ConstraintSystem>, ArithError> {
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            match a.simplify()? {
                Simplified::True => {}
                Simplified::False => return Ok(None),
                Simplified::Atom(a) => atoms.push(a),
            }
        }
        atoms.sort();
        atoms.dedup();
        Ok(Some(ConstraintSystem { atoms }))
    }
}

impl fmt::Display for ConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, a) in self.atoms.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

/// `lhs op rhs` as a disjunction of single-atom alternatives.
pub fn comparison_atoms(lhs: &AffineExpr, op: RelOp, rhs: &AffineExpr) -> Result<Vec<Atom>, ArithError> {
    let d = lhs.sub(rhs)?;
    Ok(match op {
        RelOp::Le => vec![Atom::Le(d)],
        RelOp::Lt => vec![Atom::Le(d.add_constant(1)?)],
        RelOp::Ge => vec![Atom::Le(d.neg()?)],
        RelOp::Gt => vec![Atom::Le(d.neg()?.add_constant(1)?)],
        RelOp::Eq => vec![Atom::Eq(d)],
        RelOp::Ne => vec![Atom::Le(d.add_constant(1)?), Atom::Le(d.neg()?.add_constant(1)?)],
    })
}

/// Stable pre-order index of an access site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct AccessId(pub usize);

impl fmt::Display for AccessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopBound {
    pub counter: Var,
    pub lo: AffineExpr,
    pub hi: AffineExpr,
}

/// An affine guard on the path to a site, already oriented for the arm taken.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathGuard {
    pub lhs: AffineExpr,
    pub op: RelOp,
    pub rhs: AffineExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessSite {
    pub id: AccessId,
    pub array: String,
    pub index: AffineExpr,
    pub span: SourceSpan,
    /// Enclosing loops, outermost first.
    pub loops: Vec<LoopBound>,
    pub guards: Vec<PathGuard>,
    /// Disjunction of reachability conditions; one system unless a `!=`
    /// guard split it.
    pub path_systems: Vec<ConstraintSystem>,
}

impl AccessSite {
    pub fn counters(&self) -> Vec<Var> {
        self.loops.iter().map(|l| l.counter.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    Underflow,
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationSystem {
    pub kind: ViolationKind,
    pub system: ConstraintSystem,
}

struct Extractor {
    loops: Vec<LoopBound>,
    guards: Vec<PathGuard>,
    sites: Vec<AccessSite>,
}

impl Extractor {
    fn walk(&mut self, body: &[Stmt]) -> Result<(), ArithError> {
        for s in body {
            match s {
                Stmt::For { counter, lo, hi, body, .. } => {
                    self.loops.push(LoopBound {
                        counter: counter.clone(),
                        lo: lo.clone(),
                        hi: hi.clone(),
                    });
                    self.walk(body)?;
                    self.loops.pop();
                }
                Stmt::If {
                    guard,
                    then_body,
                    else_body,
                    ..
                } => match guard {
                    Guard::Havoc => {
                        self.walk(then_body)?;
                        self.walk(else_body)?;
                    }
                    Guard::Affine { lhs, op, rhs } => {
                        for (arm, op) in [(then_body, *op), (else_body, op.negate())] {
                            self.guards.push(PathGuard {
                                lhs: lhs.clone(),
                                op,
                                rhs: rhs.clone(),
                            });
                            self.walk(arm)?;
                            self.guards.pop();
                        }
                    }
                },
                Stmt::Access { target, rhs, .. } => {
                    self.site(target)?;
                    for (_, t) in rhs.iter().flatten() {
                        if let RhsTerm::Read(s) = t {
                            self.site(s)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn site(&mut self, sub: &Subscript) -> Result<(), ArithError> {
        let mut base = Vec::new();
        for l in &self.loops {
            let i = AffineExpr::var(l.counter.clone());
            base.push(Atom::Le(l.lo.sub(&i)?));
            base.push(Atom::Le(i.sub(&l.hi)?.add_constant(1)?));
        }
        let mut systems = vec![base];
        for g in &self.guards {
            let alts = comparison_atoms(&g.lhs, g.op, &g.rhs)?;
            let mut next = Vec::with_capacity(systems.len() * alts.len());
            for sys in &systems {
                for a in &alts {
                    let mut s = sys.clone();
                    s.push(a.clone());
                    next.push(s);
                }
            }
            systems = next;
        }
        self.sites.push(AccessSite {
            id: AccessId(self.sites.len()),
            array: sub.array.clone(),
            index: sub.index.clone(),
            span: sub.span,
            loops: self.loops.clone(),
            guards: self.guards.clone(),
            path_systems: systems.into_iter().map(ConstraintSystem::new).collect(),
        });
        Ok(())
    }
}

/// One site per syntactic subscript, in pre-order (a write's target before
/// the reads on its right-hand side).
pub fn extract_access_sites(p: &Program) -> Result<Vec<AccessSite>, ArithError> {
    let mut x = Extractor {
        loops: Vec::new(),
        guards: Vec::new(),
        sites: Vec::new(),
    };
    x.walk(&p.body)?;
    Ok(x.sites)
}

/// Underflow and overflow systems for every reachability disjunct.
pub fn violation_systems(s: &AccessSite, p: &Program) -> Result<Vec<ViolationSystem>, ArithError> {
    let length = &p
        .array(&s.array)
        .expect("validated program declares every accessed array")
        .length;
    let underflow = Atom::Le(s.index.add_constant(1)?);
    let overflow = Atom::Le(length.sub(&s.index)?);
    let mut out = Vec::new();
    for path in &s.path_systems {
        out.push(ViolationSystem {
            kind: ViolationKind::Underflow,
            system: path.with(underflow.clone()),
        });
        out.push(ViolationSystem {
            kind: ViolationKind::Overflow,
            system: path.with(overflow.clone()),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::{load_program, parse_affine};

    fn le(text: &str) -> Atom {
        Atom::Le(parse_affine(text).unwrap())
    }

    fn sites(text: &str) -> (Program, Vec<AccessSite>) {
        let p = load_program(text).unwrap();
        let s = extract_access_sites(&p).unwrap();
        (p, s)
    }

    #[test]
    fn single_loop_site() {
        let (_, s) = sites("param n; array a[n]; for i in 0..n { a[i+1]; }");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].index, parse_affine("i + 1").unwrap());
        assert_eq!(s[0].path_systems, vec![ConstraintSystem::new(vec![le("0 - i"), le("i - n + 1")])]);
    }

    #[test]
    fn havoc_adds_no_atom() {
        let (_, s) = sites("param n; array a[n]; for i in 0..n { if * { a[i]; } else { a[2*i]; } }");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].path_systems, s[1].path_systems);
        assert_eq!(s[0].path_systems[0].atoms.len(), 2);
        assert!(s[0].guards.is_empty());
    }

    #[test]
    fn guard_atom_added() {
        let (_, s) = sites("param n; array a[n]; for i in 0..n { if i >= 1 { a[i-1]; } }");
        assert_eq!(
            s[0].path_systems,
            vec![ConstraintSystem::new(vec![le("-i"), le("i - n + 1"), le("1 - i")])]
        );
    }

    #[test]
    fn else_arm_gets_negated_guard() {
        let (_, s) = sites("param n; array a[n]; for i in 0..n { if i < 3 { a[i]; } else { a[i-3]; } }");
        assert_eq!(s[1].guards[0].op, RelOp::Ge);
        assert_eq!(s[1].path_systems[0].atoms[2], le("3 - i"));
    }

    #[test]
    fn not_equal_splits_into_two_systems() {
        let (_, s) = sites("param n; array a[n]; for i in 0..n { if 2*i != n { a[i]; } }");
        assert_eq!(s[0].path_systems.len(), 2);
        // else-arm of == is also a split
        let (_, s) = sites("param n; array a[n]; for i in 0..n { if i == 0 { a[i]; } else { a[i]; } }");
        assert_eq!(s[0].path_systems.len(), 1);
        assert_eq!(s[1].path_systems.len(), 2);
    }

    #[test]
    fn write_target_precedes_rhs_reads() {
        let (_, s) = sites("param n; array a[n]; array b[n+1]; for i in 0..n { a[i] = b[i+1] + 2 - b[i]; }");
        let arrays: Vec<_> = s.iter().map(|s| (s.id.0, s.array.as_str())).collect();
        assert_eq!(arrays, vec![(0, "a"), (1, "b"), (2, "b")]);
    }

    #[test]
    fn overflow_and_underflow_systems() {
        let (p, s) = sites("param n; array a[n]; for i in 0..n { a[i+1]; a[i]; }");
        let vs = violation_systems(&s[0], &p).unwrap();
        assert_eq!(vs.len(), 2);
        assert_eq!(vs[1].kind, ViolationKind::Overflow);
        assert_eq!(vs[1].system, ConstraintSystem::new(vec![le("-i"), le("i - n + 1"), le("n - i - 1")]));
        let vs = violation_systems(&s[1], &p).unwrap();
        assert_eq!(vs[0].kind, ViolationKind::Underflow);
        assert_eq!(vs[0].system, ConstraintSystem::new(vec![le("-i"), le("i - n + 1"), le("i + 1")]));
    }

    // Brute force over i, n in [0, 50]: the guarded a[i-1] never underflows.
    #[test]
    fn guarded_underflow_system_is_unsatisfiable() {
        let (p, s) = sites("param n; array a[n]; for i in 0..n { if i >= 1 { a[i-1]; } }");
        let vs = violation_systems(&s[0], &p).unwrap();
        let under = &vs[0].system;
        for n in 0..=50 {
            for i in 0..=50 {
                let v: BTreeMap<Var, Int> = [(Var::new("n"), n), (Var::new("i"), i)].into_iter().collect();
                assert!(!under.holds_at(&v).unwrap());
            }
        }
    }

    #[test]
    fn simplify_tightens_and_evaluates() {
        assert_eq!(le("2*i + 3").simplify().unwrap(), Simplified::Atom(le("i + 2")));
        assert_eq!(le("2*i - 3").simplify().unwrap(), Simplified::Atom(le("i - 1")));
        assert_eq!(le("-4").simplify().unwrap(), Simplified::True);
        assert_eq!(
            Atom::Eq(parse_affine("2*i + 1").unwrap()).simplify().unwrap(),
            Simplified::False
        );
        assert_eq!(
            Atom::Div(4, parse_affine("2*i + 1").unwrap()).simplify().unwrap(),
            Simplified::False
        );
        assert_eq!(
            Atom::NotDiv(4, parse_affine("2*i + 1").unwrap()).simplify().unwrap(),
            Simplified::True
        );
        assert_eq!(
            Atom::Div(4, parse_affine("6*i + 2").unwrap()).simplify().unwrap(),
            Simplified::Atom(Atom::Div(2, parse_affine("i + 1").unwrap()))
        );
        assert_eq!(
            Atom::Div(3, parse_affine("3*i + 6").unwrap()).simplify().unwrap(),
            Simplified::True
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn atom() -> impl Strategy<Value = Atom> {
            (0u8..4, -6i128..=6, -6i128..=6, -12i128..=12, 2i128..=6).prop_map(|(kind, a, b, c, m)| {
                let e = AffineExpr::from_parts([(Var::new("x"), a), (Var::new("y"), b)], c).unwrap();
                match kind {
                    0 => Atom::Le(e),
                    1 => Atom::Eq(e),
                    2 => Atom::Div(m, e),
                    _ => Atom::NotDiv(m, e),
                }
            })
        }

        proptest! {
            #[test]
            fn simplification_preserves_truth(a in atom()) {
                let s = a.simplify().unwrap();
                for x in -15..=15 {
                    for y in -15..=15 {
                        let look = |v: &Var| Some(if v.name() == "x" { x } else { y });
                        let want = a.holds(look).unwrap();
                        let got = match &s {
                            Simplified::True => true,
                            Simplified::False => false,
                            Simplified::Atom(b) => b.holds(look).unwrap(),
                        };
                        prop_assert_eq!(want, got, "{} vs {:?} at x={} y={}", a, s, x, y);
                    }
                }
            }
        }
    }
}
