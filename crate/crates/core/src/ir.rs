//! Fragment syntax and the affine-expression algebra.
//!
//! Every index, loop bound, guard and array length in an analyzed program is
//! an [`AffineExpr`] over the single size parameter and the loop counters in
//! scope. Arithmetic is exact: coefficients are `i128` and every operation is
//! overflow-checked, so a result is either correct or an [`ArithError`].

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::span::SourceSpan;

/// Scalar type for all affine arithmetic.
pub type Int = i128;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("integer overflow in affine arithmetic")]
    Overflow,
    #[error("unbound variable `{0}`")]
    UnboundVariable(Var),
}

/// Variable identifier: the size parameter or a loop counter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Var(String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Var(name.into())
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// Integer-linear expression `Σ coeff·var + constant`.
///
/// No stored coefficient is ever zero; constructors and operations drop
/// cancelled terms so structural equality coincides with semantic equality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AffineExpr {
    coeffs: BTreeMap<Var, Int>,
    constant: Int,
}

impl AffineExpr {
    pub fn constant(c: Int) -> Self {
        AffineExpr {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(v: impl Into<Var>) -> Self {
        Self::term(1, v)
    }

    pub fn term(coeff: Int, v: impl Into<Var>) -> Self {
        let mut coeffs = BTreeMap::new();
        if coeff != 0 {
            coeffs.insert(v.into(), coeff);
        }
        AffineExpr {
            coeffs,
            constant: 0,
        }
    }

    /// Builds an expression from raw parts, dropping zero coefficients.
    pub fn from_parts(coeffs: impl IntoIterator<Item = (Var, Int)>, constant: Int) -> Result<Self, ArithError> {
        let mut e = AffineExpr::constant(constant);
        for (v, c) in coeffs {
            e.add_term(v, c)?;
        }
        Ok(e)
    }

    pub fn constant_term(&self) -> Int {
        self.constant
    }

    pub fn coeff(&self, v: &Var) -> Int {
        self.coeffs.get(v).copied().unwrap_or(0)
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Var, Int)> + '_ {
        self.coeffs.iter().map(|(v, &c)| (v, c))
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> + '_ {
        self.coeffs.keys()
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.coeffs.contains_key(v)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn add_term(&mut self, v: Var, c: Int) -> Result<(), ArithError> {
        if c == 0 {
            return Ok(());
        }
        let slot = self.coeffs.entry(v).or_insert(0);
        *slot = slot.checked_add(c).ok_or(ArithError::Overflow)?;
        if *slot == 0 {
            self.coeffs.retain(|_, c| *c != 0);
        }
        Ok(())
    }

    pub fn add(&self, other: &AffineExpr) -> Result<AffineExpr, ArithError> {
        let mut out = self.clone();
        out.constant = out
            .constant
            .checked_add(other.constant)
            .ok_or(ArithError::Overflow)?;
        for (v, &c) in &other.coeffs {
            out.add_term(v.clone(), c)?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &AffineExpr) -> Result<AffineExpr, ArithError> {
        self.add(&other.neg()?)
    }

    pub fn neg(&self) -> Result<AffineExpr, ArithError> {
        self.scale(-1)
    }

    pub fn scale(&self, k: Int) -> Result<AffineExpr, ArithError> {
        if k == 0 {
            return Ok(AffineExpr::default());
        }
        let mut coeffs = BTreeMap::new();
        for (v, &c) in &self.coeffs {
            coeffs.insert(v.clone(), c.checked_mul(k).ok_or(ArithError::Overflow)?);
        }
        Ok(AffineExpr {
            coeffs,
            constant: self.constant.checked_mul(k).ok_or(ArithError::Overflow)?,
        })
    }

    pub fn add_constant(&self, k: Int) -> Result<AffineExpr, ArithError> {
        let mut out = self.clone();
        out.constant = out.constant.checked_add(k).ok_or(ArithError::Overflow)?;
        Ok(out)
    }

    /// Expression with `v`'s term removed.
    pub fn without(&self, v: &Var) -> AffineExpr {
        let mut out = self.clone();
        out.coeffs.remove(v);
        out
    }

    /// Evaluates the expression under a valuation.
    pub fn eval<F>(&self, mut lookup: F) -> Result<Int, ArithError>
    where
        F: FnMut(&Var) -> Option<Int>,
    {
        let mut acc = self.constant;
        for (v, &c) in &self.coeffs {
            let x = lookup(v).ok_or_else(|| ArithError::UnboundVariable(v.clone()))?;
            let t = c.checked_mul(x).ok_or(ArithError::Overflow)?;
            acc = acc.checked_add(t).ok_or(ArithError::Overflow)?;
        }
        Ok(acc)
    }

    pub fn eval_map(&self, valuation: &BTreeMap<Var, Int>) -> Result<Int, ArithError> {
        self.eval(|v| valuation.get(v).copied())
    }

    /// Replaces `var` by `replacement`.
    pub fn substitute(&self, var: &Var, replacement: &AffineExpr) -> Result<AffineExpr, ArithError> {
        match self.coeffs.get(var) {
            None => Ok(self.clone()),
            Some(&c) => self.without(var).add(&replacement.scale(c)?),
        }
    }

    /// Gcd of all variable coefficients (0 for a constant expression).
    pub fn coeff_gcd(&self) -> Int {
        self.coeffs.values().fold(0, |g, &c| gcd(g, c))
    }
}

impl fmt::Display for AffineExpr {
    /// Prints in the concrete syntax accepted by the parser, e.g. `2*i + n - 3`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, &c) in &self.coeffs {
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    f.write_str("-")?;
                }
            } else if c < 0 {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if mag != 1 {
                write!(f, "{mag}*")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        let k = self.constant;
        if first {
            write!(f, "{k}")
        } else if k > 0 {
            write!(f, " + {k}")
        } else if k < 0 {
            write!(f, " - {}", k.unsigned_abs())
        } else {
            Ok(())
        }
    }
}

pub fn gcd(a: Int, b: Int) -> Int {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: Int, b: Int) -> Result<Int, ArithError> {
    if a == 0 || b == 0 {
        return Ok(0);
    }
    (a.abs() / gcd(a, b))
        .checked_mul(b.abs())
        .ok_or(ArithError::Overflow)
}

pub fn floor_div(a: Int, b: Int) -> Int {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

pub fn ceil_div(a: Int, b: Int) -> Int {
    -floor_div(-a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RelOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelOp {
    pub fn holds(self, lhs: Int, rhs: Int) -> bool {
        match self {
            RelOp::Eq => lhs == rhs,
            RelOp::Ne => lhs != rhs,
            RelOp::Lt => lhs < rhs,
            RelOp::Le => lhs <= rhs,
            RelOp::Gt => lhs > rhs,
            RelOp::Ge => lhs >= rhs,
        }
    }

    pub fn negate(self) -> RelOp {
        match self {
            RelOp::Eq => RelOp::Ne,
            RelOp::Ne => RelOp::Eq,
            RelOp::Lt => RelOp::Ge,
            RelOp::Le => RelOp::Gt,
            RelOp::Gt => RelOp::Le,
            RelOp::Ge => RelOp::Lt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Affine {
        lhs: AffineExpr,
        op: RelOp,
        rhs: AffineExpr,
    },
    /// Nondeterministic branch, written `*`.
    Havoc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayDecl {
    pub name: String,
    pub length: AffineExpr,
    pub span: SourceSpan,
}

/// One array subscript `name[index]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscript {
    pub array: String,
    pub index: AffineExpr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhsTerm {
    Literal(Int),
    Read(Subscript),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    For {
        counter: Var,
        lo: AffineExpr,
        hi: AffineExpr,
        body: Vec<Stmt>,
        span: SourceSpan,
    },
    If {
        guard: Guard,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        span: SourceSpan,
    },
    /// A read `a[e];` or a write `a[e] = rhs;`.
    Access {
        target: Subscript,
        rhs: Option<Vec<(Sign, RhsTerm)>>,
        span: SourceSpan,
    },
}

/// A validated fragment program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub size_param: Var,
    pub arrays: Vec<ArrayDecl>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.arrays.iter().find(|a| a.name == name)
    }

    /// Copy with every source span reset, for structural comparison.
    pub fn erase_spans(&self) -> Program {
        fn stmts(body: &[Stmt]) -> Vec<Stmt> {
            body.iter().map(stmt).collect()
        }
        fn sub(s: &Subscript) -> Subscript {
            Subscript {
                span: SourceSpan::default(),
                ..s.clone()
            }
        }
        fn stmt(s: &Stmt) -> Stmt {
            match s {
                Stmt::For {
                    counter, lo, hi, body, ..
                } => Stmt::For {
                    counter: counter.clone(),
                    lo: lo.clone(),
                    hi: hi.clone(),
                    body: stmts(body),
                    span: SourceSpan::default(),
                },
                Stmt::If {
                    guard,
                    then_body,
                    else_body,
                    ..
                } => Stmt::If {
                    guard: guard.clone(),
                    then_body: stmts(then_body),
                    else_body: stmts(else_body),
                    span: SourceSpan::default(),
                },
                Stmt::Access { target, rhs, .. } => Stmt::Access {
                    target: sub(target),
                    rhs: rhs.as_ref().map(|terms| {
                        terms
                            .iter()
                            .map(|(sign, t)| {
                                let t = match t {
                                    RhsTerm::Literal(k) => RhsTerm::Literal(*k),
                                    RhsTerm::Read(s) => RhsTerm::Read(sub(s)),
                                };
                                (*sign, t)
                            })
                            .collect()
                    }),
                    span: SourceSpan::default(),
                },
            }
        }
        Program {
            size_param: self.size_param.clone(),
            arrays: self
                .arrays
                .iter()
                .map(|a| ArrayDecl {
                    span: SourceSpan::default(),
                    ..a.clone()
                })
                .collect(),
            body: stmts(&self.body),
        }
    }

    /// Renders the program in the textual `.ctm` syntax.
    pub fn pretty(&self) -> String {
        let mut out = format!("param {};\n", self.size_param);
        for a in &self.arrays {
            out.push_str(&format!("array {}[{}];\n", a.name, a.length));
        }
        for s in &self.body {
            pretty_stmt(s, 0, &mut out);
        }
        out
    }
}

fn pretty_body(body: &[Stmt], depth: usize, out: &mut String) {
    for s in body {
        pretty_stmt(s, depth + 1, out);
    }
}

fn pretty_stmt(s: &Stmt, depth: usize, out: &mut String) {
    let pad = "    ".repeat(depth);
    match s {
        Stmt::For {
            counter, lo, hi, body, ..
        } => {
            out.push_str(&format!("{pad}for {counter} in {lo}..{hi} {{\n"));
            pretty_body(body, depth, out);
            out.push_str(&format!("{pad}}}\n"));
        }
        Stmt::If {
            guard,
            then_body,
            else_body,
            ..
        } => {
            let cond = match guard {
                Guard::Havoc => "*".to_string(),
                Guard::Affine { lhs, op, rhs } => format!("{lhs} {} {rhs}", op.symbol()),
            };
            out.push_str(&format!("{pad}if {cond} {{\n"));
            pretty_body(then_body, depth, out);
            if else_body.is_empty() {
                out.push_str(&format!("{pad}}}\n"));
            } else {
                out.push_str(&format!("{pad}}} else {{\n"));
                pretty_body(else_body, depth, out);
                out.push_str(&format!("{pad}}}\n"));
            }
        }
        Stmt::Access { target, rhs, .. } => {
            out.push_str(&format!("{pad}{}[{}]", target.array, target.index));
            if let Some(terms) = rhs {
                out.push_str(" =");
                for (k, (sign, t)) in terms.iter().enumerate() {
                    match (k, sign) {
                        (0, Sign::Plus) => out.push(' '),
                        (0, Sign::Minus) => out.push_str(" -"),
                        (_, Sign::Plus) => out.push_str(" + "),
                        (_, Sign::Minus) => out.push_str(" - "),
                    }
                    match t {
                        RhsTerm::Literal(k) => out.push_str(&k.to_string()),
                        RhsTerm::Read(s) => out.push_str(&format!("{}[{}]", s.array, s.index)),
                    }
                }
            }
            out.push_str(";\n");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(coeffs: &[(&str, Int)], k: Int) -> AffineExpr {
        AffineExpr::from_parts(coeffs.iter().map(|&(v, c)| (Var::new(v), c)), k).unwrap()
    }

    fn val(pairs: &[(&str, Int)]) -> BTreeMap<Var, Int> {
        pairs.iter().map(|&(v, x)| (Var::new(v), x)).collect()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(e(&[("i", 2), ("n", 1)], -3).eval_map(&val(&[("i", 4), ("n", 5)])), Ok(10));
        assert_eq!(e(&[], 7).eval_map(&val(&[])), Ok(7));
        assert_eq!(e(&[("i", -1), ("n", 1)], -1).eval_map(&val(&[("i", 0), ("n", 1)])), Ok(0));
    }

    #[test]
    fn eval_unbound_variable() {
        let r = e(&[("j", 1)], 0).eval_map(&val(&[("i", 1)]));
        assert_eq!(r, Err(ArithError::UnboundVariable(Var::new("j"))));
    }

    #[test]
    fn eval_overflow_is_reported() {
        let big = e(&[("i", Int::MAX)], 0);
        assert_eq!(big.eval_map(&val(&[("i", 2)])), Err(ArithError::Overflow));
    }

    #[test]
    fn substitute_examples() {
        let i = Var::new("i");
        let r = e(&[("i", 1)], 1).substitute(&i, &e(&[("n", 1)], -1)).unwrap();
        assert_eq!(r, e(&[("n", 1)], 0));
        let r = e(&[("i", 2), ("n", 1)], 0).substitute(&i, &e(&[], 0)).unwrap();
        assert_eq!(r, e(&[("n", 1)], 0));
        let r = e(&[("j", 1)], 1).substitute(&Var::new("j"), &e(&[("i", 2)], 0)).unwrap();
        assert_eq!(r, e(&[("i", 2)], 1));
    }

    #[test]
    fn cancellation_drops_zero_coefficients() {
        let a = e(&[("i", 3), ("n", 1)], 0);
        let b = e(&[("i", 3)], 0);
        let d = a.sub(&b).unwrap();
        assert_eq!(d.coeffs().count(), 1);
        assert!(!d.mentions(&Var::new("i")));
    }

    #[test]
    fn display_is_parseable_shape() {
        assert_eq!(e(&[("i", 2), ("n", 1)], -3).to_string(), "2*i + n - 3");
        assert_eq!(e(&[("i", -1)], 0).to_string(), "-i");
        assert_eq!(e(&[], -4).to_string(), "-4");
        assert_eq!(e(&[("i", 1), ("n", -2)], 5).to_string(), "i - 2*n + 5");
    }

    #[test]
    fn integer_division_rounding() {
        assert_eq!(floor_div(7, 2), 3);
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(floor_div(7, -2), -4);
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(ceil_div(-7, 2), -3);
        assert_eq!(lcm(4, 6), Ok(12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const VARS: [&str; 3] = ["n", "i", "j"];

        fn expr() -> impl Strategy<Value = AffineExpr> {
            (proptest::collection::vec(-5i128..=5, 3), -5i128..=5).prop_map(|(cs, k)| {
                AffineExpr::from_parts(VARS.iter().zip(cs).map(|(v, c)| (Var::new(*v), c)), k).unwrap()
            })
        }

        proptest! {
            #[test]
            fn substitution_commutes_with_evaluation(
                e in expr(),
                r in expr(),
                which in 0usize..3,
                vals in proptest::collection::vec(-20i128..=20, 3),
            ) {
                let x = Var::new(VARS[which]);
                let v: BTreeMap<Var, Int> =
                    VARS.iter().zip(vals).map(|(n, x)| (Var::new(*n), x)).collect();
                let lhs = e.substitute(&x, &r).unwrap().eval_map(&v).unwrap();
                let mut v2 = v.clone();
                v2.insert(x.clone(), r.eval_map(&v).unwrap());
                prop_assert_eq!(lhs, e.eval_map(&v2).unwrap());
            }

            #[test]
            fn no_zero_coefficients_survive(a in expr(), b in expr(), k in -3i128..=3) {
                let c = a.add(&b.scale(k).unwrap()).unwrap();
                prop_assert!(c.coeffs().all(|(_, c)| c != 0));
            }
        }
    }
}
