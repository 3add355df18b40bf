//! Fragment validation: lowers a parsed [`Ast`] into a [`Program`].

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{self, Ast, AstRhsTerm, AstStmt, AstSubscript, Cond, Decl, Expr, ExprKind, ParseError};
use crate::ir::{AffineExpr, ArithError, ArrayDecl, Guard, Program, RhsTerm, Stmt, Subscript, Var};
use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FragmentErrorCode {
    NonAffineIndex,
    MutableScalar,
    ContentDependentAffineGuard,
    ContentDependentBound,
    NegativeLengthPossible,
    UnknownArray,
    UnboundVariable,
    DuplicateName,
    MultipleSizeParams,
    MissingSizeParam,
    ArithmeticOverflow,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{message}")]
pub struct FragmentError {
    pub code: FragmentErrorCode,
    pub span: SourceSpan,
    pub message: String,
}

impl FragmentError {
    fn new(code: FragmentErrorCode, span: SourceSpan, message: impl Into<String>) -> Self {
        FragmentError {
            code,
            span,
            message: message.into(),
        }
    }
}

/// Either stage of turning text into a [`Program`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("parse error")]
    Parse(Vec<ParseError>),
    #[error("program is outside the analyzable fragment")]
    Fragment(Vec<FragmentError>),
}

impl LoadError {
    /// One `line:col: error[Code]: message` line per diagnostic.
    pub fn diagnostics(&self) -> Vec<(SourceSpan, String, String)> {
        match self {
            LoadError::Parse(errs) => errs
                .iter()
                .map(|e| (e.span, format!("{:?}", e.code), e.to_string()))
                .collect(),
            LoadError::Fragment(errs) => errs
                .iter()
                .map(|e| (e.span, format!("{:?}", e.code), e.message.clone()))
                .collect(),
        }
    }
}

/// Parses and validates program text.
pub fn load_program(text: &str) -> Result<Program, LoadError> {
    let ast = frontend::parse(text).map_err(LoadError::Parse)?;
    validate_program(&ast).map_err(LoadError::Fragment)
}

/// Parses a standalone affine expression; every name becomes a variable.
pub fn parse_affine(text: &str) -> Result<AffineExpr, LoadError> {
    let e = frontend::parse_expr(text).map_err(|e| LoadError::Parse(vec![e]))?;
    let scope = Scope::Any;
    lower(&e, &scope, FragmentErrorCode::NonAffineIndex).map_err(|e| LoadError::Fragment(vec![e]))
}

enum Scope<'a> {
    Any,
    Names { size: Option<&'a str>, counters: &'a [String], arrays: &'a [String] },
}

impl Scope<'_> {
    fn resolve(&self, name: &str, span: SourceSpan) -> Result<Var, FragmentError> {
        match self {
            Scope::Any => Ok(Var::new(name)),
            Scope::Names { size, counters, arrays } => {
                if *size == Some(name) || counters.iter().any(|c| c == name) {
                    Ok(Var::new(name))
                } else if arrays.iter().any(|a| a == name) {
                    Err(FragmentError::new(
                        FragmentErrorCode::UnboundVariable,
                        span,
                        format!("`{name}` is an array and cannot be used as a scalar"),
                    ))
                } else {
                    Err(FragmentError::new(
                        FragmentErrorCode::UnboundVariable,
                        span,
                        format!("`{name}` is neither the size parameter nor an enclosing loop counter"),
                    ))
                }
            }
        }
    }
}

fn overflow(span: SourceSpan) -> impl Fn(ArithError) -> FragmentError {
    move |_| FragmentError::new(FragmentErrorCode::ArithmeticOverflow, span, "integer overflow in constant folding")
}

fn lower(e: &Expr, scope: &Scope<'_>, on_read: FragmentErrorCode) -> Result<AffineExpr, FragmentError> {
    let ov = overflow(e.span);
    match &e.kind {
        ExprKind::Int(k) => Ok(AffineExpr::constant(*k)),
        ExprKind::Name(n) => Ok(AffineExpr::var(scope.resolve(n, e.span)?)),
        ExprKind::Read(sub) => {
            let what = match on_read {
                FragmentErrorCode::ContentDependentAffineGuard => {
                    "guards may not depend on array contents; write `*` instead"
                }
                FragmentErrorCode::ContentDependentBound => "loop bounds and lengths may not read arrays",
                _ => "indices must be affine in counters and the size parameter; indirect subscripts are not allowed",
            };
            Err(FragmentError::new(on_read, sub.span, what))
        }
        ExprKind::Neg(a) => lower(a, scope, on_read)?.neg().map_err(ov),
        ExprKind::Add(a, b) => lower(a, scope, on_read)?
            .add(&lower(b, scope, on_read)?)
            .map_err(ov),
        ExprKind::Sub(a, b) => lower(a, scope, on_read)?
            .sub(&lower(b, scope, on_read)?)
            .map_err(ov),
        ExprKind::Mul(a, b) => {
            let la = lower(a, scope, on_read)?;
            let lb = lower(b, scope, on_read)?;
            if la.is_constant() {
                lb.scale(la.constant_term()).map_err(ov)
            } else {
                la.scale(lb.constant_term()).map_err(ov)
            }
        }
    }
}

struct Validator {
    size: Option<String>,
    arrays: Vec<String>,
    counters: Vec<String>,
    errors: Vec<FragmentError>,
}

impl Validator {
    fn scope(&self) -> Scope<'_> {
        Scope::Names {
            size: self.size.as_deref(),
            counters: &self.counters,
            arrays: &self.arrays,
        }
    }

    fn lower(&mut self, e: &Expr, on_read: FragmentErrorCode) -> Option<AffineExpr> {
        match lower(e, &self.scope(), on_read) {
            Ok(a) => Some(a),
            Err(err) => {
                self.errors.push(err);
                None
            }
        }
    }

    fn subscript(&mut self, s: &AstSubscript) -> Option<Subscript> {
        if !self.arrays.contains(&s.array) {
            self.errors.push(FragmentError::new(
                FragmentErrorCode::UnknownArray,
                s.span,
                format!("`{}` is not a declared array", s.array),
            ));
            return None;
        }
        let index = self.lower(&s.index, FragmentErrorCode::NonAffineIndex)?;
        Some(Subscript {
            array: s.array.clone(),
            index,
            span: s.span,
        })
    }

    fn body(&mut self, stmts: &[AstStmt]) -> Vec<Stmt> {
        stmts.iter().filter_map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &AstStmt) -> Option<Stmt> {
        match s {
            AstStmt::For {
                counter,
                counter_span,
                lo,
                hi,
                body,
                span,
            } => {
                let lo = self.lower(lo, FragmentErrorCode::ContentDependentBound);
                let hi = self.lower(hi, FragmentErrorCode::ContentDependentBound);
                let clash = self.size.as_deref() == Some(counter.as_str())
                    || self.arrays.contains(counter)
                    || self.counters.contains(counter);
                if clash {
                    self.errors.push(FragmentError::new(
                        FragmentErrorCode::DuplicateName,
                        *counter_span,
                        format!("loop counter `{counter}` shadows an existing name"),
                    ));
                }
                self.counters.push(counter.clone());
                let body = self.body(body);
                self.counters.pop();
                Some(Stmt::For {
                    counter: Var::new(counter.clone()),
                    lo: lo?,
                    hi: hi?,
                    body,
                    span: *span,
                })
            }
            AstStmt::If {
                cond,
                then_body,
                else_body,
                span,
            } => {
                let guard = match cond {
                    Cond::Havoc { .. } => Some(Guard::Havoc),
                    Cond::Compare { lhs, op, rhs, .. } => {
                        let l = self.lower(lhs, FragmentErrorCode::ContentDependentAffineGuard);
                        let r = self.lower(rhs, FragmentErrorCode::ContentDependentAffineGuard);
                        match (l, r) {
                            (Some(lhs), Some(rhs)) => Some(Guard::Affine { lhs, op: *op, rhs }),
                            _ => None,
                        }
                    }
                };
                let then_body = self.body(then_body);
                let else_body = self.body(else_body);
                Some(Stmt::If {
                    guard: guard?,
                    then_body,
                    else_body,
                    span: *span,
                })
            }
            AstStmt::Access { target, rhs, span } => {
                let target = self.subscript(target);
                let rhs = match rhs {
                    None => Some(None),
                    Some(terms) => {
                        let mut out = Vec::new();
                        let mut ok = true;
                        for (sign, t) in terms {
                            match t {
                                AstRhsTerm::Literal(k) => out.push((*sign, RhsTerm::Literal(*k))),
                                AstRhsTerm::Read(s) => match self.subscript(s) {
                                    Some(s) => out.push((*sign, RhsTerm::Read(s))),
                                    None => ok = false,
                                },
                            }
                        }
                        ok.then_some(Some(out))
                    }
                };
                Some(Stmt::Access {
                    target: target?,
                    rhs: rhs?,
                    span: *span,
                })
            }
            AstStmt::ScalarAssign { name, span, .. } => {
                self.errors.push(FragmentError::new(
                    FragmentErrorCode::MutableScalar,
                    *span,
                    format!("assignment to scalar `{name}`: the fragment has no mutable scalar variables"),
                ));
                None
            }
        }
    }
}

/// Checks fragment membership and lowers to the IR.
///
/// Collects every error it can find rather than stopping at the first.
pub fn validate_program(ast: &Ast) -> Result<Program, Vec<FragmentError>> {
    let mut v = Validator {
        size: None,
        arrays: Vec::new(),
        counters: Vec::new(),
        errors: Vec::new(),
    };

    let mut first_param: Option<SourceSpan> = None;
    for d in &ast.decls {
        if let Decl::Param { name, span } = d {
            if first_param.is_some() {
                v.errors.push(FragmentError::new(
                    FragmentErrorCode::MultipleSizeParams,
                    *span,
                    format!("second size parameter `{name}`: exactly one is allowed"),
                ));
            } else {
                first_param = Some(*span);
                v.size = Some(name.clone());
            }
        }
    }
    let Some(size) = v.size.clone() else {
        v.errors.push(FragmentError::new(
            FragmentErrorCode::MissingSizeParam,
            ast.decls.first().map(|d| match d {
                Decl::Param { span, .. } | Decl::Array { span, .. } => *span,
            })
            .unwrap_or_else(|| SourceSpan::new(1, 1, 1, 2)),
            "program must declare its size parameter with `param <name>;`",
        ));
        return Err(v.errors);
    };

    let mut arrays = Vec::new();
    for d in &ast.decls {
        let Decl::Array { name, length, span } = d else {
            continue;
        };
        if *name == size || v.arrays.contains(name) {
            v.errors.push(FragmentError::new(
                FragmentErrorCode::DuplicateName,
                *span,
                format!("`{name}` is declared more than once"),
            ));
            continue;
        }
        v.arrays.push(name.clone());
        let Some(len) = v.lower(length, FragmentErrorCode::ContentDependentBound) else {
            continue;
        };
        if len.constant_term() < 0 || len.coeffs().any(|(_, c)| c < 0) {
            v.errors.push(FragmentError::new(
                FragmentErrorCode::NegativeLengthPossible,
                length.span,
                format!("length `{len}` of `{name}` can be negative; use nonnegative coefficients and constant"),
            ));
            continue;
        }
        arrays.push(ArrayDecl {
            name: name.clone(),
            length: len,
            span: *span,
        });
    }

    let body = v.body(&ast.body);
    if v.errors.is_empty() {
        Ok(Program {
            size_param: Var::new(size),
            arrays,
            body,
        })
    } else {
        v.errors.sort_by_key(|e| e.span);
        Err(v.errors)
    }
}

impl fmt::Display for FragmentErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codes(text: &str) -> Vec<FragmentErrorCode> {
        match load_program(text) {
            Err(LoadError::Fragment(errs)) => errs.into_iter().map(|e| e.code).collect(),
            other => panic!("expected fragment errors, got {other:?}"),
        }
    }

    #[test]
    fn accepts_canonical_scan() {
        let p = load_program("param n; array a[n]; for i in 0..n { a[i]; }").unwrap();
        assert_eq!(p.size_param, Var::new("n"));
        assert_eq!(p.arrays[0].length, AffineExpr::var("n"));
        assert_eq!(p.body.len(), 1);
    }

    #[test]
    fn negative_length() {
        assert_eq!(codes("param n; array a[n-1];"), vec![FragmentErrorCode::NegativeLengthPossible]);
        assert_eq!(codes("param n; array a[2 - n];"), vec![FragmentErrorCode::NegativeLengthPossible]);
    }

    #[test]
    fn content_dependent_guard() {
        let c = codes("param n; array a[n]; for i in 0..n { if a[i] > 0 { a[i]; } }");
        assert_eq!(c, vec![FragmentErrorCode::ContentDependentAffineGuard]);
    }

    #[test]
    fn indirect_index() {
        let c = codes("param n; array a[n]; array b[n]; for i in 0..n { a[b[i]]; }");
        assert_eq!(c, vec![FragmentErrorCode::NonAffineIndex]);
    }

    #[test]
    fn mutable_scalar() {
        let c = codes("param n; array a[n]; x = 0; for i in 0..n { x = x + 1; }");
        assert_eq!(c, vec![FragmentErrorCode::MutableScalar; 2]);
    }

    #[test]
    fn unknown_array_and_unbound_counter() {
        let c = codes("param n; array a[n]; for i in 0..n { b[i]; a[j]; }");
        assert_eq!(c, vec![FragmentErrorCode::UnknownArray, FragmentErrorCode::UnboundVariable]);
    }

    #[test]
    fn duplicate_names() {
        assert_eq!(codes("param n; array a[n]; array a[n];"), vec![FragmentErrorCode::DuplicateName]);
        assert_eq!(codes("param n; array n[n];"), vec![FragmentErrorCode::DuplicateName]);
        let c = codes("param n; array a[n]; for i in 0..n { for i in 0..n { a[i]; } }");
        assert_eq!(c, vec![FragmentErrorCode::DuplicateName]);
    }

    #[test]
    fn sibling_loops_may_reuse_counter_names() {
        assert!(load_program("param n; array a[n]; for i in 0..n { a[i]; } for i in 0..n { a[i]; }").is_ok());
    }

    #[test]
    fn size_parameter_count() {
        assert_eq!(codes("param n; param m; array a[n];"), vec![FragmentErrorCode::MultipleSizeParams]);
        assert_eq!(codes("array a[4];"), vec![FragmentErrorCode::MissingSizeParam]);
    }

    #[test]
    fn counter_out_of_scope_in_length() {
        assert_eq!(codes("param n; array a[i];"), vec![FragmentErrorCode::UnboundVariable]);
    }

    #[test]
    fn reads_in_loop_bounds() {
        let c = codes("param n; array a[n]; for i in 0..a[0] { a[i]; }");
        assert_eq!(c, vec![FragmentErrorCode::ContentDependentBound]);
    }

    #[test]
    fn array_used_as_scalar() {
        assert_eq!(codes("param n; array a[n]; a[a];"), vec![FragmentErrorCode::UnboundVariable]);
    }

    #[test]
    fn constant_folding_in_products() {
        let p = load_program("param n; array a[2*n + 2]; for i in 0..n { a[(1 + 1)*i + 2*1]; }").unwrap();
        let Stmt::For { body, .. } = &p.body[0] else { panic!() };
        let Stmt::Access { target, .. } = &body[0] else { panic!() };
        assert_eq!(target.index, parse_affine("2*i + 2").unwrap());
    }

    #[test]
    fn lengths_nonnegative_on_sample_sizes() {
        let p = load_program("param n; array a[0]; array b[3*n + 1]; array c[n];").unwrap();
        for arr in &p.arrays {
            for n in 0..=100 {
                let len = arr.length.eval(|_| Some(n)).unwrap();
                assert!(len >= 0);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Exactly one of Program / errors, never both, never a panic.
            #[test]
            fn validation_is_total(text in "(param n; |array a\\[n\\]; |array b\\[n-1\\]; |for i in 0..n \\{ |\\} |a\\[i\\]; |if a\\[i\\] > 0 \\{ |x = 1; |b\\[2*i\\]; )*") {
                if let Ok(ast) = frontend::parse(&text) {
                    match validate_program(&ast) {
                        Ok(_) => {}
                        Err(errs) => prop_assert!(!errs.is_empty()),
                    }
                }
            }
        }
    }
}
