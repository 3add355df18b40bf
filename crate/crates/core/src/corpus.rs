//! Curated corpus manifest and the seeded random program generator.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{AffineExpr, ArrayDecl, Guard, Int, Program, RelOp, RhsTerm, Sign, Stmt, Subscript, Var};
use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpectedVerdict {
    Safe,
    Unsafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    Nested,
    Guarded,
    Periodic,
    Havoc,
    MultiArray,
    Write,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusEntry {
    pub path: PathBuf,
    pub expected_verdict: ExpectedVerdict,
    #[serde(default)]
    pub expected_min_unsafe: Option<u64>,
    #[serde(default)]
    pub tags: Vec<Tag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<CorpusEntry>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Loads `manifest.json`; entry paths are resolved against its directory.
pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut m: Manifest = serde_json::from_str(&text).map_err(|source| CorpusError::Json {
        path: path.to_owned(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut m.entries {
        e.path = base.join(&e.path);
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenLimits {
    pub depth: usize,
    pub loops: usize,
    pub accesses: usize,
    pub coeff: Int,
}

impl Default for GenLimits {
    fn default() -> Self {
        GenLimits {
            depth: 3,
            loops: 3,
            accesses: 5,
            coeff: 3,
        }
    }
}

const COUNTERS: [&str; 3] = ["i", "j", "k"];
const ARRAYS: [&str; 2] = ["a", "b"];

struct Gen {
    rng: ChaCha8Rng,
    limits: GenLimits,
    loops: usize,
    accesses: usize,
    arrays: Vec<String>,
}

fn n() -> Var {
    Var::new("n")
}

fn sp() -> SourceSpan {
    SourceSpan::default()
}

impl Gen {
    fn coeff(&mut self) -> Int {
        let c = self.limits.coeff;
        self.rng.gen_range(-c..=c)
    }

    fn affine(&mut self, scope: &[Var]) -> AffineExpr {
        let mut e = AffineExpr::constant(self.rng.gen_range(-3..=3));
        let mut vars = vec![n()];
        vars.extend(scope.iter().cloned());
        for v in vars {
            if self.rng.gen_bool(0.5) {
                let c = self.coeff();
                e = e.add(&AffineExpr::term(c, v)).expect("small coefficients");
            }
        }
        e
    }

    /// Index biased towards counter-driven shapes like `i + c` and `2*i - n`.
    fn index(&mut self, scope: &[Var]) -> AffineExpr {
        if let (Some(v), true) = (scope.choose(&mut self.rng).cloned(), self.rng.gen_bool(0.6)) {
            let k = self.rng.gen_range(-2..=2);
            let mut e = AffineExpr::var(v).add_constant(k).unwrap();
            if self.rng.gen_bool(0.3) {
                let c = self.rng.gen_range(-1..=1);
                e = e.add(&AffineExpr::term(c, n())).unwrap();
            }
            if self.rng.gen_bool(0.3) {
                e = e.scale(self.rng.gen_range(1..=self.limits.coeff.max(1))).unwrap();
            }
            return e;
        }
        self.affine(scope)
    }

    fn subscript(&mut self, scope: &[Var]) -> Subscript {
        self.accesses += 1;
        Subscript {
            array: self.arrays.choose(&mut self.rng).unwrap().clone(),
            index: self.index(scope),
            span: sp(),
        }
    }

    fn bounds(&mut self, scope: &[Var]) -> (AffineExpr, AffineExpr) {
        let outer = scope.last().cloned();
        let d = self.rng.gen_range(-1..=2);
        match (outer, self.rng.gen_range(0..6)) {
            (None, 0) => (AffineExpr::constant(1), AffineExpr::var(n())),
            (None, 1) => (
                AffineExpr::constant(0),
                AffineExpr::term(self.rng.gen_range(1..=2), n()).add_constant(d).unwrap(),
            ),
            (None, _) => (AffineExpr::constant(0), AffineExpr::var(n()).add_constant(d).unwrap()),
            (Some(o), 0) => (AffineExpr::constant(0), AffineExpr::var(o)),
            (Some(o), 1) => (
                AffineExpr::var(o.clone()),
                AffineExpr::var(o).add_constant(self.rng.gen_range(1..=3)).unwrap(),
            ),
            (Some(o), 2) => (AffineExpr::var(o).add_constant(1).unwrap(), AffineExpr::var(n())),
            (Some(_), 3) => (AffineExpr::constant(0), AffineExpr::constant(self.rng.gen_range(1..=3))),
            (Some(o), 4) => (
                AffineExpr::constant(0),
                AffineExpr::var(n()).sub(&AffineExpr::var(o)).unwrap(),
            ),
            (Some(_), _) => (AffineExpr::constant(0), AffineExpr::var(n()).add_constant(d).unwrap()),
        }
    }

    fn guard(&mut self, scope: &[Var]) -> Guard {
        if scope.is_empty() || self.rng.gen_bool(0.3) {
            return Guard::Havoc;
        }
        let v = scope.choose(&mut self.rng).unwrap().clone();
        let op = *[RelOp::Eq, RelOp::Ne, RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge]
            .choose(&mut self.rng)
            .unwrap();
        let c = self.rng.gen_range(1..=self.limits.coeff.max(1));
        let lhs = AffineExpr::term(c, v);
        let rhs = match self.rng.gen_range(0..3) {
            0 => AffineExpr::var(n()).add_constant(self.rng.gen_range(-2..=2)).unwrap(),
            1 => AffineExpr::constant(self.rng.gen_range(0..=4)),
            _ => self.affine(scope),
        };
        Guard::Affine { lhs, op, rhs }
    }

    fn access(&mut self, scope: &[Var]) -> Stmt {
        let target = self.subscript(scope);
        let rhs = if self.accesses < self.limits.accesses && self.rng.gen_bool(0.3) {
            let mut terms = vec![(Sign::Plus, RhsTerm::Read(self.subscript(scope)))];
            if self.rng.gen_bool(0.5) {
                terms.push((Sign::Minus, RhsTerm::Literal(self.rng.gen_range(0..=9))));
            }
            Some(terms)
        } else {
            None
        };
        Stmt::Access {
            target,
            rhs,
            span: sp(),
        }
    }

    fn body(&mut self, scope: &mut Vec<Var>, depth: usize) -> Vec<Stmt> {
        let count = self.rng.gen_range(1..=2);
        let mut out = Vec::new();
        for _ in 0..count {
            if self.accesses >= self.limits.accesses {
                break;
            }
            out.push(self.stmt(scope, depth));
        }
        if out.is_empty() {
            out.push(self.access(scope));
        }
        out
    }

    fn stmt(&mut self, scope: &mut Vec<Var>, depth: usize) -> Stmt {
        let can_nest = depth < self.limits.depth;
        let roll = self.rng.gen_range(0..10);
        if can_nest && self.loops < self.limits.loops && scope.len() < COUNTERS.len() && (roll < 4 || scope.is_empty() && roll < 7) {
            self.loops += 1;
            let (lo, hi) = self.bounds(scope);
            let counter = Var::new(COUNTERS[scope.len()]);
            scope.push(counter.clone());
            let body = self.body(scope, depth + 1);
            scope.pop();
            Stmt::For {
                counter,
                lo,
                hi,
                body,
                span: sp(),
            }
        } else if can_nest && roll < 6 {
            let guard = self.guard(scope);
            let then_body = self.body(scope, depth + 1);
            let else_body = if self.accesses < self.limits.accesses && self.rng.gen_bool(0.5) {
                self.body(scope, depth + 1)
            } else {
                Vec::new()
            };
            Stmt::If {
                guard,
                then_body,
                else_body,
                span: sp(),
            }
        } else {
            self.access(scope)
        }
    }
}

/// Deterministic random fragment program for `seed`.
pub fn generate_random_program(seed: u64, limits: GenLimits) -> Program {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        limits,
        loops: 0,
        accesses: 0,
        arrays: Vec::new(),
    };
    let array_count = g.rng.gen_range(1..=ARRAYS.len());
    let mut arrays = Vec::new();
    for name in &ARRAYS[..array_count] {
        let c = g.rng.gen_range(0..=2.min(limits.coeff.max(0)));
        let d = g.rng.gen_range(0..=3);
        let length = AffineExpr::term(c, n()).add_constant(d).unwrap();
        arrays.push(ArrayDecl {
            name: name.to_string(),
            length,
            span: sp(),
        });
        g.arrays.push(name.to_string());
    }
    let mut scope = Vec::new();
    let body = g.body(&mut scope, 0);
    Program {
        size_param: n(),
        arrays,
        body,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::load_program;

    fn count(body: &[Stmt], depth: usize, max_depth: &mut usize, loops: &mut usize, accesses: &mut usize) {
        *max_depth = (*max_depth).max(depth);
        for s in body {
            match s {
                Stmt::For { body, .. } => {
                    *loops += 1;
                    count(body, depth + 1, max_depth, loops, accesses);
                }
                Stmt::If {
                    then_body,
                    else_body,
                    ..
                } => {
                    count(then_body, depth + 1, max_depth, loops, accesses);
                    count(else_body, depth + 1, max_depth, loops, accesses);
                }
                Stmt::Access { rhs, .. } => {
                    *accesses += 1 + rhs
                        .iter()
                        .flatten()
                        .filter(|(_, t)| matches!(t, RhsTerm::Read(_)))
                        .count()
                }
            }
        }
    }

    #[test]
    fn seed_zero_is_valid() {
        let p = generate_random_program(0, GenLimits::default());
        assert!(load_program(&p.pretty()).is_ok(), "{}", p.pretty());
    }

    #[test]
    fn generation_is_deterministic() {
        for seed in 0..20 {
            let a = generate_random_program(seed, GenLimits::default());
            let b = generate_random_program(seed, GenLimits::default());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn respects_limits_and_round_trips() {
        let limits = GenLimits::default();
        for seed in 0..300 {
            let p = generate_random_program(seed, limits);
            let text = p.pretty();
            let back = load_program(&text).unwrap_or_else(|e| panic!("seed {seed}: {e:?}\n{text}"));
            assert_eq!(back.erase_spans(), p, "seed {seed}\n{text}");
            let (mut d, mut l, mut a) = (0, 0, 0);
            count(&p.body, 0, &mut d, &mut l, &mut a);
            assert!(d <= limits.depth && l <= limits.loops && a <= limits.accesses, "seed {seed}");
        }
    }

    #[test]
    fn manifest_parses() {
        let json = r#"{"entries":[{"path":"x.ctm","expectedVerdict":"unsafe","expectedMinUnsafe":1,"tags":["nested","multi-array"]}]}"#;
        let m: Manifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.entries[0].expected_min_unsafe, Some(1));
        assert_eq!(m.entries[0].tags, vec![Tag::Nested, Tag::MultiArray]);
    }
}
