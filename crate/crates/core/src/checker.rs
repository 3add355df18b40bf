//! Bounded memory-safety checker.
//!
//! An exhaustive concrete interpreter over counters only: array contents
//! never influence control flow in the fragment, so they are not stored.
//! Havoc branches visit the then-arm and then the else-arm.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::constraints::{AccessId, ViolationKind};
use crate::ir::{AffineExpr, Guard, Int, Program, RelOp, RhsTerm, Stmt, Subscript, Var};

pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum CheckMode {
    FirstViolation,
    AllViolations,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViolationWitness {
    pub size: u64,
    pub access_id: AccessId,
    pub counter_values: BTreeMap<Var, Int>,
    pub index_value: Int,
    pub array_length: Int,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckStats {
    /// Loop-body executions.
    pub iterations: u64,
    pub accesses_checked: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    /// Inclusive range of sizes fully checked; `None` if none completed.
    pub sizes_checked: Option<(u64, u64)>,
    pub violations: Vec<ViolationWitness>,
    pub per_access_first_unsafe: BTreeMap<AccessId, Option<u64>>,
    pub stats: CheckStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckConfig {
    pub budget: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { budget: DEFAULT_BUDGET }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("iteration budget of {budget} exhausted at size {at_size}")]
    BudgetExceeded {
        budget: u64,
        at_size: u64,
        /// Everything established before the budget ran out.
        partial: Box<CheckReport>,
    },
}

#[derive(Debug, Clone)]
struct CExpr {
    constant: Int,
    terms: Vec<(usize, Int)>,
}

impl CExpr {
    #[inline]
    fn eval(&self, slots: &[Int]) -> Int {
        let mut acc = self.constant;
        for &(s, c) in &self.terms {
            acc = c
                .checked_mul(slots[s])
                .and_then(|t| acc.checked_add(t))
                .expect("integer overflow evaluating analyzed program");
        }
        acc
    }
}

#[derive(Debug, Clone)]
struct CSite {
    id: AccessId,
    array: usize,
    index: CExpr,
}

#[derive(Debug, Clone)]
enum CStmt {
    For {
        slot: usize,
        lo: CExpr,
        hi: CExpr,
        body: Vec<CStmt>,
    },
    If {
        diff: CExpr,
        op: RelOp,
        then_body: Vec<CStmt>,
        else_body: Vec<CStmt>,
    },
    Havoc {
        then_body: Vec<CStmt>,
        else_body: Vec<CStmt>,
    },
    Access(Vec<CSite>),
}

/// Out-of-bounds event reported to a visitor.
struct Hit<'a> {
    site: &'a CSite,
    index: Int,
    length: Int,
    slots: &'a [Int],
}

/// A program compiled for repeated concrete execution.
#[derive(Debug, Clone)]
pub struct Checker {
    size_param: Var,
    max_depth: usize,
    lengths: Vec<CExpr>,
    body: Vec<CStmt>,
    site_count: usize,
    depth_names: BTreeMap<AccessId, Vec<Var>>,
}

struct Compiler<'a> {
    program: &'a Program,
    scope: Vec<Var>,
    next_site: usize,
    depth_names: BTreeMap<AccessId, Vec<Var>>,
    max_depth: usize,
}

impl Compiler<'_> {
    fn expr(&self, e: &AffineExpr) -> CExpr {
        let terms = e
            .coeffs()
            .map(|(v, c)| {
                let slot = if *v == self.program.size_param {
                    0
                } else {
                    // innermost binding wins; validation forbids shadowing anyway
                    1 + self
                        .scope
                        .iter()
                        .rposition(|s| s == v)
                        .expect("validated program binds every counter")
                };
                (slot, c)
            })
            .collect();
        CExpr {
            constant: e.constant_term(),
            terms,
        }
    }

    fn site(&mut self, s: &Subscript) -> CSite {
        let id = AccessId(self.next_site);
        self.next_site += 1;
        self.depth_names.insert(id, self.scope.clone());
        CSite {
            id,
            array: self
                .program
                .arrays
                .iter()
                .position(|a| a.name == s.array)
                .expect("validated program declares every accessed array"),
            index: self.expr(&s.index),
        }
    }

    fn body(&mut self, body: &[Stmt]) -> Vec<CStmt> {
        body.iter().map(|s| self.stmt(s)).collect()
    }

    fn stmt(&mut self, s: &Stmt) -> CStmt {
        match s {
            Stmt::For {
                counter, lo, hi, body, ..
            } => {
                let lo = self.expr(lo);
                let hi = self.expr(hi);
                self.scope.push(counter.clone());
                self.max_depth = self.max_depth.max(self.scope.len());
                let slot = self.scope.len();
                let body = self.body(body);
                self.scope.pop();
                CStmt::For { slot, lo, hi, body }
            }
            Stmt::If {
                guard,
                then_body,
                else_body,
                ..
            } => {
                let then_body = self.body(then_body);
                let else_body = self.body(else_body);
                match guard {
                    Guard::Havoc => CStmt::Havoc { then_body, else_body },
                    Guard::Affine { lhs, op, rhs } => CStmt::If {
                        diff: self.expr(&lhs.sub(rhs).expect("guard difference overflow")),
                        op: *op,
                        then_body,
                        else_body,
                    },
                }
            }
            Stmt::Access { target, rhs, .. } => {
                let mut sites = vec![self.site(target)];
                for (_, t) in rhs.iter().flatten() {
                    if let RhsTerm::Read(s) = t {
                        sites.push(self.site(s));
                    }
                }
                CStmt::Access(sites)
            }
        }
    }
}

struct Run<'a, F> {
    lengths: &'a [Int],
    slots: Vec<Int>,
    iterations: u64,
    accesses: u64,
    limit: u64,
    visit: F,
}

enum Stop {
    Visitor,
    Budget,
}

impl<F> Run<'_, F>
where
    F: FnMut(Hit<'_>) -> ControlFlow<()>,
{
    fn exec(&mut self, body: &[CStmt]) -> Result<(), Stop> {
        for s in body {
            match s {
                CStmt::For { slot, lo, hi, body } => {
                    let lo = lo.eval(&self.slots);
                    let hi = hi.eval(&self.slots);
                    let mut i = lo;
                    while i < hi {
                        self.iterations += 1;
                        if self.iterations > self.limit {
                            return Err(Stop::Budget);
                        }
                        self.slots[*slot] = i;
                        self.exec(body)?;
                        i += 1;
                    }
                }
                CStmt::If {
                    diff,
                    op,
                    then_body,
                    else_body,
                } => {
                    if op.holds(diff.eval(&self.slots), 0) {
                        self.exec(then_body)?;
                    } else {
                        self.exec(else_body)?;
                    }
                }
                CStmt::Havoc { then_body, else_body } => {
                    self.exec(then_body)?;
                    self.exec(else_body)?;
                }
                CStmt::Access(sites) => {
                    for site in sites {
                        self.accesses += 1;
                        let index = site.index.eval(&self.slots);
                        let length = self.lengths[site.array];
                        if index < 0 || index >= length {
                            let hit = Hit {
                                site,
                                index,
                                length,
                                slots: &self.slots,
                            };
                            if (self.visit)(hit).is_break() {
                                return Err(Stop::Visitor);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

struct SizeRun {
    iterations: u64,
    accesses: u64,
    exhausted: bool,
}

impl Checker {
    pub fn new(p: &Program) -> Checker {
        let mut c = Compiler {
            program: p,
            scope: Vec::new(),
            next_site: 0,
            depth_names: BTreeMap::new(),
            max_depth: 0,
        };
        let body = c.body(&p.body);
        let lengths = p.arrays.iter().map(|a| c.expr(&a.length)).collect();
        Checker {
            size_param: p.size_param.clone(),
            max_depth: c.max_depth,
            lengths,
            body,
            site_count: c.next_site,
            depth_names: c.depth_names,
        }
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn size_param(&self) -> &Var {
        &self.size_param
    }

    fn run<F>(&self, n: u64, limit: u64, visit: F) -> SizeRun
    where
        F: FnMut(Hit<'_>) -> ControlFlow<()>,
    {
        let n = n as Int;
        let mut slots = vec![0; self.max_depth + 1];
        slots[0] = n;
        let lengths: Vec<Int> = self.lengths.iter().map(|l| l.eval(&slots)).collect();
        let mut run = Run {
            lengths: &lengths,
            slots,
            iterations: 0,
            accesses: 0,
            limit,
            visit,
        };
        let exhausted = matches!(run.exec(&self.body), Err(Stop::Budget));
        SizeRun {
            iterations: run.iterations,
            accesses: run.accesses,
            exhausted,
        }
    }

    fn witness(&self, n: u64, hit: &Hit<'_>) -> ViolationWitness {
        let names = &self.depth_names[&hit.site.id];
        let counter_values = names
            .iter()
            .enumerate()
            .map(|(k, v)| (v.clone(), hit.slots[k + 1]))
            .collect();
        ViolationWitness {
            size: n,
            access_id: hit.site.id,
            counter_values,
            index_value: hit.index,
            array_length: hit.length,
            kind: if hit.index < 0 {
                ViolationKind::Underflow
            } else {
                ViolationKind::Overflow
            },
        }
    }

    /// All (or the first, in visit order) violations at size `n`.
    pub fn check_size(&self, n: u64, mode: CheckMode) -> Vec<ViolationWitness> {
        let mut out = Vec::new();
        self.run(n, u64::MAX, |hit| {
            out.push(self.witness(n, &hit));
            match mode {
                CheckMode::FirstViolation => ControlFlow::Break(()),
                CheckMode::AllViolations => ControlFlow::Continue(()),
            }
        });
        out
    }

    /// Sites with at least one violation at size `n`.
    pub fn unsafe_sites(&self, n: u64) -> BTreeSet<AccessId> {
        let mut out = BTreeSet::new();
        self.run(n, u64::MAX, |hit| {
            out.insert(hit.site.id);
            ControlFlow::Continue(())
        });
        out
    }

    /// Number of loop-body executions at size `n`.
    pub fn iterations_at(&self, n: u64) -> u64 {
        self.run(n, u64::MAX, |_| ControlFlow::Continue(())).iterations
    }

    /// Checks every size in `[0, max_n]` in ascending order.
    ///
    /// In first-violation mode the sweep stops at the first size that has a
    /// violation and reports only the earliest witness there.
    pub fn check_up_to(&self, max_n: u64, mode: CheckMode, cfg: &CheckConfig) -> Result<CheckReport, CheckError> {
        let start = Instant::now();
        let mut report = CheckReport {
            sizes_checked: None,
            violations: Vec::new(),
            per_access_first_unsafe: (0..self.site_count).map(|k| (AccessId(k), None)).collect(),
            stats: CheckStats::default(),
        };
        let mut remaining = cfg.budget;
        for n in 0..=max_n {
            let mut found = Vec::new();
            let r = self.run(n, remaining, |hit| {
                found.push(self.witness(n, &hit));
                match mode {
                    CheckMode::FirstViolation => ControlFlow::Break(()),
                    CheckMode::AllViolations => ControlFlow::Continue(()),
                }
            });
            report.stats.iterations += r.iterations.min(remaining);
            report.stats.accesses_checked += r.accesses;
            if r.exhausted {
                report.stats.elapsed = start.elapsed();
                return Err(CheckError::BudgetExceeded {
                    budget: cfg.budget,
                    at_size: n,
                    partial: Box::new(report),
                });
            }
            remaining -= r.iterations;
            for w in &found {
                report
                    .per_access_first_unsafe
                    .entry(w.access_id)
                    .and_modify(|first| {
                        first.get_or_insert(n);
                    });
            }
            let stop = mode == CheckMode::FirstViolation && !found.is_empty();
            report.violations.extend(found);
            report.sizes_checked = Some((0, n));
            if stop {
                break;
            }
        }
        report.stats.elapsed = start.elapsed();
        Ok(report)
    }
}

pub fn check_size(p: &Program, n: u64, mode: CheckMode) -> Vec<ViolationWitness> {
    Checker::new(p).check_size(n, mode)
}

pub fn check_up_to(p: &Program, max_n: u64, mode: CheckMode, cfg: &CheckConfig) -> Result<CheckReport, CheckError> {
    Checker::new(p).check_up_to(max_n, mode, cfg)
}
