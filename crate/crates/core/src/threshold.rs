//! Completeness thresholds.
//!
//! For each access site the set of unsafe sizes is eventually periodic with
//! prefix `B` and period `P`. Checking every size up to `B + P - 1` covers
//! the prefix and one full period, so if none of those sizes is unsafe the
//! set is empty. The program threshold is the maximum over its sites.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::constraints::{extract_access_sites, violation_systems, AccessId, AccessSite, Atom, ConstraintSystem};
use crate::ir::{AffineExpr, Program};
use crate::periodic::{to_periodic_set, PeriodicSet};
use crate::qe::{project_to_size, QeConfig, QeError, SizeFormula};
use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Quantifier elimination for every site.
    #[default]
    Elimination,
    /// Closed-form extremal indices where applicable, elimination elsewhere.
    Extremal,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "elimination" => Ok(Strategy::Elimination),
            "extremal" => Ok(Strategy::Extremal),
            other => Err(format!("unknown strategy `{other}` (expected elimination or extremal)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessThreshold {
    pub id: AccessId,
    pub array: String,
    pub span: SourceSpan,
    pub unsafe_set: PeriodicSet,
    pub ct: u64,
    pub min_unsafe: Option<u64>,
    /// Which method produced `unsafe_set`.
    pub method: Strategy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdReport {
    pub per_access: BTreeMap<AccessId, AccessThreshold>,
    pub program_ct: u64,
    pub strategy: Strategy,
}

/// `(ct, min_unsafe)` for a canonical unsafe set.
pub fn access_threshold(s: &PeriodicSet) -> (u64, Option<u64>) {
    debug_assert!(s.is_canonical());
    (s.prefix_bound() + s.period() - 1, s.min_element())
}

/// Sizes at which `site` can go out of bounds, by elimination.
pub fn elimination_formula(site: &AccessSite, p: &Program, cfg: &QeConfig) -> Result<SizeFormula, QeError> {
    let systems: Vec<ConstraintSystem> = violation_systems(site, p)?
        .into_iter()
        .map(|v| v.system)
        .collect();
    project_to_size(&systems, &site.counters(), &p.size_param, cfg)
}

/// Closed-form unsafe-size formula for guard-free sites whose loops have
/// widths depending only on the size parameter.
///
/// Under that condition every loop is nonempty for all outer counter values
/// exactly when its width is positive, and the extreme index over the nest
/// is found by pushing each counter to the bound favoured by the sign of its
/// coefficient, innermost first.
pub fn extremal_formula(site: &AccessSite, p: &Program) -> Result<Option<SizeFormula>, QeError> {
    if !site.guards.is_empty() {
        return Ok(None);
    }
    let mut nonempty = Vec::new();
    for l in &site.loops {
        // lo - hi + 1 <= 0
        let width = l.lo.sub(&l.hi)?.add_constant(1)?;
        if width.vars().any(|v| *v != p.size_param) {
            return Ok(None);
        }
        nonempty.push(Atom::Le(width));
    }
    let mut max_idx = site.index.clone();
    let mut min_idx = site.index.clone();
    for l in site.loops.iter().rev() {
        max_idx = push_to_extreme(&max_idx, l, true)?;
        min_idx = push_to_extreme(&min_idx, l, false)?;
    }
    let length = &p
        .array(&site.array)
        .expect("validated program declares every accessed array")
        .length;
    let mut under = nonempty.clone();
    under.push(Atom::Le(min_idx.add_constant(1)?));
    let mut over = nonempty;
    over.push(Atom::Le(length.sub(&max_idx)?));
    let mut disjuncts = Vec::new();
    for atoms in [under, over] {
        if let Some(s) = ConstraintSystem::new(atoms).simplified()? {
            disjuncts.push(s);
        }
    }
    Ok(Some(SizeFormula {
        size_param: p.size_param.clone(),
        disjuncts,
    }))
}

fn push_to_extreme(e: &AffineExpr, l: &crate::constraints::LoopBound, maximize: bool) -> Result<AffineExpr, QeError> {
    let c = e.coeff(&l.counter);
    if c == 0 {
        return Ok(e.clone());
    }
    let to_hi = (c > 0) == maximize;
    let value = if to_hi { l.hi.add_constant(-1)? } else { l.lo.clone() };
    Ok(e.substitute(&l.counter, &value)?)
}

/// `(ct, min_unsafe)` via the closed form, or `None` when not applicable.
pub fn extremal_threshold(site: &AccessSite, p: &Program) -> Result<Option<(u64, Option<u64>)>, QeError> {
    match extremal_formula(site, p)? {
        None => Ok(None),
        Some(f) => Ok(Some(access_threshold(&to_periodic_set(&f)?))),
    }
}

fn site_threshold(site: &AccessSite, p: &Program, strategy: Strategy, cfg: &QeConfig) -> Result<AccessThreshold, QeError> {
    let extremal = match strategy {
        Strategy::Extremal => extremal_formula(site, p)?,
        Strategy::Elimination => None,
    };
    let (formula, method) = match extremal {
        Some(f) => (f, Strategy::Extremal),
        None => (elimination_formula(site, p, cfg)?, Strategy::Elimination),
    };
    let unsafe_set = to_periodic_set(&formula)?;
    let (ct, min_unsafe) = access_threshold(&unsafe_set);
    Ok(AccessThreshold {
        id: site.id,
        array: site.array.clone(),
        span: site.span,
        unsafe_set,
        ct,
        min_unsafe,
        method,
    })
}

/// Per-site unsafe sets and the program-wide completeness threshold.
pub fn program_threshold(p: &Program, strategy: Strategy, cfg: &QeConfig) -> Result<ThresholdReport, QeError> {
    let mut per_access = BTreeMap::new();
    for site in extract_access_sites(p)? {
        let t = site_threshold(&site, p, strategy, cfg)?;
        per_access.insert(site.id, t);
    }
    let program_ct = per_access.values().map(|t| t.ct).max().unwrap_or(0);
    Ok(ThresholdReport {
        per_access,
        program_ct,
        strategy,
    })
}
