//! Rendering of command results as text or JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ctm_core::harness::Verdict;
use ctm_core::{CheckReport, DiscrepancyReport, Int, PeriodicSet, ThresholdReport, ViolationWitness};
use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    SafeForAllSizes,
    SafeUpTo(u64),
    Unsafe,
    Clean,
    Discrepancy,
    Inconclusive(String),
}

impl Outcome {
    pub fn from_verdict(v: &Verdict) -> Outcome {
        match v {
            Verdict::SafeForAllSizes { .. } => Outcome::SafeForAllSizes,
            Verdict::Unsafe { .. } => Outcome::Unsafe,
            Verdict::Inconclusive { stage, reason } => Outcome::Inconclusive(format!(
                "{} stage: {reason}",
                match stage {
                    ctm_core::harness::Stage::Threshold => "threshold",
                    ctm_core::harness::Stage::Checker => "checker",
                }
            )),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Outcome::SafeForAllSizes => "SafeForAllSizes",
            Outcome::SafeUpTo(_) => "SafeUpTo",
            Outcome::Unsafe => "Unsafe",
            Outcome::Clean => "Clean",
            Outcome::Discrepancy => "Discrepancy",
            Outcome::Inconclusive(_) => "Inconclusive",
        }
    }
}

pub struct Report {
    pub command: &'static str,
    pub file: PathBuf,
    pub outcome: Outcome,
    pub thresholds: Option<ThresholdReport>,
    pub check: Option<CheckReport>,
    pub crossval: Option<DiscrepancyReport>,
}

fn int(x: Int) -> Value {
    match i64::try_from(x) {
        Ok(v) => Value::from(v),
        Err(_) => Value::String(x.to_string()),
    }
}

fn witness_json(w: &ViolationWitness) -> Value {
    let counters: Map<String, Value> = w
        .counter_values
        .iter()
        .map(|(v, x)| (v.name().to_string(), int(*x)))
        .collect();
    json!({
        "size": w.size,
        "accessId": w.access_id.0,
        "counters": counters,
        "index": int(w.index_value),
        "length": int(w.array_length),
        "kind": w.kind,
    })
}

fn set_json(s: &PeriodicSet) -> Value {
    json!({
        "B": s.prefix_bound(),
        "P": s.period(),
        "prefixBits": PeriodicSet::bits_string(s.prefix_bits()),
        "periodBits": PeriodicSet::bits_string(s.period_bits()),
    })
}

fn describe_set(s: &PeriodicSet) -> String {
    if s.is_empty() {
        return "none".to_string();
    }
    let shown: Vec<String> = (0..s.prefix_bound() + 2 * s.period())
        .filter(|&n| s.contains(n))
        .take(6)
        .map(|n| n.to_string())
        .collect();
    format!(
        "{{{}, ...}} (B={}, P={}, prefix={}, period={})",
        shown.join(", "),
        s.prefix_bound(),
        s.period(),
        PeriodicSet::bits_string(s.prefix_bits()),
        PeriodicSet::bits_string(s.period_bits())
    )
}

impl Report {
    pub fn new(command: &'static str, file: &Path) -> Report {
        Report {
            command,
            file: file.to_path_buf(),
            outcome: Outcome::Inconclusive("not run".to_string()),
            thresholds: None,
            check: None,
            crossval: None,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.outcome {
            Outcome::SafeForAllSizes | Outcome::SafeUpTo(_) | Outcome::Clean => 0,
            Outcome::Unsafe | Outcome::Discrepancy => 1,
            Outcome::Inconclusive(_) => 3,
        }
    }

    pub fn to_json(&self) -> Value {
        let per_access: Vec<Value> = self
            .thresholds
            .iter()
            .flat_map(|t| t.per_access.values())
            .map(|a| {
                json!({
                    "id": a.id.0,
                    "array": a.array,
                    "span": a.span,
                    "minUnsafe": a.min_unsafe,
                    "ct": a.ct,
                    "method": a.method,
                    "unsafeSet": set_json(&a.unsafe_set),
                })
            })
            .collect();
        let witnesses: Vec<Value> = self
            .check
            .iter()
            .flat_map(|c| &c.violations)
            .map(witness_json)
            .collect();
        let stats = match &self.check {
            Some(c) => json!({
                "iterations": c.stats.iterations,
                "accessesChecked": c.stats.accesses_checked,
                "sizesChecked": c.sizes_checked.map(|(lo, hi)| vec![lo, hi]),
            }),
            None => Value::Null,
        };
        let reason = match &self.outcome {
            Outcome::Inconclusive(r) => Value::from(r.clone()),
            _ => Value::Null,
        };
        let mut doc = json!({
            "schemaVersion": SCHEMA_VERSION,
            "command": self.command,
            "file": self.file.display().to_string(),
            "verdict": self.outcome.name(),
            "reason": reason,
            "programCT": self.thresholds.as_ref().map(|t| t.program_ct),
            "strategy": self.thresholds.as_ref().map(|t| t.strategy),
            "perAccess": per_access,
            "witnesses": witnesses,
            "stats": stats,
        });
        if let Some(d) = &self.crossval {
            doc["crossval"] = json!({
                "sweepMax": d.sweep_max,
                "discrepancies": d.discrepancies,
                "contractViolations": d.contract_violations,
            });
        }
        doc
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let file = self.file.display();
        match &self.outcome {
            Outcome::SafeUpTo(k) => writeln!(out, "verdict: no violations for sizes 0..={k}"),
            Outcome::Inconclusive(r) => writeln!(out, "verdict: Inconclusive ({r})"),
            o => writeln!(out, "verdict: {}", o.name()),
        }
        .ok();
        if let Some(t) = &self.thresholds {
            writeln!(out, "program threshold: {}", t.program_ct).ok();
            for a in t.per_access.values() {
                write!(out, "  {} {} at {}: unsafe sizes {}", a.id, a.array, a.span, describe_set(&a.unsafe_set)).ok();
                match a.min_unsafe {
                    Some(m) => writeln!(out, ", min {m}, ct {}", a.ct),
                    None => writeln!(out, ", ct {}", a.ct),
                }
                .ok();
            }
        }
        if let Some(c) = &self.check {
            if let Some((lo, hi)) = c.sizes_checked {
                writeln!(out, "checked sizes {lo}..={hi} ({} iterations)", c.stats.iterations).ok();
            }
            for w in &c.violations {
                let counters: Vec<String> = w
                    .counter_values
                    .iter()
                    .map(|(v, x)| format!("{}={x}", v.name()))
                    .collect();
                writeln!(
                    out,
                    "witness: size {}, access {}, index {} with length {} ({:?}), counters [{}]",
                    w.size,
                    w.access_id,
                    w.index_value,
                    w.array_length,
                    w.kind,
                    counters.join(", ")
                )
                .ok();
            }
            if let Some(w) = c.violations.iter().min_by_key(|w| w.size) {
                writeln!(out, "replay: ctm check {file} --max-n {}", w.size).ok();
            }
        }
        if let Some(d) = &self.crossval {
            writeln!(
                out,
                "cross-validation over 0..={}: {} discrepancies, {} contract violations",
                d.sweep_max,
                d.discrepancies.len(),
                d.contract_violations.len()
            )
            .ok();
            for x in d.discrepancies.iter().take(20) {
                writeln!(
                    out,
                    "  size {} access {}: checker {} predicted {}",
                    x.size,
                    x.access_id,
                    if x.checker_unsafe { "unsafe" } else { "safe" },
                    if x.predicted_unsafe { "unsafe" } else { "safe" }
                )
                .ok();
            }
        }
        out
    }
}
