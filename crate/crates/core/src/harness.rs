//! End-to-end verdicts and empirical validation of thresholds.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::checker::{CheckConfig, CheckError, CheckMode, CheckReport, Checker, ViolationWitness};
use crate::constraints::AccessId;
use crate::ir::Program;
use crate::qe::QeConfig;
use crate::threshold::{program_threshold, Strategy, ThresholdReport};

pub const SWEEP_MAX: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VerifyConfig {
    pub strategy: Strategy,
    pub qe: QeConfig,
    pub check: CheckConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Threshold,
    Checker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    SafeForAllSizes { ct: u64, sizes_checked: (u64, u64) },
    Unsafe { witness: ViolationWitness, ct: u64 },
    Inconclusive { stage: Stage, reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::SafeForAllSizes { .. } => "SafeForAllSizes",
            Verdict::Unsafe { .. } => "Unsafe",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }
}

/// A verdict together with the evidence it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub verdict: Verdict,
    pub thresholds: Option<ThresholdReport>,
    pub check: Option<CheckReport>,
}

/// Computes the program threshold and checks every size up to it.
pub fn verify_unbounded(p: &Program, cfg: &VerifyConfig) -> Verification {
    let thresholds = match program_threshold(p, cfg.strategy, &cfg.qe) {
        Ok(t) => t,
        Err(e) => {
            return Verification {
                verdict: Verdict::Inconclusive {
                    stage: Stage::Threshold,
                    reason: e.to_string(),
                },
                thresholds: None,
                check: None,
            }
        }
    };
    let ct = thresholds.program_ct;
    let check = match Checker::new(p).check_up_to(ct, CheckMode::FirstViolation, &cfg.check) {
        Ok(r) => r,
        Err(e @ CheckError::BudgetExceeded { .. }) => {
            let CheckError::BudgetExceeded { ref partial, .. } = e;
            let partial = (**partial).clone();
            return Verification {
                verdict: Verdict::Inconclusive {
                    stage: Stage::Checker,
                    reason: e.to_string(),
                },
                thresholds: Some(thresholds),
                check: Some(partial),
            };
        }
    };
    let verdict = match check.violations.first() {
        None => Verdict::SafeForAllSizes {
            ct,
            sizes_checked: (0, ct),
        },
        Some(w) => Verdict::Unsafe {
            witness: w.clone(),
            ct,
        },
    };
    Verification {
        verdict,
        thresholds: Some(thresholds),
        check: Some(check),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Discrepancy {
    pub size: u64,
    pub access_id: AccessId,
    pub checker_unsafe: bool,
    pub predicted_unsafe: bool,
}

/// An unsafe size beyond `ct` for a site whose window `[0, ct]` was clean.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ContractViolation {
    pub access_id: AccessId,
    pub ct: u64,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DiscrepancyReport {
    pub sweep_max: u64,
    pub discrepancies: Vec<Discrepancy>,
    pub contract_violations: Vec<ContractViolation>,
    /// Set when thresholds could not be computed.
    pub inconclusive: Option<String>,
}

impl DiscrepancyReport {
    pub fn is_clean(&self) -> bool {
        self.discrepancies.is_empty() && self.contract_violations.is_empty() && self.inconclusive.is_none()
    }
}

/// Compares checker results with predicted unsafe sets for every size in
/// `[0, sweep_max]` and every site. Collects all mismatches.
pub fn cross_validate(p: &Program, sweep_max: u64, qe: &QeConfig) -> DiscrepancyReport {
    let mut report = DiscrepancyReport {
        sweep_max,
        ..Default::default()
    };
    let thresholds = match program_threshold(p, Strategy::Elimination, qe) {
        Ok(t) => t,
        Err(e) => {
            report.inconclusive = Some(e.to_string());
            return report;
        }
    };
    let checker = Checker::new(p);
    let mut first_seen: BTreeMap<AccessId, u64> = BTreeMap::new();
    for n in 0..=sweep_max {
        let found = checker.unsafe_sites(n);
        for (id, t) in &thresholds.per_access {
            let checker_unsafe = found.contains(id);
            let predicted_unsafe = t.unsafe_set.contains(n);
            if checker_unsafe != predicted_unsafe {
                report.discrepancies.push(Discrepancy {
                    size: n,
                    access_id: *id,
                    checker_unsafe,
                    predicted_unsafe,
                });
            }
            if checker_unsafe || predicted_unsafe {
                first_seen.entry(*id).or_insert(n);
            }
        }
    }
    for (id, t) in &thresholds.per_access {
        if let Some(&first) = first_seen.get(id) {
            if first > t.ct {
                report.contract_violations.push(ContractViolation {
                    access_id: *id,
                    ct: t.ct,
                    size: first,
                });
            }
        }
    }
    report
}
