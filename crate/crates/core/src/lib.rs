//! Memory-safety verification of array-iterating programs for all sizes.
//!
//! A program in the fragment iterates over arrays whose lengths are affine in
//! a single size parameter `n`. For every access site the set of sizes at
//! which it goes out of bounds is eventually periodic; that set is computed
//! by integer quantifier elimination, which yields a completeness threshold
//! `ct`. Checking all sizes `0..=ct` with the concrete [`checker`] then
//! decides safety for every size.

#![forbid(unsafe_code)]

pub mod checker;
pub mod constraints;
pub mod corpus;
pub mod frontend;
pub mod harness;
pub mod ir;
pub mod periodic;
pub mod qe;
pub mod span;
pub mod threshold;
pub mod validate;

pub use checker::{check_size, check_up_to, CheckConfig, CheckError, CheckMode, CheckReport, Checker, ViolationWitness};
pub use constraints::{extract_access_sites, violation_systems, AccessId, AccessSite, Atom, ConstraintSystem, ViolationKind};
pub use harness::{cross_validate, verify_unbounded, DiscrepancyReport, Verdict, Verification, VerifyConfig, SWEEP_MAX};
pub use ir::{AffineExpr, Int, Program, Var};
pub use periodic::{to_periodic_set, PeriodicSet};
pub use qe::{eliminate_variable, project_to_size, QeConfig, QeError, SizeFormula};
pub use span::SourceSpan;
pub use threshold::{access_threshold, extremal_threshold, program_threshold, Strategy, ThresholdReport};
pub use validate::{load_program, parse_affine, validate_program, FragmentError, FragmentErrorCode, LoadError};
