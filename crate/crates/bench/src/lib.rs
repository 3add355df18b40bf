//! Shared inputs for the criterion benchmarks.

use ctm_core::{load_program, Program};

/// Representative programs, one per pipeline stress shape.
pub const PROGRAMS: &[(&str, &str)] = &[
    ("scan", "param n; array a[n]; for i in 0..n { a[i]; }"),
    ("off_by_one", "param n; array a[n]; for i in 0..n { a[i+1]; }"),
    (
        "periodic",
        "param n; array a[n]; for i in 0..n { if 3*i == 2*n { a[3*i - 1]; } }",
    ),
    (
        "stencil",
        "param n; array a[n+2]; array b[n]; for i in 0..n { b[i] = a[i] + a[i+1] + a[i+2]; }",
    ),
    (
        "triangular",
        "param n; array a[2*n]; for i in 0..n { for j in 0..i { a[i+j]; } }",
    ),
];

pub fn program(name: &str) -> Program {
    let (_, text) = PROGRAMS
        .iter()
        .find(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("no bench program `{name}`"));
    load_program(text).expect("bench programs are valid")
}
