use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctm_core::checker::DEFAULT_BUDGET;
use ctm_core::qe::DEFAULT_MAX_DISJUNCTS;
use ctm_core::{
    cross_validate, load_program, program_threshold, verify_unbounded, CheckConfig, CheckError, CheckMode, Checker,
    Program, QeConfig, Strategy, VerifyConfig,
};

mod report;

use report::{Outcome, Report};

#[derive(Parser, Debug)]
#[command(name = "ctm", version, about = "Memory-safety verification of array programs for all sizes")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Print a single JSON document instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,

    /// Cap on loop-body executions across a checker run.
    #[arg(long, global = true, default_value_t = DEFAULT_BUDGET)]
    budget: u64,

    /// Cap on disjuncts produced during elimination.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_DISJUNCTS)]
    max_disjuncts: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every size in 0..=K with the concrete checker.
    Check {
        file: PathBuf,
        #[arg(long)]
        max_n: u64,
        /// Report every violation instead of stopping at the first.
        #[arg(long)]
        all: bool,
    },
    /// Compute per-access unsafe sets and the completeness threshold.
    Threshold {
        file: PathBuf,
        #[arg(long, default_value = "elimination")]
        strategy: Strategy,
    },
    /// Decide safety for all sizes.
    Verify {
        file: PathBuf,
        #[arg(long, default_value = "elimination")]
        strategy: Strategy,
    },
    /// Compare predicted unsafe sets with the checker on 0..=K.
    Crossval {
        file: PathBuf,
        #[arg(long)]
        sweep_max: u64,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Threshold { .. } => "threshold",
            Command::Verify { .. } => "verify",
            Command::Crossval { .. } => "crossval",
        }
    }

    fn file(&self) -> &Path {
        match self {
            Command::Check { file, .. }
            | Command::Threshold { file, .. }
            | Command::Verify { file, .. }
            | Command::Crossval { file, .. } => file,
        }
    }
}

fn load(path: &Path) -> Result<Program, ExitCode> {
    let shown = path.display();
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{shown}: error[Io]: cannot read file: {e}");
        ExitCode::from(2)
    })?;
    load_program(&text).map_err(|e| {
        for (span, code, message) in e.diagnostics() {
            eprintln!("{shown}:{span}: error[{code}]: {message}");
        }
        ExitCode::from(2)
    })
}

fn run(cli: &Cli, p: &Program) -> Report {
    let qe = QeConfig {
        max_disjuncts: cli.max_disjuncts,
    };
    let check = CheckConfig { budget: cli.budget };
    let mut r = Report::new(cli.command.name(), cli.command.file());
    match &cli.command {
        Command::Check { max_n, all, .. } => {
            let mode = if *all {
                CheckMode::AllViolations
            } else {
                CheckMode::FirstViolation
            };
            match Checker::new(p).check_up_to(*max_n, mode, &check) {
                Ok(c) => {
                    r.outcome = if c.violations.is_empty() {
                        Outcome::SafeUpTo(*max_n)
                    } else {
                        Outcome::Unsafe
                    };
                    r.check = Some(c);
                }
                Err(e @ CheckError::BudgetExceeded { .. }) => {
                    let CheckError::BudgetExceeded { ref partial, .. } = e;
                    r.check = Some((**partial).clone());
                    r.outcome = Outcome::Inconclusive(e.to_string());
                }
            }
        }
        Command::Threshold { strategy, .. } => match program_threshold(p, *strategy, &qe) {
            Ok(t) => {
                r.outcome = if t.per_access.values().all(|a| a.unsafe_set.is_empty()) {
                    Outcome::SafeForAllSizes
                } else {
                    Outcome::Unsafe
                };
                r.thresholds = Some(t);
            }
            Err(e) => r.outcome = Outcome::Inconclusive(e.to_string()),
        },
        Command::Verify { strategy, .. } => {
            let cfg = VerifyConfig {
                strategy: *strategy,
                qe,
                check,
            };
            let v = verify_unbounded(p, &cfg);
            r.outcome = Outcome::from_verdict(&v.verdict);
            r.thresholds = v.thresholds;
            r.check = v.check;
        }
        Command::Crossval { sweep_max, .. } => {
            let d = cross_validate(p, *sweep_max, &qe);
            r.outcome = match &d.inconclusive {
                Some(reason) => Outcome::Inconclusive(reason.clone()),
                None if d.is_clean() => Outcome::Clean,
                None => Outcome::Discrepancy,
            };
            r.thresholds = program_threshold(p, Strategy::Elimination, &qe).ok();
            r.crossval = Some(d);
        }
    }
    r
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let p = match load(cli.command.file()) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let r = run(&cli, &p);
    if cli.json {
        match serde_json::to_string_pretty(&r.to_json()) {
            Ok(s) => println!("{s}"),
            Err(e) => {
                eprintln!("error[Internal]: {e}");
                return ExitCode::from(3);
            }
        }
    } else {
        print!("{}", r.to_human());
    }
    ExitCode::from(r.exit_code())
}
