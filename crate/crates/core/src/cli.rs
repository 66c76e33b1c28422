//! Command-line front end: `run`, `list` and `describe`.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::report::{run_scenario_text, RunOptions, RunOutput};
use crate::scenario::{shipped, Scenario, SHIPPED};

#[derive(Debug, Parser)]
#[command(
    name = "ncprob",
    version,
    about = "Finite-window checks for noncommutative random sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario file (or the name of a shipped scenario).
    Run {
        config: String,
        /// Output directory for report.json, timing.json and CSV tables.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Global tolerance, replacing the scenario's own.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List shipped scenarios.
    List,
    /// Document a check type or symmetry kind.
    Describe { kind: String },
}

const DOCS: &[(&str, &str)] = &[
    (
        "symmetry",
        "Compares ψ_ι[i; a] with ψ_ι[canon(i); a] for every tuple of length 1..=degree with entries below \
         the window and every hermitian-basis choice. Fields: kind, degree, window (default: scenario window).",
    ),
    (
        "exchangeable",
        "Symmetry kind. Tuples with the same pattern of equal entries (i ∼_π j) must have equal moments. \
         Checked up to `degree` factors on indices below `window`; a pass says nothing beyond that scope.",
    ),
    (
        "spreadable",
        "Symmetry kind. Tuples with the same relative order of entries (i ∼_o j) must have equal moments. \
         `degree` bounds the number of factors and `window` the indices used; the verdict is labelled \
         \"spreadable up to degree n, window L\".",
    ),
    (
        "stationary",
        "Symmetry kind. Tuples differing by a translation (i ∼_θ j) must have equal moments, \
         checked up to `degree` factors on indices below `window`.",
    ),
    (
        "hierarchy",
        "All three symmetry kinds on one moment table; passes when all pass. A non-monotone outcome \
         (exchangeable without spreadable, or spreadable without stationary) is reported as an error.",
    ),
    (
        "braid",
        "Braid relation residual of a two-leg unitary (the model's own for yang_baxter models, or `braid`).",
    ),
    (
        "moment",
        "Evaluates ψ_ι[tuple; basis]; passes when within tolerance of `expected`, or always without one.",
    ),
    (
        "independence",
        "Conditional independence (CI, CIo) or factorisability (CF, CFo) over a candidate N (`scalars` or \
         `fiber_scalars`) for all pairs of index sets of size at most `max_set_size` in the window.",
    ),
    (
        "factorization",
        "A single pair I, J of index sets; `joined` adjoins N to both sides.",
    ),
    (
        "factorizability_audit",
        "Runs the four independence modes and reports the implications CF ⇒ CI and CFo ⇒ CIo; \
         skipped when the model is not stationary or N is not shift-invariant.",
    ),
    (
        "commuting_square",
        "The four commuting-square conditions for alg(ι_left) ∨ N, alg(ι_right) ∨ N over N.",
    ),
    (
        "zero_one",
        "Tail diagnostic at the far end of the window; skipped unless the model is order ℂ-independent.",
    ),
    (
        "mixing_gap",
        "|ψ(y*·α^k(x)) − ψ(y*·E_N(x))| for monomials x, y and shift k.",
    ),
    (
        "cesaro",
        "Cesàro averages (1/n) Σ_{k<n} ψ(y·α^k(x)) for n ≤ n_max with the 2·max/n step bound.",
    ),
    (
        "refined_average",
        "Moment-level action of T_N for N in `n_values`: exact up to `exact_cap` (default 4), Monte Carlo \
         with the scenario seed beyond. `require_monotone` asserts that gaps to ψ(y)ψ(x) do not increase.",
    ),
    (
        "induced_endomorphism",
        "Checks ψ_ι[θ_N ∘ t] = ψ_ι[t] up to `degree`; skipped on non-spreadable models.",
    ),
    (
        "clt",
        "ψ(S_N(x)^p) by brute force and by order classes for N in `n_values`, plus the limit p!!·a_p(x). \
         The class path and the limit need the spreadability gate; a refused limit fails the check.",
    ),
    (
        "conditional_clt",
        "The operator A_p(x) over a candidate N, optionally after auto-centring x ← x − E_N(x).",
    ),
    (
        "reference",
        "Reference moments: gaussian (p!!), semicircle (Catalan), q_interp (Σ q^crossings).",
    ),
];

pub fn list_scenarios() -> String {
    let mut out = String::new();
    for (name, text) in SHIPPED {
        let desc = Scenario::from_json(text).map(|s| s.description).unwrap_or_default();
        out.push_str(&format!("{name:<26} {desc}\n"));
    }
    out
}

pub fn describe_check(kind: &str) -> Result<String> {
    DOCS.iter()
        .find(|(k, _)| *k == kind)
        .map(|(k, d)| format!("{k}: {d}"))
        .ok_or_else(|| {
            let valid: Vec<&str> = DOCS.iter().map(|(k, _)| *k).collect();
            Error::Validation(format!("unknown kind `{kind}`; valid kinds: {}", valid.join(", ")))
        })
}

/// Read a config from disk, falling back to shipped scenarios by name.
pub fn load_config(config: &str) -> Result<String> {
    match std::fs::read_to_string(config) {
        Ok(text) => Ok(text),
        Err(e) => shipped(config)
            .map(str::to_string)
            .ok_or_else(|| Error::Io(format!("{config}: {e}"))),
    }
}

pub fn run(config: &str, tol: Option<f64>) -> Result<RunOutput> {
    let text = load_config(config)?;
    Ok(run_scenario_text(&text, &RunOptions { tolerance: tol }))
}

/// Runs the parsed command and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match cli.command {
        Command::List => {
            print!("{}", list_scenarios());
            0
        }
        Command::Describe { kind } => match describe_check(&kind) {
            Ok(text) => {
                println!("{text}");
                0
            }
            Err(e) => {
                eprintln!("{e}");
                2
            }
        },
        Command::Run { config, out, jobs, tol } => {
            if let Some(j) = jobs {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
                    eprintln!("warning: {e}");
                }
            }
            if let Some(t) = tol {
                if !(t >= 0.0 && t.is_finite()) {
                    eprintln!("--tol must be a finite nonnegative number");
                    return 2;
                }
            }
            let output = match run(&config, tol) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("{e}");
                    return 2;
                }
            };
            let name = output
                .report
                .scenario
                .get("name")
                .and_then(|v| v.as_str())
                .unwrap_or("scenario");
            let dir = out.unwrap_or_else(|| {
                let from_cfg = output
                    .report
                    .scenario
                    .pointer("/output/dir")
                    .and_then(|v| v.as_str())
                    .map(PathBuf::from);
                from_cfg.unwrap_or_else(|| PathBuf::from("ncprob-out").join(name))
            });
            for c in &output.report.checks {
                let mark = if c.as_expected { "ok  " } else { "FAIL" };
                println!(
                    "{mark} {:<28} {:?} (expect {:?}): {}",
                    c.id, c.status, c.expect, c.summary
                );
                if let Some(e) = &c.error {
                    eprintln!("{}: {e}", c.id);
                }
            }
            if let Err(e) = output.write(&dir) {
                eprintln!("{e}");
                return 2;
            }
            println!("{:?} -> {}", output.report.status, dir.join("report.json").display());
            output.exit_code()
        }
    }
}
