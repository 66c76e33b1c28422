//! Scenario execution and report assembly.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::clt::{clt_study, conditional_limit_ap, reference_moment, BRUTEFORCE_CAP};
use crate::ergodic::{
    cesaro_csv, cesaro_table, induced_endomorphism_check, mixing_gap, refined_average_csv, refined_average_tn,
    MonomialSpec, TN_EXACT_CAP, TN_MC_SAMPLES,
};
use crate::error::{Error, Result};
use crate::indcheck::{
    check_factorizability, check_sequence_independence, factorizability_vs_independence_audit, zero_one_diagnostic,
    ImplicationStatus,
};
use crate::matalg::C64;
use crate::scenario::{Check, CheckSpec, Expect, ModelSpec, Scenario};
use crate::seqmodel::{ModelSummary, RandomSequenceModel};
use crate::subalg::{conditional_expectation, generate_subalgebra, verify_commuting_square, Labeled, Subalgebra};
use crate::symcheck::{check_braid_relation, check_symmetry, symmetry_hierarchy_audit};
use crate::table::Table;
use crate::tuplecomb::IndexTuple;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
    Error,
}

impl CheckStatus {
    fn matches(self, expect: Expect) -> bool {
        match (self, expect) {
            (CheckStatus::Error, _) => false,
            (_, Expect::Any) => true,
            (CheckStatus::Pass, Expect::Pass) | (CheckStatus::Fail, Expect::Fail) => true,
            (CheckStatus::Skipped, Expect::Skip) => true,
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub id: String,
    #[serde(rename = "type")]
    pub check_type: String,
    pub expect: Expect,
    pub status: CheckStatus,
    pub as_expected: bool,
    pub tolerance: f64,
    pub summary: String,
    pub details: Value,
    pub error: Option<String>,
    pub tables: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub scenario_sha256: String,
    pub seed: u64,
    pub tolerance: f64,
    pub tolerance_overridden: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub artifact: String,
    pub version: String,
    pub provenance: Provenance,
    pub scenario: Value,
    pub model: Option<ModelSummary>,
    pub checks: Vec<CheckReport>,
    pub status: OverallStatus,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub total_ms: f64,
    pub model_ms: f64,
    pub checks: Vec<(String, f64)>,
}

/// Everything a run produces; the report body excludes timing.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: Report,
    pub tables: Vec<(String, Table)>,
    pub timing: Timing,
}

impl RunOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }

    /// Writes `report.json`, `timing.json` and one CSV per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let body = serde_json::to_string_pretty(&self.report).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(dir.join("report.json"), body + "\n")?;
        let timing = serde_json::to_string_pretty(&self.timing).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(dir.join("timing.json"), timing + "\n")?;
        for (file, table) in &self.tables {
            std::fs::write(dir.join(file), table.to_csv())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Replaces the scenario-level tolerance; per-check tolerances still win.
    pub tolerance: Option<f64>,
}

struct Outcome {
    status: CheckStatus,
    summary: String,
    details: Value,
    tables: Vec<Table>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise")
}

fn pass_if(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn fmt_c(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// A check's report, its named tables and its wall time in ms.
type CheckRun = (CheckReport, Vec<(String, Table)>, f64);

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse `text` and run it; configuration errors yield an error report with
/// exit code 2 instead of an `Err`.
pub fn run_scenario_text(text: &str, opts: &RunOptions) -> RunOutput {
    let sha = sha256_hex(text.as_bytes());
    match Scenario::from_json(text) {
        Ok(s) => run_scenario(&s, &sha, opts),
        Err(e) => config_failure(&sha, Value::Null, None, e, opts),
    }
}

fn config_failure(sha: &str, echo: Value, seed: Option<u64>, e: Error, opts: &RunOptions) -> RunOutput {
    RunOutput {
        report: Report {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            provenance: Provenance {
                scenario_sha256: sha.into(),
                seed: seed.unwrap_or(crate::scenario::DEFAULT_SEED),
                tolerance: opts.tolerance.unwrap_or(crate::scenario::DEFAULT_TOLERANCE),
                tolerance_overridden: opts.tolerance.is_some(),
            },
            scenario: echo,
            model: None,
            checks: vec![CheckReport {
                id: "configuration".into(),
                check_type: "configuration".into(),
                expect: Expect::Pass,
                status: CheckStatus::Error,
                as_expected: false,
                tolerance: 0.0,
                summary: e.to_string(),
                details: Value::Null,
                error: Some(e.to_string()),
                tables: vec![],
            }],
            status: OverallStatus::Error,
            exit_code: 2,
        },
        tables: vec![],
        timing: Timing {
            total_ms: 0.0,
            model_ms: 0.0,
            checks: vec![],
        },
    }
}

pub fn run_scenario(s: &Scenario, sha: &str, opts: &RunOptions) -> RunOutput {
    let start = Instant::now();
    let echo = to_value(s);
    let global = opts.tolerance.unwrap_or(s.global_tolerance());
    let model = match s.model.build(s.window) {
        Ok(m) => m,
        Err(e) => {
            let e = match e {
                Error::Config { .. } | Error::Resource { .. } => e,
                other => Error::Config {
                    pointer: "/model".into(),
                    message: other.to_string(),
                },
            };
            return config_failure(sha, echo, Some(s.seed), e, opts);
        }
    };
    let model_ms = start.elapsed().as_secs_f64() * 1e3;
    let results: Vec<CheckRun> = s
        .checks
        .par_iter()
        .enumerate()
        .map(|(k, spec)| {
            let t0 = Instant::now();
            let id = s.check_id(k);
            let tol = spec.tolerance.unwrap_or(global);
            let outcome = run_check(&model, &s.model, spec, tol, s.seed);
            let ms = t0.elapsed().as_secs_f64() * 1e3;
            let (status, summary, details, tables, error) = match outcome {
                Ok(o) => (o.status, o.summary, o.details, o.tables, None),
                Err(e) => (
                    CheckStatus::Error,
                    e.to_string(),
                    Value::Null,
                    vec![],
                    Some(e.to_string()),
                ),
            };
            let named: Vec<(String, Table)> = tables
                .into_iter()
                .map(|t| (format!("{id}_{}.csv", t.name), t))
                .collect();
            let report = CheckReport {
                id,
                check_type: spec.check.type_name().into(),
                expect: spec.expect,
                as_expected: status.matches(spec.expect),
                status,
                tolerance: tol,
                summary,
                details,
                error,
                tables: named.iter().map(|(f, _)| f.clone()).collect(),
            };
            (report, named, ms)
        })
        .collect();
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    let mut timings = Vec::new();
    for (r, t, ms) in results {
        timings.push((r.id.clone(), ms));
        tables.extend(t);
        checks.push(r);
    }
    let (status, exit_code) = if checks.iter().any(|c| c.status == CheckStatus::Error) {
        (OverallStatus::Error, 2)
    } else if checks.iter().all(|c| c.as_expected) {
        (OverallStatus::Pass, 0)
    } else {
        (OverallStatus::Fail, 1)
    };
    RunOutput {
        report: Report {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            provenance: Provenance {
                scenario_sha256: sha.into(),
                seed: s.seed,
                tolerance: global,
                tolerance_overridden: opts.tolerance.is_some(),
            },
            scenario: echo,
            model: Some(model.summary()),
            checks,
            status,
            exit_code,
        },
        tables,
        timing: Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
            model_ms,
            checks: timings,
        },
    }
}

fn join_algebra(model: &RandomSequenceModel, legs: &[usize], n: &Subalgebra) -> Result<Subalgebra> {
    let amb = model.ambient()?;
    let mut gens = Vec::new();
    for &i in legs {
        for (k, b) in model.basis().iter().enumerate() {
            gens.push(Labeled::new(format!("ι{i}(b{k})"), amb.embeddings[i].apply(b)?));
        }
    }
    for w in n.spanning() {
        gens.push(w.clone());
    }
    generate_subalgebra(&amb.state, &gens, 1e-12)
}

fn run_check(
    model: &RandomSequenceModel,
    model_spec: &ModelSpec,
    spec: &CheckSpec,
    tol: f64,
    seed: u64,
) -> Result<Outcome> {
    let window = model.window();
    Ok(match &spec.check {
        Check::Symmetry {
            kind,
            degree,
            window: w,
        } => {
            let v = check_symmetry(model, *kind, *degree, w.unwrap_or(window), tol)?;
            let mut summary = format!("{}: max violation {}", v.scope(), sci(v.max_violation));
            if let Some(wit) = &v.witness {
                summary += &format!(
                    ", witness {} vs {} (basis {:?}): {} vs {}",
                    wit.tuple,
                    wit.representative,
                    wit.basis_choice,
                    fmt_c(wit.value),
                    fmt_c(wit.representative_value)
                );
            }
            Outcome {
                status: pass_if(v.pass),
                summary,
                details: to_value(&v),
                tables: vec![],
            }
        }
        Check::Hierarchy { degree, window: w } => {
            let a = symmetry_hierarchy_audit(model, *degree, w.unwrap_or(window), tol)?;
            if !a.monotone {
                return Err(Error::Internal(
                    "symmetry verdicts are not monotone along exchangeable ⇒ spreadable ⇒ stationary".into(),
                ));
            }
            let parts: Vec<String> = a
                .verdicts()
                .iter()
                .map(|v| {
                    format!(
                        "{} {} ({})",
                        v.kind.as_str(),
                        if v.pass { "pass" } else { "fail" },
                        sci(v.max_violation)
                    )
                })
                .collect();
            Outcome {
                status: pass_if(a.verdicts().iter().all(|v| v.pass)),
                summary: format!("up to degree {degree}: {}", parts.join(", ")),
                details: to_value(&a),
                tables: vec![],
            }
        }
        Check::Braid { braid } => {
            let u = match (braid, model_spec) {
                (Some(b), _) => b.build()?,
                (None, ModelSpec::YangBaxter { braid }) => braid.build()?,
                (None, _) => {
                    return Err(Error::Validation(
                        "braid check needs a `braid` on non-braided models".into(),
                    ));
                }
            };
            let r = check_braid_relation(&u, tol)?;
            Outcome {
                status: pass_if(r.holds),
                summary: format!("braid residual {}", sci(r.residual)),
                details: to_value(&r),
                tables: vec![],
            }
        }
        Check::Moment { tuple, basis, expected } => {
            let v = model.psi_moment(&IndexTuple::new(tuple.clone()), basis)?;
            let deviation = expected.map(|e| (v - e.value()).norm());
            Outcome {
                status: pass_if(deviation.is_none_or(|d| d <= tol)),
                summary: match (expected, deviation) {
                    (Some(e), Some(d)) => format!(
                        "ψ_ι[{:?}; {:?}] = {} (expected {}, deviation {})",
                        tuple,
                        basis,
                        fmt_c(v),
                        fmt_c(e.value()),
                        sci(d)
                    ),
                    _ => format!("ψ_ι[{:?}; {:?}] = {}", tuple, basis, fmt_c(v)),
                },
                details: json!({"tuple": tuple, "basis": basis, "value": v, "expected": expected.map(|e| e.value()), "deviation": deviation}),
                tables: vec![],
            }
        }
        Check::Independence {
            mode,
            candidate,
            max_set_size,
        } => {
            let n = candidate.build(model)?;
            let v = check_sequence_independence(model, &n, *mode, *max_set_size, tol)?;
            let mut summary = format!(
                "{} over {:?} (dim {}), |I|,|J| ≤ {}, window {}: {} pairs, max violation {}",
                mode.as_str(),
                candidate,
                v.conditioning_dim,
                max_set_size,
                v.window,
                v.pairs_checked,
                sci(v.max_violation)
            );
            if let Some(w) = &v.witness {
                summary += &format!(", witness I={:?} J={:?} x={} y={}", w.i, w.j, w.x, w.y);
            }
            Outcome {
                status: pass_if(v.pass),
                summary,
                tables: vec![v.table("pairs")],
                details: to_value(&v),
            }
        }
        Check::Factorization {
            candidate,
            i,
            j,
            joined,
        } => {
            let n = candidate.build(model)?;
            let v = check_factorizability(model, &n, i, j, *joined, tol)?;
            Outcome {
                status: pass_if(v.pass),
                summary: format!("I={i:?} J={j:?}: max violation {}", sci(v.max_violation)),
                details: to_value(&v),
                tables: vec![],
            }
        }
        Check::FactorizabilityAudit {
            candidate,
            max_set_size,
        } => {
            let n = candidate.build(model)?;
            let a = factorizability_vs_independence_audit(model, &n, *max_set_size, tol)?;
            let violated = a.implications.iter().any(|i| i.status == ImplicationStatus::Violated);
            let status = if !a.applicable {
                CheckStatus::Skipped
            } else {
                pass_if(!violated)
            };
            let summary = match &a.reason {
                Some(r) if !a.applicable => format!("not applicable: {r}"),
                _ => format!(
                    "{} implication(s) checked, {} violated",
                    a.implications.len(),
                    a.implications
                        .iter()
                        .filter(|i| i.status == ImplicationStatus::Violated)
                        .count()
                ),
            };
            Outcome {
                status,
                summary,
                details: to_value(&a),
                tables: vec![],
            }
        }
        Check::CommutingSquare { left, right, candidate } => {
            let n = candidate.build(model)?;
            let amb = model.ambient()?;
            let m1 = join_algebra(model, left, &n)?;
            let m2 = join_algebra(model, right, &n)?;
            let e1 = conditional_expectation(&amb.state, &m1, tol.max(1e-12))?;
            let e2 = conditional_expectation(&amb.state, &m2, tol.max(1e-12))?;
            let e0 = conditional_expectation(&amb.state, &n, tol.max(1e-12))?;
            let r = verify_commuting_square(&e1, &e2, &e0, tol)?;
            let mut summary = format!(
                "{} of 4 conditions hold (dims {}, {}, {}; intersection {})",
                r.conditions.iter().filter(|c| c.holds).count(),
                m1.dim(),
                m2.dim(),
                n.dim(),
                r.intersection_dim
            );
            if !r.all_agree {
                summary += "; the four conditions disagree";
            }
            Outcome {
                status: pass_if(r.all_hold()),
                summary,
                details: to_value(&r),
                tables: vec![],
            }
        }
        Check::ZeroOne { window: w } => {
            let r = match w {
                Some(w) if *w < window => zero_one_diagnostic(&model.restricted(*w)?, tol)?,
                _ => zero_one_diagnostic(model, tol)?,
            };
            let (status, summary) = if !r.applicable {
                (
                    CheckStatus::Skipped,
                    format!("not applicable: {}", r.reason.clone().unwrap_or_default()),
                )
            } else {
                (
                    pass_if(r.trivial_tail == Some(true)),
                    format!(
                        "{} probes at index {}: max deviation {}",
                        r.probes,
                        r.probe_index,
                        sci(r.max_deviation)
                    ),
                )
            };
            Outcome {
                status,
                summary,
                details: to_value(&r),
                tables: vec![],
            }
        }
        Check::MixingGap { x, y, candidate, k } => {
            let n = candidate.build(model)?;
            let gap = mixing_gap(model, &x.spec()?, &y.spec()?, &n, *k)?;
            Outcome {
                status: pass_if(gap <= tol),
                summary: format!("mixing gap at shift {k}: {}", sci(gap)),
                details: json!({"k": k, "gap": gap}),
                tables: vec![],
            }
        }
        Check::Cesaro { x, y, n_max } => {
            let rows = cesaro_table(model, &y.spec()?, &x.spec()?, *n_max)?;
            let worst = rows
                .iter()
                .filter_map(|r| r.step.map(|s| s - r.step_bound))
                .fold(f64::NEG_INFINITY, f64::max);
            let ok = rows.iter().all(|r| r.step.is_none_or(|s| s <= r.step_bound + tol));
            let last = rows.last().expect("n_max ≥ 1");
            Outcome {
                status: pass_if(ok),
                summary: format!(
                    "average at n = {}: {} (gap to ψ(y)ψ(x) {}); rate bound {}",
                    last.n,
                    fmt_c(last.average),
                    sci(last.gap_to_product),
                    if ok { "holds" } else { "violated" }
                ),
                details: json!({"rows": rows, "max_step_excess": if worst.is_finite() { Some(worst) } else { None }}),
                tables: vec![cesaro_csv("cesaro", &rows)],
            }
        }
        Check::RefinedAverage {
            x,
            tests,
            n_values,
            exact_cap,
            samples,
            require_monotone,
        } => {
            let xs = x.spec()?;
            let ys: Vec<MonomialSpec> = tests.iter().map(|t| t.spec()).collect::<Result<_>>()?;
            let px = xs.moment(model)?;
            let targets: Vec<C64> = ys.iter().map(|y| Ok(y.moment(model)? * px)).collect::<Result<_>>()?;
            let results = n_values
                .iter()
                .map(|&n| {
                    refined_average_tn(
                        model,
                        &xs,
                        n,
                        &ys,
                        exact_cap.unwrap_or(TN_EXACT_CAP),
                        samples.unwrap_or(TN_MC_SAMPLES),
                        seed,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let mut monotone = true;
            for (k, target) in targets.iter().enumerate() {
                let gaps: Vec<f64> = results.iter().map(|r| (r.values[k] - target).norm()).collect();
                monotone &= gaps.windows(2).all(|w| w[1] <= w[0] + tol);
            }
            Outcome {
                status: pass_if(!require_monotone || monotone),
                summary: format!(
                    "T_N for N in {n_values:?}; gaps to the trivial-tail target {}",
                    if monotone { "non-increasing" } else { "not monotone" }
                ),
                details: json!({"results": results, "tail_targets": targets, "monotone": monotone}),
                tables: vec![refined_average_csv("t_n", &results, &targets)],
            }
        }
        Check::InducedEndomorphism { n, degree, window: w } => {
            let v = induced_endomorphism_check(model, *n, *degree, w.unwrap_or(window), tol)?;
            let (status, summary) = if !v.applicable {
                (
                    CheckStatus::Skipped,
                    format!("skipped: {}", v.reason.clone().unwrap_or_default()),
                )
            } else {
                (
                    pass_if(v.pass),
                    format!("α_{n} up to degree {degree}: max violation {}", sci(v.max_violation)),
                )
            };
            Outcome {
                status,
                summary,
                details: to_value(&v),
                tables: vec![],
            }
        }
        Check::Clt {
            x,
            p,
            n_values,
            candidate,
            bruteforce_cap,
            expected_limit,
        } => {
            let xe = x.build(model)?;
            let n = candidate.map(|c| c.build(model)).transpose()?;
            let cap = bruteforce_cap.map_or(BRUTEFORCE_CAP, u128::from);
            let r = clt_study(model, &xe, *p, n_values, n.as_ref(), cap, tol)?;
            let limit_ok = match (&r.limit, expected_limit) {
                (Some(l), Some(e)) => (l.limit - e).abs() <= tol,
                (Some(_), None) => true,
                (None, _) => false,
            };
            let ok = r.max_disagreement <= tol && limit_ok;
            let limit_text = match (&r.limit, &r.limit_error) {
                (Some(l), _) => format!("limit p!!·a_p = {} (a_p = {})", l.limit, l.a_p),
                (None, Some(e)) => format!("limit refused: {e}"),
                (None, None) => "limit not computed".into(),
            };
            let tables = vec![r.moment_table("moments"), r.class_csv("classes")];
            Outcome {
                status: pass_if(ok),
                summary: format!(
                    "p = {p}, N in {n_values:?}: path disagreement {}; {limit_text}",
                    sci(r.max_disagreement)
                ),
                details: to_value(&r),
                tables,
            }
        }
        Check::ConditionalClt {
            x,
            p,
            candidate,
            auto_center,
        } => {
            let xe = x.build(model)?;
            let n = candidate.build(model)?;
            let r = conditional_limit_ap(model, &xe, *p, &n, *auto_center, tol)?;
            let ok = r.closed_form_deviation.is_none_or(|d| d <= tol);
            let mut summary = format!(
                "A_{p} computed{}",
                if r.auto_centered { " with auto-centring" } else { "" }
            );
            if let Some(c) = r.scalar {
                summary += &format!(", scalar {}", fmt_c(c));
            }
            if let Some(d) = r.closed_form_deviation {
                summary += &format!(", closed-form deviation {}", sci(d));
            }
            Outcome {
                status: pass_if(ok),
                summary,
                details: to_value(&r),
                tables: vec![],
            }
        }
        Check::Reference { law, p, q, expected } => {
            let v = reference_moment(*law, *p, *q)?;
            let ok = expected.is_none_or(|e| (v - e).abs() <= tol);
            Outcome {
                status: pass_if(ok),
                summary: format!("{} moment p = {p}: {v}", law.as_str()),
                details: json!({"law": law, "p": p, "q": q, "value": v, "expected": expected}),
                tables: vec![],
            }
        }
    })
}
