//! Conditional independence and factorisability relative to a candidate
//! conditioning subalgebra `N`.
//!
//! For index sets `I`, `J` let `M_I` be the subalgebra generated by
//! `ι_i(A_0)`, `i ∈ I`. The pair factorises when
//! `E_N(xy) = E_N(x) E_N(y)` for `x ∈ M_I`, `y ∈ M_J` (CF-style) or for
//! `x ∈ M_I ∨ N`, `y ∈ M_J ∨ N` (CI-style). By bilinearity it suffices to
//! test spanning words of the two algebras. Full modes range over disjoint
//! `I`, `J`; order modes over `I < J` and `I > J`.
//!
//! The true tail algebra is not computable on a finite window, so callers
//! supply the candidate `N`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matalg::{AlgElement, C64};
use crate::seqmodel::RandomSequenceModel;
use crate::subalg::{conditional_expectation, generate_subalgebra_with, CondExp, GenerateOptions, Labeled, Subalgebra};
use crate::symcheck::{check_symmetry, SymmetryKind};
use crate::table::{fmt_f64, Table};

/// Dimension cap for generated `M_I`.
pub const SUBALGEBRA_DIM_CAP: usize = 4096;
/// Tolerance used when classifying the conditional expectation.
pub const CONDEXP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IndependenceMode {
    #[serde(rename = "CI")]
    Ci,
    #[serde(rename = "CIo")]
    CiO,
    #[serde(rename = "CF")]
    Cf,
    #[serde(rename = "CFo")]
    CfO,
}

impl IndependenceMode {
    pub const ALL: [IndependenceMode; 4] = [Self::Ci, Self::CiO, Self::Cf, Self::CfO];

    /// Whether `x`, `y` range over the joins with `N`.
    pub fn joined(self) -> bool {
        matches!(self, Self::Ci | Self::CiO)
    }

    /// Whether only ordered pairs `I < J`, `I > J` are tested.
    pub fn ordered(self) -> bool {
        matches!(self, Self::CiO | Self::CfO)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ci => "CI",
            Self::CiO => "CIo",
            Self::Cf => "CF",
            Self::CfO => "CFo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizationWitness {
    pub i: Vec<usize>,
    pub j: Vec<usize>,
    /// Construction of `x` and `y`, e.g. `ι0(b1)·ι1(b2)`.
    pub x: String,
    pub y: String,
    /// `E_N(xy)` and `E_N(x)E_N(y)` as coordinates in the ψ-orthonormal basis of `N`.
    pub lhs: Vec<C64>,
    pub rhs: Vec<C64>,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceVerdict {
    pub mode: IndependenceMode,
    pub conditioning_dim: usize,
    pub i: Vec<usize>,
    pub j: Vec<usize>,
    pub tolerance: f64,
    pub pass: bool,
    pub max_violation: f64,
    pub witness: Option<FactorizationWitness>,
}

/// Checks on one model and one conditioning candidate, caching the
/// generated subalgebras `M_I` and `M_I ∨ N`.
pub struct IndependenceContext<'m> {
    model: &'m RandomSequenceModel,
    cond: CondExp,
    cache: HashMap<(Vec<usize>, bool), Subalgebra>,
}

impl<'m> IndependenceContext<'m> {
    /// Fails with a conditioning error unless the projection onto `n` is a
    /// valid ψ-preserving conditional expectation.
    pub fn new(model: &'m RandomSequenceModel, n: &Subalgebra) -> Result<Self> {
        let amb = model.ambient()?;
        amb.algebra.ensure_same(n.ambient())?;
        let cond = conditional_expectation(&amb.state, n, CONDEXP_TOL)?;
        cond.require_valid()?;
        Ok(Self {
            model,
            cond,
            cache: HashMap::new(),
        })
    }

    pub fn conditional_expectation(&self) -> &CondExp {
        &self.cond
    }

    fn algebra_for(&mut self, set: &[usize], joined: bool) -> Result<Subalgebra> {
        let key = (set.to_vec(), joined);
        if let Some(s) = self.cache.get(&key) {
            return Ok(s.clone());
        }
        let amb = self.model.ambient()?;
        let mut gens = Vec::new();
        for &i in set {
            for (k, b) in self.model.basis().iter().enumerate() {
                if b.approx_eq(&self.model.base().identity(), 0.0) {
                    continue;
                }
                gens.push(Labeled::new(format!("ι{i}(b{k})"), amb.embeddings[i].apply(b)?));
            }
        }
        if joined {
            for w in self.cond.target().spanning() {
                if w.label != "1" {
                    gens.push(Labeled::new(format!("n[{}]", w.label), w.element.clone()));
                }
            }
        }
        if gens.is_empty() {
            gens.push(Labeled::new("1", amb.algebra.identity()));
        }
        let sub = generate_subalgebra_with(
            &amb.state,
            &gens,
            1e-12,
            GenerateOptions {
                dim_cap: Some(SUBALGEBRA_DIM_CAP),
                ..GenerateOptions::default()
            },
        )?;
        self.cache.insert(key, sub.clone());
        Ok(sub)
    }

    fn coords(&self, x: &AlgElement) -> Vec<C64> {
        let target = self.cond.target();
        target
            .basis()
            .iter()
            .map(|e| target.state().gns_inner(e, x).expect("same algebra"))
            .collect()
    }

    /// `E_N(xy) = E_N(x)E_N(y)` on spanning words of `M_I` (or `M_I ∨ N`)
    /// and `M_J` (or `M_J ∨ N`).
    pub fn check_pair(&mut self, i: &[usize], j: &[usize], joined: bool, tol: f64) -> Result<IndependenceVerdict> {
        for &k in i.iter().chain(j) {
            self.model.check_window("factorisation check", k + 1)?;
        }
        let mi = self.algebra_for(i, joined)?;
        let mj = self.algebra_for(j, joined)?;
        let e = &self.cond;
        let ex: Vec<AlgElement> = mi.spanning().par_iter().map(|x| e.apply(&x.element)).collect();
        let ey: Vec<AlgElement> = mj.spanning().par_iter().map(|y| e.apply(&y.element)).collect();
        let ny = mj.spanning().len();
        let best = (0..mi.spanning().len() * ny)
            .into_par_iter()
            .map(|idx| {
                let (a, b) = (idx / ny, idx % ny);
                let xy = &mi.spanning()[a].element * &mj.spanning()[b].element;
                let dev = (&e.apply(&xy) - &(&ex[a] * &ey[b])).max_abs();
                (dev, idx)
            })
            .reduce_with(|p, q| if q.0 > p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p });
        let (max_violation, idx) = best.unwrap_or((0.0, 0));
        let pass = max_violation <= tol;
        let mode = match (joined, ordered(i, j)) {
            (true, true) => IndependenceMode::CiO,
            (true, false) => IndependenceMode::Ci,
            (false, true) => IndependenceMode::CfO,
            (false, false) => IndependenceMode::Cf,
        };
        let witness = (!pass).then(|| {
            let (a, b) = (idx / ny, idx % ny);
            let x = &mi.spanning()[a];
            let y = &mj.spanning()[b];
            FactorizationWitness {
                i: i.to_vec(),
                j: j.to_vec(),
                x: x.label.clone(),
                y: y.label.clone(),
                lhs: self.coords(&e.apply(&(&x.element * &y.element))),
                rhs: self.coords(&(&ex[a] * &ey[b])),
                deviation: max_violation,
            }
        });
        Ok(IndependenceVerdict {
            mode,
            conditioning_dim: self.cond.target().dim(),
            i: i.to_vec(),
            j: j.to_vec(),
            tolerance: tol,
            pass,
            max_violation,
            witness,
        })
    }

    pub fn check_sequence(&mut self, mode: IndependenceMode, max_set_size: usize, tol: f64) -> Result<SequenceVerdict> {
        if max_set_size == 0 {
            return Err(Error::Validation("max_set_size must be at least 1".into()));
        }
        let window = self.model.window();
        let sets = subsets(window, max_set_size);
        let mut rows = Vec::new();
        let mut worst: Option<IndependenceVerdict> = None;
        for i in &sets {
            for j in &sets {
                let admissible = if mode.ordered() {
                    ordered(i, j)
                } else {
                    i.iter().all(|a| !j.contains(a))
                };
                if !admissible {
                    continue;
                }
                let mut v = self.check_pair(i, j, mode.joined(), tol)?;
                v.mode = mode;
                if worst.as_ref().is_none_or(|w| v.max_violation > w.max_violation) {
                    worst = Some(v.clone());
                }
                rows.push(v);
            }
        }
        let max_violation = worst.as_ref().map_or(0.0, |w| w.max_violation);
        let pass = max_violation <= tol;
        Ok(SequenceVerdict {
            mode,
            max_set_size,
            window,
            conditioning_dim: self.cond.target().dim(),
            tolerance: tol,
            pass,
            max_violation,
            pairs_checked: rows.len(),
            witness: if pass { None } else { worst.and_then(|w| w.witness) },
            pairs: rows,
        })
    }
}

fn ordered(i: &[usize], j: &[usize]) -> bool {
    let (Some(imax), Some(imin), Some(jmax), Some(jmin)) =
        (i.iter().max(), i.iter().min(), j.iter().max(), j.iter().min())
    else {
        return false;
    };
    imax < jmin || jmax < imin
}

/// Nonempty subsets of `{0..window}` with at most `max` elements, by size
/// then lexicographically.
fn subsets(window: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=max.min(window) {
        let mut cur = Vec::new();
        fn rec(start: usize, window: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == size {
                out.push(cur.clone());
                return;
            }
            for k in start..window {
                cur.push(k);
                rec(k + 1, window, size, cur, out);
                cur.pop();
            }
        }
        rec(0, window, size, &mut cur, &mut out);
    }
    out
}

/// Single-pair check, see [`IndependenceContext::check_pair`].
pub fn check_factorizability(
    model: &RandomSequenceModel,
    n: &Subalgebra,
    i: &[usize],
    j: &[usize],
    joined: bool,
    tol: f64,
) -> Result<IndependenceVerdict> {
    IndependenceContext::new(model, n)?.check_pair(i, j, joined, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SequenceVerdict {
    pub mode: IndependenceMode,
    pub max_set_size: usize,
    pub window: usize,
    pub conditioning_dim: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub max_violation: f64,
    pub pairs_checked: usize,
    pub witness: Option<FactorizationWitness>,
    #[serde(skip)]
    pub pairs: Vec<IndependenceVerdict>,
}

impl SequenceVerdict {
    /// One row per tested pair: `I, J, mode, max_violation`.
    pub fn table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["I", "J", "mode", "max_violation"]);
        for v in &self.pairs {
            t.push(vec![
                crate::table::fmt_indices(&v.i),
                crate::table::fmt_indices(&v.j),
                self.mode.as_str().to_string(),
                fmt_f64(v.max_violation),
            ]);
        }
        t
    }
}

/// All pairs of index sets of size at most `max_set_size` in the model
/// window, in the given mode.
pub fn check_sequence_independence(
    model: &RandomSequenceModel,
    n: &Subalgebra,
    mode: IndependenceMode,
    max_set_size: usize,
    tol: f64,
) -> Result<SequenceVerdict> {
    IndependenceContext::new(model, n)?.check_sequence(mode, max_set_size, tol)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroOneReport {
    pub applicable: bool,
    pub reason: Option<String>,
    /// Whether every far-shift functional `y ↦ ψ(y ι_k(a))` is `ψ(y)·ψ(ι_k(a))`.
    pub trivial_tail: Option<bool>,
    pub max_deviation: f64,
    pub probe_index: usize,
    pub probes: usize,
    pub tolerance: f64,
}

/// Finite-window tail diagnostic.
///
/// Requires order ℂ-independence (pairs of sets of size at most two). The
/// tail expectation of `ι_k(a)` at the far end `k = L − 1` is probed
/// against test monomials `y` of length at most two on indices below `k`;
/// a trivial tail makes every such functional a multiple of `ψ`.
pub fn zero_one_diagnostic(model: &RandomSequenceModel, tol: f64) -> Result<ZeroOneReport> {
    let window = model.window();
    let skip = |reason: String| ZeroOneReport {
        applicable: false,
        reason: Some(reason),
        trivial_tail: None,
        max_deviation: 0.0,
        probe_index: window.saturating_sub(1),
        probes: 0,
        tolerance: tol,
    };
    if window < 2 {
        return Ok(skip("window must hold at least two indices".into()));
    }
    let amb = model.ambient()?;
    let scalars = Subalgebra::scalars(&amb.state);
    let pre = check_sequence_independence(model, &scalars, IndependenceMode::CiO, 2, tol)?;
    if !pre.pass {
        return Ok(skip(format!(
            "model is not order ℂ-independent on the window (max violation {:.3e})",
            pre.max_violation
        )));
    }
    let k = window - 1;
    let nb = model.basis().len();
    let mut tests: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for i in 0..k {
        for a in 0..nb {
            tests.push((vec![i], vec![a]));
        }
    }
    for i in 0..k {
        for j in 0..k {
            for a in 0..nb {
                for b in 0..nb {
                    tests.push((vec![i, j], vec![a, b]));
                }
            }
        }
    }
    let mut max_dev: f64 = 0.0;
    let mut probes = 0;
    for c in 0..nb {
        let tail = model.psi_moment(&vec![k].into(), &[c])?;
        for (t, b) in &tests {
            let y = model.psi_moment(&t.clone().into(), b)?;
            let mut tt = t.clone();
            tt.push(k);
            let mut bb = b.clone();
            bb.push(c);
            let joint = model.psi_moment(&tt.into(), &bb)?;
            max_dev = max_dev.max((joint - y * tail).norm());
            probes += 1;
        }
    }
    Ok(ZeroOneReport {
        applicable: true,
        reason: None,
        trivial_tail: Some(max_dev <= tol),
        max_deviation: max_dev,
        probe_index: k,
        probes,
        tolerance: tol,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImplicationStatus {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Implication {
    pub from: IndependenceMode,
    pub to: IndependenceMode,
    pub status: ImplicationStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizabilityAudit {
    pub applicable: bool,
    pub reason: Option<String>,
    pub stationary: bool,
    /// `max |ψ(shift(y)·n) − ψ(y·n)|` over test monomials `y` and basis `n` of `N`.
    pub shift_invariance_deviation: f64,
    pub verdicts: Vec<SequenceVerdict>,
    pub implications: Vec<Implication>,
    pub findings: Vec<String>,
}

/// Under stationarity with `N` shift-invariant, full (order)
/// factorisability should coincide with full (order) independence. The
/// audit runs all four modes and reports the implications
/// `CF ⇒ CI` and `CFo ⇒ CIo` on the window.
pub fn factorizability_vs_independence_audit(
    model: &RandomSequenceModel,
    n: &Subalgebra,
    max_set_size: usize,
    tol: f64,
) -> Result<FactorizabilityAudit> {
    let window = model.window();
    let stationary = check_symmetry(model, SymmetryKind::Stationary, 3.min(window).max(1), window, tol)?.pass;
    let amb = model.ambient()?;
    // shift invariance of N at moment level, on words of length ≤ 2
    let nb = model.basis().len();
    let mut shift_dev: f64 = 0.0;
    if window >= 2 {
        let mut words: Vec<Vec<(usize, usize)>> = Vec::new();
        for i in 0..window - 1 {
            for a in 0..nb {
                words.push(vec![(i, a)]);
                for j in 0..window - 1 {
                    for b in 0..nb {
                        words.push(vec![(i, a), (j, b)]);
                    }
                }
            }
        }
        let build = |word: &[(usize, usize)], shift: usize| -> Result<AlgElement> {
            let mut acc = amb.algebra.identity();
            for &(i, a) in word {
                acc = &acc * &amb.embeddings[i + shift].apply(&model.basis()[a])?;
            }
            Ok(acc)
        };
        for w in &words {
            let y = build(w, 0)?;
            let ys = build(w, 1)?;
            for e in n.basis() {
                let d = amb.state.eval(&(&ys * e))? - amb.state.eval(&(&y * e))?;
                shift_dev = shift_dev.max(d.norm());
            }
        }
    }
    let mut ctx = IndependenceContext::new(model, n)?;
    let verdicts = IndependenceMode::ALL
        .iter()
        .map(|&m| ctx.check_sequence(m, max_set_size, tol))
        .collect::<Result<Vec<_>>>()?;
    let pass_of = |m: IndependenceMode| verdicts.iter().find(|v| v.mode == m).map(|v| v.pass).unwrap_or(false);
    let applicable = stationary && shift_dev <= tol;
    let reason = if !stationary {
        Some("model is not stationary on the window".to_string())
    } else if shift_dev > tol {
        Some(format!("candidate is not shift-invariant (deviation {shift_dev:.3e})"))
    } else {
        None
    };
    let mut findings = Vec::new();
    let implications = [
        (IndependenceMode::Cf, IndependenceMode::Ci),
        (IndependenceMode::CfO, IndependenceMode::CiO),
    ]
    .iter()
    .map(|&(from, to)| {
        let status = if !applicable || !pass_of(from) {
            ImplicationStatus::NotApplicable
        } else if pass_of(to) {
            ImplicationStatus::Holds
        } else {
            findings.push(format!(
                "{} passes but {} fails on the window",
                from.as_str(),
                to.as_str()
            ));
            ImplicationStatus::Violated
        };
        Implication { from, to, status }
    })
    .collect();
    for (strong, weak) in [
        (IndependenceMode::Ci, IndependenceMode::Cf),
        (IndependenceMode::Ci, IndependenceMode::CiO),
        (IndependenceMode::Cf, IndependenceMode::CfO),
    ] {
        if pass_of(strong) && !pass_of(weak) {
            findings.push(format!(
                "internal inconsistency: {} passes but {} fails",
                strong.as_str(),
                weak.as_str()
            ));
        }
    }
    Ok(FactorizabilityAudit {
        applicable,
        reason,
        stationary,
        shift_invariance_deviation: shift_dev,
        verdicts,
        implications,
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::{BlockAlgebra, FaithfulState};
    use crate::seqmodel::*;

    fn coin() -> RandomSequenceModel {
        coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 4).unwrap()
    }

    #[test]
    fn iid_is_c_independent() {
        let m = iid_tensor_sequence(&FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap()), 3).unwrap();
        let c = Subalgebra::scalars(&m.ambient().unwrap().state);
        assert!(check_factorizability(&m, &c, &[0], &[1], false, 1e-10).unwrap().pass);
        let v = check_sequence_independence(&m, &c, IndependenceMode::Ci, 2, 1e-10).unwrap();
        assert!(v.pass && v.pairs_checked > 0);
    }

    #[test]
    fn coin_conditional_independence() {
        let m = coin();
        let n = m.fiber_scalars().unwrap();
        assert!(check_factorizability(&m, &n, &[0], &[1], true, 1e-10).unwrap().pass);
        let c = Subalgebra::scalars(&m.ambient().unwrap().state);
        let v = check_factorizability(&m, &c, &[0], &[1], false, 1e-10).unwrap();
        assert!(!v.pass);
        assert!((v.max_violation - 0.04).abs() < 1e-10);
        let w = v.witness.unwrap();
        assert!(((w.lhs[0] - w.rhs[0]).norm() - 0.04).abs() < 1e-10);
    }

    #[test]
    fn subsets_and_order() {
        assert_eq!(subsets(3, 2).len(), 6);
        assert!(ordered(&[0, 1], &[2]));
        assert!(ordered(&[3], &[0, 2]));
        assert!(!ordered(&[0, 2], &[1]));
    }

    #[test]
    fn zero_one_cases() {
        let m = iid_tensor_sequence(&FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap()), 4).unwrap();
        let r = zero_one_diagnostic(&m, 1e-10).unwrap();
        assert_eq!(r.trivial_tail, Some(true));
        let r = zero_one_diagnostic(&coin(), 1e-10).unwrap();
        assert!(!r.applicable && r.reason.is_some());
        let w = codomain_perturbed_sequence(C64::new(0.0, 1.0), 4).unwrap();
        assert_eq!(zero_one_diagnostic(&w, 1e-10).unwrap().trivial_tail, Some(true));
    }

    #[test]
    fn audit_on_coin() {
        let m = coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 3).unwrap();
        let n = m.fiber_scalars().unwrap();
        let a = factorizability_vs_independence_audit(&m, &n, 1, 1e-10).unwrap();
        assert!(a.applicable, "{:?}", a.reason);
        assert!(a.verdicts.iter().all(|v| v.pass));
        assert!(a.implications.iter().all(|i| i.status == ImplicationStatus::Holds));
        assert!(a.findings.is_empty());
    }
}
