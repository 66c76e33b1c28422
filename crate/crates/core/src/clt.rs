//! Central-limit moments of `S_N(x) = N^{-1/2} Σ_{n<N} ι_n(x)`.
//!
//! Finite-`N` moments are exact, computed either by brute force over all
//! tuples or by summing over order classes weighted by their sizes. Only
//! [`clt_limit`] and [`conditional_limit_ap`] apply the pair-class limit
//! formula, and both refuse models that fail the spreadability gate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matalg::{pairwise_sum, AlgElement, C64};
use crate::seqmodel::RandomSequenceModel;
use crate::subalg::{conditional_expectation, Subalgebra};
use crate::symcheck::{check_symmetry_on, SymmetryKind, SymmetryVerdict};
use crate::table::{fmt_f64, Table};
use crate::tuplecomb::{
    catalan, count_tuples_in_class, enumerate_order_classes, enumerate_pair_classes, enumerate_pair_partitions,
    pair_double_factorial, EquivClass, IndexTuple,
};

pub const BRUTEFORCE_CAP: u128 = 10_000_000;
pub const CLT_TOL: f64 = 1e-9;
const CHUNK: usize = 4096;

fn require_hermitian(x: &AlgElement) -> Result<()> {
    if x.is_hermitian(1e-12) {
        Ok(())
    } else {
        Err(Error::Precondition("x must be hermitian".into()))
    }
}

fn check_order(p: usize) -> Result<()> {
    if p == 0 {
        Err(Error::Validation("moment order p must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `ψ(S_N(x)^p)` summed over all `N^p` index tuples.
pub fn sn_moment_bruteforce(model: &RandomSequenceModel, x: &AlgElement, p: usize, big_n: usize) -> Result<f64> {
    sn_moment_bruteforce_with_cap(model, x, p, big_n, BRUTEFORCE_CAP)
}

pub fn sn_moment_bruteforce_with_cap(
    model: &RandomSequenceModel,
    x: &AlgElement,
    p: usize,
    big_n: usize,
    cap: u128,
) -> Result<f64> {
    check_order(p)?;
    require_hermitian(x)?;
    if big_n == 0 {
        return Err(Error::Validation("N must be at least 1".into()));
    }
    model.check_window(&format!("S_{big_n}"), big_n)?;
    let total = (big_n as u128).checked_pow(p as u32).unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::Resource {
            what: format!("brute-force enumeration of {big_n}^{p} tuples (use the order-class path)"),
            size: total,
            cap,
        });
    }
    let total = total as usize;
    let elems = vec![x.clone(); p];
    let chunks = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut tuple = vec![0usize; p];
            let terms = (c * CHUNK..((c + 1) * CHUNK).min(total))
                .map(|mut idx| {
                    for slot in tuple.iter_mut().rev() {
                        *slot = idx % big_n;
                        idx /= big_n;
                    }
                    model.moment_of_elements(&IndexTuple::new(tuple.clone()), &elems)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&terms))
        })
        .collect::<Result<Vec<C64>>>()?;
    Ok(pairwise_sum(&chunks).re / (big_n as f64).powf(p as f64 / 2.0))
}

/// Spreadability of the moments of `x` alone, up to degree `p` on window
/// `min(L, p + 1)`.
pub fn spreadability_gate(model: &RandomSequenceModel, x: &AlgElement, p: usize, tol: f64) -> Result<SymmetryVerdict> {
    check_order(p)?;
    let window = model.window().min(p + 1);
    check_symmetry_on(model, SymmetryKind::Spreadable, std::slice::from_ref(x), p, window, tol)
}

fn require_spreadable(model: &RandomSequenceModel, x: &AlgElement, p: usize, tol: f64) -> Result<SymmetryVerdict> {
    let v = spreadability_gate(model, x, p, tol)?;
    if v.pass {
        Ok(v)
    } else {
        Err(Error::Precondition(format!(
            "model {} is not spreadable in x ({}: max violation {:.3e}); the class decomposition would be unsound",
            model.label(),
            v.scope(),
            v.max_violation
        )))
    }
}

/// Class moment `ψ(ι[rep; x, …, x])` for each class.
fn class_moments(model: &RandomSequenceModel, x: &AlgElement, classes: &[EquivClass]) -> Result<Vec<C64>> {
    classes
        .par_iter()
        .map(|c| model.moment_of_elements(&c.representative, &vec![x.clone(); c.representative.len()]))
        .collect()
}

/// `ψ(S_N(x)^p)` as a sum over order classes, each counted `C(N, k)` times.
pub fn sn_moment_by_classes(
    model: &RandomSequenceModel,
    x: &AlgElement,
    p: usize,
    big_n: usize,
    tol: f64,
) -> Result<f64> {
    require_hermitian(x)?;
    require_spreadable(model, x, p, tol)?;
    model.check_window("order-class representatives", p)?;
    let classes = enumerate_order_classes(p)?;
    let moments = class_moments(model, x, &classes)?;
    Ok(class_sum(&classes, &moments, big_n, p))
}

fn class_sum(classes: &[EquivClass], moments: &[C64], big_n: usize, p: usize) -> f64 {
    let terms: Vec<C64> = classes
        .iter()
        .zip(moments)
        .map(|(c, m)| m * count_tuples_in_class(c, big_n) as f64)
        .collect();
    pairwise_sum(&terms).re / (big_n as f64).powf(p as f64 / 2.0)
}

/// `p!! · (1/|O_2(p)|) Σ moments`, the limit formula on given class moments.
pub fn limit_formula(p: usize, class_moments: &[f64]) -> f64 {
    if p % 2 == 1 || class_moments.is_empty() {
        return 0.0;
    }
    let mean = class_moments.iter().sum::<f64>() / class_moments.len() as f64;
    pair_double_factorial(p) as f64 * mean
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassRow {
    pub canonical: IndexTuple,
    pub moment: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitEstimate {
    pub p: usize,
    /// `a_p(x)`, the mean pair-class moment.
    pub a_p: f64,
    pub double_factorial: u128,
    /// `p!! · a_p(x)`.
    pub limit: f64,
    /// `a_p / a_2^{p/2}`, the normalised ratio (absent when `a_2 = 0`).
    pub ratio_to_variance: Option<f64>,
    /// `|E(x)|` over the candidate used to verify centering.
    pub centering_deviation: f64,
    pub classes: Vec<ClassRow>,
}

fn centering_deviation(model: &RandomSequenceModel, x: &AlgElement, candidate: Option<&Subalgebra>) -> Result<f64> {
    match candidate {
        None => Ok(model
            .moment_of_elements(&IndexTuple::new(vec![0]), std::slice::from_ref(x))?
            .norm()),
        Some(n) => {
            let amb = model.ambient()?;
            let cond = conditional_expectation(&amb.state, n, 1e-9)?;
            cond.require_valid()?;
            Ok(cond.apply(&model.embed(0, x)?).operator_norm())
        }
    }
}

/// The limit `p!! · a_p(x)`. Without a candidate tail `x` must satisfy
/// `ψ(x) = 0`; with one, `E(ι_0(x)) = 0` is required.
pub fn clt_limit(
    model: &RandomSequenceModel,
    x: &AlgElement,
    p: usize,
    candidate: Option<&Subalgebra>,
    tol: f64,
) -> Result<LimitEstimate> {
    require_hermitian(x)?;
    require_spreadable(model, x, p, tol)?;
    let dev = centering_deviation(model, x, candidate)?;
    if dev > tol {
        return Err(Error::Precondition(format!(
            "x is not centred over the candidate tail: |E(x)| = {dev:.3e} exceeds {tol:.1e}"
        )));
    }
    let mut est = LimitEstimate {
        p,
        a_p: 0.0,
        double_factorial: pair_double_factorial(p),
        limit: 0.0,
        ratio_to_variance: None,
        centering_deviation: dev,
        classes: Vec::new(),
    };
    if p % 2 == 1 {
        return Ok(est);
    }
    model.check_window("pair-class representatives", p / 2)?;
    let classes = enumerate_pair_classes(p)?;
    let moments: Vec<f64> = class_moments(model, x, &classes)?.iter().map(|m| m.re).collect();
    let weight = 1.0 / classes.len() as f64;
    est.a_p = moments.iter().sum::<f64>() * weight;
    est.limit = limit_formula(p, &moments);
    let a2 = model
        .moment_of_elements(&IndexTuple::new(vec![0, 0]), &[x.clone(), x.clone()])?
        .re;
    est.ratio_to_variance = (a2.abs() > 1e-300).then(|| est.a_p / a2.powi(p as i32 / 2));
    est.classes = classes
        .into_iter()
        .zip(moments)
        .map(|(c, moment)| ClassRow {
            canonical: c.representative,
            moment,
            weight,
        })
        .collect();
    Ok(est)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionalLimit {
    pub p: usize,
    /// `A_p(x)` scaled by `p!!`.
    pub element: AlgElement,
    /// Set when `ι_i(x)` was replaced by `ι_i(x) − E(ι_i(x))`.
    pub auto_centered: bool,
    pub centering_deviation: f64,
    /// `p!! · E(X_0²)^{p/2}`, computed when the ambient is commutative.
    pub closed_form: Option<AlgElement>,
    pub closed_form_deviation: Option<f64>,
    /// `Some(c)` when the element is the scalar `c · 1`.
    pub scalar: Option<C64>,
}

/// `p!! · (1/|O_2(p)|) Σ_{[i] ∈ O_2(p)} E(X_{i(1)} ⋯ X_{i(p)})` with
/// `X_n = ι_n(x)`, or `ι_n(x) − E(ι_n(x))` when `auto_center` is set.
pub fn conditional_limit_ap(
    model: &RandomSequenceModel,
    x: &AlgElement,
    p: usize,
    candidate: &Subalgebra,
    auto_center: bool,
    tol: f64,
) -> Result<ConditionalLimit> {
    require_hermitian(x)?;
    require_spreadable(model, x, p, tol)?;
    let amb = model.ambient()?;
    let cond = conditional_expectation(&amb.state, candidate, 1e-9)?;
    cond.require_valid()?;
    let width = if p.is_multiple_of(2) { p / 2 } else { 1 };
    model.check_window("pair-class representatives", width)?;
    let raw: Vec<AlgElement> = (0..width).map(|n| model.embed(n, x)).collect::<Result<_>>()?;
    let dev = cond.apply(&raw[0]).operator_norm();
    if !auto_center && dev > tol {
        return Err(Error::Precondition(format!(
            "x is not centred over the candidate tail: |E(x)| = {dev:.3e} exceeds {tol:.1e}"
        )));
    }
    let xs: Vec<AlgElement> = if auto_center {
        raw.iter().map(|r| r - &cond.apply(r)).collect()
    } else {
        raw
    };
    let zero = amb.algebra.zero();
    let mut out = ConditionalLimit {
        p,
        element: zero.clone(),
        auto_centered: auto_center,
        centering_deviation: dev,
        closed_form: None,
        closed_form_deviation: None,
        scalar: Some(C64::new(0.0, 0.0)),
    };
    if p % 2 == 1 {
        return Ok(out);
    }
    let classes = enumerate_pair_classes(p)?;
    let terms: Vec<AlgElement> = classes
        .par_iter()
        .map(|c| {
            let mut acc = amb.algebra.identity();
            for &i in c.representative.entries() {
                acc = &acc * &xs[i];
            }
            cond.apply(&acc)
        })
        .collect();
    let mut sum = zero;
    for t in &terms {
        sum.axpy(C64::new(1.0, 0.0), t);
    }
    let scale = pair_double_factorial(p) as f64 / classes.len() as f64;
    out.element = sum.scale(C64::new(scale, 0.0));
    out.scalar = out.element.as_scalar(tol);
    if amb.algebra.is_commutative() {
        let var = cond.apply(&(&xs[0] * &xs[0]));
        let mut pow = amb.algebra.identity();
        for _ in 0..p / 2 {
            pow = &pow * &var;
        }
        let closed = pow.scale(C64::new(pair_double_factorial(p) as f64, 0.0));
        out.closed_form_deviation = Some((&out.element - &closed).max_abs());
        out.closed_form = Some(closed);
    }
    Ok(out)
}

/// Reference laws for unit variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceLaw {
    Gaussian,
    Semicircle,
    QInterp,
}

impl ReferenceLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceLaw::Gaussian => "gaussian",
            ReferenceLaw::Semicircle => "semicircle",
            ReferenceLaw::QInterp => "q_interp",
        }
    }
}

/// `p`-th moment of a reference law: `p!!` (Gaussian), `C_{p/2}`
/// (semicircle) or `Σ_{π ∈ P_2(p)} q^{cr(π)}`; zero for odd `p`.
pub fn reference_moment(law: ReferenceLaw, p: usize, q: Option<f64>) -> Result<f64> {
    if law == ReferenceLaw::QInterp {
        match q {
            Some(q) if (0.0..=1.0).contains(&q) => {}
            Some(q) => return Err(Error::Validation(format!("q = {q} outside [0, 1]"))),
            None => return Err(Error::Validation("q_interp needs a value of q".into())),
        }
    }
    if p % 2 == 1 {
        return Ok(0.0);
    }
    Ok(match law {
        ReferenceLaw::Gaussian => pair_double_factorial(p) as f64,
        ReferenceLaw::Semicircle => catalan(p / 2) as f64,
        ReferenceLaw::QInterp => {
            let q = q.unwrap_or_default();
            let terms: Vec<f64> = enumerate_pair_partitions(p)?
                .iter()
                .map(|pi| q.powi(pi.crossing_number() as i32))
                .collect();
            terms.iter().sum()
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub n: usize,
    pub bruteforce: Option<f64>,
    pub by_classes: Option<f64>,
    /// `|bruteforce − by_classes|` when both exist.
    pub agreement: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderClassRow {
    pub canonical: IndexTuple,
    pub k: usize,
    pub moment: f64,
    /// Number of tuples in the class at the largest `N`.
    pub count: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CLTResult {
    pub p: usize,
    pub ns: Vec<usize>,
    pub rows: Vec<MomentRow>,
    pub gate: SymmetryVerdict,
    pub limit: Option<LimitEstimate>,
    pub limit_error: Option<String>,
    pub class_table: Vec<OrderClassRow>,
    pub references: Vec<(ReferenceLaw, f64)>,
    /// Largest brute-force/class disagreement.
    pub max_disagreement: f64,
}

/// Finite-`N` moments for every `N` in `ns` along both paths where
/// available, plus the limit estimate and reference values.
pub fn clt_study(
    model: &RandomSequenceModel,
    x: &AlgElement,
    p: usize,
    ns: &[usize],
    candidate: Option<&Subalgebra>,
    bruteforce_cap: u128,
    tol: f64,
) -> Result<CLTResult> {
    require_hermitian(x)?;
    let gate = spreadability_gate(model, x, p, tol)?;
    let classes = if gate.pass && model.window() >= p {
        let cls = enumerate_order_classes(p)?;
        let m = class_moments(model, x, &cls)?;
        Some((cls, m))
    } else {
        None
    };
    let mut rows = Vec::with_capacity(ns.len());
    let mut max_dis: f64 = 0.0;
    for &n in ns {
        let bf = match sn_moment_bruteforce_with_cap(model, x, p, n, bruteforce_cap) {
            Ok(v) => Some(v),
            Err(Error::Resource { .. }) => None,
            Err(e) => return Err(e),
        };
        let bc = classes.as_ref().map(|(c, m)| class_sum(c, m, n, p));
        let agreement = bf.zip(bc).map(|(a, b)| (a - b).abs());
        max_dis = max_dis.max(agreement.unwrap_or(0.0));
        rows.push(MomentRow {
            n,
            bruteforce: bf,
            by_classes: bc,
            agreement,
        });
    }
    let (limit, limit_error) = match clt_limit(model, x, p, candidate, tol) {
        Ok(l) => (Some(l), None),
        Err(e @ (Error::Precondition(_) | Error::Conditioning(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let class_table = classes
        .map(|(cls, m)| {
            cls.iter()
                .zip(m)
                .map(|(c, v)| OrderClassRow {
                    canonical: c.representative.clone(),
                    k: c.distinct_values,
                    moment: v.re,
                    count: count_tuples_in_class(c, n_max),
                })
                .collect()
        })
        .unwrap_or_default();
    let references = vec![
        (
            ReferenceLaw::Gaussian,
            reference_moment(ReferenceLaw::Gaussian, p, None)?,
        ),
        (
            ReferenceLaw::Semicircle,
            reference_moment(ReferenceLaw::Semicircle, p, None)?,
        ),
    ];
    Ok(CLTResult {
        p,
        ns: ns.to_vec(),
        rows,
        gate,
        limit,
        limit_error,
        class_table,
        references,
        max_disagreement: max_dis,
    })
}

impl CLTResult {
    /// Columns `N, p, bruteforce, by_classes, gaussian, semicircle`.
    pub fn moment_table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["N", "p", "bruteforce", "by_classes", "gaussian", "semicircle"]);
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            t.push(vec![
                r.n.to_string(),
                self.p.to_string(),
                opt(r.bruteforce),
                opt(r.by_classes),
                fmt_f64(self.references[0].1),
                fmt_f64(self.references[1].1),
            ]);
        }
        t
    }

    pub fn class_csv(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["canonical_form", "k", "class_moment", "count"]);
        for r in &self.class_table {
            t.push(vec![
                r.canonical.to_string(),
                r.k.to_string(),
                fmt_f64(r.moment),
                r.count.to_string(),
            ]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::{BlockAlgebra, FaithfulState};
    use crate::seqmodel::*;

    fn iid(window: usize) -> (RandomSequenceModel, AlgElement) {
        let m = iid_tensor_sequence(
            &FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap()),
            window,
        )
        .unwrap();
        let x = m.basis()[PAULI_X].clone();
        (m, x)
    }

    #[test]
    fn bruteforce_examples() {
        let (m, x) = iid(8);
        for n in 1..=8 {
            assert!((sn_moment_bruteforce(&m, &x, 2, n).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((sn_moment_bruteforce(&m, &x, 4, 2).unwrap() - 2.0).abs() < 1e-12);
        let one = m.base().identity();
        assert!((sn_moment_bruteforce(&m, &one, 4, 3).unwrap() - 9.0).abs() < 1e-12);
        let err = sn_moment_bruteforce_with_cap(&m, &x, 4, 8, 100).unwrap_err();
        assert!(matches!(err, Error::Resource { .. }));
    }

    #[test]
    fn class_path_agrees() {
        let (m, x) = iid(16);
        for n in 2..=4 {
            let a = sn_moment_bruteforce(&m, &x, 4, n).unwrap();
            let b = sn_moment_by_classes(&m, &x, 4, n, CLT_TOL).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        assert!((sn_moment_by_classes(&m, &x, 4, 16, CLT_TOL).unwrap() - 2.875).abs() < 1e-12);
        assert!(sn_moment_by_classes(&m, &x, 3, 7, CLT_TOL).unwrap().abs() < 1e-10);
    }

    #[test]
    fn class_path_refuses_non_spreadable() {
        let m = codomain_perturbed_sequence(C64::new(0.0, 1.0), 4).unwrap();
        let x = m.basis()[PAULI_X].clone();
        assert!(matches!(
            sn_moment_by_classes(&m, &x, 4, 4, CLT_TOL),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn limit_examples() {
        let (m, x) = iid(6);
        let l = clt_limit(&m, &x, 4, None, CLT_TOL).unwrap();
        assert_eq!(l.classes.len(), 6);
        assert!((l.a_p - 1.0).abs() < 1e-12 && (l.limit - 3.0).abs() < 1e-12);
        let l2 = clt_limit(&m, &x, 2, None, CLT_TOL).unwrap();
        assert!((l2.limit - 1.0).abs() < 1e-12);
        assert_eq!(clt_limit(&m, &x, 5, None, CLT_TOL).unwrap().limit, 0.0);
        assert_eq!(limit_formula(6, &[0.5; 15]), 15.0 * 0.5);
    }

    #[test]
    fn coin_conditional_limit() {
        let m = coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 4).unwrap();
        let n = m.fiber_scalars().unwrap();
        let e1 = m.basis()[0].clone();
        let a = conditional_limit_ap(&m, &e1, 4, &n, true, CLT_TOL).unwrap();
        assert!(a.closed_form_deviation.unwrap() <= 1e-9);
        assert!((a.scalar.unwrap() - C64::new(3.0 * 0.21 * 0.21, 0.0)).norm() < 1e-12);
        let centred = &e1 - &m.base().identity().scale(C64::new(0.5, 0.0));
        assert!(matches!(
            clt_limit(&m, &centred, 4, Some(&n), CLT_TOL),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            conditional_limit_ap(&m, &centred, 4, &n, false, CLT_TOL),
            Err(Error::Precondition(_))
        ));
        let odd = conditional_limit_ap(&m, &e1, 3, &n, true, CLT_TOL).unwrap();
        assert_eq!(odd.element.max_abs(), 0.0);
    }

    #[test]
    fn trivial_tail_scalar() {
        let (m, x) = iid(4);
        let c = Subalgebra::scalars(&m.ambient().unwrap().state);
        let a = conditional_limit_ap(&m, &x, 4, &c, false, CLT_TOL).unwrap();
        let l = clt_limit(&m, &x, 4, Some(&c), CLT_TOL).unwrap();
        assert!((a.scalar.unwrap() - C64::new(l.limit, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn reference_laws() {
        assert_eq!(reference_moment(ReferenceLaw::Gaussian, 4, None).unwrap(), 3.0);
        assert_eq!(reference_moment(ReferenceLaw::Semicircle, 6, None).unwrap(), 5.0);
        assert_eq!(reference_moment(ReferenceLaw::QInterp, 4, Some(0.0)).unwrap(), 2.0);
        assert_eq!(reference_moment(ReferenceLaw::QInterp, 4, Some(1.0)).unwrap(), 3.0);
        assert!(reference_moment(ReferenceLaw::QInterp, 4, Some(1.5)).is_err());
        assert_eq!(reference_moment(ReferenceLaw::Gaussian, 5, None).unwrap(), 0.0);
    }

    #[test]
    fn study_table() {
        let (m, x) = iid(8);
        let r = clt_study(&m, &x, 4, &[2, 4, 8], None, BRUTEFORCE_CAP, CLT_TOL).unwrap();
        assert!(r.max_disagreement < 1e-10);
        for row in &r.rows {
            assert!((row.bruteforce.unwrap() - (3.0 - 2.0 / row.n as f64)).abs() < 1e-10);
        }
        assert_eq!(r.moment_table("m").rows.len(), 3);
        assert_eq!(r.class_table.len(), 75);
    }
}
