//! Index shifts at the level of moments.
//!
//! A finite window cannot host the shift endomorphism itself, so every
//! object here acts on monomial specifications `ι[i; a]` through the
//! identification `α^k ∘ ι_0 = ι_k`: shifting a monomial shifts its tuple.
//! The module provides shifted moments, Cesàro averages, mixing gaps against
//! a candidate subalgebra, the refined average `T_N` built from partial-shift
//! composites, and a moment-level check of the induced endomorphisms `α_N`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matalg::{pairwise_sum, pairwise_sum_real, AlgElement, C64};
use crate::seqmodel::RandomSequenceModel;
use crate::subalg::{conditional_expectation, Subalgebra};
use crate::symcheck::{check_symmetry, SymmetryKind};
use crate::table::{fmt_f64, fmt_indices, Table};
use crate::tuplecomb::{partial_shift, theta_image_bound, IndexTuple, ThetaComposite};

/// Largest `N` for which `T_N` is computed exactly.
pub const TN_EXACT_CAP: usize = 4;
pub const TN_MC_SAMPLES: usize = 2000;
pub const TN_MC_SEED: u64 = 0x5EED;

/// `ι[i; a]` with `a_k = basis[basis_choice[k]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MonomialSpec {
    pub tuple: IndexTuple,
    pub basis_choice: Vec<usize>,
}

impl MonomialSpec {
    pub fn new(tuple: Vec<usize>, basis_choice: Vec<usize>) -> Result<Self> {
        if tuple.len() != basis_choice.len() {
            return Err(Error::LengthMismatch {
                left: tuple.len(),
                right: basis_choice.len(),
            });
        }
        Ok(Self {
            tuple: IndexTuple::new(tuple),
            basis_choice,
        })
    }

    /// The empty monomial (the identity).
    pub fn identity() -> Self {
        Self {
            tuple: IndexTuple::default(),
            basis_choice: Vec::new(),
        }
    }

    pub fn shifted(&self, k: usize) -> Self {
        Self {
            tuple: self.tuple.translated(k),
            basis_choice: self.basis_choice.clone(),
        }
    }

    /// The adjoint monomial; the basis is hermitian, so only the order reverses.
    pub fn adjoint(&self) -> Self {
        let mut t = self.tuple.entries().to_vec();
        t.reverse();
        let mut b = self.basis_choice.clone();
        b.reverse();
        Self {
            tuple: IndexTuple::new(t),
            basis_choice: b,
        }
    }

    pub fn concat(&self, other: &MonomialSpec) -> Self {
        let mut t = self.tuple.entries().to_vec();
        t.extend_from_slice(other.tuple.entries());
        let mut b = self.basis_choice.clone();
        b.extend_from_slice(&other.basis_choice);
        Self {
            tuple: IndexTuple::new(t),
            basis_choice: b,
        }
    }

    /// One past the largest index, or 0 for the identity.
    pub fn extent(&self) -> usize {
        self.tuple.max_entry().map_or(0, |m| m + 1)
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.tuple, fmt_indices(&self.basis_choice))
    }

    pub fn moment(&self, model: &RandomSequenceModel) -> Result<C64> {
        model.psi_moment(&self.tuple, &self.basis_choice)
    }

    /// The ambient element `ι[i; a]`.
    pub fn element(&self, model: &RandomSequenceModel) -> Result<AlgElement> {
        let amb = model.ambient()?;
        model.check_window(&format!("monomial {}", self.tuple), self.extent())?;
        let mut acc = amb.algebra.identity();
        for (&i, &b) in self.tuple.entries().iter().zip(&self.basis_choice) {
            acc = &acc * &amb.embeddings[i].apply(&model.basis()[b])?;
        }
        Ok(acc)
    }
}

fn require_shift_semantics(model: &RandomSequenceModel) -> Result<()> {
    if model.shift_semantics() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "model {} does not declare shift semantics",
            model.label()
        )))
    }
}

/// `ψ(ι[j_y; b] · ι[i_x + k; a])`.
pub fn shifted_moment(model: &RandomSequenceModel, y: &MonomialSpec, x: &MonomialSpec, k: usize) -> Result<C64> {
    require_shift_semantics(model)?;
    model.check_window("shifted moment", (x.extent() + k).max(y.extent()))?;
    y.concat(&x.shifted(if x.tuple.is_empty() { 0 } else { k }))
        .moment(model)
}

/// `(1/n) Σ_{k<n} ψ(y · α^k(x))`, summed pairwise.
pub fn cesaro_average(model: &RandomSequenceModel, y: &MonomialSpec, x: &MonomialSpec, n: usize) -> Result<C64> {
    if n == 0 {
        return Err(Error::Validation("Cesàro average needs n ≥ 1".into()));
    }
    let terms = shifted_terms(model, y, x, n)?;
    Ok(pairwise_sum(&terms) / n as f64)
}

fn shifted_terms(model: &RandomSequenceModel, y: &MonomialSpec, x: &MonomialSpec, n: usize) -> Result<Vec<C64>> {
    require_shift_semantics(model)?;
    if !x.tuple.is_empty() {
        model.check_window("Cesàro average", x.extent() + n - 1)?;
    }
    (0..n).into_par_iter().map(|k| shifted_moment(model, y, x, k)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CesaroRow {
    pub n: usize,
    pub average: C64,
    /// `|average − ψ(y)ψ(x)|`.
    pub gap_to_product: f64,
    /// `|avg(n) − avg(n+1)|` where `n + 1` fits the window.
    pub step: Option<f64>,
    /// `2·max_k |ψ(y α^k(x))| / n`.
    pub step_bound: f64,
}

/// Cesàro averages for `n = 1..=n_max` with the telescoping rate bound.
pub fn cesaro_table(
    model: &RandomSequenceModel,
    y: &MonomialSpec,
    x: &MonomialSpec,
    n_max: usize,
) -> Result<Vec<CesaroRow>> {
    if n_max == 0 {
        return Err(Error::Validation("n_max must be at least 1".into()));
    }
    let terms = shifted_terms(model, y, x, n_max)?;
    let target = y.moment(model)? * x.moment(model)?;
    let averages: Vec<C64> = (1..=n_max).map(|n| pairwise_sum(&terms[..n]) / n as f64).collect();
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let max_abs = terms[..n.min(n_max - 1) + 1]
            .iter()
            .map(|t| t.norm())
            .fold(0.0, f64::max);
        rows.push(CesaroRow {
            n,
            average: averages[n - 1],
            gap_to_product: (averages[n - 1] - target).norm(),
            step: (n < n_max).then(|| (averages[n - 1] - averages[n]).norm()),
            step_bound: 2.0 * max_abs / n as f64,
        });
    }
    Ok(rows)
}

pub fn cesaro_csv(name: &str, rows: &[CesaroRow]) -> Table {
    let mut t = Table::new(
        name,
        &["n", "average_re", "average_im", "gap_to_product", "step", "step_bound"],
    );
    for r in rows {
        t.push(vec![
            r.n.to_string(),
            fmt_f64(r.average.re),
            fmt_f64(r.average.im),
            fmt_f64(r.gap_to_product),
            r.step.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.step_bound),
        ]);
    }
    t
}

/// `|ψ(y*·α^k(x)) − ψ(y*·E_N(x))|`.
pub fn mixing_gap(
    model: &RandomSequenceModel,
    x: &MonomialSpec,
    y: &MonomialSpec,
    n: &Subalgebra,
    k: usize,
) -> Result<f64> {
    require_shift_semantics(model)?;
    let amb = model.ambient()?;
    let cond = conditional_expectation(&amb.state, n, 1e-9)?;
    cond.require_valid()?;
    let shifted = shifted_moment(model, &y.adjoint(), x, k)?;
    let ex = cond.apply(&x.element(model)?);
    let ystar = y.element(model)?.adjoint();
    let conditioned = amb.state.eval(&(&ystar * &ex))?;
    Ok((shifted - conditioned).norm())
}

/// Evaluation mode of [`refined_average_tn`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinedAverage {
    pub big_n: usize,
    pub mode: AverageMode,
    /// Number of composites averaged (exact) or sampled (Monte Carlo).
    pub samples: usize,
    pub seed: Option<u64>,
    pub tests: Vec<MonomialSpec>,
    pub values: Vec<C64>,
    /// Standard error per test monomial in Monte Carlo mode.
    pub std_errors: Option<Vec<f64>>,
}

/// Smallest window holding `θ_{N,l⃗}` images of entries below `extent`.
pub fn required_window_tn(big_n: usize, extent: usize) -> usize {
    theta_image_bound(big_n, extent).map_or(0, |m| m + 1)
}

/// Distribution of `θ_{N,l⃗} ∘ i` over uniform `l⃗`, obtained by composing
/// the averaging operators right to left: for `l = N, …, 0` first
/// `M_l = (1/N) Σ_{k<N} α_l^k`, then `α_l^{lN}`.
fn composed_distribution(big_n: usize, tuple: &IndexTuple) -> BTreeMap<Vec<usize>, f64> {
    let mut dist: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    dist.insert(tuple.entries().to_vec(), 1.0);
    for l in (0..=big_n).rev() {
        let mut next: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (t, w) in &dist {
            for k in 0..big_n {
                let power = k + l * big_n;
                let image: Vec<usize> = t.iter().map(|&e| if e >= l { e + power } else { e }).collect();
                *next.entry(image).or_insert(0.0) += w / big_n as f64;
            }
        }
        dist = next;
    }
    dist
}

/// Moment-level action of `T_N = ∏_{l=0}^{N} α_l^{lN} M_l^{(N)}` on `x`,
/// paired with each test monomial: the average over `l⃗ ∈ {0,…,N−1}^{N+1}`
/// of `ψ(y · ι[θ_{N,l⃗} ∘ i_x; a_x])`. Exact for `N ≤ exact_cap`, Monte
/// Carlo over `l⃗` beyond it.
pub fn refined_average_tn(
    model: &RandomSequenceModel,
    x: &MonomialSpec,
    big_n: usize,
    tests: &[MonomialSpec],
    exact_cap: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<RefinedAverage> {
    require_shift_semantics(model)?;
    if big_n == 0 {
        return Err(Error::Validation("T_N needs N ≥ 1".into()));
    }
    let need = required_window_tn(big_n, x.extent()).max(tests.iter().map(|y| y.extent()).max().unwrap_or(0));
    model.check_window(&format!("T_{big_n} images of {}", x.tuple), need)?;
    let pair = |y: &MonomialSpec, t: &[usize]| -> Result<C64> {
        let mut tt = y.tuple.entries().to_vec();
        tt.extend_from_slice(t);
        let mut bb = y.basis_choice.clone();
        bb.extend_from_slice(&x.basis_choice);
        model.psi_moment(&IndexTuple::new(tt), &bb)
    };
    if big_n <= exact_cap {
        let dist: Vec<(Vec<usize>, f64)> = composed_distribution(big_n, &x.tuple).into_iter().collect();
        let values = tests
            .iter()
            .map(|y| {
                let terms = dist
                    .par_iter()
                    .map(|(t, w)| Ok(pair(y, t)? * *w))
                    .collect::<Result<Vec<C64>>>()?;
                Ok(pairwise_sum(&terms))
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(RefinedAverage {
            big_n,
            mode: AverageMode::Exact,
            samples: big_n.pow(big_n as u32 + 1),
            seed: None,
            tests: tests.to_vec(),
            values,
            std_errors: None,
        });
    }
    if mc_samples < 2 {
        return Err(Error::Validation("Monte Carlo mode needs at least two samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let composites: Vec<ThetaComposite> = (0..mc_samples)
        .map(|_| {
            let l: Vec<usize> = (0..=big_n).map(|_| rng.gen_range(0..big_n)).collect();
            ThetaComposite::new(big_n, l).expect("in range")
        })
        .collect();
    let mut values = Vec::with_capacity(tests.len());
    let mut errors = Vec::with_capacity(tests.len());
    for y in tests {
        let samples = composites
            .par_iter()
            .map(|c| pair(y, c.apply_tuple(&x.tuple).entries()))
            .collect::<Result<Vec<C64>>>()?;
        let mean = pairwise_sum(&samples) / mc_samples as f64;
        let var: Vec<f64> = samples.iter().map(|s| (s - mean).norm_sqr()).collect();
        let variance = pairwise_sum_real(&var) / (mc_samples - 1) as f64;
        values.push(mean);
        errors.push((variance / mc_samples as f64).sqrt());
    }
    Ok(RefinedAverage {
        big_n,
        mode: AverageMode::MonteCarlo,
        samples: mc_samples,
        seed: Some(seed),
        tests: tests.to_vec(),
        values,
        std_errors: Some(errors),
    })
}

/// Direct enumeration of all composites; the independent oracle for the
/// exact path of [`refined_average_tn`].
pub fn refined_average_tn_direct(
    model: &RandomSequenceModel,
    x: &MonomialSpec,
    big_n: usize,
    y: &MonomialSpec,
) -> Result<C64> {
    let all = ThetaComposite::all(big_n)?;
    let terms = all
        .iter()
        .map(|c| {
            y.concat(&MonomialSpec {
                tuple: c.apply_tuple(&x.tuple),
                basis_choice: x.basis_choice.clone(),
            })
            .moment(model)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&terms) / all.len() as f64)
}

pub fn refined_average_csv(name: &str, results: &[RefinedAverage], targets: &[C64]) -> Table {
    let mut t = Table::new(
        name,
        &[
            "N",
            "mode",
            "samples",
            "y",
            "value_re",
            "value_im",
            "tail_target",
            "gap",
        ],
    );
    for r in results {
        for (k, (y, v)) in r.tests.iter().zip(&r.values).enumerate() {
            let target = targets.get(k).copied().unwrap_or_default();
            t.push(vec![
                r.big_n.to_string(),
                format!("{:?}", r.mode).to_lowercase(),
                r.samples.to_string(),
                y.label(),
                fmt_f64(v.re),
                fmt_f64(v.im),
                fmt_f64(target.re),
                fmt_f64((v - target).norm()),
            ]);
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndomorphismWitness {
    pub tuple: IndexTuple,
    pub image: IndexTuple,
    pub basis_choice: Vec<usize>,
    pub value: C64,
    pub image_value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndomorphismVerdict {
    pub big_n: usize,
    pub degree: usize,
    pub window: usize,
    pub tolerance: f64,
    pub applicable: bool,
    pub reason: Option<String>,
    pub pass: bool,
    pub max_violation: f64,
    pub witness: Option<EndomorphismWitness>,
}

/// Moment-level check that `α_N: ι[i; a] ↦ ι[θ_N ∘ i; a]` preserves `ψ`.
///
/// Since `ι[i;a]* ι[j;b]` is again a monomial, the isometry identity
/// `ψ(ι[i;a]* ι[j;b]) = ψ(ι[θ_N i;a]* ι[θ_N j;b])` reduces to
/// `ψ_ι[t; c] = ψ_ι[θ_N ∘ t; c]` for single tuples `t`; all tuples of length
/// up to `degree` whose image stays in the window are tested. Skipped unless
/// the model is spreadable at the same degree and window.
pub fn induced_endomorphism_check(
    model: &RandomSequenceModel,
    big_n: usize,
    degree: usize,
    window: usize,
    tol: f64,
) -> Result<EndomorphismVerdict> {
    let spread = check_symmetry(model, SymmetryKind::Spreadable, degree, window, tol)?;
    let mut verdict = EndomorphismVerdict {
        big_n,
        degree,
        window,
        tolerance: tol,
        applicable: spread.pass,
        reason: None,
        pass: false,
        max_violation: 0.0,
        witness: None,
    };
    if !spread.pass {
        verdict.reason = Some(format!(
            "model is not spreadable up to degree {degree}, window {window} (max violation {:.3e})",
            spread.max_violation
        ));
        return Ok(verdict);
    }
    let tables = model.moment_tables(degree, window)?;
    let mut best: Option<(f64, usize, usize)> = None;
    for n in 1..=degree {
        for idx in 0..tables.len_of(n) {
            let (t, b) = tables.decode(n, idx);
            let image: Vec<usize> = t.iter().map(|&e| partial_shift(big_n, e)).collect();
            if image.iter().any(|&e| e >= window) || image == t {
                continue;
            }
            let dev = (tables.value(n, idx) - tables.get(&image, &b)).norm();
            if best.is_none_or(|(v, _, _)| dev > v) {
                best = Some((dev, n, idx));
            }
        }
    }
    verdict.max_violation = best.map_or(0.0, |(v, _, _)| v);
    verdict.pass = verdict.max_violation <= tol;
    if let (false, Some((_, n, idx))) = (verdict.pass, best) {
        let (t, b) = tables.decode(n, idx);
        let image: Vec<usize> = t.iter().map(|&e| partial_shift(big_n, e)).collect();
        verdict.witness = Some(EndomorphismWitness {
            value: tables.value(n, idx),
            image_value: tables.get(&image, &b),
            tuple: IndexTuple::new(t),
            image: IndexTuple::new(image),
            basis_choice: b,
        });
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::{BlockAlgebra, FaithfulState};
    use crate::seqmodel::*;

    fn iid(window: usize) -> RandomSequenceModel {
        iid_tensor_sequence(
            &FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap()),
            window,
        )
        .unwrap()
    }

    fn mono(t: &[usize], b: &[usize]) -> MonomialSpec {
        MonomialSpec::new(t.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn shifted_moments() {
        let m = iid(4);
        let x = mono(&[0], &[PAULI_X]);
        assert!((shifted_moment(&m, &x, &x, 0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        for k in 1..4 {
            assert!(shifted_moment(&m, &x, &x, k).unwrap().norm() < 1e-15);
        }
        assert!(matches!(shifted_moment(&m, &x, &x, 4), Err(Error::Window { .. })));
    }

    #[test]
    fn cesaro_examples() {
        let m = iid(8);
        let x = mono(&[0], &[PAULI_X]);
        for n in 1..=8 {
            let v = cesaro_average(&m, &x, &x, n).unwrap();
            assert!((v - C64::new(1.0 / n as f64, 0.0)).norm() < 1e-15);
        }
        let one = MonomialSpec::identity();
        assert!((cesaro_average(&m, &one, &one, 5).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        for r in cesaro_table(&m, &x, &x, 8).unwrap() {
            if let Some(s) = r.step {
                assert!(s <= r.step_bound + 1e-15);
            }
        }
    }

    #[test]
    fn mixing_gap_iid_and_identity() {
        let m = iid(4);
        let c = Subalgebra::scalars(&m.ambient().unwrap().state);
        let x = mono(&[0], &[PAULI_X]);
        let y = mono(&[0], &[PAULI_X]);
        assert!(mixing_gap(&m, &x, &y, &c, 1).unwrap() <= 1e-12);
        assert!((mixing_gap(&m, &x, &y, &c, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!(mixing_gap(&m, &MonomialSpec::identity(), &y, &c, 2).unwrap() <= 1e-15);
    }

    #[test]
    fn tn_matches_direct_enumeration() {
        let m = iid(12);
        let x = mono(&[0, 1], &[PAULI_X, PAULI_Z]);
        let ys = [
            mono(&[0, 1], &[PAULI_Z, PAULI_X]),
            mono(&[0], &[PAULI_X]),
            MonomialSpec::identity(),
        ];
        for big_n in 1..=3 {
            let r = refined_average_tn(&m, &x, big_n, &ys, TN_EXACT_CAP, TN_MC_SAMPLES, TN_MC_SEED).unwrap();
            for (y, v) in ys.iter().zip(&r.values) {
                let direct = refined_average_tn_direct(&m, &x, big_n, y).unwrap();
                assert!((v - direct).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn tn_on_single_index_is_cesaro() {
        let m = iid(6);
        let x = mono(&[0], &[PAULI_X]);
        let one = mono(&[0], &[PAULI_X]);
        let mut prev = f64::INFINITY;
        for big_n in 1..=4 {
            let r = refined_average_tn(&m, &x, big_n, std::slice::from_ref(&one), TN_EXACT_CAP, 0, 0).unwrap();
            let v = r.values[0].re;
            assert!((v - 1.0 / big_n as f64).abs() < 1e-15);
            assert!(v < prev);
            prev = v;
        }
        let id = MonomialSpec::identity();
        let r = refined_average_tn(&m, &id, 2, std::slice::from_ref(&one), TN_EXACT_CAP, 0, 0).unwrap();
        assert!((r.values[0] - one.moment(&m).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn tn_monte_carlo_is_seeded() {
        let m = iid(8);
        let x = mono(&[0], &[PAULI_X]);
        let a = refined_average_tn(&m, &x, 5, std::slice::from_ref(&x), TN_EXACT_CAP, 200, TN_MC_SEED).unwrap();
        let b = refined_average_tn(&m, &x, 5, std::slice::from_ref(&x), TN_EXACT_CAP, 200, TN_MC_SEED).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mode, AverageMode::MonteCarlo);
        assert!((a.values[0].re - 0.2).abs() < 5.0 * a.std_errors.as_ref().unwrap()[0] + 1e-12);
    }

    #[test]
    fn window_sizing() {
        assert_eq!(required_window_tn(1, 1), 1);
        let m = iid(4);
        let x = mono(&[0, 1], &[PAULI_X, PAULI_X]);
        let err = refined_average_tn(&m, &x, 2, std::slice::from_ref(&x), TN_EXACT_CAP, 0, 0).unwrap_err();
        assert!(matches!(err, Error::Window { required, .. } if required == required_window_tn(2, 2)));
    }

    #[test]
    fn induced_endomorphism() {
        let v = induced_endomorphism_check(&iid(5), 2, 3, 5, 1e-10).unwrap();
        assert!(v.applicable && v.pass);
        let w = codomain_perturbed_sequence(C64::new(-1.0, 0.0), 4).unwrap();
        let v = induced_endomorphism_check(&w, 1, 4, 4, 1e-9).unwrap();
        assert!(!v.applicable && v.reason.is_some());
    }
}
