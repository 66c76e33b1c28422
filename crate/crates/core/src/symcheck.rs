//! Distributional symmetry verdicts on a finite window.
//!
//! A model is exchangeable, spreadable or stationary up to degree `n` on
//! window `L` when `ψ_ι[i; a] = ψ_ι[j; a]` for all tuples `i ∼ j` of length
//! at most `n` with entries below `L` under the symmetric, order or
//! translation relation respectively. By multilinearity it suffices to let
//! each `a_k` range over a linear basis of the base algebra; the checker uses
//! the hermitian basis. Each tuple is compared with the canonical
//! representative of its class, which is itself a tuple in the window.
//!
//! A pass is evidence about this window and degree only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matalg::{AlgElement, C64};
use crate::seqmodel::{braid_residual, MomentTables, RandomSequenceModel};
use crate::tuplecomb::{canon, IndexTuple, Relation};

pub const DEFAULT_DEGREE: usize = 4;
pub const DEFAULT_WINDOW: usize = 6;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryKind {
    Exchangeable,
    Spreadable,
    Stationary,
}

impl SymmetryKind {
    pub const ALL: [SymmetryKind; 3] = [Self::Exchangeable, Self::Spreadable, Self::Stationary];

    pub fn relation(self) -> Relation {
        match self {
            SymmetryKind::Exchangeable => Relation::Symmetric,
            SymmetryKind::Spreadable => Relation::Order,
            SymmetryKind::Stationary => Relation::Theta,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryKind::Exchangeable => "exchangeable",
            SymmetryKind::Spreadable => "spreadable",
            SymmetryKind::Stationary => "stationary",
        }
    }
}

/// A maximal violation: the tuple, the representative of its class, the
/// basis choice and both moment values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryWitness {
    pub tuple: IndexTuple,
    pub representative: IndexTuple,
    pub basis_choice: Vec<usize>,
    pub value: C64,
    pub representative_value: C64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryVerdict {
    pub kind: SymmetryKind,
    pub degree: usize,
    pub window: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub max_violation: f64,
    pub witness: Option<SymmetryWitness>,
    /// Set when the model does not declare shift semantics.
    pub caveat: Option<String>,
}

impl SymmetryVerdict {
    /// `"exchangeable up to degree 4, window 6"`.
    pub fn scope(&self) -> String {
        format!(
            "{} up to degree {}, window {}",
            self.kind.as_str(),
            self.degree,
            self.window
        )
    }
}

fn validate_scope(model: &RandomSequenceModel, degree: usize, window: usize, tol: f64) -> Result<()> {
    if degree == 0 {
        return Err(Error::Validation("symmetry degree must be at least 1".into()));
    }
    if window == 0 {
        return Err(Error::Validation("symmetry window must be at least 1".into()));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Validation(format!(
            "tolerance {tol} is not a nonnegative number"
        )));
    }
    model.check_window("symmetry check", window)
}

/// Check one symmetry kind on all tuples of length `1..=degree` with entries
/// below `window` and all hermitian-basis choices.
pub fn check_symmetry(
    model: &RandomSequenceModel,
    kind: SymmetryKind,
    degree: usize,
    window: usize,
    tol: f64,
) -> Result<SymmetryVerdict> {
    validate_scope(model, degree, window, tol)?;
    let tables = model.moment_tables(degree, window)?;
    Ok(verdict_from_tables(model, &tables, kind, degree, tol))
}

/// As [`check_symmetry`], with the choices drawn from `elems` instead of the
/// hermitian basis. With a single element `x` this tests the moments of `x`
/// alone, which is what the limit theorems for sums of `ι_n(x)` consume.
pub fn check_symmetry_on(
    model: &RandomSequenceModel,
    kind: SymmetryKind,
    elems: &[AlgElement],
    degree: usize,
    window: usize,
    tol: f64,
) -> Result<SymmetryVerdict> {
    validate_scope(model, degree, window, tol)?;
    let tables = model.moment_tables_for(elems, degree, window)?;
    Ok(verdict_from_tables(model, &tables, kind, degree, tol))
}

/// Maximal violation over a table; ties go to the lexicographically first
/// (length, tuple, basis) entry, so the result does not depend on scheduling.
pub(crate) fn verdict_from_tables(
    model: &RandomSequenceModel,
    tables: &MomentTables,
    kind: SymmetryKind,
    degree: usize,
    tol: f64,
) -> SymmetryVerdict {
    let relation = kind.relation();
    let nb = tables.nbasis;
    let mut best: Option<(f64, usize, usize)> = None;
    for n in 1..=degree {
        let bcount = nb.pow(n as u32);
        let tcount = tables.len_of(n) / bcount;
        let local = (0..tcount)
            .into_par_iter()
            .filter_map(|tcode| {
                let (t, _) = tables.decode(n, tcode * bcount);
                let rep = canon(relation, &IndexTuple::new(t.clone()));
                if rep.entries() == t.as_slice() {
                    return None;
                }
                let mut local: Option<(f64, usize)> = None;
                for bcode in 0..bcount {
                    let idx = tcode * bcount + bcode;
                    let (_, b) = tables.decode(n, idx);
                    let dev = (tables.value(n, idx) - tables.get(rep.entries(), &b)).norm();
                    if local.is_none_or(|(v, _)| dev > v) {
                        local = Some((dev, idx));
                    }
                }
                local
            })
            .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
        if let Some((dev, idx)) = local {
            if best.is_none_or(|(v, _, _)| dev > v) {
                best = Some((dev, n, idx));
            }
        }
    }
    let max_violation = best.map_or(0.0, |(v, _, _)| v);
    let pass = max_violation <= tol;
    let witness = match best {
        Some((_, n, idx)) if !pass => {
            let (t, b) = tables.decode(n, idx);
            let tuple = IndexTuple::new(t);
            let representative = canon(relation, &tuple);
            Some(SymmetryWitness {
                value: tables.value(n, idx),
                representative_value: tables.get(representative.entries(), &b),
                tuple,
                representative,
                basis_choice: b,
            })
        }
        _ => None,
    };
    let caveat = (!model.shift_semantics() && kind != SymmetryKind::Exchangeable).then(|| {
        "model does not declare shift semantics; comparisons across shifted tuples may reflect edge effects".to_string()
    });
    SymmetryVerdict {
        kind,
        degree,
        window: tables.window,
        tolerance: tol,
        pass,
        max_violation,
        witness,
        caveat,
    }
}

/// Re-evaluate a witness directly; returns `|ψ_ι[tuple] − ψ_ι[representative]|`.
pub fn reevaluate_witness(model: &RandomSequenceModel, w: &SymmetryWitness) -> Result<f64> {
    let a = model.psi_moment(&w.tuple, &w.basis_choice)?;
    let b = model.psi_moment(&w.representative, &w.basis_choice)?;
    Ok((a - b).norm())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BraidReport {
    pub holds: bool,
    /// Operator norm of `(u⊗1)(1⊗u)(u⊗1) − (1⊗u)(u⊗1)(1⊗u)`.
    pub residual: f64,
    pub tolerance: f64,
    /// Conjugations on disjoint leg pairs commute; true by construction.
    pub distant_commutation: bool,
}

pub fn check_braid_relation(u: &AlgElement, tol: f64) -> Result<BraidReport> {
    if !u.is_unitary(tol.max(1e-12)) {
        return Err(Error::Validation("u is not unitary".into()));
    }
    let residual = braid_residual(u)?;
    Ok(BraidReport {
        holds: residual <= tol,
        residual,
        tolerance: tol,
        distant_commutation: true,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HierarchyAudit {
    pub exchangeable: SymmetryVerdict,
    pub spreadable: SymmetryVerdict,
    pub stationary: SymmetryVerdict,
    /// `pass(exchangeable) ⇒ pass(spreadable) ⇒ pass(stationary)`.
    pub monotone: bool,
}

impl HierarchyAudit {
    pub fn verdicts(&self) -> [&SymmetryVerdict; 3] {
        [&self.exchangeable, &self.spreadable, &self.stationary]
    }
}

/// Run all three checks on one shared moment table. A non-monotone outcome
/// is an internal inconsistency, since `∼_θ ⊆ ∼_o ⊆ ∼_π`.
pub fn symmetry_hierarchy_audit(
    model: &RandomSequenceModel,
    degree: usize,
    window: usize,
    tol: f64,
) -> Result<HierarchyAudit> {
    validate_scope(model, degree, window, tol)?;
    let tables = model.moment_tables(degree, window)?;
    let [ex, sp, st] = SymmetryKind::ALL.map(|k| verdict_from_tables(model, &tables, k, degree, tol));
    let monotone = (!ex.pass || sp.pass) && (!sp.pass || st.pass);
    Ok(HierarchyAudit {
        exchangeable: ex,
        spreadable: sp,
        stationary: st,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::{BlockAlgebra, FaithfulState};
    use crate::seqmodel::*;

    fn m2_trace() -> FaithfulState {
        FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap())
    }

    #[test]
    fn iid_passes_everything() {
        let m = iid_tensor_sequence(&m2_trace(), 5).unwrap();
        let v = check_symmetry(&m, SymmetryKind::Exchangeable, 4, 5, 1e-10).unwrap();
        assert!(v.pass && v.max_violation <= 1e-10 && v.witness.is_none());
        let audit = symmetry_hierarchy_audit(&m, 3, 4, 1e-10).unwrap();
        assert!(audit.monotone && audit.verdicts().iter().all(|v| v.pass));
    }

    #[test]
    fn omega_minus_one_is_not_stationary() {
        let m = codomain_perturbed_sequence(C64::new(-1.0, 0.0), 4).unwrap();
        let v = check_symmetry(&m, SymmetryKind::Stationary, 4, 4, 1e-9).unwrap();
        assert!(!v.pass);
        assert!((v.max_violation - 2.0).abs() < 1e-12);
        let w = v.witness.as_ref().unwrap();
        assert!((reevaluate_witness(&m, w).unwrap() - v.max_violation).abs() <= 1e-12);
        // the translation pair from the construction has the same gap
        let x = [PAULI_X; 4];
        let a = m.psi_moment(&IndexTuple::new(vec![0, 1, 0, 1]), &x).unwrap();
        let b = m.psi_moment(&IndexTuple::new(vec![2, 3, 2, 3]), &x).unwrap();
        assert!(((a - b).norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn omega_i_fails_hierarchy() {
        let m = codomain_perturbed_sequence(C64::new(0.0, 1.0), 4).unwrap();
        let audit = symmetry_hierarchy_audit(&m, 4, 4, 1e-9).unwrap();
        assert!(audit.monotone);
        assert!(audit.verdicts().iter().all(|v| !v.pass));
    }

    #[test]
    fn coin_is_exchangeable() {
        let m = coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 4).unwrap();
        assert!(
            check_symmetry(&m, SymmetryKind::Exchangeable, 3, 4, 1e-10)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn braid_checks() {
        let r = check_braid_relation(&flip(2), 1e-12).unwrap();
        assert!(r.holds && r.distant_commutation);
        let w = C64::from_polar(1.0, std::f64::consts::FRAC_PI_3);
        assert!(check_braid_relation(&u_omega(w), 1e-12).unwrap().residual <= 1e-12);
        let m4 = BlockAlgebra::full(4).unwrap();
        assert!(check_braid_relation(&m4.identity().scale(C64::new(2.0, 0.0)), 1e-12).is_err());
    }

    #[test]
    fn scope_errors() {
        let m = iid_tensor_sequence(&m2_trace(), 3).unwrap();
        assert!(matches!(
            check_symmetry(&m, SymmetryKind::Stationary, 2, 4, 1e-9),
            Err(Error::Window { .. })
        ));
        assert!(check_symmetry(&m, SymmetryKind::Stationary, 0, 3, 1e-9).is_err());
    }

    #[test]
    fn verdict_is_deterministic() {
        let m = codomain_perturbed_sequence(C64::new(0.0, 1.0), 4).unwrap();
        let a = check_symmetry(&m, SymmetryKind::Spreadable, 4, 4, 1e-9).unwrap();
        let b = check_symmetry(&m, SymmetryKind::Spreadable, 4, 4, 1e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn calibration_perturbation_is_detected() {
        let delta = 1e-3;
        let m = calibration_sequence(delta, 4).unwrap();
        let v = check_symmetry(&m, SymmetryKind::Stationary, 4, 4, 1e-9).unwrap();
        assert!(!v.pass && v.max_violation >= delta / 2.0, "{}", v.max_violation);
        assert!(
            check_symmetry(
                &calibration_sequence(0.0, 4).unwrap(),
                SymmetryKind::Stationary,
                4,
                4,
                1e-12
            )
            .unwrap()
            .pass
        );
    }
}
