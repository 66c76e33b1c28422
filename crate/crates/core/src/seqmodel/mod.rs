//! Random-sequence models on finite windows and their mixed moments
//! `ψ_ι[i; a] = ψ(ι_{i(1)}(a_1) ··· ι_{i(n)}(a_n))`.

mod hom;
mod model;

pub use hom::{braid_residual, flip, u_omega, HomDefects, StarHom, HOM_TOL};
pub use model::{
    calibration_sequence, codomain_perturbed_sequence, coin_mixture_sequence, conjugated_sequence, custom_sequence,
    iid_tensor_sequence, perturbed_domain_sequence, yang_baxter_sequence, Ambient, ModelKind, ModelSummary,
    MomentTables, RandomSequenceModel, BRAID_TOL, MOMENT_TABLE_CAP,
};

/// Basis indices of the Pauli basis `{1, σ_x, σ_y, σ_z}` for `M_2` bases.
pub const PAULI_I: usize = 0;
pub const PAULI_X: usize = 1;
pub const PAULI_Y: usize = 2;
pub const PAULI_Z: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::matalg::{pauli_matrices, AlgElement, BlockAlgebra, FaithfulState, C64};
    use crate::tuplecomb::{all_tuples, IndexTuple};

    fn t(v: &[usize]) -> IndexTuple {
        IndexTuple::new(v.to_vec())
    }

    fn m2_trace() -> FaithfulState {
        FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap())
    }

    fn close(a: C64, b: f64, tol: f64) -> bool {
        (a - C64::new(b, 0.0)).norm() <= tol
    }

    #[test]
    fn iid_examples() {
        let m = iid_tensor_sequence(&m2_trace(), 4).unwrap();
        assert!(close(
            m.psi_moment(&t(&[0, 1]), &[PAULI_X, PAULI_X]).unwrap(),
            0.0,
            1e-15
        ));
        assert!(close(
            m.psi_moment(&t(&[0, 0]), &[PAULI_X, PAULI_X]).unwrap(),
            1.0,
            1e-15
        ));
        assert!(close(m.psi_moment(&t(&[]), &[]).unwrap(), 1.0, 0.0));
        let p = 0.3;
        let c = iid_tensor_sequence(&FaithfulState::trace_p(p).unwrap(), 2).unwrap();
        // basis of ℂ²: e_1, e_2
        assert!(close(c.psi_moment(&t(&[0, 1]), &[0, 0]).unwrap(), p * p, 1e-15));
    }

    #[test]
    fn window_overflow_is_error() {
        let m = iid_tensor_sequence(&m2_trace(), 3).unwrap();
        assert!(matches!(
            m.psi_moment(&t(&[0, 3]), &[0, 0]),
            Err(Error::Window {
                required: 4,
                available: 3,
                ..
            })
        ));
        assert!(matches!(
            m.psi_moment(&t(&[0]), &[0, 0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn leg_engine_matches_dense() {
        let models = [
            iid_tensor_sequence(&m2_trace(), 3).unwrap(),
            coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 3).unwrap(),
        ];
        for m in &models {
            let nb = m.basis().len();
            for tuple in all_tuples(3, 3) {
                for code in 0..nb.pow(3) {
                    let b = [code / (nb * nb), (code / nb) % nb, code % nb];
                    let elems: Vec<AlgElement> = b.iter().map(|&k| m.basis()[k].clone()).collect();
                    let fast = m.moment_of_elements(&tuple, &elems).unwrap();
                    let dense = m.dense_moment_of_elements(&tuple, &elems).unwrap();
                    assert!((fast - dense).norm() < 1e-13, "{tuple} {b:?}");
                }
            }
        }
    }

    #[test]
    fn tables_match_direct_evaluation() {
        let w = C64::from_polar(1.0, 0.7);
        let models = [
            iid_tensor_sequence(&m2_trace(), 3).unwrap(),
            codomain_perturbed_sequence(w, 4).unwrap(),
        ];
        for m in &models {
            let tables = m.moment_tables(3, 3).unwrap();
            for n in 0..=3 {
                for idx in (0..tables.len_of(n)).step_by(7) {
                    let (tu, b) = tables.decode(n, idx);
                    let direct = m.psi_moment(&IndexTuple::new(tu.clone()), &b).unwrap();
                    assert!((tables.value(n, idx) - direct).norm() < 1e-13);
                    assert_eq!(tables.get(&tu, &b), tables.value(n, idx));
                }
            }
        }
    }

    #[test]
    fn codomain_examples() {
        for theta in [0.0, 0.5, std::f64::consts::FRAC_PI_2, std::f64::consts::PI] {
            let m = codomain_perturbed_sequence(C64::from_polar(1.0, theta), 4).unwrap();
            let x = [PAULI_X; 4];
            assert!(close(m.psi_moment(&t(&[0, 1, 0, 1]), &x).unwrap(), theta.cos(), 1e-12));
            assert!(close(m.psi_moment(&t(&[2, 3, 2, 3]), &x).unwrap(), 1.0, 1e-12));
            // identically distributed
            for leg in 0..4 {
                for b in 0..4 {
                    let v = m.psi_moment(&t(&[leg]), &[b]).unwrap();
                    assert!(close(v, if b == 0 { 1.0 } else { 0.0 }, 1e-12));
                }
            }
        }
        assert!(codomain_perturbed_sequence(C64::new(1.1, 0.0), 4).is_err());
        assert!(codomain_perturbed_sequence(C64::new(1.0, 0.0), 3).is_err());
    }

    #[test]
    fn omega_one_is_iid() {
        let a = codomain_perturbed_sequence(C64::new(1.0, 0.0), 4).unwrap();
        let b = iid_tensor_sequence(&m2_trace(), 4).unwrap();
        let ta = a.moment_tables(4, 4).unwrap();
        let tb = b.moment_tables(4, 4).unwrap();
        for n in 0..=4 {
            for idx in 0..ta.len_of(n) {
                assert!((ta.value(n, idx) - tb.value(n, idx)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn coin_examples() {
        let m = coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 4).unwrap();
        let pair = m.psi_moment(&t(&[0, 1]), &[0, 0]).unwrap();
        assert!(close(pair, 0.29, 1e-14));
        let single = m.psi_moment(&t(&[0]), &[0]).unwrap();
        assert!(close(single * single, 0.25, 1e-14));
        let n = m.fiber_scalars().unwrap();
        assert_eq!(n.dim(), 2);
        assert!(coin_mixture_sequence(&[(0.3, 0.5), (0.3, 0.5)], 2).is_err());
        assert!(coin_mixture_sequence(&[(0.3, 0.4)], 2).is_err());
        assert!(coin_mixture_sequence(&[(1.0, 1.0)], 2).is_err());
    }

    #[test]
    fn one_atom_coin_is_iid() {
        let p = 0.3;
        let a = coin_mixture_sequence(&[(p, 1.0)], 3).unwrap();
        let b = iid_tensor_sequence(&FaithfulState::trace_p(p).unwrap(), 3).unwrap();
        let ta = a.moment_tables(3, 3).unwrap();
        let tb = b.moment_tables(3, 3).unwrap();
        for n in 0..=3 {
            for idx in 0..ta.len_of(n) {
                assert!((ta.value(n, idx) - tb.value(n, idx)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn flip_braid_is_iid() {
        let a = yang_baxter_sequence(&flip(2), 4).unwrap();
        let b = iid_tensor_sequence(&m2_trace(), 4).unwrap();
        let ta = a.moment_tables(4, 4).unwrap();
        let tb = b.moment_tables(4, 4).unwrap();
        for n in 0..=4 {
            for idx in 0..ta.len_of(n) {
                assert!((ta.value(n, idx) - tb.value(n, idx)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn yang_baxter_rejects_non_braided() {
        let h = 1.0 / 2f64.sqrt();
        let mut m = crate::matalg::Block::identity(4, 4);
        m[(0, 0)] = C64::new(h, 0.0);
        m[(0, 3)] = C64::new(h, 0.0);
        m[(3, 0)] = C64::new(h, 0.0);
        m[(3, 3)] = C64::new(-h, 0.0);
        let u = AlgElement::from_matrix(m).unwrap();
        assert!(matches!(yang_baxter_sequence(&u, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn domain_perturbation() {
        let base = m2_trace();
        let m = iid_tensor_sequence(&base, 3).unwrap();
        let same = perturbed_domain_sequence(&m, 1, &StarHom::identity(&base)).unwrap();
        let [_, sx, _, _] = pauli_matrices();
        let g = StarHom::inner_automorphism(&base, &AlgElement::from_matrix(sx).unwrap()).unwrap();
        let flipped = perturbed_domain_sequence(&m, 0, &g).unwrap();
        for tuple in all_tuples(2, 3) {
            let z = [PAULI_Z, PAULI_Z];
            let plain = m.psi_moment(&tuple, &z).unwrap();
            assert_eq!(same.psi_moment(&tuple, &z).unwrap(), plain);
            let sign = tuple.entries().iter().filter(|&&e| e == 0).count();
            let expected = if sign % 2 == 1 { -plain } else { plain };
            assert!((flipped.psi_moment(&tuple, &z).unwrap() - expected).norm() < 1e-15);
        }
        assert!(close(flipped.psi_moment(&t(&[0]), &[PAULI_Z]).unwrap(), 0.0, 1e-15));
        // the dense path sees the same perturbation
        let d = codomain_perturbed_sequence(C64::new(1.0, 0.0), 4).unwrap();
        let dp = perturbed_domain_sequence(&d, 0, &g).unwrap();
        assert!(close(
            dp.psi_moment(&t(&[0, 1]), &[PAULI_Z, PAULI_Z]).unwrap(),
            0.0,
            1e-15
        ));
        assert!(close(
            dp.psi_moment(&t(&[0, 0]), &[PAULI_Z, PAULI_X]).unwrap(),
            0.0,
            1e-15
        ));
    }

    #[test]
    fn non_state_preserving_gamma_rejected() {
        let s = FaithfulState::trace_p(0.3).unwrap();
        let m = iid_tensor_sequence(&s, 2).unwrap();
        let c2 = s.algebra().clone();
        let swap = StarHom::new_unchecked(&s, &s, vec![c2.matrix_unit(1, 0, 0), c2.matrix_unit(0, 0, 0)]).unwrap();
        assert!(matches!(
            perturbed_domain_sequence(&m, 0, &swap),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn builtin_embeddings_are_homomorphisms() {
        let models = [
            iid_tensor_sequence(&m2_trace(), 3).unwrap(),
            coin_mixture_sequence(&[(0.2, 0.25), (0.6, 0.75)], 3).unwrap(),
            codomain_perturbed_sequence(C64::new(0.0, 1.0), 4).unwrap(),
            yang_baxter_sequence(&u_omega(C64::new(0.0, 1.0)), 3).unwrap(),
        ];
        for m in &models {
            for e in &m.ambient().unwrap().embeddings {
                e.validate(1e-10).unwrap();
            }
        }
    }

    #[test]
    fn ambient_respects_cap() {
        let m = iid_tensor_sequence(&m2_trace(), 9).unwrap();
        assert!(matches!(m.ambient(), Err(Error::Resource { .. })));
        // moments still evaluate leg by leg
        assert!(close(
            m.psi_moment(&t(&[8, 8]), &[PAULI_X, PAULI_X]).unwrap(),
            1.0,
            1e-15
        ));
    }
}
