use proptest::prelude::*;

use ncprob_core::clt::{limit_formula, reference_moment, sn_moment_bruteforce, sn_moment_by_classes, ReferenceLaw};
use ncprob_core::matalg::{pauli_matrices, AlgElement, BlockAlgebra, FaithfulState, C64};
use ncprob_core::seqmodel::*;
use ncprob_core::subalg::conditional_expectation;
use ncprob_core::symcheck::{check_symmetry, reevaluate_witness, SymmetryKind};
use ncprob_core::tuplecomb::*;

fn tuple_strategy(max_len: usize, max_entry: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..max_entry, 1..=max_len)
}

fn hermitian_m2(coef: [f64; 4]) -> AlgElement {
    let p = pauli_matrices();
    let m = p
        .iter()
        .zip(coef)
        .fold(p[0].scale(0.0), |acc, (s, c)| acc + s * C64::new(c, 0.0));
    AlgElement::from_matrix(m).unwrap()
}

fn iid(window: usize) -> RandomSequenceModel {
    iid_tensor_sequence(
        &FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap()),
        window,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relation_chain(a in tuple_strategy(6, 6), shift in 0usize..4) {
        let b = IndexTuple::new(a.iter().map(|x| x + shift).collect());
        let a = IndexTuple::new(a);
        for (s, t) in [(&a, &b), (&a, &canon(Relation::Order, &a)), (&a, &canon(Relation::Symmetric, &b))] {
            let th = are_equivalent(Relation::Theta, s, t).unwrap();
            let o = are_equivalent(Relation::Order, s, t).unwrap();
            let pi = are_equivalent(Relation::Symmetric, s, t).unwrap();
            prop_assert!(!th || o);
            prop_assert!(!o || pi);
        }
        prop_assert!(are_equivalent(Relation::Theta, &a, &b).unwrap());
    }

    #[test]
    fn canon_is_idempotent(a in tuple_strategy(7, 9)) {
        let a = IndexTuple::new(a);
        for r in [Relation::Theta, Relation::Order, Relation::Symmetric] {
            let c = canon(r, &a);
            prop_assert_eq!(canon(r, &c), c.clone());
            prop_assert!(are_equivalent(r, &a, &c).unwrap());
        }
    }

    #[test]
    fn theta_composites_preserve_order(big_n in 1usize..5, seed in prop::collection::vec(0usize..100, 6), xs in tuple_strategy(6, 12)) {
        let lvec: Vec<usize> = seed.iter().take(big_n + 1).map(|s| s % big_n).collect();
        let th = ThetaComposite::new(big_n, lvec).unwrap();
        for &x in &xs {
            for &y in &xs {
                prop_assert_eq!(x.cmp(&y), th.apply(x).cmp(&th.apply(y)));
            }
        }
        let t = IndexTuple::new(xs);
        prop_assert!(are_equivalent(Relation::Order, &t, &th.apply_tuple(&t)).unwrap());
        prop_assert!(th.apply_tuple(&t).max_entry() <= theta_image_bound(big_n, t.max_entry().unwrap() + 1));
    }

    #[test]
    fn class_counts_sum_to_all_tuples(p in 1usize..6, big_n in 1usize..9) {
        let total: u128 = enumerate_order_classes(p).unwrap().iter().map(|c| count_tuples_in_class(c, big_n)).sum();
        prop_assert_eq!(total, (big_n as u128).pow(p as u32));
    }

    #[test]
    fn iid_moments_factor_over_legs(t in tuple_strategy(5, 4), b in prop::collection::vec(0usize..4, 5)) {
        let m = iid(4);
        let basis = &b[..t.len()];
        let v = m.psi_moment(&IndexTuple::new(t.clone()), basis).unwrap();
        let p = pauli_matrices();
        let mut oracle = C64::new(1.0, 0.0);
        for leg in 0..4 {
            let mut acc = p[0].clone();
            for (k, &i) in t.iter().enumerate() {
                if i == leg {
                    acc *= &p[basis[k]];
                }
            }
            oracle *= acc.trace() / C64::new(2.0, 0.0);
        }
        prop_assert!((v - oracle).norm() <= 1e-12);
    }

    #[test]
    fn conditional_expectation_laws(coef in prop::collection::vec(-1.0f64..1.0, 16), p0 in 0.1f64..0.9) {
        let m = coin_mixture_sequence(&[(p0, 0.4), (0.95, 0.6)], 2).unwrap();
        let amb = m.ambient().unwrap();
        let n = m.fiber_scalars().unwrap();
        let e = conditional_expectation(&amb.state, &n, 1e-9).unwrap();
        prop_assert!(e.is_valid());
        let units = amb.algebra.matrix_unit_basis();
        let mut x = amb.algebra.zero();
        for (u, c) in units.iter().zip(coef.iter().cycle()) {
            x.axpy(C64::new(*c, 0.0), u);
        }
        let ex = e.apply(&x);
        prop_assert!(e.apply(&ex).approx_eq(&ex, 1e-10));
        prop_assert!((amb.state.eval(&ex).unwrap() - amb.state.eval(&x).unwrap()).norm() <= 1e-10);
        prop_assert!(e.apply(&amb.algebra.identity()).approx_eq(&amb.algebra.identity(), 1e-10));
        for f in n.basis() {
            let left = e.apply(&(f * &x));
            prop_assert!(left.approx_eq(&(f * &ex), 1e-10));
        }
    }

    #[test]
    fn symmetry_witness_reproduces(phase in 0.1f64..6.0) {
        let m = codomain_perturbed_sequence(C64::from_polar(1.0, phase), 4).unwrap();
        let v = check_symmetry(&m, SymmetryKind::Stationary, 4, 4, 1e-9).unwrap();
        prop_assert!(!v.pass);
        let w = v.witness.as_ref().unwrap();
        prop_assert!((reevaluate_witness(&m, w).unwrap() - v.max_violation).abs() <= 1e-12);
    }

    #[test]
    fn clt_paths_agree(coef in prop::collection::vec(-1.0f64..1.0, 4), p in 1usize..5, big_n in 1usize..6) {
        let m = iid(6);
        let x = hermitian_m2([coef[0], coef[1], coef[2], coef[3]]);
        let a = sn_moment_bruteforce(&m, &x, p, big_n).unwrap();
        let b = sn_moment_by_classes(&m, &x, p, big_n, 1e-9).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn limit_formula_on_constant_moments(half in 1usize..6, c in -2.0f64..2.0) {
        let p = 2 * half;
        let count = enumerate_pair_classes(p).unwrap().len();
        let v = limit_formula(p, &vec![c; count]);
        prop_assert!((v - pair_double_factorial(p) as f64 * c).abs() <= 1e-9 * (1.0 + v.abs()));
    }

    #[test]
    fn q_interpolation_is_monotone(half in 1usize..5, q1 in 0.0f64..1.0, q2 in 0.0f64..1.0) {
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let p = 2 * half;
        let a = reference_moment(ReferenceLaw::QInterp, p, Some(lo)).unwrap();
        let b = reference_moment(ReferenceLaw::QInterp, p, Some(hi)).unwrap();
        prop_assert!(a <= b + 1e-12);
    }
}

#[test]
fn exhaustive_relation_chain() {
    for len in 1..=5 {
        let tuples: Vec<IndexTuple> = all_tuples(len, 5).collect();
        for s in &tuples {
            for t in &tuples {
                let th = are_equivalent(Relation::Theta, s, t).unwrap();
                let o = are_equivalent(Relation::Order, s, t).unwrap();
                let pi = are_equivalent(Relation::Symmetric, s, t).unwrap();
                assert!((!th || o) && (!o || pi), "{s} {t}");
            }
        }
    }
}
