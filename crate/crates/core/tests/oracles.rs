//! Frozen reference values and independent oracles.

use nalgebra::DMatrix;
use ncprob_core::clt::{
    clt_limit, conditional_limit_ap, reference_moment, sn_moment_bruteforce, sn_moment_by_classes, ReferenceLaw,
    CLT_TOL,
};
use ncprob_core::ergodic::{refined_average_tn, refined_average_tn_direct, MonomialSpec, TN_EXACT_CAP};
use ncprob_core::indcheck::{check_sequence_independence, IndependenceMode};
use ncprob_core::matalg::{BlockAlgebra, FaithfulState, C64};
use ncprob_core::seqmodel::*;
use ncprob_core::subalg::Subalgebra;
use ncprob_core::symcheck::{check_braid_relation, check_symmetry, SymmetryKind};
use ncprob_core::tuplecomb::*;

type M = DMatrix<C64>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn kron_all(fs: &[M]) -> M {
    fs.iter().skip(1).fold(fs[0].clone(), |acc, f| acc.kronecker(f))
}

fn sx() -> M {
    M::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

fn u_omega_oracle(w: C64) -> M {
    let mut u = M::zeros(4, 4);
    u[(0, 0)] = c(1., 0.);
    u[(1, 2)] = c(1., 0.);
    u[(2, 1)] = c(1., 0.);
    u[(3, 3)] = w;
    u
}

/// `tr(ι_{t1}(σx) ⋯ ι_{tn}(σx)) / 16` on four legs with `ι_1 = Ad(U_ω ⊗ 1 ⊗ 1) ι_0`.
fn codomain_oracle(w: C64, tuple: &[usize]) -> C64 {
    let id = M::identity(2, 2);
    let leg = |k: usize| {
        let mut fs = vec![id.clone(); 4];
        fs[k] = sx();
        kron_all(&fs)
    };
    let big_u = kron_all(&[u_omega_oracle(w), id.clone(), id.clone()]);
    let iota1 = &big_u * leg(0) * big_u.adjoint();
    let mut acc = M::identity(16, 16);
    for &t in tuple {
        acc = if t == 1 { acc * &iota1 } else { acc * leg(t) };
    }
    acc.trace() / c(16., 0.)
}

fn omegas() -> Vec<C64> {
    vec![
        c(1., 0.),
        c(0., 1.),
        c(-1., 0.),
        C64::from_polar(1.0, std::f64::consts::FRAC_PI_3),
    ]
}

#[test]
fn codomain_moments_match_matrix_oracle() {
    for w in omegas() {
        let m = codomain_perturbed_sequence(w, 4).unwrap();
        for t in [[0, 1, 0, 1], [2, 3, 2, 3], [1, 0, 1, 0], [1, 2, 1, 2], [0, 1, 1, 0]] {
            let v = m.psi_moment(&IndexTuple::new(t.to_vec()), &[PAULI_X; 4]).unwrap();
            assert!((v - codomain_oracle(w, &t)).norm() <= 1e-12, "ω={w} t={t:?}");
        }
        let a = m.psi_moment(&IndexTuple::new(vec![0, 1, 0, 1]), &[PAULI_X; 4]).unwrap();
        assert!((a - c(w.re, 0.)).norm() <= 1e-12);
        let b = m.psi_moment(&IndexTuple::new(vec![2, 3, 2, 3]), &[PAULI_X; 4]).unwrap();
        assert!((b - c(1., 0.)).norm() <= 1e-12);
    }
}

#[test]
fn stationarity_fails_iff_omega_is_not_one() {
    for w in omegas() {
        let m = codomain_perturbed_sequence(w, 4).unwrap();
        let v = check_symmetry(&m, SymmetryKind::Stationary, 4, 4, 1e-9).unwrap();
        assert_eq!(v.pass, w == c(1., 0.), "ω = {w}");
    }
}

#[test]
fn braid_residual_matches_oracle() {
    for w in omegas() {
        let id = M::identity(2, 2);
        let u = u_omega_oracle(w);
        let a = u.kronecker(&id);
        let b = id.kronecker(&u);
        let oracle = (&a * &b * &a - &b * &a * &b).norm();
        let r = check_braid_relation(&u_omega(w), 1e-12).unwrap();
        assert!(r.holds && r.residual <= 1e-12);
        assert!(oracle <= 1e-12);
    }
}

#[test]
fn u_omega_entries() {
    let w = c(0.6, 0.8);
    let u = u_omega(w);
    let expect = u_omega_oracle(w);
    assert!((u.block(0) - &expect).norm() == 0.0);
    assert!(u_omega(c(1., 0.)).approx_eq(&flip(2), 0.0));
}

#[test]
fn coin_gap_is_four_hundredths() {
    let m = coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 4).unwrap();
    let joint = m.psi_moment(&IndexTuple::new(vec![0, 1]), &[0, 0]).unwrap();
    let single = m.psi_moment(&IndexTuple::new(vec![0]), &[0]).unwrap();
    assert!((joint - c(0.29, 0.)).norm() <= 1e-12);
    assert!((single * single - c(0.25, 0.)).norm() <= 1e-12);
    let scalars = Subalgebra::scalars(&m.ambient().unwrap().state);
    let v = check_sequence_independence(&m, &scalars, IndependenceMode::Ci, 1, 1e-10).unwrap();
    assert!(!v.pass && (v.max_violation - 0.04).abs() <= 1e-10);
    let fibers = m.fiber_scalars().unwrap();
    for mode in [IndependenceMode::Ci, IndependenceMode::Cf] {
        let v = check_sequence_independence(&m, &fibers, mode, 2, 1e-10).unwrap();
        assert!(v.pass && v.max_violation <= 1e-10, "{mode:?}");
    }
}

#[test]
fn clt_fourth_moment_closed_form() {
    let base = FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap());
    let m = iid_tensor_sequence(&base, 32).unwrap();
    let x = m.basis()[PAULI_X].clone();
    for n in [2usize, 4, 8, 16, 32] {
        let want = 3.0 - 2.0 / n as f64;
        let bf = sn_moment_bruteforce(&m, &x, 4, n).unwrap();
        let cl = sn_moment_by_classes(&m, &x, 4, n, CLT_TOL).unwrap();
        assert!((bf - want).abs() <= 1e-10 && (cl - want).abs() <= 1e-10 && (bf - cl).abs() <= 1e-10);
    }
    let l = clt_limit(&m, &x, 4, None, CLT_TOL).unwrap();
    assert!((l.limit - 3.0).abs() <= 1e-12);
}

#[test]
fn coin_conditional_fourth_moment() {
    let m = coin_mixture_sequence(&[(0.3, 0.5), (0.7, 0.5)], 4).unwrap();
    let n = m.fiber_scalars().unwrap();
    let r = conditional_limit_ap(&m, &m.basis()[0], 4, &n, true, CLT_TOL).unwrap();
    assert!(r.closed_form_deviation.unwrap() <= 1e-9);
    // per fibre E(x²) = p(1 − p) = 0.21 for both atoms
    assert!((r.scalar.unwrap() - c(3.0 * 0.0441, 0.)).norm() <= 1e-9);
}

#[test]
fn counting_identities() {
    for p in [2usize, 4, 6, 8] {
        let pairings = enumerate_pair_partitions(p).unwrap().len() as u128;
        assert_eq!(pairings, pair_double_factorial(p));
        let classes = enumerate_pair_classes(p).unwrap().len() as u128;
        assert_eq!(classes, pair_double_factorial(p) * factorial(p / 2));
    }
    let noncrossing = enumerate_pair_partitions(6)
        .unwrap()
        .iter()
        .filter(|p| p.crossing_number() == 0)
        .count();
    assert_eq!(noncrossing, 5);
    assert_eq!(catalan(3), 5);
    for p in 1..=10 {
        let g = reference_moment(ReferenceLaw::Gaussian, p, None).unwrap();
        let s = reference_moment(ReferenceLaw::Semicircle, p, None).unwrap();
        assert_eq!(reference_moment(ReferenceLaw::QInterp, p, Some(1.0)).unwrap(), g);
        assert_eq!(reference_moment(ReferenceLaw::QInterp, p, Some(0.0)).unwrap(), s);
    }
}

#[test]
fn worked_tuple_pair() {
    let base = IndexTuple::new(vec![1, 3, 1, 3, 4, 2, 4, 2, 4]);
    assert_eq!(canon(Relation::Order, &base).entries(), &[0, 2, 0, 2, 3, 1, 3, 1, 3]);
    for n in 0..20 {
        let shifted = IndexTuple::new(vec![1, 3, 1, 3, 4 + n, 2 + n, 4 + n, 2 + n, 4 + n]);
        assert_eq!(
            are_equivalent(Relation::Order, &base, &shifted).unwrap(),
            n == 0,
            "n = {n}"
        );
    }
}

#[test]
fn refined_average_against_enumeration() {
    let base = FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap());
    let m = iid_tensor_sequence(&base, 16).unwrap();
    let x = MonomialSpec::new(vec![0, 1, 0], vec![PAULI_X, PAULI_Y, PAULI_X]).unwrap();
    let ys = vec![
        MonomialSpec::new(vec![0, 2], vec![PAULI_X, PAULI_Y]).unwrap(),
        MonomialSpec::new(vec![1, 0], vec![PAULI_Y, PAULI_X]).unwrap(),
    ];
    for big_n in 1..=3 {
        let r = refined_average_tn(&m, &x, big_n, &ys, TN_EXACT_CAP, 0, 0).unwrap();
        for (y, v) in ys.iter().zip(&r.values) {
            let direct = refined_average_tn_direct(&m, &x, big_n, y).unwrap();
            assert!((v - direct).norm() <= 1e-12);
        }
    }
}

#[test]
fn iid_model_is_symmetric() {
    let base = FaithfulState::normalized_trace(&BlockAlgebra::full(2).unwrap());
    let m = iid_tensor_sequence(&base, 6).unwrap();
    for kind in SymmetryKind::ALL {
        let v = check_symmetry(&m, kind, 4, 6, 1e-10).unwrap();
        assert!(v.pass && v.max_violation <= 1e-10);
    }
}
