//! Generated *-subalgebras and ψ-preserving conditional expectations.
//!
//! A conditional expectation is always built as the GNS-orthogonal
//! projection onto the target. Whether that projection really is the
//! ψ-preserving conditional expectation (it is iff the target is invariant
//! under the modular group, here: under conjugation by the state density)
//! is reported as a [`Validity`] flag instead of an error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matalg::{min_hermitian_eigenvalue, AlgElement, Block, BlockAlgebra, FaithfulState, C64, ZERO};

/// Seed of the positivity sampler used by [`conditional_expectation`].
pub const POSITIVITY_SEED: u64 = 0x5EED;
/// Number of random positive elements `x*x` sampled for positivity.
pub const POSITIVITY_SAMPLES: usize = 200;
const POSITIVITY_TOL: f64 = 1e-8;
const BIMODULE_SAMPLES: usize = 16;
const BIMODULE_TOL: f64 = 1e-8;

/// Options for [`generate_subalgebra_with`].
#[derive(Clone, Copy, Debug)]
pub struct GenerateOptions {
    pub iteration_cap: usize,
    pub dim_cap: Option<usize>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            iteration_cap: 64,
            dim_cap: None,
        }
    }
}

/// A labelled element: the label records how the element was built
/// (e.g. `ι0(σx)·ι2(σz)`), so verdict witnesses can be reproduced.
#[derive(Clone, Debug, PartialEq)]
pub struct Labeled {
    pub label: String,
    pub element: AlgElement,
}

impl Labeled {
    pub fn new(label: impl Into<String>, element: AlgElement) -> Self {
        Self {
            label: label.into(),
            element,
        }
    }
}

/// A unital *-subalgebra with a ψ-orthonormal basis.
///
/// `spanning` holds the raw words accepted during generation, one per basis
/// vector; they span the same space and are the elements used for
/// factorisation checks.
#[derive(Clone, Debug)]
pub struct Subalgebra {
    state: FaithfulState,
    basis: Vec<AlgElement>,
    spanning: Vec<Labeled>,
    contains_identity: bool,
}

struct Builder<'a> {
    state: &'a FaithfulState,
    basis: Vec<AlgElement>,
    spanning: Vec<Labeled>,
    rank_tol: f64,
}

impl<'a> Builder<'a> {
    fn new(state: &'a FaithfulState) -> Self {
        Self {
            state,
            basis: Vec::new(),
            spanning: Vec::new(),
            rank_tol: 1e-10 * state.algebra().dim() as f64,
        }
    }

    fn residual(&self, x: &AlgElement) -> AlgElement {
        let mut r = x.clone();
        // modified Gram–Schmidt with one re-orthogonalisation pass
        for _ in 0..2 {
            for e in &self.basis {
                let c = self.state.gns_unchecked(e, &r);
                r.axpy(-c, e);
            }
        }
        r
    }

    fn try_add(&mut self, item: Labeled) -> bool {
        let scale = self.state.gns_norm(&item.element).max(1.0);
        let r = self.residual(&item.element);
        let norm = self.state.gns_norm(&r);
        if norm > self.rank_tol * scale {
            self.basis.push(r.scale(C64::new(1.0 / norm, 0.0)));
            self.spanning.push(item);
            true
        } else {
            false
        }
    }
}

/// Smallest unital *-subalgebra containing `generators`, with default options.
pub fn generate_subalgebra(state: &FaithfulState, generators: &[Labeled], tol: f64) -> Result<Subalgebra> {
    generate_subalgebra_with(state, generators, tol, GenerateOptions::default())
}

/// Smallest unital *-subalgebra containing `generators`.
///
/// Starts from the identity and the generators (and their adjoints), then
/// repeatedly multiplies the newest accepted words by every generator on
/// the right and Gram–Schmidt-extends until the dimension stabilises. The
/// basis order is deterministic: generator order, then product order.
pub fn generate_subalgebra_with(
    state: &FaithfulState,
    generators: &[Labeled],
    tol: f64,
    options: GenerateOptions,
) -> Result<Subalgebra> {
    if generators.is_empty() {
        return Err(Error::Validation("at least one generator is required".into()));
    }
    let ambient = state.algebra();
    for g in generators {
        ambient.ensure_same(g.element.algebra())?;
    }
    let mut gens: Vec<Labeled> = generators.to_vec();
    for g in generators {
        if !g.element.is_hermitian(tol) {
            gens.push(Labeled::new(format!("({})*", g.label), g.element.adjoint()));
        }
    }

    let mut builder = Builder::new(state);
    let check_cap = |b: &Builder| -> Result<()> {
        match options.dim_cap {
            Some(cap) if b.basis.len() > cap => Err(Error::Resource {
                what: "generated subalgebra dimension".into(),
                size: b.basis.len() as u128,
                cap: cap as u128,
            }),
            _ => Ok(()),
        }
    };

    builder.try_add(Labeled::new("1", ambient.identity()));
    let mut frontier: Vec<usize> = vec![0];
    for g in &gens {
        if builder.try_add(g.clone()) {
            frontier.push(builder.spanning.len() - 1);
        }
    }
    check_cap(&builder)?;

    let mut stabilized = false;
    for _ in 0..options.iteration_cap {
        let mut next = Vec::new();
        for &w in &frontier {
            for g in &gens {
                let word = &builder.spanning[w];
                let label = if word.label == "1" {
                    g.label.clone()
                } else {
                    format!("{}·{}", word.label, g.label)
                };
                let element = &word.element * &g.element;
                if builder.try_add(Labeled::new(label, element)) {
                    next.push(builder.spanning.len() - 1);
                    check_cap(&builder)?;
                }
            }
        }
        if next.is_empty() {
            stabilized = true;
            break;
        }
        frontier = next;
    }
    if !stabilized {
        return Err(Error::Internal(format!(
            "subalgebra generation did not stabilise within {} rounds",
            options.iteration_cap
        )));
    }
    let contains_identity = {
        let sub = Subalgebra {
            state: state.clone(),
            basis: builder.basis.clone(),
            spanning: Vec::new(),
            contains_identity: false,
        };
        sub.contains(&ambient.identity(), tol)
    };
    Ok(Subalgebra {
        state: state.clone(),
        basis: builder.basis,
        spanning: builder.spanning,
        contains_identity,
    })
}

impl Subalgebra {
    /// `ℂ·1`.
    pub fn scalars(state: &FaithfulState) -> Self {
        let one = state.algebra().identity();
        Self {
            state: state.clone(),
            basis: vec![one.clone()],
            spanning: vec![Labeled::new("1", one)],
            contains_identity: true,
        }
    }

    pub fn state(&self) -> &FaithfulState {
        &self.state
    }

    pub fn ambient(&self) -> &BlockAlgebra {
        self.state.algebra()
    }

    pub fn basis(&self) -> &[AlgElement] {
        &self.basis
    }

    pub fn spanning(&self) -> &[Labeled] {
        &self.spanning
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn contains_identity(&self) -> bool {
        self.contains_identity
    }

    pub fn is_trivial(&self) -> bool {
        self.contains_identity && self.basis.len() == 1
    }

    /// GNS-orthogonal projection onto the span.
    pub fn project(&self, x: &AlgElement) -> AlgElement {
        let mut out = self.ambient().zero();
        for e in &self.basis {
            let c = self.state.gns_unchecked(e, x);
            out.axpy(c, e);
        }
        out
    }

    /// Relative GNS distance of `x` from the span.
    pub fn distance(&self, x: &AlgElement) -> f64 {
        let r = x - &self.project(x);
        self.state.gns_norm(&r) / self.state.gns_norm(x).max(1.0)
    }

    pub fn contains(&self, x: &AlgElement, tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// `self ⊆ other` as spans.
    pub fn is_subspace_of(&self, other: &Subalgebra, tol: f64) -> bool {
        self.basis.iter().all(|e| other.contains(e, tol))
    }

    /// Largest deviation from orthonormality of the basis.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.state.gns_unchecked(a, b) - target).norm());
            }
        }
        worst
    }

    /// Largest distance of `e_i e_j` and `e_i*` from the span.
    pub fn closure_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.basis {
            worst = worst.max(self.distance(&a.adjoint()));
            for b in &self.basis {
                worst = worst.max(self.distance(&(a * b)));
            }
        }
        worst
    }

    /// Dimension of `self ∩ other`, from `dim A + dim B − dim(A + B)`.
    pub fn intersection_dim(&self, other: &Subalgebra) -> usize {
        let mut builder = Builder::new(&self.state);
        for e in self.basis.iter().chain(&other.basis) {
            builder.try_add(Labeled::new("", e.clone()));
        }
        (self.dim() + other.dim()).saturating_sub(builder.basis.len())
    }
}

/// Outcome of classifying the projection onto a target subalgebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Valid,
    NotModularlyInvariant,
    NotPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CondExpDiagnostics {
    pub modular_deviation: f64,
    pub min_sampled_eigenvalue: f64,
    pub bimodule_deviation: f64,
}

/// The GNS-orthogonal projection onto a subalgebra, with its validity.
#[derive(Clone, Debug)]
pub struct CondExp {
    target: Subalgebra,
    validity: Validity,
    diagnostics: CondExpDiagnostics,
}

impl CondExp {
    pub fn target(&self) -> &Subalgebra {
        &self.target
    }

    pub fn validity(&self) -> Validity {
        self.validity
    }

    pub fn is_valid(&self) -> bool {
        self.validity == Validity::Valid
    }

    pub fn diagnostics(&self) -> &CondExpDiagnostics {
        &self.diagnostics
    }

    pub fn apply(&self, x: &AlgElement) -> AlgElement {
        self.target.project(x)
    }

    /// Matrix of the projection acting on matrix-unit coordinates.
    pub fn matrix(&self) -> Block {
        let ambient = self.target.ambient();
        let n = ambient.dim();
        let mut m = Block::zeros(n, n);
        for (c, unit) in ambient.matrix_unit_basis().iter().enumerate() {
            for (r, v) in self.apply(unit).to_coords().into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub(crate) fn require_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Conditioning(format!(
                "no ψ-preserving conditional expectation onto the candidate ({:?})",
                self.validity
            )))
        }
    }
}

/// Relative deviation of `ρ N ρ⁻¹` from `N`, or `None` if the state is not faithful.
fn modular_deviation(state: &FaithfulState, target: &Subalgebra) -> Option<f64> {
    if !state.check_faithful(0.0).faithful {
        return None;
    }
    let d = state.density();
    let blocks_inv: Option<Vec<Block>> = d.blocks().iter().map(|m| m.clone().try_inverse()).collect();
    let d_inv = AlgElement::from_blocks(state.algebra(), blocks_inv?).ok()?;
    let worst = target
        .basis()
        .iter()
        .map(|e| target.distance(&(&(&d * e) * &d_inv)))
        .fold(0.0, f64::max);
    Some(worst)
}

/// Is the target invariant under conjugation by the state density?
pub fn check_modular_invariance(state: &FaithfulState, target: &Subalgebra, tol: f64) -> bool {
    if state.is_tracial(1e-14) {
        return true;
    }
    modular_deviation(state, target).is_some_and(|dev| dev <= tol)
}

fn random_element(algebra: &BlockAlgebra, rng: &mut ChaCha8Rng) -> AlgElement {
    let coords: Vec<C64> = (0..algebra.dim())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    AlgElement::from_coords(algebra, &coords).expect("coordinate count")
}

/// Build the projection onto `target` and classify it.
pub fn conditional_expectation(state: &FaithfulState, target: &Subalgebra, tol: f64) -> Result<CondExp> {
    state.algebra().ensure_same(target.ambient())?;
    if !target.contains_identity() {
        return Err(Error::Precondition(
            "conditioning target must contain the identity".into(),
        ));
    }
    let ambient = state.algebra();
    let modular = if state.is_tracial(1e-14) {
        Some(0.0)
    } else {
        modular_deviation(state, target)
    };
    let modular_deviation = modular.unwrap_or(f64::INFINITY);

    let mut rng = ChaCha8Rng::seed_from_u64(POSITIVITY_SEED);
    let mut min_eig = f64::INFINITY;
    for _ in 0..POSITIVITY_SAMPLES {
        let x = random_element(ambient, &mut rng);
        let ex = target.project(&(&x.adjoint() * &x));
        for b in ex.blocks() {
            min_eig = min_eig.min(min_hermitian_eigenvalue(b));
        }
    }
    let mut bimodule: f64 = 0.0;
    for _ in 0..BIMODULE_SAMPLES {
        let x = random_element(ambient, &mut rng);
        let a = &target.basis()[rng.gen_range(0..target.dim())];
        let b = &target.basis()[rng.gen_range(0..target.dim())];
        let lhs = target.project(&(&(a * &x) * b));
        let rhs = &(a * &target.project(&x)) * b;
        let scale = a.max_abs() * b.max_abs() * x.max_abs();
        bimodule = bimodule.max((&lhs - &rhs).max_abs() / scale.max(1.0));
    }

    let validity = if modular_deviation > tol || bimodule > BIMODULE_TOL {
        Validity::NotModularlyInvariant
    } else if min_eig < -POSITIVITY_TOL {
        Validity::NotPositive
    } else {
        Validity::Valid
    };
    Ok(CondExp {
        target: target.clone(),
        validity,
        diagnostics: CondExpDiagnostics {
            modular_deviation,
            min_sampled_eigenvalue: min_eig,
            bimodule_deviation: bimodule,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SquareCondition {
    pub name: &'static str,
    pub holds: bool,
    pub deviation: f64,
}

/// The four equivalent commuting-square conditions, evaluated numerically.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutingSquareReport {
    pub conditions: Vec<SquareCondition>,
    /// All four conditions hold, or all four fail.
    pub all_agree: bool,
    pub intersection_dim: usize,
    pub tolerance: f64,
}

impl CommutingSquareReport {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }
}

/// Evaluate the commuting-square conditions for `M_0 ⊆ M_1 ∩ M_2`:
/// (i) `M_0`-independence of `M_1, M_2`; (ii) `E_1(M_2) = M_0`;
/// (iii) `E_1 E_2 = E_0`; (iv) `E_1 E_2 = E_2 E_1` and `M_1 ∩ M_2 = M_0`.
pub fn verify_commuting_square(e1: &CondExp, e2: &CondExp, e0: &CondExp, tol: f64) -> Result<CommutingSquareReport> {
    for e in [e1, e2, e0] {
        e.require_valid()?;
    }
    let (m1, m2, m0) = (e1.target(), e2.target(), e0.target());
    m1.ambient().ensure_same(m2.ambient())?;
    m1.ambient().ensure_same(m0.ambient())?;
    if !(m0.is_subspace_of(m1, tol) && m0.is_subspace_of(m2, tol)) {
        return Err(Error::Precondition("commuting square requires M_0 ⊂ M_1 ∩ M_2".into()));
    }

    let mut independence: f64 = 0.0;
    for x in m1.basis() {
        for y in m2.basis() {
            let lhs = e0.apply(&(x * y));
            let rhs = &e0.apply(x) * &e0.apply(y);
            independence = independence.max((&lhs - &rhs).max_abs());
        }
    }

    let mut image: f64 = 0.0;
    for y in m2.basis() {
        let z = e1.apply(y);
        image = image.max((&z - &e0.apply(&z)).max_abs());
    }

    let units = m1.ambient().matrix_unit_basis();
    let mut product: f64 = 0.0;
    let mut commute: f64 = 0.0;
    for x in &units {
        let e12 = e1.apply(&e2.apply(x));
        let e21 = e2.apply(&e1.apply(x));
        product = product.max((&e12 - &e0.apply(x)).max_abs());
        commute = commute.max((&e12 - &e21).max_abs());
    }
    let intersection_dim = m1.intersection_dim(m2);
    let excess = intersection_dim.saturating_sub(m0.dim()) as f64;

    let conditions = vec![
        SquareCondition {
            name: "m0_independence",
            holds: independence <= tol,
            deviation: independence,
        },
        SquareCondition {
            name: "e1_of_m2_is_m0",
            holds: image <= tol,
            deviation: image,
        },
        SquareCondition {
            name: "e1_e2_equals_e0",
            holds: product <= tol,
            deviation: product,
        },
        SquareCondition {
            name: "commuting_with_intersection_m0",
            holds: commute <= tol && excess == 0.0,
            deviation: commute.max(excess),
        },
    ];
    let holds = conditions.iter().filter(|c| c.holds).count();
    Ok(CommutingSquareReport {
        all_agree: holds == 0 || holds == conditions.len(),
        conditions,
        intersection_dim,
        tolerance: tol,
    })
}

/// Sum of the blocks `block_range` of the identity (a central projection).
pub fn central_projection(algebra: &BlockAlgebra, block_range: std::ops::Range<usize>) -> AlgElement {
    let blocks = algebra
        .blocks()
        .iter()
        .enumerate()
        .map(|(b, &d)| {
            if block_range.contains(&b) {
                Block::identity(d, d)
            } else {
                Block::from_element(d, d, ZERO)
            }
        })
        .collect();
    AlgElement::from_blocks(algebra, blocks).expect("block shapes")
}
