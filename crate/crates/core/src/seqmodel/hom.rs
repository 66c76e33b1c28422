use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::matalg::{AlgElement, Block, FaithfulState, C64};

/// Default tolerance for homomorphism and state-compatibility checks.
pub const HOM_TOL: f64 = 1e-9;

/// A linear map between block algebras given by the images of the domain's
/// matrix units, intended to be a state-compatible injective *-homomorphism.
#[derive(Clone, Debug)]
pub struct StarHom {
    domain: FaithfulState,
    codomain: FaithfulState,
    images: Vec<AlgElement>,
}

/// Deviations measured by [`StarHom::defects`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HomDefects {
    pub multiplicativity: f64,
    pub unitality: f64,
    pub star: f64,
    pub state: f64,
    /// Smallest eigenvalue of the Gram matrix of the images under the codomain
    /// GNS form. Positive iff the map is injective.
    pub min_gram_eigenvalue: f64,
}

impl HomDefects {
    pub fn check(&self, tol: f64) -> Result<()> {
        let problems: Vec<String> = [
            ("multiplicativity", self.multiplicativity),
            ("unitality", self.unitality),
            ("*-preservation", self.star),
            ("state compatibility", self.state),
        ]
        .iter()
        .filter(|(_, d)| *d > tol)
        .map(|(name, d)| format!("{name} defect {d:.3e}"))
        .collect();
        if !problems.is_empty() {
            return Err(Error::Validation(format!(
                "not a state-compatible *-homomorphism: {}",
                problems.join(", ")
            )));
        }
        if self.min_gram_eigenvalue <= tol {
            return Err(Error::Validation(format!(
                "not injective: Gram matrix eigenvalue {:.3e}",
                self.min_gram_eigenvalue
            )));
        }
        Ok(())
    }
}

impl StarHom {
    /// Build from matrix-unit images and validate within [`HOM_TOL`].
    pub fn new(domain: &FaithfulState, codomain: &FaithfulState, images: Vec<AlgElement>) -> Result<Self> {
        let hom = Self::new_unchecked(domain, codomain, images)?;
        hom.defects().check(HOM_TOL)?;
        Ok(hom)
    }

    /// Build from matrix-unit images, checking shapes only.
    pub fn new_unchecked(domain: &FaithfulState, codomain: &FaithfulState, images: Vec<AlgElement>) -> Result<Self> {
        if images.len() != domain.algebra().dim() {
            return Err(Error::LengthMismatch {
                left: domain.algebra().dim(),
                right: images.len(),
            });
        }
        for img in &images {
            codomain.algebra().ensure_same(img.algebra())?;
        }
        Ok(Self {
            domain: domain.clone(),
            codomain: codomain.clone(),
            images,
        })
    }

    /// The map determined by `f` on matrix units, validated.
    pub fn from_fn(
        domain: &FaithfulState,
        codomain: &FaithfulState,
        f: impl Fn(&AlgElement) -> Result<AlgElement>,
    ) -> Result<Self> {
        let images = domain
            .algebra()
            .matrix_unit_basis()
            .iter()
            .map(f)
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, codomain, images)
    }

    pub(crate) fn from_fn_unchecked(
        domain: &FaithfulState,
        codomain: &FaithfulState,
        f: impl Fn(&AlgElement) -> Result<AlgElement>,
    ) -> Result<Self> {
        let images = domain
            .algebra()
            .matrix_unit_basis()
            .iter()
            .map(f)
            .collect::<Result<Vec<_>>>()?;
        Self::new_unchecked(domain, codomain, images)
    }

    pub fn identity(state: &FaithfulState) -> Self {
        let images = state.algebra().matrix_unit_basis();
        Self {
            domain: state.clone(),
            codomain: state.clone(),
            images,
        }
    }

    /// `Ad(u): x ↦ u x u*` on the algebra of `state`; must preserve the state.
    pub fn inner_automorphism(state: &FaithfulState, u: &AlgElement) -> Result<Self> {
        state.algebra().ensure_same(u.algebra())?;
        if !u.is_unitary(1e-10) {
            return Err(Error::Validation("conjugating element is not unitary".into()));
        }
        let ustar = u.adjoint();
        Self::from_fn(state, state, |x| Ok(&(u * x) * &ustar))
    }

    pub fn domain(&self) -> &FaithfulState {
        &self.domain
    }

    pub fn codomain(&self) -> &FaithfulState {
        &self.codomain
    }

    pub fn images(&self) -> &[AlgElement] {
        &self.images
    }

    pub fn apply(&self, x: &AlgElement) -> Result<AlgElement> {
        self.domain.algebra().ensure_same(x.algebra())?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &AlgElement) -> AlgElement {
        let mut out = self.codomain.algebra().zero();
        for (c, img) in x.to_coords().iter().zip(&self.images) {
            if *c != C64::new(0.0, 0.0) {
                out.axpy(*c, img);
            }
        }
        out
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &StarHom) -> Result<StarHom> {
        self.domain.algebra().ensure_same(other.codomain.algebra())?;
        let images = other.images.iter().map(|y| self.apply_unchecked(y)).collect();
        Ok(StarHom {
            domain: other.domain.clone(),
            codomain: self.codomain.clone(),
            images,
        })
    }

    /// `Ad(u) ∘ self` for a unitary `u` of the codomain.
    pub fn conjugated(&self, u: &AlgElement) -> Result<StarHom> {
        self.codomain.algebra().ensure_same(u.algebra())?;
        let ustar = u.adjoint();
        let images = self.images.iter().map(|y| &(u * y) * &ustar).collect();
        Ok(StarHom {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            images,
        })
    }

    pub fn defects(&self) -> HomDefects {
        let dom = self.domain.algebra();
        let units = dom.matrix_unit_basis();
        // index of e^{b}_{jk} in the matrix-unit frame
        let mut offsets = Vec::with_capacity(dom.num_blocks());
        let mut acc = 0;
        for &d in dom.blocks() {
            offsets.push(acc);
            acc += d * d;
        }
        let idx = |b: usize, j: usize, k: usize| offsets[b] + j * dom.blocks()[b] + k;

        let mut mult: f64 = 0.0;
        let mut star: f64 = 0.0;
        let mut unit_sum = self.codomain.algebra().zero();
        for (b, &d) in dom.blocks().iter().enumerate() {
            for j in 0..d {
                unit_sum = &unit_sum + &self.images[idx(b, j, j)];
                for k in 0..d {
                    let x = &self.images[idx(b, j, k)];
                    star = star.max((&x.adjoint() - &self.images[idx(b, k, j)]).max_abs());
                    for (b2, &d2) in dom.blocks().iter().enumerate() {
                        for l in 0..d2 {
                            for m in 0..d2 {
                                let prod = x * &self.images[idx(b2, l, m)];
                                let dev = if b == b2 && k == l {
                                    (&prod - &self.images[idx(b, j, m)]).max_abs()
                                } else {
                                    prod.max_abs()
                                };
                                mult = mult.max(dev);
                            }
                        }
                    }
                }
            }
        }
        let unitality = (&unit_sum - &self.codomain.algebra().identity()).max_abs();
        let state = units
            .iter()
            .zip(&self.images)
            .map(|(u, img)| (self.codomain.eval_unchecked(img) - self.domain.eval_unchecked(u)).norm())
            .fold(0.0, f64::max);
        let n = self.images.len();
        let mut gram = Block::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                gram[(r, c)] = self.codomain.gns_unchecked(&self.images[r], &self.images[c]);
            }
        }
        let min_gram_eigenvalue = SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        HomDefects {
            multiplicativity: mult,
            unitality,
            star,
            state,
            min_gram_eigenvalue,
        }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        self.defects().check(tol)
    }
}

/// `‖(u⊗1)(1⊗u)(u⊗1) − (1⊗u)(u⊗1)(1⊗u)‖` (operator norm) for `u` acting on
/// `ℂ^d ⊗ ℂ^d`, given as a single `d² × d²` block.
pub fn braid_residual(u: &AlgElement) -> Result<f64> {
    let d = two_leg_dimension(u)?;
    let id = AlgElement::from_matrix(Block::identity(d, d))?;
    let left = u.kron(&id);
    let right = id.kron(u);
    let lhs = &(&left * &right) * &left;
    let rhs = &(&right * &left) * &right;
    Ok((&lhs - &rhs).operator_norm())
}

/// Local dimension `d` of an element of `M_d ⊗ M_d`.
pub(crate) fn two_leg_dimension(u: &AlgElement) -> Result<usize> {
    if u.algebra().num_blocks() != 1 {
        return Err(Error::Validation(
            "two-leg operator must be a single full matrix block".into(),
        ));
    }
    let n = u.algebra().blocks()[0];
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n || d < 2 {
        return Err(Error::Validation(format!(
            "block size {n} is not d² for a local dimension d ≥ 2"
        )));
    }
    Ok(d)
}

/// The unitary `U_ω` on `ℂ² ⊗ ℂ²`: `|00⟩ ↦ |00⟩`, `|01⟩ ↦ |10⟩`,
/// `|10⟩ ↦ |01⟩`, `|11⟩ ↦ ω|11⟩`.
pub fn u_omega(omega: C64) -> AlgElement {
    let mut m = Block::zeros(4, 4);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 2)] = C64::new(1.0, 0.0);
    m[(2, 1)] = C64::new(1.0, 0.0);
    m[(3, 3)] = omega;
    AlgElement::from_matrix(m).expect("square")
}

/// The tensor flip on `ℂ^d ⊗ ℂ^d`.
pub fn flip(d: usize) -> AlgElement {
    let n = d * d;
    let mut m = Block::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
        }
    }
    AlgElement::from_matrix(m).expect("square")
}

/// Place a two-leg operator on legs `(k, k+1)` of a chain of `length` copies of `M_d`.
pub(crate) fn two_leg_operator(u: &AlgElement, d: usize, k: usize, length: usize) -> Result<AlgElement> {
    if k + 1 >= length {
        return Err(Error::Validation(format!(
            "legs ({k}, {}) outside chain of length {length}",
            k + 1
        )));
    }
    let left = d.pow(k as u32);
    let right = d.pow((length - k - 2) as u32);
    let l = AlgElement::from_matrix(Block::identity(left, left))?;
    let r = AlgElement::from_matrix(Block::identity(right, right))?;
    Ok(l.kron(u).kron(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matalg::{pauli_matrices, BlockAlgebra};

    #[test]
    fn identity_is_valid() {
        let m2 = BlockAlgebra::full(2).unwrap();
        let tr = FaithfulState::normalized_trace(&m2);
        StarHom::identity(&tr).validate(1e-12).unwrap();
    }

    #[test]
    fn non_unital_map_rejected() {
        let c2 = BlockAlgebra::commutative(2).unwrap();
        let s = FaithfulState::trace_p(0.5).unwrap();
        let e1 = c2.matrix_unit(0, 0, 0);
        let images = vec![e1.clone(), e1];
        assert!(StarHom::new(&s, &s, images).is_err());
    }

    #[test]
    fn state_violation_rejected() {
        // swapping the atoms of trace_{0.3} moves mass
        let s = FaithfulState::trace_p(0.3).unwrap();
        let c2 = s.algebra().clone();
        let images = vec![c2.matrix_unit(1, 0, 0), c2.matrix_unit(0, 0, 0)];
        let err = StarHom::new(&s, &s, images).unwrap_err();
        assert!(err.to_string().contains("state"));
    }

    #[test]
    fn conjugation_by_sigma_x() {
        let m2 = BlockAlgebra::full(2).unwrap();
        let tr = FaithfulState::normalized_trace(&m2);
        let [_, sx, _, sz] = pauli_matrices();
        let sx = AlgElement::from_matrix(sx).unwrap();
        let sz = AlgElement::from_matrix(sz).unwrap();
        let g = StarHom::inner_automorphism(&tr, &sx).unwrap();
        assert!(g.apply(&sz).unwrap().approx_eq(&(-&sz), 1e-15));
    }

    #[test]
    fn braid_residuals() {
        let m4 = BlockAlgebra::full(4).unwrap();
        assert_eq!(braid_residual(&m4.identity()).unwrap(), 0.0);
        assert!(braid_residual(&flip(2)).unwrap() <= 1e-12);
        let w = C64::from_polar(1.0, std::f64::consts::PI / 3.0);
        assert!(braid_residual(&u_omega(w)).unwrap() <= 1e-12);
        // a generic unitary fails
        let mut m = Block::identity(4, 4);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        m[(0, 0)] = C64::new(h, 0.0);
        m[(0, 1)] = C64::new(h, 0.0);
        m[(1, 0)] = C64::new(h, 0.0);
        m[(1, 1)] = C64::new(-h, 0.0);
        assert!(braid_residual(&AlgElement::from_matrix(m).unwrap()).unwrap() > 1e-3);
    }

    #[test]
    fn u_one_is_flip() {
        assert!(u_omega(C64::new(1.0, 0.0)).approx_eq(&flip(2), 0.0));
    }
}
