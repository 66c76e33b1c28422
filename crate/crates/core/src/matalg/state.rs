use nalgebra::SymmetricEigen;
use serde::Serialize;

use super::element::{AlgElement, Block, BlockAlgebra, C64, ZERO};
use crate::error::{Error, Result};

/// A state `ψ(x) = Σ_b w_b · tr(ρ_b x_b)` on a [`BlockAlgebra`].
///
/// Construction validates shape, hermiticity, unit trace of every density
/// and normalisation of the weights. Faithfulness (strict positivity) is a
/// separate diagnostic, see [`FaithfulState::check_faithful`].
#[derive(Clone, Debug, PartialEq)]
pub struct FaithfulState {
    algebra: BlockAlgebra,
    weights: Vec<f64>,
    densities: Vec<Block>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaithfulnessReport {
    pub faithful: bool,
    pub min_eigenvalue: f64,
    pub min_weight: f64,
    pub tolerance: f64,
}

const STRUCTURE_TOL: f64 = 1e-9;

impl FaithfulState {
    pub fn new(algebra: &BlockAlgebra, weights: Vec<f64>, densities: Vec<Block>) -> Result<Self> {
        let k = algebra.num_blocks();
        if weights.len() != k || densities.len() != k {
            return Err(Error::InvalidState(format!(
                "expected {k} weights and densities, got {} and {}",
                weights.len(),
                densities.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidState("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::InvalidState(format!("weights sum to {total}, not 1")));
        }
        for (b, (rho, &d)) in densities.iter().zip(algebra.blocks()).enumerate() {
            if rho.nrows() != d || rho.ncols() != d {
                return Err(Error::InvalidState(format!("density {b} has wrong shape")));
            }
            if (rho - rho.adjoint()).iter().any(|z| z.norm() > STRUCTURE_TOL) {
                return Err(Error::InvalidState(format!("density {b} is not hermitian")));
            }
            let tr = rho.trace();
            if (tr - C64::new(1.0, 0.0)).norm() > STRUCTURE_TOL {
                return Err(Error::InvalidState(format!("density {b} has trace {tr}")));
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            weights,
            densities,
        })
    }

    /// Trace-like state with given block weights and `ρ_b = 1/d_b`.
    pub fn with_block_weights(algebra: &BlockAlgebra, weights: Vec<f64>) -> Result<Self> {
        let densities = algebra
            .blocks()
            .iter()
            .map(|&d| Block::identity(d, d) / C64::new(d as f64, 0.0))
            .collect();
        Self::new(algebra, weights, densities)
    }

    /// The normalised trace: `w_b ∝ d_b`, `ρ_b = 1/d_b`.
    pub fn normalized_trace(algebra: &BlockAlgebra) -> Self {
        let total: usize = algebra.blocks().iter().sum();
        let weights = algebra.blocks().iter().map(|&d| d as f64 / total as f64).collect();
        Self::with_block_weights(algebra, weights).expect("normalized trace is a valid state")
    }

    /// `trace_p((a_1, a_2)) = p·a_1 + (1 − p)·a_2` on `ℂ²`.
    pub fn trace_p(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidState(format!("p = {p} outside [0, 1]")));
        }
        Self::with_block_weights(&BlockAlgebra::commutative(2)?, vec![p, 1.0 - p])
    }

    /// State on `M_d` with the given density matrix.
    pub fn from_density(rho: Block) -> Result<Self> {
        let algebra = BlockAlgebra::full(rho.nrows())?;
        Self::new(&algebra, vec![1.0], vec![rho])
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn densities(&self) -> &[Block] {
        &self.densities
    }

    pub fn is_tracial(&self, tol: f64) -> bool {
        self.densities.iter().all(|rho| {
            let d = rho.nrows() as f64;
            (rho - Block::identity(rho.nrows(), rho.nrows()) / C64::new(d, 0.0))
                .iter()
                .all(|z| z.norm() <= tol)
        })
    }

    pub fn eval(&self, x: &AlgElement) -> Result<C64> {
        self.algebra.ensure_same(x.algebra())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &AlgElement) -> C64 {
        let mut acc = ZERO;
        for ((w, rho), m) in self.weights.iter().zip(&self.densities).zip(x.blocks()) {
            acc += trace_of_product(rho, m) * *w;
        }
        acc
    }

    /// The GNS form `⟨x, y⟩ = ψ(x* y)`.
    pub fn gns_inner(&self, x: &AlgElement, y: &AlgElement) -> Result<C64> {
        self.algebra.ensure_same(x.algebra())?;
        self.algebra.ensure_same(y.algebra())?;
        Ok(self.gns_unchecked(x, y))
    }

    pub(crate) fn gns_unchecked(&self, x: &AlgElement, y: &AlgElement) -> C64 {
        // ψ(x*y) = Σ_b w_b tr(ρ_b x_b* y_b) = Σ_b w_b Σ_{jk} conj(x_jk) (y ρ)_jk
        let mut acc = ZERO;
        for (((w, rho), xb), yb) in self.weights.iter().zip(&self.densities).zip(x.blocks()).zip(y.blocks()) {
            let y_rho = yb * rho;
            let mut s = ZERO;
            for (a, b) in xb.iter().zip(y_rho.iter()) {
                s += a.conj() * b;
            }
            acc += s * *w;
        }
        acc
    }

    pub fn gns_norm(&self, x: &AlgElement) -> f64 {
        self.gns_unchecked(x, x).re.max(0.0).sqrt()
    }

    /// The density `D = ⊕_b w_b ρ_b` with `ψ(x) = Tr(D x)`.
    pub fn density(&self) -> AlgElement {
        let blocks = self
            .weights
            .iter()
            .zip(&self.densities)
            .map(|(w, rho)| rho * C64::new(*w, 0.0))
            .collect();
        AlgElement::from_blocks(&self.algebra, blocks).expect("density shape")
    }

    /// Strict positivity of the state: every weight and every eigenvalue of
    /// every density must exceed `tol`.
    pub fn check_faithful(&self, tol: f64) -> FaithfulnessReport {
        let min_weight = self.weights.iter().copied().fold(f64::INFINITY, f64::min);
        let min_eigenvalue = self
            .densities
            .iter()
            .map(min_hermitian_eigenvalue)
            .fold(f64::INFINITY, f64::min);
        FaithfulnessReport {
            faithful: min_weight > tol && min_eigenvalue > tol,
            min_eigenvalue,
            min_weight,
            tolerance: tol,
        }
    }

    /// Product state `ψ ⊗ φ` on the tensor product algebra.
    pub fn tensor(&self, other: &FaithfulState) -> FaithfulState {
        let mut weights = Vec::new();
        let mut densities = Vec::new();
        for (w, rho) in self.weights.iter().zip(&self.densities) {
            for (v, sigma) in other.weights.iter().zip(&other.densities) {
                weights.push(w * v);
                densities.push(rho.kronecker(sigma));
            }
        }
        FaithfulState {
            algebra: self.algebra.tensor(&other.algebra),
            weights,
            densities,
        }
    }

    /// Convex combination `⊕_k ν_k ψ_k` on the direct sum of the parts.
    pub fn direct_sum(parts: &[(f64, &FaithfulState)]) -> Result<FaithfulState> {
        let algebras: Vec<BlockAlgebra> = parts.iter().map(|(_, s)| s.algebra.clone()).collect();
        let algebra = BlockAlgebra::direct_sum(&algebras)?;
        let mut weights = Vec::new();
        let mut densities = Vec::new();
        for (nu, s) in parts {
            for (w, rho) in s.weights.iter().zip(&s.densities) {
                weights.push(nu * w);
                densities.push(rho.clone());
            }
        }
        FaithfulState::new(&algebra, weights, densities)
    }
}

fn trace_of_product(a: &Block, b: &Block) -> C64 {
    // tr(AB) = Σ_{jk} A_jk B_kj
    let n = a.nrows();
    let mut s = ZERO;
    for j in 0..n {
        for k in 0..n {
            s += a[(j, k)] * b[(k, j)];
        }
    }
    s
}

pub(crate) fn min_hermitian_eigenvalue(m: &Block) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
