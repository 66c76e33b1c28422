use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Block = DMatrix<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// A finite direct sum `M_{d_1} ⊕ … ⊕ M_{d_k}` of full complex matrix
/// algebras. Equality is structural on the list of block sizes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockAlgebra {
    blocks: Vec<usize>,
}

impl BlockAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("at least one block is required".into()));
        }
        if let Some(pos) = blocks.iter().position(|&d| d == 0) {
            return Err(Error::InvalidAlgebra(format!("block {pos} has dimension 0")));
        }
        Ok(Self { blocks })
    }

    /// The full matrix algebra `M_d`.
    pub fn full(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    /// The commutative algebra `ℂ^n`.
    pub fn commutative(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidAlgebra("ℂ^0 is not unital".into()));
        }
        Self::new(vec![1; n])
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Vector-space dimension `Σ d_b²`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|d| d * d).sum()
    }

    pub fn is_commutative(&self) -> bool {
        self.blocks.iter().all(|&d| d == 1)
    }

    pub fn zero(&self) -> AlgElement {
        AlgElement {
            algebra: self.clone(),
            blocks: self.blocks.iter().map(|&d| Block::zeros(d, d)).collect(),
        }
    }

    pub fn identity(&self) -> AlgElement {
        AlgElement {
            algebra: self.clone(),
            blocks: self.blocks.iter().map(|&d| Block::identity(d, d)).collect(),
        }
    }

    /// The matrix unit `e_{jk}` of block `b`.
    pub fn matrix_unit(&self, b: usize, j: usize, k: usize) -> AlgElement {
        let mut x = self.zero();
        x.blocks[b][(j, k)] = ONE;
        x
    }

    /// Matrix units in block order, each block row-major. This is the
    /// coordinate frame used by [`AlgElement::to_coords`].
    pub fn matrix_unit_basis(&self) -> Vec<AlgElement> {
        let mut out = Vec::with_capacity(self.dim());
        for (b, &d) in self.blocks.iter().enumerate() {
            for j in 0..d {
                for k in 0..d {
                    out.push(self.matrix_unit(b, j, k));
                }
            }
        }
        out
    }

    /// A hermitian linear basis.
    ///
    /// Blocks of size 1 contribute their minimal projection, blocks of size 2
    /// the Pauli basis `{1, σ_x, σ_y, σ_z}`, larger blocks the diagonal units
    /// together with `e_jk + e_kj` and `i(e_jk − e_kj)` for `j < k`.
    pub fn hermitian_basis(&self) -> Vec<AlgElement> {
        let mut out = Vec::with_capacity(self.dim());
        for (b, &d) in self.blocks.iter().enumerate() {
            match d {
                1 => out.push(self.matrix_unit(b, 0, 0)),
                2 => {
                    for pauli in pauli_matrices() {
                        let mut x = self.zero();
                        x.blocks[b] = pauli;
                        out.push(x);
                    }
                }
                _ => {
                    for j in 0..d {
                        out.push(self.matrix_unit(b, j, j));
                    }
                    for j in 0..d {
                        for k in (j + 1)..d {
                            let mut s = self.zero();
                            s.blocks[b][(j, k)] = ONE;
                            s.blocks[b][(k, j)] = ONE;
                            out.push(s);
                            let mut a = self.zero();
                            a.blocks[b][(j, k)] = C64::new(0.0, 1.0);
                            a.blocks[b][(k, j)] = C64::new(0.0, -1.0);
                            out.push(a);
                        }
                    }
                }
            }
        }
        out
    }

    /// Tensor product; blocks are ordered lexicographically by `(b_self, b_other)`.
    pub fn tensor(&self, other: &BlockAlgebra) -> BlockAlgebra {
        let mut blocks = Vec::with_capacity(self.blocks.len() * other.blocks.len());
        for &d in &self.blocks {
            for &e in &other.blocks {
                blocks.push(d * e);
            }
        }
        BlockAlgebra { blocks }
    }

    pub fn direct_sum(parts: &[BlockAlgebra]) -> Result<BlockAlgebra> {
        BlockAlgebra::new(parts.iter().flat_map(|a| a.blocks.iter().copied()).collect())
    }

    pub(crate) fn ensure_same(&self, other: &BlockAlgebra) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch {
                expected: self.blocks.clone(),
                found: other.blocks.clone(),
            })
        }
    }
}

impl fmt::Display for BlockAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|d| if *d == 1 { "ℂ".to_string() } else { format!("M_{d}") })
            .collect();
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

/// `[1, σ_x, σ_y, σ_z]`.
pub fn pauli_matrices() -> [Block; 4] {
    let i = C64::new(0.0, 1.0);
    [
        Block::identity(2, 2),
        Block::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Block::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        Block::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// An element of a [`BlockAlgebra`]: one square complex matrix per block.
///
/// The arithmetic operators panic on algebra mismatch; use the `checked_*`
/// methods where the operands come from untrusted input.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgElement {
    algebra: BlockAlgebra,
    blocks: Vec<Block>,
}

impl AlgElement {
    pub fn from_blocks(algebra: &BlockAlgebra, blocks: Vec<Block>) -> Result<Self> {
        if blocks.len() != algebra.blocks.len() {
            return Err(Error::LengthMismatch {
                left: algebra.blocks.len(),
                right: blocks.len(),
            });
        }
        for (b, (m, &d)) in blocks.iter().zip(&algebra.blocks).enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::InvalidAlgebra(format!(
                    "block {b} is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    /// Element of a single-block algebra `M_d` from a square matrix.
    pub fn from_matrix(m: Block) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidAlgebra(format!(
                "matrix is not square: {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let algebra = BlockAlgebra::full(m.nrows())?;
        Ok(Self {
            algebra,
            blocks: vec![m],
        })
    }

    /// Element of `ℂ^n` with the given coordinates.
    pub fn diagonal(values: &[C64]) -> Result<Self> {
        let algebra = BlockAlgebra::commutative(values.len())?;
        Ok(Self {
            blocks: values.iter().map(|&v| Block::from_element(1, 1, v)).collect(),
            algebra,
        })
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &Block {
        &self.blocks[b]
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn scale(&self, c: C64) -> AlgElement {
        AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m * c).collect(),
        }
    }

    pub fn adjoint(&self) -> AlgElement {
        AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.adjoint()).collect(),
        }
    }

    pub fn checked_mul(&self, rhs: &AlgElement) -> Result<AlgElement> {
        self.algebra.ensure_same(&rhs.algebra)?;
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn checked_add(&self, rhs: &AlgElement) -> Result<AlgElement> {
        self.algebra.ensure_same(&rhs.algebra)?;
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn checked_sub(&self, rhs: &AlgElement) -> Result<AlgElement> {
        self.algebra.ensure_same(&rhs.algebra)?;
        Ok(AlgElement {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect(),
        })
    }

    /// `self += c · rhs`, in place.
    pub fn axpy(&mut self, c: C64, rhs: &AlgElement) {
        assert_eq!(self.algebra, rhs.algebra, "algebra mismatch in axpy");
        for (a, b) in self.blocks.iter_mut().zip(&rhs.blocks) {
            *a += b * c;
        }
    }

    pub fn commutator(&self, rhs: &AlgElement) -> AlgElement {
        &(self * rhs) - &(rhs * self)
    }

    /// Largest entry modulus over all blocks.
    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Operator norm (largest singular value over blocks).
    pub fn operator_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| m.clone().singular_values().iter().copied().fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &AlgElement, tol: f64) -> bool {
        self.algebra == other.algebra && (self - other).max_abs() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (self - &self.adjoint()).max_abs() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let id = self.algebra.identity();
        (&(self * &self.adjoint()) - &id).max_abs() <= tol && (&(&self.adjoint() * self) - &id).max_abs() <= tol
    }

    /// Scalar multiple of the identity, if this element is one within `tol`.
    pub fn as_scalar(&self, tol: f64) -> Option<C64> {
        let c = self.blocks[0][(0, 0)];
        if (self - &self.algebra.identity().scale(c)).max_abs() <= tol {
            Some(c)
        } else {
            None
        }
    }

    /// Coordinates in the matrix-unit frame (block order, row-major).
    pub fn to_coords(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.algebra.dim());
        for m in &self.blocks {
            for j in 0..m.nrows() {
                for k in 0..m.ncols() {
                    out.push(m[(j, k)]);
                }
            }
        }
        out
    }

    pub fn from_coords(algebra: &BlockAlgebra, coords: &[C64]) -> Result<Self> {
        if coords.len() != algebra.dim() {
            return Err(Error::LengthMismatch {
                left: algebra.dim(),
                right: coords.len(),
            });
        }
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(algebra.blocks.len());
        for &d in &algebra.blocks {
            blocks.push(Block::from_row_slice(d, d, &coords[offset..offset + d * d]));
            offset += d * d;
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    /// Interleaved `[re, im, re, im, …]` per block, row-major.
    pub fn to_interleaved(&self) -> Vec<Vec<f64>> {
        self.blocks
            .iter()
            .map(|m| {
                let mut v = Vec::with_capacity(2 * m.len());
                for j in 0..m.nrows() {
                    for k in 0..m.ncols() {
                        v.push(m[(j, k)].re);
                        v.push(m[(j, k)].im);
                    }
                }
                v
            })
            .collect()
    }

    pub fn from_interleaved(algebra: &BlockAlgebra, data: &[Vec<f64>]) -> Result<Self> {
        if data.len() != algebra.blocks.len() {
            return Err(Error::LengthMismatch {
                left: algebra.blocks.len(),
                right: data.len(),
            });
        }
        let mut blocks = Vec::with_capacity(data.len());
        for (v, &d) in data.iter().zip(&algebra.blocks) {
            if v.len() != 2 * d * d {
                return Err(Error::LengthMismatch {
                    left: 2 * d * d,
                    right: v.len(),
                });
            }
            let entries: Vec<C64> = v.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
            blocks.push(Block::from_row_slice(d, d, &entries));
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    /// Tensor product `self ⊗ other` in `A ⊗ B` (block order as in
    /// [`BlockAlgebra::tensor`]).
    pub fn kron(&self, other: &AlgElement) -> AlgElement {
        let mut blocks = Vec::with_capacity(self.blocks.len() * other.blocks.len());
        for a in &self.blocks {
            for b in &other.blocks {
                blocks.push(a.kronecker(b));
            }
        }
        AlgElement {
            algebra: self.algebra.tensor(&other.algebra),
            blocks,
        }
    }

    /// Direct sum `x_1 ⊕ … ⊕ x_k`.
    pub fn direct_sum(parts: &[AlgElement]) -> Result<AlgElement> {
        let algebras: Vec<BlockAlgebra> = parts.iter().map(|p| p.algebra.clone()).collect();
        let algebra = BlockAlgebra::direct_sum(&algebras)?;
        Ok(AlgElement {
            algebra,
            blocks: parts.iter().flat_map(|p| p.blocks.iter().cloned()).collect(),
        })
    }
}

impl<'a> Mul<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn mul(self, rhs: &'a AlgElement) -> AlgElement {
        self.checked_mul(rhs).expect("algebra mismatch in product")
    }
}

impl<'a> Add<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn add(self, rhs: &'a AlgElement) -> AlgElement {
        self.checked_add(rhs).expect("algebra mismatch in sum")
    }
}

impl<'a> Sub<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &'a AlgElement) -> AlgElement {
        self.checked_sub(rhs).expect("algebra mismatch in difference")
    }
}

impl Neg for &AlgElement {
    type Output = AlgElement;
    fn neg(self) -> AlgElement {
        self.scale(-ONE)
    }
}

/// Serialized as `{"blocks": [d, …], "entries": [[re, im, …], …]}`.
impl Serialize for AlgElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("AlgElement", 2)?;
        st.serialize_field("blocks", self.algebra.blocks())?;
        st.serialize_field("entries", &self.to_interleaved())?;
        st.end()
    }
}
