//! Finite-dimensional *-algebra arithmetic.
//!
//! Every algebra is a finite direct sum of full matrix blocks. Elements are
//! dense per block, states are block weights together with density matrices,
//! and tensor chains are materialised as dense blocks under a dimension cap.

mod element;
mod state;
mod tensor;

pub use element::{pauli_matrices, AlgElement, Block, BlockAlgebra, C64};
pub use state::{FaithfulState, FaithfulnessReport};
pub use tensor::{elementary_tensor, leg_embedding, tensor_chain, DimensionCap, DEFAULT_BLOCK_ENTRY_CAP};

pub(crate) use element::{ONE, ZERO};
pub(crate) use state::min_hermitian_eigenvalue;

/// Real diagonal matrix.
pub fn diag_block(values: &[f64]) -> Block {
    let n = values.len();
    let mut m = Block::zeros(n, n);
    for (k, v) in values.iter().enumerate() {
        m[(k, k)] = C64::new(*v, 0.0);
    }
    m
}

/// Pairwise (cascade) summation, independent of how the input was produced.
pub fn pairwise_sum(values: &[C64]) -> C64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().fold(ZERO, |acc, v| acc + v)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

pub fn pairwise_sum_real(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum_real(&values[..mid]) + pairwise_sum_real(&values[mid..])
    }
}
