use super::element::{AlgElement, BlockAlgebra};
use super::state::FaithfulState;
use crate::error::{Error, Result};

/// Default cap on complex entries per materialised block (`4^8`).
pub const DEFAULT_BLOCK_ENTRY_CAP: u128 = 1 << 16;

/// Feasibility guard for dense tensor powers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DimensionCap {
    pub max_block_entries: u128,
}

impl Default for DimensionCap {
    fn default() -> Self {
        Self {
            max_block_entries: DEFAULT_BLOCK_ENTRY_CAP,
        }
    }
}

impl DimensionCap {
    /// Check that `length` tensor legs of `base` stay within the cap.
    pub fn check_tensor_power(&self, base: &BlockAlgebra, length: usize) -> Result<()> {
        let d = *base.blocks().iter().max().expect("nonempty") as u128;
        let mut side: u128 = 1;
        for _ in 0..length {
            side = side.saturating_mul(d);
        }
        let entries = side.saturating_mul(side);
        if entries > self.max_block_entries {
            return Err(Error::Resource {
                what: format!("{length}-fold tensor power of {base} (largest block {side}x{side})"),
                size: entries,
                cap: self.max_block_entries,
            });
        }
        let blocks = (base.num_blocks() as u128).saturating_pow(length as u32);
        if blocks > self.max_block_entries {
            return Err(Error::Resource {
                what: format!("{length}-fold tensor power of {base} (block count)"),
                size: blocks,
                cap: self.max_block_entries,
            });
        }
        Ok(())
    }
}

/// The `length`-fold tensor power of `(base, base_state)` with the product state.
pub fn tensor_chain(
    base: &BlockAlgebra,
    base_state: &FaithfulState,
    length: usize,
    cap: DimensionCap,
) -> Result<(BlockAlgebra, FaithfulState)> {
    if length == 0 {
        return Err(Error::Validation("tensor chain length must be at least 1".into()));
    }
    base.ensure_same(base_state.algebra())?;
    cap.check_tensor_power(base, length)?;
    let mut algebra = base.clone();
    let mut state = base_state.clone();
    for _ in 1..length {
        algebra = algebra.tensor(base);
        state = state.tensor(base_state);
    }
    Ok((algebra, state))
}

/// `x_1 ⊗ x_2 ⊗ … ⊗ x_n`.
pub fn elementary_tensor(factors: &[AlgElement]) -> Result<AlgElement> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::Validation("empty tensor product".into()))?;
    Ok(rest.iter().fold(first.clone(), |acc, x| acc.kron(x)))
}

/// Embed `x` at leg `leg` of a chain of `length` copies of its algebra.
pub fn leg_embedding(x: &AlgElement, leg: usize, length: usize) -> Result<AlgElement> {
    if leg >= length {
        return Err(Error::Validation(format!("leg {leg} outside chain of length {length}")));
    }
    let one = x.algebra().identity();
    let factors: Vec<AlgElement> = (0..length)
        .map(|k| if k == leg { x.clone() } else { one.clone() })
        .collect();
    elementary_tensor(&factors)
}
