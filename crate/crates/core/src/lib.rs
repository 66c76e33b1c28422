//! Finite-dimensional models of noncommutative random sequences.
//!
//! The crate builds concrete matrix-algebra models of random sequences
//! `ι_n : (A_0, φ_0) → (M, ψ)` on a finite window of indices and checks, moment
//! by moment, their distributional symmetries (exchangeability,
//! spreadability, stationarity), conditional independence and
//! factorisability over candidate subalgebras, ergodic averages under index
//! shifts, and central-limit moment formulas over pair partitions.
//!
//! Every verdict is a statement about a finite window and a finite degree;
//! nothing here claims a property of an infinite sequence.

pub mod cli;
pub mod clt;
pub mod ergodic;
pub mod error;
pub mod indcheck;
pub mod matalg;
pub mod report;
pub mod scenario;
pub mod seqmodel;
pub mod subalg;
pub mod symcheck;
pub mod table;
pub mod tuplecomb;

pub use error::{Error, Result};
