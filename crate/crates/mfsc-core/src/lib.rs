//! Exact laboratory for multihead finite-state compressors and gamblers.
//!
//! A machine in this crate has one leading head that scans the input left to
//! right and `h-1` trailing heads whose movement is oblivious: it depends only
//! on a finite control component `T` that never sees the input. The control
//! component `Q` consumes the vector of symbols under all heads and either
//! emits bits (compressor) or bets a probability distribution over the next
//! symbol (gambler).
//!
//! All quantities are exact: capitals, bets, block measures and code lengths
//! are `BigRational`s end to end. Floating point appears only when rendering
//! logarithms for reports, backed by certified dyadic interval bounds.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the CLI live in
//! the companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bits;
pub mod construct;
pub mod gale;
pub mod machine;
pub mod numeric;
pub mod seq;
pub mod sfe;
pub mod sim;
pub mod verify;

pub use bits::Bits;
pub use machine::{Alphabet, Fsm, MachineKind, MachineSpec, RationalDist, Sym, TableMachine};
