//! Critical branching random walks and lattice SIR epidemics on Z^d, d = 2, 3,
//! together with the exact kernels, moments and cumulants that describe them.

pub mod brw;
pub mod error;
pub mod family;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod lattice;
pub mod likelihood;
pub mod moments;
pub mod rng;
pub mod sir;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result};
pub use field::LatticeField;
pub use grid::BoxGrid;
pub use kernel::{KernelTable, GreenTable};
pub use lattice::{Site, WalkSpec};

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/moments.md")]
    mod moments {}
    #[doc = include_str!("../../../book/src/likelihood.md")]
    mod likelihood {}
}
