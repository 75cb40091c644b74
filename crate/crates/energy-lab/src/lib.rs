//! Exact additive energies, Gowers norms, convolutions and structure
//! extraction over finite abelian groups, with a verification harness for
//! the identities and inequalities relating them.

pub mod constructors;
pub mod energy;
pub mod error;
pub mod exact;
pub mod gowers;
pub mod group;
pub mod io;
pub mod setfun;
pub mod structure;
pub mod verify;

pub use error::{Error, Result};
pub use group::{make_group, Element, Group, GroupSpec, Spectrum};
pub use setfun::{DenseFunc, GSet, ShiftTuple, Sign};
