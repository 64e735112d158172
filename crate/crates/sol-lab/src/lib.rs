//! Sol geometry toolkit: exact quadratic-field arithmetic, the Sol group
//! and its one-parameter subgroups, semidirect-product lattices from
//! hyperbolic SL(2,Z) matrices, connection-curve enumeration in the
//! quotient, and constructive non-blockability certificates.

pub mod bigreal;
pub mod connections;
pub mod error;
pub mod lattice;
pub mod quadratic;
pub mod sol;
pub mod util;
pub mod witness;

pub use connections::{CosetPoint, SearchWindow};
pub use error::{Result, SolError};
pub use lattice::{ExactSolPoint, SemidirectLattice, Sl2z};
pub use quadratic::QuadRat;
pub use sol::{MetricTensor, SolPoint, TangentVector};
pub use witness::{Precision, Verdict, WitnessConfig, WitnessReport};
