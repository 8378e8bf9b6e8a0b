//! Rearrangement-invariant norms and weighted Hardy-type operators on step functions.
//!
//! The building blocks are exact step-function algebra ([`functions`]),
//! analytic weights and bijections ([`weights`]), the operators
//! `R`, `H`, `T_phi` and dilation ([`operators`]), r.i. norms ([`spaces`]),
//! the optimal-norm functionals ([`optimal`]) and a verification harness
//! ([`verify`]) that checks identities and constant brackets numerically.

// `!(a > b)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functions;
pub mod operators;
pub mod optimal;
pub mod par;
pub mod spaces;
pub mod quad;
pub mod report;
pub mod sample;
pub mod tolerances;
pub mod verify;
pub mod weights;

pub mod serde_len;

pub use error::{Error, Result};
pub use functions::{Block, Cell, Layout, StepFunction};
pub use operators::{OperatorSpec, Profile};
pub use spaces::{NormValue, SpaceSpec};
pub use weights::{Bijection, Monotonicity, PowerLog, Weight};
