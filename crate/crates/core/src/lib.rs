//! Exact canonical-form and symmetry analysis for small tensor networks.
//!
//! This crate works with matrix product states on rings and open chains and
//! with projected entangled pair states on small tori, all at desk scale:
//! every verdict is backed by a dense computation that either certifies a
//! property with an explicit residual or fails with a typed error. Nothing
//! here is variational or approximate in the physics sense; truncations
//! happen only at explicit, audited rank cuts.
//!
//! The main entry points:
//!
//! * [`injectivity`]: is a patch of network big enough to pin the tensor?
//! * [`gauge`]: canonical forms for open chains, gauge extraction relating
//!   two presentations of the same state, and factorization helpers.
//! * [`symmetry`]: certificates for on-site, internal-group, and lattice
//!   symmetries of a PEPS tensor.
//! * [`apps`]: magnetization obstructions, loop-operator checks, parent
//!   Hamiltonians and ground-space dimensions, entanglement area laws.
//! * [`examples`]: bundled states (GHZ, AKLT, toric-code forms, planted
//!   charge-conserving and lattice-symmetric instances) used by the demos
//!   and the test suite.

pub mod apps;
pub mod error;
pub mod examples;
pub mod gauge;
pub mod injectivity;
pub mod lattice;
pub mod sample;
pub mod symmetry;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{ComplexMatrix, DenseTensor, Tolerance, C64};
