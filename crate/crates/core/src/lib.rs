//! Absolutely entangled sets of quantum states.
//!
//! The crate is split along the natural layers of the problem:
//!
//! * [`qstate`]: dense bipartite primitives (partial transpose, negativity, ...).
//! * [`sets`]: named state families and the constructive "make-product" unitaries.
//! * [`heuristic`]: multi-start minimization over the unitary group (upper bounds).
//! * [`polyopt`]: Lasserre moment relaxations with scalar and PSD localizing matrices.
//! * [`sdpcore`]: a dense primal-dual SDP solver, SDPA sparse I/O and certificate checks.
//! * [`aesbound`]: the moment relaxation of absolute set negativity (lower bounds).
//! * [`io`]: JSON and CSV encodings shared by the command line front end.

pub mod aesbound;
pub mod error;
pub mod heuristic;
pub mod io;
pub mod linalg;
pub mod polyopt;
pub mod qstate;
pub mod sdpcore;
pub mod sets;

pub use error::{Error, Result};
pub use linalg::CMatrix;
pub use qstate::{Bipartition, DensityMatrix, PureState};
