//! Green's functions of one-dimensional Schrödinger operators with
//! matrix-valued potentials, computed by Möbius recursion on the Siegel half
//! space, together with the brute-force oracles, disorder Monte Carlo and
//! block-decomposition machinery used to check them.

pub mod blockdecomp;
pub mod error;
pub mod green;
pub mod matcore;
pub mod mc;
pub mod model;
pub mod oracle;
pub mod par;
pub mod sampling;
pub mod siegel;
pub mod verify;

pub use error::{Error, Result};
