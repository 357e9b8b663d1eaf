//! Truncated model of the infinite dimensional symplectic group, the
//! embedding of circle diffeomorphisms into it, and Brownian motion on it.

pub mod algebra;
pub mod diffeo;
pub mod error;
pub mod fourier;
pub mod io;
pub mod operator;
pub mod sde;

pub use error::{Error, Result};
