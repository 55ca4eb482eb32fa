//! Sharp-interface simulation of cell polarization and motility.
//!
//! The cell boundary is the zero level set of a node-sampled function and
//! moves with normal velocity `V = u - u* - chi * kappa`. Inside the moving
//! region, an active (`u`) and an inactive (`v`) protein species react with
//! wave-pinning kinetics and diffuse; the diffusion is discretized with a
//! cut-cell finite-volume scheme that honours zero-flux conditions on the
//! boundary and conserves total protein exactly.

pub mod config;
pub mod convergence;
pub mod driver;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod kinetics;
pub mod levelset;
pub mod linalg;
mod lsfit;
pub mod reaction_diffusion;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::Grid;
pub use lsfit::FitKind;
