//! Numerical machinery for complex geometric optics (CGO) solutions of the
//! steady convection-diffusion equation and its magnetic Schrödinger form:
//! Hölder coefficient synthesis, the Cauchy transform and transport phases,
//! Dirichlet-to-Neumann maps, remainder solves, Fourier recovery of `dA` and
//! of the electric part, and a Carleman-estimate probe.

pub mod carleman;
pub mod cgo;
pub mod dbar;
pub mod error;
pub mod forward;
pub mod grid;
pub mod potentials;
pub mod quad;
pub mod recon;

pub use error::{Error, Result};
pub use grid::C64;
