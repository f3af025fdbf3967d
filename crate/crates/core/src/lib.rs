//! Mild solutions of the Kuramoto-Sivashinsky equation
//! `phi_t + 1/2 |grad phi|^2 + Delta^2 phi + Delta phi = 0` on the 1D and 2D
//! torus, computed by Picard iteration in Wiener-algebra and pseudomeasure
//! spaces, with numerical checks of the linear and bilinear estimates that
//! drive the iteration and of the Gevrey-weighted variant.
//!
//! The mean-free part `psi = P phi` is the unknown throughout.

pub mod error;
pub mod fixtures;
pub mod gevrey;
pub mod lab;
pub mod mild;
pub mod norms;
pub mod oracle;
pub mod picard;
pub mod runner;
pub mod snapshot;
pub mod spectral;

pub use error::{KsError, Result};
pub use spectral::{
    build_symbol_table, project_zero_mean, symbol, DampingCase, Mode, SpectrumField, SymbolTable,
    TorusGrid, Trajectory,
};
