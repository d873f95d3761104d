//! Numerical laboratory for condensate correlation structure and quadratic
//! fluctuation dynamics on periodic grids: the rescaled Neumann pair problem,
//! Hartree/NLS condensate flows, Hilbert-Schmidt correlation kernels with
//! their hyperbolic calculus, quadratic generators, and Bogoliubov frame
//! evolution.

pub mod error;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod fields;
pub mod scattering;

pub use error::{CoreError, Result};
