//! Müntz-Legendre polynomials, Goursat-Volterra kernels, Gram matrices of
//! power functions, the spectral picture of the kernel and Monte Carlo
//! simulation of Müntz transforms of Brownian motion.

pub mod cli;
pub mod error;
pub use error::{MuntzError, Result};
pub mod exponents;
pub mod goursat_kernel;
pub mod gram_matrix;
pub mod muntz_legendre;
pub mod numeric;
pub mod pathsim;
pub mod spectral;
