//! Numerical laboratory for dispersive density-matrix hierarchies on
//! rectangular tori.
pub use num_complex::Complex64;

pub mod counterexample;
pub mod density;
pub mod error;
pub mod fit;
pub mod expsum;
pub mod multiplier;
pub mod nls;
pub mod torus;
