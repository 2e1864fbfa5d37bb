//! Spectral-Galerkin laboratory for the bilinear Schrödinger equation
//! `i∂_tψ = -∂²_xψ - u(t)μ(x)ψ` on (0,1) with Dirichlet boundary conditions.

pub mod bump;
pub mod cli;
pub mod correction;
pub mod dipole;
pub mod driver;
pub mod error;
pub mod kernels;
pub mod ode;
pub mod quadrature;
pub mod sampled;
pub mod signals;
pub mod synthesis;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
