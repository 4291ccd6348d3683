//! Very singular self-similar solutions of `u_t − Δ_p u + |∇u|^q = 0` in the
//! supercritical fast-diffusion range, with a radial solver and a
//! verification harness for their decay, tail and convergence properties.

pub mod barenblatt;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod grid;
pub mod io;
pub mod ode;
pub mod params;
pub mod profile;
pub mod solver;

pub use error::{Error, Result};
pub use params::{derive_exponents, ExponentSet};
