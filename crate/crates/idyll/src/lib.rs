//! A numerical laboratory for the instability of steady shear flows:
//! Rayleigh-equation shooting for unstable eigenmodes, exponential-dichotomy
//! splittings of the linearized operators, essential-growth exponents along
//! bicharacteristic rays, and Lyapunov-Perron construction of local unstable
//! manifolds for Galerkin-truncated systems.
//!
//! The crate is organized around the pipeline
//! profile -> ground state -> unstable modes -> dichotomy -> manifold:
//!
//! - [`fields`]: periodic grids, spectral derivatives, Hodge/Leray projection
//! - [`sturm`]: the Sturm-Liouville ground state and the instability band
//! - [`rayleigh`]: complex shooting for unstable Rayleigh eigenmodes
//! - [`spectra`]: modal operators, spectra, and dichotomy splits
//! - [`rays`]: bicharacteristic rays and Lyapunov-type exponents
//! - [`lp`]: the Lyapunov-Perron fixed-point machinery
//! - [`galerkin`]: the truncated 2D Euler system fed to [`lp`]
//! - [`runner`]: batch front door with JSON configs
//!
//! Runnable walkthroughs for each capability live under `examples/`.

pub mod error;
pub mod fft;
pub mod fields;
pub mod galerkin;
pub mod lp;
pub mod ode;
pub mod rayleigh;
pub mod rays;
pub mod runner;
pub mod spectra;
pub mod sturm;

pub use error::{Error, Result};
