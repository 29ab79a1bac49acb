//! Pseudo-spectral mild-solution solver for the fractional kinetic
//! Fokker–Planck equation
//!
//! ```text
//! ∂_t f + v·∇_x f + Λ_v^α f = div_v(f ∇_v Λ_v^{-β} f)
//! ```
//!
//! on a periodic phase-space box, together with a laboratory that measures
//! the kernel estimates, norm inequalities, scaling laws and decay rates of
//! the equation numerically.
//!
//! Runnable walkthroughs live in `examples/`; `cargo run --example <name>`.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod fit;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod norms;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod symbols;
pub mod trajectory;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{PhaseField, Side, Spectrum, TorusGrid};
pub use params::Params;
