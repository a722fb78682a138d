//! Surface flux transport on a spherical grid.
//!
//! An ensemble of radial-field maps is advanced under analytic surface flows
//! and surface diffusion. All loop nests run through the `do concurrent`-style
//! executor in [`parloop`], which offers bitwise-reproducible reductions.

pub mod advection;
pub mod bench;
pub mod cli;
pub mod diffusion;
pub mod ensemble;
pub mod field;
pub mod grid;
pub mod io;
pub mod parloop;
pub mod units;

pub use field::MapField;
pub use grid::{build_uniform_grid, integrate_map, MapIntegral, SphericalGrid};
pub use parloop::{Executor, ExecutorConfig, IndexSpace};
