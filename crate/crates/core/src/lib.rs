pub mod cascade;
pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod euler;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod kinetic;
mod hyperdual;
pub mod linalg;
pub mod maxwellian;
pub mod poisson;
pub mod spectral;
pub mod verify;
mod parallel;

pub use error::{Error, Result};
