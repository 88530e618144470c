pub mod config;
pub mod error;
pub mod gain;
pub mod io;
pub mod game;
pub mod linalg;
pub mod reduction;
pub mod sampling;
pub mod simplex;
pub mod strategies;
pub mod wigner;

pub use error::{Error, Result};
