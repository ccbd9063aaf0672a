pub mod config;
pub mod elasticity;
pub mod element;
pub mod error;
pub mod evolution;
pub mod mesh;
pub mod multiphase;
pub mod optimizer;
pub mod output;
pub mod representations;
pub mod sensitivity;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
