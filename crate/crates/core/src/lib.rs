//! Numerical laboratory for the Sard property of polynomial maps on Hilbert
//! spaces and of Endpoint maps on Carnot groups.

pub mod carnot;
pub mod cluster;
pub mod critical;
pub mod endpoint;
pub mod entropy;
pub mod error;
pub mod experiment;
pub mod kupka;
pub mod linalg;
pub mod poly;
pub mod rational;
pub mod sampling;
pub mod series;
pub mod surjectivity;
pub mod width;

pub use error::{Error, Result};
