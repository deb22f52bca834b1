//! Noncommutative Nevanlinna–Pick and Carathéodory interpolation on the
//! operator unit ball: kernels, truncated Schur-class elements, displacement
//! equations, feasibility tests and constructive interpolants.

pub mod derive;
pub mod displacement;
pub mod error;
pub mod generate;
pub mod interpolate;
pub mod io;
pub mod linalg;
pub mod points;
pub mod random;
pub mod schur;
pub mod selftest;
pub mod words;

pub use error::{Error, ErrorClass, Result};
