//! Symbolic crochet decomposition of postcritically finite Thurston maps.
//!
//! A map is given as a wreath recursion over the fundamental group of a
//! marked sphere. The pipeline finds clusters of touching Fatou components
//! through periodic arcs, cuts the sphere along the resulting invariant
//! multicurve, classifies the small maps as crochet or Sierpiński and
//! builds the cactoid correspondence modelling the expanding quotient.

pub mod clusters;
pub mod decomposer;
pub mod error;
pub mod multicurve;
pub mod biset;
pub mod cactoid;
pub mod words;

mod par;
pub use par::{set_threads, with_threads};

pub use error::{Error, Result};
