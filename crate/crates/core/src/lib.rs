//! Relative positioning of rovers from received signal strength.
//!
//! A bit-string genetic algorithm finds a coarse position for each rover from
//! its AA/BB signal pair with a reference rover at the origin; Newton's method
//! then refines that position against the path-loss and bearing equations.
//!
//! * [`model`]: forward RSSI model and planar geometry
//! * [`ga`]: genetic algorithm and multi-start wrapper
//! * [`newton`]: 2x2 Newton–Raphson solver
//! * [`pipeline`]: per-rover estimation and scoring
//! * [`harness`]: scenarios, measurement synthesis, experiments and reports

pub mod error;
pub mod ga;
pub mod harness;
pub mod model;
pub mod newton;
pub mod pipeline;

pub use error::{Error, Result};
