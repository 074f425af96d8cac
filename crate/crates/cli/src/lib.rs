//! Experiment drivers behind the `shear` binary.

pub mod checkpoint;
pub mod experiments;
pub mod table;
