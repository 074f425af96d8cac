//! Exact and numerical tools for studying shears of coprime residues: continued
//! fractions and Gauss-map orbits, coprime counting, the modular surface,
//! rank-two lattices, p-adic numbers and lattice heights.

pub mod arith;
pub mod cfe;
pub mod heights;
pub mod hyperbolic;
pub mod lattice2;
pub mod measures;
pub mod padic;

pub use cfe::Rational;
