//! Resonance modes of two-dimensional dielectric microcavities and
//! entropy-based selection of the spatial mesh resolution of mode patterns.

pub mod special;
pub mod geometry;
pub mod solver;
pub mod entropy;
pub mod pipeline;
