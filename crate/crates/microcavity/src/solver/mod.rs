//! Resonance solvers: analytic dielectric disk and boundary-element ellipse.

pub mod bem;
pub mod cache;
pub mod disk;
pub mod sweep;

use crate::geometry::{GeometryError, InteriorMesh};
use crate::special::SpecialError;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use bem::{bem_find_mode, bem_min_singular, BemMode, BemOptions, Symmetry};
pub use disk::{disk_characteristic, disk_field, disk_find_mode, DiskMode, StandingPhase};
pub use sweep::{sweep_trajectory, SweepFamily, Trajectory, TrajectoryPoint};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("Newton iteration for (m={m}, ell={ell}) did not converge within {iterations} iterations")]
    NonConvergence { m: u32, ell: u32, iterations: usize },
    #[error("root for (m={m}, ell={ell}) at kR = {kr} shows {found} radial maxima")]
    ModeIdentification { m: u32, ell: u32, kr: C64, found: usize },
    #[error("boundary under-resolved: M = {nodes} but at least {required} nodes are needed")]
    Discretization { nodes: usize, required: usize },
    #[error("no resonance near seed {seed}: dip ratio {ratio:.3e}")]
    NoResonance { seed: C64, ratio: f64 },
    #[error("tracked modes {first} and {second} collapsed onto kR = {kr} at alpha = {alpha}")]
    Collision { first: usize, second: usize, kr: C64, alpha: f64 },
    #[error("continuation failed at alpha = {alpha}: {source}")]
    Continuation { alpha: f64, source: Box<SolverError> },
    #[error("cache: {0}")]
    Cache(String),
}

/// Eigenvalue plus eigenfunction sampled on an interior mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub kr: C64,
    pub field: Vec<C64>,
    /// (ell, m) when known.
    pub quantum_numbers: Option<(u32, u32)>,
    pub alpha: f64,
    pub open: bool,
}

impl ModeRecord {
    pub fn new(
        kr: C64,
        field: Vec<C64>,
        mesh: &InteriorMesh,
        quantum_numbers: Option<(u32, u32)>,
        alpha: f64,
        open: bool,
    ) -> Result<Self, SolverError> {
        if !(kr.re > 0.0) {
            return Err(SolverError::Invalid(format!("Re kR must be positive, got {kr}")));
        }
        if open && !(kr.im < 0.0) {
            return Err(SolverError::Invalid(format!("open cavity requires Im kR < 0, got {kr}")));
        }
        if !open && kr.im != 0.0 {
            return Err(SolverError::Invalid(format!("closed cavity requires real kR, got {kr}")));
        }
        if field.len() != mesh.n() {
            return Err(SolverError::Invalid(format!(
                "field has {} entries for a mesh of {}",
                field.len(),
                mesh.n()
            )));
        }
        Ok(Self {
            kr,
            field,
            quantum_numbers,
            alpha,
            open,
        })
    }
}
