//! Continuation of BEM resonances along the deformation parameter.

use super::bem::{nodes_for, BemMode, BemOptions, BemProblem, Symmetry};
use super::SolverError;
use crate::geometry::{ellipse_from_alpha, Polarization};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Largest allowed |ΔkR| between neighbouring sweep points.
pub const TRACKING_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepFamily {
    pub refractive_index: f64,
    pub polarization: Polarization,
    pub symmetry: Symmetry,
    pub points_per_wavelength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub alpha: f64,
    pub eccentricity: f64,
    pub kr: C64,
    pub nodes: usize,
    pub sigma_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn alphas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.alpha).collect()
    }

    pub fn max_step(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].kr - w[0].kr).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub trajectory: Trajectory,
    pub modes: Vec<BemMode>,
}

/// A failed sweep keeps everything solved before the failing alpha.
#[derive(Debug, Clone)]
pub struct SweepFailure {
    pub error: SolverError,
    pub partial: SweepOutput,
}

pub fn validate_grid(alphas: &[f64], max_step: f64) -> Result<(), SolverError> {
    if alphas.is_empty() {
        return Err(SolverError::Invalid("empty alpha grid".into()));
    }
    for w in alphas.windows(2) {
        let d = w[1] - w[0];
        if !(d > 0.0) {
            return Err(SolverError::Invalid("alpha grid must be strictly increasing".into()));
        }
        if d > max_step + 1e-12 {
            return Err(SolverError::Invalid(format!("alpha step {d} exceeds {max_step}")));
        }
    }
    Ok(())
}

/// Each point is seeded from the previous converged kR (linearly extrapolated).
pub fn sweep_trajectory(
    family: &SweepFamily,
    alphas: &[f64],
    seed: C64,
    opts: &BemOptions,
) -> Result<SweepOutput, SweepFailure> {
    let mut out = SweepOutput {
        trajectory: Trajectory::default(),
        modes: Vec::new(),
    };
    if let Err(error) = validate_grid(alphas, 0.01) {
        return Err(SweepFailure { error, partial: out });
    }
    let opts = BemOptions {
        symmetry: family.symmetry,
        ..*opts
    };
    for (idx, &alpha) in alphas.iter().enumerate() {
        let pts = &out.trajectory.points;
        let guess = match pts.len() {
            0 => seed,
            1 => pts[0].kr,
            n => {
                let (p, q) = (&pts[n - 2], &pts[n - 1]);
                q.kr + (q.kr - p.kr) * ((alpha - q.alpha) / (q.alpha - p.alpha))
            }
        };
        let solved = ellipse_from_alpha(alpha, family.refractive_index, family.polarization)
            .map_err(SolverError::from)
            .and_then(|shape| {
                let nodes = nodes_for(&shape, guess, family.points_per_wavelength);
                BemProblem::new(&shape, nodes, family.symmetry)?.find(guess, &opts)
            });
        let mode = match solved {
            Ok(m) => m,
            Err(e) => {
                return Err(SweepFailure {
                    error: SolverError::Continuation {
                        alpha,
                        source: Box::new(e),
                    },
                    partial: out,
                })
            }
        };
        if idx > 0 {
            let prev = out.trajectory.points[idx - 1].kr;
            if (mode.kr - prev).norm() >= TRACKING_BOUND {
                return Err(SweepFailure {
                    error: SolverError::Continuation {
                        alpha,
                        source: Box::new(SolverError::Invalid(format!(
                            "eigenvalue jumped from {prev} to {}",
                            mode.kr
                        ))),
                    },
                    partial: out,
                });
            }
        }
        out.trajectory.points.push(TrajectoryPoint {
            alpha,
            eccentricity: mode.shape.eccentricity,
            kr: mode.kr,
            nodes: mode.boundary.m(),
            sigma_ratio: mode.sigma_min / mode.sigma_median,
        });
        out.modes.push(mode);
    }
    Ok(out)
}

/// Distinct tracked modes (same symmetry class) must not share a root.
pub fn check_collisions(trajectories: &[(Symmetry, &Trajectory)], tol: f64) -> Result<(), SolverError> {
    for a in 0..trajectories.len() {
        for b in a + 1..trajectories.len() {
            if trajectories[a].0 != trajectories[b].0 {
                continue;
            }
            for (p, q) in trajectories[a].1.points.iter().zip(&trajectories[b].1.points) {
                if p.alpha == q.alpha && (p.kr - q.kr).norm() < tol * p.kr.norm() {
                    return Err(SolverError::Collision {
                        first: a,
                        second: b,
                        kr: p.kr,
                        alpha: p.alpha,
                    });
                }
            }
        }
    }
    Ok(())
}
