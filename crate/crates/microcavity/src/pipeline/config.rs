//! Run configuration (a single JSON document).

use crate::entropy::{Schedule, StudyConfig};
use crate::geometry::Polarization;
use crate::solver::Symmetry;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSeed {
    pub m: u32,
    pub ell: u32,
}

impl ModeSeed {
    pub fn id(&self, prefix: &str) -> String {
        format!("{prefix}-m{}-l{}", self.m, self.ell)
    }
}

/// Which interior field the disk study resolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiskField {
    /// J_m(j_{m,ℓ} r) cos(mθ): the closed-cavity counterpart of the mode.
    #[default]
    Closed,
    /// J_m(n kR r) cos(mθ) with the solved (complex) kR.
    Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskConfig {
    pub refractive_index: f64,
    pub polarization: Polarization,
    pub modes: Vec<ModeSeed>,
    pub field: DiskField,
    /// Lattice-translation / orientation ensemble size.
    pub ensemble: usize,
    /// Mesh on which solved fields are cached.
    pub cache_mesh: usize,
    pub schedule: Schedule,
}

impl Default for DiskConfig {
    fn default() -> Self {
        Self {
            refractive_index: 3.3,
            polarization: Polarization::Te,
            modes: [(3, 2), (3, 5), (4, 10), (8, 13)]
                .iter()
                .map(|&(m, ell)| ModeSeed { m, ell })
                .collect(),
            field: DiskField::Closed,
            ensemble: 32,
            cache_mesh: 3492,
            schedule: StudyConfig::default().schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaGrid {
    List { values: Vec<f64> },
    /// `count` equally spaced values from `start` to `stop` inclusive.
    Linear { start: f64, stop: f64, count: usize },
}

impl AlphaGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AlphaGrid::List { values } => values.clone(),
            AlphaGrid::Linear { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                _ => (0..*count)
                    .map(|i| start + (stop - start) * i as f64 / (*count - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipseConfig {
    pub refractive_index: f64,
    pub polarization: Polarization,
    /// Mode followed from the circle; seeds the sweep at its disk resonance.
    pub mode: ModeSeed,
    /// Explicit starting kR (overrides the disk seed).
    pub seed_kr: Option<[f64; 2]>,
    pub symmetry: Symmetry,
    pub alphas: AlphaGrid,
    pub points_per_wavelength: f64,
    pub schedule: Schedule,
    /// Members with α at most this take part in quantum-number identification.
    pub identify_max_alpha: f64,
}

impl Default for EllipseConfig {
    fn default() -> Self {
        Self {
            refractive_index: 3.3,
            polarization: Polarization::Dirichlet,
            mode: ModeSeed { m: 3, ell: 5 },
            seed_kr: None,
            symmetry: Symmetry::Parity { px: -1, py: 1 },
            alphas: AlphaGrid::Linear {
                start: 0.0,
                stop: 0.078,
                count: 14,
            },
            points_per_wavelength: 12.0,
            schedule: Schedule::Explicit {
                points: vec![98, 212, 398, 596, 810, 1040, 1480, 2020, 2480, 3008, 3492],
            },
            identify_max_alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub disk: DiskConfig,
    /// `null` skips the ellipse study.
    pub ellipse: Option<EllipseConfig>,
    pub tau_sat: f64,
    pub tau_knee: f64,
    pub knee_per_wavenumber: bool,
    pub knee_half_window: usize,
    pub confirm_steps: usize,
    /// (nkR, N_O) pairs for `fit-scaling`; when absent the resolved disk modes are used.
    pub scaling_points: Option<Vec<(f64, f64)>>,
    pub out: PathBuf,
    pub cache: PathBuf,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let study = StudyConfig::default();
        Self {
            disk: DiskConfig::default(),
            ellipse: Some(EllipseConfig::default()),
            tau_sat: study.tau_sat,
            tau_knee: study.tau_knee,
            knee_per_wavenumber: study.knee_per_wavenumber,
            knee_half_window: study.knee_half_window,
            confirm_steps: study.confirm_steps,
            scaling_points: None,
            out: PathBuf::from("out"),
            cache: PathBuf::from("cache"),
            workers: None,
        }
    }
}

fn config_error(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| config_error(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn study(&self, schedule: &Schedule) -> StudyConfig {
        StudyConfig {
            schedule: schedule.clone(),
            tau_sat: self.tau_sat,
            tau_knee: self.tau_knee,
            knee_per_wavenumber: self.knee_per_wavenumber,
            knee_half_window: self.knee_half_window,
            confirm_steps: self.confirm_steps,
        }
    }

    /// Content hash of the fields that determine outputs (paths and worker count excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.cache = PathBuf::new();
        c.workers = None;
        crate::solver::cache::cache_key(&c)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.tau_sat > 0.0 && self.tau_knee > 0.0) {
            return Err(config_error("tau_sat and tau_knee must be positive"));
        }
        if self.workers == Some(0) {
            return Err(config_error("worker count must be at least 1"));
        }
        if !(self.disk.refractive_index > 1.0) {
            return Err(config_error("disk refractive index must exceed 1"));
        }
        if self.disk.ensemble == 0 {
            return Err(config_error("disk ensemble must be at least 1"));
        }
        if self.disk.modes.iter().any(|s| s.ell == 0) {
            return Err(config_error("radial number ell must be >= 1"));
        }
        self.disk.schedule.targets().map_err(|e| config_error(format!("disk schedule: {e}")))?;
        if let Some(e) = &self.ellipse {
            let a = e.alphas.values();
            if a.is_empty() {
                return Err(config_error("alpha grid is empty"));
            }
            if a.windows(2).any(|w| w[1] <= w[0]) {
                return Err(config_error("alpha grid must be strictly increasing"));
            }
            if a.iter().any(|v| !(0.0..=0.5).contains(v)) {
                return Err(config_error("alpha values must lie in [0, 0.5]"));
            }
            if !(e.refractive_index > 1.0) {
                return Err(config_error("ellipse refractive index must exceed 1"));
            }
            if !(e.points_per_wavelength >= 10.0) {
                return Err(config_error("points_per_wavelength must be at least 10"));
            }
            e.schedule.targets().map_err(|e| config_error(format!("ellipse schedule: {e}")))?;
        }
        Ok(())
    }
}

/// Reads `m,ell` rows (header required) into disk seeds.
pub fn read_seed_schedule(path: &Path) -> Result<Vec<ModeSeed>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().map(|h| h.split(',').map(str::trim).collect()).unwrap_or_default();
    if header != ["m", "ell"] {
        return Err(config_error(format!("{}: expected header `m,ell`", path.display())));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| s.parse::<u32>().map_err(|e| config_error(format!("{} line {}: {e}", path.display(), i + 2)));
            if f.len() != 2 {
                return Err(config_error(format!("{} line {}: expected 2 fields", path.display(), i + 2)));
            }
            let seed = ModeSeed {
                m: parse(f[0])?,
                ell: parse(f[1])?,
            };
            if seed.ell == 0 {
                return Err(config_error(format!("{} line {}: ell must be >= 1", path.display(), i + 2)));
            }
            Ok(seed)
        })
        .collect()
}
