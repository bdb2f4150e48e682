//! Ensemble entropy study over an N schedule: D_SE saturation, χ² against the
//! saturated curve, knee detection and identifiability scan.

use super::{
    chi_square, detect_n_o, detect_saturation, dse, saturated_run, expected_curve, extract_quantum_numbers, normalize_intensity,
    shannon_entropy, ChiSquareInput, EntropyError, KneeOptions, KneeScale, QuantumNumbers, Saturation,
};
use crate::geometry::{interior_mesh_with_offset, EllipseSpec, InteriorMesh, Polarization};
use crate::solver::disk::{disk_intensity, RadialTable};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    Explicit { points: Vec<usize> },
    /// round(start · ratio^k) up to `max`, stopping once saturated.
    Geometric { start: usize, ratio: f64, max: usize },
}

impl Schedule {
    pub fn targets(&self) -> Result<Vec<usize>, EntropyError> {
        let v = match self {
            Schedule::Explicit { points } => points.clone(),
            Schedule::Geometric { start, ratio, max } => {
                if !(*ratio > 1.0) || *start < 16 {
                    return Err(EntropyError::Invalid(format!("geometric schedule start {start} ratio {ratio}")));
                }
                let mut v: Vec<usize> = Vec::new();
                let mut x = *start as f64;
                while x.round() as usize <= *max {
                    let t = x.round() as usize;
                    if v.last() != Some(&t) {
                        v.push(t);
                    }
                    x *= ratio;
                }
                v
            }
        };
        if v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EntropyError::Invalid("N schedule must be strictly increasing".into()));
        }
        if v.first().is_some_and(|&t| t < 16) {
            return Err(EntropyError::Invalid("N schedule entries must be at least 16".into()));
        }
        Ok(v)
    }

    fn stops_when_saturated(&self) -> bool {
        matches!(self, Schedule::Geometric { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub schedule: Schedule,
    pub tau_sat: f64,
    /// Threshold on the per-member χ² slope.
    pub tau_knee: f64,
    /// Measure the knee on χ²·(nkR)² against N / (nkR)².
    pub knee_per_wavenumber: bool,
    pub knee_half_window: usize,
    /// Consecutive sub-threshold D_SE steps required before a geometric schedule stops.
    pub confirm_steps: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::Geometric {
                start: 64,
                ratio: 1.15,
                max: 400_000,
            },
            tau_sat: 1e-5,
            tau_knee: 3.5e-3,
            knee_per_wavenumber: true,
            knee_half_window: 3,
            confirm_steps: 4,
        }
    }
}

/// Source of mode intensities on meshes of a requested size.
pub trait FieldSource: Sync {
    /// Number of ensemble members (the χ² population).
    fn population(&self) -> usize;
    /// (alpha, eccentricity) of a member, for reporting.
    fn coordinates(&self, sample: usize) -> (f64, f64);
    fn intensity(&self, sample: usize, target: usize) -> Result<(InteriorMesh, Vec<f64>), EntropyError>;
    /// (nkR)² scale of the mode.
    fn wavenumber_sq(&self) -> f64;
    /// (ℓ, m) the extracted numbers must match to count as identified.
    fn expected_quantum_numbers(&self) -> Option<(u32, u32)> {
        None
    }
    /// Whether a member takes part in the identifiability vote.
    fn identifiable(&self, _sample: usize) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleEntropy {
    pub n: usize,
    pub s: f64,
    pub dse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub target: usize,
    pub samples: Vec<SampleEntropy>,
    pub mean_dse: f64,
    pub chi2: Option<f64>,
    /// Extraction on the first voting ensemble member.
    pub quantum: Option<Result<QuantumNumbers, String>>,
    pub identification: Option<Identification>,
}

/// Ensemble verdict: median lobe ratio over members (members extracting the wrong (ℓ, m)
/// count as contrast 1) and how many extract the expected (ℓ, m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub ratio: f64,
    pub matched: usize,
    pub population: usize,
    pub identified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub levels: Vec<Level>,
    pub saturation: Saturation,
    pub n_o: Result<usize, String>,
    /// Smallest N from which every schedule point up to N_ref is identified.
    pub n_identified: Option<usize>,
    pub knee: KneeOptions,
}

fn level(source: &dyn FieldSource, target: usize) -> Result<Level, EntropyError> {
    let expected = source.expected_quantum_numbers();
    let results: Vec<(SampleEntropy, Option<Result<QuantumNumbers, String>>)> = (0..source.population())
        .into_par_iter()
        .map(|k| {
            let (mesh, w) = source.intensity(k, target)?;
            let p = normalize_intensity(w)?;
            let s = shannon_entropy(&p);
            let q = expected
                .filter(|_| source.identifiable(k))
                .map(|_| extract_quantum_numbers(&p, &mesh).map_err(|e| e.to_string()));
            Ok((
                SampleEntropy {
                    n: mesh.n(),
                    s,
                    dse: dse(s, mesh.n())?,
                },
                q,
            ))
        })
        .collect::<Result<_, EntropyError>>()?;
    let samples: Vec<SampleEntropy> = results.iter().map(|r| r.0).collect();
    let mean_dse = super::compensated_sum(samples.iter().map(|s| s.dse)) / samples.len() as f64;
    let voters: Vec<_> = results.iter().filter(|r| r.1.is_some()).collect();
    let identification = expected.filter(|_| !voters.is_empty()).map(|e| {
        let ratios: Vec<f64> = voters
            .iter()
            .map(|r| match &r.1 {
                Some(Ok(q)) if (q.ell, q.m) == e => q.ratio,
                _ => 1.0,
            })
            .collect();
        let matched = voters
            .iter()
            .filter(|r| matches!(&r.1, Some(Ok(q)) if (q.ell, q.m) == e))
            .count();
        let ratio = median(ratios);
        Identification {
            ratio,
            matched,
            population: voters.len(),
            identified: ratio > std::f64::consts::E,
        }
    });
    let quantum = results.into_iter().find_map(|r| r.1);
    Ok(Level {
        target,
        samples,
        mean_dse,
        chi2: None,
        quantum,
        identification,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_ensemble_study(source: &dyn FieldSource, cfg: &StudyConfig) -> Result<StudyOutcome, EntropyError> {
    if source.population() == 0 {
        return Err(EntropyError::Invalid("empty ensemble".into()));
    }
    let targets = cfg.schedule.targets()?;
    if targets.len() < 4 {
        return Err(EntropyError::Invalid("N schedule needs at least 4 points".into()));
    }
    let mut levels: Vec<Level> = Vec::new();
    for &t in &targets {
        levels.push(level(source, t)?);
        if cfg.schedule.stops_when_saturated() {
            let curve: Vec<(usize, f64)> = levels.iter().map(|l| (l.target, l.mean_dse)).collect();
            if saturated_run(&curve, cfg.tau_sat) >= cfg.confirm_steps.max(1) {
                break;
            }
        }
    }
    let curve: Vec<(usize, f64)> = levels.iter().map(|l| (l.target, l.mean_dse)).collect();
    let saturation = detect_saturation(&curve, cfg.tau_sat)?;

    // χ² of each member against the saturated reference member
    let reference: Vec<SampleEntropy> = levels[saturation.index].samples.clone();
    for l in levels.iter_mut().take(saturation.index + 1) {
        let observed: Vec<f64> = l.samples.iter().map(|s| s.s).collect();
        let expected: Vec<f64> = l
            .samples
            .iter()
            .zip(&reference)
            .map(|(s, r)| expected_curve(s.n, r.dse))
            .collect::<Result<_, _>>()?;
        l.chi2 = Some(chi_square(&ChiSquareInput::new(observed, expected)?));
    }
    // per-member mean so the threshold does not depend on the ensemble size
    let k = source.population() as f64;
    let chi: Vec<(usize, f64)> = levels
        .iter()
        .filter_map(|l| l.chi2.map(|c| (l.target, c / k)))
        .collect();
    let scale = if cfg.knee_per_wavenumber {
        KneeScale::Wavenumber {
            nkr_sq: source.wavenumber_sq(),
        }
    } else {
        KneeScale::Absolute
    };
    let knee = KneeOptions {
        tau: cfg.tau_knee,
        scale,
        half_window: cfg.knee_half_window,
    };
    let n_o = detect_n_o(&chi, &knee).map_err(|e| e.to_string());

    let resolved = &levels[..=saturation.index];
    let ok = |l: &Level| l.identification.is_some_and(|i| i.identified);
    let n_identified = if resolved.iter().any(|l| l.identification.is_some()) {
        (0..resolved.len())
            .find(|&i| resolved[i..].iter().all(ok))
            .map(|i| resolved[i].target)
    } else {
        None
    };
    Ok(StudyOutcome {
        levels,
        saturation,
        n_o,
        n_identified,
        knee,
    })
}

/// Lattice-translation and orientation member of a disk ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub offset: [f64; 2],
    /// Standing-wave orientation as a fraction of the angular period π/m.
    pub phase: f64,
}

/// Low-discrepancy (u, v, t) triples from the additive R3 sequence.
pub fn r3_samples(count: usize) -> Vec<EnsembleSample> {
    // g solves g⁴ = g + 1
    let g = 1.220_744_084_605_759_6f64;
    let a = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
    (1..=count)
        .map(|k| {
            let f = |i: usize| (0.5 + a[i] * k as f64).fract();
            EnsembleSample {
                offset: [f(0), f(1)],
                phase: f(2),
            }
        })
        .collect()
}

/// Circular-cavity mode |J_m(x r)|² cos²(m(θ - θ0)) sampled over an ensemble of
/// lattice translations and pattern orientations.
#[derive(Debug, Clone)]
pub struct DiskStudy {
    pub m: u32,
    pub ell: u32,
    pub argument: C64,
    pub samples: Vec<EnsembleSample>,
    shape: EllipseSpec,
    table: RadialTable,
}

impl DiskStudy {
    pub fn new(m: u32, ell: u32, argument: C64, population: usize) -> Result<Self, EntropyError> {
        if population == 0 {
            return Err(EntropyError::Invalid("population must be positive".into()));
        }
        let shape = EllipseSpec::circle(2.0, Polarization::Dirichlet).map_err(|e| EntropyError::Invalid(e.to_string()))?;
        Ok(Self {
            m,
            ell,
            argument,
            samples: r3_samples(population),
            shape,
            table: RadialTable::new(m, argument),
        })
    }

    fn theta0(&self, phase: f64) -> f64 {
        if self.m == 0 {
            0.0
        } else {
            phase * PI / self.m as f64
        }
    }

    fn pattern(&self, target: usize, offset: [f64; 2], theta0: f64) -> Result<(InteriorMesh, Vec<f64>), EntropyError> {
        let mesh = interior_mesh_with_offset(&self.shape, target, offset).map_err(|e| EntropyError::Invalid(e.to_string()))?;
        let w = disk_intensity(&self.table, &mesh.points, theta0);
        Ok((mesh, w))
    }
}

impl FieldSource for DiskStudy {
    fn population(&self) -> usize {
        self.samples.len()
    }

    fn coordinates(&self, _sample: usize) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn intensity(&self, sample: usize, target: usize) -> Result<(InteriorMesh, Vec<f64>), EntropyError> {
        let s = self.samples[sample];
        self.pattern(target, s.offset, self.theta0(s.phase))
    }

    fn wavenumber_sq(&self) -> f64 {
        self.argument.re * self.argument.re
    }

    fn expected_quantum_numbers(&self) -> Option<(u32, u32)> {
        Some((self.ell, self.m))
    }
}
