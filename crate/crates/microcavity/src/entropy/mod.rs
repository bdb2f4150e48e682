//! Shannon entropy of mode patterns and mesh-resolution criteria.

pub mod quantum;
pub mod report;
pub mod study;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use quantum::{extract_quantum_numbers, QuantumNumbers};
pub use report::{ResolutionReport, ResolutionRow};
pub use study::{run_ensemble_study, DiskStudy, EnsembleSample, FieldSource, Identification, Schedule, StudyConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EntropyError {
    #[error("field vanishes on every mesh point")]
    DegenerateField,
    #[error("entropy {s} exceeds log N = {log_n}")]
    InvariantViolation { s: f64, log_n: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("knee not resolved: no slope below {tau} (extend the schedule)")]
    NotResolved { tau: f64 },
    #[error("quantum-number extraction failed ({reason}); lobe ratio {ratio:.3}")]
    ExtractionFailed { reason: String, ratio: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Normalized intensity ρ_i = |ψ_i|² / Σ|ψ_j|².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityField {
    rho: Vec<f64>,
}

impl ProbabilityField {
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn normalize(field: &[C64]) -> Result<ProbabilityField, EntropyError> {
    normalize_intensity(field.iter().map(|v| v.norm_sqr()).collect())
}

/// Same as [`normalize`] for precomputed non-negative intensities.
pub fn normalize_intensity(mut w: Vec<f64>) -> Result<ProbabilityField, EntropyError> {
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(EntropyError::Domain("intensities must be finite and non-negative".into()));
    }
    let total = compensated_sum(w.iter().copied());
    if !(total > 0.0) {
        return Err(EntropyError::DegenerateField);
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(ProbabilityField { rho: w })
}

/// S = -Σ ρ log ρ with 0 log 0 = 0 (natural log).
pub fn shannon_entropy(p: &ProbabilityField) -> f64 {
    compensated_sum(p.rho.iter().filter(|&&r| r > 0.0).map(|&r| -r * r.ln()))
}

/// D_SE = log N - S.
pub fn dse(s: f64, n: usize) -> Result<f64, EntropyError> {
    let log_n = (n as f64).ln();
    if n == 0 || !s.is_finite() || s < 0.0 {
        return Err(EntropyError::Domain(format!("entropy {s} with N = {n}")));
    }
    // allow rounding at the uniform limit
    if s > log_n + 1e-12 * log_n.max(1.0) {
        return Err(EntropyError::InvariantViolation { s, log_n });
    }
    Ok((log_n - s).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub n_ref: usize,
    /// Index of `n_ref` in the schedule.
    pub index: usize,
    /// False when the threshold was never met and `n_ref` is the last entry.
    pub saturated: bool,
}

/// First N_(i+1) from which every remaining successive difference
/// |D_SE(N_(j+1)) - D_SE(N_(j))|, j >= i, stays below tau.
pub fn detect_saturation(schedule: &[(usize, f64)], tau: f64) -> Result<Saturation, EntropyError> {
    if schedule.len() < 3 {
        return Err(EntropyError::Invalid("saturation needs at least 3 schedule points".into()));
    }
    check_sorted(schedule)?;
    let below = |i: usize| (schedule[i + 1].1 - schedule[i].1).abs() < tau;
    let last = schedule.len() - 1;
    let mut start = last;
    while start > 0 && below(start - 1) {
        start -= 1;
    }
    if start == last {
        return Ok(Saturation {
            n_ref: schedule[last].0,
            index: last,
            saturated: false,
        });
    }
    Ok(Saturation {
        n_ref: schedule[start + 1].0,
        index: start + 1,
        saturated: true,
    })
}

/// Number of trailing successive differences below tau.
pub fn saturated_run(schedule: &[(usize, f64)], tau: f64) -> usize {
    schedule
        .windows(2)
        .rev()
        .take_while(|w| (w[1].1 - w[0].1).abs() < tau)
        .count()
}

fn check_sorted<T>(schedule: &[(usize, T)]) -> Result<(), EntropyError> {
    if schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(EntropyError::Invalid("schedule must be strictly increasing in N".into()));
    }
    Ok(())
}

/// E(N) = log N - D_SE(N_ref).
pub fn expected_curve(n: usize, dse_ref: f64) -> Result<f64, EntropyError> {
    let e = (n as f64).ln() - dse_ref;
    if !(e > 0.0) {
        return Err(EntropyError::Domain(format!("expected entropy {e} is not positive")));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareInput {
    observed: Vec<f64>,
    expected: Vec<f64>,
}

impl ChiSquareInput {
    pub fn new(observed: Vec<f64>, expected: Vec<f64>) -> Result<Self, EntropyError> {
        if observed.len() != expected.len() || observed.is_empty() {
            return Err(EntropyError::Invalid(format!(
                "observed ({}) and expected ({}) must be equal, non-zero lengths",
                observed.len(),
                expected.len()
            )));
        }
        if let Some(e) = expected.iter().find(|&&e| !(e > 0.0)) {
            return Err(EntropyError::Domain(format!("expected value {e} is not positive")));
        }
        Ok(Self { observed, expected })
    }

    pub fn n_pop(&self) -> usize {
        self.observed.len()
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn expected(&self) -> &[f64] {
        &self.expected
    }
}

/// χ² = Σ (O_i - E_i)² / E_i.
pub fn chi_square(input: &ChiSquareInput) -> f64 {
    compensated_sum(
        input
            .observed
            .iter()
            .zip(&input.expected)
            .map(|(o, e)| (o - e) * (o - e) / e),
    )
}

/// Coordinates in which the χ² slope is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KneeScale {
    /// χ² against N.
    Absolute,
    /// χ²·(nkR)² against N / (nkR)², which collapses modes of different wavenumber.
    Wavenumber { nkr_sq: f64 },
}

impl KneeScale {
    fn unit(self) -> f64 {
        match self {
            KneeScale::Absolute => 1.0,
            KneeScale::Wavenumber { nkr_sq } => nkr_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KneeOptions {
    pub tau: f64,
    pub scale: KneeScale,
    /// 0: forward differences. k > 0: slope of a local log-log fit over 2k + 1 points.
    pub half_window: usize,
}

/// Local fit of log χ² on log N around index i; returns (fitted χ², d log χ² / d log N).
fn local_loglog(chi: &[(usize, f64)], i: usize, half: usize) -> Option<(f64, f64)> {
    let lo = i.saturating_sub(half);
    let hi = (i + half + 1).min(chi.len());
    let pts: Vec<(f64, f64)> = chi[lo..hi]
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| ((p.0 as f64).ln(), p.1.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some(((my + b * ((chi[i].0 as f64).ln() - mx)).exp(), b))
}

/// Smallest N_(i) whose χ² slope falls below `tau`.
pub fn detect_n_o(chi: &[(usize, f64)], opts: &KneeOptions) -> Result<usize, EntropyError> {
    if chi.len() < 4 {
        return Err(EntropyError::Invalid("knee detection needs at least 4 schedule points".into()));
    }
    check_sorted(chi)?;
    let unit = opts.scale.unit();
    // d(χ² u) / d(N / u) = u² dχ²/dN
    let scaled = |slope: f64| slope * unit * unit;
    if opts.half_window == 0 {
        for w in chi.windows(2) {
            let slope = (w[1].1 - w[0].1).abs() / (w[1].0 - w[0].0) as f64;
            if scaled(slope) < opts.tau {
                return Ok(w[0].0);
            }
        }
    } else {
        for i in 0..chi.len() {
            if chi[i].1 == 0.0 {
                return Ok(chi[i].0);
            }
            if let Some((c, b)) = local_loglog(chi, i, opts.half_window) {
                if scaled(c * b.abs() / chi[i].0 as f64) < opts.tau {
                    return Ok(chi[i].0);
                }
            }
        }
    }
    Err(EntropyError::NotResolved { tau: opts.tau })
}

/// Least-squares N_O = c (nkR)² through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub coefficient: f64,
    /// Largest relative deviation |N_O - c x²| / N_O.
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit, EntropyError> {
    if points.is_empty() {
        return Err(EntropyError::Invalid("scaling fit needs at least one point".into()));
    }
    if points.iter().any(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(EntropyError::Domain("nkR and N_O must be positive".into()));
    }
    let num = compensated_sum(points.iter().map(|p| p.0 * p.0 * p.1));
    let den = compensated_sum(points.iter().map(|p| p.0.powi(4)));
    let c = num / den;
    let residual = points
        .iter()
        .map(|p| (p.1 - c * p.0 * p.0).abs() / p.1)
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        coefficient: c,
        residual,
        points: points.to_vec(),
    })
}
