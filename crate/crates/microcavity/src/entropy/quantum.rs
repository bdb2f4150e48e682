//! Quantum-number extraction and the lobe-contrast identifiability ratio.

use super::{EntropyError, ProbabilityField};
use crate::geometry::InteriorMesh;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, TAU};

const RING_SAMPLES: usize = 1440;
const RAY_SAMPLES: usize = 4000;
const MAX_HARMONIC: usize = 256;
/// Radial maxima below this fraction of the global maximum are ignored.
const PEAK_FLOOR: f64 = 1e-2;
/// Adjacent radial maxima whose valley is shallower than this contrast are merged.
const MERGE_CONTRAST: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumNumbers {
    pub ell: u32,
    pub m: u32,
    /// min(angular, radial) lobe contrast.
    pub ratio: f64,
    /// Median lobe peak over median inter-lobe saddle on the ring through the maximum.
    pub angular_ratio: f64,
    /// Worst adjacent-pair peak/valley contrast along the anti-nodal ray.
    pub radial_ratio: f64,
    pub identified: bool,
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

fn contrast(peak: f64, valley: f64) -> f64 {
    if valley > 0.0 {
        peak / valley
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Radius of the mesh hull along direction phi (distance to the farthest point within half a cell of the ray).
fn ray_extent(mesh: &InteriorMesh, phi: f64) -> f64 {
    let (c, s) = (phi.cos(), phi.sin());
    mesh.points
        .iter()
        .filter(|p| (p[1] * c - p[0] * s).abs() <= 0.5 * mesh.h && p[0] * c + p[1] * s > 0.0)
        .map(|p| p[0] * c + p[1] * s)
        .fold(0.0, f64::max)
}

/// Dominant nonzero angular harmonic of ρ on the ring through the global maximum gives m;
/// local maxima of ρ along the ray through the maximum give ℓ.
pub fn extract_quantum_numbers(p: &ProbabilityField, mesh: &InteriorMesh) -> Result<QuantumNumbers, EntropyError> {
    if p.n() != mesh.n() {
        return Err(EntropyError::Invalid(format!("field has {} values for a mesh of {}", p.n(), mesh.n())));
    }
    let rho = p.rho();
    let grid = mesh.grid();
    let imax = (0..rho.len()).fold(0, |b, k| if rho[k] > rho[b] { k } else { b });
    let pmax = mesh.points[imax];
    let r0 = pmax[0].hypot(pmax[1]);
    let phi0 = pmax[1].atan2(pmax[0]);

    // radial profile along the anti-nodal ray
    let rmax = ray_extent(mesh, phi0).max(r0);
    let ray: Vec<f64> = (0..RAY_SAMPLES)
        .map(|k| {
            let r = rmax * k as f64 / (RAY_SAMPLES - 1) as f64;
            grid.bilinear(rho, r * phi0.cos(), r * phi0.sin())
        })
        .collect();
    let floor = PEAK_FLOOR * rho[imax];
    // maxima separated by a shallow dip are one lobe
    let mut peaks: Vec<usize> = Vec::new();
    for k in (1..RAY_SAMPLES - 1).filter(|&k| ray[k] > floor && ray[k] > ray[k - 1] && ray[k] >= ray[k + 1]) {
        if let Some(&last) = peaks.last() {
            let valley = ray[last..=k].iter().cloned().fold(f64::INFINITY, f64::min);
            if contrast(ray[last].min(ray[k]), valley) < MERGE_CONTRAST {
                if ray[k] > ray[last] {
                    *peaks.last_mut().expect("non-empty") = k;
                }
                continue;
            }
        }
        peaks.push(k);
    }
    let ell = peaks.len() as u32;
    let radial_ratio = if peaks.len() < 2 {
        f64::INFINITY
    } else {
        peaks
            .windows(2)
            .map(|w| {
                let valley = ray[w[0]..=w[1]].iter().cloned().fold(f64::INFINITY, f64::min);
                contrast(ray[w[0]].min(ray[w[1]]), valley)
            })
            .fold(f64::INFINITY, f64::min)
    };

    if r0 < 0.5 * mesh.h {
        // maximum at the centre: rotationally symmetric pattern
        let ratio = radial_ratio;
        return Ok(QuantumNumbers {
            ell,
            m: 0,
            ratio,
            angular_ratio: f64::INFINITY,
            radial_ratio,
            identified: ratio > E,
        });
    }

    let ring: Vec<f64> = (0..RING_SAMPLES)
        .map(|k| {
            let t = phi0 + TAU * k as f64 / RING_SAMPLES as f64;
            grid.bilinear(rho, r0 * t.cos(), r0 * t.sin())
        })
        .collect();
    let mean = ring.iter().sum::<f64>() / RING_SAMPLES as f64;
    let (cos, sin): (Vec<f64>, Vec<f64>) = (0..RING_SAMPLES)
        .map(|k| (TAU * k as f64 / RING_SAMPLES as f64).sin_cos())
        .map(|(s, c)| (c, s))
        .unzip();
    let power = |h: usize| {
        let (mut c, mut s) = (0.0, 0.0);
        for (k, v) in ring.iter().enumerate() {
            let j = (h * k) % RING_SAMPLES;
            c += (v - mean) * cos[j];
            s += (v - mean) * sin[j];
        }
        c * c + s * s
    };
    let powers: Vec<f64> = (1..=MAX_HARMONIC.min(RING_SAMPLES / 2)).map(power).collect();
    let harmonic = (1..=powers.len())
        .max_by(|&a, &b| powers[a - 1].total_cmp(&powers[b - 1]).then(b.cmp(&a)))
        .unwrap_or(0);
    let m = (harmonic as u32).div_ceil(2).max(1);
    let lobes = 2 * m as usize;

    // sector k is centred on phi0 + kπ/m; saddle k lies between centres k and k+1
    let per = RING_SAMPLES as f64 / lobes as f64;
    let sector = |from: f64, to: f64| {
        let (a, b) = (from.round() as i64, to.round() as i64);
        (a..b).map(|k| ring[k.rem_euclid(RING_SAMPLES as i64) as usize])
    };
    let peaks_ang: Vec<f64> = (0..lobes)
        .map(|k| sector(k as f64 * per - 0.5 * per, k as f64 * per + 0.5 * per).fold(0.0, f64::max))
        .collect();
    let saddles: Vec<f64> = (0..lobes)
        .map(|k| sector(k as f64 * per, (k + 1) as f64 * per + 1.0).fold(f64::INFINITY, f64::min))
        .collect();
    let angular_ratio = contrast(median(peaks_ang.clone()), median(saddles.clone()));
    let ratio = angular_ratio.min(radial_ratio);
    let resolved = (0..lobes)
        .filter(|&k| {
            let left = saddles[(k + lobes - 1) % lobes];
            peaks_ang[k] > left && peaks_ang[k] > saddles[k]
        })
        .count();
    if harmonic % 2 == 1 || resolved < lobes || ell == 0 {
        return Err(EntropyError::ExtractionFailed {
            reason: format!(
                "harmonic {harmonic}, {resolved} of {lobes} angular lobes resolved, {ell} radial maxima"
            ),
            ratio,
        });
    }
    Ok(QuantumNumbers {
        ell,
        m,
        ratio,
        angular_ratio,
        radial_ratio,
        identified: ratio > E,
    })
}
