//! Boundary-element resonance solver.
//!
//! Nyström discretization of the single- and double-layer operators with
//! logarithmic kernel splitting on the equal-arc-length parametrization.
//! Resonances are minima of the smallest singular value over kR.

use super::{ModeRecord, SolverError};
use crate::geometry::{boundary_nodes, BoundaryDiscretization, EllipseSpec, InteriorMesh, Polarization};
use crate::special::jh01;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Reflection parity class; `Parity { px, py }` keeps fields with
/// ψ(-x, y) = px ψ(x, y) and ψ(x, -y) = py ψ(x, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    #[default]
    None,
    Parity { px: i8, py: i8 },
    /// cos(mτ) angular harmonic; circle only.
    Harmonic { m: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BemOptions {
    pub symmetry: Symmetry,
    /// Target accuracy of kR.
    pub tolerance: f64,
    /// Largest distance the search may move from the seed.
    pub search_radius: f64,
    /// Accept a minimum only if σ_min < dip_ratio · median σ.
    pub dip_ratio: f64,
}

impl Default for BemOptions {
    fn default() -> Self {
        Self {
            symmetry: Symmetry::None,
            tolerance: 1e-10,
            search_radius: 0.2,
            dip_ratio: 1e-3,
        }
    }
}

/// At least ten nodes per interior wavelength.
pub fn required_nodes(shape: &EllipseSpec, kr: C64) -> usize {
    (10.0 * shape.refractive_index * kr.re * shape.perimeter() / (2.0 * PI)).ceil() as usize
}

/// Node count for a points-per-wavelength rule, rounded up to a multiple of 4.
pub fn nodes_for(shape: &EllipseSpec, kr: C64, per_wavelength: f64) -> usize {
    let m = (per_wavelength * shape.refractive_index * kr.re * shape.perimeter() / (2.0 * PI)).ceil() as usize;
    (m.max(32) + 3) / 4 * 4
}

#[derive(Debug, Clone)]
struct Reduction {
    rows: Vec<usize>,
    row_scale: Vec<f64>,
    /// Per reduced column: (node, coefficient).
    columns: Vec<Vec<(usize, f64)>>,
}

impl Reduction {
    fn new(m: usize, symmetry: Symmetry) -> Result<Self, SolverError> {
        match symmetry {
            Symmetry::Harmonic { m: order } => {
                if 2 * order as usize >= m {
                    return Err(SolverError::Invalid(format!("harmonic {order} not resolved by {m} nodes")));
                }
                let c: Vec<f64> = (0..m)
                    .map(|j| (order as f64 * 2.0 * PI * j as f64 / m as f64).cos())
                    .collect();
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                Ok(Self {
                    rows: vec![0],
                    row_scale: vec![norm],
                    columns: vec![c.iter().enumerate().map(|(j, v)| (j, v / norm)).collect()],
                })
            }
            Symmetry::None => Ok(Self {
                rows: (0..m).collect(),
                row_scale: vec![1.0; m],
                columns: (0..m).map(|j| vec![(j, 1.0)]).collect(),
            }),
            Symmetry::Parity { px, py } => {
                if m % 4 != 0 {
                    return Err(SolverError::Invalid(format!("parity reduction needs M divisible by 4, got {m}")));
                }
                if px.abs() != 1 || py.abs() != 1 {
                    return Err(SolverError::Invalid("parities must be +1 or -1".into()));
                }
                let (px, py) = (px as f64, py as f64);
                let mut rows = Vec::new();
                let mut row_scale = Vec::new();
                let mut columns = Vec::new();
                for f in 0..=m / 4 {
                    let images = [
                        (f, 1.0),
                        ((m - f) % m, py),
                        ((m / 2 + m - f) % m, px),
                        ((m / 2 + f) % m, px * py),
                    ];
                    let mut coef: Vec<(usize, f64)> = Vec::new();
                    for (node, c) in images {
                        match coef.iter_mut().find(|e| e.0 == node) {
                            Some(e) => e.1 += c,
                            None => coef.push((node, c)),
                        }
                    }
                    coef.retain(|e| e.1 != 0.0);
                    let norm = coef.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
                    if norm == 0.0 {
                        continue;
                    }
                    for e in coef.iter_mut() {
                        e.1 /= norm;
                    }
                    rows.push(f);
                    row_scale.push(4.0 / norm);
                    columns.push(coef);
                }
                Ok(Self {
                    rows,
                    row_scale,
                    columns,
                })
            }
        }
    }

    fn size(&self) -> usize {
        self.rows.len()
    }

    fn expand(&self, m: usize, reduced: &[C64]) -> Vec<C64> {
        let mut full = vec![C64::new(0.0, 0.0); m];
        for (col, &c) in self.columns.iter().zip(reduced) {
            for &(node, w) in col {
                full[node] += c * w;
            }
        }
        full
    }
}

/// Discretized boundary-integral system for one shape and node set.
#[derive(Debug, Clone)]
pub struct BemProblem {
    pub shape: EllipseSpec,
    pub boundary: BoundaryDiscretization,
    pub symmetry: Symmetry,
    reduction: Reduction,
    speed: f64,
    log_weight: Vec<f64>,
    log_kernel: Vec<f64>,
}

impl BemProblem {
    pub fn new(shape: &EllipseSpec, m_nodes: usize, symmetry: Symmetry) -> Result<Self, SolverError> {
        let boundary = boundary_nodes(shape, m_nodes)?;
        Self::from_boundary(shape, boundary, symmetry)
    }

    /// `boundary` must be an equal-arc-length node set of `shape` (possibly rotated).
    pub fn from_boundary(
        shape: &EllipseSpec,
        boundary: BoundaryDiscretization,
        symmetry: Symmetry,
    ) -> Result<Self, SolverError> {
        let m = boundary.m();
        if m % 2 != 0 {
            return Err(SolverError::Invalid(format!("node count must be even, got {m}")));
        }
        if matches!(symmetry, Symmetry::Harmonic { .. }) && shape.alpha != 0.0 {
            return Err(SolverError::Invalid("harmonic reduction requires the circle".into()));
        }
        let reduction = Reduction::new(m, symmetry)?;
        let half = m / 2;
        let log_weight = (0..m)
            .map(|d| {
                let t = PI * d as f64 / half as f64;
                let s: f64 = (1..half).map(|k| (k as f64 * t).cos() / k as f64).sum();
                -2.0 * PI / half as f64 * s - PI / (half * half) as f64 * (half as f64 * t).cos()
            })
            .collect();
        let log_kernel = (0..m)
            .map(|d| {
                if d == 0 {
                    0.0
                } else {
                    let s = (PI * d as f64 / m as f64).sin();
                    (4.0 * s * s).ln()
                }
            })
            .collect();
        Ok(Self {
            shape: *shape,
            speed: boundary.perimeter / (2.0 * PI),
            boundary,
            symmetry,
            reduction,
            log_weight,
            log_kernel,
        })
    }

    pub fn m(&self) -> usize {
        self.boundary.m()
    }

    /// Rows of the doubled single- and double-layer operators at wavenumber kappa.
    fn layer_rows(&self, kappa: C64, need_k: bool) -> (Vec<C64>, Vec<C64>) {
        let m = self.m();
        let rows = &self.reduction.rows;
        let sp = self.speed;
        let h = 2.0 * PI / m as f64;
        let mut s = vec![C64::new(0.0, 0.0); rows.len() * m];
        let mut k = if need_k { vec![C64::new(0.0, 0.0); rows.len() * m] } else { Vec::new() };
        let diag_log = (kappa * sp * 0.5).ln();
        for (ri, &i) in rows.iter().enumerate() {
            let xi = self.boundary.nodes[i].point;
            for j in 0..m {
                let d = (i + m - j) % m;
                let rw = self.log_weight[d];
                let idx = ri * m + j;
                if i == j {
                    let m1 = -sp / (2.0 * PI);
                    let m2 = (0.5 * I - EULER_GAMMA / PI - diag_log / PI) * sp;
                    s[idx] = rw * m1 + h * m2;
                    if need_k {
                        k[idx] = C64::new(self.boundary.nodes[i].curvature * sp / m as f64, 0.0);
                    }
                    continue;
                }
                let node = &self.boundary.nodes[j];
                let dx = [node.point[0] - xi[0], node.point[1] - xi[1]];
                let r = dx[0].hypot(dx[1]);
                let lk = self.log_kernel[d];
                let (jv, hv) = jh01(kappa * r);
                let m1 = -sp / (2.0 * PI) * jv[0];
                let mf = 0.5 * I * sp * hv[0];
                s[idx] = rw * m1 + h * (mf - m1 * lk);
                if need_k {
                    let num = sp * (node.normal[0] * dx[0] + node.normal[1] * dx[1]);
                    let l1 = -kappa / (2.0 * PI) * num * jv[1] / r;
                    let lf = 0.5 * I * kappa * num * hv[1] / r;
                    k[idx] = rw * l1 + h * (lf - l1 * lk);
                }
            }
        }
        (s, k)
    }

    fn reduce_block(&self, rows: &[C64], out: &mut DMatrix<C64>, r0: usize, c0: usize, scale: C64) {
        let m = self.m();
        for (ri, &rs) in self.reduction.row_scale.iter().enumerate() {
            for (ci, col) in self.reduction.columns.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &(node, w) in col {
                    acc += rows[ri * m + node] * w;
                }
                out[(r0 + ri, c0 + ci)] += scale * rs * acc;
            }
        }
    }

    /// The (reduced) system matrix at kR.
    pub fn matrix(&self, kr: C64) -> DMatrix<C64> {
        let n = self.shape.refractive_index;
        let f = self.reduction.size();
        match self.shape.polarization {
            Polarization::Dirichlet => {
                let (s, _) = self.layer_rows(n * kr, false);
                let mut a = DMatrix::zeros(f, f);
                self.reduce_block(&s, &mut a, 0, 0, C64::new(1.0, 0.0));
                a
            }
            pol => {
                let gamma = if pol == Polarization::Te { 1.0 / (n * n) } else { 1.0 };
                let (s_in, k_in) = self.layer_rows(n * kr, true);
                let (s_out, k_out) = self.layer_rows(kr, true);
                let mut a = DMatrix::zeros(2 * f, 2 * f);
                for d in 0..f {
                    a[(d, d)] += 1.0;
                    a[(f + d, d)] += 1.0;
                }
                let one = C64::new(1.0, 0.0);
                self.reduce_block(&k_in, &mut a, 0, 0, -one);
                self.reduce_block(&s_in, &mut a, 0, f, -one);
                self.reduce_block(&k_out, &mut a, f, 0, one);
                self.reduce_block(&s_out, &mut a, f, f, C64::new(gamma, 0.0));
                a
            }
        }
    }

    /// Singular values in ascending order.
    pub fn singular_values(&self, kr: C64) -> Vec<f64> {
        let mut sv: Vec<f64> = self.matrix(kr).singular_values().iter().cloned().collect();
        sv.sort_by(f64::total_cmp);
        sv
    }

    pub fn min_singular(&self, kr: C64) -> f64 {
        self.singular_values(kr)[0]
    }

    /// Boundary densities (ψ, ∂ψ/∂ν from inside) of the smallest singular vector.
    fn null_densities(&self, kr: C64) -> (Vec<C64>, Vec<C64>, f64, f64) {
        let svd = self.matrix(kr).svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let sv = &svd.singular_values;
        let (mut imin, mut smin) = (0, f64::INFINITY);
        for (k, &s) in sv.iter().enumerate() {
            if s < smin {
                imin = k;
                smin = s;
            }
        }
        let mut sorted: Vec<f64> = sv.iter().cloned().collect();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        let null: Vec<C64> = v_t.row(imin).iter().map(|c| c.conj()).collect();
        let f = self.reduction.size();
        let m = self.m();
        match self.shape.polarization {
            Polarization::Dirichlet => (
                vec![C64::new(0.0, 0.0); m],
                self.reduction.expand(m, &null),
                smin,
                median,
            ),
            _ => (
                self.reduction.expand(m, &null[..f]),
                self.reduction.expand(m, &null[f..]),
                smin,
                median,
            ),
        }
    }

    /// Local minimization of σ_min starting at `seed`.
    pub fn find(&self, seed: C64, opts: &BemOptions) -> Result<BemMode, SolverError> {
        let objective = |k: C64| self.min_singular(k);
        let kr = if self.shape.polarization.is_open() {
            nelder_mead(&objective, seed, opts)
        } else {
            golden_real(&|x| objective(C64::new(x, 0.0)), seed.re, opts)
        };
        if (kr - seed).norm() > opts.search_radius || kr.re <= 0.0 {
            return Err(SolverError::NoResonance { seed, ratio: f64::NAN });
        }
        let (u, q, smin, mut median) = self.null_densities(kr);
        if self.reduction.size() < 8 {
            // too few singular values for a median; use the nearby background level
            let h = 0.25 * opts.search_radius;
            median = objective(kr + h).max(objective(kr - h));
        }
        let ratio = smin / median;
        if !(ratio < opts.dip_ratio) {
            return Err(SolverError::NoResonance { seed, ratio });
        }
        Ok(BemMode {
            kr,
            sigma_min: smin,
            sigma_median: median,
            shape: self.shape,
            boundary: self.boundary.clone(),
            symmetry: self.symmetry,
            u,
            q,
        })
    }
}

fn golden_real(f: &dyn Fn(f64) -> f64, seed: f64, opts: &BemOptions) -> C64 {
    let h = 0.005;
    let mut x = seed;
    let mut fx = f(x);
    let (fl, fr) = (f(x - h), f(x + h));
    let dir = if fr < fx && fr <= fl {
        1.0
    } else if fl < fx {
        -1.0
    } else {
        0.0
    };
    if dir != 0.0 {
        loop {
            let nx = x + dir * h;
            let fnx = f(nx);
            if fnx >= fx || (nx - seed).abs() > opts.search_radius {
                break;
            }
            x = nx;
            fx = fnx;
        }
    }
    let (mut a, mut b) = (x - h, x + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > opts.tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    C64::new(0.5 * (a + b), 0.0)
}

fn nelder_mead(f: &dyn Fn(C64) -> f64, seed: C64, opts: &BemOptions) -> C64 {
    let step = 0.01;
    let mut simplex = [seed, seed + step, seed + C64::new(0.0, step)];
    let mut vals = simplex.map(|p| f(p));
    for _ in 0..500 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.map(|k| simplex[k]);
        vals = order.map(|k| vals[k]);
        let size = (simplex[1] - simplex[0]).norm().max((simplex[2] - simplex[0]).norm());
        if size < opts.tolerance {
            break;
        }
        let centroid = 0.5 * (simplex[0] + simplex[1]);
        let reflect = centroid + (centroid - simplex[2]);
        let fr = f(reflect);
        if fr < vals[0] {
            let expand = centroid + 2.0 * (centroid - simplex[2]);
            let fe = f(expand);
            if fe < fr {
                simplex[2] = expand;
                vals[2] = fe;
            } else {
                simplex[2] = reflect;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = reflect;
            vals[2] = fr;
        } else {
            let (target, ft) = if fr < vals[2] { (reflect, fr) } else { (simplex[2], vals[2]) };
            let contract = centroid + 0.5 * (target - centroid);
            let fc = f(contract);
            if fc < ft {
                simplex[2] = contract;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = simplex[0] + 0.5 * (simplex[k] - simplex[0]);
                    vals[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    simplex[best]
}

/// Smallest singular value of the full (unreduced) system.
pub fn bem_min_singular(shape: &EllipseSpec, m_nodes: usize, kr: C64) -> Result<f64, SolverError> {
    check_resolution(shape, m_nodes, kr)?;
    Ok(BemProblem::new(shape, m_nodes, Symmetry::None)?.min_singular(kr))
}

fn check_resolution(shape: &EllipseSpec, m_nodes: usize, kr: C64) -> Result<(), SolverError> {
    let required = required_nodes(shape, kr);
    if m_nodes < required {
        return Err(SolverError::Discretization {
            nodes: m_nodes,
            required,
        });
    }
    Ok(())
}

pub fn bem_find_mode(
    shape: &EllipseSpec,
    m_nodes: usize,
    seed: C64,
    opts: &BemOptions,
) -> Result<BemMode, SolverError> {
    check_resolution(shape, m_nodes, seed)?;
    BemProblem::new(shape, m_nodes, opts.symmetry)?.find(seed, opts)
}

/// Converged resonance with its boundary densities.
#[derive(Debug, Clone)]
pub struct BemMode {
    pub kr: C64,
    pub sigma_min: f64,
    pub sigma_median: f64,
    pub shape: EllipseSpec,
    pub boundary: BoundaryDiscretization,
    pub symmetry: Symmetry,
    /// ψ on the boundary nodes.
    pub u: Vec<C64>,
    /// Interior normal derivative ∂ψ/∂ν on the boundary nodes.
    pub q: Vec<C64>,
}

impl BemMode {
    pub fn field(&self, mesh: &InteriorMesh) -> Vec<C64> {
        bem_field(self, mesh)
    }

    pub fn record(&self, mesh: &InteriorMesh, quantum_numbers: Option<(u32, u32)>) -> Result<ModeRecord, SolverError> {
        let kr = if self.shape.polarization.is_open() {
            self.kr
        } else {
            C64::new(self.kr.re, 0.0)
        };
        ModeRecord::new(
            kr,
            self.field(mesh),
            mesh,
            quantum_numbers,
            self.shape.alpha,
            self.shape.polarization.is_open(),
        )
    }
}

fn trig_upsample(values: &[C64], factor: usize) -> Vec<C64> {
    let m = values.len();
    let half = m / 2;
    let coef: Vec<C64> = (0..m)
        .map(|k| {
            values
                .iter()
                .enumerate()
                .map(|(j, v)| v * C64::from_polar(1.0, -2.0 * PI * (k * j % m) as f64 / m as f64))
                .sum::<C64>()
                / m as f64
        })
        .collect();
    let fine = m * factor;
    (0..fine)
        .map(|p| {
            let t = 2.0 * PI * p as f64 / fine as f64;
            let mut acc = C64::new(0.0, 0.0);
            for (k, c) in coef.iter().enumerate() {
                let kk = k as i64 - if k > half { m as i64 } else { 0 };
                if k == half {
                    // split the Nyquist term symmetrically
                    acc += c * (half as f64 * t).cos();
                } else {
                    acc += c * C64::from_polar(1.0, kk as f64 * t);
                }
            }
            acc
        })
        .collect()
}

fn represent(kappa: C64, x: [f64; 2], boundary: &BoundaryDiscretization, u: &[C64], q: &[C64], dirichlet: bool) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (k, node) in boundary.nodes.iter().enumerate() {
        let d = [node.point[0] - x[0], node.point[1] - x[1]];
        let r = d[0].hypot(d[1]);
        let (_, h) = jh01(kappa * r);
        let mut term = h[0] * q[k];
        if !dirichlet {
            let cos = (node.normal[0] * d[0] + node.normal[1] * d[1]) / r;
            term += kappa * h[1] * cos * u[k];
        }
        acc += term * node.weight;
    }
    0.25 * I * acc
}

/// Interior field from the representation formula, normalized to max |ψ| = 1.
/// Points within one element length of the boundary use 4x oversampled quadrature.
pub fn bem_field(mode: &BemMode, mesh: &InteriorMesh) -> Vec<C64> {
    let kappa = mode.shape.refractive_index * mode.kr;
    let dirichlet = mode.shape.polarization == Polarization::Dirichlet;
    let m = mode.boundary.m();
    let elem = mode.boundary.perimeter / m as f64;
    let mut fine: Option<(BoundaryDiscretization, Vec<C64>, Vec<C64>)> = None;
    let mut field = Vec::with_capacity(mesh.n());
    for &p in &mesh.points {
        let near = mode
            .boundary
            .nodes
            .iter()
            .any(|n| (n.point[0] - p[0]).hypot(n.point[1] - p[1]) < elem);
        let v = if near {
            let (b, u, q) = fine.get_or_insert_with(|| {
                let b = boundary_nodes(&mode.shape, 4 * m).expect("node count already validated");
                let b = rotate_like(&b, &mode.boundary);
                (b, trig_upsample(&mode.u, 4), trig_upsample(&mode.q, 4))
            });
            represent(kappa, p, b, u, q, dirichlet)
        } else {
            represent(kappa, p, &mode.boundary, &mode.u, &mode.q, dirichlet)
        };
        field.push(v);
    }
    normalize_peak(&mut field);
    field
}

fn rotate_like(fine: &BoundaryDiscretization, coarse: &BoundaryDiscretization) -> BoundaryDiscretization {
    // the coarse set may be a rotated copy; recover the angle from node 0
    let p = coarse.nodes[0].point;
    let q = fine.nodes[0].point;
    let phi = p[1].atan2(p[0]) - q[1].atan2(q[0]);
    if phi.abs() < 1e-15 {
        fine.clone()
    } else {
        fine.rotated(phi)
    }
}

/// Scale so the largest-magnitude entry becomes exactly 1.
pub fn normalize_peak(field: &mut [C64]) {
    let mut best = 0usize;
    for (k, v) in field.iter().enumerate() {
        if v.norm_sqr() > field[best].norm_sqr() {
            best = k;
        }
    }
    if let Some(&peak) = field.get(best) {
        if peak.norm() > 0.0 {
            for v in field.iter_mut() {
                *v /= peak;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsample_reproduces_band_limited_data() {
        let m = 32;
        let f = |t: f64| C64::new((3.0 * t).cos() + 0.5 * (7.0 * t).sin(), (2.0 * t).cos());
        let coarse: Vec<C64> = (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).collect();
        let fine = trig_upsample(&coarse, 4);
        for (p, v) in fine.iter().enumerate() {
            let t = 2.0 * PI * p as f64 / (4 * m) as f64;
            assert!((v - f(t)).norm() < 1e-12);
        }
    }

    #[test]
    fn parity_reduction_counts() {
        let m = 64;
        let sizes: Vec<usize> = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
            .iter()
            .map(|&(px, py)| Reduction::new(m, Symmetry::Parity { px, py }).unwrap().size())
            .collect();
        assert_eq!(sizes.iter().sum::<usize>(), m);
    }
}
