//! Elliptic cavity family, interior lattice meshes and boundary discretizations.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Tm,
    Te,
    /// Closed cavity with ψ = 0 on the boundary.
    Dirichlet,
}

impl Polarization {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarization::Tm => "tm",
            Polarization::Te => "te",
            Polarization::Dirichlet => "dirichlet",
        }
    }

    pub fn is_open(self) -> bool {
        !matches!(self, Polarization::Dirichlet)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("deformation alpha = {0} outside [0, 0.5]")]
    Alpha(f64),
    #[error("refractive index {0} must exceed 1")]
    Index(f64),
    #[error("target mesh count {0} below 16")]
    TargetTooSmall(usize),
    #[error("boundary node count {0} below 32")]
    TooFewNodes(usize),
    #[error("lattice offset ({0}, {1}) outside [0, 1)")]
    Offset(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseSpec {
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub eccentricity: f64,
    pub refractive_index: f64,
    pub polarization: Polarization,
}

/// a = 1+α, b = 1/(1+α); area π is preserved.
pub fn ellipse_from_alpha(
    alpha: f64,
    n: f64,
    polarization: Polarization,
) -> Result<EllipseSpec, GeometryError> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(GeometryError::Alpha(alpha));
    }
    if !(n > 1.0) || !n.is_finite() {
        return Err(GeometryError::Index(n));
    }
    let a = 1.0 + alpha;
    let b = 1.0 / a;
    Ok(EllipseSpec {
        alpha,
        a,
        b,
        eccentricity: eccentricity_of(alpha),
        refractive_index: n,
        polarization,
    })
}

/// ε(α) = sqrt(1 - (1+α)^-4).
pub fn eccentricity_of(alpha: f64) -> f64 {
    let ratio = 1.0 / ((1.0 + alpha) * (1.0 + alpha));
    (1.0 - ratio * ratio).max(0.0).sqrt()
}

impl EllipseSpec {
    pub fn circle(n: f64, polarization: Polarization) -> Result<Self, GeometryError> {
        ellipse_from_alpha(0.0, n, polarization)
    }

    pub fn area(&self) -> f64 {
        PI * self.a * self.b
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = (x / self.a, y / self.b);
        u * u + v * v < 1.0
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        [self.a * t.cos(), self.b * t.sin()]
    }

    /// |dx/dt| of the standard parametrization (a cos t, b sin t).
    pub fn speed(&self, t: f64) -> f64 {
        let (s, c) = t.sin_cos();
        (self.a * self.a * s * s + self.b * self.b * c * c).sqrt()
    }

    /// Arc length from t = 0 to t.
    pub fn arc_length(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        adaptive_gk15(&|s| self.speed(s), 0.0, t, 1e-15)
    }

    pub fn perimeter(&self) -> f64 {
        4.0 * self.arc_length(0.5 * PI)
    }

    pub fn with_polarization(mut self, polarization: Polarization) -> Self {
        self.polarization = polarization;
        self
    }
}

/// Adaptive Gauss–Kronrod (7/15) quadrature.
pub fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (k, g) = gk15(f, a, b);
        if depth >= 40 || (k - g).abs() <= tol.max(1e-15 * k.abs()) {
            return k;
        }
        let m = 0.5 * (a + b);
        step(f, a, m, 0.5 * tol, depth + 1) + step(f, m, b, 0.5 * tol, depth + 1)
    }
    step(f, a, b, tol, 0)
}

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_728_8,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XK[i];
        let s = f(c - x) + f(c + x);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, g * h)
}

/// N interior points of a uniform square lattice clipped to the strict interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorMesh {
    pub h: f64,
    /// Sub-cell lattice offset in units of h.
    pub offset: [f64; 2],
    pub target: usize,
    pub points: Vec<[f64; 2]>,
    /// Integer lattice index (i, j) of each point: x = (i + u) h, y = (j + v) h.
    pub cells: Vec<[i32; 2]>,
}

impl InteriorMesh {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y")?;
        for p in &self.points {
            writeln!(w, "{},{}", p[0], p[1])?;
        }
        Ok(())
    }

    /// Dense index map for neighbour lookups.
    pub fn grid(&self) -> LatticeGrid {
        LatticeGrid::new(self)
    }
}

/// Dense lattice lookup: point index per (i, j) cell, or None outside the mesh.
#[derive(Debug, Clone)]
pub struct LatticeGrid {
    pub h: f64,
    pub offset: [f64; 2],
    i0: i32,
    j0: i32,
    width: usize,
    height: usize,
    slots: Vec<u32>,
}

impl LatticeGrid {
    fn new(mesh: &InteriorMesh) -> Self {
        let i0 = mesh.cells.iter().map(|c| c[0]).min().unwrap_or(0) - 1;
        let j0 = mesh.cells.iter().map(|c| c[1]).min().unwrap_or(0) - 1;
        let i1 = mesh.cells.iter().map(|c| c[0]).max().unwrap_or(0) + 1;
        let j1 = mesh.cells.iter().map(|c| c[1]).max().unwrap_or(0) + 1;
        let width = (i1 - i0 + 1) as usize;
        let height = (j1 - j0 + 1) as usize;
        let mut slots = vec![u32::MAX; width * height];
        for (k, c) in mesh.cells.iter().enumerate() {
            slots[(c[0] - i0) as usize * height + (c[1] - j0) as usize] = k as u32;
        }
        Self {
            h: mesh.h,
            offset: mesh.offset,
            i0,
            j0,
            width,
            height,
            slots,
        }
    }

    pub fn index(&self, i: i32, j: i32) -> Option<usize> {
        let (di, dj) = (i - self.i0, j - self.j0);
        if di < 0 || dj < 0 || di as usize >= self.width || dj as usize >= self.height {
            return None;
        }
        let s = self.slots[di as usize * self.height + dj as usize];
        (s != u32::MAX).then_some(s as usize)
    }

    /// Bilinear interpolation of per-point values; cells outside the mesh count as zero.
    pub fn bilinear(&self, values: &[f64], x: f64, y: f64) -> f64 {
        let fx = x / self.h - self.offset[0];
        let fy = y / self.h - self.offset[1];
        let (ix, iy) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - ix, fy - iy);
        let (i, j) = (ix as i32, iy as i32);
        let v = |a: i32, b: i32| self.index(a, b).map_or(0.0, |k| values[k]);
        v(i, j) * (1.0 - tx) * (1.0 - ty)
            + v(i + 1, j) * tx * (1.0 - ty)
            + v(i, j + 1) * (1.0 - tx) * ty
            + v(i + 1, j + 1) * tx * ty
    }
}

fn for_each_row(shape: &EllipseSpec, h: f64, off: [f64; 2], mut f: impl FnMut(i32, i32, i32)) {
    let inside = |i: i32, j: i32| {
        shape.contains((i as f64 + off[0]) * h, (j as f64 + off[1]) * h)
    };
    let imin = (-shape.a / h - off[0]).floor() as i32 - 1;
    let imax = (shape.a / h - off[0]).ceil() as i32 + 1;
    for i in imin..=imax {
        let x = (i as f64 + off[0]) * h;
        let u = x / shape.a;
        if u * u >= 1.0 {
            continue;
        }
        let ylim = shape.b * (1.0 - u * u).sqrt();
        let mut lo = (-ylim / h - off[1]).ceil() as i32;
        let mut hi = (ylim / h - off[1]).floor() as i32;
        while lo <= hi && !inside(i, lo) {
            lo += 1;
        }
        while inside(i, lo - 1) {
            lo -= 1;
        }
        while hi >= lo && !inside(i, hi) {
            hi -= 1;
        }
        while inside(i, hi + 1) {
            hi += 1;
        }
        if lo <= hi {
            f(i, lo, hi);
        }
    }
}

fn lattice_count(shape: &EllipseSpec, h: f64, off: [f64; 2]) -> usize {
    let mut n = 0usize;
    for_each_row(shape, h, off, |_, lo, hi| n += (hi - lo + 1) as usize);
    n
}

/// Origin-centred area-matched lattice mesh.
pub fn interior_mesh(shape: &EllipseSpec, target_n: usize) -> Result<InteriorMesh, GeometryError> {
    interior_mesh_with_offset(shape, target_n, [0.0, 0.0])
}

/// Lattice mesh whose spacing satisfies N·h² = πab exactly for the returned N,
/// searched within 8% of `target_n`. Otherwise the spacing whose count is
/// closest to the target with N·h² <= πab is used.
pub fn interior_mesh_with_offset(
    shape: &EllipseSpec,
    target_n: usize,
    offset: [f64; 2],
) -> Result<InteriorMesh, GeometryError> {
    if target_n < 16 {
        return Err(GeometryError::TargetTooSmall(target_n));
    }
    if !(0.0..1.0).contains(&offset[0]) || !(0.0..1.0).contains(&offset[1]) {
        return Err(GeometryError::Offset(offset[0], offset[1]));
    }
    let area = shape.area();
    let span = (0.08 * target_n as f64).floor() as usize;
    let wide = span.max(target_n / 2);
    let mut chosen = None;
    let mut best: Option<(usize, f64)> = None;
    'search: for d in 0..=wide {
        for np in [target_n + d, target_n.saturating_sub(d)] {
            if np == 0 {
                continue;
            }
            let h = (area / np as f64).sqrt();
            let count = lattice_count(shape, h, offset);
            if count == np && d <= span {
                chosen = Some(h);
                break 'search;
            }
            let miss = count.abs_diff(target_n);
            if count <= np && best.map_or(true, |(m, _)| miss < m) {
                best = Some((miss, h));
            }
        }
        if d >= span && best.is_some_and(|(m, _)| m <= span) {
            break;
        }
    }
    let h = chosen
        .or(best.map(|(_, h)| h))
        .unwrap_or_else(|| (area / target_n as f64).sqrt());
    let mut points = Vec::new();
    let mut cells = Vec::new();
    for_each_row(shape, h, offset, |i, lo, hi| {
        for j in lo..=hi {
            points.push([(i as f64 + offset[0]) * h, (j as f64 + offset[1]) * h]);
            cells.push([i, j]);
        }
    });
    Ok(InteriorMesh {
        h,
        offset,
        target: target_n,
        points,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNode {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    /// Arc-length quadrature weight.
    pub weight: f64,
    pub curvature: f64,
}

/// Nodes at equal arc-length spacing, counter-clockwise from (a, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDiscretization {
    pub nodes: Vec<BoundaryNode>,
    pub perimeter: f64,
}

impl BoundaryDiscretization {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    /// Rigid rotation about the origin.
    pub fn rotated(&self, phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        let rot = |p: [f64; 2]| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        Self {
            nodes: self
                .nodes
                .iter()
                .map(|n| BoundaryNode {
                    point: rot(n.point),
                    normal: rot(n.normal),
                    ..*n
                })
                .collect(),
            perimeter: self.perimeter,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,nx,ny,w")?;
        for n in &self.nodes {
            writeln!(
                w,
                "{},{},{},{},{}",
                n.point[0], n.point[1], n.normal[0], n.normal[1], n.weight
            )?;
        }
        Ok(())
    }
}

pub fn boundary_nodes(shape: &EllipseSpec, m: usize) -> Result<BoundaryDiscretization, GeometryError> {
    if m < 32 {
        return Err(GeometryError::TooFewNodes(m));
    }
    let quarter = shape.arc_length(0.5 * PI);
    let perimeter = 4.0 * quarter;
    let weight = perimeter / m as f64;
    let mut nodes = Vec::with_capacity(m);
    for j in 0..m {
        let target = weight * j as f64;
        // fold into the first quadrant by symmetry
        let q = (target / quarter).floor().min(3.0);
        let local = target - q * quarter;
        let (quadrant, mut rem) = (q as u32, local);
        let mirrored = quadrant % 2 == 1;
        if mirrored {
            rem = quarter - local;
        }
        let mut t = if rem <= 0.0 {
            0.0
        } else {
            invert_arc(shape, rem, quarter)
        };
        if mirrored {
            t = 0.5 * PI - t;
        }
        t += quadrant as f64 * 0.5 * PI;
        let (st, ct) = t.sin_cos();
        let speed = shape.speed(t);
        let normal = [shape.b * ct / speed, shape.a * st / speed];
        nodes.push(BoundaryNode {
            point: shape.point(t),
            normal,
            weight,
            curvature: shape.a * shape.b / (speed * speed * speed),
        });
    }
    Ok(BoundaryDiscretization { nodes, perimeter })
}

fn invert_arc(shape: &EllipseSpec, s: f64, quarter: f64) -> f64 {
    let mut t = 0.5 * PI * s / quarter;
    for _ in 0..60 {
        let dt = (shape.arc_length(t) - s) / shape.speed(t);
        t = (t - dt).clamp(0.0, 0.5 * PI);
        if dt.abs() < 1e-15 {
            break;
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk15_polynomial_exact() {
        let v = adaptive_gk15(&|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, 1e-14);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn grid_lookup_round_trip() {
        let e = ellipse_from_alpha(0.2, 2.0, Polarization::Dirichlet).unwrap();
        let mesh = interior_mesh_with_offset(&e, 500, [0.3, 0.7]).unwrap();
        let g = mesh.grid();
        for (k, c) in mesh.cells.iter().enumerate() {
            assert_eq!(g.index(c[0], c[1]), Some(k));
            let p = mesh.points[k];
            let vals: Vec<f64> = (0..mesh.n()).map(|q| q as f64).collect();
            assert!((g.bilinear(&vals, p[0], p[1]) - k as f64).abs() < 1e-9);
        }
    }
}
