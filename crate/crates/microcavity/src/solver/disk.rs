//! Dielectric (or closed) circular disk of unit radius.

use super::SolverError;
use crate::geometry::{InteriorMesh, Polarization};
use crate::special::{j_orders_unchecked, bessel_j_orders, hankel1_orders};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const NEWTON_MAX: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StandingPhase {
    #[default]
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskMode {
    pub m: u32,
    pub ell: u32,
    pub n: f64,
    pub polarization: Polarization,
    pub kr: C64,
    pub residual: f64,
}

impl DiskMode {
    /// Interior radial wavenumber n·kR.
    pub fn nkr(&self) -> C64 {
        self.n * self.kr
    }
}

fn jh(m: u32, x_in: C64, x_out: C64, need_h: bool) -> Result<([C64; 3], [C64; 3]), SolverError> {
    // values at orders m-1, m, m+1 (order -1 mapped by symmetry)
    let j = bessel_j_orders(m + 1, x_in)?;
    let pick = |v: &[C64]| -> [C64; 3] {
        let lower = if m == 0 { -v[1] } else { v[m as usize - 1] };
        [lower, v[m as usize], v[m as usize + 1]]
    };
    let jj = pick(&j);
    let hh = if need_h {
        pick(&hankel1_orders(m + 1, x_out)?)
    } else {
        [C64::new(0.0, 0.0); 3]
    };
    Ok((jj, hh))
}

/// Returns (f, df/dkR).
fn characteristic_with_derivative(
    m: u32,
    kr: C64,
    n: f64,
    pol: Polarization,
) -> Result<(C64, C64), SolverError> {
    let x = n * kr;
    let open = pol.is_open();
    let (j, h) = jh(m, x, kr, open)?;
    let jv = j[1];
    let jp = 0.5 * (j[0] - j[2]);
    let mf = m as f64;
    // C'' = -C'/z - (1 - m²/z²) C
    let jpp = -jp / x - (1.0 - mf * mf / (x * x)) * jv;
    if !open {
        return Ok((jv, n * jp));
    }
    let hv = h[1];
    let hp = 0.5 * (h[0] - h[2]);
    let hpp = -hp / kr - (1.0 - mf * mf / (kr * kr)) * hv;
    Ok(match pol {
        Polarization::Tm => (n * jp * hv - jv * hp, n * n * jpp * hv - jv * hpp),
        Polarization::Te => (
            jp * hv / n - jv * hp,
            jpp * hv + (1.0 / n - n) * jp * hp - jv * hpp,
        ),
        Polarization::Dirichlet => unreachable!(),
    })
}

/// Matching condition of the disk; zero at resonances.
pub fn disk_characteristic(m: u32, kr: C64, n: f64, pol: Polarization) -> Result<C64, SolverError> {
    if !(kr.re > 0.0) {
        return Err(SolverError::Invalid(format!("Re kR must be positive, got {kr}")));
    }
    Ok(characteristic_with_derivative(m, kr, n, pol)?.0)
}

fn real_j(m: u32, x: f64) -> f64 {
    j_orders_unchecked(m as usize, C64::new(x, 0.0))[m as usize].re
}

fn real_jp(m: u32, x: f64) -> f64 {
    let v = j_orders_unchecked(m as usize + 1, C64::new(x, 0.0));
    let lower = if m == 0 { -v[1].re } else { v[m as usize - 1].re };
    0.5 * (lower - v[m as usize + 1].re)
}

fn scan_roots(f: impl Fn(f64) -> f64, start: f64, count: usize) -> Vec<f64> {
    let mut roots = Vec::with_capacity(count);
    let step = 0.05;
    let mut a = start;
    let mut fa = f(a);
    while roots.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 * hi {
                    break;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// First `count` positive zeros j_{m,s} of J_m.
pub fn bessel_zeros(m: u32, count: usize) -> Vec<f64> {
    scan_roots(|x| real_j(m, x), (m as f64).max(0.5), count)
}

/// First `count` positive zeros j'_{m,s} of J'_m.
pub fn bessel_derivative_zeros(m: u32, count: usize) -> Vec<f64> {
    scan_roots(|x| real_jp(m, x), (m as f64 * 0.9).max(0.5), count)
}

/// Number of local maxima of |J_m(x r)|² for r in (0, 1).
pub fn radial_maxima(m: u32, x: C64) -> usize {
    let samples = 4000usize.max((200.0 * x.norm()) as usize);
    let vals: Vec<f64> = (0..=samples)
        .map(|k| {
            let r = k as f64 / samples as f64;
            j_orders_unchecked(m as usize, x * r)[m as usize].norm_sqr()
        })
        .collect();
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    (1..samples)
        .filter(|&k| vals[k] > vals[k - 1] && vals[k] >= vals[k + 1] && vals[k] > 1e-12 * peak)
        .count()
}

fn newton(m: u32, seed: C64, n: f64, pol: Polarization) -> Result<(C64, f64), SolverError> {
    let mut k = seed;
    for _ in 0..NEWTON_MAX {
        let (f, df) = characteristic_with_derivative(m, k, n, pol)?;
        let mut step = f / df;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        // damp wild jumps
        if step.norm() > 0.5 {
            step *= 0.5 / step.norm();
        }
        k -= step;
        if !pol.is_open() {
            k.im = 0.0;
        }
        if k.re <= 0.0 {
            break;
        }
        if step.norm() <= 1e-14 * k.norm() {
            let res = characteristic_with_derivative(m, k, n, pol)?.0.norm();
            return Ok((k, res));
        }
    }
    Err(SolverError::NonConvergence {
        m,
        ell: 0,
        iterations: NEWTON_MAX,
    })
}

/// Resonance (m, ell) by Newton iteration seeded at the Bessel zero j_{m,ell}/n.
pub fn disk_find_mode(m: u32, ell: u32, n: f64, pol: Polarization) -> Result<DiskMode, SolverError> {
    if ell < 1 {
        return Err(SolverError::Invalid("radial number ell must be >= 1".into()));
    }
    if !(n > 1.0) {
        return Err(SolverError::Invalid(format!("refractive index {n} must exceed 1")));
    }
    let l = ell as usize;
    let zeros = bessel_zeros(m, l);
    let anchor = zeros[l - 1];
    let mut reals = vec![anchor];
    reals.push(bessel_derivative_zeros(m, l)[l - 1]);
    if m > 0 {
        reals.push(bessel_zeros(m - 1, l)[l - 1]);
    }
    if l > 1 {
        reals.push(0.5 * (zeros[l - 2] + anchor));
    }
    let im0 = if pol.is_open() {
        -((n + 1.0) / (n - 1.0)).ln() / (2.0 * n)
    } else {
        0.0
    };
    let ims: Vec<f64> = if pol.is_open() {
        vec![im0, 0.3 * im0, 2.0 * im0]
    } else {
        vec![0.0]
    };
    let mut mismatch = None;
    let mut converged_any = false;
    for &re in &reals {
        for &im in &ims {
            let seed = C64::new(re / n, im);
            let Ok((kr, residual)) = newton(m, seed, n, pol) else {
                continue;
            };
            converged_any = true;
            if residual >= 1e-9 {
                continue;
            }
            let found = radial_maxima(m, n * kr);
            if found == l {
                return Ok(DiskMode {
                    m,
                    ell,
                    n,
                    polarization: pol,
                    kr,
                    residual,
                });
            }
            mismatch.get_or_insert((kr, found));
        }
    }
    match mismatch {
        Some((kr, found)) => Err(SolverError::ModeIdentification { m, ell, kr, found }),
        None => Err(SolverError::NonConvergence {
            m,
            ell,
            iterations: if converged_any { 0 } else { NEWTON_MAX },
        }),
    }
}

/// Cubic Hermite table of r -> J_m(x r) on [0, 1].
#[derive(Debug, Clone)]
pub struct RadialTable {
    m: u32,
    x: C64,
    step: f64,
    values: Vec<C64>,
    slopes: Vec<C64>,
}

impl RadialTable {
    pub fn new(m: u32, x: C64) -> Self {
        let intervals = 2048usize.max((64.0 * x.norm()).ceil() as usize);
        let step = 1.0 / intervals as f64;
        let mut values = Vec::with_capacity(intervals + 1);
        let mut slopes = Vec::with_capacity(intervals + 1);
        for k in 0..=intervals {
            let z = x * (k as f64 * step);
            let v = j_orders_unchecked(m as usize + 1, z);
            let lower = if m == 0 { -v[1] } else { v[m as usize - 1] };
            values.push(v[m as usize]);
            // d/dr J_m(x r) = x J'_m(x r), scaled to the unit interval
            slopes.push(x * 0.5 * (lower - v[m as usize + 1]) * step);
        }
        Self {
            m,
            x,
            step,
            values,
            slopes,
        }
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn argument(&self) -> C64 {
        self.x
    }

    pub fn eval(&self, r: f64) -> C64 {
        let last = self.values.len() - 1;
        let f = (r / self.step).clamp(0.0, last as f64);
        let k = (f.floor() as usize).min(last - 1);
        let t = f - k as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        self.values[k] * h00 + self.slopes[k] * h10 + self.values[k + 1] * h01 + self.slopes[k + 1] * h11
    }
}

fn angular(m: u32, phase: StandingPhase, theta: f64) -> f64 {
    let a = m as f64 * theta;
    match phase {
        StandingPhase::Cos => a.cos(),
        StandingPhase::Sin => a.sin(),
    }
}

/// ψ(r, θ) = J_m(n kR r) cos(mθ) (or sin) at every mesh point.
pub fn disk_field(mode: &DiskMode, mesh: &InteriorMesh, phase: StandingPhase) -> Vec<C64> {
    let x = mode.nkr();
    mesh.points
        .iter()
        .map(|p| {
            let r = p[0].hypot(p[1]);
            let j = j_orders_unchecked(mode.m as usize, x * r)[mode.m as usize];
            j * angular(mode.m, phase, p[1].atan2(p[0]))
        })
        .collect()
}

/// Intensity |J_m(x r)|² cos²(m(θ - θ0)) through a radial table; fast path for large meshes.
pub fn disk_intensity(table: &RadialTable, points: &[[f64; 2]], theta0: f64) -> Vec<f64> {
    let m = table.order();
    points
        .iter()
        .map(|p| {
            let r = p[0].hypot(p[1]);
            let a = angular(m, StandingPhase::Cos, p[1].atan2(p[0]) - theta0);
            table.eval(r).norm_sqr() * a * a
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_direct_evaluation() {
        for &(m, x) in &[(3u32, C64::new(19.4, 0.0)), (8, C64::new(52.0, -0.36)), (0, C64::new(2.4, 0.0))] {
            let t = RadialTable::new(m, x);
            for k in 0..997 {
                let r = k as f64 / 996.0;
                let direct = j_orders_unchecked(m as usize, x * r)[m as usize];
                assert!((t.eval(r) - direct).norm() < 1e-9, "m={m} r={r}");
            }
        }
    }

    #[test]
    fn zeros_of_j3() {
        let z = bessel_zeros(3, 5);
        let known = [6.380161895923984, 9.761023129981670, 13.015200721698434, 16.223466160318768, 19.409415226435012];
        for (a, b) in z.iter().zip(known) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = bessel_derivative_zeros(1, 2);
        assert!((d[0] - 1.841183781340659).abs() < 1e-12);
        assert!((d[1] - 5.331442773525033).abs() < 1e-12);
    }
}
