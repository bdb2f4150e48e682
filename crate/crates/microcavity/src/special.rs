//! Integer-order cylinder functions of complex argument.
//!
//! J0, J1, Y0, Y1 come from the ascending series for |z| <= 14 and from the
//! Hankel asymptotic expansion beyond. Higher orders use Miller's backward
//! recurrence for J and forward recurrence for Y and H(1).

use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

pub const DEFAULT_ORDER_CAP: u32 = 64;
/// Overflow guard on |z|.
pub const ARG_LIMIT: f64 = 1e4;
/// Lower bound on Im z for H(1) is `-HANKEL_IM_CAP`.
pub const HANKEL_IM_CAP: f64 = 10.0;
const IM_LIMIT: f64 = 700.0;
const SERIES_RADIUS: f64 = 14.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecialError {
    #[error("order {order} exceeds the cap {cap}")]
    OrderCap { order: u32, cap: u32 },
    #[error("argument {0} violates the overflow guard")]
    Domain(C64),
    #[error("Hankel/Neumann functions are singular at z = 0")]
    Singular,
    #[error("argument {0} has Im z below the growth guard")]
    ImaginaryGuard(C64),
    #[error("non-finite value for order {order} at z = {z}")]
    Overflow { order: u32, z: C64 },
}

/// Angular order m, validated against a cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CylinderOrder(u32);

impl CylinderOrder {
    pub fn new(m: u32) -> Result<Self, SpecialError> {
        Self::with_cap(m, DEFAULT_ORDER_CAP)
    }

    pub fn with_cap(m: u32, cap: u32) -> Result<Self, SpecialError> {
        if m > cap {
            return Err(SpecialError::OrderCap { order: m, cap });
        }
        Ok(Self(m))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylinderKind {
    J,
    H1,
}

#[derive(Debug, Clone, Copy)]
struct Base {
    j: [C64; 2],
    y: [C64; 2],
    h: [C64; 2],
}

fn check_order(m: u32) -> Result<(), SpecialError> {
    CylinderOrder::new(m).map(|_| ())
}

fn check_arg(z: C64) -> Result<(), SpecialError> {
    if !z.re.is_finite() || !z.im.is_finite() || z.norm() >= ARG_LIMIT || z.im.abs() > IM_LIMIT {
        return Err(SpecialError::Domain(z));
    }
    Ok(())
}

fn check_singular(z: C64) -> Result<(), SpecialError> {
    check_arg(z)?;
    if z == C64::new(0.0, 0.0) {
        return Err(SpecialError::Singular);
    }
    Ok(())
}

fn finite(order: u32, z: C64, v: C64) -> Result<C64, SpecialError> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(SpecialError::Overflow { order, z })
    }
}

/// Bessel function of the first kind J_m(z).
pub fn bessel_j(m: u32, z: C64) -> Result<C64, SpecialError> {
    check_order(m)?;
    check_arg(z)?;
    let v = j_orders_unchecked(m as usize, z)[m as usize];
    finite(m, z, v)
}

/// Bessel function of the second kind Y_m(z), principal branch.
pub fn bessel_y(m: u32, z: C64) -> Result<C64, SpecialError> {
    check_order(m)?;
    check_singular(z)?;
    let b = base(z);
    let v = forward(b.y, m as usize, z)[m as usize];
    finite(m, z, v)
}

/// Hankel function of the first kind H(1)_m(z) = J_m(z) + i Y_m(z).
pub fn hankel1(m: u32, z: C64) -> Result<C64, SpecialError> {
    check_order(m)?;
    check_singular(z)?;
    if z.im < -HANKEL_IM_CAP {
        return Err(SpecialError::ImaginaryGuard(z));
    }
    let v = forward(base(z).h, m as usize, z)[m as usize];
    finite(m, z, v)
}

/// dC_m/dz = (C_{m-1} - C_{m+1}) / 2 with C_{-1} = -C_1.
pub fn cylinder_derivative(kind: CylinderKind, m: u32, z: C64) -> Result<C64, SpecialError> {
    check_order(m)?;
    let seq = match kind {
        CylinderKind::J => {
            check_arg(z)?;
            j_orders_unchecked(m as usize + 1, z)
        }
        CylinderKind::H1 => {
            check_singular(z)?;
            if z.im < -HANKEL_IM_CAP {
                return Err(SpecialError::ImaginaryGuard(z));
            }
            forward(base(z).h, m as usize + 1, z)
        }
    };
    let m = m as usize;
    let lower = if m == 0 { -seq[1] } else { seq[m - 1] };
    finite(m as u32, z, 0.5 * (lower - seq[m + 1]))
}

/// J_0(z) ..= J_{m_max}(z).
pub fn bessel_j_orders(m_max: u32, z: C64) -> Result<Vec<C64>, SpecialError> {
    check_arg(z)?;
    let v = j_orders_unchecked(m_max as usize, z);
    for (k, x) in v.iter().enumerate() {
        finite(k as u32, z, *x)?;
    }
    Ok(v)
}

/// H(1)_0(z) ..= H(1)_{m_max}(z).
pub fn hankel1_orders(m_max: u32, z: C64) -> Result<Vec<C64>, SpecialError> {
    check_singular(z)?;
    if z.im < -HANKEL_IM_CAP {
        return Err(SpecialError::ImaginaryGuard(z));
    }
    let v = forward(base(z).h, m_max as usize, z);
    for (k, x) in v.iter().enumerate() {
        finite(k as u32, z, *x)?;
    }
    Ok(v)
}

/// (J0, J1, H0, H1) without validation; for kernel assembly on trusted arguments.
pub(crate) fn jh01(z: C64) -> ([C64; 2], [C64; 2]) {
    let b = base(z);
    (b.j, b.h)
}

pub(crate) fn j_orders_unchecked(m_max: usize, z: C64) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m_max + 1];
    if z.norm() == 0.0 {
        out[0] = C64::new(1.0, 0.0);
        return out;
    }
    let b = base(z);
    out[0] = b.j[0];
    if m_max == 0 {
        return out;
    }
    out[1] = b.j[1];
    if m_max == 1 {
        return out;
    }
    let n0 = (m_max as f64).max(z.norm().ceil());
    let mut start = (n0 + (160.0 * n0).sqrt() + 12.0) as usize;
    start += start % 2;
    let inv_z = 1.0 / z;
    let mut f_next = C64::new(0.0, 0.0);
    let mut f = C64::new(1e-30, 0.0);
    let mut raw = vec![C64::new(0.0, 0.0); m_max + 1];
    for k in (1..=start).rev() {
        if k <= m_max {
            raw[k] = f;
        }
        let f_prev = 2.0 * k as f64 * inv_z * f - f_next;
        f_next = f;
        f = f_prev;
        let mag = f.norm();
        if mag > 1e120 {
            let s = 1e-120;
            f *= s;
            f_next *= s;
            for r in raw.iter_mut() {
                *r *= s;
            }
        }
    }
    raw[0] = f;
    let norm = 1.0 / raw[0].norm().max(raw[1].norm());
    for r in raw.iter_mut() {
        *r *= norm;
    }
    let denom = raw[0].norm_sqr() + raw[1].norm_sqr();
    let scale = (raw[0].conj() * b.j[0] + raw[1].conj() * b.j[1]) / denom;
    for k in 2..=m_max {
        out[k] = raw[k] * scale;
    }
    out
}

fn forward(c01: [C64; 2], m_max: usize, z: C64) -> Vec<C64> {
    let mut out = Vec::with_capacity(m_max + 1);
    out.push(c01[0]);
    if m_max >= 1 {
        out.push(c01[1]);
    }
    let inv_z = 1.0 / z;
    for k in 1..m_max {
        let next = 2.0 * k as f64 * inv_z * out[k] - out[k - 1];
        out.push(next);
    }
    out
}

fn base(z: C64) -> Base {
    if z.norm() <= SERIES_RADIUS {
        series01(z)
    } else if z.re >= 0.0 {
        asymptotic01(z)
    } else {
        // z = w e^{±iπ}, w = -z in the right half plane
        let w = -z;
        let b = asymptotic01(w);
        let sign = if z.im >= 0.0 { 1.0 } else { -1.0 };
        let i2 = C64::new(0.0, 2.0 * sign);
        let j = [b.j[0], -b.j[1]];
        let y = [b.y[0] + i2 * b.j[0], -(b.y[1] + i2 * b.j[1])];
        let i = C64::new(0.0, 1.0);
        let h = [j[0] + i * y[0], j[1] + i * y[1]];
        Base { j, y, h }
    }
}

fn series01(z: C64) -> Base {
    const GAMMA: f64 = 0.577_215_664_901_532_9;
    if z.norm() == 0.0 {
        let nan = C64::new(f64::NAN, f64::NAN);
        return Base {
            j: [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            y: [nan, nan],
            h: [nan, nan],
        };
    }
    let half = 0.5 * z;
    let q = -(half * half);
    let mut j0 = C64::new(0.0, 0.0);
    let mut j1 = C64::new(0.0, 0.0);
    let mut s0 = C64::new(0.0, 0.0);
    let mut s1 = C64::new(0.0, 0.0);
    // t0 = q^k/(k!)^2, t1 = q^k/(k!(k+1)!)
    let mut t0 = C64::new(1.0, 0.0);
    let mut t1 = C64::new(1.0, 0.0);
    let mut psi_k1 = -GAMMA; // psi(k+1)
    let mut psi_k2 = 1.0 - GAMMA; // psi(k+2)
    let k_min = (0.5 * z.norm()) as usize + 2;
    for k in 0..200usize {
        j0 += t0;
        j1 += t1;
        s0 += 2.0 * psi_k1 * t0;
        s1 += (psi_k1 + psi_k2) * t1;
        let kf = (k + 1) as f64;
        t0 = t0 * q / (kf * kf);
        t1 = t1 * q / (kf * (kf + 1.0));
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        let tol = 1e-18 * (1.0 + j0.norm() + j1.norm() + s0.norm() + s1.norm());
        if k >= k_min && t0.norm() * (1.0 + psi_k2.abs()) < tol {
            break;
        }
    }
    let j1 = j1 * half;
    let log_half = half.ln();
    let y0 = (2.0 / PI) * log_half * j0 - s0 / PI;
    let y1 = -1.0 / (PI * half) + (2.0 / PI) * log_half * j1 - half * s1 / PI;
    let i = C64::new(0.0, 1.0);
    Base {
        j: [j0, j1],
        y: [y0, y1],
        h: [j0 + i * y0, j1 + i * y1],
    }
}

/// Hankel expansion, valid for Re z >= 0 and |z| large.
fn asymptotic01(z: C64) -> Base {
    let i = C64::new(0.0, 1.0);
    let pref = (2.0 / (PI * z)).sqrt();
    let inv_z = 1.0 / z;
    let mut h1 = [C64::new(0.0, 0.0); 2];
    let mut h2 = [C64::new(0.0, 0.0); 2];
    for nu in 0..2usize {
        let mu = 4.0 * (nu * nu) as f64;
        let mut p = C64::new(0.0, 0.0); // sum with i^k
        let mut r = C64::new(0.0, 0.0); // sum with (-i)^k
        let mut a = C64::new(1.0, 0.0);
        let mut last = f64::INFINITY;
        let mut ik = C64::new(1.0, 0.0);
        for k in 0..60usize {
            let mag = a.norm();
            if mag > last {
                break;
            }
            p += ik * a;
            r += ik.conj() * a;
            if mag < 1e-17 {
                break;
            }
            last = mag;
            let kf = (k + 1) as f64;
            let odd = 2.0 * kf - 1.0;
            a = a * (mu - odd * odd) / (8.0 * kf) * inv_z;
            ik *= i;
        }
        let omega = z - (nu as f64) * FRAC_PI_2 - FRAC_PI_4;
        h1[nu] = pref * (i * omega).exp() * p;
        h2[nu] = pref * (-i * omega).exp() * r;
    }
    let j = [0.5 * (h1[0] + h2[0]), 0.5 * (h1[1] + h2[1])];
    let y = [(h1[0] - h2[0]) / (2.0 * i), (h1[1] - h2[1]) / (2.0 * i)];
    Base { j, y, h: h1 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    // J_m(z) = (1/2π) ∫_0^{2π} exp(i(z sin τ - mτ)) dτ, trapezoid rule
    fn j_integral(m: u32, z: C64) -> C64 {
        let n = 4096;
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            acc += (C64::new(0.0, 1.0) * (z * t.sin() - m as f64 * t)).exp();
        }
        acc / n as f64
    }

    #[test]
    fn origin_values() {
        assert_eq!(bessel_j(0, c(0.0)).unwrap(), c(1.0));
        assert_eq!(bessel_j(1, c(0.0)).unwrap(), c(0.0));
        assert_eq!(hankel1(0, c(0.0)), Err(SpecialError::Singular));
    }

    #[test]
    fn matches_integral_representation() {
        let pts = [
            c(0.3),
            c(3.7),
            c(13.9),
            c(14.1),
            c(40.0),
            c(99.0),
            C64::new(5.0, -1.5),
            C64::new(20.0, 2.0),
            C64::new(-7.0, 0.5),
            C64::new(-30.0, -0.2),
        ];
        for &z in &pts {
            for m in [0u32, 1, 2, 3, 8, 13, 20] {
                let got = bessel_j(m, z).unwrap();
                let want = j_integral(m, z);
                let scale = want.norm().max(1e-3 * (z.im.abs()).exp());
                assert!((got - want).norm() <= 1e-10 * scale.max(1e-2), "m={m} z={z} got={got} want={want}");
            }
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(bessel_j(65, c(1.0)), Err(SpecialError::OrderCap { .. })));
        assert!(matches!(bessel_j(0, c(1e4)), Err(SpecialError::Domain(_))));
        assert!(matches!(hankel1(0, C64::new(1.0, -11.0)), Err(SpecialError::ImaginaryGuard(_))));
        assert!(CylinderOrder::new(64).is_ok());
    }

    #[test]
    fn hankel_real_axis_decomposition() {
        for &x in &[0.5, 2.0, 14.0, 15.0, 60.0] {
            for m in 0..6 {
                let h = hankel1(m, c(x)).unwrap();
                assert!((h.re - bessel_j(m, c(x)).unwrap().re).abs() < 1e-10 * h.norm());
                assert!((h.im - bessel_y(m, c(x)).unwrap().re).abs() < 1e-10 * h.norm());
            }
        }
    }

    #[test]
    fn branch_continuity_across_series_radius() {
        for &arg in &[0.0, 0.7, 1.6, 2.5, -2.5, -1.0] {
            let dir = C64::from_polar(1.0, arg);
            let a = dir * (SERIES_RADIUS - 1e-12);
            let b = dir * (SERIES_RADIUS + 1e-12);
            for m in 0..4 {
                let (ja, jb) = (bessel_j(m, a).unwrap(), bessel_j(m, b).unwrap());
                assert!((ja - jb).norm() < 1e-10 * ja.norm().max(1.0), "J m={m} arg={arg}");
                if a.im >= -HANKEL_IM_CAP {
                    let (ya, yb) = (bessel_y(m, a).unwrap(), bessel_y(m, b).unwrap());
                    assert!((ya - yb).norm() < 1e-10 * ya.norm().max(1.0), "Y m={m} arg={arg}");
                }
            }
        }
    }
}
