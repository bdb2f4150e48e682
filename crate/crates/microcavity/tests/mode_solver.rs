use microcavity::geometry::{boundary_nodes, ellipse_from_alpha, interior_mesh, EllipseSpec, Polarization};
use microcavity::solver::bem::{nodes_for, BemProblem};
use microcavity::solver::cache::{cache_key, read_mode_cache, write_mode_cache, CacheHeader, MeshSpec, Payload, SOLVER_VERSION};
use microcavity::solver::disk::radial_maxima;
use microcavity::solver::sweep::check_collisions;
use microcavity::solver::*;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

// J_m(x) = (1/π) ∫_0^π cos(mτ - x sin τ) dτ, trapezoid rule (spectrally accurate)
fn j_integral(m: u32, x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + (m as f64 * PI - 0.0).cos());
    for k in 1..n {
        let t = k as f64 * h;
        s += (m as f64 * t - x * t.sin()).cos();
    }
    s * h / PI
}

fn j_zero(m: u32, ell: u32) -> f64 {
    let mut count = 0;
    let mut x = 0.5;
    let step = 0.02;
    loop {
        let (a, b) = (x, x + step);
        if j_integral(m, a).signum() != j_integral(m, b).signum() {
            count += 1;
            if count == ell {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if j_integral(m, lo).signum() == j_integral(m, mid).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
        }
        x = b;
    }
}

const FIG6: [(u32, u32, f64); 4] = [(3, 2, 2.8), (3, 5, 5.8), (4, 10, 11.0), (8, 13, 16.0)];

#[test]
fn dirichlet_disk_matches_bessel_zeros() {
    for &(m, ell, _) in &FIG6 {
        let d = disk_find_mode(m, ell, 3.3, Polarization::Dirichlet).unwrap();
        assert_eq!(d.kr.im, 0.0);
        let z = j_zero(m, ell);
        assert!((d.nkr().re - z).abs() < 1e-8, "({m},{ell}) {} vs {z}", d.nkr());
        let f = disk_characteristic(m, C64::new(z / 3.3, 0.0), 3.3, Polarization::Dirichlet).unwrap();
        assert!(f.norm() < 1e-9);
    }
}

#[test]
fn te_disk_matches_listed_frequencies() {
    for &(m, ell, re) in &FIG6 {
        let d = disk_find_mode(m, ell, 3.3, Polarization::Te).unwrap();
        let tol = if m == 8 { 0.5 } else { 0.3 };
        assert!((d.kr.re - re).abs() < tol, "({m},{ell}) {}", d.kr);
        assert!(d.kr.im < 0.0);
        assert!(d.residual < 1e-9);
        assert_eq!(radial_maxima(m, d.nkr()), ell as usize);
    }
}

#[test]
fn characteristic_conjugate_symmetry() {
    for pol in [Polarization::Tm, Polarization::Te] {
        for &k in &[C64::new(5.8, -0.1), C64::new(2.3, 0.05), C64::new(11.0, -0.4)] {
            let a = disk_characteristic(3, k, 3.3, pol).unwrap();
            // H1 is not conjugation-symmetric; the interior factor J is
            let b = disk_characteristic(3, k.conj(), 3.3, Polarization::Dirichlet).unwrap();
            let c = disk_characteristic(3, k, 3.3, Polarization::Dirichlet).unwrap();
            assert!((b - c.conj()).norm() < 1e-12 * c.norm().max(1.0));
            assert!(a.is_finite());
        }
    }
}

#[test]
fn high_index_limits() {
    // TE: (1/n) J' H - J H' -> J(n kR) = 0
    let te = disk_find_mode(3, 5, 100.0, Polarization::Te).unwrap();
    let z = j_zero(3, 5);
    assert!((te.nkr().re - z).abs() / z < 5e-3, "{}", te.nkr());
    // TM: with kR -> 0 outside, H'/H ~ -m/kR and n J' H - J H' -> x J_{m-1}(x) = 0
    let tm = disk_find_mode(3, 5, 100.0, Polarization::Tm).unwrap();
    let z = j_zero(2, 5);
    assert!((tm.nkr().re - z).abs() / z < 5e-3, "{} vs {z}", tm.nkr());
    assert!(tm.kr.im < 0.0);
}

#[test]
fn disk_field_symmetries() {
    let circle = EllipseSpec::circle(3.3, Polarization::Te).unwrap();
    let mesh = interior_mesh(&circle, 3492).unwrap();
    let d0 = disk_find_mode(0, 3, 3.3, Polarization::Te).unwrap();
    let f0 = disk_field(&d0, &mesh, StandingPhase::Cos);
    // lattice points related by 90° rotation share the radius
    for (k, p) in mesh.points.iter().enumerate() {
        let q = [-p[1], p[0]];
        if let Some(j) = mesh.points.iter().position(|r| (r[0] - q[0]).abs() < 1e-12 && (r[1] - q[1]).abs() < 1e-12) {
            assert!((f0[k] - f0[j]).norm() < 1e-10);
        }
    }
    let d = disk_find_mode(3, 5, 3.3, Polarization::Te).unwrap();
    let f = disk_field(&d, &mesh, StandingPhase::Cos);
    let (k_near, _) = mesh
        .points
        .iter()
        .enumerate()
        .map(|(k, p)| (k, p[0].hypot(p[1])))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let peak = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(f[k_near].norm() < 1e-2 * peak);
    let sin = disk_field(&d, &mesh, StandingPhase::Sin);
    assert_eq!(sin.len(), mesh.n());
}

#[test]
fn disk_intensity_has_six_angular_lobes() {
    let d = disk_find_mode(3, 5, 3.3, Polarization::Te).unwrap();
    let x = d.nkr();
    // global max of |J_3(x r)|² on (0, 1)
    let (mut rbest, mut vbest) = (0.0, 0.0);
    for k in 1..4000 {
        let r = k as f64 / 4000.0;
        let v = microcavity::special::bessel_j(3, x * r).unwrap().norm_sqr();
        if v > vbest {
            vbest = v;
            rbest = r;
        }
    }
    let samples = 256;
    let ring: Vec<f64> = (0..samples)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / samples as f64;
            let j = microcavity::special::bessel_j(3, x * rbest).unwrap();
            (j * (3.0 * t).cos()).norm_sqr()
        })
        .collect();
    let power = |h: usize| {
        let (mut c, mut s) = (0.0, 0.0);
        for (k, v) in ring.iter().enumerate() {
            let t = 2.0 * PI * (h * k) as f64 / samples as f64;
            c += v * t.cos();
            s += v * t.sin();
        }
        c * c + s * s
    };
    let best = (1..samples / 2).max_by(|&a, &b| power(a).total_cmp(&power(b))).unwrap();
    assert_eq!(best, 6);
}

#[test]
fn disk_errors() {
    assert!(matches!(disk_find_mode(3, 0, 3.3, Polarization::Te), Err(SolverError::Invalid(_))));
}

fn circle(pol: Polarization) -> EllipseSpec {
    EllipseSpec::circle(3.3, pol).unwrap()
}

#[test]
fn bem_dip_at_resonance_and_not_between() {
    let shape = circle(Polarization::Dirichlet);
    let d = disk_find_mode(3, 5, 3.3, Polarization::Dirichlet).unwrap();
    let m = nodes_for(&shape, d.kr, 12.0);
    let p = BemProblem::new(&shape, m, Symmetry::None).unwrap();
    let sv = p.singular_values(d.kr);
    let median = sv[sv.len() / 2];
    assert!(sv[0] < 1e-3 * median, "{} vs {median}", sv[0]);
    assert!((bem_min_singular(&shape, m, d.kr).unwrap() - sv[0]).abs() < 1e-12 * median);

    // all closed-disk roots near kR, from the Bessel-zero oracle; probe the widest gap
    let mut roots: Vec<f64> = Vec::new();
    for order in 0..30u32 {
        for ell in 1..12u32 {
            let k = microcavity::solver::disk::bessel_zeros(order, ell as usize)[ell as usize - 1] / 3.3;
            if (k - d.kr.re).abs() < 0.4 {
                roots.push(k);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    let (lo, hi) = roots
        .windows(2)
        .map(|w| (w[0], w[1]))
        .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
        .unwrap();
    let mid = C64::new(0.5 * (lo + hi), 0.0);
    let sv = p.singular_values(mid);
    assert!(sv[0] > 1e-1 * sv[sv.len() / 2], "midpoint {mid}: {} vs {}", sv[0], sv[sv.len() / 2]);
}

#[test]
fn bem_min_singular_rotation_invariant() {
    for pol in [Polarization::Dirichlet, Polarization::Te] {
        let shape = circle(pol);
        let k = C64::new(5.87, if pol.is_open() { -0.1 } else { 0.0 });
        let m = nodes_for(&shape, k, 10.0);
        let b = boundary_nodes(&shape, m).unwrap();
        let base = BemProblem::from_boundary(&shape, b.clone(), Symmetry::None).unwrap().min_singular(k);
        for phi in [0.3, 1.234, 2.0 * PI / m as f64 * 0.5] {
            let r = BemProblem::from_boundary(&shape, b.rotated(phi), Symmetry::None)
                .unwrap()
                .min_singular(k);
            assert!((r - base).abs() < 1e-8, "{pol:?} phi={phi}: {r} vs {base}");
        }
    }
}

#[test]
fn bem_under_resolved_is_rejected() {
    let shape = circle(Polarization::Te);
    let k = C64::new(5.87, -0.1);
    assert!(matches!(
        bem_min_singular(&shape, 32, k),
        Err(SolverError::Discretization { nodes: 32, .. })
    ));
}

#[test]
fn bem_circle_matches_disk_for_all_polarizations() {
    for pol in [Polarization::Dirichlet, Polarization::Te, Polarization::Tm] {
        let shape = circle(pol);
        let d = disk_find_mode(3, 5, 3.3, pol).unwrap();
        let opts = BemOptions {
            symmetry: Symmetry::Harmonic { m: 3 },
            ..Default::default()
        };
        let mut errs = Vec::new();
        for ppw in [12.0, 24.0] {
            let m = nodes_for(&shape, d.kr, ppw);
            let b = bem_find_mode(&shape, m, d.kr + 0.05, &opts).unwrap();
            errs.push((b.kr - d.kr).norm() / d.kr.norm());
        }
        assert!(errs[0] < 1e-4, "{pol:?} {errs:?}");
        assert!(errs[1] <= errs[0].max(1e-10), "{pol:?} {errs:?}");
    }
}

#[test]
fn bem_dirichlet_parity_class_from_bessel_seed() {
    let shape = circle(Polarization::Dirichlet);
    let z = j_zero(3, 5) / 3.3;
    let opts = BemOptions {
        symmetry: Symmetry::Parity { px: -1, py: 1 },
        ..Default::default()
    };
    let m = nodes_for(&shape, C64::new(z, 0.0), 12.0);
    let b = bem_find_mode(&shape, m, C64::new(z + 0.002, 0.0), &opts).unwrap();
    assert!((b.kr.re - z).abs() / z < 1e-4);
    assert_eq!(b.kr.im, 0.0);
}

#[test]
fn bem_field_matches_disk_field() {
    for pol in [Polarization::Dirichlet, Polarization::Te] {
        let shape = circle(pol);
        let d = disk_find_mode(3, 5, 3.3, pol).unwrap();
        let mesh = interior_mesh(&shape, 1040).unwrap();
        let opts = BemOptions {
            symmetry: Symmetry::Parity { px: -1, py: 1 },
            ..Default::default()
        };
        let m = nodes_for(&shape, d.kr, 12.0);
        let b = bem_find_mode(&shape, m, d.kr + 0.002, &opts).unwrap();
        let fb = b.field(&mesh);
        let peak = fb.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        let fd = disk_field(&d, &mesh, StandingPhase::Cos);
        // best single complex scale: c = <fb, fd> / <fd, fd>
        let num: C64 = fd.iter().zip(&fb).map(|(a, b)| a.conj() * b).sum();
        let den: f64 = fd.iter().map(|a| a.norm_sqr()).sum();
        let c = num / den;
        let rms = (fd.iter().zip(&fb).map(|(a, b)| (c * a - b).norm_sqr()).sum::<f64>() / mesh.n() as f64).sqrt();
        assert!(rms < 1e-3, "{pol:?} rms {rms}");
        let rec = b.record(&mesh, Some((5, 3))).unwrap();
        assert_eq!(rec.field.len(), mesh.n());
        assert_eq!(rec.open, pol.is_open());
    }
}

#[test]
fn mode_record_invariants() {
    let shape = circle(Polarization::Te);
    let mesh = interior_mesh(&shape, 98).unwrap();
    let field = vec![C64::new(1.0, 0.0); mesh.n()];
    assert!(ModeRecord::new(C64::new(5.0, -0.1), field.clone(), &mesh, None, 0.0, true).is_ok());
    assert!(ModeRecord::new(C64::new(-5.0, -0.1), field.clone(), &mesh, None, 0.0, true).is_err());
    assert!(ModeRecord::new(C64::new(5.0, 0.1), field.clone(), &mesh, None, 0.0, true).is_err());
    assert!(ModeRecord::new(C64::new(5.0, 0.1), field.clone(), &mesh, None, 0.0, false).is_err());
    assert!(ModeRecord::new(C64::new(5.0, 0.0), field[1..].to_vec(), &mesh, None, 0.0, false).is_err());
}

fn closed_family() -> SweepFamily {
    SweepFamily {
        refractive_index: 3.3,
        polarization: Polarization::Dirichlet,
        symmetry: Symmetry::Parity { px: -1, py: 1 },
        points_per_wavelength: 12.0,
    }
}

#[test]
fn single_point_sweep_equals_direct_solve() {
    let fam = closed_family();
    let seed = C64::new(j_zero(3, 5) / 3.3 + 0.002, 0.0);
    let out = sweep_trajectory(&fam, &[0.0], seed, &BemOptions::default()).unwrap();
    assert_eq!(out.trajectory.points.len(), 1);
    let shape = circle(Polarization::Dirichlet);
    let opts = BemOptions {
        symmetry: fam.symmetry,
        ..Default::default()
    };
    let direct = bem_find_mode(&shape, nodes_for(&shape, seed, 12.0), seed, &opts).unwrap();
    assert_eq!(out.trajectory.points[0].kr, direct.kr);
}

#[test]
fn closed_sweep_is_continuous_and_step_independent() {
    let fam = closed_family();
    let seed = C64::new(j_zero(3, 5) / 3.3, 0.0);
    let coarse: Vec<f64> = (0..=4).map(|k| 0.01 * k as f64).collect();
    let fine: Vec<f64> = (0..=8).map(|k| 0.005 * k as f64).collect();
    let a = sweep_trajectory(&fam, &coarse, seed, &BemOptions::default()).unwrap();
    let b = sweep_trajectory(&fam, &fine, seed, &BemOptions::default()).unwrap();
    assert!(a.trajectory.max_step() < 0.05);
    for p in &a.trajectory.points {
        assert_eq!(p.kr.im, 0.0);
        let q = b.trajectory.points.iter().find(|q| (q.alpha - p.alpha).abs() < 1e-12).unwrap();
        assert!((p.kr - q.kr).norm() < 1e-5, "alpha {}: {} vs {}", p.alpha, p.kr, q.kr);
    }
    let e = ellipse_from_alpha(0.04, 3.3, Polarization::Dirichlet).unwrap();
    assert_eq!(a.trajectory.points[4].eccentricity, e.eccentricity);
}

#[test]
fn open_sweep_stays_lossy() {
    let fam = SweepFamily {
        polarization: Polarization::Te,
        ..closed_family()
    };
    let d = disk_find_mode(3, 5, 3.3, Polarization::Te).unwrap();
    let out = sweep_trajectory(&fam, &[0.0, 0.01, 0.02], d.kr, &BemOptions::default()).unwrap();
    assert!((out.trajectory.points[0].kr - d.kr).norm() / d.kr.norm() < 1e-4);
    for p in &out.trajectory.points {
        assert!(p.kr.im <= 0.0);
    }
}

#[test]
fn sweep_grid_validation_and_partial_results() {
    let fam = closed_family();
    let seed = C64::new(j_zero(3, 5) / 3.3, 0.0);
    let err = sweep_trajectory(&fam, &[0.0, 0.05], seed, &BemOptions::default()).unwrap_err();
    assert!(matches!(err.error, SolverError::Invalid(_)));
    let err = sweep_trajectory(&fam, &[0.01, 0.0], seed, &BemOptions::default()).unwrap_err();
    assert!(matches!(err.error, SolverError::Invalid(_)));
    // a seed far from any resonance of this class fails at the first alpha, with the alpha attached
    let bad = sweep_trajectory(
        &fam,
        &[0.0, 0.01],
        seed,
        &BemOptions {
            search_radius: 1e-9,
            ..Default::default()
        },
    );
    if let Err(f) = bad {
        match f.error {
            SolverError::Continuation { alpha, .. } => {
                let idx = [0.0, 0.01].iter().position(|&a| a == alpha).unwrap();
                assert_eq!(f.partial.trajectory.points.len(), idx);
            }
            e => panic!("{e:?}"),
        }
    }
}

#[test]
fn collisions_are_reported() {
    let fam = closed_family();
    let seed = C64::new(j_zero(3, 5) / 3.3, 0.0);
    let a = sweep_trajectory(&fam, &[0.0], seed, &BemOptions::default()).unwrap();
    let b = sweep_trajectory(&fam, &[0.0], seed + 0.001, &BemOptions::default()).unwrap();
    let err = check_collisions(&[(fam.symmetry, &a.trajectory), (fam.symmetry, &b.trajectory)], 1e-8).unwrap_err();
    assert!(matches!(err, SolverError::Collision { first: 0, second: 1, .. }));
    let other = Symmetry::Parity { px: 1, py: 1 };
    assert!(check_collisions(&[(fam.symmetry, &a.trajectory), (other, &b.trajectory)], 1e-8).is_ok());
}

#[test]
fn cache_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let shape = circle(Polarization::Te);
    let mesh = interior_mesh(&shape, 212).unwrap();
    let d = disk_find_mode(3, 2, 3.3, Polarization::Te).unwrap();
    let field = disk_field(&d, &mesh, StandingPhase::Cos);
    let key = cache_key(&("disk", 3, 2, 3.3, "te", mesh.target));
    assert_eq!(key, cache_key(&("disk", 3, 2, 3.3, "te", mesh.target)));
    assert_ne!(key, cache_key(&("disk", 3, 2, 3.3, "tm", mesh.target)));
    let header = CacheHeader {
        key: key.clone(),
        shape,
        alpha: 0.0,
        polarization: Polarization::Te,
        kr: [d.kr.re, d.kr.im],
        nodes: 0,
        mesh: MeshSpec {
            target: mesh.target,
            n: mesh.n(),
            h: mesh.h,
            offset: mesh.offset,
        },
        quantum_numbers: Some((2, 3)),
        payload: Payload::Field,
        count: 0,
        checksum: String::new(),
        solver_version: SOLVER_VERSION.into(),
    };
    let path = dir.path().join(format!("{key}.mode"));
    let written = write_mode_cache(&path, header, &field).unwrap();
    let (h, f) = read_mode_cache(&path).unwrap();
    assert_eq!(h, written);
    assert_eq!(f, field);
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(read_mode_cache(&path), Err(SolverError::Cache(_))));
}
