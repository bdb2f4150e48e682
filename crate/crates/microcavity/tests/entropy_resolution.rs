use microcavity::entropy::study::StudyOutcome;
use microcavity::entropy::*;
use microcavity::geometry::{interior_mesh, EllipseSpec, Polarization};
use microcavity::solver::disk::{bessel_zeros, disk_intensity, RadialTable};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::{E, PI};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn prob(w: &[f64]) -> ProbabilityField {
    normalize_intensity(w.to_vec()).unwrap()
}

// J_m(x) = (1/π) ∫_0^π cos(mτ - x sin τ) dτ by the trapezoid rule
fn j_integral(m: u32, x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + (m as f64 * PI).cos());
    for k in 1..n {
        let t = k as f64 * h;
        s += (m as f64 * t - x * t.sin()).cos();
    }
    s * h / PI
}

fn j_zero(m: u32, ell: u32) -> f64 {
    let (mut count, mut x, step) = (0, 0.5, 0.02);
    loop {
        if j_integral(m, x).signum() != j_integral(m, x + step).signum() {
            count += 1;
            if count == ell {
                let (mut lo, mut hi) = (x, x + step);
                for _ in 0..60 {
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
        x += step;
    }
}

/// log(area) + ∫ f log f dA for f ∝ J_m(x r)² cos²(mθ) on the unit disk.
fn dse_limit(m: u32, x: f64) -> f64 {
    let n = 8000;
    let h = 1.0 / n as f64;
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let mut s = f(0.0) + f(1.0);
        for k in 1..n {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let j2: Vec<f64> = (0..=n).map(|k| j_integral(m, x * k as f64 * h).powi(2)).collect();
    let at = |r: f64| j2[(r / h).round() as usize];
    let z = simpson(&|r| at(r) * r);
    let radial = simpson(&|r| {
        let g = at(r) / z;
        if g > 0.0 {
            g * g.ln() * r
        } else {
            0.0
        }
    });
    // ∫_0^{2π} (cos²/π) log(cos²/π) dθ = 1 - 2 log 2 - log π
    let angular = 1.0 - 2.0 * 2f64.ln() - PI.ln();
    PI.ln() + radial + angular
}

fn disk_outcome(m: u32, ell: u32, schedule: Schedule) -> (DiskStudy, StudyOutcome) {
    let x = bessel_zeros(m, ell as usize)[ell as usize - 1];
    let study = DiskStudy::new(m, ell, c(x), 32).unwrap();
    let cfg = StudyConfig {
        schedule,
        ..StudyConfig::default()
    };
    let outcome = run_ensemble_study(&study, &cfg).unwrap();
    (study, outcome)
}

#[test]
fn normalize_examples() {
    let p = normalize(&[c(2.0); 5]).unwrap();
    assert!(p.rho().iter().all(|&r| (r - 0.2).abs() < 1e-15));

    let f = [C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 3.0)];
    let scaled: Vec<C64> = f.iter().map(|v| v * C64::new(-2.5, 0.7)).collect();
    let (a, b) = (normalize(&f).unwrap(), normalize(&scaled).unwrap());
    for (x, y) in a.rho().iter().zip(b.rho()) {
        assert!((x - y).abs() < 1e-15);
    }

    let p = normalize(&[c(0.0), C64::new(0.0, -4.0), c(0.0)]).unwrap();
    assert_eq!(p.rho(), &[0.0, 1.0, 0.0]);

    assert_eq!(normalize(&[c(0.0); 4]), Err(EntropyError::DegenerateField));
}

#[test]
fn entropy_examples() {
    let s = shannon_entropy(&prob(&[1.0; 98]));
    assert!((s - 98f64.ln()).abs() < 1e-12);
    assert!((s - 4.58497).abs() < 1e-5);
    assert_eq!(shannon_entropy(&prob(&[0.0, 0.0, 7.0])), 0.0);
    assert!((shannon_entropy(&prob(&[0.5, 0.0, 0.5, 0.0])) - 2f64.ln()).abs() < 1e-15);
}

#[test]
fn dse_examples() {
    let s = shannon_entropy(&prob(&[1.0; 64]));
    assert!(dse(s, 64).unwrap().abs() < 1e-12);
    assert!(matches!(dse(5.0, 98), Err(EntropyError::InvariantViolation { .. })));
}

#[test]
fn saturation_examples() {
    let flat = [(10, 0.5), (20, 0.5), (30, 0.5), (40, 0.5)];
    let s = detect_saturation(&flat, 1e-5).unwrap();
    assert_eq!((s.n_ref, s.saturated), (20, true));

    // differences 1e-3, 1e-4, 1e-6, 1e-7: first below threshold at step 2
    let d = [(10, 1.0), (20, 1.001), (30, 1.0011), (40, 1.001101), (50, 1.0011011)];
    let s = detect_saturation(&d, 1e-5).unwrap();
    assert_eq!((s.n_ref, s.index), (40, 3));

    let growing = [(10, 0.1), (20, 0.2), (30, 0.3)];
    let s = detect_saturation(&growing, 1e-5).unwrap();
    assert_eq!((s.n_ref, s.saturated), (30, false));

    assert!(detect_saturation(&[(10, 0.1), (20, 0.2)], 1e-5).is_err());
}

#[test]
fn expected_curve_examples() {
    assert!((expected_curve(500, 0.0).unwrap() - 500f64.ln()).abs() < 1e-15);
    let s_ref = 6.3;
    let e = expected_curve(3492, 3492f64.ln() - s_ref).unwrap();
    assert!((e - s_ref).abs() < 1e-12);
    assert!(expected_curve(2, 5.0).is_err());
}

#[test]
fn chi_square_examples() {
    let o = vec![1.5, 2.5, 3.0];
    assert_eq!(chi_square(&ChiSquareInput::new(o.clone(), o).unwrap()), 0.0);
    let x = ChiSquareInput::new(vec![2.0, 3.0], vec![1.0, 1.0]).unwrap();
    assert_eq!(chi_square(&x), 5.0);
    assert_eq!(x.n_pop(), 2);
    assert!(ChiSquareInput::new(vec![1.0], vec![0.0]).is_err());
    assert!(ChiSquareInput::new(vec![1.0, 2.0], vec![1.0]).is_err());
}

#[test]
fn knee_examples() {
    let zero = [(98, 0.0), (212, 0.0), (398, 0.0), (596, 0.0)];
    for half_window in [0, 3] {
        let opts = KneeOptions {
            tau: 1e-5,
            scale: KneeScale::Absolute,
            half_window,
        };
        assert_eq!(detect_n_o(&zero, &opts).unwrap(), 98);
    }

    let opts = KneeOptions {
        tau: 1e-5,
        scale: KneeScale::Absolute,
        half_window: 0,
    };
    // slopes 1e-3, 1e-4, 1e-6: knee at the third point
    let chi = [(100, 1.0), (200, 0.9), (300, 0.89), (400, 0.8899)];
    assert_eq!(detect_n_o(&chi, &opts).unwrap(), 300);
    assert!(detect_n_o(&chi[..3], &opts).is_err());
    let steep = [(100, 4.0), (200, 3.0), (300, 2.0), (400, 1.0)];
    assert!(matches!(detect_n_o(&steep, &opts), Err(EntropyError::NotResolved { .. })));

    // wavenumber scaling multiplies the slope by (nkR)^4
    let scaled = KneeOptions {
        scale: KneeScale::Wavenumber { nkr_sq: 10.0 },
        ..opts
    };
    assert_eq!(detect_n_o(&chi, &scaled).err(), Some(EntropyError::NotResolved { tau: 1e-5 }));
}

#[test]
fn scaling_examples() {
    let n = 3.3;
    let reference: Vec<(f64, f64)> = [(2.8, 212.0), (5.8, 810.0), (11.0, 2952.0), (16.0, 6180.0)]
        .iter()
        .map(|&(kr, n_o)| (n * kr, n_o))
        .collect();
    let fit = fit_scaling(&reference).unwrap();
    assert!((fit.coefficient - 2.2).abs() <= 0.2, "c = {}", fit.coefficient);

    let one = fit_scaling(&[(10.0, 220.0)]).unwrap();
    assert!((one.coefficient - 2.2).abs() < 1e-14);
    assert!(one.residual < 1e-14);

    let twice = fit_scaling(&[(7.0, 100.0), (7.0, 100.0)]).unwrap();
    assert!(twice.residual < 1e-14);
}

#[test]
fn extraction_on_single_field() {
    let shape = EllipseSpec::circle(2.0, Polarization::Dirichlet).unwrap();
    let x = j_zero(3, 5);
    let table = RadialTable::new(3, c(x));
    let mesh = interior_mesh(&shape, 3492).unwrap();
    let p = normalize_intensity(disk_intensity(&table, &mesh.points, 0.0)).unwrap();
    let q = extract_quantum_numbers(&p, &mesh).unwrap();
    assert_eq!((q.ell, q.m), (5, 3));
    assert!(q.identified && q.ratio > E);
}

#[test]
fn identification_across_resolutions() {
    let (_, out) = disk_outcome(
        3,
        5,
        Schedule::Explicit {
            points: vec![212, 398, 810, 1480, 3492],
        },
    );
    let id = |n: usize| {
        let l = out.levels.iter().find(|l| l.target == n).unwrap();
        l.identification.unwrap()
    };
    assert!(id(3492).identified);
    assert!(matches!(&out.levels[4].quantum, Some(Ok(q)) if (q.ell, q.m) == (5, 3)));
    let barely = id(810);
    assert!(barely.ratio > E && barely.ratio < 3.0 * E, "ratio at 810 = {}", barely.ratio);
    assert!(!id(212).identified, "ratio at 212 = {}", id(212).ratio);
}

#[test]
fn disk_dse_limit_and_saturation() {
    let x = j_zero(3, 5);
    assert!((x - bessel_zeros(3, 5)[4]).abs() < 1e-9);
    let limit = dse_limit(3, x);
    let (study, out) = disk_outcome(3, 5, StudyConfig::default().schedule);
    assert!(out.saturation.saturated);
    let levels = &out.levels;
    let top = &levels[out.saturation.index];
    assert!((top.mean_dse - limit).abs() < 1e-3, "D_SE {} vs limit {limit}", top.mean_dse);

    let last = (levels[levels.len() - 1].mean_dse - levels[levels.len() - 2].mean_dse).abs();
    assert!(last < 1e-5 && last > 1e-8, "last D_SE step {last}");

    // χ² vanishes at the reference by construction
    let min_e = top
        .samples
        .iter()
        .map(|s| s.s)
        .fold(f64::INFINITY, f64::min);
    let bound = study.population() as f64 * 1e-10 / min_e;
    assert!(top.chi2.unwrap() < bound);

    for l in levels {
        for s in &l.samples {
            assert!(s.s <= (s.n as f64).ln() + 1e-12);
        }
    }
}

#[test]
fn report_fields_are_consistent() {
    let (study, out) = disk_outcome(3, 2, StudyConfig::default().schedule);
    let r = ResolutionReport::from_outcome("disk-m3-l2", Some((2, 3)), [9.42, -0.37], "test", &study, &out);
    let n_o = r.n_o.unwrap();
    assert!(n_o <= r.n_ref);
    assert_eq!(r.extracted_at_n_ref, Some((2, 3)));
    for row in r.rows.iter().filter(|row| row.identified) {
        assert!(row.ratio.unwrap() > E);
    }
    let mut csv = Vec::new();
    r.write_chi_csv(&mut csv, true).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("mode_id,N,chi2\n"));
    assert_eq!(text.lines().count(), 1 + out.saturation.index + 1);
}

proptest! {
    #[test]
    fn entropy_bounds(w in prop::collection::vec(0.0f64..10.0, 1..200)) {
        prop_assume!(w.iter().any(|&v| v > 0.0));
        let p = prob(&w);
        let s = shannon_entropy(&p);
        let log_n = (w.len() as f64).ln();
        prop_assert!(s >= 0.0 && s <= log_n + 1e-12);
        prop_assert!((p.rho().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(dse(s, w.len()).unwrap() >= 0.0);
    }

    #[test]
    fn max_entropy_only_for_uniform(n in 2usize..300, k in 0usize..300, bump in 1e-3f64..1.0) {
        let mut w = vec![1.0; n];
        prop_assert!((shannon_entropy(&prob(&w)) - (n as f64).ln()).abs() < 1e-12);
        w[k % n] += bump;
        prop_assert!(shannon_entropy(&prob(&w)) < (n as f64).ln() - 1e-12 * bump);
    }

    #[test]
    fn permutation_invariance(w in prop::collection::vec(0.01f64..5.0, 2..100), seed in any::<u64>()) {
        let mut v = w.clone();
        let mut state = seed | 1;
        for i in (1..v.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            v.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let (a, b) = (shannon_entropy(&prob(&w)), shannon_entropy(&prob(&v)));
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((dse(a, w.len()).unwrap() - dse(b, v.len()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn normalize_scale_invariance(
        re in prop::collection::vec(-3.0f64..3.0, 1..50),
        scale in 1e-3f64..1e3,
        phase in 0.0f64..6.3,
    ) {
        let f: Vec<C64> = re.iter().enumerate().map(|(i, &r)| C64::new(r, 0.1 * i as f64)).collect();
        let g: Vec<C64> = f.iter().map(|v| v * C64::from_polar(scale, phase)).collect();
        let (a, b) = (normalize(&f).unwrap(), normalize(&g).unwrap());
        for (x, y) in a.rho().iter().zip(b.rho()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_square_nonnegative(pairs in prop::collection::vec((0.1f64..10.0, 0.1f64..10.0), 1..30)) {
        let (o, e): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let same = o == e;
        let x = chi_square(&ChiSquareInput::new(o, e).unwrap());
        prop_assert!(x >= 0.0);
        prop_assert_eq!(same, x == 0.0);
    }

    #[test]
    fn scaling_recovers_exact_parabola(c0 in 0.5f64..5.0, xs in prop::collection::vec(1.0f64..60.0, 2..8)) {
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, c0 * x * x)).collect();
        let fit = fit_scaling(&pts).unwrap();
        prop_assert!((fit.coefficient - c0).abs() < 1e-10 * c0);
        prop_assert!(fit.residual < 1e-10);
    }
}
