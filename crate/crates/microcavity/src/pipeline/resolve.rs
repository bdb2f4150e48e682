//! `resolve`, `fit-scaling` and `report`.

use super::disk::cached_disk_kr;
use super::ellipse::{cached_sweep, mode_id as ellipse_id, EllipseStudy};
use super::svg::{Plot, Series, Style};
use super::{fmt_f64, DiskField, ModeSeed, Outputs, Pipeline, PipelineError, StageOutcome};
use crate::entropy::report::ResolutionReport;
use crate::entropy::{run_ensemble_study, DiskStudy, FieldSource, ScalingFit};
use crate::solver::disk::bessel_zeros;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::atomic::Ordering;

fn analysis(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Analysis(e.to_string())
}

fn disk_argument(p: &Pipeline, seed: ModeSeed, kr: C64) -> C64 {
    match p.config.disk.field {
        DiskField::Closed => C64::new(bessel_zeros(seed.m, seed.ell as usize)[seed.ell as usize - 1], 0.0),
        DiskField::Solved => p.config.disk.refractive_index * kr,
    }
}

fn resolve_disk(p: &Pipeline, seed: ModeSeed) -> Result<ResolutionReport, PipelineError> {
    let kr = cached_disk_kr(p, seed)?;
    let d = &p.config.disk;
    let study = DiskStudy::new(seed.m, seed.ell, disk_argument(p, seed, kr), d.ensemble).map_err(analysis)?;
    let outcome = run_ensemble_study(&study, &p.config.study(&d.schedule)).map_err(analysis)?;
    let nkr = d.refractive_index * kr;
    let ensemble = format!("disk lattice/orientation R3 x{} ({:?} field)", d.ensemble, d.field).to_lowercase();
    let report = ResolutionReport::from_outcome(
        &seed.id("disk"),
        Some((seed.ell, seed.m)),
        [nkr.re, nkr.im],
        &ensemble,
        &study,
        &outcome,
    );
    Ok(report)
}

struct EllipseResult {
    report: ResolutionReport,
    hits: usize,
    misses: usize,
}

fn resolve_ellipse(p: &Pipeline) -> Result<Option<EllipseResult>, PipelineError> {
    let Some(cfg) = &p.config.ellipse else {
        return Ok(None);
    };
    let Some((_, modes)) = cached_sweep(cfg, p.cache_dir())? else {
        return Err(PipelineError::Analysis(format!(
            "no cached ellipse sweep for {} in {}; run `microcavity sweep-ellipse` with the same config first",
            ellipse_id(cfg),
            p.cache_dir().display()
        )));
    };
    let study = EllipseStudy::new(cfg, p.cache_dir(), modes);
    let outcome = run_ensemble_study(&study, &p.config.study(&cfg.schedule)).map_err(analysis)?;
    let nkr = study.nkr();
    let report = ResolutionReport::from_outcome(
        &ellipse_id(cfg),
        Some((cfg.mode.ell, cfg.mode.m)),
        [nkr.re, nkr.im],
        &format!("ellipse sweep over {} alpha values", study.population()),
        &study,
        &outcome,
    );
    Ok(Some(EllipseResult {
        report,
        hits: study.hits.load(Ordering::Relaxed),
        misses: study.misses.load(Ordering::Relaxed),
    }))
}

fn resolution_csv(reports: &[&ResolutionReport]) -> String {
    let mut s = String::from("mode_id,N,mean_S,mean_logN,mean_DSE,chi2,ratio,identified\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in reports {
        for row in &r.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.mode_id,
                row.n,
                fmt_f64(row.mean_s),
                fmt_f64(row.mean_log_n),
                fmt_f64(row.mean_dse),
                opt(row.chi2),
                opt(row.ratio),
                row.identified
            ));
        }
    }
    s
}

fn csv_of(
    reports: &[&ResolutionReport],
    header: &str,
    f: impl Fn(&ResolutionReport, &mut Vec<u8>) -> std::io::Result<()>,
) -> Vec<u8> {
    let mut buf = format!("{header}\n").into_bytes();
    for r in reports {
        f(r, &mut buf).expect("writing to memory");
    }
    buf
}

/// Local extrema of S(ε) per N along the sweep.
fn entropy_extrema(report: &ResolutionReport) -> String {
    let mut by_n: BTreeMap<usize, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (row, e) in report.rows.iter().zip(report.entropy_rows.chunks(report.n_pop.max(1))) {
        by_n.insert(row.n, e.iter().map(|r| (r.alpha, r.eps, r.s)).collect());
    }
    let mut s = String::from("N,kind,alpha,eps,S\n");
    for (n, pts) in by_n {
        for i in 1..pts.len().saturating_sub(1) {
            let (a, b, c) = (pts[i - 1].2, pts[i].2, pts[i + 1].2);
            let kind = if b > a && b > c {
                "max"
            } else if b < a && b < c {
                "min"
            } else {
                continue;
            };
            s.push_str(&format!("{n},{kind},{},{},{}\n", fmt_f64(pts[i].0), fmt_f64(pts[i].1), fmt_f64(pts[i].2)));
        }
    }
    s
}

fn fig2(r: &ResolutionReport, sweep: bool) -> String {
    let mut series = Vec::new();
    if sweep {
        for (row, e) in r.rows.iter().zip(r.entropy_rows.chunks(r.n_pop.max(1))) {
            series.push(Series {
                label: format!("S, N={}", row.n),
                points: e.iter().map(|x| (x.eps, x.s)).collect(),
                style: Style::LineMarkers,
            });
            series.push(Series {
                label: format!("log N, N={}", row.n),
                points: e.iter().map(|x| (x.eps, (x.n as f64).ln())).collect(),
                style: Style::Dashed,
            });
        }
    } else {
        series.push(Series {
            label: "mean S".into(),
            points: r.rows.iter().map(|x| (x.n as f64, x.mean_s)).collect(),
            style: Style::LineMarkers,
        });
        series.push(Series {
            label: "mean log N".into(),
            points: r.rows.iter().map(|x| (x.n as f64, x.mean_log_n)).collect(),
            style: Style::Dashed,
        });
    }
    Plot {
        title: format!("{}: Shannon entropy and maximal entropy", r.mode_id),
        x_label: if sweep { "eccentricity" } else { "N" }.into(),
        y_label: "entropy".into(),
        log_y: false,
        series,
    }
    .render()
}

fn fig3(r: &ResolutionReport, sweep: bool) -> String {
    let series = if sweep {
        r.rows
            .iter()
            .zip(r.entropy_rows.chunks(r.n_pop.max(1)))
            .map(|(row, e)| Series {
                label: format!("N={}", row.n),
                points: e.iter().map(|x| (x.eps, (x.n as f64).ln() - x.s)).collect(),
                style: Style::LineMarkers,
            })
            .collect()
    } else {
        vec![Series {
            label: "mean D_SE".into(),
            points: r.rows.iter().map(|x| (x.n as f64, x.mean_dse)).collect(),
            style: Style::LineMarkers,
        }]
    };
    Plot {
        title: format!("{}: D_SE, N_ref = {}", r.mode_id, r.n_ref),
        x_label: if sweep { "eccentricity" } else { "N" }.into(),
        y_label: "log N - S".into(),
        log_y: false,
        series,
    }
    .render()
}

fn fig5(r: &ResolutionReport) -> String {
    let chi: Vec<(f64, f64)> = r.rows.iter().filter_map(|x| x.chi2.map(|c| (x.n as f64, c))).collect();
    let mut series = vec![Series {
        label: "chi2".into(),
        points: chi.clone(),
        style: Style::LineMarkers,
    }];
    if let Some(n_o) = r.n_o {
        series.push(Series {
            label: format!("N_O = {n_o}"),
            points: chi.iter().filter(|p| p.0 == n_o as f64).copied().collect(),
            style: Style::Markers,
        });
    }
    Plot {
        title: format!("{}: chi-square against the saturated curve", r.mode_id),
        x_label: "N".into(),
        y_label: "chi2".into(),
        log_y: true,
        series,
    }
    .render()
}

fn fig6a(reports: &[&ResolutionReport]) -> String {
    let series = reports
        .iter()
        .map(|r| {
            let u = r.nkr[0] * r.nkr[0];
            let k = r.n_pop as f64;
            Series {
                label: r.mode_id.clone(),
                points: r
                    .rows
                    .iter()
                    .filter_map(|x| x.chi2.map(|c| (x.n as f64 / u, c / k * u)))
                    .collect(),
                style: Style::LineMarkers,
            }
        })
        .collect();
    Plot {
        title: "Disk modes: scaled chi-square per member".into(),
        x_label: "N / (nkR)^2".into(),
        y_label: "chi2 (nkR)^2".into(),
        log_y: true,
        series,
    }
    .render()
}

fn write_report(out: &Outputs, r: &ResolutionReport, sweep: bool) -> Result<(), PipelineError> {
    out.write_json(&format!("report-{}.json", r.mode_id), r)?;
    out.write(&format!("fig2-{}.svg", r.mode_id), fig2(r, sweep).as_bytes())?;
    out.write(&format!("fig3-{}.svg", r.mode_id), fig3(r, sweep).as_bytes())?;
    out.write(&format!("fig5-{}.svg", r.mode_id), fig5(r).as_bytes())?;
    if sweep {
        out.write(&format!("extrema-{}.csv", r.mode_id), entropy_extrema(r).as_bytes())?;
    }
    Ok(())
}

pub fn resolve(p: &Pipeline, out: &Outputs) -> Result<StageOutcome, PipelineError> {
    let seeds = &p.config.disk.modes;
    let disk: Vec<Result<ResolutionReport, PipelineError>> =
        seeds.par_iter().map(|&s| resolve_disk(p, s)).collect();
    let ellipse = resolve_ellipse(p);

    let mut failures = Vec::new();
    let mut disk_reports = Vec::new();
    for (seed, r) in seeds.iter().zip(disk) {
        match r {
            Ok(report) => {
                write_report(out, &report, false)?;
                disk_reports.push(report);
            }
            Err(e) => {
                eprintln!("resolve: {}: {e}", seed.id("disk"));
                failures.push(e);
            }
        }
    }
    let mut outcome = StageOutcome::default();
    let mut ellipse_report = None;
    match ellipse {
        Ok(Some(res)) => {
            write_report(out, &res.report, true)?;
            outcome.cache_hits = res.hits;
            outcome.cache_misses = res.misses;
            ellipse_report = Some(res.report);
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("resolve: ellipse: {e}");
            failures.push(e);
        }
    }

    let all: Vec<&ResolutionReport> = disk_reports.iter().chain(ellipse_report.as_ref()).collect();
    out.write("entropy.csv", &csv_of(&all, "mode_id,alpha,eps,N,S,logN,DSE", |r, w| r.write_entropy_csv(w, false)))?;
    out.write("chi2.csv", &csv_of(&all, "mode_id,N,chi2", |r, w| r.write_chi_csv(w, false)))?;
    out.write("resolution.csv", resolution_csv(&all).as_bytes())?;
    let disk_refs: Vec<&ResolutionReport> = disk_reports.iter().collect();
    out.write("fig6a.svg", fig6a(&disk_refs).as_bytes())?;

    if !failures.is_empty() {
        let total = seeds.len() + usize::from(p.config.ellipse.is_some());
        outcome.error = Some(if failures.iter().all(|e| matches!(e, PipelineError::Io(_))) {
            failures.remove(0)
        } else {
            PipelineError::Analysis(format!("{} of {total} modes failed; first: {}", failures.len(), failures[0].detail()))
        });
    }
    Ok(outcome)
}

fn read_report(p: &Pipeline, id: &str) -> Result<serde_json::Value, PipelineError> {
    let path = p.out_dir().join(format!("report-{id}.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| {
        PipelineError::Analysis(format!("{}: {e}; run `microcavity resolve` with the same config first", path.display()))
    })?;
    serde_json::from_str(&text).map_err(|e| analysis(format!("{}: {e}", path.display())))
}

/// (nkR, N_O) pairs used by the scaling fit.
pub fn scaling_points(p: &Pipeline) -> Result<Vec<(f64, f64)>, PipelineError> {
    if let Some(points) = &p.config.scaling_points {
        return Ok(points.clone());
    }
    let mut points = Vec::new();
    for seed in &p.config.disk.modes {
        let r = read_report(p, &seed.id("disk"))?;
        let nkr = r["nkr"][0].as_f64();
        match (nkr, r["n_o"].as_u64()) {
            (Some(x), Some(n)) => points.push((x, n as f64)),
            _ => eprintln!("fit-scaling: {} has no N_O; skipped", seed.id("disk")),
        }
    }
    Ok(points)
}

#[derive(Serialize, Deserialize)]
struct ScalingJson {
    c: f64,
    residual: f64,
    points: Vec<(f64, f64)>,
}

pub fn fit_scaling(p: &Pipeline, out: &Outputs) -> Result<StageOutcome, PipelineError> {
    let points = scaling_points(p)?;
    if points.len() < 2 {
        return Err(PipelineError::Analysis(format!(
            "scaling fit needs at least 2 (nkR, N_O) points, have {}",
            points.len()
        )));
    }
    let fit: ScalingFit = crate::entropy::fit_scaling(&points).map_err(analysis)?;
    out.write_json(
        "scaling.json",
        &ScalingJson {
            c: fit.coefficient,
            residual: fit.residual,
            points: fit.points.clone(),
        },
    )?;
    let x_max = points.iter().map(|p| p.0 * p.0).fold(0.0, f64::max);
    let plot = Plot {
        title: format!("N_O = {:.3} (nkR)^2", fit.coefficient),
        x_label: "(nkR)^2".into(),
        y_label: "N_O".into(),
        log_y: false,
        series: vec![
            Series {
                label: "N_O".into(),
                points: points.iter().map(|p| (p.0 * p.0, p.1)).collect(),
                style: Style::Markers,
            },
            Series {
                label: "fit".into(),
                points: vec![(0.0, 0.0), (x_max, fit.coefficient * x_max)],
                style: Style::Line,
            },
        ],
    };
    out.write("scaling.svg", plot.render().as_bytes())?;
    Ok(StageOutcome::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode_id: String,
    pub nkr: [f64; 2],
    pub n_ref: usize,
    pub saturated: bool,
    pub n_o: Option<usize>,
    pub n_identified: Option<usize>,
    pub ratio_at_n_o: Option<f64>,
    pub extracted_at_n_ref: Option<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub modes: Vec<ModeSummary>,
    pub scaling_coefficient: Option<f64>,
}

pub fn report(p: &Pipeline, out: &Outputs) -> Result<StageOutcome, PipelineError> {
    let mut ids: Vec<String> = p.config.disk.modes.iter().map(|s| s.id("disk")).collect();
    ids.extend(p.config.ellipse.as_ref().map(ellipse_id));
    let mut modes = Vec::new();
    let mut missing = Vec::new();
    for id in &ids {
        match read_report(p, id).and_then(|v| serde_json::from_value::<ModeSummary>(v).map_err(analysis)) {
            Ok(m) => modes.push(m),
            Err(e) => missing.push(e.to_string()),
        }
    }
    let scaling_coefficient = std::fs::read_to_string(p.out_dir().join("scaling.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<ScalingJson>(&t).ok())
        .map(|s| s.c);
    let summary = Summary {
        config_hash: p.config.hash(),
        modes,
        scaling_coefficient,
    };
    out.write_json("summary.json", &summary)?;

    let show = |v: Option<usize>| v.map_or("-".to_string(), |n| n.to_string());
    println!("{:<18} {:>18} {:>8} {:>8} {:>8} {:>8}", "mode", "nkR", "N_ref", "N_O", "N_id", "(l,m)");
    for m in &summary.modes {
        println!(
            "{:<18} {:>18} {:>7}{} {:>8} {:>8} {:>8}",
            m.mode_id,
            format!("{:.4}{:+.4}i", m.nkr[0], m.nkr[1]),
            m.n_ref,
            if m.saturated { " " } else { "*" },
            show(m.n_o),
            show(m.n_identified),
            m.extracted_at_n_ref.map_or("-".to_string(), |(l, m)| format!("({l},{m})"))
        );
    }
    if let Some(c) = scaling_coefficient {
        println!("N_O = {c:.3} (nkR)^2");
    }
    let mut outcome = StageOutcome::default();
    if !missing.is_empty() {
        outcome.error = Some(PipelineError::Analysis(missing.join("; ")));
    }
    Ok(outcome)
}
