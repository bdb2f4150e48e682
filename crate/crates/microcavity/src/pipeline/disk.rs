//! `solve-disk`: analytic disk resonances, cached as fields on a reference mesh.

use super::{fmt_f64, ModeSeed, Outputs, Pipeline, PipelineError, StageOutcome};
use crate::geometry::{interior_mesh, EllipseSpec, InteriorMesh, Polarization};
use crate::solver::cache::{cache_key, read_mode_cache, write_mode_cache, CacheHeader, MeshSpec, Payload, SOLVER_VERSION};
use crate::solver::{disk_field, disk_find_mode, StandingPhase};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Serialize)]
struct DiskKey<'a> {
    kind: &'a str,
    m: u32,
    ell: u32,
    refractive_index: f64,
    polarization: Polarization,
    mesh: MeshSpec,
    solver_version: &'a str,
}

pub(crate) fn mesh_spec(mesh: &InteriorMesh) -> MeshSpec {
    MeshSpec {
        target: mesh.target,
        n: mesh.n(),
        h: mesh.h,
        offset: mesh.offset,
    }
}

/// Cache location and key of a disk seed under the current config.
pub fn disk_cache_entry(p: &Pipeline, seed: ModeSeed) -> Result<(PathBuf, String, EllipseSpec, InteriorMesh), PipelineError> {
    let d = &p.config.disk;
    let shape = EllipseSpec::circle(d.refractive_index, d.polarization).map_err(|e| PipelineError::Config(e.to_string()))?;
    let mesh = interior_mesh(&shape, d.cache_mesh).map_err(|e| PipelineError::Config(e.to_string()))?;
    let key = cache_key(&DiskKey {
        kind: "disk",
        m: seed.m,
        ell: seed.ell,
        refractive_index: d.refractive_index,
        polarization: d.polarization,
        mesh: mesh_spec(&mesh),
        solver_version: SOLVER_VERSION,
    });
    Ok((p.cache_dir().join(format!("disk-{key}.bin")), key, shape, mesh))
}

/// Solved kR of a seed from the cache, or an error naming the command that creates it.
pub fn cached_disk_kr(p: &Pipeline, seed: ModeSeed) -> Result<C64, PipelineError> {
    let (path, key, _, _) = disk_cache_entry(p, seed)?;
    match read_mode_cache(&path) {
        Ok((h, _)) if h.key == key => Ok(C64::new(h.kr[0], h.kr[1])),
        _ => Err(PipelineError::Analysis(format!(
            "no cached disk mode (m={}, ell={}) at {}; run `microcavity solve-disk` with the same config first",
            seed.m,
            seed.ell,
            path.display()
        ))),
    }
}

enum Solved {
    Hit(C64),
    Miss(C64),
}

fn solve_one(p: &Pipeline, seed: ModeSeed) -> Result<Solved, PipelineError> {
    let (path, key, shape, mesh) = disk_cache_entry(p, seed)?;
    if let Ok((h, _)) = read_mode_cache(&path) {
        if h.key == key {
            return Ok(Solved::Hit(C64::new(h.kr[0], h.kr[1])));
        }
    }
    let d = &p.config.disk;
    let mode = disk_find_mode(seed.m, seed.ell, d.refractive_index, d.polarization)
        .map_err(|e| PipelineError::Solver(format!("(m={}, ell={}): {e}", seed.m, seed.ell)))?;
    let field = disk_field(&mode, &mesh, StandingPhase::Cos);
    let header = CacheHeader {
        key,
        shape,
        alpha: 0.0,
        polarization: d.polarization,
        kr: [mode.kr.re, mode.kr.im],
        nodes: 0,
        mesh: mesh_spec(&mesh),
        quantum_numbers: Some((seed.ell, seed.m)),
        payload: Payload::Field,
        count: 0,
        checksum: String::new(),
        solver_version: SOLVER_VERSION.into(),
    };
    write_mode_cache(&path, header, &field).map_err(|e| PipelineError::Io(e.to_string()))?;
    Ok(Solved::Miss(mode.kr))
}

pub fn solve_disk(p: &Pipeline, out: &Outputs) -> Result<StageOutcome, PipelineError> {
    let seeds = &p.config.disk.modes;
    let results: Vec<Result<Solved, PipelineError>> = seeds.par_iter().map(|&s| solve_one(p, s)).collect();
    let mut csv = String::from("m,ell,re_kR,im_kR\n");
    let mut outcome = StageOutcome::default();
    let mut failures = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        let kr = match r {
            Ok(Solved::Hit(kr)) => {
                outcome.cache_hits += 1;
                kr
            }
            Ok(Solved::Miss(kr)) => {
                outcome.cache_misses += 1;
                kr
            }
            Err(e) => {
                eprintln!("solve-disk: {e}");
                failures.push(e);
                continue;
            }
        };
        csv.push_str(&format!("{},{},{},{}\n", seed.m, seed.ell, fmt_f64(kr.re), fmt_f64(kr.im)));
    }
    out.write("disk_modes.csv", csv.as_bytes())?;
    if !failures.is_empty() {
        let code_error = failures.iter().find(|e| matches!(e, PipelineError::Solver(_))).cloned();
        let msg = failures.iter().map(|e| e.detail()).collect::<Vec<_>>().join("; ");
        outcome.error = Some(match code_error {
            Some(_) => PipelineError::Solver(format!("{} of {} seeds failed: {msg}", failures.len(), seeds.len())),
            None => failures.remove(0),
        });
    }
    Ok(outcome)
}
