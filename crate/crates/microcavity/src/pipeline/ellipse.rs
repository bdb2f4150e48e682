//! `sweep-ellipse`: BEM continuation over the deformation grid, and the ellipse
//! field source used by `resolve`.

use super::disk::mesh_spec;
use super::svg::{Plot, Series, Style};
use super::{fmt_f64, io_error, EllipseConfig, Outputs, Pipeline, PipelineError, StageOutcome};
use crate::entropy::study::FieldSource;
use crate::entropy::EntropyError;
use crate::geometry::{boundary_nodes, ellipse_from_alpha, interior_mesh, InteriorMesh};
use crate::solver::bem::{bem_field, BemMode, BemOptions};
use crate::solver::cache::{cache_key, read_mode_cache, write_mode_cache, CacheHeader, MeshSpec, Payload, SOLVER_VERSION};
use crate::solver::disk::bessel_zeros;
use crate::solver::{disk_find_mode, sweep_trajectory, SweepFamily, Trajectory};
use crate::geometry::Polarization;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

pub fn mode_id(cfg: &EllipseConfig) -> String {
    cfg.mode.id("ellipse")
}

fn family(cfg: &EllipseConfig) -> SweepFamily {
    SweepFamily {
        refractive_index: cfg.refractive_index,
        polarization: cfg.polarization,
        symmetry: cfg.symmetry,
        points_per_wavelength: cfg.points_per_wavelength,
    }
}

/// Starting kR on the circle.
pub fn sweep_seed(cfg: &EllipseConfig) -> Result<C64, PipelineError> {
    if let Some([re, im]) = cfg.seed_kr {
        return Ok(C64::new(re, im));
    }
    let (m, ell) = (cfg.mode.m, cfg.mode.ell);
    if cfg.polarization == Polarization::Dirichlet {
        let j = bessel_zeros(m, ell as usize)[ell as usize - 1];
        return Ok(C64::new(j / cfg.refractive_index, 0.0));
    }
    disk_find_mode(m, ell, cfg.refractive_index, cfg.polarization)
        .map(|d| d.kr)
        .map_err(|e| PipelineError::Solver(format!("circle seed (m={m}, ell={ell}): {e}")))
}

#[derive(Serialize)]
struct SweepKey<'a> {
    kind: &'a str,
    family: SweepFamily,
    alphas: &'a [f64],
    seed: [f64; 2],
    options: BemOptions,
    solver_version: &'a str,
}

#[derive(Serialize)]
struct PointKey<'a> {
    kind: &'a str,
    sweep: &'a str,
    shape: crate::geometry::EllipseSpec,
    alpha: f64,
    seed: [f64; 2],
    nodes: usize,
    solver_version: &'a str,
}

#[derive(Serialize)]
struct FieldKey<'a> {
    kind: &'a str,
    point: &'a str,
    mesh: MeshSpec,
    solver_version: &'a str,
}

/// Cached sweep: trajectory plus one boundary-density file per alpha.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepIndex {
    pub key: String,
    pub trajectory: Trajectory,
    pub point_keys: Vec<String>,
}

fn sweep_key(cfg: &EllipseConfig, seed: C64) -> String {
    cache_key(&SweepKey {
        kind: "sweep",
        family: family(cfg),
        alphas: &cfg.alphas.values(),
        seed: [seed.re, seed.im],
        options: BemOptions::default(),
        solver_version: SOLVER_VERSION,
    })
}

fn index_path(cache: &Path, key: &str) -> PathBuf {
    cache.join(format!("sweep-{key}.json"))
}

fn point_path(cache: &Path, key: &str) -> PathBuf {
    cache.join(format!("bem-{key}.bin"))
}

fn load_modes(cfg: &EllipseConfig, cache: &Path, index: &SweepIndex) -> Result<Vec<(String, BemMode)>, PipelineError> {
    index
        .trajectory
        .points
        .iter()
        .zip(&index.point_keys)
        .map(|(pt, key)| {
            let path = point_path(cache, key);
            let (h, data) = read_mode_cache(&path).map_err(|e| PipelineError::Analysis(format!("{}: {e}", path.display())))?;
            if h.key != *key || h.payload != Payload::BoundaryDensities || data.len() != 2 * h.nodes {
                return Err(PipelineError::Analysis(format!("{}: stale or foreign cache entry", path.display())));
            }
            let shape = ellipse_from_alpha(pt.alpha, cfg.refractive_index, cfg.polarization)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
            let boundary = boundary_nodes(&shape, h.nodes).map_err(|e| PipelineError::Analysis(e.to_string()))?;
            let (u, q) = data.split_at(h.nodes);
            Ok((
                key.clone(),
                BemMode {
                    kr: pt.kr,
                    sigma_min: 0.0,
                    sigma_median: 0.0,
                    shape,
                    boundary,
                    symmetry: cfg.symmetry,
                    u: u.to_vec(),
                    q: q.to_vec(),
                },
            ))
        })
        .collect()
}

/// Cached sweep for the current config, if complete.
pub fn cached_sweep(cfg: &EllipseConfig, cache: &Path) -> Result<Option<(SweepIndex, Vec<(String, BemMode)>)>, PipelineError> {
    let seed = sweep_seed(cfg)?;
    let key = sweep_key(cfg, seed);
    let Ok(text) = std::fs::read_to_string(index_path(cache, &key)) else {
        return Ok(None);
    };
    let Ok(index) = serde_json::from_str::<SweepIndex>(&text) else {
        return Ok(None);
    };
    if index.key != key {
        return Ok(None);
    }
    match load_modes(cfg, cache, &index) {
        Ok(modes) => Ok(Some((index, modes))),
        Err(_) => Ok(None),
    }
}

fn trajectory_csv(t: &Trajectory) -> String {
    let mut s = String::from("alpha,eps,re_kR,im_kR\n");
    for p in &t.points {
        s.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.alpha),
            fmt_f64(p.eccentricity),
            fmt_f64(p.kr.re),
            fmt_f64(p.kr.im)
        ));
    }
    s
}

fn trajectory_svg(id: &str, t: &Trajectory) -> (String, String) {
    let plot = |title: &str, y: &str, f: &dyn Fn(C64) -> f64| {
        Plot {
            title: format!("{id}: {title}"),
            x_label: "eccentricity".into(),
            y_label: y.into(),
            log_y: false,
            series: vec![Series {
                label: id.into(),
                points: t.points.iter().map(|p| (p.eccentricity, f(p.kr))).collect(),
                style: Style::LineMarkers,
            }],
        }
        .render()
    };
    (plot("Re kR", "Re kR", &|k| k.re), plot("Im kR", "Im kR", &|k| k.im))
}

pub fn sweep_ellipse(p: &Pipeline, out: &Outputs) -> Result<StageOutcome, PipelineError> {
    let Some(cfg) = &p.config.ellipse else {
        return Err(PipelineError::Config("config has no `ellipse` section".into()));
    };
    let id = mode_id(cfg);
    let mut outcome = StageOutcome::default();
    let (trajectory, error) = if let Some((index, _)) = cached_sweep(cfg, p.cache_dir())? {
        outcome.cache_hits = index.point_keys.len();
        (index.trajectory, None)
    } else {
        let seed = sweep_seed(cfg)?;
        let key = sweep_key(cfg, seed);
        let alphas = cfg.alphas.values();
        let (output, error) = match sweep_trajectory(&family(cfg), &alphas, seed, &BemOptions::default()) {
            Ok(o) => (o, None),
            Err(f) => (f.partial, Some(PipelineError::Solver(format!("{id}: {}", f.error)))),
        };
        outcome.cache_misses = output.modes.len();
        let mut point_keys = Vec::new();
        for mode in &output.modes {
            let pk = cache_key(&PointKey {
                kind: "bem",
                sweep: &key,
                shape: mode.shape,
                alpha: mode.shape.alpha,
                seed: [seed.re, seed.im],
                nodes: mode.boundary.m(),
                solver_version: SOLVER_VERSION,
            });
            let header = CacheHeader {
                key: pk.clone(),
                shape: mode.shape,
                alpha: mode.shape.alpha,
                polarization: mode.shape.polarization,
                kr: [mode.kr.re, mode.kr.im],
                nodes: mode.boundary.m(),
                mesh: MeshSpec {
                    target: 0,
                    n: 0,
                    h: 0.0,
                    offset: [0.0, 0.0],
                },
                quantum_numbers: (mode.shape.alpha == 0.0).then_some((cfg.mode.ell, cfg.mode.m)),
                payload: Payload::BoundaryDensities,
                count: 0,
                checksum: String::new(),
                solver_version: SOLVER_VERSION.into(),
            };
            let data: Vec<C64> = mode.u.iter().chain(&mode.q).copied().collect();
            write_mode_cache(&point_path(p.cache_dir(), &pk), header, &data).map_err(|e| PipelineError::Io(e.to_string()))?;
            point_keys.push(pk);
        }
        if error.is_none() {
            let index = SweepIndex {
                key: key.clone(),
                trajectory: output.trajectory.clone(),
                point_keys,
            };
            let path = index_path(p.cache_dir(), &key);
            let text = serde_json::to_vec_pretty(&index).map_err(|e| PipelineError::Io(e.to_string()))?;
            std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        }
        (output.trajectory, error)
    };
    out.write(&format!("trajectory-{id}.csv"), trajectory_csv(&trajectory).as_bytes())?;
    let (re, im) = trajectory_svg(&id, &trajectory);
    out.write(&format!("fig1a-{id}.svg"), re.as_bytes())?;
    out.write(&format!("fig1b-{id}.svg"), im.as_bytes())?;
    outcome.error = error;
    Ok(outcome)
}

/// Ellipse-sweep ensemble: one member per alpha, fields from the cached boundary densities.
pub struct EllipseStudy {
    modes: Vec<(String, BemMode)>,
    cache: PathBuf,
    expected: (u32, u32),
    identify_max_alpha: f64,
    pub hits: AtomicUsize,
    pub misses: AtomicUsize,
}

impl EllipseStudy {
    pub fn new(cfg: &EllipseConfig, cache: &Path, modes: Vec<(String, BemMode)>) -> Self {
        Self {
            modes,
            cache: cache.to_path_buf(),
            expected: (cfg.mode.ell, cfg.mode.m),
            identify_max_alpha: cfg.identify_max_alpha,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        }
    }

    /// n·kR of the first (least deformed) member.
    pub fn nkr(&self) -> C64 {
        let m = &self.modes[0].1;
        m.shape.refractive_index * m.kr
    }

    fn field(&self, sample: usize, mesh: &InteriorMesh) -> Result<Vec<C64>, EntropyError> {
        let (point, mode) = &self.modes[sample];
        let key = cache_key(&FieldKey {
            kind: "field",
            point,
            mesh: mesh_spec(mesh),
            solver_version: SOLVER_VERSION,
        });
        let path = self.cache.join(format!("field-{key}.bin"));
        if let Ok((h, field)) = read_mode_cache(&path) {
            if h.key == key && field.len() == mesh.n() {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(field);
            }
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let field = bem_field(mode, mesh);
        let header = CacheHeader {
            key,
            shape: mode.shape,
            alpha: mode.shape.alpha,
            polarization: mode.shape.polarization,
            kr: [mode.kr.re, mode.kr.im],
            nodes: mode.boundary.m(),
            mesh: mesh_spec(mesh),
            quantum_numbers: None,
            payload: Payload::Field,
            count: 0,
            checksum: String::new(),
            solver_version: SOLVER_VERSION.into(),
        };
        write_mode_cache(&path, header, &field).map_err(|e| EntropyError::Invalid(e.to_string()))?;
        Ok(field)
    }
}

impl FieldSource for EllipseStudy {
    fn population(&self) -> usize {
        self.modes.len()
    }

    fn coordinates(&self, sample: usize) -> (f64, f64) {
        let s = &self.modes[sample].1.shape;
        (s.alpha, s.eccentricity)
    }

    fn intensity(&self, sample: usize, target: usize) -> Result<(InteriorMesh, Vec<f64>), EntropyError> {
        let shape = &self.modes[sample].1.shape;
        let mesh = interior_mesh(shape, target).map_err(|e| EntropyError::Invalid(e.to_string()))?;
        let field = self.field(sample, &mesh)?;
        Ok((mesh, field.iter().map(|v| v.norm_sqr()).collect()))
    }

    fn wavenumber_sq(&self) -> f64 {
        let k = self.nkr().re;
        k * k
    }

    fn expected_quantum_numbers(&self) -> Option<(u32, u32)> {
        Some(self.expected)
    }

    fn identifiable(&self, sample: usize) -> bool {
        self.modes[sample].1.shape.alpha <= self.identify_max_alpha
    }
}
