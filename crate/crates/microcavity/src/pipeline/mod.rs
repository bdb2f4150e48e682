//! Batch orchestration: configuration, cached solves, resolution studies, reports and plots.

pub mod config;
pub mod disk;
pub mod ellipse;
pub mod manifest;
pub mod resolve;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

pub use config::{AlphaGrid, DiskConfig, DiskField, EllipseConfig, ModeSeed, RunConfig};
pub use manifest::{FileEntry, Manifest, StageRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("analysis failure: {0}")]
    Analysis(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Solver(_) => 3,
            PipelineError::Analysis(_) | PipelineError::Io(_) => 4,
        }
    }

    /// Message without the category prefix.
    pub fn detail(&self) -> &str {
        match self {
            PipelineError::Config(s) | PipelineError::Solver(s) | PipelineError::Analysis(s) | PipelineError::Io(s) => s,
        }
    }
}

pub(crate) fn io_error(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Files written by one command; each path has a single writer.
#[derive(Debug, Default)]
pub struct Outputs {
    dir: PathBuf,
    written: Mutex<Vec<String>>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Mutex::new(Vec::new()),
        })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, bytes).map_err(|e| io_error(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_error(&path, e))?;
        self.written.lock().expect("output list lock").push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| PipelineError::Io(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn names(&self) -> Vec<String> {
        let mut v = self.written.lock().expect("output list lock").clone();
        v.sort();
        v.dedup();
        v
    }
}

/// Outcome of one command: counts for the manifest plus any failure to report.
#[derive(Debug, Default)]
pub struct StageOutcome {
    pub cache_hits: usize,
    pub cache_misses: usize,
    pub error: Option<PipelineError>,
}

pub struct Pipeline {
    pub config: RunConfig,
    pool: rayon::ThreadPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveDisk,
    SweepEllipse,
    Resolve,
    FitScaling,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveDisk => "solve-disk",
            Command::SweepEllipse => "sweep-ellipse",
            Command::Resolve => "resolve",
            Command::FitScaling => "fit-scaling",
            Command::Report => "report",
        }
    }

    pub const ALL: [Command; 5] = [
        Command::SolveDisk,
        Command::SweepEllipse,
        Command::Resolve,
        Command::FitScaling,
        Command::Report,
    ];
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let workers = config
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
        Ok(Self { config, pool })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.out
    }

    pub fn cache_dir(&self) -> &Path {
        &self.config.cache
    }

    /// Runs one command and records its files and timing in the manifest.
    pub fn run(&self, command: Command) -> Result<StageOutcome, PipelineError> {
        let outputs = Outputs::new(self.out_dir())?;
        fs::create_dir_all(self.cache_dir()).map_err(|e| io_error(self.cache_dir(), e))?;
        let start = Instant::now();
        let result = self.pool.install(|| match command {
            Command::SolveDisk => disk::solve_disk(self, &outputs),
            Command::SweepEllipse => ellipse::sweep_ellipse(self, &outputs),
            Command::Resolve => resolve::resolve(self, &outputs),
            Command::FitScaling => resolve::fit_scaling(self, &outputs),
            Command::Report => resolve::report(self, &outputs),
        });
        let seconds = start.elapsed().as_secs_f64();
        let outcome = match result {
            Ok(o) => o,
            Err(e) => StageOutcome {
                error: Some(e),
                ..Default::default()
            },
        };
        let record = StageRecord {
            seconds,
            cache_hits: outcome.cache_hits,
            cache_misses: outcome.cache_misses,
            ok: outcome.error.is_none(),
        };
        Manifest::update(self.out_dir(), &self.config.hash(), command.name(), record, &outputs.names())?;
        Ok(outcome)
    }

    /// All commands in order; later stages still run on whatever earlier ones produced.
    /// Returns the first failure.
    pub fn run_all(&self) -> Result<(), PipelineError> {
        let mut first = None;
        for c in Command::ALL {
            if c == Command::SweepEllipse && self.config.ellipse.is_none() {
                continue;
            }
            let outcome = self.run(c)?;
            if let Some(e) = outcome.error {
                first.get_or_insert(e);
            }
        }
        first.map_or(Ok(()), Err)
    }
}

/// Shared CSV float formatting (shortest round-trip representation).
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
