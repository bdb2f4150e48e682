//! Per-mode resolution report and its CSV / JSON forms.

use super::study::{FieldSource, StudyOutcome};
use super::ScalingFit;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionRow {
    pub n: usize,
    pub mean_s: f64,
    pub mean_log_n: f64,
    pub mean_dse: f64,
    pub chi2: Option<f64>,
    pub ratio: Option<f64>,
    pub identified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub mode_id: String,
    pub quantum_numbers: Option<(u32, u32)>,
    pub nkr: [f64; 2],
    pub n_pop: usize,
    pub ensemble: String,
    pub rows: Vec<ResolutionRow>,
    pub n_ref: usize,
    pub saturated: bool,
    pub n_o: Option<usize>,
    pub n_o_error: Option<String>,
    pub n_identified: Option<usize>,
    pub ratio_at_n_o: Option<f64>,
    pub extracted_at_n_ref: Option<(u32, u32)>,
    pub scaling: Option<ScalingFit>,
    #[serde(skip)]
    pub entropy_rows: Vec<EntropyRow>,
}

/// One (member, N) entropy evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRow {
    pub alpha: f64,
    pub eps: f64,
    pub n: usize,
    pub s: f64,
}

impl ResolutionReport {
    pub fn from_outcome(
        mode_id: &str,
        quantum_numbers: Option<(u32, u32)>,
        nkr: [f64; 2],
        ensemble: &str,
        source: &dyn FieldSource,
        outcome: &StudyOutcome,
    ) -> Self {
        let quantum = |i: usize| {
            let l = &outcome.levels[i];
            let extracted = match &l.quantum {
                Some(Ok(q)) => Some((q.ell, q.m)),
                _ => None,
            };
            match l.identification {
                Some(id) => (Some(id.ratio), id.identified, extracted),
                None => (None, false, extracted),
            }
        };
        let rows: Vec<ResolutionRow> = outcome
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let k = l.samples.len() as f64;
                let (ratio, identified, _) = quantum(i);
                ResolutionRow {
                    n: l.target,
                    mean_s: l.samples.iter().map(|s| s.s).sum::<f64>() / k,
                    mean_log_n: l.samples.iter().map(|s| (s.n as f64).ln()).sum::<f64>() / k,
                    mean_dse: l.mean_dse,
                    chi2: l.chi2,
                    ratio,
                    identified,
                }
            })
            .collect();
        let n_o = outcome.n_o.as_ref().ok().copied();
        let ratio_at_n_o = n_o.and_then(|n| {
            let i = outcome.levels.iter().position(|l| l.target == n)?;
            quantum(i).0
        });
        let entropy_rows = outcome
            .levels
            .iter()
            .flat_map(|l| {
                l.samples.iter().enumerate().map(move |(k, s)| {
                    let (alpha, eps) = source.coordinates(k);
                    EntropyRow {
                        alpha,
                        eps,
                        n: s.n,
                        s: s.s,
                    }
                })
            })
            .collect();
        Self {
            mode_id: mode_id.to_string(),
            quantum_numbers,
            nkr,
            n_pop: source.population(),
            ensemble: ensemble.to_string(),
            rows,
            n_ref: outcome.saturation.n_ref,
            saturated: outcome.saturation.saturated,
            n_o,
            n_o_error: outcome.n_o.as_ref().err().cloned(),
            n_identified: outcome.n_identified,
            ratio_at_n_o,
            extracted_at_n_ref: quantum(outcome.saturation.index).2,
            scaling: None,
            entropy_rows,
        }
    }

    /// `mode_id,alpha,eps,N,S,logN,DSE`, one row per ensemble member and schedule point.
    pub fn write_entropy_csv<W: Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(w, "mode_id,alpha,eps,N,S,logN,DSE")?;
        }
        for r in &self.entropy_rows {
            let log_n = (r.n as f64).ln();
            writeln!(w, "{},{},{},{},{},{},{}", self.mode_id, r.alpha, r.eps, r.n, r.s, log_n, log_n - r.s)?;
        }
        Ok(())
    }

    /// `mode_id,N,chi2` for the schedule points up to N_ref.
    pub fn write_chi_csv<W: Write>(&self, mut w: W, header: bool) -> io::Result<()> {
        if header {
            writeln!(w, "mode_id,N,chi2")?;
        }
        for r in &self.rows {
            if let Some(c) = r.chi2 {
                writeln!(w, "{},{},{}", self.mode_id, r.n, c)?;
            }
        }
        Ok(())
    }
}
