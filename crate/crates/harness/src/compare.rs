//! Algorithm x uncertainty grid of mean tracking error and infidelity.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig, Uncertainty};
use crate::experiment::{run_experiment, write_artifacts, Experiment};
use crate::stats::SummaryStats;

#[derive(Debug, Clone, Serialize)]
pub struct CompareCell {
    pub algorithm: Algorithm,
    pub uncertainty: Uncertainty,
    pub etrack: Option<SummaryStats>,
    pub infidelity: Option<SummaryStats>,
    pub completed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareTable {
    pub cells: Vec<CompareCell>,
}

impl CompareTable {
    pub fn cell(&self, algorithm: Algorithm, uncertainty: Uncertainty) -> Option<&CompareCell> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.uncertainty == uncertainty)
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().map(|c| c.failed).sum()
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "uncertainty",
            "algorithm",
            "n",
            "failed",
            "etrack_mean",
            "etrack_stderr",
            "etrack_median",
            "etrack_iqr",
            "infidelity_mean",
            "infidelity_stderr",
            "infidelity_median",
            "infidelity_iqr",
        ])?;
        let fmt = |s: Option<SummaryStats>, f: fn(&SummaryStats) -> f64| {
            s.map(|s| f(&s).to_string()).unwrap_or_default()
        };
        for c in &self.cells {
            w.write_record([
                c.uncertainty.name().to_string(),
                c.algorithm.name().to_string(),
                c.completed.to_string(),
                c.failed.to_string(),
                fmt(c.etrack, |s| s.mean),
                fmt(c.etrack, |s| s.stderr),
                fmt(c.etrack, |s| s.median),
                fmt(c.etrack, |s| s.iqr),
                fmt(c.infidelity, |s| s.mean),
                fmt(c.infidelity, |s| s.stderr),
                fmt(c.infidelity, |s| s.median),
                fmt(c.infidelity, |s| s.iqr),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Two aligned tables (tracking error, infidelity), rows by uncertainty,
    /// columns by algorithm, entries `mean ± stderr`.
    pub fn to_text(&self) -> String {
        let mut algorithms: Vec<Algorithm> = Vec::new();
        let mut uncertainties: Vec<Uncertainty> = Vec::new();
        for c in &self.cells {
            if !algorithms.contains(&c.algorithm) {
                algorithms.push(c.algorithm);
            }
            if !uncertainties.contains(&c.uncertainty) {
                uncertainties.push(c.uncertainty);
            }
        }
        let mut out = String::new();
        for (title, pick) in [
            ("Mean accumulated tracking error E_track", 0),
            ("Mean final infidelity", 1),
        ] {
            let _ = writeln!(out, "{title}");
            let _ = write!(out, "{:<10}", "");
            for a in &algorithms {
                let _ = write!(out, "{:>26}", a.name());
            }
            out.push('\n');
            for u in &uncertainties {
                let _ = write!(out, "{:<10}", u.name());
                for a in &algorithms {
                    let stats = self.cell(*a, *u).and_then(|c| if pick == 0 { c.etrack } else { c.infidelity });
                    let text = match stats {
                        Some(s) => format!("{:.3e} ± {:.1e}", s.mean, s.stderr),
                        None => "n/a".to_string(),
                    };
                    let _ = write!(out, "{text:>26}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

fn cell_of(exp: &Experiment) -> CompareCell {
    CompareCell {
        algorithm: exp.config.algorithm,
        uncertainty: exp.config.uncertainty,
        etrack: exp.summary.metrics["etrack"],
        infidelity: exp.summary.metrics["infidelity"],
        completed: exp.summary.completed,
        failed: exp.summary.failed,
    }
}

/// Runs every (algorithm, uncertainty) pair with the remaining settings of
/// `base`. With `out`, each cell's artifacts go to `out/<uncertainty>_<algorithm>/`
/// and the tables to `out/compare.csv` and `out/compare.txt`.
pub fn run_compare(
    base: &ExperimentConfig,
    algorithms: &[Algorithm],
    uncertainties: &[Uncertainty],
    out: Option<&Path>,
) -> anyhow::Result<(CompareTable, Vec<Experiment>)> {
    let mut cells = Vec::new();
    let mut experiments = Vec::new();
    for &uncertainty in uncertainties {
        for &algorithm in algorithms {
            let cfg = ExperimentConfig {
                algorithm,
                uncertainty,
                ..base.clone()
            };
            let exp = run_experiment(&cfg)?;
            log::info!(
                "{uncertainty}/{algorithm}: {} trials, {} failed",
                exp.summary.trials,
                exp.summary.failed
            );
            if let Some(dir) = out {
                write_artifacts(&exp, &dir.join(format!("{uncertainty}_{algorithm}")))?;
            }
            cells.push(cell_of(&exp));
            experiments.push(exp);
        }
    }
    let table = CompareTable { cells };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("compare.csv"), table.to_csv()?)?;
        fs::write(dir.join("compare.txt"), table.to_text())?;
    }
    Ok((table, experiments))
}
