//! Nominal time-optimal control study: closed-loop transfer without
//! disturbance and the minimal step count across stage weights.

use std::fmt::Write as _;

use serde::Serialize;

use qtompc_core::{solve_ocp, tompc_closed_loop_with, trace_distance, OcpSolver, OcpSpec};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LstarStep {
    pub k: usize,
    pub t_ns: f64,
    pub ux: f64,
    pub uy: f64,
    pub uz: f64,
    pub fid_target: f64,
    /// Minimal step count reported by the solve at step `k`.
    pub lstar: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaRow {
    pub theta: f64,
    pub lstar: Option<usize>,
    pub cost: f64,
    /// Whether every predicted state from `lstar` on stays within tolerance.
    pub holds_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LstarStudy {
    pub steps: Vec<LstarStep>,
    pub theta_sweep: Vec<ThetaRow>,
}

pub const THETA_SWEEP: [f64; 3] = [1.5, 1.9, 3.0];

pub fn lstar_study(cfg: &ExperimentConfig) -> anyhow::Result<LstarStudy> {
    cfg.validate()?;
    let spec = cfg.ocp_spec()?;
    let params = cfg.solver_params();
    let s0 = cfg.initial()?;
    let solver = OcpSolver::new(spec.clone(), params.clone())?;
    let record = tompc_closed_loop_with(&solver, s0, cfg.steps)?;
    let steps = record
        .steps
        .iter()
        .map(|s| LstarStep {
            k: s.k,
            t_ns: (s.k + 1) as f64 * cfg.sample_time,
            ux: s.control.x,
            uy: s.control.y,
            uz: s.control.z,
            fid_target: s.fid_target,
            lstar: s.lstar,
        })
        .collect();

    let mut theta_sweep = Vec::new();
    for theta in THETA_SWEEP {
        let spec = OcpSpec { theta, ..spec.clone() };
        let sol = solve_ocp(&spec, s0, &params)?;
        let holds_target = match sol.lstar {
            Some(l) => sol
                .predicted
                .states()
                .skip(l)
                .map(|s| trace_distance(s, &spec.target))
                .collect::<Result<Vec<_>, _>>()?
                .iter()
                .all(|&d| d <= params.terminal_tolerance),
            None => false,
        };
        theta_sweep.push(ThetaRow {
            theta,
            lstar: sol.lstar,
            cost: sol.cost,
            holds_target,
        });
    }
    Ok(LstarStudy { steps, theta_sweep })
}

impl LstarStudy {
    pub fn steps_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "t_ns", "ux", "uy", "uz", "fid_target", "lstar"])?;
        for s in &self.steps {
            w.write_record([
                s.k.to_string(),
                s.t_ns.to_string(),
                s.ux.to_string(),
                s.uy.to_string(),
                s.uz.to_string(),
                s.fid_target.to_string(),
                s.lstar.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn theta_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["theta", "lstar", "cost", "holds_target"])?;
        for r in &self.theta_sweep {
            w.write_record([
                r.theta.to_string(),
                r.lstar.map(|l| l.to_string()).unwrap_or_default(),
                r.cost.to_string(),
                r.holds_target.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let first = self.steps.first().and_then(|s| s.lstar);
        let reached = self.steps.iter().position(|s| s.lstar == Some(0));
        let _ = writeln!(out, "minimal steps from the initial state: {first:?}");
        let _ = writeln!(out, "closed loop at target from step: {reached:?}");
        let _ = writeln!(out, "{:>8}{:>8}{:>14}{:>8}", "theta", "lstar", "cost", "holds");
        for r in &self.theta_sweep {
            let _ = writeln!(
                out,
                "{:>8}{:>8}{:>14.6}{:>8}",
                r.theta,
                r.lstar.map(|l| l.to_string()).unwrap_or_else(|| "-".into()),
                r.cost,
                r.holds_target
            );
        }
        out
    }
}
