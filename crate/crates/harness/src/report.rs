//! Tabulation of the analytical guarantees against direct simulation of the
//! success process they describe.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use qtompc_core::{
    convergence_rate, max_secondary_root_modulus, p_tar_lower_bound, BoundInputs,
};

use crate::config::ExperimentConfig;
use crate::stats::binomial_sigma;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub label: String,
    pub horizon: usize,
    pub c: f64,
    pub alpha: f64,
    pub case_id: u8,
    pub eta: f64,
    pub max_root: f64,
    pub n: usize,
    pub p_tar_bound: f64,
    /// Fraction of simulated Bernoulli(c) sequences containing `L`
    /// consecutive successes within `n` steps.
    pub empirical: f64,
    pub empirical_sigma: f64,
    pub trials: usize,
}

impl BoundsRow {
    /// Empirical fraction at least the bound minus three binomial standard
    /// errors.
    pub fn empirical_ok(&self) -> bool {
        self.empirical >= self.p_tar_bound - 3.0 * binomial_sigma(self.p_tar_bound, self.trials) - 1e-12
    }
}

/// Fraction of `trials` sequences of `n` Bernoulli(`c`) draws that complete a
/// run of `l` successes.
pub fn simulate_success_runs(c: f64, l: usize, n: usize, trials: usize, rng: &mut impl Rng) -> f64 {
    let mut hits = 0usize;
    for _ in 0..trials {
        let mut run = 0;
        for _ in 0..n {
            if rng.random::<f64>() < c {
                run += 1;
                if run >= l {
                    hits += 1;
                    break;
                }
            } else {
                run = 0;
            }
        }
    }
    hits as f64 / trials as f64
}

fn row(
    label: &str,
    inputs: &BoundInputs<f64>,
    n: usize,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> anyhow::Result<BoundsRow> {
    let (case, eta) = convergence_rate(inputs);
    let empirical = simulate_success_runs(inputs.c(), inputs.horizon(), n, trials, rng);
    Ok(BoundsRow {
        label: label.to_string(),
        horizon: inputs.horizon(),
        c: inputs.c(),
        alpha: inputs.alpha(),
        case_id: case.id(),
        eta,
        max_root: max_secondary_root_modulus(inputs)?,
        n,
        p_tar_bound: p_tar_lower_bound(inputs, n)?,
        empirical,
        empirical_sigma: binomial_sigma(empirical, trials),
        trials,
    })
}

/// Rows: the configured disturbance, the critical case `c = L/(L+1)`, the
/// undisturbed `alpha = 0` case and a sweep of success probabilities.
pub fn bounds_report(cfg: &ExperimentConfig) -> anyhow::Result<Vec<BoundsRow>> {
    let l = cfg.horizon;
    let n = cfg.steps;
    let trials = cfg.trials.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();

    let physical = BoundInputs::from_disturbance(
        cfg.disturbance_bound * std::f64::consts::SQRT_2,
        cfg.sample_time,
        l,
    )?;
    rows.push(row("configured", &physical, n, trials, &mut rng)?);
    let critical = BoundInputs::from_success_probability(l as f64 / (l as f64 + 1.0), l)?;
    rows.push(row("critical", &critical, n, trials, &mut rng)?);
    let exact = BoundInputs::from_success_probability(1.0, l)?;
    rows.push(row("undisturbed", &exact, n, trials, &mut rng)?);
    for c in [0.5, 0.75, 0.9, 0.95, 0.99] {
        let inputs = BoundInputs::from_success_probability(c, l)?;
        rows.push(row("sweep", &inputs, n, trials, &mut rng)?);
    }
    Ok(rows)
}

pub fn bounds_csv(rows: &[BoundsRow]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "label",
        "horizon",
        "c",
        "alpha",
        "case",
        "eta",
        "max_root",
        "n",
        "p_tar_bound",
        "empirical",
        "empirical_sigma",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.horizon.to_string(),
            r.c.to_string(),
            r.alpha.to_string(),
            r.case_id.to_string(),
            r.eta.to_string(),
            r.max_root.to_string(),
            r.n.to_string(),
            r.p_tar_bound.to_string(),
            r.empirical.to_string(),
            r.empirical_sigma.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn bounds_text(rows: &[BoundsRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12}{:>4}{:>12}{:>12}{:>6}{:>12}{:>12}{:>6}{:>12}{:>12}{:>5}",
        "row", "L", "c", "alpha", "case", "eta", "max|z|", "N", "P_tar >=", "empirical", "ok"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12}{:>4}{:>12.6}{:>12.3e}{:>6}{:>12.6}{:>12.6}{:>6}{:>12.6}{:>12.6}{:>5}",
            r.label,
            r.horizon,
            r.c,
            r.alpha,
            r.case_id,
            r.eta,
            r.max_root,
            r.n,
            r.p_tar_bound,
            r.empirical,
            if r.empirical_ok() { "yes" } else { "NO" }
        );
    }
    out
}
