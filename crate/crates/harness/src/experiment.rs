//! Monte Carlo driver for one (algorithm, uncertainty) cell and its file
//! artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use qtompc_core::{
    grape_optimize, grape_replay, infidelity, p_tar_lower_bound, qmpc_run, replay_open_loop,
    success_bound, tompc_closed_loop_with, ControlSequence, Error, NoiseStream,
    OcpSolver, RunRecord, SolveCache, TrialSeeds, UncertaintyModel,
};

use crate::config::{Algorithm, ExperimentConfig};
use crate::stats::{binomial_sigma, SummaryStats};

pub const STEPS_HEADER: [&str; 10] = [
    "trial",
    "k",
    "t_ns",
    "ux",
    "uy",
    "uz",
    "p_success",
    "outcome",
    "fid_target",
    "etrack_cum",
];

/// Seeds and disturbance realization of one trial, a pure function of the
/// master seed and the trial index.
pub fn trial_setup(cfg: &ExperimentConfig, trial: usize) -> (TrialSeeds, UncertaintyModel<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(trial as u64);
    let seeds = TrialSeeds {
        noise: rng.random(),
        measurement: rng.random(),
    };
    let model = cfg.family().instantiate(&mut rng);
    (seeds, model)
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seeds: TrialSeeds,
    /// Complete record, or the steps logged before an abort.
    pub record: RunRecord,
    pub error: Option<String>,
}

impl TrialOutcome {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }

    pub fn etrack(&self) -> f64 {
        self.record.etrack_total()
    }

    pub fn infidelity(&self) -> f64 {
        infidelity(&self.record)
    }

    pub fn measurement_failures(&self) -> usize {
        self.record
            .steps
            .iter()
            .filter(|s| s.outcome.is_some_and(|o| !o.success))
            .count()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub algorithm: String,
    pub uncertainty: String,
    pub seed: u64,
    pub config_hash: String,
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    /// Fidelity to the target of the open-loop plan on the nominal model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nominal_fidelity: Option<f64>,
    /// Per-step success probability guaranteed by the disturbance bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_floor: Option<f64>,
    /// Whether every step's measured success frequency stays above the floor
    /// within three binomial standard errors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_floor_ok: Option<bool>,
    /// Whether the fraction of trials at the target by each step stays above
    /// the analytical lower bound within three binomial standard errors.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tar_bound_ok: Option<bool>,
    pub metrics: BTreeMap<String, Option<SummaryStats>>,
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub k: usize,
    pub t_ns: f64,
    pub n: usize,
    pub fid: SummaryStats,
    pub etrack: SummaryStats,
    /// Fraction of measured steps that succeeded (closed loop only).
    pub success_freq: Option<f64>,
    /// Fraction of trials that have reached the target by this step.
    pub reached: f64,
    pub p_tar_bound: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub outcomes: Vec<TrialOutcome>,
    pub series: Vec<SeriesRow>,
    pub summary: Summary,
}

impl Experiment {
    pub fn failed(&self) -> usize {
        self.summary.failed
    }

    pub fn completed(&self) -> impl Iterator<Item = &TrialOutcome> {
        self.outcomes.iter().filter(|o| o.completed())
    }
}

/// Open-loop plan shared by all trials of a baseline.
fn open_loop_plan(cfg: &ExperimentConfig, solver: &OcpSolver<'_>) -> anyhow::Result<(ControlSequence, f64)> {
    let model = cfg.model()?;
    let s0 = cfg.initial()?;
    let target = cfg.target()?;
    let controls = match cfg.algorithm {
        Algorithm::Tompc => {
            let rec = tompc_closed_loop_with(solver, s0, cfg.steps)
                .context("nominal TOMPC closed loop")?;
            rec.steps.iter().map(|s| s.control).collect::<Vec<_>>()
        }
        Algorithm::Grape => {
            let res = grape_optimize(&model, &s0, &target, &cfg.grape_params())?;
            res.controls.as_slice().to_vec()
        }
        Algorithm::Qtompc => unreachable!("closed loop has no fixed plan"),
    };
    let controls = ControlSequence::new(controls, cfg.control_bound, model.axes)?;
    let nominal = replay_open_loop(
        controls.as_slice(),
        &model,
        &UncertaintyModel::None,
        s0,
        target,
        &NoiseStream::new(0),
    )?;
    Ok((controls, 1.0 - infidelity(&nominal)))
}

/// Runs every trial of `cfg` (in parallel, merged in trial order) and
/// aggregates the results. Trial-level failures are reported in the
/// outcomes, not as an error.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Experiment> {
    cfg.validate()?;
    let model = cfg.model()?;
    let s0 = cfg.initial()?;
    let target = cfg.target()?;
    let cache = SolveCache::new();
    let solver = OcpSolver::new(cfg.ocp_spec()?, cfg.solver_params())?.with_cache(&cache);
    let config_hash = cfg.hash();

    let plan = match cfg.algorithm {
        Algorithm::Qtompc => None,
        _ => Some(open_loop_plan(cfg, &solver)?),
    };

    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let (seeds, unc) = trial_setup(cfg, trial);
            let result = match &plan {
                None => qmpc_run(&solver, &unc, s0, cfg.steps, seeds),
                Some((controls, _)) => {
                    let stream = NoiseStream::new(seeds.noise);
                    match cfg.algorithm {
                        Algorithm::Grape => grape_replay(controls, &model, &unc, s0, target, &stream),
                        _ => replay_open_loop(controls.as_slice(), &model, &unc, s0, target, &stream),
                    }
                }
            };
            let (mut record, error) = match result {
                Ok(r) => (r, None),
                Err(Error::RunAborted {
                    step,
                    source,
                    partial,
                }) => (*partial, Some(format!("aborted at step {step}: {source}"))),
                Err(e) => (RunRecord::new(s0, target), Some(e.to_string())),
            };
            record.seed = seeds.noise;
            record.config_hash = config_hash;
            TrialOutcome {
                trial,
                seeds,
                record,
                error,
            }
        })
        .collect();

    log::debug!("solve cache: {} hits, {} misses", cache.hits(), cache.misses());
    let series = series(cfg, &outcomes)?;
    let summary = summarize(cfg, &outcomes, &series, plan.as_ref().map(|p| p.1))?;
    Ok(Experiment {
        config: cfg.clone(),
        outcomes,
        series,
        summary,
    })
}

fn series(cfg: &ExperimentConfig, outcomes: &[TrialOutcome]) -> anyhow::Result<Vec<SeriesRow>> {
    let done: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.completed()).collect();
    if done.is_empty() {
        return Ok(Vec::new());
    }
    let closed_loop = cfg.algorithm == Algorithm::Qtompc;
    let inputs = cfg.bound_inputs().ok();
    let first_hits: Vec<Option<usize>> = done
        .iter()
        .map(|o| o.record.first_hit(cfg.target_infidelity))
        .collect();

    let mut rows = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        let fids: Vec<f64> = done.iter().map(|o| o.record.steps[k].fid_target).collect();
        let ets: Vec<f64> = done.iter().map(|o| o.record.steps[k].etrack_cum).collect();
        let success_freq = closed_loop.then(|| {
            let ok = done
                .iter()
                .filter(|o| o.record.steps[k].outcome.is_some_and(|m| m.success))
                .count();
            ok as f64 / done.len() as f64
        });
        let reached = first_hits.iter().filter(|h| h.is_some_and(|h| h <= k)).count() as f64
            / done.len() as f64;
        let p_tar_bound = match (closed_loop, &inputs) {
            (true, Some(inputs)) => Some(p_tar_lower_bound(inputs, k + 1)?),
            _ => None,
        };
        rows.push(SeriesRow {
            k,
            t_ns: (k + 1) as f64 * cfg.sample_time,
            n: done.len(),
            fid: SummaryStats::from_samples(&fids).expect("nonempty"),
            etrack: SummaryStats::from_samples(&ets).expect("nonempty"),
            success_freq,
            reached,
            p_tar_bound,
        });
    }
    Ok(rows)
}

fn summarize(
    cfg: &ExperimentConfig,
    outcomes: &[TrialOutcome],
    series: &[SeriesRow],
    nominal_fidelity: Option<f64>,
) -> anyhow::Result<Summary> {
    let done: Vec<&TrialOutcome> = outcomes.iter().filter(|o| o.completed()).collect();
    let collect = |f: &dyn Fn(&TrialOutcome) -> f64| -> Vec<f64> { done.iter().map(|o| f(o)).collect() };
    let mut metrics = BTreeMap::new();
    metrics.insert("etrack".to_string(), SummaryStats::from_samples(&collect(&|o| o.etrack())));
    metrics.insert(
        "infidelity".to_string(),
        SummaryStats::from_samples(&collect(&|o| o.infidelity())),
    );
    metrics.insert(
        "final_fidelity".to_string(),
        SummaryStats::from_samples(&collect(&|o| 1.0 - o.infidelity())),
    );
    let closed_loop = cfg.algorithm == Algorithm::Qtompc;
    if closed_loop {
        metrics.insert(
            "measurement_failures".to_string(),
            SummaryStats::from_samples(&collect(&|o| o.measurement_failures() as f64)),
        );
    }

    let (success_floor, success_floor_ok, p_tar_bound_ok) = if closed_loop && !series.is_empty() {
        let floor = success_bound(cfg.effective_bound(), cfg.sample_time).ok();
        let floor_ok = floor.map(|c| {
            series.iter().all(|r| {
                let freq = r.success_freq.unwrap_or(1.0);
                freq >= c - 3.0 * binomial_sigma(c, r.n)
            })
        });
        let tar_ok = series.iter().all(|r| match r.p_tar_bound {
            Some(b) => r.reached >= b - 3.0 * binomial_sigma(b, r.n),
            None => true,
        });
        (floor, floor_ok, Some(tar_ok))
    } else {
        (None, None, None)
    };

    let mut notes = BTreeMap::new();
    notes.insert(
        "etrack".to_string(),
        "sum over steps of the squared trace distance between the nominal one-step prediction and the realized state".to_string(),
    );
    notes.insert(
        "infidelity".to_string(),
        if closed_loop {
            "1 - |<target|final post-measurement state>|^2"
        } else {
            "1 - |<target|final plant state>|^2"
        }
        .to_string(),
    );
    notes.insert("units".to_string(), "rates in rad/ns, times in ns".to_string());

    let completed = done.len();
    Ok(Summary {
        algorithm: cfg.algorithm.name().to_string(),
        uncertainty: cfg.uncertainty.name().to_string(),
        seed: cfg.seed,
        config_hash: format!("{:016x}", cfg.hash()),
        trials: outcomes.len(),
        completed,
        failed: outcomes.len() - completed,
        nominal_fidelity,
        success_floor,
        success_floor_ok,
        p_tar_bound_ok,
        metrics,
        notes,
    })
}

/// Paths of the files written for one experiment.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub steps: PathBuf,
    pub trials: PathBuf,
    pub series: PathBuf,
    pub summary: PathBuf,
    pub config: PathBuf,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `steps.csv`, `trials.csv`, `series.csv`, `summary.json` and the
/// effective `config.toml` into `dir`.
pub fn write_artifacts(exp: &Experiment, dir: &Path) -> anyhow::Result<Artifacts> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let paths = Artifacts {
        steps: dir.join("steps.csv"),
        trials: dir.join("trials.csv"),
        series: dir.join("series.csv"),
        summary: dir.join("summary.json"),
        config: dir.join("config.toml"),
    };
    let ts = exp.config.sample_time;

    let mut w = csv::Writer::from_path(&paths.steps)?;
    w.write_record(STEPS_HEADER)?;
    for o in &exp.outcomes {
        for s in &o.record.steps {
            let outcome = match s.outcome {
                Some(m) if m.success => "success",
                Some(_) => "failure",
                None => "none",
            };
            w.write_record([
                o.trial.to_string(),
                s.k.to_string(),
                ((s.k + 1) as f64 * ts).to_string(),
                s.control.x.to_string(),
                s.control.y.to_string(),
                s.control.z.to_string(),
                s.p_success.to_string(),
                outcome.to_string(),
                s.fid_target.to_string(),
                s.etrack_cum.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths.trials)?;
    w.write_record([
        "trial",
        "noise_seed",
        "measurement_seed",
        "steps",
        "etrack",
        "infidelity",
        "first_hit_k",
        "measurement_failures",
        "status",
    ])?;
    for o in &exp.outcomes {
        w.write_record([
            o.trial.to_string(),
            o.seeds.noise.to_string(),
            o.seeds.measurement.to_string(),
            o.record.steps.len().to_string(),
            o.etrack().to_string(),
            o.infidelity().to_string(),
            o.record
                .first_hit(exp.config.target_infidelity)
                .map(|k| k.to_string())
                .unwrap_or_default(),
            o.measurement_failures().to_string(),
            o.error.clone().unwrap_or_else(|| "ok".to_string()),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths.series)?;
    w.write_record([
        "k",
        "t_ns",
        "n",
        "fid_mean",
        "fid_median",
        "fid_q1",
        "fid_q3",
        "fid_iqr",
        "etrack_mean",
        "etrack_median",
        "etrack_q1",
        "etrack_q3",
        "etrack_iqr",
        "success_freq",
        "reached_fraction",
        "p_tar_bound",
    ])?;
    for r in &exp.series {
        w.write_record([
            r.k.to_string(),
            r.t_ns.to_string(),
            r.n.to_string(),
            r.fid.mean.to_string(),
            r.fid.median.to_string(),
            r.fid.q1.to_string(),
            r.fid.q3.to_string(),
            r.fid.iqr.to_string(),
            r.etrack.mean.to_string(),
            r.etrack.median.to_string(),
            r.etrack.q1.to_string(),
            r.etrack.q3.to_string(),
            r.etrack.iqr.to_string(),
            opt(r.success_freq),
            r.reached.to_string(),
            opt(r.p_tar_bound),
        ])?;
    }
    w.flush()?;

    fs::write(&paths.summary, serde_json::to_string_pretty(&exp.summary)? + "\n")?;
    fs::write(&paths.config, exp.config.to_toml())?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Uncertainty;

    fn small(algorithm: Algorithm, uncertainty: Uncertainty) -> ExperimentConfig {
        ExperimentConfig {
            algorithm,
            uncertainty,
            trials: 4,
            steps: 12,
            ..Default::default()
        }
    }

    #[test]
    fn trial_setup_is_prefix_stable() {
        let cfg = small(Algorithm::Qtompc, Uncertainty::Periodic);
        let bigger = ExperimentConfig {
            trials: 50,
            ..cfg.clone()
        };
        assert_eq!(trial_setup(&cfg, 3), trial_setup(&bigger, 3));
        assert_ne!(trial_setup(&cfg, 3).0, trial_setup(&cfg, 2).0);
    }

    #[test]
    fn undisturbed_closed_loop_is_exact() {
        let exp = run_experiment(&small(Algorithm::Qtompc, Uncertainty::None)).unwrap();
        assert_eq!(exp.failed(), 0);
        let et = exp.summary.metrics["etrack"].unwrap();
        let inf = exp.summary.metrics["infidelity"].unwrap();
        assert_eq!(et.mean, 0.0);
        assert!(inf.mean <= 1e-8);
    }

    #[test]
    fn baselines_produce_full_records() {
        for alg in [Algorithm::Tompc, Algorithm::Grape] {
            let exp = run_experiment(&small(alg, Uncertainty::Uniform)).unwrap();
            assert!(exp.outcomes.iter().all(|o| o.record.steps.len() == 12));
            assert!(exp.summary.nominal_fidelity.unwrap() > 0.99);
        }
    }
}
