//! Receding-horizon control with a projective measurement after every step.

use rand::Rng;

use crate::dynamics::{nominal_step, sample_uncertainty, uncertain_step, NoiseStream, UncertaintyModel};
use crate::error::{Error, Result};
use crate::ocp::{ControlSequence, OcpSolver};
use crate::qubit::fidelity_sq;
use crate::record::{MeasurementOutcome, RunRecord};
use crate::scalar::Scalar;
use crate::QubitState;

/// Collapses `plant` under `{|ref><ref|, I - |ref><ref|}` for a given branch.
///
/// The failure branch is undefined when the plant is (numerically) the
/// reference itself.
pub fn collapse(reference: &QubitState, plant: &QubitState, success: bool) -> Result<MeasurementOutcome> {
    let probability = fidelity_sq(reference, plant);
    if success {
        return Ok(MeasurementOutcome {
            success,
            probability,
            post_state: *reference,
        });
    }
    if probability > 1.0 - f64::AMPLITUDE_EPS {
        return Err(Error::DegenerateMeasurement { probability });
    }
    let overlap = reference.inner(plant);
    let [r0, r1] = reference.amplitudes();
    let [p0, p1] = plant.amplitudes();
    let post_state = QubitState::new(p0 - overlap * r0, p1 - overlap * r1)?;
    Ok(MeasurementOutcome {
        success,
        probability,
        post_state,
    })
}

/// Samples the binary projective measurement onto `reference`.
pub fn povm_measure<R: Rng + ?Sized>(
    reference: &QubitState,
    plant: &QubitState,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    let p = fidelity_sq(reference, plant);
    let draw: f64 = rng.random();
    collapse(reference, plant, draw < p)
}

/// Independent random sources of one closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialSeeds {
    pub noise: u64,
    pub measurement: u64,
}

/// `ts < pi / (2 * bound)`; the guaranteed success floor needs it.
pub fn sample_time_hypothesis(effective_bound: f64, ts: f64) -> bool {
    effective_bound * ts < std::f64::consts::FRAC_PI_2
}

/// Runs `steps` iterations of solve / apply / measure / update.
///
/// A failed solve aborts the run; the error carries the steps logged so far.
pub fn qmpc_run(
    solver: &OcpSolver<'_>,
    unc: &UncertaintyModel<f64>,
    s0: QubitState,
    steps: usize,
    seeds: TrialSeeds,
) -> Result<RunRecord> {
    if steps == 0 {
        return Err(crate::error::invalid("number of steps must be at least one"));
    }
    let model = solver.spec().model;
    let mut record = RunRecord::new(s0, solver.spec().target);
    record.seed = seeds.noise;
    record.hypothesis_ok = sample_time_hypothesis(unc.effective_norm_bound(), model.ts);
    if !record.hypothesis_ok {
        log::warn!(
            "sample time {} ns exceeds the success-floor limit for disturbance bound {}",
            model.ts,
            unc.effective_norm_bound()
        );
    }

    let noise = NoiseStream::new(seeds.noise);
    let measurement = NoiseStream::new(seeds.measurement);
    let mut state = s0;
    let mut warm: Option<ControlSequence> = None;
    for k in 0..steps {
        let sol = match solver.solve(state, warm.as_ref()) {
            Ok(sol) => sol,
            Err(e) => {
                return Err(Error::RunAborted {
                    step: k,
                    source: Box::new(e),
                    partial: Box::new(record),
                })
            }
        };
        let u = sol.controls.as_slice()[0];
        let predicted = nominal_step(&model, u, &state)?;
        let delta = sample_uncertainty(unc, k, model.ts, &noise);
        let plant = uncertain_step(&model, u, delta, &state)?;
        let outcome = match povm_measure(&predicted, &plant, &mut measurement.rng_at(k as u64)) {
            Ok(o) => o,
            Err(Error::DegenerateMeasurement { probability }) => MeasurementOutcome {
                success: true,
                probability,
                post_state: predicted,
            },
            Err(e) => return Err(e),
        };
        record.push(u, predicted, plant, Some(outcome), outcome.post_state, sol.lstar);
        state = outcome.post_state;
        warm = outcome.success.then(|| sol.controls.shifted());
    }
    Ok(record)
}
