//! Per-step logs of closed- and open-loop runs and the metrics computed from
//! them.

use crate::dynamics::{sample_uncertainty, uncertain_step, NoiseStream, UncertaintyModel};
use crate::error::{invalid, Result};
use crate::qubit::{distance, fidelity_sq, trace_distance};
use crate::{CoeffVector, NominalModel, QubitState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementOutcome {
    pub success: bool,
    /// Probability of the success branch.
    pub probability: f64,
    pub post_state: QubitState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub control: CoeffVector,
    /// Nominal one-step prediction from the state the controller acted on.
    pub predicted: QubitState,
    /// Plant state after the step, before any measurement.
    pub plant: QubitState,
    /// `None` for runs without measurement.
    pub outcome: Option<MeasurementOutcome>,
    /// State carried into the next step (post-measurement state when measured).
    pub post: QubitState,
    /// `|<predicted|plant>|^2`.
    pub p_success: f64,
    pub etrack_cum: f64,
    /// `|<target|post>|^2`.
    pub fid_target: f64,
    /// Minimal step count reported by the optimizer at this step.
    pub lstar: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub initial: QubitState,
    pub target: QubitState,
    pub steps: Vec<StepRecord>,
    pub seed: u64,
    pub config_hash: u64,
    /// False when the sample time violated the minimum-success-probability
    /// hypothesis for the disturbance bound.
    pub hypothesis_ok: bool,
}

impl RunRecord {
    pub fn new(initial: QubitState, target: QubitState) -> Self {
        Self {
            initial,
            target,
            steps: Vec::new(),
            seed: 0,
            config_hash: 0,
            hypothesis_ok: true,
        }
    }

    pub fn final_state(&self) -> &QubitState {
        self.steps.last().map(|s| &s.post).unwrap_or(&self.initial)
    }

    pub fn etrack_total(&self) -> f64 {
        self.steps.last().map(|s| s.etrack_cum).unwrap_or(0.0)
    }

    /// Appends a step, filling in the running tracking error and the fidelity
    /// to the target.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn push(
        &mut self,
        control: CoeffVector,
        predicted: QubitState,
        plant: QubitState,
        outcome: Option<MeasurementOutcome>,
        post: QubitState,
        lstar: Option<usize>,
    ) {
        let d = distance(&predicted, &post);
        let etrack_cum = self.etrack_total() + d * d;
        self.steps.push(StepRecord {
            k: self.steps.len(),
            control,
            predicted,
            plant,
            outcome,
            post,
            p_success: fidelity_sq(&predicted, &plant),
            etrack_cum,
            fid_target: fidelity_sq(&self.target, &post),
            lstar,
        });
    }

    /// First step index `k` (1-based state index `k + 1`) at which the
    /// carried state is within `1 - fid_tol` of the target.
    pub fn first_hit(&self, fid_tol: f64) -> Option<usize> {
        self.steps
            .iter()
            .position(|s| s.fid_target >= 1.0 - fid_tol)
    }
}

/// Accumulated squared trace distance between each nominal prediction and the
/// state that actually followed it.
pub fn e_track(record: &RunRecord) -> Result<f64> {
    let mut total = 0.0;
    for s in &record.steps {
        let d = trace_distance(&s.predicted, &s.post)?;
        total += d * d;
    }
    Ok(total)
}

/// `1 - |<target|final>|^2` for the last carried state.
pub fn infidelity(record: &RunRecord) -> f64 {
    1.0 - fidelity_sq(&record.target, record.final_state())
}

/// Applies a fixed control sequence to the disturbed plant without
/// measurement, logging the nominal trajectory as the reference.
pub fn replay_open_loop(
    controls: &[CoeffVector],
    model: &NominalModel,
    unc: &UncertaintyModel<f64>,
    s0: QubitState,
    target: QubitState,
    stream: &NoiseStream,
) -> Result<RunRecord> {
    if controls.is_empty() {
        return Err(invalid("control sequence is empty"));
    }
    let mut record = RunRecord::new(s0, target);
    let mut nominal = s0;
    let mut plant = s0;
    for (k, &u) in controls.iter().enumerate() {
        let delta = sample_uncertainty(unc, k, model.ts, stream);
        nominal = crate::dynamics::nominal_step(model, u, &nominal)?;
        plant = uncertain_step(model, u, delta, &plant)?;
        record.push(u, nominal, plant, None, plant, None);
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ControlAxes;
    use approx::assert_abs_diff_eq;

    #[test]
    fn undisturbed_replay_has_no_tracking_error() {
        let m = NominalModel::new(0.05, ControlAxes::XY, 1.0).unwrap();
        let u = vec![CoeffVector::new(0.3, 0.1, 0.0); 20];
        let rec = replay_open_loop(
            &u,
            &m,
            &UncertaintyModel::None,
            QubitState::zero(),
            QubitState::one(),
            &NoiseStream::new(1),
        )
        .unwrap();
        assert_eq!(e_track(&rec).unwrap(), 0.0);
        assert_eq!(rec.etrack_total(), 0.0);
    }

    #[test]
    fn orthogonal_post_state_contributes_one() {
        let mut rec = RunRecord::new(QubitState::plus(), QubitState::one());
        let pred = QubitState::zero();
        let post = QubitState::one();
        let outcome = MeasurementOutcome {
            success: false,
            probability: 0.5,
            post_state: post,
        };
        rec.push(CoeffVector::zero(), pred, QubitState::plus(), Some(outcome), post, None);
        assert_abs_diff_eq!(e_track(&rec).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rec.etrack_total(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(infidelity(&rec), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn infidelity_of_orthogonal_final_state() {
        let mut rec = RunRecord::new(QubitState::zero(), QubitState::one());
        let z = QubitState::zero();
        rec.push(CoeffVector::zero(), z, z, None, z, None);
        assert_abs_diff_eq!(infidelity(&rec), 1.0, epsilon = 1e-15);
    }
}
