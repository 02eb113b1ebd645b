//! Open-loop gradient pulse engineering for nominal state transfer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{NoiseStream, UncertaintyModel};
use crate::error::{invalid, Result};
use crate::ocp::ControlSequence;
use crate::optim::{central_difference, projected_gradient, ProjectedGradientOptions, SymmetricBox};
use crate::qubit::{fidelity_sq, pauli_exponential_unchecked};
use crate::record::{replay_open_loop, RunRecord};
use crate::{CoeffVector, NominalModel, QubitState};

#[derive(Debug, Clone, PartialEq)]
pub struct GrapeParams {
    pub steps: usize,
    pub bound: f64,
    pub max_iterations: usize,
    /// Stop once the projected gradient step is below this.
    pub tolerance: f64,
    pub fd_step: f64,
    pub restarts: usize,
    /// Initial controls are uniform in `[-f B, f B]`.
    pub init_fraction: f64,
    pub seed: u64,
}

impl Default for GrapeParams {
    fn default() -> Self {
        Self {
            steps: 100,
            bound: 0.5,
            max_iterations: 500,
            tolerance: 1e-9,
            fd_step: 1e-6,
            restarts: 5,
            init_fraction: 0.1,
            seed: 0x6a4e,
        }
    }
}

impl GrapeParams {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("GRAPE needs at least one step"));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(invalid("control bound must be positive"));
        }
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(invalid("restarts and max_iterations must be positive"));
        }
        if !(self.fd_step > 0.0 && self.tolerance > 0.0) {
            return Err(invalid("fd_step and tolerance must be positive"));
        }
        if !(0.0..=1.0).contains(&self.init_fraction) {
            return Err(invalid("init_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrapeResult {
    pub controls: ControlSequence,
    /// Nominal final fidelity to the target.
    pub fidelity: f64,
    /// False when the best restart hit the iteration cap.
    pub converged: bool,
    /// Fidelity after each accepted iteration of the best restart.
    pub history: Vec<f64>,
}

fn active_axes(model: &NominalModel) -> Vec<usize> {
    model
        .axes
        .as_mask()
        .iter()
        .enumerate()
        .filter_map(|(i, &on)| on.then_some(i))
        .collect()
}

fn decode(axes: &[usize], x: &[f64]) -> Vec<CoeffVector> {
    x.chunks(axes.len())
        .map(|chunk| {
            let mut a = [0.0; 3];
            for (&axis, &v) in axes.iter().zip(chunk) {
                a[axis] = v;
            }
            CoeffVector::from_array(a)
        })
        .collect()
}

/// Final nominal fidelity for controls packed as consecutive active-axis
/// components.
pub fn grape_objective(model: &NominalModel, s0: &QubitState, target: &QubitState, x: &[f64]) -> f64 {
    let axes = active_axes(model);
    let drift = model.drift();
    let mut psi = *s0;
    for u in decode(&axes, x) {
        psi = pauli_exponential_unchecked(u + drift, model.ts).apply_raw(&psi);
    }
    fidelity_sq(target, &psi)
}

/// Central-difference gradient of [`grape_objective`].
pub fn grape_gradient(
    model: &NominalModel,
    s0: &QubitState,
    target: &QubitState,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    let mut f = |z: &[f64]| grape_objective(model, s0, target, z);
    let mut x = x.to_vec();
    let mut g = vec![0.0; x.len()];
    central_difference(&mut f, &mut x, h, &mut g);
    g
}

/// Maximizes the nominal transfer fidelity over bounded piecewise-constant
/// controls, keeping the best of several random restarts.
pub fn grape_optimize(
    model: &NominalModel,
    s0: &QubitState,
    target: &QubitState,
    params: &GrapeParams,
) -> Result<GrapeResult> {
    params.validate()?;
    let axes = active_axes(model);
    let dim = params.steps * axes.len();
    let opts = ProjectedGradientOptions {
        max_iterations: params.max_iterations,
        gradient_tolerance: params.tolerance,
        fd_step: params.fd_step,
        target_value: None,
        record_history: true,
    };
    let bounds = SymmetricBox {
        bound: params.bound,
    };
    let spread = params.init_fraction * params.bound;

    let mut best: Option<(f64, Vec<f64>, bool, Vec<f64>)> = None;
    for r in 0..params.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(r as u64);
        let x0: Vec<f64> = (0..dim)
            .map(|_| if spread > 0.0 { rng.random_range(-spread..=spread) } else { 0.0 })
            .collect();
        let run = projected_gradient(
            |x| 1.0 - grape_objective(model, s0, target, x),
            &x0,
            bounds,
            &opts,
        );
        let fid = 1.0 - run.value;
        if best.as_ref().is_none_or(|b| fid > b.0) {
            let history = run.history.iter().map(|v| 1.0 - v).collect();
            best = Some((fid, run.x, run.converged, history));
        }
    }
    let (fidelity, x, converged, history) = best.expect("at least one restart");
    if !converged {
        log::warn!("GRAPE hit the iteration cap at fidelity {fidelity:.6}");
    }
    let controls = ControlSequence::new(decode(&axes, &x), params.bound, model.axes)?;
    Ok(GrapeResult {
        controls,
        fidelity,
        converged,
        history,
    })
}

/// Applies optimized controls to the disturbed plant; the nominal trajectory
/// is the tracking reference.
pub fn grape_replay(
    controls: &ControlSequence,
    model: &NominalModel,
    unc: &UncertaintyModel<f64>,
    s0: QubitState,
    target: QubitState,
    stream: &NoiseStream,
) -> Result<RunRecord> {
    replay_open_loop(controls.as_slice(), model, unc, s0, target, stream)
}
