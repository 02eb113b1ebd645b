//! Finite-horizon time-optimal OCP: geometric stage weights on the trace
//! distance to the target plus a terminal equality constraint.
//!
//! With a target that is a drift eigenstate, an optimal control sequence
//! reaches the target at the minimal step count `lstar` and then holds it
//! with zero control. The solver exploits that structure: it first finds the
//! smallest reach length `m` for which the terminal condition is attainable
//! (multi-start projected gradient on the terminal infidelity), then minimizes
//! the weighted stage cost over the first `m` controls with an
//! augmented-Lagrangian treatment of the terminal condition, for `m` and a few
//! longer reach lengths. Candidates are ranked by the exact full-horizon cost.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{nominal_step, ControlAxes};
use crate::error::{invalid, Error, Result};
use crate::optim::{
    augmented_lagrangian, projected_gradient, AugmentedLagrangianOptions,
    ProjectedGradientOptions, SymmetricBox,
};
use crate::qubit::{distance, pauli_exponential_unchecked, trace_distance};
use crate::record::RunRecord;
use crate::{CoeffVector, NominalModel, QubitState, Trajectory};

/// Tie window on the cost when ranking candidates.
const COST_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSpec {
    /// Prediction horizon `L` in steps.
    pub horizon: usize,
    /// Geometric stage weight, `> 1`.
    pub theta: f64,
    /// Componentwise control bound, rad/ns.
    pub bound: f64,
    pub model: NominalModel,
    pub target: QubitState,
}

impl OcpSpec {
    pub fn new(
        horizon: usize,
        theta: f64,
        bound: f64,
        model: NominalModel,
        target: QubitState,
    ) -> Result<Self> {
        let spec = Self {
            horizon,
            theta,
            bound,
            model,
            target,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least one step"));
        }
        if !(self.theta.is_finite() && self.theta > 1.0) {
            return Err(invalid("stage weight theta must exceed one"));
        }
        if !(self.bound.is_finite() && self.bound > 0.0) {
            return Err(invalid("control bound must be positive"));
        }
        Ok(())
    }

    /// `(theta^L - 1) / (theta - 1)`, the cost of a trajectory that never
    /// gets closer than distance one.
    pub fn cost_ceiling(&self) -> f64 {
        (self.theta.powi(self.horizon as i32) - 1.0) / (self.theta - 1.0)
    }

    fn axes(&self) -> ControlAxes {
        self.model.axes
    }
}

/// Piecewise-constant control values, one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSequence {
    controls: Vec<CoeffVector>,
}

impl ControlSequence {
    /// Checks every entry against the componentwise bound and the axes.
    pub fn new(controls: Vec<CoeffVector>, bound: f64, axes: ControlAxes) -> Result<Self> {
        for (l, u) in controls.iter().enumerate() {
            if !u.is_finite() {
                return Err(invalid(format!("control {l} is not finite")));
            }
            if !axes.admits(*u) {
                return Err(invalid(format!("control {l} actuates an inactive axis")));
            }
            if u.max_abs() > bound {
                return Err(invalid(format!("control {l} exceeds bound {bound}")));
            }
        }
        Ok(Self { controls })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            controls: vec![CoeffVector::zero(); len],
        }
    }

    pub fn as_slice(&self) -> &[CoeffVector] {
        &self.controls
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Receding-horizon shift: drop the applied control, append zero.
    pub fn shifted(&self) -> Self {
        let mut controls: Vec<_> = self.controls.iter().skip(1).copied().collect();
        controls.push(CoeffVector::zero());
        Self { controls }
    }

    /// `sum |u_l|^2`
    pub fn energy(&self) -> f64 {
        self.controls.iter().map(|u| u.norm_sq()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Random starting points per reach length, in addition to the zero and
    /// warm starts.
    pub restarts: usize,
    pub max_iterations: usize,
    pub fd_step: f64,
    pub gradient_tolerance: f64,
    /// Terminal tolerance on the trace distance.
    pub terminal_tolerance: f64,
    pub initial_penalty: f64,
    pub penalty_rounds: usize,
    /// Reach lengths beyond the minimal one that are also optimized.
    pub extra_horizons: usize,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            restarts: 6,
            max_iterations: 400,
            fd_step: 1e-6,
            gradient_tolerance: 1e-10,
            terminal_tolerance: 1e-4,
            initial_penalty: 10.0,
            penalty_rounds: 10,
            extra_horizons: 1,
            seed: 0x5eed,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.terminal_tolerance.is_finite() && self.terminal_tolerance > 0.0) {
            return Err(invalid("terminal tolerance must be positive"));
        }
        if !(self.fd_step.is_finite() && self.fd_step > 0.0) {
            return Err(invalid("finite-difference step must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpSolution {
    pub controls: ControlSequence,
    pub cost: f64,
    pub predicted: Trajectory,
    /// Smallest `l` with the predicted state within tolerance of the target;
    /// `None` when it is never reached.
    pub lstar: Option<usize>,
    /// Trace distance between the last predicted state and the target.
    pub terminal_violation: f64,
}

/// Nominal trajectory of `controls` from `s0`.
pub fn predict(spec: &OcpSpec, s0: QubitState, controls: &[CoeffVector]) -> Result<Trajectory> {
    Trajectory::simulate(&spec.model, s0, controls)
}

/// `J_L = sum_{l<L} theta^l ||psi_l - target||` along the nominal prediction.
pub fn cost_jl(spec: &OcpSpec, s0: QubitState, u: &ControlSequence) -> Result<f64> {
    if u.len() != spec.horizon {
        return Err(invalid(format!(
            "expected {} controls, got {}",
            spec.horizon,
            u.len()
        )));
    }
    let traj = predict(spec, s0, u.as_slice())?;
    weighted_cost(spec, &traj)
}

fn weighted_cost(spec: &OcpSpec, traj: &Trajectory) -> Result<f64> {
    let mut cost = 0.0;
    let mut w = 1.0;
    for p in traj.points.iter().take(spec.horizon) {
        cost += w * trace_distance(&p.state, &spec.target)?;
        w *= spec.theta;
    }
    Ok(cost)
}

/// Solves the OCP from `s0` without warm start or memoization.
pub fn solve_ocp(spec: &OcpSpec, s0: QubitState, params: &SolverParams) -> Result<OcpSolution> {
    OcpSolver::new(spec.clone(), params.clone())?.solve(s0, None)
}

/// Memo of solved problems keyed by the exact bits of the canonical initial
/// state and the warm start. Solves are pure functions of that key, so
/// sharing a cache between runs never changes results.
#[derive(Debug, Default)]
pub struct SolveCache {
    map: Mutex<HashMap<Vec<u64>, Vec<CoeffVector>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl SolveCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    fn key(s0: &QubitState, warm: Option<&ControlSequence>) -> Vec<u64> {
        let mut key = Vec::with_capacity(4 + warm.map_or(0, |w| 3 * w.len()));
        for a in s0.amplitudes() {
            key.push(a.re.to_bits());
            key.push(a.im.to_bits());
        }
        if let Some(w) = warm {
            for u in w.as_slice() {
                key.extend(u.to_array().map(f64::to_bits));
            }
        }
        key
    }
}

/// Receding-horizon solver bound to one problem description.
pub struct OcpSolver<'c> {
    spec: OcpSpec,
    params: SolverParams,
    cache: Option<&'c SolveCache>,
    axes: Vec<usize>,
    target_perp: QubitState,
}

impl<'c> OcpSolver<'c> {
    pub fn new(spec: OcpSpec, params: SolverParams) -> Result<Self> {
        spec.validate()?;
        params.validate()?;
        let axes = spec
            .axes()
            .as_mask()
            .iter()
            .enumerate()
            .filter_map(|(i, &on)| on.then_some(i))
            .collect();
        let target_perp = spec.target.orthogonal();
        Ok(Self {
            spec,
            params,
            cache: None,
            axes,
            target_perp,
        })
    }

    pub fn with_cache(mut self, cache: &'c SolveCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn spec(&self) -> &OcpSpec {
        &self.spec
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    /// Solves from `s0`, optionally seeding the search with `warm`.
    ///
    /// The optimization runs on the phase-canonical form of `s0`, so the
    /// controls depend only on the physical state; the reported prediction is
    /// propagated from `s0` as given.
    pub fn solve(&self, s0: QubitState, warm: Option<&ControlSequence>) -> Result<OcpSolution> {
        if let Some(w) = warm {
            if w.len() != self.spec.horizon {
                return Err(invalid("warm start length differs from the horizon"));
            }
        }
        let canonical = s0.canonical();
        let key = self.cache.map(|_| SolveCache::key(&canonical, warm));
        if let (Some(cache), Some(key)) = (self.cache, key.as_ref()) {
            let hit = cache.map.lock().expect("cache lock").get(key).cloned();
            if let Some(controls) = hit {
                cache.hits.fetch_add(1, Ordering::Relaxed);
                return self.finish(s0, controls);
            }
            cache.misses.fetch_add(1, Ordering::Relaxed);
        }

        let controls = self.optimize(&canonical, warm)?;
        if let (Some(cache), Some(key)) = (self.cache, key) {
            cache
                .map
                .lock()
                .expect("cache lock")
                .insert(key, controls.clone());
        }
        self.finish(s0, controls)
    }

    fn finish(&self, s0: QubitState, controls: Vec<CoeffVector>) -> Result<OcpSolution> {
        let sol = self.evaluate(s0, controls)?;
        if sol.terminal_violation > self.params.terminal_tolerance {
            return Err(Error::SolverFailure {
                violation: sol.terminal_violation,
                tolerance: self.params.terminal_tolerance,
                best: Box::new(sol),
            });
        }
        Ok(sol)
    }

    fn evaluate(&self, s0: QubitState, controls: Vec<CoeffVector>) -> Result<OcpSolution> {
        let predicted = predict(&self.spec, s0, &controls)?;
        let cost = weighted_cost(&self.spec, &predicted)?;
        let tol = self.params.terminal_tolerance;
        let mut lstar = None;
        for (l, s) in predicted.states().enumerate() {
            if trace_distance(s, &self.spec.target)? <= tol {
                lstar = Some(l);
                break;
            }
        }
        let terminal_violation = trace_distance(predicted.last_state(), &self.spec.target)?;
        Ok(OcpSolution {
            controls: ControlSequence { controls },
            cost,
            predicted,
            lstar,
            terminal_violation,
        })
    }

    fn decode(&self, x: &[f64]) -> Vec<CoeffVector> {
        let na = self.axes.len();
        let mut out = vec![CoeffVector::zero(); self.spec.horizon];
        for (l, chunk) in x.chunks(na).enumerate() {
            let mut a = [0.0; 3];
            for (&axis, &v) in self.axes.iter().zip(chunk) {
                a[axis] = v;
            }
            out[l] = CoeffVector::from_array(a);
        }
        out
    }

    fn encode(&self, controls: &[CoeffVector], m: usize) -> Vec<f64> {
        controls
            .iter()
            .take(m)
            .flat_map(|u| {
                let a = u.to_array();
                self.axes.iter().map(move |&i| a[i])
            })
            .collect()
    }

    /// Rolls `m` steps from `s0` and returns the component orthogonal to the
    /// target, `<target_perp|psi_m>`, whose modulus is the trace distance.
    /// `stage` receives `(l, |<target_perp|psi_l>|)` for `1 <= l < m`.
    fn roll(&self, s0: &QubitState, x: &[f64], mut stage: impl FnMut(usize, f64)) -> Complex64 {
        let na = self.axes.len();
        let drift = self.spec.model.drift();
        let ts = self.spec.model.ts;
        let m = x.len() / na;
        let mut psi = *s0;
        for l in 0..m {
            let mut a = [0.0; 3];
            for (j, &axis) in self.axes.iter().enumerate() {
                a[axis] = x[l * na + j];
            }
            let u = pauli_exponential_unchecked(CoeffVector::from_array(a) + drift, ts);
            psi = u.apply_raw(&psi);
            if l + 1 < m {
                stage(l + 1, self.target_perp.inner(&psi).norm());
            }
        }
        self.target_perp.inner(&psi)
    }

    fn starts(&self, m: usize, warm: Option<&ControlSequence>) -> Vec<Vec<f64>> {
        let dim = m * self.axes.len();
        let mut starts = Vec::with_capacity(self.params.restarts + 2);
        if let Some(w) = warm {
            starts.push(self.encode(w.as_slice(), m));
        }
        starts.push(vec![0.0; dim]);
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        rng.set_stream(m as u64);
        let b = self.spec.bound;
        for _ in 0..self.params.restarts {
            starts.push((0..dim).map(|_| rng.random_range(-b..=b)).collect());
        }
        starts
    }

    /// Multi-start minimization of the terminal infidelity after `m` steps.
    /// Returns the feasible end points and the best point found.
    fn reach(&self, s0: &QubitState, m: usize, warm: Option<&ControlSequence>) -> (Vec<Vec<f64>>, (f64, Vec<f64>)) {
        let tol = self.params.terminal_tolerance;
        let opts = ProjectedGradientOptions {
            max_iterations: self.params.max_iterations,
            gradient_tolerance: self.params.gradient_tolerance,
            fd_step: self.params.fd_step,
            target_value: Some((0.1 * tol).powi(2)),
            record_history: false,
        };
        let bounds = SymmetricBox {
            bound: self.spec.bound,
        };
        let mut feasible = Vec::new();
        let mut best = (f64::INFINITY, Vec::new());
        for x0 in self.starts(m, warm) {
            let run = projected_gradient(
                |x| self.roll(s0, x, |_, _| ()).norm_sqr(),
                &x0,
                bounds,
                &opts,
            );
            if run.value < best.0 {
                best = (run.value, run.x.clone());
            }
            if run.value.sqrt() <= tol {
                feasible.push(run.x);
            }
        }
        (feasible, best)
    }

    /// Weighted stage cost over the first `m` steps with the terminal
    /// condition as an equality constraint.
    fn refine(&self, s0: &QubitState, x0: &[f64]) -> Vec<f64> {
        let theta = self.spec.theta;
        let opts = AugmentedLagrangianOptions {
            initial_penalty: self.params.initial_penalty,
            penalty_growth: 2.0,
            max_rounds: self.params.penalty_rounds,
            min_rounds: 1,
            constraint_tolerance: 0.1 * self.params.terminal_tolerance,
            inner: ProjectedGradientOptions {
                max_iterations: self.params.max_iterations,
                gradient_tolerance: self.params.gradient_tolerance,
                fd_step: self.params.fd_step,
                target_value: None,
                record_history: false,
            },
        };
        let problem = |x: &[f64], c: &mut [f64]| {
            let mut cost = 0.0;
            let terminal = self.roll(s0, x, |l, d| cost += theta.powi(l as i32) * d);
            c[0] = terminal.re;
            c[1] = terminal.im;
            cost
        };
        let out = augmented_lagrangian(
            problem,
            2,
            x0,
            SymmetricBox {
                bound: self.spec.bound,
            },
            &opts,
        );
        out.x
    }

    fn optimize(&self, s0: &QubitState, warm: Option<&ControlSequence>) -> Result<Vec<CoeffVector>> {
        let tol = self.params.terminal_tolerance;
        let horizon = self.spec.horizon;
        if distance(s0, &self.spec.target) <= tol {
            // Already at the target: zero control holds it.
            return Ok(vec![CoeffVector::zero(); horizon]);
        }

        let mut min_reach = None;
        let mut best_attempt = (f64::INFINITY, Vec::new());
        let mut seeds: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
        for m in 1..=horizon {
            if let Some(m0) = min_reach {
                if m > m0 + self.params.extra_horizons {
                    break;
                }
            }
            let (feasible, best) = self.reach(s0, m, warm);
            if m == horizon || best.0 < best_attempt.0 {
                best_attempt = best;
            }
            if !feasible.is_empty() {
                min_reach.get_or_insert(m);
                seeds.push((m, feasible));
            }
        }

        if min_reach.is_none() {
            let controls = self.decode(&best_attempt.1);
            let best = self.evaluate(*s0, controls)?;
            return Err(Error::SolverFailure {
                violation: best.terminal_violation,
                tolerance: tol,
                best: Box::new(best),
            });
        }

        let mut best: Option<(f64, f64, Vec<CoeffVector>)> = None;
        for (_, starts) in seeds {
            for x0 in starts {
                for x in [self.refine(s0, &x0), x0] {
                    let controls = self.decode(&x);
                    let sol = self.evaluate(*s0, controls)?;
                    if sol.terminal_violation > tol {
                        continue;
                    }
                    let energy = sol.controls.energy();
                    let better = match &best {
                        None => true,
                        Some((c, e, _)) => {
                            sol.cost < c - COST_TIE || (sol.cost <= c + COST_TIE && energy < *e)
                        }
                    };
                    if better {
                        best = Some((sol.cost, energy, sol.controls.controls));
                    }
                }
            }
        }
        match best {
            Some((_, _, controls)) => Ok(controls),
            None => {
                let controls = self.decode(&best_attempt.1);
                let best = self.evaluate(*s0, controls)?;
                Err(Error::SolverFailure {
                    violation: best.terminal_violation,
                    tolerance: tol,
                    best: Box::new(best),
                })
            }
        }
    }
}

/// Receding-horizon control of the nominal model without measurement: each
/// step applies the first optimal control and re-solves from the predicted
/// state.
pub fn tompc_closed_loop(
    spec: &OcpSpec,
    s0: QubitState,
    params: &SolverParams,
    steps: usize,
) -> Result<RunRecord> {
    let solver = OcpSolver::new(spec.clone(), params.clone())?;
    tompc_closed_loop_with(&solver, s0, steps)
}

pub fn tompc_closed_loop_with(solver: &OcpSolver<'_>, s0: QubitState, steps: usize) -> Result<RunRecord> {
    if steps == 0 {
        return Err(invalid("number of steps must be at least one"));
    }
    let model = &solver.spec().model;
    let mut record = RunRecord::new(s0, solver.spec().target);
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
        let next = nominal_step(model, u, &state)?;
        record.push(u, next, next, None, next, sol.lstar);
        state = next;
        warm = Some(sol.controls.shifted());
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::fidelity_sq;
    use approx::assert_abs_diff_eq;

    fn setup() -> OcpSpec {
        let model = NominalModel::new(0.05, ControlAxes::XY, 1.0).unwrap();
        OcpSpec::new(10, 1.9, 0.5, model, QubitState::one()).unwrap()
    }

    #[test]
    fn spec_validation() {
        let model = NominalModel::new(0.05, ControlAxes::XY, 1.0).unwrap();
        assert!(OcpSpec::new(0, 1.9, 0.5, model, QubitState::one()).is_err());
        assert!(OcpSpec::new(10, 1.0, 0.5, model, QubitState::one()).is_err());
        assert!(OcpSpec::new(10, 1.9, 0.0, model, QubitState::one()).is_err());
    }

    #[test]
    fn control_sequence_validation() {
        let ok = ControlSequence::new(vec![CoeffVector::new(0.5, -0.5, 0.0)], 0.5, ControlAxes::XY);
        assert!(ok.is_ok());
        let over = ControlSequence::new(vec![CoeffVector::new(0.51, 0.0, 0.0)], 0.5, ControlAxes::XY);
        assert!(over.is_err());
        let axis = ControlSequence::new(vec![CoeffVector::new(0.0, 0.0, 0.1)], 0.5, ControlAxes::XY);
        assert!(axis.is_err());
    }

    #[test]
    fn shift_appends_zero() {
        let u = ControlSequence::new(
            vec![CoeffVector::new(0.1, 0.0, 0.0), CoeffVector::new(0.2, 0.0, 0.0)],
            0.5,
            ControlAxes::XY,
        )
        .unwrap();
        let s = u.shifted();
        assert_eq!(s.as_slice(), &[CoeffVector::new(0.2, 0.0, 0.0), CoeffVector::zero()]);
    }

    #[test]
    fn cost_at_fixed_point_is_zero() {
        let spec = setup();
        let c = cost_jl(&spec, QubitState::one(), &ControlSequence::zeros(10)).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn cost_of_idle_antipode_is_ceiling() {
        let spec = setup();
        let c = cost_jl(&spec, QubitState::zero(), &ControlSequence::zeros(10)).unwrap();
        assert_abs_diff_eq!(c, spec.cost_ceiling(), epsilon = 1e-9);
    }

    #[test]
    fn cost_rejects_wrong_length() {
        let spec = setup();
        assert!(cost_jl(&spec, QubitState::zero(), &ControlSequence::zeros(3)).is_err());
    }

    #[test]
    fn solve_at_target_is_trivial() {
        let spec = setup();
        let sol = solve_ocp(&spec, QubitState::one(), &SolverParams::default()).unwrap();
        assert_eq!(sol.controls, ControlSequence::zeros(10));
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.lstar, Some(0));
    }

    #[test]
    fn solve_transfers_in_three_steps() {
        let spec = setup();
        let sol = solve_ocp(&spec, QubitState::zero(), &SolverParams::default()).unwrap();
        assert_eq!(sol.lstar, Some(3));
        assert!(sol.terminal_violation <= 1e-4);
        assert!(sol.cost <= spec.cost_ceiling());
        let last = sol.predicted.last_state();
        assert!(fidelity_sq(last, &QubitState::one()) >= 1.0 - 1e-8);
    }

    #[test]
    fn solver_failure_when_horizon_too_short() {
        let model = NominalModel::new(0.05, ControlAxes::XY, 1.0).unwrap();
        let spec = OcpSpec::new(2, 1.9, 0.5, model, QubitState::one()).unwrap();
        match solve_ocp(&spec, QubitState::zero(), &SolverParams::default()) {
            Err(Error::SolverFailure { violation, best, .. }) => {
                assert!(violation > 1e-4);
                assert_eq!(best.controls.len(), 2);
            }
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn cache_is_transparent() {
        let spec = setup();
        let params = SolverParams::default();
        let cache = SolveCache::new();
        let cached = OcpSolver::new(spec.clone(), params.clone()).unwrap().with_cache(&cache);
        let s0 = QubitState::plus().with_phase(0.7);
        let a = cached.solve(s0, None).unwrap();
        let b = cached.solve(s0, None).unwrap();
        let c = solve_ocp(&spec, s0, &params).unwrap();
        assert_eq!(cache.hits(), 1);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
