//! Time-optimal model predictive control of a single qubit with projective
//! measurement feedback.
//!
//! The state algebra, dynamics and analytical bounds are generic over the
//! floating-point type through [`Scalar`]; the optimizers and closed-loop
//! drivers work in `f64`. The aliases below fix the scalar to `f64` for the
//! common case.
//!
//! ```
//! use qtompc_core::{ControlAxes, NominalModel, OcpSpec, QubitState, SolverParams, solve_ocp};
//!
//! let model = NominalModel::new(0.05, ControlAxes::XY, 1.0).unwrap();
//! let spec = OcpSpec::new(10, 1.9, 0.5, model, QubitState::one()).unwrap();
//! let sol = solve_ocp(&spec, QubitState::zero(), &SolverParams::default()).unwrap();
//! assert_eq!(sol.lstar, Some(3));
//! ```

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod grape;
pub mod ocp;
pub mod optim;
pub mod qmpc;
pub mod qubit;
pub mod record;
pub mod scalar;

pub use bounds::{
    characteristic_roots, convergence_rate, failure_probabilities, h_decomposition, h_function,
    h_sum_form, max_secondary_root_modulus, p_tar_lower_bound, success_bound, BoundInputs,
    HDecomposition, RateCase,
};
pub use dynamics::{
    nominal_step, sample_uncertainty, uncertain_step, ControlAxes, NoiseStream, UncertaintyFamily,
    UncertaintyKind, UncertaintyModel,
};
pub use error::{Error, Result};
pub use grape::{grape_optimize, grape_replay, GrapeParams, GrapeResult};
pub use ocp::{
    cost_jl, predict, solve_ocp, tompc_closed_loop, tompc_closed_loop_with, ControlSequence,
    OcpSolution, OcpSolver, OcpSpec, SolveCache, SolverParams,
};
pub use qmpc::{collapse, povm_measure, qmpc_run, TrialSeeds};
pub use qubit::{
    apply, bloch_to_state, fidelity_sq, pauli_exponential, state_to_bloch, trace_distance,
};
pub use record::{e_track, infidelity, replay_open_loop, MeasurementOutcome, RunRecord, StepRecord};
pub use scalar::Scalar;

pub type QubitState = qubit::State<f64>;
pub type CoeffVector = qubit::Coeff<f64>;
pub type BlochVector = qubit::Bloch<f64>;
pub type Propagator = qubit::Propagator<f64>;
pub type NominalModel = dynamics::NominalModel<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
