use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtompc_core::{
    apply, bloch_to_state, collapse, fidelity_sq, nominal_step, pauli_exponential, povm_measure,
    qmpc_run, sample_uncertainty, tompc_closed_loop, uncertain_step, BlochVector, CoeffVector,
    ControlAxes, NoiseStream, NominalModel, OcpSolver, OcpSpec, QubitState, SolverParams,
    TrialSeeds, UncertaintyFamily, UncertaintyKind, UncertaintyModel,
};

fn spec() -> OcpSpec {
    let model = NominalModel::new(0.05, ControlAxes::XY, 1.0).unwrap();
    OcpSpec::new(10, 1.9, 0.5, model, QubitState::one()).unwrap()
}

fn uncertainty(kind: UncertaintyKind, trial: u64) -> UncertaintyModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial);
    UncertaintyFamily::standard(kind).instantiate(&mut rng)
}

#[test]
fn born_rule_frequency() {
    let reference = QubitState::zero();
    let plant = QubitState::new(Complex64::new(0.8, 0.1), Complex64::new(0.3, -0.5)).unwrap();
    let p = fidelity_sq(&reference, &plant);
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let hits = (0..n)
        .filter(|_| povm_measure(&reference, &plant, &mut rng).unwrap().success)
        .count();
    let freq = hits as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((freq - p).abs() <= 3.0 * sigma, "freq {freq} vs p {p}");
}

#[test]
fn collapse_is_repeatable() {
    let reference = QubitState::plus();
    let plant = QubitState::new(Complex64::new(0.9, 0.0), Complex64::new(0.1, 0.4)).unwrap();

    let ok = collapse(&reference, &plant, true).unwrap();
    assert_eq!(fidelity_sq(&reference, &ok.post_state), 1.0);
    let again = collapse(&reference, &ok.post_state, true).unwrap();
    assert!((again.probability - 1.0).abs() < 1e-15);

    let bad = collapse(&reference, &plant, false).unwrap();
    assert!(fidelity_sq(&reference, &bad.post_state) < 1e-24);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        assert!(!povm_measure(&reference, &bad.post_state, &mut rng).unwrap().success);
    }
}

#[test]
fn disturbances_respect_their_bounds() {
    for kind in UncertaintyKind::ALL_DISTURBED {
        for trial in 0..20 {
            let unc = uncertainty(kind, trial);
            let stream = NoiseStream::new(trial + 100);
            for k in 0..200 {
                let d = sample_uncertainty(&unc, k, 1.0, &stream);
                assert!(d.x.abs() <= 0.05 && d.y.abs() <= 0.05, "{kind}: {d:?}");
                assert_eq!(d.z, 0.0);
            }
        }
    }
}

#[test]
fn uniform_disturbance_moments() {
    let unc = uncertainty(UncertaintyKind::Uniform, 0);
    let stream = NoiseStream::new(77);
    let n = 20_000;
    let xs: Vec<f64> = (0..n).map(|k| sample_uncertainty(&unc, k, 1.0, &stream).x).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let expected_var = 0.05f64.powi(2) / 3.0;
    assert!(mean.abs() < 4.0 * (expected_var / n as f64).sqrt());
    assert!((var - expected_var).abs() / expected_var < 0.05);
}

#[test]
fn step_fidelity_floor() {
    let model = NominalModel::new(0.05, ControlAxes::XY, 1.0).unwrap();
    let floor = (0.05f64 * 2f64.sqrt()).cos().powi(2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20_000 {
        let s = QubitState::new(
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let u = CoeffVector::new(rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5), 0.0);
        let d = CoeffVector::new(rng.random_range(-0.05..=0.05), rng.random_range(-0.05..=0.05), 0.0);
        let a = nominal_step(&model, u, &s).unwrap();
        let b = uncertain_step(&model, u, d, &s).unwrap();
        assert!(fidelity_sq(&a, &b) >= floor - 1e-12);
    }
}

#[test]
fn floor_is_tight_for_parallel_disturbance() {
    // With the disturbance parallel to the nominal generator, a state whose
    // Bloch vector is orthogonal to both attains cos^2(|delta| ts) exactly.
    let w = CoeffVector::new(0.3, -0.4, 0.0);
    let delta = w.scale(0.05 / w.norm());
    let ts = 1.7;
    let s = bloch_to_state(BlochVector::new(0.0, 0.0, 1.0)).unwrap();
    let a = apply(&pauli_exponential(w, ts).unwrap(), &s).unwrap();
    let b = apply(&pauli_exponential(w + delta, ts).unwrap(), &s).unwrap();
    let expected = (delta.norm() * ts).cos().powi(2);
    assert!((fidelity_sq(&a, &b) - expected).abs() < 1e-12);
}

#[test]
fn logged_success_probabilities_respect_floor() {
    let solver = OcpSolver::new(spec(), SolverParams::default()).unwrap();
    let floor = (0.05f64 * 2f64.sqrt()).cos().powi(2);
    for kind in UncertaintyKind::ALL_DISTURBED {
        let unc = uncertainty(kind, 3);
        let seeds = TrialSeeds {
            noise: 21,
            measurement: 22,
        };
        let rec = qmpc_run(&solver, &unc, QubitState::zero(), 30, seeds).unwrap();
        assert!(rec.hypothesis_ok);
        for s in &rec.steps {
            assert!(s.p_success >= floor - 1e-12, "{kind} k={}: {}", s.k, s.p_success);
            let o = s.outcome.unwrap();
            assert_eq!(o.probability, s.p_success);
        }
    }
}

#[test]
fn closed_loop_is_reproducible() {
    let solver = OcpSolver::new(spec(), SolverParams::default()).unwrap();
    let unc = uncertainty(UncertaintyKind::Gaussian, 8);
    let seeds = TrialSeeds {
        noise: 1,
        measurement: 2,
    };
    let a = qmpc_run(&solver, &unc, QubitState::zero(), 25, seeds).unwrap();
    let b = qmpc_run(&solver, &unc, QubitState::zero(), 25, seeds).unwrap();
    assert_eq!(a, b);
}

#[test]
fn undisturbed_loop_matches_nominal_controller() {
    let spec = spec();
    let params = SolverParams::default();
    let nominal = tompc_closed_loop(&spec, QubitState::zero(), &params, 12).unwrap();
    let solver = OcpSolver::new(spec, params).unwrap();
    let seeds = TrialSeeds {
        noise: 4,
        measurement: 5,
    };
    let measured = qmpc_run(&solver, &UncertaintyModel::None, QubitState::zero(), 12, seeds).unwrap();
    assert_eq!(measured.etrack_total(), 0.0);
    for (a, b) in nominal.steps.iter().zip(&measured.steps) {
        assert_eq!(a.control, b.control);
        assert_eq!(a.post, b.post);
        assert!(b.outcome.unwrap().success);
    }
    assert!(measured.steps[2].fid_target >= 1.0 - 1e-8);
}

#[test]
fn long_sample_time_flags_the_hypothesis() {
    let model = NominalModel::new(0.05, ControlAxes::XY, 30.0).unwrap();
    let spec = OcpSpec::new(3, 1.9, 0.5, model, QubitState::one()).unwrap();
    let solver = OcpSolver::new(spec, SolverParams::default()).unwrap();
    let unc = uncertainty(UncertaintyKind::Uniform, 0);
    let seeds = TrialSeeds {
        noise: 0,
        measurement: 0,
    };
    match qmpc_run(&solver, &unc, QubitState::one(), 2, seeds) {
        Ok(rec) => assert!(!rec.hypothesis_ok),
        Err(qtompc_core::Error::RunAborted { partial, .. }) => assert!(!partial.hypothesis_ok),
        Err(e) => panic!("{e}"),
    }
}
