use nalgebra::Matrix2;
use num_complex::Complex64;
use proptest::prelude::*;

use qtompc_core::{
    apply, bloch_to_state, fidelity_sq, pauli_exponential, state_to_bloch, trace_distance,
    CoeffVector, QubitState,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// exp(-i ts w.sigma) from the eigendecomposition of the Hermitian generator.
fn expm_oracle(w: [f64; 3], ts: f64) -> Matrix2<Complex64> {
    let h = Matrix2::new(c(w[2], 0.0), c(w[0], -w[1]), c(w[0], w[1]), c(-w[2], 0.0));
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| (c(0.0, -l * ts)).exp()));
    v * phases * v.adjoint()
}

fn coeff() -> impl Strategy<Value = [f64; 3]> {
    [-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64]
}

fn state() -> impl Strategy<Value = QubitState> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
        .prop_map(|(a, b, cc, d)| QubitState::new(c(a, b), c(cc, d)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn propagator_matches_eigendecomposition(w in coeff(), ts in 0.0..4.0f64) {
        let u = pauli_exponential(CoeffVector::from_array(w), ts).unwrap().matrix();
        let oracle = expm_oracle(w, ts);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((u[i][j] - oracle[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn propagator_is_unitary(w in coeff(), ts in 0.0..10.0f64) {
        let u = pauli_exponential(CoeffVector::from_array(w), ts).unwrap();
        prop_assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn parallel_generators_compose(w in coeff(), t1 in 0.0..2.0f64, t2 in 0.0..2.0f64, s in state()) {
        let w = CoeffVector::from_array(w);
        let split = apply(
            &pauli_exponential(w, t2).unwrap(),
            &apply(&pauli_exponential(w, t1).unwrap(), &s).unwrap(),
        )
        .unwrap();
        let joint = apply(&pauli_exponential(w, t1 + t2).unwrap(), &s).unwrap();
        let [a0, a1] = split.amplitudes();
        let [b0, b1] = joint.amplitudes();
        prop_assert!((a0 - b0).norm() < 1e-10 && (a1 - b1).norm() < 1e-10);
    }

    #[test]
    fn trace_distance_is_half_bloch_distance(a in state(), b in state()) {
        let td = trace_distance(&a, &b).unwrap();
        let bloch = 0.5 * state_to_bloch(&a).distance(state_to_bloch(&b));
        prop_assert!((td - bloch).abs() < 1e-10);
        prop_assert!((td * td + fidelity_sq(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_phase_is_invisible(a in state(), b in state(), phi in -7.0..7.0f64) {
        let rotated = a.with_phase(phi);
        prop_assert!((trace_distance(&rotated, &b).unwrap() - trace_distance(&a, &b).unwrap()).abs() < 1e-12);
        prop_assert!((fidelity_sq(&rotated, &b) - fidelity_sq(&a, &b)).abs() < 1e-12);
        prop_assert!(trace_distance(&a, &rotated).unwrap() < 1e-12);
    }

    #[test]
    fn bloch_round_trip(a in state()) {
        let back = bloch_to_state(state_to_bloch(&a)).unwrap();
        prop_assert!(trace_distance(&a, &back).unwrap() < 1e-12);
        prop_assert!((state_to_bloch(&a).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evolution_preserves_distance(a in state(), b in state(), w in coeff(), ts in 0.0..3.0f64) {
        let u = pauli_exponential(CoeffVector::from_array(w), ts).unwrap();
        let before = trace_distance(&a, &b).unwrap();
        let after = trace_distance(&apply(&u, &a).unwrap(), &apply(&u, &b).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-9);
    }
}

#[test]
fn orthogonal_states_are_maximally_distant() {
    let s = QubitState::new(c(0.6, 0.1), c(-0.2, 0.7)).unwrap();
    assert!((trace_distance(&s, &s.orthogonal()).unwrap() - 1.0).abs() < 1e-12);
    assert!(fidelity_sq(&s, &s.orthogonal()) < 1e-24);
}

#[test]
fn zero_generator_is_identity() {
    let s = QubitState::plus();
    let out = apply(&pauli_exponential(CoeffVector::zero(), 5.0).unwrap(), &s).unwrap();
    assert_eq!(out.amplitudes(), s.amplitudes());
}
