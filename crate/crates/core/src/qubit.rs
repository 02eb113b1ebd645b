//! Pure-state qubit algebra: states, Pauli-vector generators, propagators and
//! the distance measures used throughout the controller.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Real 3-vector of angular-frequency coefficients multiplying the Pauli
/// matrices, in rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Coeff<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Coeff<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn scale(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Scalar> Add for Coeff<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> Sub for Coeff<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Neg for Coeff<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Bloch-sphere coordinates of a pure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bloch<T> {
    pub x1: T,
    pub x2: T,
    pub x3: T,
}

impl<T: Scalar> Bloch<T> {
    pub fn new(x1: T, x2: T, x3: T) -> Self {
        Self { x1, x2, x3 }
    }

    pub fn norm(self) -> T {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3).sqrt()
    }

    pub fn distance(self, o: Self) -> T {
        let (a, b, c) = (self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3);
        (a * a + b * b + c * c).sqrt()
    }
}

/// Unit vector in C^2.
///
/// Global phase is carried along untouched; call [`State::canonical`] when two
/// states have to be compared bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State<T> {
    amps: [Complex<T>; 2],
}

impl<T: Scalar> State<T> {
    /// Normalizes an arbitrary nonzero amplitude pair.
    pub fn new(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
            return Err(invalid("state amplitudes must be finite"));
        }
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if n <= T::lit(T::AMPLITUDE_EPS) {
            return Err(invalid("state amplitudes must not vanish"));
        }
        let inv = T::one() / n;
        Ok(Self {
            amps: [a * inv, b * inv],
        })
    }

    /// Accepts amplitudes that are already unit norm, renormalizing small
    /// drift and rejecting anything beyond the drift limit.
    pub fn from_normalized(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        Self { amps: [a, b] }.checked()
    }

    /// Real-amplitude state `a|0> + b|1>`.
    pub fn real(a: T, b: T) -> Result<Self> {
        Self::new(Complex::new(a, T::zero()), Complex::new(b, T::zero()))
    }

    /// |0>
    pub fn zero() -> Self {
        Self {
            amps: [Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero())],
        }
    }

    /// |1>
    pub fn one() -> Self {
        Self {
            amps: [Complex::new(T::zero(), T::zero()), Complex::new(T::one(), T::zero())],
        }
    }

    /// (|0> + |1>)/sqrt(2)
    pub fn plus() -> Self {
        let h = T::FRAC_1_SQRT_2();
        Self {
            amps: [Complex::new(h, T::zero()), Complex::new(h, T::zero())],
        }
    }

    pub fn amplitudes(&self) -> [Complex<T>; 2] {
        self.amps
    }

    pub fn norm(&self) -> T {
        (self.amps[0].norm_sqr() + self.amps[1].norm_sqr()).sqrt()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps[0].conj() * other.amps[0] + self.amps[1].conj() * other.amps[1]
    }

    /// Multiplies by `e^{i phi}`.
    pub fn with_phase(&self, phi: T) -> Self {
        let p = Complex::from_polar(T::one(), phi);
        Self {
            amps: [self.amps[0] * p, self.amps[1] * p],
        }
    }

    /// Removes the global phase: the first amplitude whose magnitude exceeds
    /// the amplitude threshold becomes real and nonnegative.
    pub fn canonical(&self) -> Self {
        let eps = T::lit(T::AMPLITUDE_EPS);
        for a in self.amps {
            let m = a.norm();
            if m > eps {
                let p = a.conj() / m;
                return Self {
                    amps: [self.amps[0] * p, self.amps[1] * p],
                };
            }
        }
        *self
    }

    /// The unique (up to phase) state orthogonal to this one.
    pub fn orthogonal(&self) -> Self {
        let [a, b] = self.amps;
        Self {
            amps: [-b.conj(), a.conj()],
        }
    }

    #[cfg(test)]
    pub(crate) fn from_raw(amps: [Complex<T>; 2]) -> Self {
        Self { amps }
    }

    fn checked(self) -> Result<Self> {
        let n = self.norm();
        if !n.is_finite() {
            return Err(Error::Numeric("non-finite state amplitudes".into()));
        }
        let drift = (n - T::one()).abs();
        if drift > T::lit(T::NORM_DRIFT_MAX) {
            return Err(Error::Numeric(format!("state norm drifted to {n}")));
        }
        if drift > T::lit(T::NORM_TOL) {
            let inv = T::one() / n;
            return Ok(Self {
                amps: [self.amps[0] * inv, self.amps[1] * inv],
            });
        }
        Ok(self)
    }
}

/// 2x2 unitary evolution operator, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator<T> {
    m: [[Complex<T>; 2]; 2],
}

impl<T: Scalar> Propagator<T> {
    pub fn identity() -> Self {
        let o = Complex::new(T::one(), T::zero());
        let z = Complex::new(T::zero(), T::zero());
        Self { m: [[o, z], [z, o]] }
    }

    /// Wraps a matrix after checking `U^dagger U = I` entrywise.
    pub fn from_matrix(m: [[Complex<T>; 2]; 2]) -> Result<Self> {
        let u = Self { m };
        if !u.is_unitary(T::lit(T::NORM_DRIFT_MAX)) {
            return Err(invalid("matrix is not unitary"));
        }
        Ok(u)
    }

    pub fn matrix(&self) -> [[Complex<T>; 2]; 2] {
        self.m
    }

    pub fn dagger(&self) -> Self {
        let m = self.m;
        Self {
            m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]],
        }
    }

    /// Largest entrywise deviation of `U^dagger U` from the identity.
    pub fn unitarity_error(&self) -> T {
        let p = self.dagger() * *self;
        let id = Self::identity();
        let mut worst = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.m[i][j] - id.m[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.unitarity_error() <= tol
    }

    /// Matrix-vector product without the norm check.
    #[inline]
    pub(crate) fn apply_raw(&self, s: &State<T>) -> State<T> {
        let [a, b] = s.amps;
        State {
            amps: [
                self.m[0][0] * a + self.m[0][1] * b,
                self.m[1][0] * a + self.m[1][1] * b,
            ],
        }
    }
}

impl<T: Scalar> Mul for Propagator<T> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        let (a, b) = (self.m, r.m);
        let e = |i: usize, j: usize| a[i][0] * b[0][j] + a[i][1] * b[1][j];
        Self {
            m: [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]],
        }
    }
}

/// `exp(-i ts w.sigma) = cos(|w| ts) I - i sin(|w| ts) (w/|w|).sigma`.
pub fn pauli_exponential<T: Scalar>(w: Coeff<T>, ts: T) -> Result<Propagator<T>> {
    if !w.is_finite() || !ts.is_finite() {
        return Err(invalid("generator and duration must be finite"));
    }
    if ts < T::zero() {
        return Err(invalid("duration must be nonnegative"));
    }
    Ok(pauli_exponential_unchecked(w, ts))
}

#[inline]
pub(crate) fn pauli_exponential_unchecked<T: Scalar>(w: Coeff<T>, ts: T) -> Propagator<T> {
    let n = w.norm();
    let angle = n * ts;
    if angle < T::lit(T::ZERO_ANGLE) {
        return Propagator::identity();
    }
    let (s, c) = angle.sin_cos();
    let k = s / n;
    let (sx, sy, sz) = (w.x * k, w.y * k, w.z * k);
    Propagator {
        m: [
            [Complex::new(c, -sz), Complex::new(-sy, -sx)],
            [Complex::new(sy, -sx), Complex::new(c, sz)],
        ],
    }
}

/// Applies a propagator and enforces the unit-norm invariant.
pub fn apply<T: Scalar>(u: &Propagator<T>, s: &State<T>) -> Result<State<T>> {
    u.apply_raw(s).checked()
}

/// `|<a|b>|^2`
pub fn fidelity_sq<T: Scalar>(a: &State<T>, b: &State<T>) -> T {
    a.inner(b).norm_sqr().min(T::one())
}

/// Pure-state trace distance `sqrt(1 - |<a|b>|^2)`.
///
/// For unit vectors this equals `|a0 b1 - a1 b0|`, which is evaluated instead
/// because it keeps full relative precision for nearly equal states.
pub fn trace_distance<T: Scalar>(a: &State<T>, b: &State<T>) -> Result<T> {
    let radicand = T::one() - a.inner(b).norm_sqr();
    if radicand < -T::lit(T::NORM_TOL) {
        return Err(Error::Numeric(format!(
            "overlap exceeds one by {}",
            -radicand
        )));
    }
    Ok(distance(a, b))
}

/// Infallible trace distance for states produced by this crate, whose norms
/// are maintained within tolerance.
#[inline]
pub(crate) fn distance<T: Scalar>(a: &State<T>, b: &State<T>) -> T {
    let ([a0, a1], [b0, b1]) = (a.amps, b.amps);
    (a0 * b1 - a1 * b0).norm().min(T::one())
}

pub fn state_to_bloch<T: Scalar>(s: &State<T>) -> Bloch<T> {
    let [a, b] = s.amps;
    let ab = a.conj() * b;
    let two = T::lit(2.0);
    Bloch::new(two * ab.re, two * ab.im, a.norm_sqr() - b.norm_sqr())
}

/// Inverse of [`state_to_bloch`] up to global phase; the vector is normalized
/// first.
pub fn bloch_to_state<T: Scalar>(n: Bloch<T>) -> Result<State<T>> {
    let len = n.norm();
    if !len.is_finite() || len <= T::lit(T::AMPLITUDE_EPS) {
        return Err(invalid("Bloch vector must be finite and nonzero"));
    }
    let (x1, x2, x3) = (n.x1 / len, n.x2 / len, n.x3 / len);
    let two = T::lit(2.0);
    let a = ((T::one() + x3) / two).max(T::zero()).sqrt();
    let b_mag = ((T::one() - x3) / two).max(T::zero()).sqrt();
    let planar = (x1 * x1 + x2 * x2).sqrt();
    let b = if planar <= T::lit(T::AMPLITUDE_EPS) {
        Complex::new(b_mag, T::zero())
    } else {
        Complex::new(x1, x2) * (b_mag / planar)
    };
    State::new(Complex::new(a, T::zero()), b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    type C = Complex<f64>;

    fn close(a: C, b: C) {
        assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-12);
        assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-12);
    }

    #[test]
    fn zero_generator_is_identity() {
        let u = pauli_exponential(Coeff::<f64>::zero(), 1.0).unwrap();
        assert_eq!(u, Propagator::identity());
    }

    #[test]
    fn half_pi_x_rotation() {
        let u = pauli_exponential(Coeff::new(FRAC_PI_2, 0.0, 0.0), 1.0).unwrap();
        let m = u.matrix();
        close(m[0][0], C::new(0.0, 0.0));
        close(m[0][1], C::new(0.0, -1.0));
        close(m[1][0], C::new(0.0, -1.0));
        close(m[1][1], C::new(0.0, 0.0));
    }

    #[test]
    fn drift_only_is_diagonal_phase() {
        let u = pauli_exponential(Coeff::new(0.0, 0.0, 0.05), 1.0).unwrap();
        let m = u.matrix();
        close(m[0][0], C::from_polar(1.0, -0.05));
        close(m[1][1], C::from_polar(1.0, 0.05));
        close(m[0][1], C::new(0.0, 0.0));
        close(m[1][0], C::new(0.0, 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(pauli_exponential(Coeff::new(f64::NAN, 0.0, 0.0), 1.0).is_err());
        assert!(pauli_exponential(Coeff::new(0.0, f64::INFINITY, 0.0), 1.0).is_err());
        assert!(pauli_exponential(Coeff::new(0.1, 0.0, 0.0), -1.0).is_err());
    }

    #[test]
    fn apply_examples() {
        let id = Propagator::<f64>::identity();
        assert_eq!(apply(&id, &State::zero()).unwrap(), State::zero());

        let x = pauli_exponential(Coeff::new(FRAC_PI_2, 0.0, 0.0), 1.0).unwrap();
        let out = apply(&x, &State::zero()).unwrap();
        close(out.amplitudes()[1], C::new(0.0, -1.0));
        let canon = out.canonical().amplitudes();
        close(canon[0], C::new(0.0, 0.0));
        close(canon[1], C::new(1.0, 0.0));

        let z = pauli_exponential(Coeff::new(0.0, 0.0, 0.05), 1.0).unwrap();
        let out = apply(&z, &State::plus()).unwrap().amplitudes();
        close(out[0], C::from_polar(FRAC_1_SQRT_2, -0.05));
        close(out[1], C::from_polar(FRAC_1_SQRT_2, 0.05));
    }

    #[test]
    fn apply_renormalizes_small_drift_and_rejects_large() {
        let s = State::from_normalized(C::new(1.0 + 1e-10, 0.0), C::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-15);
        assert!(State::from_normalized(C::new(1.0 + 1e-6, 0.0), C::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn fidelity_and_distance_examples() {
        let (z, o, p) = (State::<f64>::zero(), State::one(), State::plus());
        assert_abs_diff_eq!(fidelity_sq(&z, &z), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity_sq(&z, &o), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity_sq(&z, &p), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&z, &z).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&z, &o).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&z, &p).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn trace_distance_rejects_large_negative_radicand() {
        let a = State::from_raw([C::new(1.0 + 1e-9, 0.0), C::new(0.0, 0.0)]);
        assert!(matches!(trace_distance(&a, &a), Err(Error::Numeric(_))));
        let b = State::from_raw([C::new(1.0 + 1e-14, 0.0), C::new(0.0, 0.0)]);
        assert_eq!(trace_distance(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn bloch_examples() {
        let b = state_to_bloch(&State::<f64>::zero());
        assert_eq!((b.x1, b.x2, b.x3), (0.0, 0.0, 1.0));
        let b = state_to_bloch(&State::<f64>::one());
        assert_eq!((b.x1, b.x2, b.x3), (0.0, 0.0, -1.0));
        let b = state_to_bloch(&State::<f64>::plus());
        assert_abs_diff_eq!(b.x1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.x2, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.x3, 0.0, epsilon = 1e-15);

        let back = bloch_to_state(Bloch::new(0.0, 0.0, -1.0)).unwrap();
        assert_abs_diff_eq!(fidelity_sq(&back, &State::one()), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn canonical_phase() {
        let s = State::<f64>::plus().with_phase(1.3).canonical();
        let a = s.amplitudes();
        assert!(a[0].im.abs() < 1e-15 && a[0].re > 0.0);
        let s = State::<f64>::one().with_phase(-2.0).canonical().amplitudes();
        close(s[1], C::new(1.0, 0.0));
    }

    #[test]
    fn orthogonal_state() {
        let s = State::real(0.6, 0.8).unwrap().with_phase(0.3);
        assert_abs_diff_eq!(fidelity_sq(&s, &s.orthogonal()), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let u = pauli_exponential(Coeff::<f32>::new(0.3, -0.2, 0.05), 1.0).unwrap();
        assert!(u.is_unitary(1e-6));
        let s = apply(&u, &State::zero()).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-6);
    }
}
