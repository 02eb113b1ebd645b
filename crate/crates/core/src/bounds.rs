//! Closed-form guarantees: the per-step success floor, the failure
//! probability recursion for reaching the target, the geometric convergence
//! rate and the difference function behind the success floor.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::qubit::Coeff;
use crate::scalar::Scalar;

/// Per-step success probability `c = cos^2(bound * ts)` and horizon `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs<T> {
    c: T,
    s: T,
    horizon: usize,
    angle: Option<T>,
}

impl<T: Scalar> BoundInputs<T> {
    /// From a norm bound on the disturbance and the sample time.
    pub fn from_disturbance(bound: T, ts: T, horizon: usize) -> Result<Self> {
        if !(bound.is_finite() && bound >= T::zero()) {
            return Err(invalid("disturbance bound must be finite and nonnegative"));
        }
        if !(ts.is_finite() && ts > T::zero()) {
            return Err(invalid("sample time must be positive"));
        }
        let angle = bound * ts;
        if angle >= T::FRAC_PI_2() {
            return Err(Error::HypothesisViolated(format!(
                "bound * ts = {angle} is not below pi/2"
            )));
        }
        let (sin, cos) = angle.sin_cos();
        Ok(Self {
            c: cos * cos,
            s: sin * sin,
            horizon: Self::check_horizon(horizon)?,
            angle: Some(angle),
        })
    }

    /// From the success probability directly, `0 < c <= 1`.
    pub fn from_success_probability(c: T, horizon: usize) -> Result<Self> {
        if !(c > T::zero() && c <= T::one()) {
            return Err(invalid("success probability must lie in (0, 1]"));
        }
        Ok(Self {
            c,
            s: T::one() - c,
            horizon: Self::check_horizon(horizon)?,
            angle: None,
        })
    }

    fn check_horizon(horizon: usize) -> Result<usize> {
        if horizon == 0 {
            return Err(invalid("horizon must be at least one step"));
        }
        Ok(horizon)
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn s(&self) -> T {
        self.s
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `bound * ts`, when built from a disturbance bound.
    pub fn angle(&self) -> Option<T> {
        self.angle
    }

    /// `alpha = s c^L`.
    pub fn alpha(&self) -> T {
        self.s * self.c.powi(self.horizon as i32)
    }

    /// The known root `z1 = c` of the characteristic polynomial.
    pub fn z1(&self) -> T {
        self.c
    }
}

/// Minimum success probability `cos^2(bound * ts)` of one measured step.
pub fn success_bound<T: Scalar>(bound: T, ts: T) -> Result<T> {
    Ok(BoundInputs::from_disturbance(bound, ts, 1)?.c())
}

/// `F_1 .. F_N`: probability that no run of `L` consecutive successes has
/// completed by step `k`.
pub fn failure_probabilities<T: Scalar>(inputs: &BoundInputs<T>, n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(invalid("N must be at least one"));
    }
    let l_max = inputs.horizon;
    let (c, s) = (inputs.c, inputs.s);
    // f[j] = F_j, with F_j = 1 for j <= 0 stored at index 0.
    let mut f = vec![T::one(); n + 1];
    for k in l_max..=n {
        let mut acc = T::zero();
        let mut w = T::one();
        for l in 1..=l_max {
            acc = acc + w * f[k.saturating_sub(l)];
            w = w * c;
        }
        f[k] = s * acc;
    }
    Ok(f.split_off(1))
}

/// Lower bound on the probability of being at the target by step `N`;
/// zero before the horizon can possibly be completed.
pub fn p_tar_lower_bound<T: Scalar>(inputs: &BoundInputs<T>, n: usize) -> Result<T> {
    if n < inputs.horizon {
        return Ok(T::zero());
    }
    let f = failure_probabilities(inputs, n)?;
    Ok(T::one() - f[n - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateCase {
    /// `c < L/(L+1)`
    Below,
    /// `c > L/(L+1)`
    Above,
    /// `c = L/(L+1)` within `1e-12`
    Critical,
}

impl RateCase {
    pub fn id(self) -> u8 {
        match self {
            RateCase::Below => 1,
            RateCase::Above => 2,
            RateCase::Critical => 3,
        }
    }
}

/// Geometric decay rate `eta < 1` of the failure probability.
pub fn convergence_rate<T: Scalar>(inputs: &BoundInputs<T>) -> (RateCase, T) {
    let l = T::lit(inputs.horizon as f64);
    let split = l / (l + T::one());
    let two = T::lit(2.0);
    let c = inputs.c;
    if (c - split).abs() <= T::lit(1e-12) {
        (RateCase::Critical, c)
    } else if c < split {
        (RateCase::Below, (T::one() - inputs.alpha()).min(two * split - c))
    } else {
        (RateCase::Above, two * split - c)
    }
}

/// Roots of the monic polynomial with coefficients `coeffs` (highest degree
/// first, leading one omitted) as companion-matrix eigenvalues.
fn companion_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    for (j, &a) in coeffs.iter().enumerate() {
        companion[(n - 1 - j, n - 1)] = -a;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

/// All `L + 1` roots of `g(z) = z^{L+1} - z^L + alpha`, the known root
/// `z1 = c` first.
///
/// `z1` is divided out exactly, `g(z) = (z - c) q(z)` with
/// `q(z) = z^L - s sum_{i=1}^{L} c^{i-1} z^{L-i}`, and the roots of `q` come
/// from its companion matrix refined by Newton steps on `g`. Dividing out
/// `z1` keeps full accuracy when `c = L/(L+1)` makes it a double root.
pub fn characteristic_roots(inputs: &BoundInputs<f64>) -> Result<Vec<Complex64>> {
    let horizon = inputs.horizon;
    let (c, s, alpha) = (inputs.c, inputs.s, inputs.alpha());
    let g = |z: Complex64| z.powu(horizon as u32) * (z - 1.0) + alpha;
    let dg = |z: Complex64| {
        let l = horizon as f64;
        z.powu(horizon as u32) * (l + 1.0) - z.powi(horizon as i32 - 1) * l
    };

    let z1 = Complex64::new(c, 0.0);
    if g(z1).norm() > 1e-10 {
        return Err(Error::Numeric(format!("g(c) = {} is not zero", g(z1))));
    }
    let quotient: Vec<f64> = (1..=horizon).map(|i| -s * c.powi(i as i32 - 1)).collect();
    let mut others = companion_roots(&quotient);
    for z in others.iter_mut() {
        for _ in 0..8 {
            let d = dg(*z);
            if d.norm() < 1e-300 {
                break;
            }
            let next = *z - g(*z) / d;
            if !(next.re.is_finite() && next.im.is_finite()) || g(next).norm() >= g(*z).norm() {
                break;
            }
            *z = next;
        }
        let residual = g(*z).norm();
        if residual > 1e-10 {
            return Err(Error::Numeric(format!(
                "root {z} has residual {residual:.3e}"
            )));
        }
    }
    others.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(a.re.total_cmp(&b.re))
            .then(a.im.total_cmp(&b.im))
    });
    let mut roots = Vec::with_capacity(horizon + 1);
    roots.push(z1);
    roots.extend(others);
    Ok(roots)
}

/// Largest modulus among the roots other than `z1 = c`.
pub fn max_secondary_root_modulus(inputs: &BoundInputs<f64>) -> Result<f64> {
    Ok(characteristic_roots(inputs)?[1..]
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// `sin(x) / x` with the removable singularity filled.
fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(1e-4) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
    } else {
        x.sin() / x
    }
}

/// Difference between the real part of the one-step overlap for a generator
/// `v` perturbed by `delta` and its value `cos(|delta| ts)` in the commuting
/// case.
pub fn h_function<T: Scalar>(v: Coeff<T>, delta: Coeff<T>, ts: T) -> Result<T> {
    if !(ts.is_finite() && ts > T::zero()) {
        return Err(invalid("sample time must be positive"));
    }
    let w = v + delta;
    let (nv, nw) = (v.norm(), w.norm());
    let cross = v.dot(w) * ts * ts * sinc(ts * nv) * sinc(ts * nw);
    Ok((ts * nv).cos() * (ts * nw).cos() + cross - (delta.norm() * ts).cos())
}

/// Amplitudes and frequencies of the two-cosine form of [`h_function`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HDecomposition<T> {
    pub a1: T,
    pub a2: T,
    pub f1: T,
    pub f2: T,
}

/// `None` when `v` or `v + delta` vanishes.
pub fn h_decomposition<T: Scalar>(v: Coeff<T>, delta: Coeff<T>) -> Option<HDecomposition<T>> {
    let w = v + delta;
    let (nv, nw) = (v.norm(), w.norm());
    let prod = nv * nw;
    if prod == T::zero() {
        return None;
    }
    let two = T::lit(2.0);
    let vw = v.dot(w);
    Some(HDecomposition {
        a1: (prod + vw) / (two * prod),
        a2: (prod - vw) / (two * prod),
        f1: nw - nv,
        f2: nw + nv,
    })
}

/// `a1 cos(f1 ts) + a2 cos(f2 ts) - cos(|delta| ts)`.
pub fn h_sum_form<T: Scalar>(v: Coeff<T>, delta: Coeff<T>, ts: T) -> Result<T> {
    if !(ts.is_finite() && ts > T::zero()) {
        return Err(invalid("sample time must be positive"));
    }
    let base = (delta.norm() * ts).cos();
    Ok(match h_decomposition(v, delta) {
        Some(d) => d.a1 * (d.f1 * ts).cos() + d.a2 * (d.f2 * ts).cos() - base,
        None => (v.norm() * ts).cos() * ((v + delta).norm() * ts).cos() - base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn success_bound_examples() {
        assert_eq!(success_bound(0.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            success_bound(std::f64::consts::FRAC_PI_4, 1.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(success_bound(0.05, 1.0).unwrap(), 0.997_502_082_639_013_8, epsilon = 1e-15);
        assert!(matches!(success_bound(2.0, 1.0), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn failure_recursion_small_case() {
        let inputs = BoundInputs::from_success_probability(0.75, 2).unwrap();
        let f = failure_probabilities(&inputs, 3).unwrap();
        assert_eq!(f[0], 1.0);
        assert_abs_diff_eq!(f[1], 0.4375, epsilon = 1e-15);
        assert_abs_diff_eq!(f[2], 0.296875, epsilon = 1e-15);
        assert_abs_diff_eq!(p_tar_lower_bound(&inputs, 3).unwrap(), 0.703125, epsilon = 1e-15);
        assert_eq!(p_tar_lower_bound(&inputs, 1).unwrap(), 0.0);
    }

    #[test]
    fn bound_tends_to_one() {
        let inputs = BoundInputs::from_success_probability(0.9975, 10).unwrap();
        assert!(p_tar_lower_bound(&inputs, 20_000).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn rate_cases() {
        let crit = BoundInputs::from_success_probability(10.0 / 11.0, 10).unwrap();
        assert_eq!(convergence_rate(&crit), (RateCase::Critical, 10.0 / 11.0));

        let above = BoundInputs::from_success_probability(0.9975, 10).unwrap();
        let (case, eta) = convergence_rate(&above);
        assert_eq!(case, RateCase::Above);
        assert_abs_diff_eq!(eta, 20.0 / 11.0 - 0.9975, epsilon = 1e-15);

        let below = BoundInputs::from_success_probability(0.5, 3).unwrap();
        let (case, eta) = convergence_rate(&below);
        assert_eq!(case, RateCase::Below);
        assert_abs_diff_eq!(below.alpha(), 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(eta, 0.9375, epsilon = 1e-15);
    }

    #[test]
    fn roots_without_alpha() {
        let inputs = BoundInputs::from_success_probability(1.0, 4).unwrap();
        let roots = characteristic_roots(&inputs).unwrap();
        assert_eq!(roots.len(), 5);
        assert_eq!(roots[0], Complex64::new(1.0, 0.0));
        assert!(roots[1..].iter().all(|z| z.norm() < 1e-6), "{roots:?}");
    }

    #[test]
    fn critical_double_root() {
        for l in 1..=15 {
            let c = l as f64 / (l as f64 + 1.0);
            let inputs = BoundInputs::from_success_probability(c, l).unwrap();
            let roots = characteristic_roots(&inputs).unwrap();
            let nearest = roots[1..]
                .iter()
                .map(|z| (z - Complex64::new(c, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-9, "L={l}: {nearest:e}");
            assert!(max_secondary_root_modulus(&inputs).unwrap() <= c + 1e-12);
        }
    }

    #[test]
    fn secondary_roots_inside_rate() {
        let inputs = BoundInputs::from_success_probability(0.5, 3).unwrap();
        let m = max_secondary_root_modulus(&inputs).unwrap();
        assert!(m <= 0.9375 + 1e-9, "{m}");
    }

    #[test]
    fn h_parallel_is_zero() {
        let v = Coeff::new(0.3, 0.0, 0.0);
        let d = Coeff::new(0.05, 0.0, 0.0);
        assert_abs_diff_eq!(h_function(v, d, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h_sum_form(v, d, 1.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn h_small_time_expansion() {
        let v: Coeff<f64> = Coeff::new(1.0, 0.2, -0.3);
        let d = Coeff::new(0.0, 0.05, 0.04);
        let ts: f64 = 0.02;
        let approx = ts.powi(4) / 6.0 * v.cross(d).norm_sq();
        let h = h_sum_form(v, d, ts).unwrap();
        assert!(((h - approx) / approx).abs() < 0.01);
    }

    #[test]
    fn h_forms_agree() {
        let v = Coeff::new(1.0, 0.0, 0.0);
        let d = Coeff::new(0.0, 0.05, 0.0);
        let raw = h_function(v, d, 1.0).unwrap();
        let sum = h_sum_form(v, d, 1.0).unwrap();
        assert_abs_diff_eq!(raw, sum, epsilon = 1e-12);
        assert!(raw > 0.0);
    }

    #[test]
    fn decomposition_inequalities() {
        let v = Coeff::new(0.4, -0.1, 0.2);
        let d = Coeff::new(0.03, 0.05, 0.0);
        let h = h_decomposition(v, d).unwrap();
        assert!(h.a1 > 0.0 && h.a1 < 1.0 && h.a2 > 0.0 && h.a2 < 1.0);
        assert!(h.f1 < d.norm() && d.norm() < h.f2);
    }

    #[test]
    fn generic_in_f32() {
        let inputs = BoundInputs::<f32>::from_success_probability(0.75, 2).unwrap();
        let f = failure_probabilities(&inputs, 3).unwrap();
        assert!((f[2] - 0.296875).abs() < 1e-6);
    }
}
