//! Box-constrained first-order minimization with finite-difference gradients,
//! and an augmented-Lagrangian wrapper for equality constraints.

/// Symmetric box `[-bound, bound]` on every coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricBox {
    pub bound: f64,
}

impl SymmetricBox {
    pub fn project(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(-self.bound, self.bound);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGradientOptions {
    pub max_iterations: usize,
    /// Stop once the projected-gradient step has infinity norm below this.
    pub gradient_tolerance: f64,
    /// Central-difference step.
    pub fd_step: f64,
    /// Optional early exit once the objective drops to this value.
    pub target_value: Option<f64>,
    /// Keep the accepted objective values.
    pub record_history: bool,
}

impl Default for ProjectedGradientOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-9,
            fd_step: 1e-6,
            target_value: None,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Central-difference gradient of `f` at `x`.
pub fn central_difference<F>(f: &mut F, x: &mut [f64], h: f64, grad: &mut [f64])
where
    F: FnMut(&[f64]) -> f64,
{
    for i in 0..x.len() {
        let xi = x[i];
        x[i] = xi + h;
        let fp = f(x);
        x[i] = xi - h;
        let fm = f(x);
        x[i] = xi;
        grad[i] = (fp - fm) / (2.0 * h);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral projected gradient with a monotone Armijo backtracking search.
///
/// Every accepted iterate lies in the box and strictly lowers the objective.
pub fn projected_gradient<F>(
    mut f: F,
    x0: &[f64],
    bounds: SymmetricBox,
    opts: &ProjectedGradientOptions,
) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    const ARMIJO: f64 = 1e-4;
    const STEP_MIN: f64 = 1e-12;
    const STEP_MAX: f64 = 1e6;

    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut fx = f(&x);
    let mut history = Vec::new();
    if opts.record_history {
        history.push(fx);
    }
    if n == 0 {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
            converged: true,
            history,
        };
    }

    let mut g = vec![0.0; n];
    central_difference(&mut f, &mut x, opts.fd_step, &mut g);
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut step = {
        let gn = inf_norm(&g);
        if gn > 0.0 {
            (0.1 * bounds.bound.max(1e-3) / gn).clamp(STEP_MIN, STEP_MAX)
        } else {
            1.0
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        if let Some(target) = opts.target_value {
            if fx <= target {
                converged = true;
                break;
            }
        }
        // Stationarity measure: ||P(x - g) - x||_inf.
        let pg = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| ((xi - gi).clamp(-bounds.bound, bounds.bound) - xi).abs())
            .fold(0.0, f64::max);
        if pg < opts.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut t = step;
        let accepted = loop {
            for i in 0..n {
                trial[i] = (x[i] - t * g[i]).clamp(-bounds.bound, bounds.bound);
            }
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&x))
                .map(|(gi, (ti, xi))| gi * (ti - xi))
                .sum();
            let ft = f(&trial);
            if ft <= fx + ARMIJO * decrease && ft < fx {
                break Some(ft);
            }
            t *= 0.5;
            if t < STEP_MIN || decrease == 0.0 {
                break None;
            }
        };
        let Some(ft) = accepted else {
            // No descent left at machine precision.
            converged = pg < opts.gradient_tolerance.sqrt();
            break;
        };

        central_difference(&mut f, &mut trial, opts.fd_step, &mut g_new);
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(STEP_MIN, STEP_MAX)
        } else {
            (t * 4.0).clamp(STEP_MIN, STEP_MAX)
        };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        fx = ft;
        if opts.record_history {
            history.push(fx);
        }
    }

    Minimum {
        x,
        value: fx,
        iterations,
        converged,
        history,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedLagrangianOptions {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_rounds: usize,
    /// Outer rounds run even when the start point is already feasible.
    pub min_rounds: usize,
    /// Stop once the constraint residual norm is at most this.
    pub constraint_tolerance: f64,
    pub inner: ProjectedGradientOptions,
}

impl Default for AugmentedLagrangianOptions {
    fn default() -> Self {
        Self {
            initial_penalty: 10.0,
            penalty_growth: 2.0,
            max_rounds: 10,
            min_rounds: 0,
            constraint_tolerance: 1e-5,
            inner: ProjectedGradientOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedLagrangianOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Euclidean norm of the constraint residual at `x`.
    pub violation: f64,
    pub multipliers: Vec<f64>,
    pub rounds: usize,
}

/// Minimizes `objective(x)` subject to `c(x) = 0` inside the box.
///
/// `problem(x, c)` returns the objective and writes the constraint residual
/// into `c`. Each outer round minimizes
/// `f + lambda.c + (rho/2)|c|^2`, updates `lambda += rho c` and doubles `rho`
/// until the residual meets the tolerance or the round cap is hit.
pub fn augmented_lagrangian<P>(
    mut problem: P,
    n_constraints: usize,
    x0: &[f64],
    bounds: SymmetricBox,
    opts: &AugmentedLagrangianOptions,
) -> AugmentedLagrangianOutcome
where
    P: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut lambda = vec![0.0; n_constraints];
    let mut rho = opts.initial_penalty;
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut c = vec![0.0; n_constraints];
    let mut rounds = 0;

    let mut objective = problem(&x, &mut c);
    let mut violation = dot(&c, &c).sqrt();
    while rounds < opts.max_rounds
        && (rounds < opts.min_rounds || violation > opts.constraint_tolerance)
    {
        rounds += 1;
        let mut scratch = vec![0.0; n_constraints];
        let merit = |z: &[f64]| {
            let f = problem(z, &mut scratch);
            let lin = dot(&lambda, &scratch);
            let quad = dot(&scratch, &scratch);
            f + lin + 0.5 * rho * quad
        };
        let inner = projected_gradient(merit, &x, bounds, &opts.inner);
        x = inner.x;
        objective = problem(&x, &mut c);
        violation = dot(&c, &c).sqrt();
        for (l, ci) in lambda.iter_mut().zip(&c) {
            *l += rho * ci;
        }
        rho *= opts.penalty_growth;
    }

    AugmentedLagrangianOutcome {
        x,
        objective,
        violation,
        multipliers: lambda,
        rounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_interior_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.1).powi(2);
        let m = projected_gradient(f, &[0.0, 0.0], SymmetricBox { bound: 1.0 }, &Default::default());
        assert!(m.converged);
        assert_abs_diff_eq!(m.x[0], 0.3, epsilon = 1e-7);
        assert_abs_diff_eq!(m.x[1], -0.1, epsilon = 1e-7);
    }

    #[test]
    fn active_bound_is_respected() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 0.2).powi(2);
        let m = projected_gradient(f, &[0.0, 0.0], SymmetricBox { bound: 0.5 }, &Default::default());
        assert_abs_diff_eq!(m.x[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.x[1], -0.2, epsilon = 1e-7);
    }

    #[test]
    fn history_is_monotone() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + x[1].powi(2) + 0.1 * x[0];
        let opts = ProjectedGradientOptions {
            record_history: true,
            ..Default::default()
        };
        let m = projected_gradient(f, &[0.4, 0.7], SymmetricBox { bound: 1.0 }, &opts);
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn equality_constrained_quadratic() {
        // min x^2 + y^2  s.t.  x + y = 1  ->  (0.5, 0.5)
        let problem = |x: &[f64], c: &mut [f64]| {
            c[0] = x[0] + x[1] - 1.0;
            x[0] * x[0] + x[1] * x[1]
        };
        let opts = AugmentedLagrangianOptions {
            constraint_tolerance: 1e-8,
            max_rounds: 30,
            ..Default::default()
        };
        let out = augmented_lagrangian(problem, 1, &[0.0, 0.0], SymmetricBox { bound: 2.0 }, &opts);
        assert!(out.violation <= 1e-8);
        assert_abs_diff_eq!(out.x[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(out.multipliers[0], -1.0, epsilon = 1e-4);
    }
}
