//! Piecewise-constant nominal and uncertain qubit evolution, plus the bounded
//! disturbance generators used by the robustness studies.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::qubit::{apply, pauli_exponential, Coeff, State};
use crate::scalar::Scalar;

/// Which Pauli directions the controller may actuate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ControlAxes {
    pub x: bool,
    pub y: bool,
    pub z: bool,
}

impl ControlAxes {
    pub const XY: Self = Self {
        x: true,
        y: true,
        z: false,
    };
    pub const XYZ: Self = Self {
        x: true,
        y: true,
        z: true,
    };

    pub fn count(self) -> usize {
        self.x as usize + self.y as usize + self.z as usize
    }

    pub fn as_mask(self) -> [bool; 3] {
        [self.x, self.y, self.z]
    }

    /// True when every component outside the active axes is zero.
    pub fn admits<T: Scalar>(self, u: Coeff<T>) -> bool {
        (self.x || u.x == T::zero()) && (self.y || u.y == T::zero()) && (self.z || u.z == T::zero())
    }
}

impl FromStr for ControlAxes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut axes = Self {
            x: false,
            y: false,
            z: false,
        };
        for c in s.chars() {
            let slot = match c.to_ascii_lowercase() {
                'x' => &mut axes.x,
                'y' => &mut axes.y,
                'z' => &mut axes.z,
                _ => return Err(invalid(format!("unknown control axis '{c}'"))),
            };
            if *slot {
                return Err(invalid(format!("control axis '{c}' repeated")));
            }
            *slot = true;
        }
        if axes.count() == 0 {
            return Err(invalid("at least one control axis is required"));
        }
        Ok(axes)
    }
}

impl fmt::Display for ControlAxes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (on, name) in self.as_mask().into_iter().zip(["x", "y", "z"]) {
            if on {
                f.write_str(name)?;
            }
        }
        Ok(())
    }
}

/// Drift `r sigma_z` plus actuated Pauli terms, sampled every `ts` ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalModel<T> {
    pub r: T,
    pub axes: ControlAxes,
    pub ts: T,
}

impl<T: Scalar> NominalModel<T> {
    pub fn new(r: T, axes: ControlAxes, ts: T) -> Result<Self> {
        if !r.is_finite() {
            return Err(invalid("drift coefficient must be finite"));
        }
        if !(ts.is_finite() && ts > T::zero()) {
            return Err(invalid("sample time must be positive"));
        }
        if axes.count() == 0 {
            return Err(invalid("at least one control axis is required"));
        }
        Ok(Self { r, axes, ts })
    }

    pub fn drift(&self) -> Coeff<T> {
        Coeff::new(T::zero(), T::zero(), self.r)
    }

    fn check_control(&self, u: Coeff<T>) -> Result<()> {
        if !u.is_finite() {
            return Err(invalid("control must be finite"));
        }
        if !self.axes.admits(u) {
            return Err(invalid(format!(
                "control {u:?} actuates an axis outside '{}'",
                self.axes
            )));
        }
        Ok(())
    }
}

/// One sample period of the disturbance-free model.
pub fn nominal_step<T: Scalar>(m: &NominalModel<T>, u: Coeff<T>, s: &State<T>) -> Result<State<T>> {
    m.check_control(u)?;
    apply(&pauli_exponential(u + m.drift(), m.ts)?, s)
}

/// One sample period of the plant with additive generator disturbance `delta`.
/// The disturbance is not checked against any bound here.
pub fn uncertain_step<T: Scalar>(
    m: &NominalModel<T>,
    u: Coeff<T>,
    delta: Coeff<T>,
    s: &State<T>,
) -> Result<State<T>> {
    m.check_control(u)?;
    if !delta.is_finite() {
        return Err(invalid("disturbance must be finite"));
    }
    apply(&pauli_exponential(u + m.drift() + delta, m.ts)?, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UncertaintyKind {
    None,
    Periodic,
    Uniform,
    Gaussian,
}

impl UncertaintyKind {
    pub const ALL_DISTURBED: [Self; 3] = [Self::Periodic, Self::Uniform, Self::Gaussian];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Periodic => "periodic",
            Self::Uniform => "uniform",
            Self::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for UncertaintyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UncertaintyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "periodic" => Ok(Self::Periodic),
            "uniform" => Ok(Self::Uniform),
            "gaussian" | "truncated-gaussian" => Ok(Self::Gaussian),
            _ => Err(invalid(format!("unknown uncertainty model '{s}'"))),
        }
    }
}

/// A concrete disturbance process for one trial. `bound` is the componentwise
/// limit on the x and y disturbance; z is never disturbed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UncertaintyModel<T> {
    None,
    Periodic {
        bound: T,
        omega_x: T,
        omega_y: T,
        phi_x: T,
        phi_y: T,
    },
    Uniform {
        bound: T,
    },
    TruncatedGaussian {
        bound: T,
        stddev: T,
    },
}

impl<T: Scalar> UncertaintyModel<T> {
    pub fn kind(&self) -> UncertaintyKind {
        match self {
            Self::None => UncertaintyKind::None,
            Self::Periodic { .. } => UncertaintyKind::Periodic,
            Self::Uniform { .. } => UncertaintyKind::Uniform,
            Self::TruncatedGaussian { .. } => UncertaintyKind::Gaussian,
        }
    }

    /// Componentwise bound.
    pub fn bound(&self) -> T {
        match *self {
            Self::None => T::zero(),
            Self::Periodic { bound, .. }
            | Self::Uniform { bound }
            | Self::TruncatedGaussian { bound, .. } => bound,
        }
    }

    /// Euclidean-norm bound implied by the componentwise bound on the two
    /// disturbed axes.
    pub fn effective_norm_bound(&self) -> T {
        self.bound() * T::SQRT_2()
    }
}

/// Ranges from which per-trial disturbance parameters are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyFamily {
    pub kind: UncertaintyKind,
    /// Componentwise bound, rad/ns.
    pub bound: f64,
    /// Standard deviation of the truncated Gaussian, rad/ns.
    pub stddev: f64,
    /// Angular-frequency range of the periodic model, rad/ns.
    pub omega_range: (f64, f64),
    /// Phase range of the periodic model, rad.
    pub phase_range: (f64, f64),
}

impl UncertaintyFamily {
    /// Disturbance settings of the robustness study: 0.05 rad/ns bound,
    /// Gaussian spread half the bound, periodic frequencies in
    /// [15 pi, 25 pi] rad/us and phases in [-pi, pi].
    pub fn standard(kind: UncertaintyKind) -> Self {
        use std::f64::consts::PI;
        Self {
            kind,
            bound: 0.05,
            stddev: 0.025,
            omega_range: (0.015 * PI, 0.025 * PI),
            phase_range: (-PI, PI),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.bound,
            self.stddev,
            self.omega_range.0,
            self.omega_range.1,
            self.phase_range.0,
            self.phase_range.1,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("uncertainty parameters must be finite"));
        }
        if self.bound < 0.0 || self.stddev < 0.0 {
            return Err(invalid("uncertainty bound and stddev must be nonnegative"));
        }
        if self.omega_range.0 > self.omega_range.1 || self.phase_range.0 > self.phase_range.1 {
            return Err(invalid("parameter ranges must be ordered"));
        }
        Ok(())
    }

    /// Draws the per-trial constants (frequencies and phases for the
    /// periodic model).
    pub fn instantiate<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> UncertaintyModel<T> {
        let bound = T::lit(self.bound);
        let draw = |rng: &mut R, (lo, hi): (f64, f64)| {
            if hi > lo {
                T::lit(rng.random_range(lo..=hi))
            } else {
                T::lit(lo)
            }
        };
        match self.kind {
            UncertaintyKind::None => UncertaintyModel::None,
            UncertaintyKind::Periodic => UncertaintyModel::Periodic {
                bound,
                omega_x: draw(rng, self.omega_range),
                omega_y: draw(rng, self.omega_range),
                phi_x: draw(rng, self.phase_range),
                phi_y: draw(rng, self.phase_range),
            },
            UncertaintyKind::Uniform => UncertaintyModel::Uniform { bound },
            UncertaintyKind::Gaussian => UncertaintyModel::TruncatedGaussian {
                bound,
                stddev: T::lit(self.stddev),
            },
        }
    }
}

/// Counter-addressed random stream: the generator for step `k` is a fixed
/// function of `(seed, k)`, independent of how many draws other steps made.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseStream {
    pub seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn rng_at(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng
    }
}

/// Disturbance vector for step `k`; piecewise constant over the period.
pub fn sample_uncertainty<T: Scalar>(
    model: &UncertaintyModel<T>,
    k: usize,
    ts: T,
    stream: &NoiseStream,
) -> Coeff<T> {
    match *model {
        UncertaintyModel::None => Coeff::zero(),
        UncertaintyModel::Periodic {
            bound,
            omega_x,
            omega_y,
            phi_x,
            phi_y,
        } => {
            let t = T::lit(k as f64) * ts;
            Coeff::new(
                bound * (omega_x * t + phi_x).cos(),
                bound * (omega_y * t + phi_y).sin(),
                T::zero(),
            )
        }
        UncertaintyModel::Uniform { bound } => {
            let mut rng = stream.rng_at(k as u64);
            let b = bound.as_f64();
            let mut draw = || {
                if b > 0.0 {
                    T::lit(rng.random_range(-b..=b))
                } else {
                    T::zero()
                }
            };
            let x = draw();
            let y = draw();
            Coeff::new(x, y, T::zero())
        }
        UncertaintyModel::TruncatedGaussian { bound, stddev } => {
            let mut rng = stream.rng_at(k as u64);
            let (b, sd) = (bound.as_f64(), stddev.as_f64());
            let mut draw = || {
                if b == 0.0 || sd == 0.0 {
                    return T::zero();
                }
                loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = z * sd;
                    if v.abs() <= b {
                        return T::lit(v);
                    }
                }
            };
            let x = draw();
            let y = draw();
            Coeff::new(x, y, T::zero())
        }
    }
}

/// One recorded point of a trajectory: the state at step `k` and the control
/// applied from it (absent on the terminal point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint<T> {
    pub k: usize,
    pub control: Option<Coeff<T>>,
    pub state: State<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub points: Vec<TrajectoryPoint<T>>,
}

impl<T: Scalar> Trajectory<T> {
    /// Rolls the nominal model forward from `s0` under `controls`.
    pub fn simulate(model: &NominalModel<T>, s0: State<T>, controls: &[Coeff<T>]) -> Result<Self> {
        let mut points = Vec::with_capacity(controls.len() + 1);
        let mut s = s0;
        for (k, &u) in controls.iter().enumerate() {
            points.push(TrajectoryPoint {
                k,
                control: Some(u),
                state: s,
            });
            s = nominal_step(model, u, &s)?;
        }
        points.push(TrajectoryPoint {
            k: controls.len(),
            control: None,
            state: s,
        });
        Ok(Self { points })
    }

    pub fn states(&self) -> impl Iterator<Item = &State<T>> + '_ {
        self.points.iter().map(|p| &p.state)
    }

    pub fn last_state(&self) -> &State<T> {
        &self.points.last().expect("trajectory is never empty").state
    }

    /// Largest amplitude mismatch between each recorded successor and the
    /// nominal propagation of its predecessor.
    pub fn consistency_error(&self, model: &NominalModel<T>) -> Result<T> {
        let mut worst = T::zero();
        for w in self.points.windows(2) {
            let u = w[0]
                .control
                .ok_or_else(|| invalid("interior trajectory point without control"))?;
            let next = nominal_step(model, u, &w[0].state)?;
            let (a, b) = (next.amplitudes(), w[1].state.amplitudes());
            worst = worst.max((a[0] - b[0]).norm()).max((a[1] - b[1]).norm());
        }
        Ok(worst)
    }
}
