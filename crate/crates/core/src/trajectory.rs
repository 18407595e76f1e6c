//! Quintic trajectories between two fully-specified states, and the
//! closed-form structure used for collision checking: decomposition into
//! sections of monotonically changing depth and plane-crossing times through
//! the initial position.

use arrayvec::ArrayVec;
use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roots::{real_roots_in_interval, IntervalRoots, PolyCoeffs};

/// Position, velocity and acceleration of the vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

impl VehicleState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>, acceleration: Vector3<f64>) -> Self {
        Self { position, velocity, acceleration }
    }

    /// At rest at `position` with zero velocity and acceleration.
    pub fn rest(position: Vector3<f64>) -> Self {
        Self::new(position, Vector3::zeros(), Vector3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.acceleration.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("boundary states must be finite")]
    NonFiniteInput,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("time {t} outside trajectory domain [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("derivative order {0} not supported (max 3)")]
    InvalidOrder(u8),
}

/// Which endpoint of a monotonic section has the larger depth along the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeepestEnd {
    AtStart,
    AtEnd,
}

/// Maximal sub-interval of a trajectory on which depth along a fixed axis
/// does not change direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicSection {
    pub t_start: f64,
    pub t_end: f64,
    pub deepest_end: DeepestEnd,
}

impl MonotonicSection {
    pub fn deepest_time(&self) -> f64 {
        match self.deepest_end {
            DeepestEnd::AtStart => self.t_start,
            DeepestEnd::AtEnd => self.t_end,
        }
    }

    pub fn shallow_time(&self) -> f64 {
        match self.deepest_end {
            DeepestEnd::AtStart => self.t_end,
            DeepestEnd::AtEnd => self.t_start,
        }
    }
}

/// Crossing times of a plane through the trajectory's initial position.
#[derive(Debug, Clone, PartialEq)]
pub enum PlaneCrossings {
    /// The trajectory lies entirely in the plane.
    InPlane,
    /// Sorted crossing times; `t = 0` is never included.
    Times(ArrayVec<f64, 4>),
}

/// Verdict of the conservative dynamic-feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityVerdict {
    Feasible,
    Infeasible,
    /// Could not be certified either way; callers treat this as infeasible.
    Indeterminate,
}

/// Thrust and angular-velocity limits used by the feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicLimits {
    /// Minimum admissible proper acceleration (thrust per unit mass), m/s^2.
    pub f_min: f64,
    /// Maximum admissible proper acceleration, m/s^2.
    pub f_max: f64,
    /// Maximum admissible angular velocity, rad/s.
    pub omega_max: f64,
    /// Gravity vector in the frame the trajectory is expressed in, m/s^2.
    pub gravity: Vector3<f64>,
}

const FEASIBILITY_MAX_DEPTH: u32 = 8;

/// Quintic position trajectory determined by an initial state and the three
/// free coefficient vectors of its fifth, fourth and third order terms:
///
/// `s(t) = alpha/120 t^5 + beta/24 t^4 + gamma/6 t^3 + a0/2 t^2 + v0 t + p0`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub alpha: Vector3<f64>,
    pub beta: Vector3<f64>,
    pub gamma: Vector3<f64>,
    pub init: VehicleState,
    pub duration: f64,
}

impl Trajectory {
    /// Minimum-jerk trajectory from `init` to `end` over `duration` seconds.
    ///
    /// The coefficients solve the per-axis 3x3 linear system obtained by
    /// matching position, velocity and acceleration at `t = duration`, using
    /// the closed-form inverse of the coefficient matrix.
    pub fn from_boundary(
        init: VehicleState,
        end: VehicleState,
        duration: f64,
    ) -> Result<Self, TrajectoryError> {
        if !init.is_finite() || !end.is_finite() {
            return Err(TrajectoryError::NonFiniteInput);
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(TrajectoryError::NonPositiveDuration(duration));
        }
        let t = duration;
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;

        let dp = end.position - init.position - init.velocity * t - init.acceleration * (0.5 * t2);
        let dv = end.velocity - init.velocity - init.acceleration * t;
        let da = end.acceleration - init.acceleration;

        let alpha = (dp * 720.0 - dv * (360.0 * t) + da * (60.0 * t2)) / t5;
        let beta = (dp * (-360.0 * t) + dv * (168.0 * t2) - da * (24.0 * t3)) / t5;
        let gamma = (dp * (60.0 * t2) - dv * (24.0 * t3) + da * (3.0 * t4)) / t5;

        Ok(Self { alpha, beta, gamma, init, duration })
    }

    /// Stationary trajectory holding `position` for `duration` seconds.
    pub fn hold(position: Vector3<f64>, duration: f64) -> Self {
        Self {
            alpha: Vector3::zeros(),
            beta: Vector3::zeros(),
            gamma: Vector3::zeros(),
            init: VehicleState::rest(position),
            duration,
        }
    }

    /// Position, velocity, acceleration or jerk (`order` 0..=3) at `t`.
    pub fn evaluate(&self, t: f64, order: u8) -> Result<Vector3<f64>, TrajectoryError> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(TrajectoryError::TimeOutOfRange { t, duration: self.duration });
        }
        match order {
            0 => Ok(self.position_at(t)),
            1 => Ok(self.velocity_at(t)),
            2 => Ok(self.acceleration_at(t)),
            3 => Ok(self.jerk_at(t)),
            other => Err(TrajectoryError::InvalidOrder(other)),
        }
    }

    /// Position at `t`; does not check the domain.
    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        let i = &self.init;
        (((((self.alpha / 120.0) * t + self.beta / 24.0) * t + self.gamma / 6.0) * t
            + i.acceleration / 2.0)
            * t
            + i.velocity)
            * t
            + i.position
    }

    /// Velocity at `t`; does not check the domain.
    pub fn velocity_at(&self, t: f64) -> Vector3<f64> {
        let i = &self.init;
        ((((self.alpha / 24.0) * t + self.beta / 6.0) * t + self.gamma / 2.0) * t
            + i.acceleration)
            * t
            + i.velocity
    }

    /// Acceleration at `t`; does not check the domain.
    pub fn acceleration_at(&self, t: f64) -> Vector3<f64> {
        (((self.alpha / 6.0) * t + self.beta / 2.0) * t + self.gamma) * t + self.init.acceleration
    }

    /// Jerk at `t`; does not check the domain.
    pub fn jerk_at(&self, t: f64) -> Vector3<f64> {
        ((self.alpha / 2.0) * t + self.beta) * t + self.gamma
    }

    /// State at the end of the trajectory.
    pub fn end_state(&self) -> VehicleState {
        let t = self.duration;
        VehicleState::new(self.position_at(t), self.velocity_at(t), self.acceleration_at(t))
    }

    /// Coefficients of the scalar velocity component along `axis`, a quartic.
    fn axis_velocity_poly(&self, axis: &Vector3<f64>) -> PolyCoeffs {
        PolyCoeffs::new([
            axis.dot(&self.init.velocity),
            axis.dot(&self.init.acceleration),
            axis.dot(&self.gamma) / 2.0,
            axis.dot(&self.beta) / 6.0,
            axis.dot(&self.alpha) / 24.0,
        ])
    }

    /// Splits `[0, duration]` into sections on which depth along `axis` is
    /// monotone. Sections partition the domain; the degenerate case of a
    /// trajectory with no depth motion yields one section with the deep end
    /// at `t_end`.
    pub fn monotonic_sections(&self, axis: &Unit<Vector3<f64>>) -> Vec<MonotonicSection> {
        let poly = self.axis_velocity_poly(axis);
        let boundary_roots = match real_roots_in_interval(&poly, 0.0, self.duration) {
            IntervalRoots::EverywhereZero => ArrayVec::new(),
            IntervalRoots::Roots(r) => r,
        };

        // Double roots at rest endpoints are located only to ~sqrt(eps);
        // boundaries closer than this are the same instant.
        let merge_tol = 1e-6 * (1.0 + self.duration);
        let mut boundaries: Vec<f64> = Vec::with_capacity(boundary_roots.len() + 2);
        boundaries.push(0.0);
        for &r in &boundary_roots {
            if r - boundaries.last().unwrap() > merge_tol && self.duration - r > merge_tol {
                boundaries.push(r);
            }
        }
        boundaries.push(self.duration);

        boundaries
            .windows(2)
            .map(|w| {
                let (t_start, t_end) = (w[0], w[1]);
                let depth_start = axis.dot(&self.position_at(t_start));
                let depth_end = axis.dot(&self.position_at(t_end));
                let deepest_end =
                    if depth_end >= depth_start { DeepestEnd::AtEnd } else { DeepestEnd::AtStart };
                MonotonicSection { t_start, t_end, deepest_end }
            })
            .collect()
    }

    /// Times in `[t_lo, t_hi]` at which the trajectory crosses the plane with
    /// unit normal `normal` passing through the initial position.
    ///
    /// The known root at `t = 0` is factored out, leaving a quartic solved in
    /// closed form; `t = 0` itself is never reported.
    pub fn plane_crossings(
        &self,
        normal: &Unit<Vector3<f64>>,
        t_lo: f64,
        t_hi: f64,
    ) -> PlaneCrossings {
        debug_assert!(0.0 <= t_lo && t_lo <= t_hi && t_hi <= self.duration);
        let mut coeffs = [
            normal.dot(&self.init.velocity),
            normal.dot(&self.init.acceleration) / 2.0,
            normal.dot(&self.gamma) / 6.0,
            normal.dot(&self.beta) / 24.0,
            normal.dot(&self.alpha) / 120.0,
        ];
        // Scale of each coefficient before projection onto the normal; a
        // projected coefficient far below it is an exact geometric zero.
        let term_scales = [
            self.init.velocity.norm(),
            self.init.acceleration.norm() / 2.0,
            self.gamma.norm() / 6.0,
            self.beta.norm() / 24.0,
            self.alpha.norm() / 120.0,
        ];

        // The residual is in-plane noise if all coefficients are negligible.
        let scale = term_scales.iter().fold(0.0f64, |m, &s| m.max(s));
        let max_coeff = coeffs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        if max_coeff <= 1e-12 * scale || scale == 0.0 {
            return PlaneCrossings::InPlane;
        }

        // A vanishing constant term means the known root at t = 0 has higher
        // multiplicity (a trajectory starting at rest, or starting in the
        // plane): deflate it out instead of letting the solver smear it into
        // a tiny positive root.
        let mut deflations = 0;
        while deflations < 4 && coeffs[0].abs() <= 1e-12 * term_scales[deflations] {
            coeffs.rotate_left(1);
            coeffs[4] = 0.0;
            deflations += 1;
        }

        match real_roots_in_interval(&PolyCoeffs::new(coeffs), t_lo, t_hi) {
            IntervalRoots::EverywhereZero => PlaneCrossings::InPlane,
            IntervalRoots::Roots(roots) => {
                let mut times = ArrayVec::new();
                for &r in &roots {
                    if r > 1e-12 {
                        times.push(r);
                    }
                }
                PlaneCrossings::Times(times)
            }
        }
    }

    /// Conservative check of thrust-norm and angular-velocity limits over the
    /// whole trajectory, by recursive interval analysis.
    ///
    /// `Feasible` certifies that the limits hold everywhere. `Infeasible` is
    /// returned only with a proven witness. `Indeterminate` verdicts are
    /// treated as infeasible by callers.
    pub fn feasibility_check(&self, limits: &DynamicLimits) -> FeasibilityVerdict {
        debug_assert!(0.0 <= limits.f_min && limits.f_min < limits.f_max);
        debug_assert!(limits.omega_max > 0.0);
        self.feasibility_on(0.0, self.duration, limits, 0)
    }

    fn feasibility_on(
        &self,
        t0: f64,
        t1: f64,
        limits: &DynamicLimits,
        depth: u32,
    ) -> FeasibilityVerdict {
        // Exact per-axis ranges on [t0, t1] from closed-form extrema.
        let mut accel_lo = Vector3::zeros();
        let mut accel_hi = Vector3::zeros();
        let mut jerk_lo = Vector3::zeros();
        let mut jerk_hi = Vector3::zeros();
        for axis in 0..3 {
            let (alo, ahi) = self.axis_accel_range(axis, t0, t1);
            accel_lo[axis] = alo;
            accel_hi[axis] = ahi;
            let (jlo, jhi) = self.axis_jerk_range(axis, t0, t1);
            jerk_lo[axis] = jlo;
            jerk_hi[axis] = jhi;
        }

        let thrust_lo = accel_lo - limits.gravity;
        let thrust_hi = accel_hi - limits.gravity;
        let thrust_min = box_min_norm(&thrust_lo, &thrust_hi);
        let thrust_max = box_max_norm(&thrust_lo, &thrust_hi);
        let jerk_max = box_max_norm(&jerk_lo, &jerk_hi);

        let thrust_ok = thrust_min >= limits.f_min && thrust_max <= limits.f_max;
        let omega_ok = thrust_min > 0.0 && jerk_max <= limits.omega_max * thrust_min;
        if thrust_ok && omega_ok {
            return FeasibilityVerdict::Feasible;
        }

        // A single violated sample is a proven witness.
        let mid = 0.5 * (t0 + t1);
        for &t in &[t0, mid, t1] {
            let thrust = (self.acceleration_at(t) - limits.gravity).norm();
            if thrust < limits.f_min || thrust > limits.f_max {
                return FeasibilityVerdict::Infeasible;
            }
            if self.jerk_at(t).norm() > limits.omega_max * thrust {
                return FeasibilityVerdict::Infeasible;
            }
        }

        if depth >= FEASIBILITY_MAX_DEPTH {
            return FeasibilityVerdict::Indeterminate;
        }
        match self.feasibility_on(t0, mid, limits, depth + 1) {
            FeasibilityVerdict::Infeasible => FeasibilityVerdict::Infeasible,
            first => match self.feasibility_on(mid, t1, limits, depth + 1) {
                FeasibilityVerdict::Infeasible => FeasibilityVerdict::Infeasible,
                second => {
                    if first == FeasibilityVerdict::Feasible
                        && second == FeasibilityVerdict::Feasible
                    {
                        FeasibilityVerdict::Feasible
                    } else {
                        FeasibilityVerdict::Indeterminate
                    }
                }
            },
        }
    }

    /// Upper bound on speed over the whole trajectory, from the exact
    /// per-axis velocity ranges (extrema where the acceleration component
    /// vanishes).
    pub fn speed_bound(&self) -> f64 {
        let mut sum = 0.0;
        for axis in 0..3 {
            let v = PolyCoeffs::new([
                self.init.velocity[axis],
                self.init.acceleration[axis],
                self.gamma[axis] / 2.0,
                self.beta[axis] / 6.0,
                self.alpha[axis] / 24.0,
            ]);
            let accel = PolyCoeffs::cubic(
                self.init.acceleration[axis],
                self.gamma[axis],
                self.beta[axis] / 2.0,
                self.alpha[axis] / 6.0,
            );
            let mut m = v.eval(0.0).abs().max(v.eval(self.duration).abs());
            if let IntervalRoots::Roots(roots) =
                real_roots_in_interval(&accel, 0.0, self.duration)
            {
                for &t in &roots {
                    m = m.max(v.eval(t).abs());
                }
            }
            sum += m * m;
        }
        sum.sqrt()
    }

    /// Exact range of one acceleration component (a cubic) over `[t0, t1]`.
    fn axis_accel_range(&self, axis: usize, t0: f64, t1: f64) -> (f64, f64) {
        let a6 = self.alpha[axis] / 6.0;
        let b2 = self.beta[axis] / 2.0;
        let g = self.gamma[axis];
        let a0 = self.init.acceleration[axis];
        let eval = |t: f64| ((a6 * t + b2) * t + g) * t + a0;

        let mut lo = eval(t0).min(eval(t1));
        let mut hi = eval(t0).max(eval(t1));
        // Interior extrema where the jerk component vanishes.
        let (j_a, j_b, j_c) = (self.alpha[axis] / 2.0, self.beta[axis], self.gamma[axis]);
        for t in quadratic_roots_in(j_a, j_b, j_c, t0, t1) {
            let v = eval(t);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Exact range of one jerk component (a quadratic) over `[t0, t1]`.
    fn axis_jerk_range(&self, axis: usize, t0: f64, t1: f64) -> (f64, f64) {
        let a2 = self.alpha[axis] / 2.0;
        let b = self.beta[axis];
        let g = self.gamma[axis];
        let eval = |t: f64| (a2 * t + b) * t + g;

        let mut lo = eval(t0).min(eval(t1));
        let mut hi = eval(t0).max(eval(t1));
        if self.alpha[axis] != 0.0 {
            let vertex = -b / (2.0 * a2);
            if vertex > t0 && vertex < t1 {
                let v = eval(vertex);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Real roots of `a t^2 + b t + c` strictly inside `(t0, t1)`.
fn quadratic_roots_in(a: f64, b: f64, c: f64, t0: f64, t1: f64) -> ArrayVec<f64, 2> {
    let mut out = ArrayVec::new();
    if a == 0.0 {
        if b != 0.0 {
            let t = -c / b;
            if t > t0 && t < t1 {
                out.push(t);
            }
        }
        return out;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return out;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + sq.copysign(if b == 0.0 { 1.0 } else { b }));
    let candidates = if q != 0.0 { [q / a, c / q] } else { [0.0, 0.0] };
    for t in candidates {
        if t > t0 && t < t1 && !out.iter().any(|&u| u == t) {
            out.push(t);
        }
    }
    out
}

/// Smallest Euclidean norm over the axis-aligned box `[lo, hi]`.
fn box_min_norm(lo: &Vector3<f64>, hi: &Vector3<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..3 {
        let d = if lo[i] > 0.0 {
            lo[i]
        } else if hi[i] < 0.0 {
            -hi[i]
        } else {
            0.0
        };
        sum += d * d;
    }
    sum.sqrt()
}

/// Largest Euclidean norm over the axis-aligned box `[lo, hi]`.
fn box_max_norm(lo: &Vector3<f64>, hi: &Vector3<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..3 {
        let d = lo[i].abs().max(hi[i].abs());
        sum += d * d;
    }
    sum.sqrt()
}
