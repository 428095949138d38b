//! Closed-loop simulation: rigid-body rotational dynamics, reference
//! generation and fixed-step RK4 on SO(3) x R³.

use serde::{Deserialize, Serialize};

use crate::certification::Envelope;
use crate::control::{ControlOutput, Controller, Gains, InertiaModel, RigidBodyParams};
use crate::error::{Error, Result};
use crate::error_geometry::{BodyState, ErrorGeometry, ReferenceState};
use crate::geom::{exp_rodrigues, hat, reorthonormalize, Mat3, Rotation, UnitVec3, Vec3};
use crate::lyapunov::{decay_envelope, lyapunov_value, sandwich_check, vdot_finite_difference, LyapunovSample};

pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_DT: f64 = 0.01;
/// Fraction of the run, counted from the end, treated as settled.
pub const SETTLING_FRACTION: f64 = 0.2;
/// Relative slack allowed above the exponential envelope.
pub const ENVELOPE_SLACK: f64 = 1e-3;
/// Samples with `V < V(0) * FIT_FLOOR` are ignored when fitting the decay rate.
pub const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    pub body: RigidBodyParams,
    pub r_body: UnitVec3,
}

/// `(dQ/dt, dw/dt)` with `dQ/dt = Q hat(w)` and
/// `dw/dt = J^-1 ((J w) x w - c w + tau + u)`.
pub fn plant_derivative(state: &BodyState, u: &Vec3, body: &RigidBodyParams) -> (Mat3, Vec3) {
    let w = &state.omega;
    let q_dot = state.attitude.matrix() * hat(w);
    let j = body.inertia();
    let w_dot = body.inertia_inv() * ((j * w).cross(w) - w * body.damping() + body.torque() + u);
    (q_dot, w_dot)
}

/// Scalar rate profile about a fixed body axis of the reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceProfile {
    /// `w_d = rate * axis`.
    ConstantSpin { rate: f64 },
    /// `w_d = amplitude * sin(2 pi frequency t) * axis`.
    Sinusoid { amplitude: f64, frequency: f64 },
    /// Linear ramp to `rate` over `ramp_time`, then constant.
    RampThenHold { rate: f64, ramp_time: f64 },
}

impl ReferenceProfile {
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            ReferenceProfile::ConstantSpin { rate } => rate,
            ReferenceProfile::Sinusoid { amplitude, frequency } => {
                amplitude * (std::f64::consts::TAU * frequency * t).sin()
            }
            ReferenceProfile::RampThenHold { rate, ramp_time } => {
                if t < ramp_time {
                    rate * t / ramp_time
                } else {
                    rate
                }
            }
        }
    }

    pub fn rate_dot(&self, t: f64) -> f64 {
        match *self {
            ReferenceProfile::ConstantSpin { .. } => 0.0,
            ReferenceProfile::Sinusoid { amplitude, frequency } => {
                let w = std::f64::consts::TAU * frequency;
                amplitude * w * (w * t).cos()
            }
            ReferenceProfile::RampThenHold { rate, ramp_time } => {
                if t < ramp_time {
                    rate / ramp_time
                } else {
                    0.0
                }
            }
        }
    }

    /// Integral of [`rate`](Self::rate) from 0 to `t`.
    pub fn angle(&self, t: f64) -> f64 {
        match *self {
            ReferenceProfile::ConstantSpin { rate } => rate * t,
            ReferenceProfile::Sinusoid { amplitude, frequency } => {
                if frequency == 0.0 {
                    return 0.0;
                }
                let w = std::f64::consts::TAU * frequency;
                amplitude * (1.0 - (w * t).cos()) / w
            }
            ReferenceProfile::RampThenHold { rate, ramp_time } => {
                if t < ramp_time {
                    0.5 * rate * t * t / ramp_time
                } else {
                    rate * (0.5 * ramp_time + (t - ramp_time))
                }
            }
        }
    }

    pub fn max_rate(&self) -> f64 {
        match *self {
            ReferenceProfile::ConstantSpin { rate } => rate.abs(),
            ReferenceProfile::Sinusoid { amplitude, .. } => amplitude.abs(),
            ReferenceProfile::RampThenHold { rate, .. } => rate.abs(),
        }
    }

    pub fn max_rate_dot(&self) -> f64 {
        match *self {
            ReferenceProfile::ConstantSpin { .. } => 0.0,
            ReferenceProfile::Sinusoid { amplitude, frequency } => {
                (amplitude * std::f64::consts::TAU * frequency).abs()
            }
            ReferenceProfile::RampThenHold { rate, ramp_time } => (rate / ramp_time).abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match *self {
            ReferenceProfile::ConstantSpin { rate } => rate.is_finite(),
            ReferenceProfile::Sinusoid { amplitude, frequency } => {
                amplitude.is_finite() && frequency.is_finite() && frequency >= 0.0
            }
            ReferenceProfile::RampThenHold { rate, ramp_time } => {
                rate.is_finite() && ramp_time.is_finite() && ramp_time > 0.0
            }
        };
        if finite {
            Ok(())
        } else {
            Err(Error::validation(
                "reference",
                "profile parameters must be finite (frequency >= 0, ramp_time > 0)",
            ))
        }
    }
}

/// Desired attitude curve `Q_d(t) = Q_d0 exp(angle(t) hat(axis))` with body
/// rate `w_d(t) = rate(t) axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceGenerator {
    pub profile: ReferenceProfile,
    pub axis: UnitVec3,
    pub initial_attitude: Rotation,
}

impl ReferenceGenerator {
    pub fn omega(&self, t: f64) -> Vec3 {
        self.axis.as_vec() * self.profile.rate(t)
    }

    pub fn omega_dot(&self, t: f64) -> Vec3 {
        self.axis.as_vec() * self.profile.rate_dot(t)
    }

    pub fn initial_state(&self) -> ReferenceState {
        ReferenceState {
            attitude: self.initial_attitude,
            omega: self.omega(0.0),
            omega_dot: self.omega_dot(0.0),
        }
    }

    /// Advances `current` (the reference at time `t`) to `t + dt`:
    /// `Q_d <- Q_d exp(axis, angle(t + dt) - angle(t))`; rates are evaluated
    /// analytically.
    pub fn reference_step(&self, current: &ReferenceState, t: f64, dt: f64) -> ReferenceState {
        let increment = self.profile.angle(t + dt) - self.profile.angle(t);
        ReferenceState {
            attitude: current.attitude.compose(&exp_rodrigues(&self.axis, increment)),
            omega: self.omega(t + dt),
            omega_dot: self.omega_dot(t + dt),
        }
    }

    pub fn check_envelope(&self, envelope: &Envelope) -> Result<()> {
        if self.profile.max_rate() > envelope.wd_max {
            return Err(Error::validation(
                "reference",
                format!(
                    "peak |w_d| = {} exceeds envelope.wd_max = {}",
                    self.profile.max_rate(),
                    envelope.wd_max
                ),
            ));
        }
        if self.profile.max_rate_dot() > envelope.wd_dot_max {
            return Err(Error::validation(
                "reference",
                format!(
                    "peak |dw_d/dt| = {} exceeds envelope.wd_dot_max = {}",
                    self.profile.max_rate_dot(),
                    envelope.wd_dot_max
                ),
            ));
        }
        Ok(())
    }
}

/// How the control moment is applied inside an RK4 step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldMode {
    /// Controller evaluated at every stage; the closed loop is a smooth ODE
    /// and the step is fourth order.
    #[default]
    PerStage,
    /// Moment frozen at its step-start value; first order in `dt` as a
    /// sampled-data system.
    ZeroOrder,
}

/// One classical RK4 step of the plant under `control(t, state)`, followed by
/// reorthonormalization of the attitude.
pub fn rk4_step_with<F>(body: &RigidBodyParams, state: &BodyState, t: f64, dt: f64, mut control: F) -> Result<BodyState>
where
    F: FnMut(f64, &BodyState) -> Result<Vec3>,
{
    let stage = |s: &BodyState, dq: &Mat3, dw: &Vec3, h: f64| BodyState {
        attitude: Rotation::from_matrix_unchecked(s.attitude.matrix() + dq * h),
        omega: s.omega + dw * h,
    };
    let u1 = control(t, state)?;
    let (q1, w1) = plant_derivative(state, &u1, body);
    let s2 = stage(state, &q1, &w1, 0.5 * dt);
    let u2 = control(t + 0.5 * dt, &s2)?;
    let (q2, w2) = plant_derivative(&s2, &u2, body);
    let s3 = stage(state, &q2, &w2, 0.5 * dt);
    let u3 = control(t + 0.5 * dt, &s3)?;
    let (q3, w3) = plant_derivative(&s3, &u3, body);
    let s4 = stage(state, &q3, &w3, dt);
    let u4 = control(t + dt, &s4)?;
    let (q4, w4) = plant_derivative(&s4, &u4, body);

    let att = state.attitude.matrix() + (q1 + (q2 + q3) * 2.0 + q4) * (dt / 6.0);
    let omega = state.omega + (w1 + (w2 + w3) * 2.0 + w4) * (dt / 6.0);
    if !(att.iter().all(|x| x.is_finite()) && omega.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite { t: t + dt });
    }
    Ok(BodyState {
        attitude: reorthonormalize(&att)?,
        omega,
    })
}

/// Plant (true parameters), controller (estimated parameters) and reference.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoop {
    pub plant: PlantParams,
    pub controller: Controller,
    pub reference: ReferenceGenerator,
    pub hold: HoldMode,
}

impl ClosedLoop {
    /// Wires the truth half of `model` into the plant and the estimate half
    /// into the controller.
    pub fn new(
        model: &InertiaModel,
        gains: Gains,
        geometry: ErrorGeometry,
        reference: ReferenceGenerator,
        hold: HoldMode,
    ) -> Self {
        ClosedLoop {
            plant: PlantParams {
                body: *model.truth(),
                r_body: *geometry.r_body(),
            },
            controller: Controller::new(geometry, *model.estimate(), gains),
            reference,
            hold,
        }
    }

    /// Advances `(state, reference)` from `t` to `t + dt`. Returns the new
    /// body state and the control evaluated at the step start.
    pub fn rk4_step(
        &self,
        state: &BodyState,
        reference: &ReferenceState,
        t: f64,
        dt: f64,
    ) -> Result<(BodyState, ControlOutput)> {
        let start = self.controller.control_moment(state, reference)?;
        let next = match self.hold {
            HoldMode::ZeroOrder => rk4_step_with(&self.plant.body, state, t, dt, |_, _| Ok(start.u))?,
            HoldMode::PerStage => rk4_step_with(&self.plant.body, state, t, dt, |ts, s| {
                if ts == t {
                    return Ok(start.u);
                }
                let r = self.reference.reference_step(reference, t, ts - t);
                Ok(self.controller.control_moment(s, &r)?.u)
            })?,
        };
        Ok((next, start))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub attitude: Mat3,
    pub omega: Vec3,
    pub attitude_d: Mat3,
    pub omega_d: Vec3,
    pub u: Vec3,
    pub psi: f64,
    pub e_q: Vec3,
    pub e_w: Vec3,
    pub s: Vec3,
    pub monitor: LyapunovSample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub error: Error,
    pub t: f64,
    pub last_state: BodyState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub steps: usize,
    pub max_zq_settled: f64,
    /// Largest `r` with `V(t) <= V(0) exp(-r t)` at every sample above the
    /// fit floor. Only for perfect parameter knowledge.
    pub fitted_rate: Option<f64>,
    /// Perfect knowledge: samples above the certified exponential envelope.
    /// Otherwise: settled samples with `|z_q|` above the certified radius.
    pub envelope_violations: usize,
    pub sandwich_violations: usize,
    pub max_orthogonality_error: f64,
    pub final_v: f64,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub records: Vec<TrajectoryRecord>,
    pub abort: Option<Abort>,
}

/// Everything needed to run one closed-loop trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    pub model: InertiaModel,
    pub gains: Gains,
    pub geometry: ErrorGeometry,
    pub reference: ReferenceGenerator,
    /// Initial attitude relative to `Q_d(0)`: `Q(0) = Q_d(0) exp(angle hat(axis))`.
    pub initial_axis: UnitVec3,
    pub initial_angle: f64,
    /// Initial body rate; `None` means matched to the reference, `e_w(0) = 0`.
    pub initial_omega: Option<Vec3>,
    pub dt: f64,
    pub duration: f64,
    pub hold: HoldMode,
}

impl Scenario {
    pub fn closed_loop(&self) -> ClosedLoop {
        ClosedLoop::new(&self.model, self.gains, self.geometry, self.reference, self.hold)
    }

    pub fn initial_state(&self) -> BodyState {
        let rf = self.reference.initial_state();
        let attitude = rf
            .attitude
            .compose(&exp_rodrigues(&self.initial_axis, self.initial_angle));
        let omega = self
            .initial_omega
            .unwrap_or_else(|| attitude.matrix().transpose() * rf.attitude.matrix() * rf.omega);
        BodyState { attitude, omega }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::validation(
                "integration.dt",
                format!("must lie in (0, {MAX_DT}]"),
            ));
        }
        if !(self.duration.is_finite() && self.duration >= 2.0 * self.dt) {
            return Err(Error::validation(
                "integration.duration",
                "must be finite and span at least two steps",
            ));
        }
        self.gains.validate()?;
        self.reference.profile.validate()
    }
}

/// Runs the closed loop, recording one sample per step (including `t = 0`
/// and the final time) with Lyapunov monitors attached. `lambda_j` is the
/// true inertia distortion used by the monitors.
pub fn run_scenario(scenario: &Scenario, lambda_j: f64) -> Result<SimRun> {
    scenario.validate()?;
    let cl = scenario.closed_loop();
    let kappa = scenario.gains.kappa(lambda_j);
    let dt = scenario.dt;
    let n = scenario.steps();

    let mut records = Vec::with_capacity(n + 1);
    let mut state = scenario.initial_state();
    let mut reference = scenario.reference.initial_state();
    let mut abort = None;

    for k in 0..=n {
        let t = k as f64 * dt;
        let out = match cl.controller.control_moment(&state, &reference) {
            Ok(o) => o,
            Err(error) => {
                abort = Some(Abort {
                    error,
                    t,
                    last_state: state,
                });
                break;
            }
        };
        records.push(record(t, &state, &reference, &out, &scenario.gains, lambda_j, kappa));
        if k == n {
            break;
        }
        match cl.rk4_step(&state, &reference, t, dt) {
            Ok((next, _)) => {
                reference = cl.reference.reference_step(&reference, t, dt);
                state = next;
            }
            Err(error) => {
                abort = Some(Abort {
                    error,
                    t,
                    last_state: state,
                });
                break;
            }
        }
    }

    if records.len() >= 3 {
        let mut monitors: Vec<LyapunovSample> = records.iter().map(|r| r.monitor).collect();
        vdot_finite_difference(&mut monitors)?;
        for (r, m) in records.iter_mut().zip(monitors) {
            r.monitor.vdot_fd = m.vdot_fd;
        }
    }
    Ok(SimRun { records, abort })
}

fn record(
    t: f64,
    state: &BodyState,
    reference: &ReferenceState,
    out: &ControlOutput,
    gains: &Gains,
    lambda_j: f64,
    kappa: f64,
) -> TrajectoryRecord {
    let err = &out.error;
    let sandwich = sandwich_check(err, gains, lambda_j);
    let (zq, zw) = err.z_q();
    TrajectoryRecord {
        t,
        attitude: *state.attitude.matrix(),
        omega: state.omega,
        attitude_d: *reference.attitude.matrix(),
        omega_d: reference.omega,
        u: out.u,
        psi: err.psi,
        e_q: err.e_q,
        e_w: err.e_w,
        s: out.s,
        monitor: LyapunovSample {
            t,
            v: lyapunov_value(&out.s, err.psi, kappa),
            z_q_norm: zq.hypot(zw),
            s_norm: out.s.norm(),
            psi: err.psi,
            sandwich_lo: sandwich.lo,
            sandwich_hi: sandwich.hi,
            vdot_fd: f64::NAN,
        },
    }
}

/// Index of the first settled record.
pub fn settled_start(len: usize) -> usize {
    ((1.0 - SETTLING_FRACTION) * len as f64).floor() as usize
}

/// `decay_rate` is the certified perfect-knowledge rate; `radius` the
/// certified ultimate bound.
pub fn summarize(
    records: &[TrajectoryRecord],
    perfect_knowledge: bool,
    decay_rate: Option<f64>,
    radius: Option<f64>,
) -> SimSummary {
    let settled = &records[settled_start(records.len()).min(records.len())..];
    let max_zq_settled = settled.iter().map(|r| r.monitor.z_q_norm).fold(0.0, f64::max);
    let v0 = records.first().map_or(0.0, |r| r.monitor.v);

    let fitted_rate = (perfect_knowledge && v0 > 0.0).then(|| {
        records
            .iter()
            .skip(1)
            .filter(|r| r.monitor.v >= v0 * FIT_FLOOR)
            .map(|r| -(r.monitor.v / v0).ln() / r.t)
            .fold(f64::INFINITY, f64::min)
    });

    let envelope_violations = if perfect_knowledge {
        decay_rate.map_or(0, |rate| {
            records
                .iter()
                .filter(|r| r.monitor.v > decay_envelope(v0, rate, r.t) * (1.0 + ENVELOPE_SLACK))
                .count()
        })
    } else {
        radius.map_or(0, |rad| settled.iter().filter(|r| r.monitor.z_q_norm > rad).count())
    };

    let sandwich_violations = records
        .iter()
        .filter(|r| {
            let v = r.monitor.v;
            let tol = 1e-9 + 1e-9 * v.abs();
            !(r.monitor.sandwich_lo <= v + tol && v <= r.monitor.sandwich_hi + tol)
        })
        .count();

    SimSummary {
        steps: records.len().saturating_sub(1),
        max_zq_settled,
        fitted_rate,
        envelope_violations,
        sandwich_violations,
        max_orthogonality_error: records
            .iter()
            .map(|r| crate::geom::orthogonality_error(&r.attitude))
            .fold(0.0, f64::max),
        final_v: records.last().map_or(0.0, |r| r.monitor.v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: f64, b: f64, c: f64) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(a, b, c))
    }

    fn body(j: Mat3) -> RigidBodyParams {
        RigidBodyParams::new(j, 0.0, Vec3::zeros()).unwrap()
    }

    #[test]
    fn plant_derivative_examples() {
        let st = BodyState {
            attitude: exp_rodrigues(&UnitVec3::e1(), 0.4),
            omega: Vec3::zeros(),
        };
        let (dq, dw) = plant_derivative(&st, &Vec3::zeros(), &body(diag(1.0, 2.0, 3.0)));
        assert_eq!(dq, Mat3::zeros());
        assert_eq!(dw, Vec3::zeros());

        let spinning = BodyState {
            attitude: Rotation::identity(),
            omega: Vec3::new(0.3, -1.2, 2.0),
        };
        let (_, dw) = plant_derivative(&spinning, &Vec3::zeros(), &body(Mat3::identity()));
        assert_eq!(dw, Vec3::zeros());
    }

    #[test]
    fn constant_spin_about_pointing_axis_keeps_qd() {
        let gen = ReferenceGenerator {
            profile: ReferenceProfile::ConstantSpin { rate: 0.8 },
            axis: UnitVec3::e3(),
            initial_attitude: exp_rodrigues(&UnitVec3::e1(), 0.3),
        };
        let q0 = gen.initial_state().attitude.apply(&Vec3::z());
        let mut r = gen.initial_state();
        for k in 0..1000 {
            r = gen.reference_step(&r, k as f64 * 1e-3, 1e-3);
            assert_eq!(r.omega_dot, Vec3::zeros());
        }
        assert!((r.attitude.apply(&Vec3::z()) - q0).norm() <= 1e-13);
    }

    #[test]
    fn sinusoid_rates_are_analytic() {
        let p = ReferenceProfile::Sinusoid {
            amplitude: 0.5,
            frequency: 0.2,
        };
        let w = std::f64::consts::TAU * 0.2;
        for t in [0.0, 0.3, 1.7, 4.2] {
            assert_eq!(p.rate(t), 0.5 * (w * t).sin());
            assert!((p.rate_dot(t) - w * 0.5 * (w * t).cos()).abs() <= 1e-15);
        }
        // angle is the integral of rate: compare against Simpson quadrature.
        let t_end = 2.3;
        let n = 2000;
        let h = t_end / n as f64;
        let mut acc = p.rate(0.0) + p.rate(t_end);
        for i in 1..n {
            acc += p.rate(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((acc * h / 3.0 - p.angle(t_end)).abs() <= 1e-12);
    }

    #[test]
    fn ramp_profile_continuity() {
        let p = ReferenceProfile::RampThenHold {
            rate: 0.6,
            ramp_time: 2.0,
        };
        assert!((p.angle(2.0 - 1e-12) - p.angle(2.0)).abs() <= 1e-11);
        assert_eq!(p.rate(5.0), 0.6);
        assert_eq!(p.rate_dot(1.0), 0.3);
        assert_eq!(p.rate_dot(3.0), 0.0);
        assert_eq!(p.max_rate_dot(), 0.3);
    }

    #[test]
    fn reference_orthonormality_drift() {
        let gen = ReferenceGenerator {
            profile: ReferenceProfile::Sinusoid {
                amplitude: 1.0,
                frequency: 0.3,
            },
            axis: UnitVec3::normalize(Vec3::new(1.0, 1.0, 0.5)).unwrap(),
            initial_attitude: Rotation::identity(),
        };
        let mut r = gen.initial_state();
        for k in 0..100_000 {
            r = gen.reference_step(&r, k as f64 * 1e-3, 1e-3);
        }
        assert!(crate::geom::orthogonality_error(r.attitude.matrix()) < 1e-10);
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        // dw/dt = -w per component: J = I, damping 1, zero torque, zero control.
        let b = RigidBodyParams::new(Mat3::identity(), 1.0, Vec3::zeros()).unwrap();
        let st = BodyState {
            attitude: Rotation::identity(),
            omega: Vec3::new(1.0, 0.0, 0.0),
        };
        for dt in [0.1, 0.05] {
            let next = rk4_step_with(&b, &st, 0.0, dt, |_, _| Ok(Vec3::zeros())).unwrap();
            let err = (next.omega.x - (-dt).exp()).abs();
            // Local error of RK4 on w' = -w is dt^5 / 120 to leading order.
            assert!(err <= dt.powi(5) / 120.0 * 1.1, "dt {dt}: {err:e}");
            assert!(err >= dt.powi(5) / 120.0 * 0.8);
        }
    }

    #[test]
    fn zero_dynamics_is_bitwise_fixed() {
        let st = BodyState {
            attitude: exp_rodrigues(&UnitVec3::normalize(Vec3::new(0.2, -0.4, 0.9)).unwrap(), 0.9),
            omega: Vec3::zeros(),
        };
        let b = body(diag(0.02, 0.02, 0.04));
        let next = rk4_step_with(&b, &st, 0.0, 1e-3, |_, _| Ok(Vec3::zeros())).unwrap();
        assert_eq!(next, st);
    }

    #[test]
    fn torque_free_invariants() {
        let j = diag(1.0, 2.0, 3.0);
        let b = body(j);
        let mut st = BodyState {
            attitude: Rotation::identity(),
            omega: Vec3::new(0.4, 1.0, -0.3),
        };
        let h0 = (j * st.omega).norm();
        let e0 = 0.5 * st.omega.dot(&(j * st.omega));
        for k in 0..10_000 {
            st = rk4_step_with(&b, &st, k as f64 * 1e-3, 1e-3, |_, _| Ok(Vec3::zeros())).unwrap();
        }
        assert!(((j * st.omega).norm() - h0).abs() <= 1e-8);
        assert!((0.5 * st.omega.dot(&(j * st.omega)) - e0).abs() <= 1e-8);
    }

    #[test]
    fn envelope_check() {
        let gen = ReferenceGenerator {
            profile: ReferenceProfile::Sinusoid {
                amplitude: 0.5,
                frequency: 0.5,
            },
            axis: UnitVec3::e1(),
            initial_attitude: Rotation::identity(),
        };
        let env = Envelope {
            wd_max: 0.5,
            wd_dot_max: 1.0,
            psi_max: 2.0,
            f_max: 0.0,
            w_max: 1.0,
        };
        // Peak acceleration is pi/2 > 1.
        assert!(gen.check_envelope(&env).is_err());
        assert!(gen.check_envelope(&Envelope { wd_dot_max: 1.6, ..env }).is_ok());
    }
}
