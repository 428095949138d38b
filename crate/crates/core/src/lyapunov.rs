//! Lyapunov monitors evaluated along trajectories.

use serde::{Deserialize, Serialize};

use crate::certification::w_matrices;
use crate::control::{sliding_surface, Gains};
use crate::error::{Error, Result};
use crate::error_geometry::ErrorState;
use crate::geom::Vec3;

const SANDWICH_ABS_TOL: f64 = 1e-9;
const SANDWICH_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub v: f64,
    pub z_q_norm: f64,
    pub s_norm: f64,
    pub psi: f64,
    pub sandwich_lo: f64,
    pub sandwich_hi: f64,
    /// Filled in by [`vdot_finite_difference`].
    pub vdot_fd: f64,
}

/// `V = s.s / 2 + kappa psi`.
pub fn lyapunov_value(s: &Vec3, psi: f64, kappa: f64) -> f64 {
    0.5 * s.norm_squared() + kappa * psi
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichCheck {
    pub lo: f64,
    pub v: f64,
    pub hi: f64,
    pub ok: bool,
}

/// `lambda_min(W1)|z|² <= z^T W1 z <= V <= z^T W2 z <= lambda_max(W2)|z|²`
/// at the instantaneous psi, with `z = [|e_q|; |e_w|]`.
pub fn sandwich_check(err: &ErrorState, gains: &Gains, lambda_j: f64) -> SandwichCheck {
    let s = sliding_surface(err.psi, &err.e_q, &err.e_w, gains);
    let v = lyapunov_value(&s, err.psi, gains.kappa(lambda_j));
    let (zq, zw) = err.z_q();
    let w = w_matrices(gains, lambda_j, err.psi);
    let lo = w.w1.quad_form(zq, zw);
    let hi = w.w2.quad_form(zq, zw);
    let z2 = zq * zq + zw * zw;
    let tol = SANDWICH_ABS_TOL + SANDWICH_REL_TOL * v.abs();
    let ok = w.w1.lambda_min() * z2 <= lo + tol && lo <= v + tol && v <= hi + tol && hi <= w.w2.lambda_max() * z2 + tol;
    SandwichCheck { lo, v, hi, ok }
}

/// `V0 exp(-rate t)`.
pub fn decay_envelope(v0: f64, decay_rate: f64, t: f64) -> f64 {
    v0 * (-decay_rate * t).exp()
}

/// Second-order finite differences of `V` on a uniform grid: central in the
/// interior, one-sided three-point at the ends.
pub fn vdot_finite_difference(trace: &mut [LyapunovSample]) -> Result<()> {
    let n = trace.len();
    if n < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: n });
    }
    let dt = trace[1].t - trace[0].t;
    if !(dt > 0.0) {
        return Err(Error::NonUniformGrid(1));
    }
    for k in 2..n {
        let step = trace[k].t - trace[k - 1].t;
        if (step - dt).abs() > 1e-9 * dt {
            return Err(Error::NonUniformGrid(k));
        }
    }
    let v: Vec<f64> = trace.iter().map(|s| s.v).collect();
    trace[0].vdot_fd = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    for k in 1..n - 1 {
        trace[k].vdot_fd = (v[k + 1] - v[k - 1]) / (2.0 * dt);
    }
    trace[n - 1].vdot_fd = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    Ok(())
}
