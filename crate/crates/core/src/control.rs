//! The tracking control moment, its drift model and sliding surface.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::error_geometry::{feedforward_d, BodyState, ErrorGeometry, ErrorState, ReferenceState};
use crate::geom::{Mat3, Vec3};

/// Rotational rigid-body parameters: inertia `J` (kg m²), viscous damping
/// `c` (N m s) and a constant exogenous torque `tau` (N m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyParams {
    inertia: Mat3,
    inertia_inv: Mat3,
    damping: f64,
    torque: Vec3,
}

impl RigidBodyParams {
    pub fn new(inertia: Mat3, damping: f64, torque: Vec3) -> Result<Self> {
        let scale = inertia.norm();
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::SingularInertia(0.0));
        }
        if (inertia - inertia.transpose()).norm() > 1e-12 * scale {
            return Err(Error::SingularInertia(f64::NAN));
        }
        let min_eig = inertia.symmetric_eigenvalues().min();
        if !(min_eig > 1e-12 * scale) {
            return Err(Error::SingularInertia(min_eig));
        }
        let inertia_inv = inertia.try_inverse().ok_or(Error::SingularInertia(min_eig))?;
        Ok(RigidBodyParams {
            inertia,
            inertia_inv,
            damping,
            torque,
        })
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn torque(&self) -> &Vec3 {
        &self.torque
    }

    /// `f = J^-1 ((J w) x w - c w + tau)`.
    pub fn drift(&self, omega: &Vec3) -> Vec3 {
        self.inertia_inv * ((self.inertia * omega).cross(omega) - omega * self.damping + self.torque)
    }

    /// Same parameters with the inertia multiplied by `alpha`.
    pub fn scale_inertia(&self, alpha: f64) -> Result<Self> {
        RigidBodyParams::new(self.inertia * alpha, self.damping, self.torque)
    }
}

/// Drift term for an arbitrary parameter triple.
pub fn drift_f(inertia: &Mat3, damping: f64, torque: &Vec3, omega: &Vec3) -> Result<Vec3> {
    Ok(RigidBodyParams::new(*inertia, damping, *torque)?.drift(omega))
}

/// True plant parameters together with the controller's estimate of them.
/// The damping coefficient is shared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaModel {
    truth: RigidBodyParams,
    estimate: RigidBodyParams,
}

impl InertiaModel {
    pub fn new(j: Mat3, j_hat: Mat3, damping: f64, tau: Vec3, tau_hat: Vec3) -> Result<Self> {
        Ok(InertiaModel {
            truth: RigidBodyParams::new(j, damping, tau)?,
            estimate: RigidBodyParams::new(j_hat, damping, tau_hat)?,
        })
    }

    /// `J_hat = J`, `tau_hat = tau`.
    pub fn perfect(j: Mat3, damping: f64, tau: Vec3) -> Result<Self> {
        InertiaModel::new(j, j, damping, tau, tau)
    }

    pub fn truth(&self) -> &RigidBodyParams {
        &self.truth
    }

    pub fn estimate(&self) -> &RigidBodyParams {
        &self.estimate
    }

    /// Exact (bitwise) parameter knowledge.
    pub fn is_perfect(&self) -> bool {
        self.truth.inertia == self.estimate.inertia && self.truth.torque == self.estimate.torque
    }

    /// `J^-1 J_hat`, exactly the identity under perfect inertia knowledge.
    pub fn inertia_ratio(&self) -> Mat3 {
        if self.truth.inertia == self.estimate.inertia {
            Mat3::identity()
        } else {
            self.truth.inertia_inv * self.estimate.inertia
        }
    }

    /// `Delta J = I - J^-1 J_hat`.
    pub fn delta_j(&self) -> Mat3 {
        Mat3::identity() - self.inertia_ratio()
    }

    /// `f - J^-1 J_hat f_hat` at body rate `omega`.
    pub fn drift_mismatch(&self, omega: &Vec3) -> Vec3 {
        if self.is_perfect() {
            return Vec3::zeros();
        }
        self.truth.drift(omega) - self.inertia_ratio() * self.estimate.drift(omega)
    }
}

/// Surface and robustness gains. `gamma3 = gamma4 + gamma5` and
/// `gamma = gamma1 + gamma2 + gamma3` are derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gains {
    pub lambda: f64,
    pub eta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma4: f64,
    pub gamma5: f64,
}

impl Gains {
    pub fn new(lambda: f64, eta: f64, gamma1: f64, gamma2: f64, gamma4: f64, gamma5: f64) -> Result<Self> {
        let g = Gains {
            lambda,
            eta,
            gamma1,
            gamma2,
            gamma4,
            gamma5,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma4", self.gamma4),
            ("gamma5", self.gamma5),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("gains.{name}"),
                    "must be finite and strictly positive",
                ));
            }
        }
        Ok(())
    }

    pub fn gamma3(&self) -> f64 {
        self.gamma4 + self.gamma5
    }

    pub fn gamma(&self) -> f64 {
        self.gamma1 + self.gamma2 + self.gamma3()
    }

    /// Weight of the attitude error function in the Lyapunov function,
    /// `2 eta Lambda (gamma2 + gamma3) lambda_J`.
    pub fn kappa(&self, lambda_j: f64) -> f64 {
        2.0 * self.eta * self.lambda * (self.gamma2 + self.gamma3()) * lambda_j
    }

    /// All robustness gains multiplied by `factor`; `lambda` and `eta` kept.
    pub fn scale_gammas(&self, factor: f64) -> Gains {
        Gains {
            gamma1: self.gamma1 * factor,
            gamma2: self.gamma2 * factor,
            gamma4: self.gamma4 * factor,
            gamma5: self.gamma5 * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// Body-frame control moment, N m.
    pub u: Vec3,
    pub s: Vec3,
    pub f_hat: Vec3,
    pub d: Vec3,
    pub error: ErrorState,
}

/// `s = (Lambda + psi) e_q + eta e_w`.
pub fn sliding_surface(psi: f64, e_q: &Vec3, e_w: &Vec3, gains: &Gains) -> Vec3 {
    e_q * (gains.lambda + psi) + e_w * gains.eta
}

/// Output feedback over `(Q, w)` and the reference. Holds only the model
/// estimate; the true plant parameters are not reachable from here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    geometry: ErrorGeometry,
    model: RigidBodyParams,
    gains: Gains,
}

impl Controller {
    pub fn new(geometry: ErrorGeometry, model: RigidBodyParams, gains: Gains) -> Self {
        Controller { geometry, model, gains }
    }

    pub fn gains(&self) -> &Gains {
        &self.gains
    }

    pub fn geometry(&self) -> &ErrorGeometry {
        &self.geometry
    }

    /// ```text
    /// u = eta^-1 J_hat (-eta (f_hat + d) - (Lambda + psi) de_q - dpsi e_q - gamma s)
    /// ```
    /// with `dpsi = e_q . e_w` and `de_q = E e_w + Xi w_d`.
    pub fn control_moment(&self, state: &BodyState, reference: &ReferenceState) -> Result<ControlOutput> {
        let err = self.geometry.evaluate(state, reference)?;
        let g = &self.gains;
        let s = sliding_surface(err.psi, &err.e_q, &err.e_w, g);
        let f_hat = self.model.drift(&state.omega);
        let d = feedforward_d(state, reference);
        let eq_dot = err.eq_dot(&reference.omega);
        let inner = -(f_hat + d) * g.eta - eq_dot * (g.lambda + err.psi) - err.e_q * err.psi_dot() - s * g.gamma();
        let u = self.model.inertia() * inner / g.eta;
        Ok(ControlOutput {
            u,
            s,
            f_hat,
            d,
            error: err,
        })
    }
}

/// Control moment from the estimate half of `model`.
pub fn control_moment(
    state: &BodyState,
    reference: &ReferenceState,
    model: &InertiaModel,
    gains: &Gains,
    geometry: &ErrorGeometry,
) -> Result<ControlOutput> {
    Controller::new(*geometry, *model.estimate(), *gains).control_moment(state, reference)
}
