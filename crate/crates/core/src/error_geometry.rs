//! Tracking error on S²: the attitude error function, the configuration
//! and angular-velocity error vectors (body frame), their kinematics and the
//! reference feedforward term.
//!
//! With `q = Q r_body`, `q_d = Q_d r_body` and `c = q^T q_d`:
//!
//! ```text
//! psi  = 2 - sqrt(2 (1 + c))
//! e_q  = Q^T (q_d x q) / sqrt(2 (1 + c))
//! e_w  = w - Q^T Q_d w_d
//! ```
//!
//! These satisfy `d/dt psi = e_q . e_w`, `|e_q|^2 <= psi <= 2 |e_q|^2` and
//! `|e_q|^2 = (1 - c) / 2 < 1` away from the antipode.

use crate::error::{Error, Result};
use crate::geom::{hat, Mat3, Rotation, UnitVec3, Vec3};

/// Configurations with `q^T q_d <= -1 + EPS_ANTIPODAL` are rejected.
pub const EPS_ANTIPODAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    /// Body to world.
    pub attitude: Rotation,
    /// Body-frame angular velocity, rad/s.
    pub omega: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceState {
    pub attitude: Rotation,
    /// Desired body-frame angular velocity, rad/s.
    pub omega: Vec3,
    /// Its time derivative, rad/s².
    pub omega_dot: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub psi: f64,
    pub e_q: Vec3,
    pub e_w: Vec3,
    /// Maps `e_w` into `d/dt e_q`.
    pub e_mat: Mat3,
    /// Maps `w_d` into `d/dt e_q`.
    pub xi: Mat3,
}

impl ErrorState {
    /// `d/dt e_q = E e_w + Xi w_d`.
    pub fn eq_dot(&self, omega_d: &Vec3) -> Vec3 {
        self.e_mat * self.e_w + self.xi * omega_d
    }

    /// `d/dt psi = e_q . e_w`.
    pub fn psi_dot(&self) -> f64 {
        self.e_q.dot(&self.e_w)
    }

    /// `[|e_q|; |e_w|]`.
    pub fn z_q(&self) -> (f64, f64) {
        (self.e_q.norm(), self.e_w.norm())
    }
}

/// Pointing pair and the normalizations shared by every error quantity.
struct Pointing {
    q: Vec3,
    qd: Vec3,
    cos: f64,
    /// `sqrt(2 (1 + c)) = |q + q_d|`.
    norm_sum: f64,
    /// `|q - q_d|`.
    norm_diff: f64,
}

impl Pointing {
    fn new(q: Vec3, qd: Vec3) -> Result<Self> {
        let cos = q.dot(&qd);
        if !(cos > -1.0 + EPS_ANTIPODAL) {
            return Err(Error::Antipodal(cos));
        }
        Ok(Pointing {
            q,
            qd,
            cos,
            norm_sum: (q + qd).norm(),
            norm_diff: (q - qd).norm(),
        })
    }

    // 2 - |q + q_d| rewritten without cancellation near alignment.
    fn psi(&self) -> f64 {
        self.norm_diff * self.norm_diff / (2.0 + self.norm_sum)
    }

    fn e_q(&self, att: &Mat3) -> Vec3 {
        att.transpose() * self.qd.cross(&self.q) / self.norm_sum
    }
}

/// Attitude error function for a pointing pair. Zero iff aligned, tends to 2
/// at the antipode.
pub fn attitude_error_psi(q: &UnitVec3, qd: &UnitVec3) -> Result<f64> {
    Ok(Pointing::new(*q.as_vec(), *qd.as_vec())?.psi())
}

/// `e_w = w - Q^T Q_d w_d`.
pub fn velocity_error(state: &BodyState, reference: &ReferenceState) -> Vec3 {
    state.omega - relative(state, reference) * reference.omega
}

/// Feedforward `d = hat(w) Q^T Q_d w_d - Q^T Q_d dw_d`.
pub fn feedforward_d(state: &BodyState, reference: &ReferenceState) -> Vec3 {
    let r = relative(state, reference);
    hat(&state.omega) * (r * reference.omega) - r * reference.omega_dot
}

/// Same quantity written through the velocity error:
/// `d = -hat(Q^T Q_d w_d) e_w - Q^T Q_d dw_d`.
pub fn feedforward_d_alt(state: &BodyState, reference: &ReferenceState) -> Vec3 {
    let r = relative(state, reference);
    let e_w = velocity_error(state, reference);
    -hat(&(r * reference.omega)) * e_w - r * reference.omega_dot
}

fn relative(state: &BodyState, reference: &ReferenceState) -> Mat3 {
    state.attitude.matrix().transpose() * reference.attitude.matrix()
}

/// Error evaluation for a fixed body pointing axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorGeometry {
    r_body: UnitVec3,
}

impl Default for ErrorGeometry {
    fn default() -> Self {
        ErrorGeometry { r_body: UnitVec3::e3() }
    }
}

impl ErrorGeometry {
    pub fn new(r_body: UnitVec3) -> Self {
        ErrorGeometry { r_body }
    }

    pub fn r_body(&self) -> &UnitVec3 {
        &self.r_body
    }

    /// World-frame pointing direction `R r_body`.
    pub fn pointing_direction(&self, attitude: &Rotation) -> UnitVec3 {
        UnitVec3::new_unchecked(attitude.apply(self.r_body.as_vec()))
    }

    fn pointing(&self, att: &Rotation, att_d: &Rotation) -> Result<Pointing> {
        Pointing::new(att.apply(self.r_body.as_vec()), att_d.apply(self.r_body.as_vec()))
    }

    pub fn psi(&self, att: &Rotation, att_d: &Rotation) -> Result<f64> {
        Ok(self.pointing(att, att_d)?.psi())
    }

    /// Configuration error `e_q = Q^T (q_d x q) / sqrt(2 (1 + q^T q_d))`.
    pub fn config_error(&self, att: &Rotation, att_d: &Rotation) -> Result<Vec3> {
        Ok(self.pointing(att, att_d)?.e_q(att.matrix()))
    }

    /// The matrices `(E, Xi)` of `d/dt e_q = E e_w + Xi w_d`.
    pub fn error_kinematics(&self, att: &Rotation, att_d: &Rotation) -> Result<(Mat3, Mat3)> {
        let p = self.pointing(att, att_d)?;
        Ok(kinematic_matrices(&p, att.matrix(), att_d.matrix()))
    }

    pub fn eq_dot(&self, state: &BodyState, reference: &ReferenceState) -> Result<Vec3> {
        Ok(self.evaluate(state, reference)?.eq_dot(&reference.omega))
    }

    pub fn evaluate(&self, state: &BodyState, reference: &ReferenceState) -> Result<ErrorState> {
        let att = state.attitude.matrix();
        let p = self.pointing(&state.attitude, &reference.attitude)?;
        let (e_mat, xi) = kinematic_matrices(&p, att, reference.attitude.matrix());
        Ok(ErrorState {
            psi: p.psi(),
            e_q: p.e_q(att),
            e_w: velocity_error(state, reference),
            e_mat,
            xi,
        })
    }
}

fn kinematic_matrices(p: &Pointing, att: &Mat3, att_d: &Mat3) -> (Mat3, Mat3) {
    let x = p.norm_sum;
    let x2 = x * x;
    let e_q = p.e_q(att);
    let q_hat = hat(&p.q);
    let eq_qd = e_q * p.qd.transpose();
    let eq_q = e_q * p.q.transpose();

    let e_mat =
        eq_qd * q_hat * att / x2 + att.transpose() * (Mat3::identity() * p.cos - p.qd * p.q.transpose()) * att / x;
    let xi = (eq_qd * q_hat + eq_q * hat(&p.qd)) * att_d / x2;
    (e_mat, xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::exp_rodrigues;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        ((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), -3.1..3.1f64)
            .prop_filter("axis", |((x, y, z), _)| x * x + y * y + z * z > 1e-3)
            .prop_map(|((x, y, z), a)| exp_rodrigues(&UnitVec3::normalize(Vec3::new(x, y, z)).unwrap(), a))
    }

    fn arb_vec(scale: f64) -> impl Strategy<Value = Vec3> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn state(att: Rotation, omega: Vec3) -> BodyState {
        BodyState { attitude: att, omega }
    }

    fn reference(att: Rotation, omega: Vec3, omega_dot: Vec3) -> ReferenceState {
        ReferenceState {
            attitude: att,
            omega,
            omega_dot,
        }
    }

    fn flow(att: &Rotation, omega: &Vec3, h: f64) -> Rotation {
        let n = omega.norm();
        if n == 0.0 {
            return *att;
        }
        att.compose(&exp_rodrigues(&UnitVec3::normalize(*omega).unwrap(), n * h))
    }

    #[test]
    fn pointing_direction_examples() {
        let g = ErrorGeometry::default();
        assert_eq!(*g.pointing_direction(&Rotation::identity()).as_vec(), Vec3::z());
        let r = exp_rodrigues(&UnitVec3::e1(), FRAC_PI_2);
        let oracle = r.apply(&Vec3::z());
        let q = g.pointing_direction(&r);
        assert_abs_diff_eq!(*q.as_vec(), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(*q.as_vec(), Vec3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn psi_examples() {
        let e3 = UnitVec3::e3();
        assert_eq!(attitude_error_psi(&e3, &e3).unwrap(), 0.0);
        let psi = attitude_error_psi(&UnitVec3::e1(), &e3).unwrap();
        assert_abs_diff_eq!(psi, 2.0 - SQRT_2, epsilon = 1e-15);
        // |e_q|^2 = 1/2 at a right angle; 1/2 <= psi <= 1.
        assert!((0.5..=1.0).contains(&psi));
        let anti = UnitVec3::new(-Vec3::z()).unwrap();
        assert!(matches!(attitude_error_psi(&e3, &anti), Err(Error::Antipodal(_))));
    }

    #[test]
    fn config_error_examples() {
        let g = ErrorGeometry::default();
        let i = Rotation::identity();
        assert_eq!(g.config_error(&i, &i).unwrap(), Vec3::zeros());
        let qd = exp_rodrigues(&UnitVec3::e1(), FRAC_PI_2);
        let e_q = g.config_error(&i, &qd).unwrap();
        assert_abs_diff_eq!(e_q, Vec3::new(-1.0 / SQRT_2, 0.0, 0.0), epsilon = 1e-15);
        let flipped = exp_rodrigues(&UnitVec3::e1(), std::f64::consts::PI);
        assert!(matches!(g.config_error(&i, &flipped), Err(Error::Antipodal(_))));
    }

    #[test]
    fn velocity_error_examples() {
        let att = exp_rodrigues(&UnitVec3::e2(), 0.4);
        let w = Vec3::new(0.1, -0.2, 0.3);
        let st = state(att, w);
        assert_eq!(velocity_error(&st, &reference(att, w, Vec3::zeros())), Vec3::zeros());
        let other = exp_rodrigues(&UnitVec3::e1(), 1.0);
        assert_eq!(velocity_error(&st, &reference(other, Vec3::zeros(), Vec3::zeros())), w);
    }

    #[test]
    fn aligned_kinematics() {
        let g = ErrorGeometry::default();
        let i = Rotation::identity();
        let (e, xi) = g.error_kinematics(&i, &i).unwrap();
        let expected = (Mat3::identity() - Vec3::z() * Vec3::z().transpose()) * 0.5;
        assert_abs_diff_eq!(e, expected, epsilon = 1e-15);
        assert_eq!(xi, Mat3::zeros());

        let att = exp_rodrigues(&UnitVec3::normalize(Vec3::new(1.0, 2.0, -1.0)).unwrap(), 2.0);
        let (_, xi) = g.error_kinematics(&att, &att).unwrap();
        assert_eq!(xi, Mat3::zeros());
        let st = state(att, Vec3::new(0.3, 0.1, 0.2));
        let rf = reference(att, st.omega, Vec3::new(1.0, 1.0, 1.0));
        assert_abs_diff_eq!(g.eq_dot(&st, &rf).unwrap(), Vec3::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn feedforward_examples() {
        let att = exp_rodrigues(&UnitVec3::e3(), 0.7);
        let st = state(att, Vec3::new(1.0, 2.0, 3.0));
        let zero_ref = reference(Rotation::identity(), Vec3::zeros(), Vec3::zeros());
        assert_eq!(feedforward_d(&st, &zero_ref), Vec3::zeros());

        let w = Vec3::new(0.5, -0.3, 0.2);
        let wd = Vec3::new(0.1, 0.4, -0.6);
        let wdd = Vec3::new(-0.2, 0.05, 0.3);
        let i = Rotation::identity();
        let d = feedforward_d(&state(i, w), &reference(i, wd, wdd));
        assert_abs_diff_eq!(d, w.cross(&wd) - wdd, epsilon = 1e-15);

        // Matched velocity: only the acceleration term survives in the alternative form.
        let qd = exp_rodrigues(&UnitVec3::e1(), 0.3);
        let rel = att.matrix().transpose() * qd.matrix();
        let matched = state(att, rel * wd);
        let d_alt = feedforward_d_alt(&matched, &reference(qd, wd, wdd));
        assert_abs_diff_eq!(d_alt, -(rel * wdd), epsilon = 1e-15);
        let d_alt = feedforward_d_alt(&st, &reference(qd, Vec3::zeros(), wdd));
        assert_abs_diff_eq!(d_alt, -(rel * wdd), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn config_error_norm_identity(a in arb_rotation(), b in arb_rotation()) {
            let g = ErrorGeometry::default();
            let q = a.apply(&Vec3::z());
            let qd = b.apply(&Vec3::z());
            let c = q.dot(&qd);
            prop_assume!(c > -1.0 + 1e-6);
            let e_q = g.config_error(&a, &b).unwrap();
            prop_assert!((e_q.norm_squared() - (1.0 - c) / 2.0).abs() <= 1e-12);
            prop_assert!(e_q.norm() < 1.0);
            let psi = g.psi(&a, &b).unwrap();
            prop_assert!(e_q.norm_squared() <= psi + 1e-12);
            prop_assert!(psi <= 2.0 * e_q.norm_squared() + 1e-12);
        }

        #[test]
        fn feedforward_forms_agree(a in arb_rotation(), b in arb_rotation(),
                                   w in arb_vec(5.0), wd in arb_vec(5.0), wdd in arb_vec(5.0)) {
            let st = state(a, w);
            let rf = reference(b, wd, wdd);
            let d = feedforward_d(&st, &rf);
            let d_alt = feedforward_d_alt(&st, &rf);
            prop_assert!((d - d_alt).norm() <= 1e-13 * (1.0 + d.norm()));
        }

        #[test]
        fn frame_equivariance(a in arb_rotation(), b in arb_rotation(), s in arb_rotation(),
                              w in arb_vec(2.0), wd in arb_vec(2.0)) {
            let g = ErrorGeometry::default();
            let st = state(a, w);
            let rf = reference(b, wd, Vec3::zeros());
            prop_assume!(g.evaluate(&st, &rf).is_ok());
            let e0 = g.evaluate(&st, &rf).unwrap();
            let e1 = g.evaluate(&state(s.compose(&a), w), &reference(s.compose(&b), wd, Vec3::zeros())).unwrap();
            prop_assert!((e0.psi - e1.psi).abs() <= 1e-12);
            prop_assert!((e0.e_q - e1.e_q).norm() <= 1e-12);
            prop_assert!((e0.e_w - e1.e_w).norm() <= 1e-12);
        }

        #[test]
        fn kinematics_match_finite_difference(a in arb_rotation(), b in arb_rotation(),
                                              w in arb_vec(2.0), wd in arb_vec(2.0)) {
            let g = ErrorGeometry::default();
            let st = state(a, w);
            let rf = reference(b, wd, Vec3::zeros());
            let c = a.apply(&Vec3::z()).dot(&b.apply(&Vec3::z()));
            prop_assume!(c > -0.9);
            let err = g.evaluate(&st, &rf).unwrap();
            let h = 1e-6;
            let fwd = (flow(&a, &w, h), flow(&b, &wd, h));
            let bwd = (flow(&a, &w, -h), flow(&b, &wd, -h));
            let fd_eq = (g.config_error(&fwd.0, &fwd.1).unwrap()
                - g.config_error(&bwd.0, &bwd.1).unwrap()) / (2.0 * h);
            let fd_psi = (g.psi(&fwd.0, &fwd.1).unwrap() - g.psi(&bwd.0, &bwd.1).unwrap()) / (2.0 * h);
            let an = err.eq_dot(&wd);
            prop_assert!((fd_eq - an).norm() <= 1e-6 * (1.0 + an.norm()));
            prop_assert!((fd_psi - err.psi_dot()).abs() <= 1e-6 * (1.0 + err.psi_dot().abs()));
        }
    }
}
