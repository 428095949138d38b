//! Small-matrix primitives on SO(3) and S²: the hat/vee isomorphism, the
//! Rodrigues exponential and polar-factor repair of integrated rotations.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthogonality tolerance on `|m^T m - I|_F` and on `|det m - 1|`.
pub const TOL_ORTH: f64 = 1e-9;
/// Skew tolerance on `|m + m^T|_F`.
pub const TOL_SKEW: f64 = 1e-9;
/// Unit-norm tolerance.
pub const TOL_UNIT: f64 = 1e-12;

const DEGENERATE_DET: f64 = 1e-6;
const POLAR_CONVERGED: f64 = 1e-14;
const POLAR_MAX_ITERS: usize = 64;

/// Skew-symmetric matrix with `hat(r) * w == r.cross(w)`.
pub fn hat(r: &Vec3) -> Mat3 {
    Mat3::new(0.0, -r.z, r.y, r.z, 0.0, -r.x, -r.y, r.x, 0.0)
}

/// Inverse of [`hat`]. Reads `(m32, m13, m21)`.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let asym = (m + m.transpose()).norm();
    if !(asym <= TOL_SKEW) {
        return Err(Error::NotSkew(asym));
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

pub fn orthogonality_error(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Attitude matrix. Constructed through [`Rotation::new`] the invariants
/// `|m^T m - I|_F <= TOL_ORTH` and `|det m - 1| <= TOL_ORTH` hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn new(m: Mat3) -> Result<Self> {
        let orth_err = orthogonality_error(&m);
        let det = m.determinant();
        if !(orth_err <= TOL_ORTH) || !((det - 1.0).abs() <= TOL_ORTH) {
            return Err(Error::NotRotation { orth_err, det });
        }
        Ok(Rotation(m))
    }

    /// Wraps a matrix without checking it. Used for Runge-Kutta stage values,
    /// which leave SO(3) by O(dt²) and must not be projected back.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn compose(&self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Point on S².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !((n - 1.0).abs() <= TOL_UNIT) {
            return Err(Error::NotUnit(n));
        }
        Ok(UnitVec3(v))
    }

    pub fn normalize(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::NotUnit(n));
        }
        Ok(UnitVec3(v / n))
    }

    pub(crate) fn new_unchecked(v: Vec3) -> Self {
        UnitVec3(v)
    }

    pub fn e1() -> Self {
        UnitVec3(Vec3::x())
    }

    pub fn e2() -> Self {
        UnitVec3(Vec3::y())
    }

    pub fn e3() -> Self {
        UnitVec3(Vec3::z())
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }
}

/// `exp(angle * hat(axis)) = I + hat(axis) sin(angle) + hat(axis)² (1 - cos(angle))`.
pub fn exp_rodrigues(axis: &UnitVec3, angle: f64) -> Rotation {
    let k = hat(axis.as_vec());
    Rotation(Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos()))
}

/// Nearest rotation to `m` in the Frobenius norm (orthogonal polar factor),
/// by Newton iteration `m <- (m + m^-T) / 2`.
pub fn reorthonormalize(m: &Mat3) -> Result<Rotation> {
    let det = m.determinant();
    if !(det > DEGENERATE_DET) {
        return Err(Error::Degenerate(det));
    }
    // Already orthogonal to a few ulp: the polar factor is m itself.
    if orthogonality_error(m) <= 4.0 * f64::EPSILON {
        return Ok(Rotation(*m));
    }
    let mut x = *m;
    for _ in 0..POLAR_MAX_ITERS {
        let inv_t = x.try_inverse().ok_or(Error::Degenerate(x.determinant()))?.transpose();
        let next = (x + inv_t) * 0.5;
        let step = (next - x).norm();
        x = next;
        if step < POLAR_CONVERGED {
            break;
        }
    }
    Ok(Rotation(x))
}
