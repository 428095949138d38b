#![allow(dead_code)]

use nalgebra::{Matrix2, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use s2track::certification::Envelope;
use s2track::control::{Gains, InertiaModel};
use s2track::error_geometry::ErrorGeometry;
use s2track::geom::{exp_rodrigues, hat, Mat3, Rotation, UnitVec3, Vec3};
use s2track::sim::{HoldMode, ReferenceGenerator, ReferenceProfile, Scenario};

pub fn j_nominal() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(0.02, 0.02, 0.04))
}

pub fn perfect_model() -> InertiaModel {
    InertiaModel::perfect(j_nominal(), 0.0, Vec3::zeros()).unwrap()
}

/// Controller believes the inertia is 10% larger than it is.
pub fn mismatch_model() -> InertiaModel {
    InertiaModel::new(j_nominal(), j_nominal() * 1.1, 0.0, Vec3::zeros(), Vec3::zeros()).unwrap()
}

pub fn perfect_gains() -> Gains {
    Gains::new(2.0, 1.0, 1.0, 2.0, 2.0, 1.0).unwrap()
}

pub fn mismatch_gains() -> Gains {
    Gains::new(2.0, 1.0, 1.0, 10.0, 5.0, 20.0).unwrap()
}

pub fn envelope(psi_max: f64) -> Envelope {
    Envelope {
        wd_max: 0.5,
        wd_dot_max: 0.7,
        psi_max,
        f_max: 0.0,
        w_max: 3.0,
    }
}

/// `w_d = 0.5 sin(2 pi 0.2 t) e1`: peak rate 0.5, peak acceleration 0.63.
pub fn sinusoid_reference() -> ReferenceGenerator {
    ReferenceGenerator {
        profile: ReferenceProfile::Sinusoid {
            amplitude: 0.5,
            frequency: 0.2,
        },
        axis: UnitVec3::e1(),
        initial_attitude: Rotation::identity(),
    }
}

/// 60 degree initial pointing error about e1, matched initial rate.
pub fn scenario(model: InertiaModel, gains: Gains, duration: f64, dt: f64) -> Scenario {
    Scenario {
        model,
        gains,
        geometry: ErrorGeometry::default(),
        reference: sinusoid_reference(),
        initial_axis: UnitVec3::e1(),
        initial_angle: 60f64.to_radians(),
        initial_omega: None,
        dt,
        duration,
        hold: HoldMode::PerStage,
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

pub fn random_axis(rng: &mut ChaCha8Rng) -> UnitVec3 {
    loop {
        let v = random_vec(rng, 1.0);
        if v.norm() > 1e-2 {
            return UnitVec3::normalize(v).unwrap();
        }
    }
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    let axis = random_axis(rng);
    exp_rodrigues(&axis, rng.random_range(-3.1..3.1))
}

/// Truncated Taylor series of the matrix exponential, independent of the
/// closed-form Rodrigues expression.
pub fn expm(a: &Mat3) -> Mat3 {
    let mut sum = Mat3::identity();
    let mut term = Mat3::identity();
    for k in 1..40 {
        term = term * a / k as f64;
        sum += term;
    }
    sum
}

/// `Q(t) = Q0 exp(t hat(a)) exp(t² hat(b))`, whose body rate is
/// `exp(-t² hat(b)) a + 2 t b`.
pub struct Flow {
    pub q0: Mat3,
    pub a: Vec3,
    pub b: Vec3,
}

impl Flow {
    pub fn attitude(&self, t: f64) -> Mat3 {
        self.q0 * expm(&(hat(&self.a) * t)) * expm(&(hat(&self.b) * (t * t)))
    }

    pub fn omega(&self, t: f64) -> Vec3 {
        expm(&(hat(&self.b) * (-t * t))) * self.a + self.b * (2.0 * t)
    }
}

/// The five weight matrices, entry by entry from their published form.
pub fn w_oracle(g: &Gains, lambda_j: f64, psi: f64) -> [Matrix2<f64>; 5] {
    let l = g.lambda + psi;
    let eta = g.eta;
    let g3 = g.gamma4 + g.gamma5;
    let kappa = 2.0 * eta * g.lambda * (g.gamma2 + g3) * lambda_j;
    let g23 = g.gamma2 + g3;
    [
        Matrix2::new(l * l / 2.0 + kappa, -l * eta / 2.0, -l * eta / 2.0, eta * eta / 2.0),
        Matrix2::new(l * l / 2.0 + 2.0 * kappa, l * eta / 2.0, l * eta / 2.0, eta * eta / 2.0),
        Matrix2::new(l * l, -psi * eta, -psi * eta, eta * eta) * (g.gamma2 * lambda_j),
        Matrix2::new(
            g3 * lambda_j * l * l,
            -g3 * lambda_j * psi * eta,
            -g3 * lambda_j * psi * eta,
            g.gamma4 * lambda_j * eta * eta,
        ),
        Matrix2::new(l * l, -psi * eta, -psi * eta, eta * eta) * g23,
    ]
}

pub fn eig_min_max(m: Matrix2<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(m).eigenvalues;
    (e.min(), e.max())
}

/// `min_psi lambda_min(W5) / max_psi lambda_max(W2)` over 64 points on
/// `[0, psi_max]`.
pub fn decay_rate_oracle(g: &Gains, lambda_j: f64, psi_max: f64) -> f64 {
    let mut w5_min = f64::INFINITY;
    let mut w2_max = 0.0f64;
    for k in 0..64 {
        let psi = psi_max * k as f64 / 63.0;
        let w = w_oracle(g, lambda_j, psi);
        w5_min = w5_min.min(eig_min_max(w[4]).0);
        w2_max = w2_max.max(eig_min_max(w[1]).1);
    }
    w5_min / w2_max
}

pub fn quad(m: &Matrix2<f64>, x: f64, y: f64) -> f64 {
    m[(0, 0)] * x * x + 2.0 * m[(0, 1)] * x * y + m[(1, 1)] * y * y
}
