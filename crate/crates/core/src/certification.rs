//! Pre-run certification of a gain set: inertia distortion `lambda_J`,
//! sampled perturbation bounds, the gain inequalities, the 2x2 Lyapunov
//! weight matrices `W1..W5`, the `e_w` / `z_q` thresholds, the set
//! conditions and the resulting ultimate-bound radius and decay rate.
//!
//! Everything that depends on the attitude error function `psi` is taken at
//! its worst case over `psi in [0, psi_max]`, so the certificate does not
//! depend on a particular trajectory.

use nalgebra::{Matrix2, Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{Gains, InertiaModel};
use crate::error::{Error, Result};
use crate::error_geometry::{BodyState, ErrorGeometry, ReferenceState};
use crate::geom::{exp_rodrigues, hat, Mat3, Rotation, UnitVec3, Vec3};

/// Multiplier applied to every sampled supremum.
pub const BOUND_SAFETY_FACTOR: f64 = 1.1;
/// Uniform grid over `[0, psi_max]` used for psi-dependent eigenvalues.
pub const PSI_GRID_POINTS: usize = 64;
pub const DEFAULT_SEED: u64 = 42;
/// Sample count below which bounds are not considered certification grade.
pub const MIN_CERT_SAMPLES: usize = 10_000;
/// Sampling never gets closer to the antipode than `q^T q_d = -1 + this`.
pub const ANTIPODAL_SAMPLING_MARGIN: f64 = 1e-6;

const HALTON_PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Operating envelope the certificate is valid for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Envelope {
    /// Sup of `|w_d|`, rad/s.
    pub wd_max: f64,
    /// Sup of `|dw_d/dt|`, rad/s².
    pub wd_dot_max: f64,
    /// Sup of `psi`.
    #[serde(default = "default_psi_max")]
    pub psi_max: f64,
    /// Declared bound on unmodeled drift, added on top of the sampled
    /// `|f - J^-1 J_hat f_hat|`.
    #[serde(default)]
    pub f_max: f64,
    /// Sup of `|w|` used when sampling the drift mismatch, rad/s.
    pub w_max: f64,
}

fn default_psi_max() -> f64 {
    2.0
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wd_max", self.wd_max),
            ("wd_dot_max", self.wd_dot_max),
            ("f_max", self.f_max),
            ("w_max", self.w_max),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    format!("envelope.{name}"),
                    "must be finite and nonnegative",
                ));
            }
        }
        if !(self.psi_max > 0.0 && self.psi_max <= 2.0) {
            return Err(Error::validation("envelope.psi_max", "must lie in (0, 2]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimates {
    pub a1_max: f64,
    pub a2_max: f64,
    pub b_max: f64,
    /// Sup of `(Lambda + psi) |B|`.
    pub upsilon_max: f64,
    /// Sup of `eta |B| + (Lambda + psi) |A1 - eta A2|`.
    pub a_breve_max: f64,
    /// Sup of `|f - J^-1 J_hat f_hat|` plus the declared `f_max`.
    pub f_mismatch_max: f64,
    pub samples: usize,
    pub seed: u64,
    pub safety_factor: f64,
}

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Sym2 { a, b, c }
    }

    pub fn scaled(&self, k: f64) -> Sym2 {
        Sym2::new(self.a * k, self.b * k, self.c * k)
    }

    /// `(lambda_min, lambda_max)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a + self.c);
        let radius = (0.5 * (self.a - self.c)).hypot(self.b);
        (mean - radius, mean + radius)
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues().0
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues().1
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn is_positive_definite(&self) -> bool {
        self.lambda_min() > 0.0
    }

    /// `x^T M x` for `x = (x0, x1)`.
    pub fn quad_form(&self, x0: f64, x1: f64) -> f64 {
        self.a * x0 * x0 + 2.0 * self.b * x0 * x1 + self.c * x1 * x1
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.a, self.b, self.b, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WMatrices {
    pub w1: Sym2,
    pub w2: Sym2,
    pub w3: Sym2,
    pub w4: Sym2,
    pub w5: Sym2,
}

/// One inequality of the certificate. `margin = rhs - lhs` for upper-bound
/// conditions and `lhs - rhs` for lower-bound ones, so positive is passing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub description: String,
    pub lhs: f64,
    pub rhs: Option<f64>,
    pub margin: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn less_than(id: &str, description: &str, lhs: f64, rhs: Option<f64>) -> Check {
        let margin = rhs.map(|r| r - lhs);
        Check {
            id: id.into(),
            description: description.into(),
            lhs,
            rhs,
            margin,
            pass: margin.is_some_and(|m| m > 0.0),
        }
    }

    fn greater_than(id: &str, description: &str, lhs: f64, rhs: Option<f64>) -> Check {
        let margin = rhs.map(|r| lhs - r);
        Check {
            id: id.into(),
            description: description.into(),
            lhs,
            rhs,
            margin,
            pass: margin.is_some_and(|m| m > 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub name: String,
    /// Smallest eigenvalue over the psi grid.
    pub lambda_min: f64,
    /// Largest eigenvalue over the psi grid.
    pub lambda_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `A_breve_max / ((gamma5 lambda_J - A2_max) eta² - eta A1_max)`.
    pub e_w_threshold: f64,
    pub z_q_threshold: f64,
    /// `sqrt(Upsilon_max / lambda_min(W3))`.
    pub radius: f64,
    /// `lambda_min(W5) / lambda_max(W2)`.
    pub decay_rate: f64,
    pub denominator: f64,
    pub lambda_min_w3: f64,
    pub lambda_min_w5: f64,
    pub lambda_max_w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub lambda_j: f64,
    pub kappa: f64,
    pub gains: Gains,
    pub envelope: Envelope,
    pub bounds: BoundEstimates,
    pub gain_checks: Vec<Check>,
    pub w_eigs: Vec<EigenSummary>,
    pub e_w_threshold: Option<f64>,
    pub z_q_threshold: Option<f64>,
    pub radius: Option<f64>,
    pub decay_rate: f64,
    pub set_conditions: Vec<Check>,
    pub perfect_knowledge: bool,
    pub certified: bool,
    pub failures: Vec<String>,
    pub psi_grid_points: usize,
    pub seed: u64,
}

/// `lambda_min(J^-1 J_hat)`, computed on the congruent symmetric matrix
/// `L^-1 J_hat L^-T` with `J = L L^T`.
pub fn lambda_j(model: &InertiaModel) -> Result<f64> {
    let j = model.truth().inertia();
    let j_hat = model.estimate().inertia();
    if j == j_hat {
        return Ok(1.0);
    }
    let chol = j
        .cholesky()
        .ok_or(Error::SingularInertia(j.symmetric_eigenvalues().min()))?;
    let l_inv = chol.l().try_inverse().ok_or(Error::SingularInertia(0.0))?;
    let m = l_inv * j_hat * l_inv.transpose();
    let sym = (m + m.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().min())
}

/// The five weight matrices at a given `psi`.
pub fn w_matrices(gains: &Gains, lambda_j: f64, psi: f64) -> WMatrices {
    let l = gains.lambda + psi;
    let eta = gains.eta;
    let kappa = gains.kappa(lambda_j);
    let g3 = gains.gamma3();
    let base = Sym2::new(l * l, -psi * eta, eta * eta);
    WMatrices {
        w1: Sym2::new(l * l / 2.0 + kappa, -l * eta / 2.0, eta * eta / 2.0),
        w2: Sym2::new(l * l / 2.0 + 2.0 * kappa, l * eta / 2.0, eta * eta / 2.0),
        w3: base.scaled(gains.gamma2 * lambda_j),
        w4: Sym2::new(
            g3 * lambda_j * l * l,
            -g3 * lambda_j * psi * eta,
            gains.gamma4 * lambda_j * eta * eta,
        ),
        w5: base.scaled(gains.gamma2 + g3),
    }
}

pub fn psi_grid(psi_max: f64) -> impl Iterator<Item = f64> {
    let n = PSI_GRID_POINTS - 1;
    (0..=n).map(move |k| psi_max * k as f64 / n as f64)
}

/// Extreme eigenvalues of each `W_i` over the psi grid.
pub fn w_eigen_summary(gains: &Gains, lambda_j: f64, psi_max: f64) -> Vec<EigenSummary> {
    let mut lo = [f64::INFINITY; 5];
    let mut hi = [f64::NEG_INFINITY; 5];
    for psi in psi_grid(psi_max) {
        let w = w_matrices(gains, lambda_j, psi);
        for (i, m) in [w.w1, w.w2, w.w3, w.w4, w.w5].iter().enumerate() {
            let (mn, mx) = m.eigenvalues();
            lo[i] = lo[i].min(mn);
            hi[i] = hi[i].max(mx);
        }
    }
    (0..5)
        .map(|i| EigenSummary {
            name: format!("W{}", i + 1),
            lambda_min: lo[i],
            lambda_max: hi[i],
        })
        .collect()
}

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    out
}

/// Scrambled Halton point: the plain sequence (index from 1) with a seeded
/// Cranley-Patterson rotation.
fn halton_point(index: u64, shift: &[f64; 12]) -> [f64; 12] {
    let mut u = [0.0; 12];
    for d in 0..12 {
        let v = radical_inverse(index + 1, HALTON_PRIMES[d]) + shift[d];
        u[d] = v - v.floor();
    }
    u
}

fn uniform_rotation(u0: f64, u1: f64, u2: f64) -> Rotation {
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u0).sqrt(), u0.sqrt());
    let q = Quaternion::new(
        b * (tau * u2).cos(),
        a * (tau * u1).sin(),
        a * (tau * u1).cos(),
        b * (tau * u2).sin(),
    );
    let m = UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
    Rotation::from_matrix_unchecked(m)
}

fn sphere_point(u0: f64, u1: f64) -> Vec3 {
    let z = 1.0 - 2.0 * u0;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = std::f64::consts::TAU * u1;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn perpendicular_basis(r: &Vec3) -> (Vec3, Vec3) {
    let trial = if r.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let b1 = r.cross(&trial).normalize();
    let b2 = r.cross(&b1);
    (b1, b2)
}

pub(crate) fn spectral_norm(m: &Mat3) -> f64 {
    (m.transpose() * m).symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Smallest `q^T q_d` compatible with `psi <= psi_max`.
pub fn min_cos_for_psi(psi_max: f64) -> f64 {
    let x = 2.0 - psi_max;
    (x * x / 2.0 - 1.0).max(-1.0 + ANTIPODAL_SAMPLING_MARGIN)
}

#[derive(Clone, Copy, Default)]
struct Sup {
    a1: f64,
    a2: f64,
    b: f64,
    upsilon: f64,
    a_breve: f64,
    f_mis: f64,
}

impl Sup {
    fn merge(self, o: Sup) -> Sup {
        Sup {
            a1: self.a1.max(o.a1),
            a2: self.a2.max(o.a2),
            b: self.b.max(o.b),
            upsilon: self.upsilon.max(o.upsilon),
            a_breve: self.a_breve.max(o.a_breve),
            f_mis: self.f_mis.max(o.f_mis),
        }
    }
}

/// Sampled suprema of the perturbation terms over the envelope.
///
/// `(Q, Q_d)` are drawn from a scrambled Halton sequence restricted to
/// `psi <= psi_max`. For each attitude pair the terms are affine in
/// `(w_d, dw_d)` and affine in `|w|²` along a fixed direction, so their norms
/// are convex there and the supremum over the envelope box is attained at a
/// vertex: every vertex is evaluated. This makes the result nondecreasing in
/// `wd_max`, `wd_dot_max`, `w_max` and `f_max` for a fixed sample set.
pub fn estimate_bounds(
    model: &InertiaModel,
    gains: &Gains,
    envelope: &Envelope,
    geometry: &ErrorGeometry,
    samples: usize,
    seed: u64,
) -> BoundEstimates {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift = [0.0; 12];
    for s in shift.iter_mut() {
        *s = rng.random::<f64>();
    }
    let delta_j = model.delta_j();
    let r_body = *geometry.r_body().as_vec();
    let (b1, b2) = perpendicular_basis(&r_body);
    let cos_min = min_cos_for_psi(envelope.psi_max);
    let eta = gains.eta;

    let per_sample = |i: usize| -> Sup {
        let u = halton_point(i as u64, &shift);
        let att = uniform_rotation(u[0], u[1], u[2]);
        let cos_theta = 1.0 - u[3] * (1.0 - cos_min);
        let theta = cos_theta.clamp(-1.0, 1.0).acos();
        let beta = std::f64::consts::TAU * u[4];
        let tilt_axis = UnitVec3::new_unchecked(b1 * beta.cos() + b2 * beta.sin());
        let spin = exp_rodrigues(geometry.r_body(), std::f64::consts::TAU * u[5]);
        let rel = exp_rodrigues(&tilt_axis, theta).compose(&spin);
        let att_d = att.compose(&rel);

        let zero = Vec3::zeros();
        let err = match geometry.evaluate(
            &BodyState {
                attitude: att,
                omega: zero,
            },
            &ReferenceState {
                attitude: att_d,
                omega: zero,
                omega_dot: zero,
            },
        ) {
            Ok(e) => e,
            Err(_) => return Sup::default(),
        };
        let l = gains.lambda + err.psi;
        let r = rel.into_inner();
        let a1 = delta_j * (err.e_q * err.e_q.transpose() + err.e_mat * l);
        let a1_norm = spectral_norm(&a1);

        let dir_w = sphere_point(u[6], u[7]);
        let dir_wd = sphere_point(u[8], u[9]);
        let dir_wdd = sphere_point(u[10], u[11]);

        let mut sup = Sup {
            a1: a1_norm,
            ..Sup::default()
        };
        for w in [zero, dir_w * envelope.w_max] {
            let f_mis = model.drift_mismatch(&w).norm() + envelope.f_max;
            sup.f_mis = sup.f_mis.max(f_mis);
            let f_term = model.drift_mismatch(&w) * eta;
            for sd in [1.0, -1.0] {
                let wd = dir_wd * (sd * envelope.wd_max);
                let a2 = delta_j * hat(&(r * wd));
                let a_norm = spectral_norm(&(a1 - a2 * eta));
                sup.a2 = sup.a2.max(spectral_norm(&a2));
                for sdd in [1.0, -1.0] {
                    let wdd = dir_wdd * (sdd * envelope.wd_dot_max);
                    let b = delta_j * (err.xi * wd * l - r * wdd * eta) + f_term;
                    let b_norm = b.norm() + eta * envelope.f_max;
                    sup.b = sup.b.max(b_norm);
                    sup.upsilon = sup.upsilon.max(l * b_norm);
                    sup.a_breve = sup.a_breve.max(eta * b_norm + l * a_norm);
                }
            }
        }
        sup
    };

    let sup = (0..samples)
        .into_par_iter()
        .map(per_sample)
        .reduce(Sup::default, Sup::merge);

    let k = BOUND_SAFETY_FACTOR;
    BoundEstimates {
        a1_max: sup.a1 * k,
        a2_max: sup.a2 * k,
        b_max: sup.b * k,
        upsilon_max: sup.upsilon * k,
        a_breve_max: sup.a_breve * k,
        f_mismatch_max: sup.f_mis * k,
        samples,
        seed,
        safety_factor: k,
    }
}

/// The gain inequalities. The psi-dependent one is enforced at `psi_max`,
/// where `(Lambda + psi)² / psi²` is smallest.
pub fn validate_gains(gains: &Gains, lambda_j: f64, bounds: &BoundEstimates, psi_max: f64) -> Vec<Check> {
    let g3 = gains.gamma3();
    let sum = gains.gamma1 + gains.gamma2 + g3;
    let structure = Check {
        id: "1e".into(),
        description: "gamma = gamma1 + gamma2 + gamma3, gamma3 = gamma4 + gamma5, all positive".into(),
        lhs: gains.gamma(),
        rhs: Some(sum),
        margin: Some(0.0),
        pass: gains.gamma() == sum && gains.validate().is_ok(),
    };
    let l = gains.lambda + psi_max;
    let psi_cond = Check::less_than(
        "1f",
        "gamma3 < gamma4 (Lambda + psi_max)^2 / psi_max^2",
        g3,
        Some(gains.gamma4 * l * l / (psi_max * psi_max)),
    );
    let g5 = Check::greater_than(
        "1g",
        "gamma5 > A2_max / lambda_J",
        gains.gamma5,
        Some(bounds.a2_max / lambda_j),
    );
    let g5_margin = gains.gamma5 * lambda_j - bounds.a2_max;
    let eta = Check::greater_than(
        "1h",
        "eta > A1_max / (gamma5 lambda_J - A2_max)",
        gains.eta,
        (g5_margin > 0.0).then(|| bounds.a1_max / g5_margin),
    );
    vec![structure, psi_cond, g5, eta]
}

/// Thresholds, envelope radius and perfect-knowledge decay rate.
pub fn thresholds_and_radius(
    gains: &Gains,
    lambda_j: f64,
    bounds: &BoundEstimates,
    psi_max: f64,
) -> Result<Thresholds> {
    let eigs = w_eigen_summary(gains, lambda_j, psi_max);
    let lambda_max_w2 = eigs[1].lambda_max;
    let lambda_min_w3 = eigs[2].lambda_min;
    let lambda_min_w5 = eigs[4].lambda_min;
    let eta = gains.eta;
    let denominator = (gains.gamma5 * lambda_j - bounds.a2_max) * eta * eta - eta * bounds.a1_max;
    if !(denominator > 0.0) {
        return Err(Error::NotCertifiable(format!(
            "(gamma5 lambda_J - A2_max) eta^2 - eta A1_max = {denominator:e} is not positive"
        )));
    }
    if !(lambda_min_w3 > 0.0) {
        return Err(Error::NotCertifiable(format!(
            "lambda_min(W3) = {lambda_min_w3:e} is not positive"
        )));
    }
    let radius = (bounds.upsilon_max / lambda_min_w3).sqrt();
    Ok(Thresholds {
        e_w_threshold: bounds.a_breve_max / denominator,
        z_q_threshold: radius,
        radius,
        decay_rate: lambda_min_w5 / lambda_max_w2,
        denominator,
        lambda_min_w3,
        lambda_min_w5,
        lambda_max_w2,
    })
}

/// The two conditions that place the ultimate set inside `|z_q| < 1`.
///
/// With zero perturbation both sides of the second condition vanish; that
/// case is accepted, since the `e_w` threshold then coincides with the radius.
pub fn check_set_containment(bounds: &BoundEstimates, thresholds: &Thresholds) -> Vec<Check> {
    let first = Check::less_than(
        "8a",
        "Upsilon_max < lambda_min(W3)",
        bounds.upsilon_max,
        Some(thresholds.lambda_min_w3),
    );
    let rhs = thresholds.denominator * thresholds.radius;
    let mut second = Check::less_than(
        "8b",
        "A_breve_max < ((gamma5 lambda_J - A2_max) eta^2 - eta A1_max) sqrt(Upsilon_max / lambda_min(W3))",
        bounds.a_breve_max,
        Some(rhs),
    );
    if bounds.a_breve_max == 0.0 && rhs == 0.0 {
        second.pass = true;
    }
    vec![first, second]
}

/// Full certificate for a model, gain set and envelope.
pub fn certify(
    model: &InertiaModel,
    gains: &Gains,
    envelope: &Envelope,
    geometry: &ErrorGeometry,
    samples: usize,
    seed: u64,
) -> Result<CertificationReport> {
    envelope.validate()?;
    gains.validate()?;
    let lj = lambda_j(model)?;
    let bounds = estimate_bounds(model, gains, envelope, geometry, samples, seed);
    let gain_checks = validate_gains(gains, lj, &bounds, envelope.psi_max);
    let w_eigs = w_eigen_summary(gains, lj, envelope.psi_max);
    let mut failures: Vec<String> = gain_checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("({}) {}", c.id, c.description))
        .collect();

    let decay_rate = w_eigs[4].lambda_min / w_eigs[1].lambda_max;
    let (thresholds, set_conditions) = match thresholds_and_radius(gains, lj, &bounds, envelope.psi_max) {
        Ok(t) => {
            let sets = check_set_containment(&bounds, &t);
            (Some(t), sets)
        }
        Err(e) => {
            failures.push(e.to_string());
            (None, Vec::new())
        }
    };
    failures.extend(
        set_conditions
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("({}) {}", c.id, c.description)),
    );
    if samples < MIN_CERT_SAMPLES && !model.is_perfect() {
        failures.push(format!(
            "bound sampling used {samples} samples, certification requires at least {MIN_CERT_SAMPLES}"
        ));
    }
    let certified = failures.is_empty() && thresholds.is_some();
    Ok(CertificationReport {
        lambda_j: lj,
        kappa: gains.kappa(lj),
        gains: *gains,
        envelope: *envelope,
        bounds,
        gain_checks,
        w_eigs,
        e_w_threshold: thresholds.map(|t| t.e_w_threshold),
        z_q_threshold: thresholds.map(|t| t.z_q_threshold),
        radius: thresholds.map(|t| t.radius),
        decay_rate,
        set_conditions,
        perfect_knowledge: model.is_perfect(),
        certified,
        failures,
        psi_grid_points: PSI_GRID_POINTS,
        seed,
    })
}
