//! Scenario files: TOML tables (or the equivalent JSON object), parsed into
//! raw serde structs and then validated into module types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::certification::{Envelope, MIN_CERT_SAMPLES};
use crate::control::{Gains, InertiaModel, RigidBodyParams};
use crate::error::{Error, Result};
use crate::error_geometry::ErrorGeometry;
use crate::geom::{exp_rodrigues, Mat3, UnitVec3, Vec3};
use crate::sim::{HoldMode, ReferenceGenerator, ReferenceProfile, Scenario, DEFAULT_DT};

pub const DEFAULT_DURATION: f64 = 10.0;
pub const DEFAULT_CERT_SAMPLES: usize = 20_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    plant: RawPlant,
    #[serde(default)]
    estimate: RawEstimate,
    gains: Gains,
    envelope: Envelope,
    reference: RawReference,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    integration: RawIntegration,
    #[serde(default)]
    certification: RawCertification,
    #[serde(default)]
    output: OutputPaths,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    /// `[Jxx, Jyy, Jzz, Jxy, Jxz, Jyz]`, kg m².
    #[serde(rename = "J")]
    j: [f64; 6],
    #[serde(default)]
    damping: f64,
    #[serde(default)]
    tau: [f64; 3],
    #[serde(default = "e3")]
    r_body: [f64; 3],
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimate {
    #[serde(rename = "J_hat")]
    j_hat: Option<[f64; 6]>,
    tau_hat: Option<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    profile: ReferenceProfile,
    #[serde(default = "e1")]
    axis: [f64; 3],
    /// `Q_d(0) = exp(initial_angle hat(initial_axis))`.
    #[serde(default = "e1")]
    initial_axis: [f64; 3],
    #[serde(default)]
    initial_angle: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(default = "e1")]
    axis: [f64; 3],
    /// Radians.
    #[serde(default)]
    angle: f64,
    omega: Option<[f64; 3]>,
}

impl Default for RawInitial {
    fn default() -> Self {
        RawInitial {
            axis: e1(),
            angle: 0.0,
            omega: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegration {
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_duration")]
    duration: f64,
    #[serde(default)]
    hold: HoldMode,
}

impl Default for RawIntegration {
    fn default() -> Self {
        RawIntegration {
            dt: DEFAULT_DT,
            duration: DEFAULT_DURATION,
            hold: HoldMode::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertification {
    #[serde(default = "default_samples")]
    samples: usize,
}

impl Default for RawCertification {
    fn default() -> Self {
        RawCertification {
            samples: DEFAULT_CERT_SAMPLES,
        }
    }
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default = "default_csv")]
    pub trajectory: PathBuf,
    #[serde(default = "default_summary")]
    pub summary: PathBuf,
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            trajectory: default_csv(),
            summary: default_summary(),
            report: default_report(),
        }
    }
}

fn e1() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}
fn e3() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_duration() -> f64 {
    DEFAULT_DURATION
}
fn default_samples() -> usize {
    DEFAULT_CERT_SAMPLES
}
fn default_csv() -> PathBuf {
    "trajectory.csv".into()
}
fn default_summary() -> PathBuf {
    "summary.json".into()
}
fn default_report() -> PathBuf {
    "certificate.json".into()
}

/// A fully validated scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub model: InertiaModel,
    pub gains: Gains,
    pub envelope: Envelope,
    pub geometry: ErrorGeometry,
    pub reference: ReferenceGenerator,
    pub initial_axis: UnitVec3,
    pub initial_angle: f64,
    pub initial_omega: Option<Vec3>,
    pub dt: f64,
    pub duration: f64,
    pub hold: HoldMode,
    pub cert_samples: usize,
    pub output: OutputPaths,
}

impl ScenarioConfig {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            model: self.model,
            gains: self.gains,
            geometry: self.geometry,
            reference: self.reference,
            initial_axis: self.initial_axis,
            initial_angle: self.initial_angle,
            initial_omega: self.initial_omega,
            dt: self.dt,
            duration: self.duration,
            hold: self.hold,
        }
    }

    /// Replaces the integration step and/or duration and revalidates.
    pub fn with_overrides(mut self, dt: Option<f64>, duration: Option<f64>) -> Result<Self> {
        if let Some(dt) = dt {
            self.dt = dt;
        }
        if let Some(d) = duration {
            self.duration = d;
        }
        self.scenario().validate()?;
        Ok(self)
    }
}

/// Parses a scenario from TOML, or from JSON when the first non-blank
/// character is `{`.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let raw: RawConfig = if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    } else {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |span| line_column(text, span.start));
            Error::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?
    };
    validate(raw)
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

fn finite_all(field: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation(field, "all entries must be finite"))
    }
}

fn vec3(field: &str, v: [f64; 3]) -> Result<Vec3> {
    finite_all(field, &v)?;
    Ok(Vec3::from(v))
}

fn direction(field: &str, v: [f64; 3]) -> Result<UnitVec3> {
    UnitVec3::normalize(vec3(field, v)?).map_err(|_| Error::validation(field, "must be a nonzero direction"))
}

fn inertia(field: &str, e: [f64; 6]) -> Result<Mat3> {
    finite_all(field, &e)?;
    let [xx, yy, zz, xy, xz, yz] = e;
    let j = Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz);
    RigidBodyParams::new(j, 0.0, Vec3::zeros())
        .map_err(|err| Error::validation(field, format!("must be symmetric positive definite ({err})")))?;
    Ok(j)
}

fn validate(raw: RawConfig) -> Result<ScenarioConfig> {
    let j = inertia("plant.J", raw.plant.j)?;
    let j_hat = match raw.estimate.j_hat {
        Some(e) => inertia("estimate.J_hat", e)?,
        None => j,
    };
    if !(raw.plant.damping.is_finite() && raw.plant.damping >= 0.0) {
        return Err(Error::validation("plant.damping", "must be finite and nonnegative"));
    }
    let tau = vec3("plant.tau", raw.plant.tau)?;
    let tau_hat = match raw.estimate.tau_hat {
        Some(t) => vec3("estimate.tau_hat", t)?,
        None => tau,
    };
    let model = InertiaModel::new(j, j_hat, raw.plant.damping, tau, tau_hat)?;
    let geometry = ErrorGeometry::new(direction("plant.r_body", raw.plant.r_body)?);

    raw.gains.validate()?;
    raw.envelope.validate()?;

    let r = raw.reference;
    r.profile
        .validate()
        .map_err(|_| Error::validation("reference.profile", "parameters must be finite and well formed"))?;
    if !r.initial_angle.is_finite() {
        return Err(Error::validation("reference.initial_angle", "must be finite"));
    }
    let reference = ReferenceGenerator {
        profile: r.profile,
        axis: direction("reference.axis", r.axis)?,
        initial_attitude: exp_rodrigues(&direction("reference.initial_axis", r.initial_axis)?, r.initial_angle),
    };
    reference.check_envelope(&raw.envelope)?;

    if !raw.initial.angle.is_finite() {
        return Err(Error::validation("initial.angle", "must be finite"));
    }
    let initial_omega = raw.initial.omega.map(|w| vec3("initial.omega", w)).transpose()?;

    if raw.certification.samples < MIN_CERT_SAMPLES {
        return Err(Error::validation(
            "certification.samples",
            format!("must be at least {MIN_CERT_SAMPLES}"),
        ));
    }

    let cfg = ScenarioConfig {
        model,
        gains: raw.gains,
        envelope: raw.envelope,
        geometry,
        reference,
        initial_axis: direction("initial.axis", raw.initial.axis)?,
        initial_angle: raw.initial.angle,
        initial_omega,
        dt: raw.integration.dt,
        duration: raw.integration.duration,
        hold: raw.integration.hold,
        cert_samples: raw.certification.samples,
        output: raw.output,
    };
    cfg.scenario().validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[plant]
J = [0.02, 0.02, 0.04, 0.0, 0.0, 0.0]

[gains]
lambda = 2.0
eta = 1.0
gamma1 = 1.0
gamma2 = 2.0
gamma4 = 2.0
gamma5 = 1.0

[envelope]
wd_max = 0.5
wd_dot_max = 0.7
w_max = 3.0

[reference.profile]
kind = "sinusoid"
amplitude = 0.5
frequency = 0.2
"#;

    #[test]
    fn minimal_applies_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.duration, DEFAULT_DURATION);
        assert_eq!(*cfg.geometry.r_body(), UnitVec3::e3());
        assert_eq!(cfg.hold, HoldMode::PerStage);
        assert!(cfg.model.is_perfect());
        assert_eq!(cfg.envelope.psi_max, 2.0);
        assert_eq!(cfg.envelope.f_max, 0.0);
        assert_eq!(cfg.initial_omega, None);
        assert_eq!(cfg.output, OutputPaths::default());
    }

    #[test]
    fn negative_eigenvalue_names_field() {
        let text = MINIMAL.replace("J = [0.02, 0.02, 0.04", "J = [0.02, -0.02, 0.04");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "plant.J"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[estimate]\nJ_hat = [1.0, 1.0, 1.0, 2.0, 0.0, 0.0]\n");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "estimate.J_hat"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_gamma5_is_parse_error() {
        let text = MINIMAL.replace("gamma5 = 1.0\n", "");
        match parse_config(&text) {
            Err(Error::Parse { line, message, .. }) => {
                assert!(message.contains("gamma5"), "{message}");
                assert!(line > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn derived_gains_rejected() {
        let text = MINIMAL.replace("gamma5 = 1.0\n", "gamma5 = 1.0\ngamma3 = 3.0\n");
        assert!(matches!(parse_config(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn syntax_error_position() {
        let text = "[plant]\nJ = [0.02, 0.02\n";
        match parse_config(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reference_outside_envelope() {
        let text = MINIMAL.replace("amplitude = 0.5", "amplitude = 0.8");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "reference"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_equivalent() {
        let json = r#"{
            "plant": {"J": [0.02, 0.02, 0.04, 0.0, 0.0, 0.0]},
            "gains": {"lambda": 2.0, "eta": 1.0, "gamma1": 1.0, "gamma2": 2.0, "gamma4": 2.0, "gamma5": 1.0},
            "envelope": {"wd_max": 0.5, "wd_dot_max": 0.7, "w_max": 3.0},
            "reference": {"profile": {"kind": "sinusoid", "amplitude": 0.5, "frequency": 0.2}}
        }"#;
        assert_eq!(parse_config(json).unwrap(), parse_config(MINIMAL).unwrap());
        match parse_config("{\n  \"plant\": 3\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_revalidate() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.clone().with_overrides(Some(5e-4), Some(2.0)).unwrap().dt, 5e-4);
        assert!(cfg.with_overrides(Some(0.05), None).is_err());
    }
}
