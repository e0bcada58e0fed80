//! JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorControls;
use crate::error::{Error, Result};
use crate::regime::{RegimeKind, RegimeSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    /// Scaled volume `ṽ`; the physical volume is `ε²ṽ`.
    pub volume: f64,
    pub gamma: f64,
    pub qtilde0: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qtilde_dot0: Option<[f64; 2]>,
}

/// How the initial body velocity is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialVelocity {
    /// `q̇₀ = −A⁻¹G`, which suppresses the fast gyroscopic oscillation.
    #[default]
    SlowManifold,
    /// Rescaled velocity of the limiting point-vortex field (minus the drift
    /// in the square-root regime).
    PointVortex,
    /// `qtilde_dot0` of every body.
    Given,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

fn default_r0() -> f64 {
    1.0
}

fn default_nodes() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub bodies: Vec<BodySpec>,
    #[serde(rename = "R0", default = "default_r0")]
    pub r0: f64,
    #[serde(rename = "Z0", default)]
    pub z0: f64,
    pub regime: RegimeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_list: Option<Vec<f64>>,
    /// Horizon in rescaled time.
    pub horizon: f64,
    #[serde(default)]
    pub initial_velocity: InitialVelocity,
    #[serde(default)]
    pub integrator: IntegratorControls,
    #[serde(default = "IntegratorControls::point_vortex")]
    pub pv_integrator: IntegratorControls,
    #[serde(default = "default_nodes")]
    pub node_count: usize,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), message: message.into() }
}

impl RunConfig {
    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(if path.is_empty() { "$".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn scaled_volumes(&self) -> Vec<f64> {
        self.bodies.iter().map(|b| b.volume).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.bodies.iter().map(|b| b.gamma).collect()
    }

    pub fn qtilde0(&self) -> Vec<f64> {
        self.bodies.iter().flat_map(|b| b.qtilde0).collect()
    }

    /// `qtilde_dot0`, zero where absent.
    pub fn qtilde_dot0(&self) -> Vec<f64> {
        self.bodies.iter().flat_map(|b| b.qtilde_dot0.unwrap_or([0.0, 0.0])).collect()
    }

    /// Controls for body integration with the configured node count.
    pub fn body_controls(&self) -> IntegratorControls {
        IntegratorControls { nodes: self.node_count, ..self.integrator }
    }

    /// `epsilon_list` if present, otherwise `[epsilon]`, otherwise empty.
    pub fn epsilons(&self) -> Vec<f64> {
        match (&self.epsilon_list, self.epsilon) {
            (Some(l), _) => l.clone(),
            (None, Some(e)) => vec![e],
            (None, None) => vec![],
        }
    }

    /// The single `ε` used by `simulate` and `coeffs`.
    pub fn primary_epsilon(&self) -> Result<f64> {
        self.epsilon
            .or_else(|| self.epsilon_list.as_ref().and_then(|l| l.first().copied()))
            .ok_or_else(|| schema("epsilon", "an epsilon is required for this command"))
    }

    pub fn regime_spec(&self, epsilon: f64) -> Result<RegimeSpec> {
        RegimeSpec::new(self.regime, epsilon, self.r0, self.z0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(schema(
                "schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.bodies.is_empty() {
            return Err(schema("bodies", "at least one body is required"));
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if !(b.volume > 0.0 && b.volume.is_finite()) {
                return Err(schema(format!("bodies[{i}].volume"), "volume must be positive and finite"));
            }
            if !b.gamma.is_finite() || b.gamma == 0.0 {
                return Err(schema(format!("bodies[{i}].gamma"), "circulation must be finite and nonzero"));
            }
            if self.regime == RegimeKind::SqrtLog && b.gamma != 1.0 {
                return Err(schema(
                    format!("bodies[{i}].gamma"),
                    "regime_sqrtlog requires every circulation to equal 1",
                ));
            }
            if b.qtilde0.iter().any(|v| !v.is_finite()) {
                return Err(schema(format!("bodies[{i}].qtilde0"), "position must be finite"));
            }
            if self.initial_velocity == InitialVelocity::Given && b.qtilde_dot0.is_none() {
                return Err(schema(format!("bodies[{i}].qtilde_dot0"), "required when initial_velocity is \"given\""));
            }
            for (j, c) in self.bodies[..i].iter().enumerate() {
                if b.qtilde0 == c.qtilde0 {
                    return Err(schema(
                        format!("bodies[{i}].qtilde0"),
                        format!("coincides with bodies[{j}]; bodies overlap"),
                    ));
                }
            }
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(schema("R0", "R0 must be positive"));
        }
        if !self.z0.is_finite() {
            return Err(schema("Z0", "Z0 must be finite"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(schema("horizon", "horizon must be positive"));
        }
        if self.node_count < 16 || self.node_count % 2 != 0 {
            return Err(schema("node_count", "node count must be even and at least 16"));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e < 1.0) {
                return Err(schema("epsilon", "epsilon must lie in (0, 1)"));
            }
            self.check_lift(e).map_err(|m| schema("bodies", m))?;
        }
        if let Some(list) = &self.epsilon_list {
            for (i, e) in list.iter().enumerate() {
                if !(*e > 0.0 && *e < 1.0) {
                    return Err(schema(format!("epsilon_list[{i}]"), "epsilon must lie in (0, 1)"));
                }
                if i > 0 && !(*e < list[i - 1]) {
                    return Err(schema(format!("epsilon_list[{i}]"), "epsilon_list must be strictly decreasing"));
                }
            }
        }
        for (name, c) in [("integrator", &self.integrator), ("pv_integrator", &self.pv_integrator)] {
            if !(c.rtol > 0.0 && c.atol >= 0.0 && c.cap > 0.0 && c.outputs > 0 && c.fd_scale > 0.0) {
                return Err(schema(name, "tolerances, cap, outputs and fd_scale must be positive"));
            }
        }
        Ok(())
    }

    fn check_lift(&self, epsilon: f64) -> std::result::Result<(), String> {
        let spec = self.regime_spec(epsilon).map_err(|e| e.to_string())?;
        spec.lift(&self.scaled_volumes(), &self.gammas(), &self.qtilde0(), &self.qtilde_dot0())
            .map(|_| ())
            .map_err(|e| format!("inadmissible at epsilon = {epsilon}: {e}"))
    }

    /// Two equal rings in the logarithmic regime, offset nearly coaxially.
    pub fn leapfrog() -> Self {
        let (d, angle) = (0.5f64, -0.2f64);
        let (s, c) = angle.sin_cos();
        let body = |sign: f64| BodySpec {
            volume: std::f64::consts::PI,
            gamma: 1.0,
            qtilde0: [sign * 0.5 * d * s, sign * 0.5 * d * c],
            qtilde_dot0: None,
        };
        Self {
            schema_version: SCHEMA_VERSION,
            bodies: vec![body(1.0), body(-1.0)],
            r0: 1.0,
            z0: 0.0,
            regime: RegimeKind::Log,
            epsilon: None,
            epsilon_list: Some(vec![3e-2, 1e-2, 3e-3, 1e-3]),
            horizon: 2.0,
            initial_velocity: InitialVelocity::SlowManifold,
            integrator: IntegratorControls::default(),
            pv_integrator: IntegratorControls::point_vortex(),
            node_count: 16,
            outputs: OutputSpec::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::from_str(&RunConfig::leapfrog().to_json()).unwrap()
    }

    fn path_of(v: serde_json::Value) -> String {
        match RunConfig::from_json(&v.to_string()) {
            Err(Error::Schema { path, .. }) => path,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn leapfrog_round_trips() {
        let c = RunConfig::leapfrog();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let text = r#"{"schema_version": 1, "regime": "regime_log", "horizon": 1.0,
            "bodies": [{"volume": 3.14, "gamma": 1.0, "qtilde0": [0.0, 0.0]}]}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.r0, 1.0);
        assert_eq!(c.node_count, 16);
        assert_eq!(c.initial_velocity, InitialVelocity::SlowManifold);
        assert!(c.epsilons().is_empty());
    }

    #[test]
    fn type_errors_carry_paths() {
        let mut v = base();
        v["bodies"][1]["gamma"] = "one".into();
        assert_eq!(path_of(v), "bodies[1].gamma");
        let mut v = base();
        v["integrator"]["rtoll"] = 1.0.into();
        assert!(path_of(v).starts_with("integrator"));
    }

    #[test]
    fn condition_violations_rejected() {
        let mut v = base();
        v["bodies"][0]["gamma"] = 0.0.into();
        assert_eq!(path_of(v), "bodies[0].gamma");
        let mut v = base();
        v["regime"] = "regime_sqrtlog".into();
        v["bodies"][1]["gamma"] = 2.0.into();
        assert_eq!(path_of(v), "bodies[1].gamma");
        let mut v = base();
        v["bodies"][1]["qtilde0"] = v["bodies"][0]["qtilde0"].clone();
        assert_eq!(path_of(v), "bodies[1].qtilde0");
        let mut v = base();
        v["epsilon"] = 0.3.into();
        v["bodies"][1]["volume"] = 100.0.into();
        assert_eq!(path_of(v), "bodies");
        let mut v = base();
        v["epsilon_list"] = serde_json::json!([1e-2, 3e-2]);
        assert_eq!(path_of(v), "epsilon_list[1]");
        let mut v = base();
        v["schema_version"] = 2.into();
        assert_eq!(path_of(v), "schema_version");
    }
}
