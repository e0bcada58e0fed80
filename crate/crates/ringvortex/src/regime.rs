//! Scaling regimes linking body positions `q` to rescaled positions `q̃`.
//!
//! With `L = |log ε|`:
//! * `regime_sqrtlog`: `q = q₀ + q̃/√L`, `s = L·t`;
//! * `regime_log`:     `q = q₀ + q̃/L`,  `s = L²·t`.
//!
//! Volumes scale as `v = ε²·ṽ`, so radii are `O(ε)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bodies::{Body, BodyConfiguration};
use crate::error::{Error, Result};
use crate::pointvortex::PvSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeKind {
    #[serde(rename = "regime_sqrtlog")]
    SqrtLog,
    #[serde(rename = "regime_log")]
    Log,
}

impl RegimeKind {
    /// The point-vortex field this regime converges to.
    pub fn limit_system(self) -> PvSystem {
        match self {
            RegimeKind::SqrtLog => PvSystem::J2,
            RegimeKind::Log => PvSystem::J1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::SqrtLog => "regime_sqrtlog",
            RegimeKind::Log => "regime_log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeSpec {
    pub kind: RegimeKind,
    pub epsilon: f64,
    pub r0: f64,
    pub z0: f64,
}

impl RegimeSpec {
    pub fn new(kind: RegimeKind, epsilon: f64, r0: f64, z0: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Parameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(r0 > 0.0) {
            return Err(Error::Parameter(format!("R0 must be positive, got {r0}")));
        }
        Ok(Self { kind, epsilon, r0, z0 })
    }

    /// `L = |log ε|`.
    pub fn log_factor(&self) -> f64 {
        self.epsilon.ln().abs()
    }

    /// Factor `c` with `q − q₀ = c·q̃`.
    pub fn position_scale(&self) -> f64 {
        match self.kind {
            RegimeKind::SqrtLog => 1.0 / self.log_factor().sqrt(),
            RegimeKind::Log => 1.0 / self.log_factor(),
        }
    }

    /// Factor `c` with `s = c·t`.
    pub fn time_scale(&self) -> f64 {
        match self.kind {
            RegimeKind::SqrtLog => self.log_factor(),
            RegimeKind::Log => self.log_factor().powi(2),
        }
    }

    /// `q̇ = velocity_scale · q̃'`.
    pub fn velocity_scale(&self) -> f64 {
        self.position_scale() * self.time_scale()
    }

    /// Rescaled drift `(√L/(4πR₀))·(e_Z, …, e_Z)` subtracted in the
    /// square-root regime; zero in the logarithmic regime.
    pub fn drift(&self, k: usize) -> Vec<f64> {
        let mut d = vec![0.0; 2 * k];
        if self.kind == RegimeKind::SqrtLog {
            let c = self.log_factor().sqrt() / (4.0 * PI * self.r0);
            for i in 0..k {
                d[2 * i + 1] = c;
            }
        }
        d
    }

    /// Maps rescaled data to a physical configuration and velocity.
    pub fn lift(
        &self,
        scaled_volumes: &[f64],
        gammas: &[f64],
        qtilde: &[f64],
        qtilde_dot: &[f64],
    ) -> Result<(BodyConfiguration, Vec<f64>)> {
        let k = scaled_volumes.len();
        if gammas.len() != k || qtilde.len() != 2 * k || qtilde_dot.len() != 2 * k {
            return Err(Error::Parameter("lift: inconsistent vector lengths".into()));
        }
        if self.kind == RegimeKind::SqrtLog && gammas.iter().any(|&g| g != 1.0) {
            return Err(Error::Configuration("regime_sqrtlog requires every circulation to equal 1".into()));
        }
        let c = self.position_scale();
        let e2 = self.epsilon * self.epsilon;
        let bodies = (0..k)
            .map(|i| {
                Body::new(
                    e2 * scaled_volumes[i],
                    gammas[i],
                    self.r0 + c * qtilde[2 * i],
                    self.z0 + c * qtilde[2 * i + 1],
                )
            })
            .collect();
        let mut config = BodyConfiguration { bodies, epsilon: Some(self.epsilon), regime: Some(self.kind) };
        config.validate().map_err(|e| Error::Configuration(format!("inadmissible lift: {e}")))?;
        config.epsilon = Some(self.epsilon);
        let vs = self.velocity_scale();
        Ok((config, qtilde_dot.iter().map(|v| vs * v).collect()))
    }

    pub fn project_positions(&self, q: &[f64]) -> Vec<f64> {
        let c = self.position_scale();
        q.iter().enumerate().map(|(a, &x)| (x - if a % 2 == 0 { self.r0 } else { self.z0 }) / c).collect()
    }

    /// Inverse of [`lift`](Self::lift) on positions and velocities.
    pub fn project(&self, config: &BodyConfiguration, qdot: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let vs = self.velocity_scale();
        (self.project_positions(&config.positions()), qdot.iter().map(|v| v / vs).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        for kind in [RegimeKind::Log, RegimeKind::SqrtLog] {
            let spec = RegimeSpec::new(kind, 1e-3, 1.0, 0.5).unwrap();
            let qt = [0.3, -0.2, -0.4, 0.7];
            let qd = [0.1, 0.2, -0.3, 0.05];
            let (cfg, v) = spec.lift(&[PI, PI], &[1.0, 1.0], &qt, &qd).unwrap();
            let (q2, d2) = spec.project(&cfg, &v);
            for a in 0..4 {
                assert!((q2[a] - qt[a]).abs() < 1e-12);
                assert!((d2[a] - qd[a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_regime_gaps() {
        let spec = RegimeSpec::new(RegimeKind::Log, 1e-3, 1.0, 0.0).unwrap();
        let (cfg, _) = spec.lift(&[PI, PI], &[1.0, 2.0], &[0.0, 0.0, 0.0, 1.0], &[0.0; 4]).unwrap();
        let d = cfg.bodies[0].center.dist(&cfg.bodies[1].center);
        assert!((d - 1.0 / spec.log_factor()).abs() < 1e-14);
    }

    #[test]
    fn drift_magnitude() {
        let spec = RegimeSpec::new(RegimeKind::SqrtLog, 1e-2, 2.0, 0.0).unwrap();
        let d = spec.drift(2);
        let expect = spec.log_factor().sqrt() / (8.0 * PI);
        assert!((d[1] - expect).abs() < 1e-15 && (d[3] - expect).abs() < 1e-15);
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn sqrtlog_requires_unit_gamma() {
        let spec = RegimeSpec::new(RegimeKind::SqrtLog, 1e-2, 1.0, 0.0).unwrap();
        assert!(spec.lift(&[PI], &[2.0], &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }
}
