//! Body configurations: the point `q = (R₁, Z₁, …, R_k, Z_k)` of the
//! configuration space together with the fixed volumes and circulations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::HalfPlanePoint;
use crate::regime::RegimeKind;

/// One toroidal body, described by its cross-section centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub volume: f64,
    pub gamma: f64,
    pub center: HalfPlanePoint,
}

impl Body {
    pub fn new(volume: f64, gamma: f64, r: f64, z: f64) -> Self {
        Self { volume, gamma, center: HalfPlanePoint { r, z } }
    }

    /// Cross-section radius `ρ = √(v/(πR))`.
    pub fn radius(&self) -> f64 {
        (self.volume / (PI * self.center.r)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyConfiguration {
    pub bodies: Vec<Body>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub regime: Option<RegimeKind>,
}

impl BodyConfiguration {
    pub fn new(bodies: Vec<Body>) -> Result<Self> {
        let c = Self { bodies, epsilon: None, regime: None };
        c.validate()?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.bodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bodies.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bodies.is_empty() {
            return Err(Error::Configuration("configuration has no bodies".into()));
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if !(b.volume > 0.0) || !b.volume.is_finite() {
                return Err(Error::Configuration(format!("body {i}: volume must be positive")));
            }
            if !(b.center.r > 0.0) || !b.center.r.is_finite() || !b.center.z.is_finite() {
                return Err(Error::Configuration(format!("body {i}: centre must satisfy R > 0")));
            }
            if !b.gamma.is_finite() {
                return Err(Error::Configuration(format!("body {i}: circulation must be finite")));
            }
            let rho = b.radius();
            if b.center.r - rho <= 0.0 {
                return Err(Error::Configuration(format!(
                    "body {i}: disk of radius {rho:.4e} at R = {:.4e} touches the axis",
                    b.center.r
                )));
            }
        }
        for i in 0..self.bodies.len() {
            for j in i + 1..self.bodies.len() {
                let d = self.bodies[i].center.dist(&self.bodies[j].center);
                let sum = self.bodies[i].radius() + self.bodies[j].radius();
                if d <= sum {
                    return Err(Error::Configuration(format!(
                        "bodies {i} and {j} overlap (distance {d:.4e}, radii sum {sum:.4e})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        self.bodies.iter().map(Body::radius).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.bodies.iter().map(|b| b.gamma).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.bodies.iter().map(|b| b.volume).collect()
    }

    /// Positions flattened as `(R₁, Z₁, R₂, Z₂, …)`.
    pub fn positions(&self) -> Vec<f64> {
        self.bodies.iter().flat_map(|b| [b.center.r, b.center.z]).collect()
    }

    /// Same bodies moved to `q`; volumes are kept, so radii follow `R`.
    pub fn with_positions(&self, q: &[f64]) -> Result<Self> {
        if q.len() != 2 * self.bodies.len() {
            return Err(Error::Parameter(format!(
                "position vector has length {}, expected {}",
                q.len(),
                2 * self.bodies.len()
            )));
        }
        let mut out = self.clone();
        for (b, c) in out.bodies.iter_mut().zip(q.chunks(2)) {
            b.center = HalfPlanePoint { r: c[0], z: c[1] };
        }
        out.validate()?;
        Ok(out)
    }

    pub fn with_gammas(&self, gamma: &[f64]) -> Self {
        let mut out = self.clone();
        for (b, &g) in out.bodies.iter_mut().zip(gamma) {
            b.gamma = g;
        }
        out
    }

    pub fn translated_z(&self, dz: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bodies {
            b.center.z += dz;
        }
        out
    }

    /// Smallest clearance: pairwise disk gaps and distances to the axis.
    pub fn min_gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for (i, a) in self.bodies.iter().enumerate() {
            g = g.min(a.center.r - a.radius());
            for b in &self.bodies[i + 1..] {
                g = g.min(a.center.dist(&b.center) - a.radius() - b.radius());
            }
        }
        g
    }

    /// Smallest pairwise disk gap (infinite for a single body).
    pub fn min_pair_gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for (i, a) in self.bodies.iter().enumerate() {
            for b in &self.bodies[i + 1..] {
                g = g.min(a.center.dist(&b.center) - a.radius() - b.radius());
            }
        }
        g
    }

    pub fn min_radius(&self) -> f64 {
        self.radii().into_iter().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_from_volume() {
        let b = Body::new(PI / 4.0, 1.0, 1.0, 0.0);
        assert!((b.radius() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn axis_contact_rejected() {
        assert!(BodyConfiguration::new(vec![Body::new(PI, 1.0, 1.0, 0.0)]).is_err());
        assert!(BodyConfiguration::new(vec![Body::new(PI / 4.0, 1.0, 1.0, 0.0)]).is_ok());
    }

    #[test]
    fn overlap_rejected() {
        let v = PI * 0.01;
        let c = BodyConfiguration::new(vec![Body::new(v, 1.0, 1.0, 0.0), Body::new(v, 1.0, 1.0, 0.15)]);
        assert!(matches!(c, Err(Error::Configuration(_))));
    }

    #[test]
    fn positions_round_trip() {
        let v = PI * 1e-4;
        let c = BodyConfiguration::new(vec![Body::new(v, 1.0, 1.0, 0.0), Body::new(v, 2.0, 1.2, 0.3)]).unwrap();
        let q = c.positions();
        assert_eq!(q, vec![1.0, 0.0, 1.2, 0.3]);
        let d = c.with_positions(&[1.1, 0.0, 1.2, 0.5]).unwrap();
        assert!((d.bodies[0].radius() - (v / (PI * 1.1)).sqrt()).abs() < 1e-15);
        assert!(c.with_positions(&[1.0]).is_err());
    }
}
