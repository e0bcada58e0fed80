//! Limiting point-vortex fields `J¹` and `J²` in rescaled coordinates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `J1`: interaction plus constant self-drift `−γ_i/(4πR₀)·e_Z`
/// (limit of the logarithmic regime).
/// `J2`: interaction plus `q̃_{R_i}γ_i/(4πR₀²)·e_Z`
/// (limit of the square-root regime after drift subtraction).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PvSystem {
    J1,
    J2,
}

fn check(gamma: &[f64], qt: &[f64], r0: f64) -> Result<()> {
    if qt.len() != 2 * gamma.len() {
        return Err(Error::Parameter("point-vortex state length must be 2k".into()));
    }
    if !(r0 > 0.0) {
        return Err(Error::Parameter("R0 must be positive".into()));
    }
    Ok(())
}

/// Velocity field `J(q̃)` with `⊥(a, b) = (−b, a)`.
pub fn pv_velocity(system: PvSystem, gamma: &[f64], qt: &[f64], r0: f64) -> Result<Vec<f64>> {
    check(gamma, qt, r0)?;
    let k = gamma.len();
    let mut v = vec![0.0; 2 * k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let dr = qt[2 * i] - qt[2 * j];
            let dz = qt[2 * i + 1] - qt[2 * j + 1];
            let d2 = dr * dr + dz * dz;
            if d2 == 0.0 {
                return Err(Error::Singularity(format!("point vortices {i} and {j} coincide")));
            }
            let c = gamma[j] / (2.0 * PI * d2);
            v[2 * i] -= c * dz;
            v[2 * i + 1] += c * dr;
        }
        v[2 * i + 1] += match system {
            PvSystem::J1 => -gamma[i] / (4.0 * PI * r0),
            PvSystem::J2 => qt[2 * i] * gamma[i] / (4.0 * PI * r0 * r0),
        };
    }
    Ok(v)
}

/// Hamiltonian `H` (with `γ_i Ṙ_i = ∂H/∂Z_i`, `γ_i Ż_i = −∂H/∂R_i`) and
/// impulse `P = Σ γ_i q̃_{R_i}`.
pub fn pv_invariants(system: PvSystem, gamma: &[f64], qt: &[f64], r0: f64) -> Result<(f64, f64)> {
    check(gamma, qt, r0)?;
    let k = gamma.len();
    let mut h = 0.0;
    let mut p = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let dr = qt[2 * i] - qt[2 * j];
            let dz = qt[2 * i + 1] - qt[2 * j + 1];
            let d2 = dr * dr + dz * dz;
            if d2 == 0.0 {
                return Err(Error::Singularity(format!("point vortices {i} and {j} coincide")));
            }
            h -= gamma[i] * gamma[j] * d2.ln() / (4.0 * PI);
        }
        let g2 = gamma[i] * gamma[i];
        h += match system {
            PvSystem::J1 => g2 * qt[2 * i] / (4.0 * PI * r0),
            PvSystem::J2 => -g2 * qt[2 * i] * qt[2 * i] / (8.0 * PI * r0 * r0),
        };
        p += gamma[i] * qt[2 * i];
    }
    Ok((h, p))
}

/// Smallest pairwise distance between point vortices.
pub fn min_distance(qt: &[f64]) -> f64 {
    let k = qt.len() / 2;
    let mut d = f64::INFINITY;
    for i in 0..k {
        for j in i + 1..k {
            d = d.min((qt[2 * i] - qt[2 * j]).hypot(qt[2 * i + 1] - qt[2 * j + 1]));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_vortex_drift() {
        let v = pv_velocity(PvSystem::J1, &[2.0], &[0.3, 0.9], 1.5).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] + 2.0 / (4.0 * PI * 1.5)).abs() < 1e-16);
    }

    #[test]
    fn hamiltonian_gradient_gives_velocity() {
        let gamma = [1.0, -0.7, 2.0];
        let qt = [0.1, 0.2, -0.5, 0.4, 0.3, -0.8];
        for sys in [PvSystem::J1, PvSystem::J2] {
            let v = pv_velocity(sys, &gamma, &qt, 1.0).unwrap();
            let h = 1e-6;
            for i in 0..3 {
                let mut dh = [0.0; 2];
                for a in 0..2 {
                    let mut p = qt;
                    let mut m = qt;
                    p[2 * i + a] += h;
                    m[2 * i + a] -= h;
                    dh[a] = (pv_invariants(sys, &gamma, &p, 1.0).unwrap().0
                        - pv_invariants(sys, &gamma, &m, 1.0).unwrap().0)
                        / (2.0 * h);
                }
                assert!((gamma[i] * v[2 * i] - dh[1]).abs() < 1e-8);
                assert!((gamma[i] * v[2 * i + 1] + dh[0]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn coincident_points_rejected() {
        assert!(pv_velocity(PvSystem::J1, &[1.0, 1.0], &[0.0, 0.0, 0.0, 0.0], 1.0).is_err());
    }
}
