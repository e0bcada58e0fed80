//! Point kernels on the meridian half-plane `{(r, z) : r > 0}`.
//!
//! * `K(x, y) = −(1/2π)·√(x_r y_r)·F(|x−y|²/(x_r y_r))`, the fundamental
//!   solution of `div((1/r)∇·)`;
//! * `K̄_R`, its logarithmic approximation near a ring of radius `R`;
//! * `S(x, y) = (x_r/π)·K(k)/D`, the azimuthal average of the Newtonian
//!   potential of a unit ring source at `x`, which solves `div(r∇·) = 0`.
//!
//! Each singular kernel is also available in split form
//! `P(x,y)·log|x−y|² + Q(x,y)` with `P`, `Q` smooth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{self, f_prime, f_split, k_split, ke_from_complement, SWITCH_RADIUS};

const LN_4: f64 = 2.0 * std::f64::consts::LN_2;
const LN_8: f64 = 3.0 * std::f64::consts::LN_2;

/// A point `(r, z)` of the meridian half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub r: f64,
    pub z: f64,
}

impl HalfPlanePoint {
    pub fn new(r: f64, z: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() || !z.is_finite() {
            return Err(Error::Domain(format!("half-plane point needs r > 0, got ({r}, {z})")));
        }
        Ok(Self { r, z })
    }

    pub fn dist2(&self, other: &HalfPlanePoint) -> f64 {
        let dr = self.r - other.r;
        let dz = self.z - other.z;
        dr * dr + dz * dz
    }

    pub fn dist(&self, other: &HalfPlanePoint) -> f64 {
        self.dist2(other).sqrt()
    }
}

/// Which kernel a split or log coefficient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Stream,
    SingleLayer,
}

fn check_pair(x: &HalfPlanePoint, y: &HalfPlanePoint) -> Result<f64> {
    if !(x.r > 0.0) || !(y.r > 0.0) {
        return Err(Error::Domain("kernel arguments need r > 0".into()));
    }
    let d2 = x.dist2(y);
    if d2 == 0.0 {
        return Err(Error::Singularity(format!("kernel evaluated on the diagonal at ({}, {})", x.r, x.z)));
    }
    Ok(d2)
}

pub(crate) fn f_value(s: f64) -> f64 {
    if s <= SWITCH_RADIUS {
        let sp = f_split(s);
        sp.a * s.ln() + sp.b
    } else {
        special::f_eval(s, special::FMode::Elliptic).unwrap_or(f64::NAN)
    }
}

pub(crate) fn stream_unchecked(x: &HalfPlanePoint, y: &HalfPlanePoint, d2: f64) -> f64 {
    let rr = x.r * y.r;
    -rr.sqrt() * f_value(d2 / rr) / (2.0 * PI)
}

/// Stream kernel `K(x, y)`.
pub fn stream_kernel(x: HalfPlanePoint, y: HalfPlanePoint) -> Result<f64> {
    let d2 = check_pair(&x, &y)?;
    Ok(stream_unchecked(&x, &y, d2))
}

/// Constant `−log 8 + 2 − log R` of the flat kernel.
pub(crate) fn flat_offset(big_r: f64) -> f64 {
    -LN_8 + 2.0 - big_r.ln()
}

/// Flat kernel `K̄_R(x, y) = (R/2π)(log|x−y| − log 8 + 2 − log R)`.
pub fn flat_kernel(big_r: f64, x: HalfPlanePoint, y: HalfPlanePoint) -> Result<f64> {
    if !(big_r > 0.0) {
        return Err(Error::Domain(format!("flat kernel needs R > 0, got {big_r}")));
    }
    let d2 = x.dist2(&y);
    if d2 == 0.0 {
        return Err(Error::Singularity("flat kernel evaluated on the diagonal".into()));
    }
    Ok(big_r / (2.0 * PI) * (0.5 * d2.ln() + flat_offset(big_r)))
}

pub(crate) fn stream_grad_unchecked(x: &HalfPlanePoint, y: &HalfPlanePoint, d2: f64) -> [f64; 2] {
    let rr = x.r * y.r;
    let g = rr.sqrt();
    let s = d2 / rr;
    let f = f_value(s);
    let fp = f_prime(s);
    let ds_r = 2.0 * (y.r - x.r) / rr - s / y.r;
    let ds_z = 2.0 * (y.z - x.z) / rr;
    let dg_r = x.r / (2.0 * g);
    let c = -1.0 / (2.0 * PI);
    [c * (dg_r * f + g * fp * ds_r), c * g * fp * ds_z]
}

/// `∇_y K(x, y)` by analytic differentiation.
pub fn stream_kernel_grad_y(x: HalfPlanePoint, y: HalfPlanePoint) -> Result<[f64; 2]> {
    let d2 = check_pair(&x, &y)?;
    Ok(stream_grad_unchecked(&x, &y, d2))
}

pub(crate) fn ring_unchecked(x: &HalfPlanePoint, y: &HalfPlanePoint, d2: f64) -> f64 {
    let sr = x.r + y.r;
    let dz = x.z - y.z;
    let big_d2 = sr * sr + dz * dz;
    let big_d = big_d2.sqrt();
    let kp = (d2 / big_d2).sqrt();
    let (k, _, _) = ke_from_complement(kp);
    x.r * k / (PI * big_d)
}

/// Ring single-layer kernel `S(x, y)`: potential at `y` of the unit-density
/// ring through the source point `x`.
pub fn laplace_ring_kernel(x: HalfPlanePoint, y: HalfPlanePoint) -> Result<f64> {
    let d2 = check_pair(&x, &y)?;
    Ok(ring_unchecked(&x, &y, d2))
}

pub(crate) fn ring_grad_unchecked(x: &HalfPlanePoint, y: &HalfPlanePoint, d2: f64) -> [f64; 2] {
    let sr = x.r + y.r;
    let dz = y.z - x.z;
    let big_d2 = sr * sr + dz * dz;
    let big_d = big_d2.sqrt();
    let kp2 = d2 / big_d2;
    let kp = kp2.sqrt();
    let k = 2.0 * (x.r * y.r).sqrt() / big_d;
    let (ke, ee, _) = ke_from_complement(kp);
    let dd = [sr / big_d, dz / big_d];
    let dk = [k / (2.0 * y.r) - k * dd[0] / big_d, -k * dd[1] / big_d];
    let dkdk = (ee - kp2 * ke) / (k * kp2);
    let c = x.r / PI;
    [c * (-ke * dd[0] / big_d2 + dkdk * dk[0] / big_d), c * (-ke * dd[1] / big_d2 + dkdk * dk[1] / big_d)]
}

/// `∇_y S(x, y)`.
pub fn laplace_ring_kernel_grad_y(x: HalfPlanePoint, y: HalfPlanePoint) -> Result<[f64; 2]> {
    let d2 = check_pair(&x, &y)?;
    Ok(ring_grad_unchecked(&x, &y, d2))
}

/// Kernel written as `p·log|x−y|² + q`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Split {
    pub p: f64,
    pub q: f64,
}

/// Split of `K`; valid on the diagonal.
pub(crate) fn stream_split(x: &HalfPlanePoint, y: &HalfPlanePoint) -> Split {
    let rr = x.r * y.r;
    let g = rr.sqrt();
    let sp = f_split(x.dist2(y) / rr);
    let c = -g / (2.0 * PI);
    Split { p: c * sp.a, q: c * (sp.b - sp.a * rr.ln()) }
}

/// Split of `S` with `∇_y p`, `∇_y q`; valid on the diagonal.
pub(crate) fn ring_split_grad(x: &HalfPlanePoint, y: &HalfPlanePoint) -> (Split, [f64; 2], [f64; 2]) {
    let sr = x.r + y.r;
    let dr = y.r - x.r;
    let dz = y.z - x.z;
    let big_d2 = sr * sr + dz * dz;
    let big_d = big_d2.sqrt();
    let mp = (dr * dr + dz * dz) / big_d2;
    let ks = k_split(mp);
    let dd = [sr / big_d, dz / big_d];
    let dmp = [2.0 * (dr - mp * big_d * dd[0]) / big_d2, 2.0 * (dz - mp * big_d * dd[1]) / big_d2];
    let lg = LN_4 + big_d.ln();
    let c = x.r / PI;
    let p = -0.5 * c * ks.p / big_d;
    let inner = ks.p * lg + ks.q;
    let q = c * inner / big_d;
    let mut gp = [0.0; 2];
    let mut gq = [0.0; 2];
    for a in 0..2 {
        gp[a] = -0.5 * c * (ks.dp * dmp[a] / big_d - ks.p * dd[a] / big_d2);
        let dinner = ks.dp * dmp[a] * lg + ks.p * dd[a] / big_d + ks.dq * dmp[a];
        gq[a] = c * (dinner / big_d - inner * dd[a] / big_d2);
    }
    (Split { p, q }, gp, gq)
}

pub(crate) fn ring_split(x: &HalfPlanePoint, y: &HalfPlanePoint) -> Split {
    ring_split_grad(x, y).0
}

/// Coefficient `P(x, y)` of `log|x−y|` in the kernel; `kernel − P·log|x−y|`
/// extends continuously to `x = y`.
pub fn log_coefficient(kind: KernelKind, x: HalfPlanePoint, y: HalfPlanePoint) -> f64 {
    let sp = match kind {
        KernelKind::Stream => stream_split(&x, &y),
        KernelKind::SingleLayer => ring_split(&x, &y),
    };
    2.0 * sp.p
}

/// Smooth remainder `kernel − P·log|x−y|`, including its diagonal value.
pub fn smooth_remainder(kind: KernelKind, x: HalfPlanePoint, y: HalfPlanePoint) -> f64 {
    match kind {
        KernelKind::Stream => stream_split(&x, &y).q,
        KernelKind::SingleLayer => ring_split(&x, &y).q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::FMode;

    fn pt(r: f64, z: f64) -> HalfPlanePoint {
        HalfPlanePoint { r, z }
    }

    #[test]
    fn flat_kernel_zero_point() {
        let x = pt(1.0, 0.0);
        let y = pt(1.0, 8.0 / std::f64::consts::E.powi(2));
        assert!(flat_kernel(1.0, x, y).unwrap().abs() < 1e-15);
        let y = pt(1.0, 2.5);
        let expect = (2.5f64.ln() - 8.0f64.ln() + 2.0) / (2.0 * PI);
        assert!((flat_kernel(1.0, x, y).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn stream_matches_quadrature() {
        let x = pt(1.0, 0.0);
        let y = pt(2.0, 1.0);
        let s = 2.0 / 2.0;
        let expect = -(2.0f64).sqrt() / (2.0 * PI) * special::f_eval(s, FMode::Quadrature).unwrap();
        assert!((stream_kernel(x, y).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn diagonal_is_singular() {
        let x = pt(1.0, 0.3);
        assert!(matches!(stream_kernel(x, x), Err(Error::Singularity(_))));
        assert!(matches!(laplace_ring_kernel(x, x), Err(Error::Singularity(_))));
        assert!(matches!(flat_kernel(1.0, x, x), Err(Error::Singularity(_))));
        assert!(stream_kernel_grad_y(x, x).is_err());
        assert!(HalfPlanePoint::new(0.0, 1.0).is_err());
    }

    #[test]
    fn near_flat_kernel_close_to_diagonal() {
        let x = pt(1.0, 0.0);
        let y = pt(1.0, 0.01);
        let d = 0.01f64;
        let diff = (stream_kernel(x, y).unwrap() - flat_kernel(1.0, x, y).unwrap()).abs();
        assert!(diff <= d * d * d.ln().abs());
    }

    #[test]
    fn ring_kernel_matches_azimuthal_sum() {
        let pairs = [(1.0, 0.0, 2.0, 1.0), (0.3, 0.2, 0.7, -0.4), (1.5, 0.0, 0.4, 0.2)];
        for &(xr, xz, yr, yz) in &pairs {
            let n = 200;
            let mut acc = 0.0;
            for j in 0..n {
                let th = 2.0 * PI * j as f64 / n as f64;
                let d2 = xr * xr + yr * yr - 2.0 * xr * yr * th.cos() + (xz - yz) * (xz - yz);
                acc += xr / (4.0 * PI * d2.sqrt());
            }
            acc *= 2.0 * PI / n as f64;
            let s = laplace_ring_kernel(pt(xr, xz), pt(yr, yz)).unwrap();
            assert!((s - acc).abs() < 1e-9 * s.abs());
        }
    }

    #[test]
    fn splits_reproduce_kernels() {
        let x = pt(1.0, 0.0);
        for &(r, z) in &[(1.02, 0.01), (1.3, 0.4), (2.5, -1.0), (0.2, 0.1)] {
            let y = pt(r, z);
            let l = x.dist2(&y).ln();
            let s = stream_split(&x, &y);
            assert!((s.p * l + s.q - stream_kernel(x, y).unwrap()).abs() < 1e-13);
            let s = ring_split(&x, &y);
            assert!((s.p * l + s.q - laplace_ring_kernel(x, y).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn ring_split_gradient_matches_differences() {
        let x = pt(1.0, 0.2);
        for &(r, z) in &[(1.0, 0.2), (1.01, 0.21), (1.3, 0.4), (0.5, 1.5)] {
            let y = pt(r, z);
            let (_, gp, gq) = ring_split_grad(&x, &y);
            let h = 1e-6;
            for a in 0..2 {
                let mut yp = y;
                let mut ym = y;
                if a == 0 {
                    yp.r += h;
                    ym.r -= h;
                } else {
                    yp.z += h;
                    ym.z -= h;
                }
                let (sp, _, _) = ring_split_grad(&x, &yp);
                let (sm, _, _) = ring_split_grad(&x, &ym);
                assert!((gp[a] - (sp.p - sm.p) / (2.0 * h)).abs() < 1e-7, "{r} {z} {a}");
                assert!((gq[a] - (sp.q - sm.q) / (2.0 * h)).abs() < 1e-7, "{r} {z} {a}");
            }
        }
    }

    #[test]
    fn mirror_symmetry_of_gradient() {
        let x = pt(1.0, 0.5);
        let a = stream_kernel_grad_y(x, pt(1.3, 0.9)).unwrap();
        let b = stream_kernel_grad_y(x, pt(1.3, 0.1)).unwrap();
        assert!((a[1] + b[1]).abs() < 1e-14);
        assert!((a[0] - b[0]).abs() < 1e-14);
    }
}
