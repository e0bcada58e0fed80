//! Interior energy `f(R, v) = ∫_B r|∇φ|²` for the Neumann problem
//! `div(r∇φ) = 0` in the disk with data `n·e_R − ρ/(2R)`.
//!
//! In the scaled disk `x = q + ρξ(cos θ, sin θ)` the problem becomes
//! `div(ŵ∇φ̂) = 0`, `∂_ξφ̂ = cos θ − β/2` on `ξ = 1`, with `ŵ = 1 + βξ cos θ`
//! and `β = ρ/R`; then `f = Rρ²·ê(β)` with `ê = ∫ ŵ|∇φ̂|²`. The scaled problem
//! is discretized by cell-centred finite volumes on a polar grid and solved by
//! conjugate gradients preconditioned with the `β = 0` operator, which is
//! diagonalized by an FFT in `θ`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default radial × angular resolution.
pub const DEFAULT_RESOLUTION: (usize, usize) = (64, 128);

/// Largest `β = ρ/R` covered by the interpolation table.
pub const TABLE_BETA_MAX: f64 = 0.5;
const TABLE_NODES: usize = 16;

struct PolarProblem {
    nr: usize,
    nt: usize,
    dxi: f64,
    dth: f64,
    /// Radial face coefficients between rings `i` and `i+1`, per angle.
    rad: Vec<f64>,
    /// Angular face coefficients between angles `j` and `j+1`, per ring.
    ang: Vec<f64>,
    rhs: Vec<f64>,
    data: Vec<f64>,
    wall: Vec<f64>,
    // preconditioner
    rad0: Vec<f64>,
    ang0: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl PolarProblem {
    fn new(beta: f64, nr: usize, nt: usize) -> Self {
        let dxi = 1.0 / nr as f64;
        let dth = 2.0 * PI / nt as f64;
        let w = |xi: f64, th: f64| 1.0 + beta * xi * th.cos();
        let mut rad = vec![0.0; nr * nt];
        let mut ang = vec![0.0; nr * nt];
        for i in 0..nr {
            let xc = (i as f64 + 0.5) * dxi;
            let xf = (i as f64 + 1.0) * dxi;
            for j in 0..nt {
                let th = j as f64 * dth;
                if i + 1 < nr {
                    rad[i * nt + j] = w(xf, th) * xf * dth / dxi;
                }
                ang[i * nt + j] = w(xc, th + 0.5 * dth) * dxi / (xc * dth);
            }
        }
        let mut rhs = vec![0.0; nr * nt];
        let mut data = vec![0.0; nt];
        let mut wall = vec![0.0; nt];
        for j in 0..nt {
            let th = j as f64 * dth;
            data[j] = th.cos() - 0.5 * beta;
            wall[j] = w(1.0, th);
            rhs[(nr - 1) * nt + j] = wall[j] * data[j] * dth;
        }
        let rad0 = (0..nr).map(|i| if i + 1 < nr { (i as f64 + 1.0) * dth } else { 0.0 }).collect();
        let ang0 = (0..nr).map(|i| 1.0 / ((i as f64 + 0.5) * dth)).collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(nt);
        let inv = planner.plan_fft_inverse(nt);
        Self { nr, nt, dxi, dth, rad, ang, rhs, data, wall, rad0, ang0, fwd, inv }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nr, nt) = (self.nr, self.nt);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..nr {
            for j in 0..nt {
                let c = i * nt + j;
                let jn = i * nt + (j + 1) % nt;
                let a = self.ang[c] * (x[c] - x[jn]);
                y[c] += a;
                y[jn] -= a;
                if i + 1 < nr {
                    let up = c + nt;
                    let r = self.rad[c] * (x[c] - x[up]);
                    y[c] += r;
                    y[up] -= r;
                }
            }
        }
    }

    /// Pseudo-inverse of the `β = 0` operator.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let (nr, nt) = (self.nr, self.nt);
        let mut spec: Vec<Complex<f64>> = r.iter().map(|&v| Complex::new(v, 0.0)).collect();
        for i in 0..nr {
            self.fwd.process(&mut spec[i * nt..(i + 1) * nt]);
        }
        let mut cp = vec![0.0; nr];
        let mut dp = vec![Complex::new(0.0, 0.0); nr];
        let mut col = vec![Complex::new(0.0, 0.0); nr];
        for m in 0..nt {
            let lam = 2.0 - 2.0 * (2.0 * PI * m as f64 / nt as f64).cos();
            let start = if m == 0 { 1 } else { 0 };
            // Thomas sweep on rows start..nr, with x_0 = 0 pinned when m = 0
            for i in start..nr {
                let lo = if i > 0 { self.rad0[i - 1] } else { 0.0 };
                let diag = lo + self.rad0[i] + self.ang0[i] * lam;
                let sub = if i > start { -lo } else { 0.0 };
                let denom = diag - sub * if i > start { cp[i - 1] } else { 0.0 };
                cp[i] = -self.rad0[i] / denom;
                let prev = if i > start { dp[i - 1] } else { Complex::new(0.0, 0.0) };
                dp[i] = (spec[i * nt + m] - prev * sub) / denom;
            }
            col[nr - 1] = dp[nr - 1];
            for i in (start..nr - 1).rev() {
                col[i] = dp[i] - col[i + 1] * cp[i];
            }
            if m == 0 {
                col[0] = Complex::new(0.0, 0.0);
            }
            for i in 0..nr {
                spec[i * nt + m] = col[i];
            }
        }
        for i in 0..nr {
            self.inv.process(&mut spec[i * nt..(i + 1) * nt]);
        }
        let scale = 1.0 / nt as f64;
        let mut mean = 0.0;
        for (zi, s) in z.iter_mut().zip(&spec) {
            *zi = s.re * scale;
            mean += *zi;
        }
        mean /= z.len() as f64;
        z.iter_mut().for_each(|v| *v -= mean);
    }

    fn solve(&self) -> Result<Vec<f64>> {
        let n = self.nr * self.nt;
        let b = &self.rhs;
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        let mut r = b.clone();
        let mut z = vec![0.0; n];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..500 {
            self.apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn <= 1e-13 * bnorm {
                return Ok(x);
            }
            self.precondition(&r, &mut z);
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::Solver { message: "interior CG did not converge".into(), condition: f64::NAN })
    }

    fn energy(&self, phi: &[f64]) -> f64 {
        let base = (self.nr - 1) * self.nt;
        (0..self.nt)
            .map(|j| {
                let g = self.data[j];
                self.wall[j] * g * self.dth * (phi[base + j] + 0.5 * self.dxi * g)
            })
            .sum()
    }
}

/// Scaled energy `ê(β)` at one resolution.
pub fn scaled_energy(beta: f64, nr: usize, nt: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::Domain(format!("interior energy needs 0 <= rho/R < 1, got {beta}")));
    }
    if nr < 4 || nt < 8 || nt % 2 != 0 {
        return Err(Error::Parameter(format!("bad interior resolution {nr}x{nt}")));
    }
    let prob = PolarProblem::new(beta, nr, nt);
    let phi = prob.solve()?;
    Ok(prob.energy(&phi))
}

/// Richardson-extrapolated `ê(β)` with the relative gap between the two
/// underlying resolutions.
pub fn scaled_energy_richardson(beta: f64, nr: usize, nt: usize) -> Result<(f64, f64)> {
    let fine = scaled_energy(beta, nr, nt)?;
    let coarse = scaled_energy(beta, nr / 2, nt / 2)?;
    let gap = ((fine - coarse) / fine).abs();
    if gap > 1e-3 {
        return Err(Error::Consistency(format!("interior energy unresolved: refinement gap {gap:.2e}")));
    }
    Ok(((4.0 * fine - coarse) / 3.0, gap))
}

fn check_geometry(big_r: f64, v: f64) -> Result<f64> {
    if !(big_r > 0.0) || !(v > 0.0) {
        return Err(Error::Domain(format!("interior energy needs R > 0 and v > 0, got R={big_r}, v={v}")));
    }
    let rho = (v / (PI * big_r)).sqrt();
    if rho >= big_r {
        return Err(Error::Domain(format!("body of radius {rho:.4e} at R={big_r:.4e} crosses the axis")));
    }
    Ok(rho)
}

/// `f(R, v)` by a direct solve at the default resolution.
pub fn interior_energy_f(big_r: f64, v: f64) -> Result<f64> {
    let rho = check_geometry(big_r, v)?;
    let (nr, nt) = DEFAULT_RESOLUTION;
    let (e, _) = scaled_energy_richardson(rho / big_r, nr, nt)?;
    Ok(big_r * rho * rho * e)
}

/// Chebyshev interpolant of `ê` in `u = β²` on `[0, β_max²]`.
#[derive(Debug, Clone)]
pub struct EnergyTable {
    coeffs: Vec<f64>,
    umax: f64,
}

impl EnergyTable {
    pub fn build(beta_max: f64, nodes: usize) -> Result<Self> {
        let umax = beta_max * beta_max;
        let n = nodes;
        let (nr, nt) = DEFAULT_RESOLUTION;
        let vals: Vec<f64> = (0..=n)
            .map(|k| {
                let x = (PI * k as f64 / n as f64).cos();
                let u = 0.5 * umax * (1.0 + x);
                scaled_energy_richardson(u.sqrt(), nr, nt).map(|v| v.0)
            })
            .collect::<Result<_>>()?;
        let mut coeffs = vec![0.0; n + 1];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, v) in vals.iter().enumerate() {
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                s += w * v * (PI * (j * k) as f64 / n as f64).cos();
            }
            *c = 2.0 * s / n as f64;
        }
        coeffs[0] *= 0.5;
        coeffs[n] *= 0.5;
        Ok(Self { coeffs, umax })
    }

    pub fn beta_max(&self) -> f64 {
        self.umax.sqrt()
    }

    /// `(ê, dê/dβ)` at `β`.
    pub fn eval(&self, beta: f64) -> (f64, f64) {
        let u = beta * beta;
        let x = 2.0 * u / self.umax - 1.0;
        // Clenshaw for the value and the derivative in x
        let (mut b1, mut b2) = (0.0, 0.0);
        let (mut d1, mut d2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            let d0 = 2.0 * x * d1 - d2 + 2.0 * b1;
            b2 = b1;
            b1 = b0;
            d2 = d1;
            d1 = d0;
        }
        let val = x * b1 - b2 + self.coeffs[0];
        let dx = x * d1 - d2 + b1;
        (val, dx * (2.0 / self.umax) * 2.0 * beta)
    }
}

static TABLE: OnceLock<std::result::Result<EnergyTable, Error>> = OnceLock::new();

/// Process-wide table, built on first use.
pub fn energy_table() -> Result<&'static EnergyTable> {
    TABLE.get_or_init(|| EnergyTable::build(TABLE_BETA_MAX, TABLE_NODES)).as_ref().map_err(Clone::clone)
}

/// `(f, ∂f/∂R)` at fixed volume, from the table when `ρ/R` is covered and
/// by direct solves otherwise.
pub fn interior_energy_fast(big_r: f64, v: f64) -> Result<(f64, f64)> {
    let rho = check_geometry(big_r, v)?;
    let beta = rho / big_r;
    let pref = v / PI;
    if beta <= TABLE_BETA_MAX {
        let (e, de) = energy_table()?.eval(beta);
        // β = √(v/(πR³)) so dβ/dR = −(3/2)β/R
        Ok((pref * e, pref * de * (-1.5 * beta / big_r)))
    } else {
        let f = interior_energy_f(big_r, v)?;
        let h = 1e-4 * big_r;
        let df = (interior_energy_f(big_r + h, v)? - interior_energy_f(big_r - h, v)?) / (2.0 * h);
        Ok((f, df))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_limit_is_pi() {
        let (e, gap) = scaled_energy_richardson(0.0, 64, 128).unwrap();
        assert!((e - PI).abs() < 1e-6, "{e}");
        assert!(gap < 1e-3);
    }

    #[test]
    fn even_in_beta() {
        let a = scaled_energy(0.3, 16, 32).unwrap();
        assert!(scaled_energy(-0.3, 16, 32).is_err());
        let prob = PolarProblem::new(-0.3, 16, 32);
        let c = prob.energy(&prob.solve().unwrap());
        assert!((a - c).abs() < 1e-10 * a);
    }

    #[test]
    fn table_matches_direct() {
        let t = energy_table().unwrap();
        for &beta in &[0.0, 0.05, 0.2, 0.37, 0.5] {
            let direct = scaled_energy_richardson(beta, 64, 128).unwrap().0;
            assert!((t.eval(beta).0 - direct).abs() < 1e-9, "beta {beta}");
        }
        let h = 1e-4;
        let fd = (t.eval(0.3 + h).0 - t.eval(0.3 - h).0) / (2.0 * h);
        assert!((t.eval(0.3).1 - fd).abs() < 1e-6);
    }

    #[test]
    fn geometry_checked() {
        assert!(interior_energy_f(1.0, PI).is_err());
        assert!(interior_energy_f(-1.0, 0.1).is_err());
    }
}
