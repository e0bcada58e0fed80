//! Dormand–Prince 5(4) with dense output and section-crossing events.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on any step.
    pub h_max: f64,
    /// Steps below `h_min_rel · |t_end − t0|` count as step-size collapse.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, h_max: f64::INFINITY, h_min_rel: 1e-14, max_steps: 10_000_000 }
    }
}

/// Continuous extension over the last accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.r;
        (0..r1.len()).map(|i| r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])))).collect()
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// What the step observer asks the driver to do.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Continue,
    Stop(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub last_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeOutcome {
    pub t: f64,
    pub y: Vec<f64>,
    /// `None` when `t_end` was reached.
    pub stopped: Option<String>,
    pub stats: OdeStats,
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`.
///
/// `h_limit(t, y)` may tighten `h_max` at the start of each step. After every
/// accepted step `observer` receives the dense step and may stop the run.
/// An RHS error inside a step is treated as a rejection; if it persists down
/// to the minimal step the error stops the run with its message.
pub fn integrate<F, H, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &OdeOptions,
    mut h_limit: H,
    mut observer: O,
) -> Result<OdeOutcome>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
    H: FnMut(f64, &[f64]) -> f64,
    O: FnMut(&DenseStep, &[f64]) -> Result<Control>,
{
    if !(t_end > t0) {
        return Err(Error::Parameter(format!("integration interval [{t0}, {t_end}] is empty")));
    }
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(Error::Parameter("tolerances must be positive".into()));
    }
    let n = y0.len();
    let span = t_end - t0;
    let h_min = opts.h_min_rel * span;
    let mut stats = OdeStats { accepted: 0, rejected: 0, rhs_evals: 0, last_step: 0.0 };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y)?;
    stats.rhs_evals += 1;

    let axpy = |y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]| -> Vec<f64> {
        (0..n).map(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>()).collect()
    };

    // initial step from the first derivative
    let sc = |v: &[f64], i: usize| opts.atol + opts.rtol * v[i].abs();
    let d0 = (0..n).map(|i| (y[i] / sc(&y, i)).powi(2)).sum::<f64>() / n as f64;
    let d1 = (0..n).map(|i| (k1[i] / sc(&y, i)).powi(2)).sum::<f64>() / n as f64;
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 * span } else { 0.01 * (d0 / d1).sqrt() };
    h = h.min(span);

    loop {
        let hmax = opts.h_max.min(h_limit(t, &y));
        h = h.min(hmax).min(t_end - t);
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Stiffness {
                message: format!("step budget {} exhausted at t = {t:.6e}", opts.max_steps),
                smallest_eigenvalue: f64::NAN,
            });
        }
        let last = t + h >= t_end;
        let stages = (|| -> Result<[Vec<f64>; 6]> {
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(t + C5 * h, &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
            let y6 = axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
            let k6 = f(t + h, &y6)?;
            let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(if last { t_end } else { t + h }, &y1)?;
            Ok([k2, k3, k4, k5, k6, k7])
        })();
        stats.rhs_evals += 6;
        let [_, k3, k4, k5, k6, k7] = match stages {
            Ok(k) => k,
            Err(e) => {
                stats.rejected += 1;
                h *= 0.5;
                if h < h_min {
                    return Ok(OdeOutcome { t, y, stopped: Some(e.to_string()), stats });
                }
                continue;
            }
        };
        let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let err = ((0..n)
            .map(|i| {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let s = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
                (e / s).powi(2)
            })
            .sum::<f64>()
            / n as f64)
            .sqrt();
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            if h < h_min {
                return Err(Error::Stiffness {
                    message: format!("non-finite error estimate at t = {t:.6e}"),
                    smallest_eigenvalue: f64::NAN,
                });
            }
            continue;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        if err > 1.0 {
            stats.rejected += 1;
            h *= fac.min(1.0);
            if h < h_min {
                return Err(Error::Stiffness {
                    message: format!("step size collapsed to {h:.3e} at t = {t:.6e}"),
                    smallest_eigenvalue: f64::NAN,
                });
            }
            continue;
        }
        let r2: Vec<f64> = (0..n).map(|i| y1[i] - y[i]).collect();
        let r3: Vec<f64> = (0..n).map(|i| h * k1[i] - r2[i]).collect();
        let r4: Vec<f64> = (0..n).map(|i| r2[i] - h * k7[i] - r3[i]).collect();
        let r5: Vec<f64> =
            (0..n).map(|i| h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])).collect();
        let t1 = if last { t_end } else { t + h };
        let dense = DenseStep { t0: t, h: t1 - t, r: [y.clone(), r2, r3, r4, r5] };
        stats.accepted += 1;
        stats.last_step = t1 - t;
        t = t1;
        y = y1;
        k1 = k7;
        if let Control::Stop(why) = observer(&dense, &y)? {
            return Ok(OdeOutcome { t, y, stopped: Some(why), stats });
        }
        if last {
            return Ok(OdeOutcome { t, y, stopped: None, stats });
        }
        h *= fac;
    }
}

/// Root of `g` over a dense step, by bisection, when `g` changes sign from
/// negative to positive between the step ends.
pub fn locate_crossing<G: Fn(&[f64]) -> f64>(step: &DenseStep, y1: &[f64], g: G) -> Option<(f64, Vec<f64>)> {
    let ya = step.eval(step.t0);
    let (ga, gb) = (g(&ya), g(y1));
    if !(ga < 0.0 && gb >= 0.0) {
        return None;
    }
    let (mut a, mut b) = (step.t0, step.t1());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(&step.eval(m)) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some((b, step.eval(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(rtol: f64) -> (Vec<f64>, OdeOutcome) {
        let mut samples = Vec::new();
        let out = integrate(
            |_, y| Ok(vec![y[1], -y[0]]),
            0.0,
            &[1.0, 0.0],
            10.0,
            &OdeOptions { rtol, atol: rtol, ..Default::default() },
            |_, _| f64::INFINITY,
            |step, _| {
                let mut s = (step.t0 / 0.5).ceil() * 0.5;
                while s < step.t1() {
                    samples.push(step.eval(s)[0] - s.cos());
                    s += 0.5;
                }
                Ok(Control::Continue)
            },
        )
        .unwrap();
        (samples, out)
    }

    #[test]
    fn harmonic_oscillator() {
        let (samples, out) = run(1e-10);
        assert!((out.y[0] - 10f64.cos()).abs() < 1e-8);
        assert!(samples.iter().all(|e| e.abs() < 1e-8), "{samples:?}");
        assert!(out.stopped.is_none());
    }

    #[test]
    fn error_scales_with_tolerance() {
        let e1 = (run(1e-6).1.y[0] - 10f64.cos()).abs();
        let e2 = (run(1e-9).1.y[0] - 10f64.cos()).abs();
        assert!(e2 < e1 / 50.0, "{e1} {e2}");
    }

    #[test]
    fn crossing_located() {
        let mut hits = Vec::new();
        integrate(
            |_, y| Ok(vec![y[1], -y[0]]),
            0.0,
            &[1.0, 0.0],
            7.0,
            &OdeOptions { rtol: 1e-12, atol: 1e-12, ..Default::default() },
            |_, _| f64::INFINITY,
            |step, y1| {
                if let Some((t, _)) = locate_crossing(step, y1, |y| y[0]) {
                    hits.push(t);
                }
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert_eq!(hits.len(), 1);
        assert!((hits[0] - 1.5 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn rhs_failure_becomes_status() {
        let out = integrate(
            |t, y| if t > 1.0 { Err(Error::Configuration("overlap".into())) } else { Ok(vec![y[0]]) },
            0.0,
            &[1.0],
            2.0,
            &OdeOptions::default(),
            |_, _| f64::INFINITY,
            |_, _| Ok(Control::Continue),
        )
        .unwrap();
        assert!(out.stopped.unwrap().contains("overlap"));
        assert!(out.t <= 1.0);
    }

    #[test]
    fn step_cap_respected() {
        let mut biggest = 0.0f64;
        integrate(
            |_, y| Ok(vec![-y[0]]),
            0.0,
            &[1.0],
            1.0,
            &OdeOptions { h_max: 0.01, ..Default::default() },
            |_, _| 0.02,
            |s, _| {
                biggest = biggest.max(s.h);
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert!(biggest <= 0.01 + 1e-15);
    }
}
