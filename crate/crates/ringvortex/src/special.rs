//! Complete elliptic integrals, the ring profile `F` and its logarithmic split.
//!
//! Moduli follow the convention `K(m) = ∫₀^{π/2} (1 − m² sin²t)^{-1/2} dt`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::quad;

/// Largest `s` accepted by [`FMode::NearDiagonal`].
pub const SWITCH_RADIUS: f64 = 0.25;

const AGM_TOL: f64 = 1e-15;
const AGM_MAX_ITER: usize = 64;
const LN_4: f64 = 2.0 * std::f64::consts::LN_2;

/// Truncation control for the logarithmic series of `K` near `m = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTruncation {
    max_power: usize,
    tail_tolerance: f64,
}

impl SeriesTruncation {
    pub fn new(max_power: usize, tail_tolerance: f64) -> Result<Self> {
        if max_power < 1 {
            return Err(Error::Parameter("max_power must be at least 1".into()));
        }
        if !(tail_tolerance > 0.0) {
            return Err(Error::Parameter("tail_tolerance must be positive".into()));
        }
        Ok(Self { max_power, tail_tolerance })
    }

    pub fn max_power(&self) -> usize {
        self.max_power
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        Self { max_power: 60, tail_tolerance: 1e-17 }
    }
}

/// AGM iteration started from `(1, kp)` with `k2 = 1 − kp²` supplied exactly.
/// Returns `(K, K − E)` for modulus `k = √k2`.
fn agm(kp: f64, k2: f64) -> (f64, f64) {
    let mut a = 1.0;
    let mut b = kp;
    let mut pow = 0.5;
    let mut sum = 0.5 * k2;
    for _ in 0..AGM_MAX_ITER {
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow *= 2.0;
        sum += pow * c * c;
        if c.abs() <= AGM_TOL * a {
            break;
        }
    }
    let k = FRAC_PI_2 / a;
    (k, k * sum)
}

/// `(K, E, K − E)` for the modulus whose complement is `kp ∈ (0, 1]`.
pub(crate) fn ke_from_complement(kp: f64) -> (f64, f64, f64) {
    let k2 = (1.0 - kp) * (1.0 + kp);
    let (k, kme) = agm(kp, k2);
    (k, k - kme, kme)
}

/// Complete elliptic integral of the first kind.
pub fn elliptic_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!("elliptic_k requires 0 <= m < 1, got {m}")));
    }
    let kp = ((1.0 - m) * (1.0 + m)).sqrt();
    Ok(agm(kp, m * m).0)
}

/// Complete elliptic integral of the second kind.
pub fn elliptic_e(m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain(format!("elliptic_e requires 0 <= m <= 1, got {m}")));
    }
    if m == 1.0 {
        return Ok(1.0);
    }
    let kp = ((1.0 - m) * (1.0 + m)).sqrt();
    let (k, kme) = agm(kp, m * m);
    Ok(k - kme)
}

/// Partial sums of the logarithmic expansion of `K` in `τ = k'²`:
/// `K = (log 4 − ½ log τ)·s0 − 2·s1`, with `c_n = (2n)!/(4ⁿ n!²)` and
/// `H_n = Σ_{j≤n} 1/(2j(2j−1))`.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct LogSums {
    /// Σ c_n² τⁿ
    pub s0: f64,
    /// Σ c_n² H_n τⁿ
    pub s1: f64,
    /// Σ n c_n² τ^{n−1}
    pub d0: f64,
    /// Σ n c_n² H_n τ^{n−1}
    pub d1: f64,
}

pub(crate) fn log_sums(tau: f64, trunc: SeriesTruncation) -> LogSums {
    let mut out = LogSums { s0: 1.0, ..Default::default() };
    let mut c2 = 1.0;
    let mut h = 0.0;
    let mut tpow_prev = 1.0; // τ^{n−1}
    for n in 1..=trunc.max_power {
        let nf = n as f64;
        let r = (2.0 * nf - 1.0) / (2.0 * nf);
        c2 *= r * r;
        h += 1.0 / (2.0 * nf * (2.0 * nf - 1.0));
        let t0 = c2 * tpow_prev;
        out.d0 += nf * t0;
        out.d1 += nf * h * t0;
        let tn = t0 * tau;
        out.s0 += tn;
        out.s1 += h * tn;
        tpow_prev *= tau;
        if nf * t0 * (1.0 + h) < trunc.tail_tolerance {
            break;
        }
    }
    out
}

/// `K(√(1−t²))` from the logarithmic series about `t = 0`.
pub fn elliptic_k_log_series(t: f64, trunc: SeriesTruncation) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("series requires 0 < t < 1, got {t}")));
    }
    let ls = log_sums(t * t, trunc);
    Ok((4.0 / t).ln() * ls.s0 - 2.0 * ls.s1)
}

/// Evaluation strategy for [`f_eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FMode {
    Quadrature,
    Elliptic,
    NearDiagonal,
}

fn f_quadrature(s: f64) -> f64 {
    let g = |t: f64| {
        let h = (0.5 * t).sin();
        t.cos() / (4.0 * h * h + s).sqrt()
    };
    let w = (10.0 * s.sqrt()).min(1.0);
    quad::integrate(g, 0.0, w, 1e-16, 1e-15) + quad::integrate(g, w, PI, 1e-16, 1e-15)
}

fn f_elliptic(s: f64) -> f64 {
    let kp = (s / (4.0 + s)).sqrt();
    let k = 2.0 / (4.0 + s).sqrt();
    let (ke, ee, _) = ke_from_complement(kp);
    (1.0 + 0.5 * s) * k * ke - (2.0 / k) * ee
}

/// `F(s) = ∫₀^π cos t / √(2(1 − cos t) + s) dt`.
pub fn f_eval(s: f64, mode: FMode) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("F requires s > 0, got {s}")));
    }
    match mode {
        FMode::Quadrature => Ok(f_quadrature(s)),
        FMode::Elliptic => Ok(f_elliptic(s)),
        FMode::NearDiagonal => {
            if s > SWITCH_RADIUS {
                return Err(Error::Domain(format!("near-diagonal mode requires s <= {SWITCH_RADIUS}, got {s}")));
            }
            let sp = f_split_series(s);
            Ok(sp.a * s.ln() + sp.b)
        }
    }
}

/// `F(s) = a(s)·log s + b(s)` with `a`, `b` analytic at `s = 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FSplit {
    pub a: f64,
    pub b: f64,
    /// `1 − W = 1 + 2a`, kept separately to avoid cancellation.
    pub one_minus_w: f64,
}

fn f_split_series(s: f64) -> FSplit {
    let tau = s / (4.0 + s);
    let k = 2.0 / (4.0 + s).sqrt();
    let alpha = (1.0 + 0.5 * s) * k;
    let beta = 2.0 / k;
    let ls = log_sums(tau, SeriesTruncation::default());
    let s2 = tau * ls.d0;
    let s3 = tau * ls.d1;
    // Coefficients of L = log(4/t) in K and E, and their constant parts.
    let kl = ls.s0;
    let kc = -2.0 * ls.s1;
    let el = tau * ls.s0 - 2.0 * (1.0 - tau) * s2;
    let ec = -2.0 * tau * ls.s1 + (1.0 - tau) * (4.0 * s3 + ls.s0);
    let w = alpha * kl - beta * el;
    let v = alpha * kc - beta * ec;
    // 1 − W regrouped so the O(1) parts cancel before rounding.
    let alpha_m1 = alpha - 1.0;
    let one_minus_w = -(alpha_m1 * ls.s0 + (ls.s0 - 1.0)) + beta * el;
    let l0 = LN_4 + 0.5 * (4.0 + s).ln();
    FSplit { a: -0.5 * w, b: w * l0 + v, one_minus_w }
}

fn f_split_closed(s: f64) -> FSplit {
    let k = 2.0 / (4.0 + s).sqrt();
    // modulus t has complement k
    let (kt, _, kmet) = ke_from_complement(k);
    let alpha = (1.0 + 0.5 * s) * k;
    let beta = 2.0 / k;
    let w = (2.0 / PI) * (alpha * kt - beta * kmet);
    let a = -0.5 * w;
    let f = f_elliptic(s);
    FSplit { a, b: f - a * s.ln(), one_minus_w: 1.0 - w }
}

pub(crate) fn f_split(s: f64) -> FSplit {
    if s <= SWITCH_RADIUS {
        f_split_series(s)
    } else {
        f_split_closed(s)
    }
}

/// `F'(s)` in closed form.
pub(crate) fn f_prime(s: f64) -> f64 {
    let kp2 = s / (4.0 + s);
    let kp = kp2.sqrt();
    let k = 2.0 / (4.0 + s).sqrt();
    let (ke, ee, kme) = ke_from_complement(kp);
    let dk = -k * k * k / 8.0;
    let alpha = (1.0 + 0.5 * s) * k;
    let beta = 2.0 / k;
    let dalpha = 0.5 * k + (1.0 + 0.5 * s) * dk;
    let dbeta = -2.0 / (k * k) * dk;
    let dkdk = (ee - kp2 * ke) / (k * kp2);
    let dedk = -kme / k;
    dalpha * ke + alpha * dkdk * dk - dbeta * ee - beta * dedk * dk
}

/// `h(s) = F(s) + ½ log s − log 8 + 2`.
pub fn h_remainder(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("h requires s > 0, got {s}")));
    }
    let sp = f_split(s);
    if s <= SWITCH_RADIUS {
        Ok(0.5 * sp.one_minus_w * s.ln() + (sp.b - (8.0f64.ln() - 2.0)))
    } else {
        Ok(f_elliptic(s) + 0.5 * s.ln() - 8.0f64.ln() + 2.0)
    }
}

/// Eigenvalue of `f ↦ ∫ log|x−y| f(y) dl(y)` on a circle of radius `rho`
/// for the Fourier mode `e^{2πinθ}`.
pub fn log_circle_multiplier(n: i64, rho: f64) -> f64 {
    if n == 0 {
        2.0 * PI * rho * rho.ln()
    } else {
        -PI * rho / (n.unsigned_abs() as f64)
    }
}

/// Split of `K(k)` in the complementary parameter `m' = k'²`:
/// `K(k) = P(m')·(log 4 − ½ log m') + Q(m')`, with derivatives in `m'`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KSplit {
    pub p: f64,
    pub q: f64,
    pub dp: f64,
    pub dq: f64,
}

pub(crate) fn k_split(mp: f64) -> KSplit {
    if mp <= SWITCH_RADIUS {
        let ls = log_sums(mp, SeriesTruncation::default());
        KSplit { p: ls.s0, q: -2.0 * ls.s1, dp: ls.d0, dq: -2.0 * ls.d1 }
    } else {
        let kappa = mp.sqrt();
        let kc = (1.0 - mp).sqrt();
        // modulus κ (complement kc) and modulus kc (complement κ)
        let (k_kappa, e_kappa, _) = ke_from_complement(kc);
        let (k_k, e_k, _) = ke_from_complement(kappa);
        let p = (2.0 / PI) * k_kappa;
        let dp = (e_kappa - (1.0 - mp) * k_kappa) / (PI * mp * (1.0 - mp));
        let lg = LN_4 - 0.5 * mp.ln();
        let q = k_k - p * lg;
        let dkk = -(e_k - mp * k_k) / (2.0 * (1.0 - mp) * mp);
        let dq = dkk - dp * lg + p / (2.0 * mp);
        KSplit { p, q, dp, dq }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_quad(m: f64) -> f64 {
        quad::integrate(|t: f64| 1.0 / (1.0 - m * m * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 1e-17, 1e-16)
    }

    #[test]
    fn k_and_e_at_zero() {
        assert_eq!(elliptic_k(0.0).unwrap(), FRAC_PI_2);
        assert_eq!(elliptic_e(0.0).unwrap(), FRAC_PI_2);
        assert_eq!(elliptic_e(1.0).unwrap(), 1.0);
    }

    #[test]
    fn k_half_matches_quadrature() {
        let v = elliptic_k(0.5).unwrap();
        assert!((v / k_quad(0.5) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn domain_errors() {
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
        assert!(elliptic_e(1.1).is_err());
        assert!(f_eval(0.0, FMode::Elliptic).is_err());
        assert!(f_eval(0.3, FMode::NearDiagonal).is_err());
        assert!(h_remainder(-1.0).is_err());
        assert!(SeriesTruncation::new(0, 1e-10).is_err());
        assert!(SeriesTruncation::new(5, 0.0).is_err());
    }

    #[test]
    fn derivative_identity_for_e() {
        // E(m) = m(1−m²)K'(m) + (1−m²)K(m)
        let m = 0.7;
        let h = 1e-5;
        let kd = (elliptic_k(m + h).unwrap() - elliptic_k(m - h).unwrap()) / (2.0 * h);
        let rhs = m * (1.0 - m * m) * kd + (1.0 - m * m) * elliptic_k(m).unwrap();
        assert!((elliptic_e(m).unwrap() - rhs).abs() < 1e-8);
    }

    #[test]
    fn log_series_matches_agm() {
        let t: f64 = 0.25;
        let m = (1.0 - t * t).sqrt();
        let s = elliptic_k_log_series(t, SeriesTruncation::default()).unwrap();
        assert!((s - elliptic_k(m).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn f_modes_agree() {
        let q = f_eval(0.5, FMode::Quadrature).unwrap();
        let e = f_eval(0.5, FMode::Elliptic).unwrap();
        assert!((q - e).abs() < 1e-10);
        let n = f_eval(1e-3, FMode::NearDiagonal).unwrap();
        let e = f_eval(1e-3, FMode::Elliptic).unwrap();
        assert!((n - e).abs() < 1e-10);
    }

    #[test]
    fn f_small_s_limit() {
        let s = 1e-6;
        let v = f_eval(s, FMode::NearDiagonal).unwrap() + 0.5 * f64::ln(s);
        assert!((v - (8.0f64.ln() - 2.0)).abs() < 1e-4);
    }

    #[test]
    fn split_is_continuous_at_switch() {
        let below = f_split_series(SWITCH_RADIUS);
        let above = f_split_closed(SWITCH_RADIUS);
        assert!((below.a - above.a).abs() < 1e-13);
        assert!((below.b - above.b).abs() < 1e-13);
        assert!((below.one_minus_w - above.one_minus_w).abs() < 1e-13);
    }

    #[test]
    fn f_prime_matches_differences() {
        for &s in &[1e-3, 0.1, 0.6, 3.0, 20.0] {
            let h = 1e-6 * s;
            let fd = (f_elliptic(s + h) - f_elliptic(s - h)) / (2.0 * h);
            assert!((f_prime(s) / fd - 1.0).abs() < 1e-6, "s={s}");
        }
    }

    #[test]
    fn h_remainder_definition_and_limit() {
        let s = 0.01;
        let direct = f_eval(s, FMode::Elliptic).unwrap() + 0.5 * f64::ln(s) - 8.0f64.ln() + 2.0;
        assert!((h_remainder(s).unwrap() - direct).abs() < 1e-13);
        assert!(h_remainder(1e-10).unwrap().abs() < 1e-8);
    }

    #[test]
    fn k_split_matches_k_and_derivatives() {
        for &mp in &[1e-6, 0.05, 0.2, 0.25, 0.26, 0.5, 0.9] {
            let sp = k_split(mp);
            let kv = ke_from_complement(f64::sqrt(mp)).0;
            assert!((sp.p * (LN_4 - 0.5 * f64::ln(mp)) + sp.q - kv).abs() < 1e-13 * kv, "mp={mp}");
            let h = f64::min(1e-6, 0.5 * mp);
            let a = k_split(mp + h);
            let b = k_split(mp - h);
            if (mp - SWITCH_RADIUS).abs() > 2.0 * h {
                assert!((sp.dp - (a.p - b.p) / (2.0 * h)).abs() < 1e-6 * sp.dp.abs().max(1.0), "mp={mp}");
                assert!((sp.dq - (a.q - b.q) / (2.0 * h)).abs() < 1e-6 * sp.dq.abs().max(1.0), "mp={mp}");
            }
        }
    }

    #[test]
    fn multiplier_values() {
        assert_eq!(log_circle_multiplier(0, 1.0), 0.0);
        assert!((log_circle_multiplier(3, 0.5) + PI * 0.5 / 3.0).abs() < 1e-15);
        assert_eq!(log_circle_multiplier(-3, 0.5), log_circle_multiplier(3, 0.5));
    }
}
