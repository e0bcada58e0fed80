//! Executable invariants of every module.
//!
//! The fast level runs in seconds and covers the formula-level and
//! small-configuration properties. The full level adds the ρ-sweep slope
//! fits, the integrator studies and the ε-sweep.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bodies::{Body, BodyConfiguration};
use crate::boundary::{
    assemble_logsplit_matrix, boundary_integral, kress_weights, make_grid, BoundaryDensity, BoundaryWeight,
    OperatorKind,
};
use crate::coefficients::{
    assemble, body_acceleration, christoffel_gamma, energy_matrix_e, total_energy, AssemblyOptions,
};
use crate::config::RunConfig;
use crate::dynamics::{integrate_body, integrate_pv, poincare_return, steady_velocity, IntegratorControls, Trajectory};
use crate::error::{Error, Result};
use crate::interior::{energy_table, interior_energy_f, interior_energy_fast, scaled_energy};
use crate::kernels::{
    flat_kernel, laplace_ring_kernel, laplace_ring_kernel_grad_y, log_coefficient, smooth_remainder, stream_kernel,
    stream_kernel_grad_y, HalfPlanePoint, KernelKind,
};
use crate::pointvortex::{min_distance, pv_invariants, pv_velocity, PvSystem};
use crate::quad;
use crate::regime::{RegimeKind, RegimeSpec};
use crate::solvers::{flat_potential, normal_velocity, solve_stream, PotentialSolver};
use crate::special::{
    elliptic_e, elliptic_k, elliptic_k_log_series, f_eval, h_remainder, log_circle_multiplier, FMode, SeriesTruncation,
};
use crate::sweep::{prepare, run_epsilon_sweep, static_check};

/// Cross-section radii of the asymptotic studies.
pub const RHO_GRID: [f64; 4] = [0.05, 0.02, 0.01, 0.005];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Fast,
    Full,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Level::Fast),
            "full" => Ok(Level::Full),
            other => Err(Error::Parameter(format!("unknown validation level `{other}` (expected fast or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub detail: String,
    pub seconds: f64,
}

impl Check {
    /// One report line.
    pub fn line(&self) -> String {
        let bounds = match (self.lower, self.upper) {
            (Some(l), Some(u)) => format!("in [{l:.3e}, {u:.3e}]"),
            (Some(l), None) => format!(">= {l:.3e}"),
            (None, Some(u)) => format!("<= {u:.3e}"),
            (None, None) => String::new(),
        };
        let tag = if self.passed { "PASS" } else { "FAIL" };
        let mut s = format!("[{tag}] {:<44} {:>11.4e} {bounds}", self.name, self.value);
        if !self.detail.is_empty() {
            s.push_str(&format!("  ({})", self.detail));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub level: Level,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn summary(&self) -> String {
        format!(
            "validate {:?}: {} checks, {} failed, {:.1} s",
            self.level,
            self.checks.len(),
            self.failures().len(),
            self.seconds
        )
    }
}

/// Measured value and the interval it must fall in.
#[derive(Debug, Clone)]
struct Outcome {
    value: f64,
    lower: Option<f64>,
    upper: Option<f64>,
    detail: String,
}

impl Outcome {
    fn at_most(value: f64, upper: f64) -> Self {
        Self { value, lower: None, upper: Some(upper), detail: String::new() }
    }

    fn at_least(value: f64, lower: f64) -> Self {
        Self { value, lower: Some(lower), upper: None, detail: String::new() }
    }

    fn within(value: f64, lower: f64, upper: f64) -> Self {
        Self { value, lower: Some(lower), upper: Some(upper), detail: String::new() }
    }

    fn holds(ok: bool) -> Self {
        Self::at_least(if ok { 1.0 } else { 0.0 }, 1.0)
    }

    fn with(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

struct Runner {
    checks: Vec<Check>,
    verbose: bool,
}

impl Runner {
    fn run(&mut self, name: &str, f: impl FnOnce() -> Result<Outcome>) {
        let start = Instant::now();
        let (value, lower, upper, detail, passed) = match f() {
            Ok(o) => {
                let ok = o.value.is_finite()
                    && o.lower.map_or(true, |l| o.value >= l)
                    && o.upper.map_or(true, |u| o.value <= u);
                (o.value, o.lower, o.upper, o.detail, ok)
            }
            Err(e) => (f64::NAN, None, None, e.to_string(), false),
        };
        let check =
            Check { name: name.into(), passed, value, lower, upper, detail, seconds: start.elapsed().as_secs_f64() };
        if self.verbose {
            eprintln!("{}", check.line());
        }
        self.checks.push(check);
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Slope of `log|y|` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    fit_slope(&lx, &ly)
}

/// Runs every check of the level; `verbose` echoes lines to stderr as they finish.
pub fn run_validation_suite(level: Level, verbose: bool) -> ValidationReport {
    let start = Instant::now();
    let mut r = Runner { checks: Vec::new(), verbose };
    special_checks(&mut r);
    kernel_checks(&mut r);
    boundary_checks(&mut r);
    solver_checks(&mut r);
    interior_checks(&mut r);
    coefficient_checks(&mut r);
    point_vortex_checks(&mut r);
    regime_checks(&mut r);
    config_checks(&mut r);
    dynamics_checks(&mut r);
    if level == Level::Full {
        slope_checks(&mut r);
        integrator_studies(&mut r);
        limit_studies(&mut r);
    }
    ValidationReport { level, checks: r.checks, seconds: start.elapsed().as_secs_f64() }
}

fn pt(r: f64, z: f64) -> HalfPlanePoint {
    HalfPlanePoint { r, z }
}

/// Body of cross-section radius `rho` centred at `(r, z)`.
fn body(rho: f64, gamma: f64, r: f64, z: f64) -> Body {
    Body::new(PI * r * rho * rho, gamma, r, z)
}

fn ring(rho: f64) -> Result<BodyConfiguration> {
    BodyConfiguration::new(vec![body(rho, 1.0, 1.0, 0.0)])
}

fn pair(rho: f64) -> Result<BodyConfiguration> {
    BodyConfiguration::new(vec![body(rho, 1.0, 1.0, 0.0), body(rho, -0.6, 1.2, 0.25)])
}

fn no_derivatives() -> AssemblyOptions {
    AssemblyOptions { derivatives: false, ..Default::default() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn max_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(f64::MIN_POSITIVE)
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

const PAIRS: [((f64, f64), (f64, f64)); 4] =
    [((1.0, 0.0), (1.3, 0.4)), ((0.5, -0.2), (2.0, 1.0)), ((1.0, 0.0), (1.02, 0.01)), ((3.0, 2.0), (0.2, -1.0))];

fn special_checks(r: &mut Runner) {
    r.run("special.elliptic_k_vs_quadrature", || {
        let mut worst = 0.0f64;
        for m in linspace(0.0, 0.98, 50) {
            let oracle =
                quad::integrate(|t| 1.0 / (1.0 - m * m * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 1e-17, 1e-16);
            worst = worst.max(rel(elliptic_k(m)?, oracle));
        }
        Ok(Outcome::at_most(worst, 1e-13))
    });
    r.run("special.elliptic_e_vs_quadrature", || {
        let mut worst = 0.0f64;
        for m in linspace(0.0, 0.98, 50) {
            let oracle = quad::integrate(|t| (1.0 - m * m * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 1e-17, 1e-16);
            worst = worst.max(rel(elliptic_e(m)?, oracle));
        }
        Ok(Outcome::at_most(worst, 1e-13))
    });
    r.run("special.elliptic_monotone", || {
        let ks: Vec<f64> = linspace(0.0, 0.999, 100).map(elliptic_k).collect::<Result<_>>()?;
        let es: Vec<f64> = linspace(0.0, 1.0, 100).map(elliptic_e).collect::<Result<_>>()?;
        Ok(Outcome::holds(ks.windows(2).all(|w| w[1] > w[0]) && es.windows(2).all(|w| w[1] < w[0])))
    });
    r.run("special.k_log_series", || {
        let mut worst = 0.0f64;
        for t in linspace(0.05, 0.5, 50) {
            let m = (1.0 - t * t).sqrt();
            worst = worst.max((elliptic_k_log_series(t, SeriesTruncation::default())? - elliptic_k(m)?).abs());
        }
        Ok(Outcome::at_most(worst, 1e-10))
    });
    r.run("special.f_elliptic_vs_quadrature", || {
        let mut worst = 0.0f64;
        for e in linspace(-6.0, 0.0, 40) {
            let s = 10f64.powf(e);
            worst = worst.max(rel(f_eval(s, FMode::Elliptic)?, f_eval(s, FMode::Quadrature)?));
        }
        Ok(Outcome::at_most(worst, 1e-10))
    });
    r.run("special.f_near_diagonal_vs_elliptic", || {
        let mut worst = 0.0f64;
        for e in linspace(-8.0, 0.25f64.log10(), 30) {
            let s = 10f64.powf(e);
            worst = worst.max(rel(f_eval(s, FMode::NearDiagonal)?, f_eval(s, FMode::Elliptic)?));
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
    r.run("special.h_remainder_vanishes", || Ok(Outcome::at_most(h_remainder(1e-10)?.abs(), 1e-8)));
    r.run("special.log_circle_multiplier", || {
        let rho: f64 = 0.37;
        let n = 128;
        let kw = kress_weights(n);
        let mut worst = 0.0f64;
        for mode in 0..16i64 {
            let mut acc = 0.0;
            for (j, w) in kw.iter().enumerate() {
                let a = 2.0 * PI * j as f64 / n as f64;
                acc += rho * 0.5 * (w + 2.0 * PI / n as f64 * 2.0 * rho.ln()) * (mode as f64 * a).cos();
            }
            worst = worst.max((acc - log_circle_multiplier(mode, rho)).abs());
        }
        Ok(Outcome::at_most(worst, 1e-8))
    });
}

fn kernel_checks(r: &mut Runner) {
    r.run("kernels.stream_symmetric", || {
        let mut worst = 0.0f64;
        for ((a, b), (c, d)) in PAIRS {
            worst = worst.max((stream_kernel(pt(a, b), pt(c, d))? - stream_kernel(pt(c, d), pt(a, b))?).abs());
        }
        Ok(Outcome::at_most(worst, 0.0))
    });
    r.run("kernels.stream_vs_quadrature", || {
        let mut worst = 0.0f64;
        for ((a, b), (c, d)) in PAIRS {
            let rr = a * c;
            let s = ((a - c).powi(2) + (b - d).powi(2)) / rr;
            let oracle = -rr.sqrt() * f_eval(s, FMode::Quadrature)? / (2.0 * PI);
            worst = worst.max(rel(stream_kernel(pt(a, b), pt(c, d))?, oracle));
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
    r.run("kernels.z_translation", || {
        let mut worst = 0.0f64;
        for ((a, b), (c, d)) in PAIRS {
            for dz in [0.3, -1.7] {
                let k0 = stream_kernel(pt(a, b), pt(c, d))?;
                let k1 = stream_kernel(pt(a, b + dz), pt(c, d + dz))?;
                let s0 = laplace_ring_kernel(pt(a, b), pt(c, d))?;
                let s1 = laplace_ring_kernel(pt(a, b + dz), pt(c, d + dz))?;
                worst = worst.max(rel(k1, k0)).max(rel(s1, s0));
            }
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
    r.run("kernels.gradients_vs_differences", || {
        let h = 1e-5;
        let mut worst = 0.0f64;
        for ((a, b), (c, d)) in PAIRS.iter().take(2).chain(PAIRS.iter().skip(3)) {
            let x = pt(*a, *b);
            let gk = stream_kernel_grad_y(x, pt(*c, *d))?;
            let gs = laplace_ring_kernel_grad_y(x, pt(*c, *d))?;
            let fk = [
                (stream_kernel(x, pt(c + h, *d))? - stream_kernel(x, pt(c - h, *d))?) / (2.0 * h),
                (stream_kernel(x, pt(*c, d + h))? - stream_kernel(x, pt(*c, d - h))?) / (2.0 * h),
            ];
            let fs = [
                (laplace_ring_kernel(x, pt(c + h, *d))? - laplace_ring_kernel(x, pt(c - h, *d))?) / (2.0 * h),
                (laplace_ring_kernel(x, pt(*c, d + h))? - laplace_ring_kernel(x, pt(*c, d - h))?) / (2.0 * h),
            ];
            let nk = gk[0].hypot(gk[1]);
            let ns = gs[0].hypot(gs[1]);
            worst = worst.max((gk[0] - fk[0]).hypot(gk[1] - fk[1]) / nk).max((gs[0] - fs[0]).hypot(gs[1] - fs[1]) / ns);
        }
        Ok(Outcome::at_most(worst, 1e-6))
    });
    r.run("kernels.split_continuous_at_diagonal", || {
        let mut worst = 0.0f64;
        for kind in [KernelKind::Stream, KernelKind::SingleLayer] {
            for x in [pt(1.0, 0.0), pt(0.4, 0.3)] {
                let q0 = smooth_remainder(kind, x, x);
                for k in 0..8 {
                    let a = PI * k as f64 / 4.0;
                    let y = pt(x.r + 1e-7 * a.cos(), x.z + 1e-7 * a.sin());
                    let kv = match kind {
                        KernelKind::Stream => stream_kernel(x, y)?,
                        KernelKind::SingleLayer => laplace_ring_kernel(x, y)?,
                    };
                    let rem = kv - log_coefficient(kind, x, y) * x.dist(&y).ln();
                    worst = worst.max((rem - q0).abs() / (1.0 + q0.abs()));
                }
            }
        }
        Ok(Outcome::at_most(worst, 1e-5))
    });
    r.run("kernels.flat_close_to_stream", || {
        // near a point of radius R the two kernels share the log and constant terms
        let (x, y) = (pt(1.2 - 5e-4, 0.1), pt(1.2 + 5e-4, 0.1));
        let diff = (stream_kernel(x, y)? - flat_kernel(1.2, x, y)?).abs();
        Ok(Outcome::at_most(diff, 1e-2).with(format!("|K - Kflat| at separation 1e-3: {diff:.2e}")))
    });
}

fn boundary_checks(r: &mut Runner) {
    r.run("boundary.flat_mode0_multiplier", || {
        let (rho, big_r) = (0.01, 1.2);
        let cfg = BodyConfiguration::new(vec![body(rho, 1.0, big_r, 0.0)])?;
        let g = make_grid(&cfg, 64)?;
        let n = g.len() as f64;
        let flat = assemble_logsplit_matrix(&g, OperatorKind::Flat).sum() / n;
        let stream = assemble_logsplit_matrix(&g, OperatorKind::Stream).sum() / n;
        let expect = big_r * rho * (rho.ln() - 8f64.ln() + 2.0 - big_r.ln());
        let v = ((flat - stream) / (big_r * rho)).abs().max(((flat - expect) / (big_r * rho)).abs());
        Ok(Outcome::at_most(v, 1e-2).with(format!("flat {flat:.6e}, stream {stream:.6e}")))
    });
    r.run("boundary.flat_fourier_modes", || {
        let (rho, big_r) = (0.1, 1.3);
        let g = make_grid(&BodyConfiguration::new(vec![body(rho, 1.0, big_r, 0.0)])?, 64)?;
        let a = assemble_logsplit_matrix(&g, OperatorKind::Flat);
        let mut worst = 0.0f64;
        for n in 1..6 {
            let f = BoundaryDensity::from_fn(&g, |_, th, _| (2.0 * PI * n as f64 * th).cos());
            let out = &a * DVector::from_column_slice(f.values());
            for (i, fi) in f.values().iter().enumerate() {
                worst = worst.max((out[i] + big_r * rho / (2.0 * n as f64) * fi).abs());
            }
        }
        Ok(Outcome::at_most(worst, 1e-13))
    });
    r.run("boundary.stream_matrix_symmetric", || {
        let cfg = BodyConfiguration::new(vec![body(0.05, 1.0, 1.0, 0.0), body(0.05, 1.0, 1.1, 0.3)])?;
        let a = assemble_logsplit_matrix(&make_grid(&cfg, 32)?, OperatorKind::Stream);
        Ok(Outcome::at_most(max_rel_diff(&a, &a.transpose()), 1e-8))
    });
    r.run("boundary.z_translation", || {
        let cfg = pair(0.03)?;
        let (g0, g1) = (make_grid(&cfg, 32)?, make_grid(&cfg.translated_z(0.77), 32)?);
        let mut worst = 0.0f64;
        for kind in
            [OperatorKind::Stream, OperatorKind::SingleLayer, OperatorKind::SingleLayerNormal, OperatorKind::Flat]
        {
            worst = worst.max(max_rel_diff(&assemble_logsplit_matrix(&g0, kind), &assemble_logsplit_matrix(&g1, kind)));
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
    r.run("boundary.refinement_converged", || {
        let cfg = pair(0.05)?;
        let density = |th: f64| 1.0 + 0.3 * (2.0 * PI * th).cos() + 0.2 * (4.0 * PI * th).sin();
        let mut worst = 0.0f64;
        for kind in [OperatorKind::Stream, OperatorKind::SingleLayer] {
            let apply = |n: usize| -> Result<DVector<f64>> {
                let g = make_grid(&cfg, n)?;
                let f = BoundaryDensity::from_fn(&g, |_, th, _| density(th));
                Ok(assemble_logsplit_matrix(&g, kind) * DVector::from_column_slice(f.values()))
            };
            let (coarse, fine) = (apply(64)?, apply(128)?);
            // node k of body b on the coarse grid is node 2k on the fine grid
            let scale = coarse.amax();
            for (i, c) in coarse.iter().enumerate() {
                let (b, k) = (i / 64, i % 64);
                worst = worst.max((c - fine[b * 128 + 2 * k]).abs() / scale);
            }
        }
        Ok(Outcome::at_most(worst, 1e-8))
    });
}

fn solver_checks(r: &mut Runner) {
    let three = || {
        BodyConfiguration::new(vec![body(0.02, 1.0, 1.0, 0.0), body(0.03, 1.0, 1.2, 0.2), body(0.01, 1.0, 0.9, -0.3)])
    };
    r.run("solvers.stream_residual", || {
        let s = solve_stream(&make_grid(&three()?, 48)?)?;
        Ok(Outcome::at_most(s.residual, 1e-10))
    });
    r.run("solvers.circulation_constraints", || {
        let g = make_grid(&three()?, 48)?;
        let s = solve_stream(&g)?;
        let mut worst = 0.0f64;
        for (i, mu) in s.mu.iter().enumerate() {
            for (j, f) in boundary_integral(&g, mu, BoundaryWeight::One).iter().enumerate() {
                worst = worst.max((f - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
    r.run("solvers.constants_symmetric", || {
        let c = solve_stream(&make_grid(&three()?, 48)?)?.c;
        Ok(Outcome::at_most((&c - c.transpose()).amax(), 1e-8))
    });
    r.run("solvers.single_body_energy_positive", || {
        let c = solve_stream(&make_grid(&ring(0.02)?, 32)?)?.c;
        Ok(Outcome::at_least(-0.5 * c[(0, 0)], f64::MIN_POSITIVE))
    });
    r.run("solvers.z_translation", || {
        let cfg = pair(0.02)?;
        let (g0, g1) = (make_grid(&cfg, 32)?, make_grid(&cfg.translated_z(-0.45), 32)?);
        let (s0, s1) = (solve_stream(&g0)?, solve_stream(&g1)?);
        let (p0, p1) = (PotentialSolver::new(&g0)?.solve_all()?, PotentialSolver::new(&g1)?.solve_all()?);
        let mut worst = max_rel_diff(&s0.c, &s1.c);
        for (a, b) in s0.mu.iter().zip(&s1.mu) {
            worst = worst.max(max_rel_diff(
                &DMatrix::from_column_slice(a.len(), 1, a.values()),
                &DMatrix::from_column_slice(b.len(), 1, b.values()),
            ));
        }
        for (a, b) in p0.iter().zip(&p1) {
            let (ta, tb) = (a.trace.values(), b.trace.values());
            worst = worst.max(max_rel_diff(
                &DMatrix::from_column_slice(ta.len(), 1, ta),
                &DMatrix::from_column_slice(tb.len(), 1, tb),
            ));
        }
        Ok(Outcome::at_most(worst, 1e-10))
    });
    r.run("solvers.neumann_data_compatible", || {
        let g = make_grid(&pair(0.05)?, 32)?;
        let mut worst = 0.0f64;
        for i in 0..2 {
            for t in [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]] {
                let u = normal_velocity(&g, i, t)?;
                worst = worst.max(boundary_integral(&g, &u, BoundaryWeight::R).iter().sum::<f64>().abs());
            }
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
    r.run("solvers.incompatible_data_rejected", || {
        let g = make_grid(&ring(0.1)?, 32)?;
        let ps = PotentialSolver::new(&g)?;
        let bad = BoundaryDensity::from_fn(&g, |_, _, _| 1.0);
        Ok(Outcome::holds(matches!(ps.solve_data(bad), Err(Error::Consistency(_)))))
    });
    r.run("solvers.potential_vs_flat_dipole", || {
        let rho = 0.01;
        let g = make_grid(&ring(rho)?, 64)?;
        let ps = PotentialSolver::new(&g)?;
        let mut worst = 0.0f64;
        for t in [[1.0, 0.0], [0.0, 1.0]] {
            let tr = ps.solve(0, t)?.trace;
            let mean = tr.values().iter().sum::<f64>() / tr.len() as f64;
            for (v, x) in tr.values().iter().zip(&g.nodes) {
                worst = worst.max((v - mean - flat_potential([1.0, 0.0], rho, t, [x.r, x.z])?).abs());
            }
        }
        Ok(Outcome::at_most(worst / rho, 0.05).with("max deviation relative to rho"))
    });
    r.run("solvers.flat_dipole_normal_derivative", || {
        let (q, rho, t) = ([1.0, 0.2], 0.3, [0.4, -0.7]);
        let h = 1e-3;
        let mut worst = 0.0f64;
        for k in 0..12 {
            let a = 2.0 * PI * k as f64 / 12.0;
            let (s, c) = a.sin_cos();
            let at = |d: f64| flat_potential(q, rho, t, [q[0] + (rho + d) * c, q[1] + (rho + d) * s]);
            // sixth-order central difference along the normal
            let dn = (45.0 * (at(h)? - at(-h)?) - 9.0 * (at(2.0 * h)? - at(-2.0 * h)?)
                + (at(3.0 * h)? - at(-3.0 * h)?))
                / (60.0 * h);
            worst = worst.max((dn - (t[0] * c + t[1] * s)).abs());
            worst = worst.max((at(0.0)? + t[0] * rho * c + t[1] * rho * s).abs());
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
}

fn interior_checks(r: &mut Runner) {
    r.run("interior.flat_limit_pi", || Ok(Outcome::at_most((energy_table()?.eval(0.0).0 - PI).abs(), 1e-6)));
    r.run("interior.table_vs_direct", || {
        let (big_r, rho) = (1.0, 0.3);
        let v = PI * big_r * rho * rho;
        Ok(Outcome::at_most(rel(interior_energy_fast(big_r, v)?.0, interior_energy_f(big_r, v)?), 1e-9))
    });
    r.run("interior.resolution_agreement", || {
        let (a, b) = (scaled_energy(0.2, 32, 64)?, scaled_energy(0.2, 64, 128)?);
        Ok(Outcome::at_most(rel(a, b), 1e-3).with("three matching digits under refinement"))
    });
    r.run("interior.geometry_rejected", || {
        Ok(Outcome::holds(matches!(interior_energy_f(0.1, 1.0), Err(Error::Domain(_)))))
    });
    r.run("interior.z_block_is_volume", || {
        let cfg = pair(0.02)?;
        let (e, _) = energy_matrix_e(&cfg)?;
        let ok = cfg
            .bodies
            .iter()
            .enumerate()
            .all(|(i, b)| e[(2 * i + 1, 2 * i + 1)] == b.volume && e[(2 * i, 2 * i + 1)] == 0.0);
        Ok(Outcome::holds(ok))
    });
}

fn coefficient_checks(r: &mut Runner) {
    r.run("coefficients.inertia_spd", || {
        let c = assemble(&pair(0.02)?, no_derivatives())?;
        let (lo, _) = c.inertia_spectrum();
        let sym = (&c.m - c.m.transpose()).amax();
        Ok(Outcome::at_least(if sym == 0.0 { lo } else { -1.0 }, f64::MIN_POSITIVE)
            .with(format!("lambda_min {lo:.3e}, raw M asymmetry {:.2e}", c.diagnostics.m_asymmetry)))
    });
    r.run("coefficients.gyro_antisymmetric", || {
        let c = assemble(&pair(0.02)?, no_derivatives())?;
        Ok(Outcome::at_most((&c.a + c.a.transpose()).amax(), 0.0))
    });
    r.run("coefficients.gyro_inverse_bound", || {
        let cfg = pair(0.02)?;
        let c = assemble(&cfg, no_derivatives())?;
        let inv = c.a.clone().try_inverse().ok_or_else(|| Error::Consistency("A singular".into()))?;
        let norm = inv.singular_values().max();
        let bound = 2.0 / cfg.bodies.iter().map(|b| b.center.r * b.gamma.abs()).fold(f64::INFINITY, f64::min);
        Ok(Outcome::at_most(norm / bound, 1.0).with(format!("||A^-1|| = {norm:.4}, bound {bound:.4}")))
    });
    r.run("coefficients.force_quadratic_in_gamma", || {
        let cfg = pair(0.02)?;
        let c1 = assemble(&cfg, no_derivatives())?;
        let c2 = assemble(&cfg.with_gammas(&[2.0, -1.2]), no_derivatives())?;
        Ok(Outcome::at_most((&c2.g - &c1.g * 4.0).amax() / c2.g.amax(), 1e-12))
    });
    r.run("coefficients.zero_circulation", || {
        let c = assemble(&pair(0.02)?.with_gammas(&[0.0, 0.0]), no_derivatives())?;
        let acc = body_acceleration(&[0.0; 4], &c)?;
        Ok(Outcome::holds(
            c.a.amax() == 0.0
                && c.g.amax() == 0.0
                && acc.iter().all(|v| *v == 0.0)
                && total_energy(&[0.0; 4], &c)? == 0.0,
        ))
    });
    r.run("coefficients.axial_force_balance", || {
        let c = assemble(&pair(0.02)?, no_derivatives())?;
        Ok(Outcome::at_most((c.g[1] + c.g[3]).abs() / c.g.amax(), 1e-8).with("sum of Z components of G"))
    });
    r.run("coefficients.force_is_energy_gradient", || {
        let cfg = pair(0.02)?;
        let c0 = assemble(&cfg, no_derivatives())?;
        let q = cfg.positions();
        let g = DVector::from_column_slice(&cfg.gammas());
        let h = 1e-5;
        let mut worst = 0.0f64;
        for w in 0..4 {
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[w] += h;
            qm[w] -= h;
            let cp = assemble(&cfg.with_positions(&qp)?, no_derivatives())?.c;
            let cm = assemble(&cfg.with_positions(&qm)?, no_derivatives())?.c;
            let dc = g.dot(&((cp - cm) * &g)) / (2.0 * h);
            worst = worst.max((0.5 * dc - c0.g[w]).abs() / c0.g.amax());
        }
        Ok(Outcome::at_most(worst, 1e-4))
    });
    r.run("coefficients.christoffel_identity", || {
        let c = assemble(&pair(0.03)?, AssemblyOptions::default())?;
        let (t, s) = ([0.3, -0.2, 0.5, 0.1], [-0.4, 0.7, 0.2, -0.3]);
        let gam = c.christoffel(&t, &s)?;
        let dm = c.dm.as_ref().ok_or_else(|| Error::Consistency("no mass derivatives".into()))?;
        let dmt = dm.iter().zip(t).fold(DMatrix::zeros(4, 4), |acc, (d, tw)| acc + d * tw);
        let sv = DVector::from_column_slice(&s);
        let rhs = 0.5 * sv.dot(&(dmt * &sv));
        Ok(Outcome::at_most(rel(gam.dot(&sv), rhs), 1e-10))
    });
    r.run("coefficients.z_translation", || {
        let cfg = pair(0.02)?;
        let (a, b) = (assemble(&cfg, no_derivatives())?, assemble(&cfg.translated_z(0.37), no_derivatives())?);
        let worst =
            [max_rel_diff(&a.m, &b.m), max_rel_diff(&a.a, &b.a), max_rel_diff(&a.c, &b.c), max_rel_diff(&a.e, &b.e)]
                .into_iter()
                .fold((&a.g - &b.g).amax() / a.g.amax(), f64::max);
        Ok(Outcome::at_most(worst, 1e-10))
    });
    r.run("coefficients.acceleration_quadratic_in_gamma", || {
        let cfg = pair(0.02)?;
        let a1 = body_acceleration(&[0.0; 4], &assemble(&cfg, no_derivatives())?)?;
        let a2 = body_acceleration(&[0.0; 4], &assemble(&cfg.with_gammas(&[2.0, -1.2]), no_derivatives())?)?;
        let scale = a2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Outcome::at_most(a1.iter().zip(&a2).map(|(x, y)| (4.0 * x - y).abs()).fold(0.0, f64::max) / scale, 1e-10))
    });
    r.run("coefficients.single_ring_energy", || {
        let c = assemble(&ring(0.02)?, no_derivatives())?;
        let e = total_energy(&[0.0, 0.0], &c)?;
        Ok(Outcome::at_least(if (e + 0.5 * c.c[(0, 0)]).abs() < 1e-15 { e } else { -1.0 }, f64::MIN_POSITIVE))
    });
}

/// Direct transcription of both limit fields.
fn pv_reference(system: PvSystem, gamma: &[f64], q: &[f64], r0: f64) -> Vec<f64> {
    let k = gamma.len();
    (0..k)
        .flat_map(|i| {
            let (mut vr, mut vz) = (0.0, 0.0);
            for j in (0..k).filter(|&j| j != i) {
                let (a, b) = (q[2 * i] - q[2 * j], q[2 * i + 1] - q[2 * j + 1]);
                let d2 = a * a + b * b;
                vr += gamma[j] / (2.0 * PI) * (-b) / d2;
                vz += gamma[j] / (2.0 * PI) * a / d2;
            }
            vz += match system {
                PvSystem::J1 => -gamma[i] / (4.0 * PI * r0),
                PvSystem::J2 => q[2 * i] * gamma[i] / (4.0 * PI * r0 * r0),
            };
            [vr, vz]
        })
        .collect()
}

const PV_STATES: [[f64; 6]; 3] =
    [[0.1, 0.3, -0.4, 0.2, 0.25, -0.5], [1.0, -1.0, 0.0, 0.5, -0.7, 0.1], [0.05, 0.0, -0.05, 0.02, 0.3, 0.3]];
const PV_GAMMA: [f64; 3] = [1.0, 0.7, -0.4];

fn point_vortex_checks(r: &mut Runner) {
    r.run("pointvortex.single_drift", || {
        let v = pv_velocity(PvSystem::J1, &[1.7], &[0.3, -2.0], 1.3)?;
        Ok(Outcome::at_most((v[0].abs()).max((v[1] + 1.7 / (4.0 * PI * 1.3)).abs()), 0.0))
    });
    r.run("pointvortex.j2_point_symmetry", || {
        let v = pv_velocity(PvSystem::J2, &[1.0, 1.0], &[0.3, 0.2, -0.3, -0.2], 1.0)?;
        Ok(Outcome::at_most((v[0] + v[2]).abs().max((v[1] + v[3]).abs()), 1e-15))
    });
    r.run("pointvortex.matches_transcription", || {
        let mut worst = 0.0f64;
        for sys in [PvSystem::J1, PvSystem::J2] {
            for q in PV_STATES {
                let (a, b) = (pv_velocity(sys, &PV_GAMMA, &q, 1.1)?, pv_reference(sys, &PV_GAMMA, &q, 1.1));
                worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x - y).abs() / (1.0 + y.abs())));
            }
        }
        Ok(Outcome::at_most(worst, 1e-14))
    });
    r.run("pointvortex.hamiltonian_stationary", || {
        let mut worst = 0.0f64;
        for sys in [PvSystem::J1, PvSystem::J2] {
            for q in PV_STATES {
                let v = pv_velocity(sys, &PV_GAMMA, &q, 1.1)?;
                let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                let h = 1e-6 / vn;
                let shift = |s: f64| q.iter().zip(&v).map(|(a, b)| a + s * b).collect::<Vec<_>>();
                let dh = (pv_invariants(sys, &PV_GAMMA, &shift(h), 1.1)?.0
                    - pv_invariants(sys, &PV_GAMMA, &shift(-h), 1.1)?.0)
                    / (2.0 * h);
                let hv = pv_invariants(sys, &PV_GAMMA, &q, 1.1)?.0;
                worst = worst.max(dh.abs() / (hv.abs() * vn));
            }
        }
        Ok(Outcome::at_most(worst, 1e-8))
    });
    r.run("pointvortex.invariants_conserved", || {
        let mut worst = 0.0f64;
        let mut p_worst = 0.0f64;
        for sys in [PvSystem::J1, PvSystem::J2] {
            let t = integrate_pv(sys, &PV_GAMMA, &PV_STATES[0], 1.1, 2.0, &IntegratorControls::point_vortex())?;
            let h0 = t.energy[0];
            worst = t.energy.iter().fold(worst, |m, h| m.max((h - h0).abs()));
            p_worst = p_worst.max(t.impulse_drift());
        }
        Ok(Outcome::at_most(worst.max(p_worst * 100.0), 1e-8)
            .with(format!("H drift {worst:.2e}, P drift {p_worst:.2e} (P scaled by 100)")))
    });
    r.run("pointvortex.single_hamiltonian_constant", || {
        let t = integrate_pv(PvSystem::J2, &[1.0], &[0.2, 0.0], 1.0, 3.0, &IntegratorControls::point_vortex())?;
        Ok(Outcome::at_most(t.energy_drift(), 0.0))
    });
    r.run("pointvortex.time_reversal", || {
        let mut worst = 0.0f64;
        let c = IntegratorControls::point_vortex();
        for sys in [PvSystem::J1, PvSystem::J2] {
            let fwd = integrate_pv(sys, &PV_GAMMA, &PV_STATES[0], 1.1, 1.5, &c)?;
            let back_gamma: Vec<f64> = PV_GAMMA.iter().map(|g| -g).collect();
            let end = fwd.q.last().ok_or_else(|| Error::Consistency("empty trajectory".into()))?;
            let back = integrate_pv(sys, &back_gamma, end, 1.1, 1.5, &c)?;
            let last = back.q.last().ok_or_else(|| Error::Consistency("empty trajectory".into()))?;
            worst = last.iter().zip(&PV_STATES[0]).fold(worst, |m, (a, b)| m.max((a - b).abs()));
        }
        Ok(Outcome::at_most(worst, 1e-8))
    });
    r.run("pointvortex.pair_period", || {
        let d: f64 = 0.5;
        let ret = poincare_return(
            PvSystem::J1,
            &[1.0, 1.0],
            &[0.0, 0.25, 0.0, -0.25],
            1.0,
            10.0,
            &IntegratorControls::point_vortex(),
        )?
        .ok_or_else(|| Error::Consistency("no return".into()))?;
        Ok(Outcome::at_most(rel(ret.period, 2.0 * PI * PI * d * d), 1e-8))
    });
    r.run("pointvortex.same_sign_no_blowup", || {
        let q0 = [0.1, 0.3, -0.4, 0.2, 0.25, -0.5];
        let t = integrate_pv(PvSystem::J1, &[1.0, 0.7, 0.4], &q0, 1.0, 30.0, &IntegratorControls::point_vortex())?;
        let dmin = t.q.iter().map(|q| min_distance(q)).fold(f64::INFINITY, f64::min);
        let ok = t.termination.completed();
        Ok(Outcome::at_least(if ok { dmin / min_distance(&q0) } else { 0.0 }, 0.1)
            .with("smallest distance relative to the initial one"))
    });
    r.run("pointvortex.deterministic", || {
        let c = IntegratorControls::point_vortex();
        let a = integrate_pv(PvSystem::J2, &PV_GAMMA, &PV_STATES[1], 1.0, 1.0, &c)?;
        let b = integrate_pv(PvSystem::J2, &PV_GAMMA, &PV_STATES[1], 1.0, 1.0, &c)?;
        Ok(Outcome::holds(a == b))
    });
}

fn regime_checks(r: &mut Runner) {
    r.run("regime.round_trip", || {
        let mut worst = 0.0f64;
        for kind in [RegimeKind::Log, RegimeKind::SqrtLog] {
            let spec = RegimeSpec::new(kind, 1e-3, 1.0, 0.5)?;
            let (qt, qd) = ([0.3, -0.2, -0.4, 0.7], [0.1, 0.2, -0.3, 0.05]);
            let (cfg, v) = spec.lift(&[PI, PI], &[1.0, 1.0], &qt, &qd)?;
            let (q2, d2) = spec.project(&cfg, &v);
            worst = qt.iter().chain(&qd).zip(q2.iter().chain(&d2)).fold(worst, |m, (a, b)| m.max((a - b).abs()));
        }
        Ok(Outcome::at_most(worst, 1e-12))
    });
    r.run("regime.lifted_gaps", || {
        let spec = RegimeSpec::new(RegimeKind::Log, 1e-3, 1.0, 0.0)?;
        let qt = [0.3, -0.2, -0.4, 0.7];
        let (cfg, _) = spec.lift(&[PI, PI], &[1.0, 1.0], &qt, &[0.0; 4])?;
        let gap = cfg.bodies[0].center.dist(&cfg.bodies[1].center);
        Ok(Outcome::at_most(rel(gap * spec.log_factor(), (0.7f64).hypot(0.9)), 1e-12))
    });
    r.run("regime.drift_magnitude", || {
        let spec = RegimeSpec::new(RegimeKind::SqrtLog, 1e-3, 1.3, 0.0)?;
        let d = spec.drift(2);
        let expect = spec.log_factor().sqrt() / (4.0 * PI * 1.3);
        Ok(Outcome::at_most((d[1] - expect).abs().max((d[3] - expect).abs()).max(d[0].abs()), 1e-15))
    });
    r.run("regime.inadmissible_lift_rejected", || {
        let spec = RegimeSpec::new(RegimeKind::Log, 0.3, 1.0, 0.0)?;
        let res = spec.lift(&[100.0, 100.0], &[1.0, 1.0], &[0.0, 0.1, 0.0, -0.1], &[0.0; 4]);
        Ok(Outcome::holds(matches!(res, Err(Error::Configuration(_)))))
    });
}

fn schema_path(v: &serde_json::Value) -> Option<String> {
    match RunConfig::from_json(&v.to_string()) {
        Err(Error::Schema { path, .. }) => Some(path),
        _ => None,
    }
}

fn config_checks(r: &mut Runner) {
    r.run("config.round_trip", || {
        let c = RunConfig::leapfrog();
        Ok(Outcome::holds(RunConfig::from_json(&c.to_json())? == c))
    });
    r.run("config.condition_violations_rejected", || {
        let base: serde_json::Value = serde_json::from_str(&RunConfig::leapfrog().to_json())?;
        let mut cases = Vec::new();
        let mut v = base.clone();
        v["bodies"][0]["gamma"] = 0.0.into();
        cases.push((v, "bodies[0].gamma"));
        let mut v = base.clone();
        v["regime"] = "regime_sqrtlog".into();
        v["bodies"][1]["gamma"] = 2.0.into();
        cases.push((v, "bodies[1].gamma"));
        let mut v = base.clone();
        v["bodies"][1]["qtilde0"] = v["bodies"][0]["qtilde0"].clone();
        cases.push((v, "bodies[1].qtilde0"));
        let mut v = base.clone();
        v["epsilon"] = 0.3.into();
        v["bodies"][1]["volume"] = 100.0.into();
        cases.push((v, "bodies"));
        let mut v = base.clone();
        v["bodies"][1]["gamma"] = "one".into();
        cases.push((v, "bodies[1].gamma"));
        let bad: Vec<&str> =
            cases.iter().filter(|(v, p)| schema_path(v).as_deref() != Some(*p)).map(|(_, p)| *p).collect();
        Ok(Outcome::holds(bad.is_empty()).with(if bad.is_empty() {
            String::new()
        } else {
            format!("wrong path for {bad:?}")
        }))
    });
}

fn dynamics_checks(r: &mut Runner) {
    r.run("dynamics.steady_ring_short", || {
        let rho = 0.02;
        let cfg = ring(rho)?;
        let c = assemble(&cfg, AssemblyOptions { nodes: 16, ..Default::default() })?;
        let mut v = steady_velocity(&c)?;
        v[0] = 0.0;
        let t = integrate_body(&cfg, &v, 0.05, &IntegratorControls { outputs: 10, ..Default::default() })?;
        Ok(Outcome::at_most(steady_deviation(&t, &v)?, 1e-5))
    });
    r.run("dynamics.csv_round_trip", || {
        let t = integrate_pv(
            PvSystem::J2,
            &[1.0, 1.0],
            &[0.0, 0.2, 0.1, -0.2],
            1.0,
            1.0,
            &IntegratorControls { outputs: 5, ..IntegratorControls::point_vortex() },
        )?;
        let mut buf = Vec::new();
        t.write_csv(&mut buf)?;
        let back = Trajectory::read_csv(buf.as_slice())?;
        Ok(Outcome::holds(back.q == t.q && back.qdot == t.qdot && back.energy == t.energy && back.times == t.times))
    });
}

/// Largest of the relative radial deviation and the deviation of `Z` from
/// `Z₀ + v_Z t`.
fn steady_deviation(t: &Trajectory, v: &[f64]) -> Result<f64> {
    if !t.termination.completed() {
        return Err(Error::Consistency(format!("run ended early: {:?}", t.termination)));
    }
    let (r0, z0) = (t.q[0][0], t.q[0][1]);
    let span = (v[1] * t.times.last().copied().unwrap_or(0.0)).abs().max(1.0);
    Ok(t.times
        .iter()
        .zip(&t.q)
        .fold(0.0f64, |m, (s, q)| m.max(((q[0] - r0) / r0).abs()).max((q[1] - z0 - v[1] * s).abs() / span)))
}

/// Quantities of the single-ring asymptotic study at one `ρ`.
struct RingStudy {
    m_dev: f64,
    a_dev: f64,
    g_r: f64,
    gamma_norm: f64,
    lambda_min: f64,
}

fn ring_study(rho: f64) -> Result<RingStudy> {
    let cfg = ring(rho)?;
    let c = assemble(&cfg, no_derivatives())?;
    let m_dev = (&c.m - DMatrix::identity(2, 2) * (PI * rho * rho)).norm() / (rho * rho);
    let target = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let a_dev = (c.a_form() - target).norm();
    let t = [0.6, 0.8];
    let gamma_norm = christoffel_gamma(&cfg, &t, &t, AssemblyOptions::default())?.norm();
    Ok(RingStudy { m_dev, a_dev, g_r: c.g[0], gamma_norm, lambda_min: c.inertia_spectrum().0 })
}

fn slope_checks(r: &mut Runner) {
    r.run("slopes.kernel_difference", || {
        let mut norms = Vec::new();
        for rho in RHO_GRID {
            let g = make_grid(&ring(rho)?, 64)?;
            let d =
                assemble_logsplit_matrix(&g, OperatorKind::Stream) - assemble_logsplit_matrix(&g, OperatorKind::Flat);
            norms.push(d.singular_values().max());
        }
        Ok(Outcome::within(log_log_slope(&RHO_GRID, &norms), 1.7, 2.1).with(format!("operator norms {}", sci(&norms))))
    });
    r.run("slopes.single_density", || {
        let mut dev = Vec::new();
        for rho in RHO_GRID {
            let s = solve_stream(&make_grid(&ring(rho)?, 64)?)?;
            let u = 1.0 / (2.0 * PI * rho);
            dev.push(s.mu[0].values().iter().map(|m| (m - u).abs()).fold(0.0, f64::max) / u);
        }
        let reduced: Vec<f64> = dev.iter().zip(RHO_GRID).map(|(d, rho)| d / rho.ln().abs()).collect();
        let plain = log_log_slope(&RHO_GRID, &dev);
        Ok(Outcome::at_least(log_log_slope(&RHO_GRID, &reduced), 0.9)
            .with(format!("slope without the log factor {plain:.3}")))
    });
    r.run("slopes.cross_density", || {
        let (rho, d) = (0.005, 0.5);
        let g = make_grid(&BodyConfiguration::new(vec![body(rho, 1.0, 1.0, 0.0), body(rho, 1.0, 1.0, d)])?, 128)?;
        let s = solve_stream(&g)?;
        let gk = stream_kernel_grad_y(pt(1.0, 0.0), pt(1.0, d))?;
        let (mut err, mut nrm) = (0.0, 0.0);
        for k in g.panels[1].range() {
            let n = g.normals[k];
            let pred = 2.0 / g.nodes[k].r * (n[0] * gk[0] + n[1] * gk[1]);
            err += (s.mu[0].values()[k] - pred).powi(2);
            nrm += pred * pred;
        }
        let sym = (s.c[(0, 1)] - s.c[(1, 0)]).abs();
        let v = (err / nrm).sqrt();
        Ok(Outcome::at_most(if sym <= 1e-8 { v } else { f64::INFINITY }, 0.1).with(format!("C asymmetry {sym:.2e}")))
    });
    r.run("slopes.interior_energy", || {
        let mut dev = Vec::new();
        let mut lip = Vec::new();
        for rho in RHO_GRID {
            let v = PI * rho * rho;
            dev.push(interior_energy_f(1.0, v)? - PI * rho * rho);
            lip.push((interior_energy_fast(1.0 + 1e-3, v)?.0 - interior_energy_fast(1.0, v)?.0) / 1e-3);
        }
        let (s1, s2) = (log_log_slope(&RHO_GRID, &dev), log_log_slope(&RHO_GRID, &lip));
        Ok(Outcome::at_least(s1.min(s2), 2.5).with(format!("value slope {s1:.3}, Lipschitz slope {s2:.3}")))
    });
    let studies: Result<Vec<RingStudy>> = RHO_GRID.iter().map(|&rho| ring_study(rho)).collect();
    let studies = studies.map_err(|e| e.to_string());
    let with = |f: &dyn Fn(&[RingStudy]) -> Outcome| -> Result<Outcome> {
        studies.as_ref().map(|s| f(s)).map_err(|e| Error::Consistency(e.clone()))
    };
    r.run("slopes.added_mass", || {
        with(&|s| {
            let dev: Vec<f64> = s.iter().map(|x| x.m_dev).collect();
            Outcome::at_least(log_log_slope(&RHO_GRID, &dev), 0.9)
        })
    });
    r.run("slopes.gyro_block", || with(&|s| Outcome::at_most(s[3].a_dev, 0.05).with("deviation at rho = 0.005")));
    r.run("slopes.force_log_coefficient", || {
        with(&|s| {
            let lx: Vec<f64> = RHO_GRID.iter().map(|x| x.ln()).collect();
            let gr: Vec<f64> = s.iter().map(|x| x.g_r).collect();
            let target = 1.0 / (4.0 * PI);
            let slope = fit_slope(&lx, &gr);
            Outcome::at_most(rel(slope, target), 0.05).with(format!("slope {slope:.5}, 1/(4 pi) = {target:.5}"))
        })
    });
    r.run("slopes.christoffel_cubic", || {
        with(&|s| {
            let g: Vec<f64> = s.iter().map(|x| x.gamma_norm).collect();
            let scaled: Vec<f64> = g.iter().zip(RHO_GRID).map(|(v, rho)| v / rho.powi(3)).collect();
            Outcome::at_least(log_log_slope(&RHO_GRID, &g), 3.0).with(format!("|Gamma|/rho^3 = {scaled:.3?}"))
        })
    });
    r.run("slopes.inertia_eigenvalue", || {
        with(&|s| {
            let l: Vec<f64> = s.iter().map(|x| x.lambda_min).collect();
            Outcome::within(log_log_slope(&RHO_GRID, &l), 1.8, 2.2)
        })
    });
    r.run("coefficients.christoffel_step_halving", || {
        let cfg = pair(0.03)?;
        let (t, s) = ([0.3, -0.2, 0.5, 0.1], [-0.4, 0.7, 0.2, -0.3]);
        let full = christoffel_gamma(&cfg, &t, &s, AssemblyOptions::default())?;
        let half = christoffel_gamma(&cfg, &t, &s, AssemblyOptions { fd_scale: 5e-4, ..Default::default() })?;
        Ok(Outcome::at_most((&half - &full).norm() / full.norm(), 0.1))
    });
}

fn integrator_studies(r: &mut Runner) {
    let cfg = RunConfig::leapfrog();
    let leap = |controls: IntegratorControls| -> Result<Trajectory> {
        let p = prepare(&cfg, 1e-2)?;
        integrate_body(&p.config, &p.qdot0, cfg.horizon / p.spec.time_scale(), &controls)
    };
    let base = leap(cfg.body_controls());
    r.run("dynamics.energy_drift", || {
        let t = base.clone()?;
        Ok(Outcome::at_most(if t.termination.completed() { t.energy_drift() } else { f64::INFINITY }, 1e-5))
    });
    r.run("dynamics.energy_drift_halving", || {
        let t = base.clone()?;
        let h = leap(cfg.body_controls().halved())?;
        let ratio = t.energy_drift() / h.energy_drift();
        Ok(Outcome::at_least(ratio, 4.0).with(format!("drift {:.3e} -> {:.3e}", t.energy_drift(), h.energy_drift())))
    });
    r.run("dynamics.body_exchange", || {
        let t = base.clone()?;
        Ok(Outcome::at_least(t.exchanges(0, 1) as f64, 1.0))
    });
    r.run("dynamics.steady_ring", || {
        let rho = 0.01;
        let cfg = ring(rho)?;
        let c = assemble(&cfg, AssemblyOptions { nodes: 16, derivatives: false, ..Default::default() })?;
        let mut v = steady_velocity(&c)?;
        v[0] = 0.0;
        let t = integrate_body(&cfg, &v, 0.2, &IntegratorControls { outputs: 50, ..Default::default() })?;
        Ok(Outcome::at_most(steady_deviation(&t, &v)?, 1e-5))
    });
    let short = |dz: f64| -> Result<Trajectory> {
        let p = prepare(&cfg, 3e-2)?;
        integrate_body(
            &p.config.translated_z(dz),
            &p.qdot0,
            0.02,
            &IntegratorControls { outputs: 10, ..cfg.body_controls() },
        )
    };
    r.run("dynamics.z_equivariance", || {
        let (a, b) = (short(0.0)?, short(0.3)?);
        let worst = a.q.iter().zip(&b.q).fold(0.0f64, |m, (x, y)| {
            x.iter()
                .zip(y)
                .enumerate()
                .fold(m, |m, (i, (u, w))| m.max((u - (w - if i % 2 == 1 { 0.3 } else { 0.0 })).abs()))
        });
        Ok(Outcome::at_most(if a.len() == b.len() { worst } else { f64::INFINITY }, 1e-10))
    });
    r.run("dynamics.deterministic", || Ok(Outcome::holds(short(0.0)? == short(0.0)?)));
}

fn limit_studies(r: &mut Runner) {
    r.run("limits.static_check_log", || {
        let cfg = RunConfig::leapfrog();
        static_series(&cfg)
    });
    r.run("limits.static_check_sqrtlog", || {
        let mut cfg = RunConfig::leapfrog();
        cfg.regime = RegimeKind::SqrtLog;
        static_series(&cfg)
    });
    for (name, sys) in [("limits.leapfrog_return_j1", PvSystem::J1), ("limits.leapfrog_return_j2", PvSystem::J2)] {
        r.run(name, || {
            let (gamma, q0) = ([1.0, 1.0], [0.0, 0.25, 0.0, -0.25]);
            let c = IntegratorControls::point_vortex();
            let ret = poincare_return(sys, &gamma, &q0, 1.0, 50.0, &c)?
                .ok_or_else(|| Error::Consistency("no return".into()))?;
            let t = integrate_pv(sys, &gamma, &q0, 1.0, ret.period, &c)?;
            let inv = ret.h_drift.max(ret.p_drift).max(t.energy_drift() * t.energy[0].abs()).max(t.impulse_drift());
            let ok = inv <= 1e-8 && t.exchanges(0, 1) >= 1;
            Ok(Outcome::at_most(if ok { ret.error } else { f64::INFINITY }, 1e-4).with(format!(
                "period {:.6}, invariant drift {inv:.2e}, exchanges {}",
                ret.period,
                t.exchanges(0, 1)
            )))
        });
    }
    r.run("sweep.rows_independent", || {
        let mut cfg = RunConfig::leapfrog();
        cfg.horizon = 0.1;
        cfg.epsilon_list = Some(vec![3e-2, 1e-2]);
        let both = run_epsilon_sweep(&cfg)?;
        let mut same = true;
        for (i, e) in [3e-2, 1e-2].into_iter().enumerate() {
            cfg.epsilon_list = Some(vec![e]);
            let mut row = run_epsilon_sweep(&cfg)?.rows.remove(0);
            row.runtime_s = both.rows[i].runtime_s;
            same &= row == both.rows[i];
        }
        Ok(Outcome::holds(same))
    });
    r.run("sweep.leapfrog_convergence", || {
        let cfg = RunConfig::leapfrog();
        let rep = run_epsilon_sweep(&cfg)?;
        let dist: Vec<Option<f64>> = rep.rows.iter().map(|r| r.sup_distance).collect();
        let complete = rep.rows.iter().all(|r| r.status == "completed" && r.sup_distance.is_some());
        let ok = complete && rep.nonincreasing(0.1, |r| r.sup_distance);
        let worst_drift = rep.rows.iter().filter_map(|r| r.energy_drift).fold(0.0, f64::max);
        Ok(Outcome::holds(ok && worst_drift <= 1e-5).with(format!(
            "sup-distances {}, worst energy drift {worst_drift:.2e}",
            sci(&dist.iter().map(|d| d.unwrap_or(f64::NAN)).collect::<Vec<_>>())
        )))
    });
}

fn static_series(cfg: &RunConfig) -> Result<Outcome> {
    let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| {
            let p = prepare(cfg, e)?;
            static_check(&p.spec, &p.coeffs, &cfg.gammas(), &cfg.qtilde0())
        })
        .collect::<Result<_>>()?;
    let ok = vals.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome::holds(ok).with(sci(&vals)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        assert!((log_log_slope(&x, &y) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fast_suite_passes() {
        let rep = run_validation_suite(Level::Fast, false);
        assert!(rep.checks.len() >= 20);
        for c in rep.failures() {
            eprintln!("{}", c.line());
        }
        assert!(rep.passed());
    }

    #[test]
    fn level_parsing() {
        assert_eq!("full".parse::<Level>().unwrap(), Level::Full);
        assert!("medium".parse::<Level>().is_err());
    }
}
