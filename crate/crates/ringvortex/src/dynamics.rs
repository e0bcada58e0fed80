//! Time integration of the body equation and of the point-vortex systems.

use std::cell::RefCell;
use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bodies::BodyConfiguration;
use crate::coefficients::{assemble, body_acceleration, total_energy, AssemblyOptions, CoefficientSet};
use crate::error::{Error, Result};
use crate::ode::{integrate, locate_crossing, Control, DenseStep, OdeOptions};
use crate::pointvortex::{min_distance, pv_invariants, pv_velocity, PvSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorControls {
    pub rtol: f64,
    pub atol: f64,
    /// Bound on `h·ω` with `ω = ‖A‖/λ_min(E+M)`.
    pub cap: f64,
    pub nodes: usize,
    /// Number of uniform output intervals over the horizon.
    pub outputs: usize,
    pub fd_scale: f64,
    pub max_steps: usize,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self { rtol: 1e-7, atol: 1e-10, cap: 0.2, nodes: 16, outputs: 200, fd_scale: 1e-3, max_steps: 2_000_000 }
    }
}

impl IntegratorControls {
    /// Defaults for the point-vortex systems.
    pub fn point_vortex() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, ..Self::default() }
    }

    /// Tolerances and cap all halved.
    pub fn halved(&self) -> Self {
        Self { rtol: 0.5 * self.rtol, atol: 0.5 * self.atol, cap: 0.5 * self.cap, ..*self }
    }

    fn check(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol >= 0.0 && self.cap > 0.0 && self.outputs > 0 && self.fd_scale > 0.0) {
            return Err(Error::Parameter(format!("invalid integrator controls {self:?}")));
        }
        Ok(())
    }

    fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions { nodes: self.nodes, fd_scale: self.fd_scale, derivatives: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Collision { time: f64, gap: f64 },
    DomainExit { time: f64, reason: String },
    Failure { time: f64, reason: String },
}

impl Termination {
    pub fn completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub qdot: Vec<Vec<f64>>,
    /// Total energy for bodies, `H` for point vortices.
    pub energy: Vec<f64>,
    /// Last accepted step before each sample.
    pub step_size: Vec<f64>,
    /// Largest linear-solver residual at each sample (zero for point vortices).
    pub residual: Vec<f64>,
    /// Impulse `P` for point vortices; empty for bodies.
    pub impulse: Vec<f64>,
    pub termination: Termination,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
}

impl Trajectory {
    pub fn bodies(&self) -> usize {
        self.q.first().map_or(0, |q| q.len() / 2)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `max_t |e(t) − e(0)| / |e(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs()
    }

    pub fn impulse_drift(&self) -> f64 {
        let p0 = self.impulse.first().copied().unwrap_or(0.0);
        self.impulse.iter().map(|p| (p - p0).abs()).fold(0.0, f64::max)
    }

    /// Number of sign changes of `Z_i − Z_j`.
    pub fn exchanges(&self, i: usize, j: usize) -> usize {
        let d: Vec<f64> = self.q.iter().map(|q| q[2 * i + 1] - q[2 * j + 1]).filter(|v| *v != 0.0).collect();
        d.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
    }

    /// Position at `t` by linear interpolation between samples.
    pub fn position_at(&self, t: f64) -> Option<Vec<f64>> {
        let last = *self.times.last()?;
        if t < self.times[0] || t > last {
            return None;
        }
        let i = self.times.partition_point(|s| *s <= t).clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Some(self.q[i - 1].iter().zip(&self.q[i]).map(|(a, b)| a + w * (b - a)).collect())
    }

    pub fn header(&self) -> Vec<String> {
        let k = self.bodies();
        let mut h = vec!["t".to_string()];
        for i in 1..=k {
            h.push(format!("q_R{i}"));
            h.push(format!("q_Z{i}"));
        }
        for i in 1..=k {
            h.push(format!("qdot_R{i}"));
            h.push(format!("qdot_Z{i}"));
        }
        h.push("energy".into());
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for s in 0..self.len() {
            let mut row = vec![self.times[s].to_string()];
            row.extend(self.q[s].iter().map(f64::to_string));
            row.extend(self.qdot[s].iter().map(f64::to_string));
            row.push(self.energy[s].to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV layout written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let cols = rd.headers()?.len();
        if cols < 4 || (cols - 2) % 4 != 0 {
            return Err(Error::Io(format!("trajectory CSV has {cols} columns")));
        }
        let d = (cols - 2) / 2;
        let mut t = Self::empty();
        for rec in rd.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Io(format!("bad number {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            t.times.push(v[0]);
            t.q.push(v[1..1 + d].to_vec());
            t.qdot.push(v[1 + d..1 + 2 * d].to_vec());
            t.energy.push(v[1 + 2 * d]);
        }
        Ok(t)
    }

    fn empty() -> Self {
        Self {
            times: vec![],
            q: vec![],
            qdot: vec![],
            energy: vec![],
            step_size: vec![],
            residual: vec![],
            impulse: vec![],
            termination: Termination::Completed,
            accepted_steps: 0,
            rejected_steps: 0,
            rhs_evals: 0,
        }
    }

    fn push(&mut self, t: f64, y: &[f64], energy: f64, step: f64, residual: f64) {
        let d = y.len() / 2;
        self.times.push(t);
        self.q.push(y[..d].to_vec());
        self.qdot.push(y[d..].to_vec());
        self.energy.push(energy);
        self.step_size.push(step);
        self.residual.push(residual);
    }
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Slow-manifold velocity `q̇* = −A⁻¹G`.
pub fn steady_velocity(coeffs: &CoefficientSet) -> Result<Vec<f64>> {
    let lu = coeffs.a.clone().lu();
    let x = lu
        .solve(&coeffs.g)
        .ok_or_else(|| Error::Solver { message: "A is singular".into(), condition: f64::INFINITY })?;
    Ok((-x).as_slice().to_vec())
}

fn output_times(horizon: f64, outputs: usize) -> Vec<f64> {
    (0..=outputs).map(|i| horizon * i as f64 / outputs as f64).collect()
}

fn residual_of(c: &CoefficientSet) -> f64 {
    c.diagnostics.stream_residual.max(c.diagnostics.potential_residual)
}

/// Integrates the body equation from `(config0, qdot0)` over `[0, horizon]`.
pub fn integrate_body(
    config0: &BodyConfiguration,
    qdot0: &[f64],
    horizon: f64,
    controls: &IntegratorControls,
) -> Result<Trajectory> {
    controls.check()?;
    config0.validate()?;
    let d = 2 * config0.len();
    if qdot0.len() != d {
        return Err(Error::Parameter(format!("qdot0 must have length {d}")));
    }
    let opts = controls.assembly();
    let energy_opts = AssemblyOptions { derivatives: false, ..opts };
    let frequency: RefCell<Option<(Vec<f64>, f64)>> = RefCell::new(None);

    let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let cfg = config0.with_positions(&y[..d])?;
        let c = assemble(&cfg, opts)?;
        let acc = body_acceleration(&y[d..], &c)?;
        *frequency.borrow_mut() = Some((y.to_vec(), c.gyro_frequency()));
        let mut out = y[d..].to_vec();
        out.extend(acc);
        Ok(out)
    };
    let h_limit = |_t: f64, y: &[f64]| -> f64 {
        let cached = frequency.borrow().as_ref().filter(|(z, _)| z.as_slice() == y).map(|(_, w)| *w);
        let w = cached.or_else(|| {
            let cfg = config0.with_positions(&y[..d]).ok()?;
            Some(assemble(&cfg, energy_opts).ok()?.gyro_frequency())
        });
        w.map_or(f64::INFINITY, |w| controls.cap / w)
    };
    let sample = |y: &[f64]| -> Result<(f64, f64)> {
        let cfg = config0.with_positions(&y[..d])?;
        let c = assemble(&cfg, energy_opts)?;
        Ok((total_energy(&y[d..], &c)?, residual_of(&c)))
    };

    let mut y0 = config0.positions();
    y0.extend_from_slice(qdot0);
    let mut traj = Trajectory::empty();
    let (e0, r0) = sample(&y0)?;
    traj.push(0.0, &y0, e0, 0.0, r0);
    let times = output_times(horizon, controls.outputs);
    let mut next = 1;
    let min_rho = config0.min_radius();
    let mut stop_reason: Option<Termination> = None;

    let observer = |step: &DenseStep, y1: &[f64]| -> Result<Control> {
        while next < times.len() && times[next] <= step.t1() {
            let y = if times[next] == step.t1() { y1.to_vec() } else { step.eval(times[next]) };
            let (e, r) = sample(&y)?;
            traj.push(times[next], &y, e, step.h, r);
            next += 1;
        }
        if y1.iter().any(|v| !v.is_finite()) {
            stop_reason = Some(Termination::DomainExit { time: step.t1(), reason: "non-finite state".into() });
            return Ok(Control::Stop("non-finite state".into()));
        }
        let cfg = match config0.with_positions(&y1[..d]) {
            Ok(c) => c,
            Err(e) => {
                stop_reason = Some(Termination::DomainExit { time: step.t1(), reason: e.to_string() });
                return Ok(Control::Stop(e.to_string()));
            }
        };
        let pair_gap = cfg.min_pair_gap();
        if pair_gap < 0.1 * min_rho {
            stop_reason = Some(Termination::Collision { time: step.t1(), gap: pair_gap });
            return Ok(Control::Stop("collision".into()));
        }
        if cfg.min_gap() < 0.1 * min_rho {
            stop_reason = Some(Termination::DomainExit { time: step.t1(), reason: "body reached the axis".into() });
            return Ok(Control::Stop("axis".into()));
        }
        Ok(Control::Continue)
    };

    let ode =
        OdeOptions { rtol: controls.rtol, atol: controls.atol, max_steps: controls.max_steps, ..Default::default() };
    let out = integrate(rhs, 0.0, &y0, horizon, &ode, h_limit, observer)?;
    traj.termination = match (out.stopped, stop_reason) {
        (None, _) => Termination::Completed,
        (Some(_), Some(t)) => t,
        (Some(reason), None) => Termination::Failure { time: out.t, reason },
    };
    if !traj.termination.completed() && traj.times.last() != Some(&out.t) {
        let (e, r) = sample(&out.y).unwrap_or((f64::NAN, f64::NAN));
        traj.push(out.t, &out.y, e, out.stats.last_step, r);
    }
    traj.accepted_steps = out.stats.accepted;
    traj.rejected_steps = out.stats.rejected;
    traj.rhs_evals = out.stats.rhs_evals;
    Ok(traj)
}

/// Integrates `q̃' = J(q̃)`; the energy column holds `H`.
pub fn integrate_pv(
    system: PvSystem,
    gamma: &[f64],
    qt0: &[f64],
    r0: f64,
    horizon: f64,
    controls: &IntegratorControls,
) -> Result<Trajectory> {
    controls.check()?;
    pv_velocity(system, gamma, qt0, r0)?;
    let times = output_times(horizon, controls.outputs);
    let mut traj = Trajectory::empty();
    let record = |traj: &mut Trajectory, t: f64, q: &[f64], step: f64| -> Result<()> {
        let v = pv_velocity(system, gamma, q, r0)?;
        let (h, p) = pv_invariants(system, gamma, q, r0)?;
        let mut y = q.to_vec();
        y.extend(v);
        traj.push(t, &y, h, step, 0.0);
        traj.impulse.push(p);
        Ok(())
    };
    record(&mut traj, 0.0, qt0, 0.0)?;
    let mut next = 1;
    let mut collided = None;
    let observer = |step: &DenseStep, y1: &[f64]| -> Result<Control> {
        while next < times.len() && times[next] <= step.t1() {
            let y = if times[next] == step.t1() { y1.to_vec() } else { step.eval(times[next]) };
            record(&mut traj, times[next], &y, step.h)?;
            next += 1;
        }
        let dmin = min_distance(y1);
        if dmin < 1e-6 {
            collided = Some(Termination::Collision { time: step.t1(), gap: dmin });
            return Ok(Control::Stop("collision".into()));
        }
        Ok(Control::Continue)
    };
    let ode =
        OdeOptions { rtol: controls.rtol, atol: controls.atol, max_steps: controls.max_steps, ..Default::default() };
    let out =
        integrate(|_, q| pv_velocity(system, gamma, q, r0), 0.0, qt0, horizon, &ode, |_, _| f64::INFINITY, observer)?;
    traj.termination = match (out.stopped, collided) {
        (None, _) => Termination::Completed,
        (Some(_), Some(t)) => t,
        (Some(reason), None) => Termination::Failure { time: out.t, reason },
    };
    if !traj.termination.completed() && traj.times.last() != Some(&out.t) {
        record(&mut traj, out.t, &out.y, out.stats.last_step)?;
    }
    traj.accepted_steps = out.stats.accepted;
    traj.rejected_steps = out.stats.rejected;
    traj.rhs_evals = out.stats.rhs_evals;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareReturn {
    pub period: f64,
    /// `|d(T) − d(0)| / |d(0)|` for the relative vector `d = q̃₁ − q̃₂`.
    pub error: f64,
    pub h_drift: f64,
    pub p_drift: f64,
}

/// First return of the relative vector of a two-vortex system to its initial
/// direction; `None` if no return happens within `horizon`.
pub fn poincare_return(
    system: PvSystem,
    gamma: &[f64],
    qt0: &[f64],
    r0: f64,
    horizon: f64,
    controls: &IntegratorControls,
) -> Result<Option<PoincareReturn>> {
    if gamma.len() != 2 {
        return Err(Error::Parameter("Poincaré return needs exactly two vortices".into()));
    }
    let rel = |q: &[f64]| [q[0] - q[2], q[1] - q[3]];
    let d0 = rel(qt0);
    let v0 = pv_velocity(system, gamma, qt0, r0)?;
    let dv = [v0[0] - v0[2], v0[1] - v0[3]];
    let orient = (d0[0] * dv[1] - d0[1] * dv[0]).signum();
    if orient == 0.0 {
        return Ok(None);
    }
    let section = |q: &[f64]| {
        let d = rel(q);
        if d[0] * d0[0] + d[1] * d0[1] <= 0.0 {
            return -1.0;
        }
        orient * (d0[0] * d[1] - d0[1] * d[0])
    };
    let (h0, p0) = pv_invariants(system, gamma, qt0, r0)?;
    let mut hit = None;
    let mut started = false;
    let ode =
        OdeOptions { rtol: controls.rtol, atol: controls.atol, max_steps: controls.max_steps, ..Default::default() };
    integrate(
        |_, q| pv_velocity(system, gamma, q, r0),
        0.0,
        qt0,
        horizon,
        &ode,
        |_, _| f64::INFINITY,
        |step, y1| {
            // skip the departure from the section itself
            if !started {
                started = section(y1) > 0.0;
                if started {
                    return Ok(Control::Continue);
                }
            }
            if let Some((t, q)) = locate_crossing(step, y1, section) {
                hit = Some((t, q));
                return Ok(Control::Stop("returned".into()));
            }
            Ok(Control::Continue)
        },
    )?;
    let Some((t, q)) = hit else { return Ok(None) };
    let d = rel(&q);
    let (h, p) = pv_invariants(system, gamma, &q, r0)?;
    Ok(Some(PoincareReturn {
        period: t,
        error: (d[0] - d0[0]).hypot(d[1] - d0[1]) / d0[0].hypot(d0[1]),
        h_drift: (h - h0).abs(),
        p_drift: (p - p0).abs(),
    }))
}

/// Largest Euclidean distance between two sampled position histories on a
/// uniform grid of `samples + 1` points over their common time span.
pub fn sup_distance(a: &Trajectory, b: &Trajectory, samples: usize) -> Option<f64> {
    let end = a.times.last()?.min(*b.times.last()?);
    let mut worst = 0.0f64;
    for i in 0..=samples {
        let t = end * i as f64 / samples as f64;
        let (pa, pb) = (a.position_at(t)?, b.position_at(t)?);
        let d = DVector::from_vec(pa) - DVector::from_vec(pb);
        worst = worst.max(d.norm());
    }
    Some(worst)
}
