//! Body runs in rescaled variables and the ε-sweep against the point-vortex limit.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::BodyConfiguration;
use crate::coefficients::{assemble, AssemblyOptions, CoefficientSet};
use crate::config::{InitialVelocity, RunConfig};
use crate::dynamics::{integrate_body, integrate_pv, steady_velocity, sup_distance, Termination, Trajectory};
use crate::error::{Error, Result};
use crate::pointvortex::pv_velocity;
use crate::regime::{RegimeKind, RegimeSpec};

/// Lifted initial state at one `ε`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: RegimeSpec,
    pub config: BodyConfiguration,
    pub qdot0: Vec<f64>,
    pub coeffs: CoefficientSet,
}

pub fn prepare(cfg: &RunConfig, epsilon: f64) -> Result<Prepared> {
    let spec = cfg.regime_spec(epsilon)?;
    let qt0 = cfg.qtilde0();
    let (config, qdot_given) = spec.lift(&cfg.scaled_volumes(), &cfg.gammas(), &qt0, &cfg.qtilde_dot0())?;
    let coeffs =
        assemble(&config, AssemblyOptions { nodes: cfg.node_count, derivatives: false, ..Default::default() })?;
    let qdot0 = match cfg.initial_velocity {
        InitialVelocity::SlowManifold => steady_velocity(&coeffs)?,
        InitialVelocity::Given => qdot_given,
        InitialVelocity::PointVortex => {
            let j = pv_velocity(cfg.regime.limit_system(), &cfg.gammas(), &qt0, cfg.r0)?;
            let vs = spec.velocity_scale();
            j.iter().zip(spec.drift(cfg.bodies.len())).map(|(v, d)| vs * (v - d)).collect()
        }
    };
    Ok(Prepared { spec, config, qdot0, coeffs })
}

/// Static limit check at the initial configuration:
/// `‖A⁻¹G/L + J¹‖` (logarithmic regime) or `‖A⁻¹G/√L − d + J²‖` (square-root regime).
pub fn static_check(spec: &RegimeSpec, coeffs: &CoefficientSet, gamma: &[f64], qtilde: &[f64]) -> Result<f64> {
    let x = -DVector::from_vec(steady_velocity(coeffs)?);
    let j = DVector::from_vec(pv_velocity(spec.kind.limit_system(), gamma, qtilde, spec.r0)?);
    let l = spec.log_factor();
    let r = match spec.kind {
        RegimeKind::Log => x / l + j,
        RegimeKind::SqrtLog => x / l.sqrt() - DVector::from_vec(spec.drift(gamma.len())) + j,
    };
    Ok(r.norm())
}

/// Maps a physical body trajectory to rescaled time and positions, adding
/// back the drift `s·d` in the square-root regime.
pub fn rescale(spec: &RegimeSpec, traj: &Trajectory) -> Trajectory {
    let ts = spec.time_scale();
    let vs = spec.velocity_scale();
    let mut out = traj.clone();
    let drift = spec.drift(traj.bodies());
    for (i, t) in out.times.iter_mut().enumerate() {
        *t *= ts;
        let s = *t;
        out.q[i] = spec.project_positions(&traj.q[i]).iter().zip(&drift).map(|(q, d)| q + s * d).collect();
        out.qdot[i] = traj.qdot[i].iter().zip(&drift).map(|(v, d)| v / vs + d).collect();
    }
    out
}

#[derive(Debug, Clone)]
pub struct BodyRun {
    pub prepared: Prepared,
    pub physical: Trajectory,
    pub rescaled: Trajectory,
}

/// Integrates the body equation over the configured rescaled horizon.
pub fn simulate(cfg: &RunConfig, epsilon: f64) -> Result<BodyRun> {
    let prepared = prepare(cfg, epsilon)?;
    let horizon = cfg.horizon / prepared.spec.time_scale();
    let physical = integrate_body(&prepared.config, &prepared.qdot0, horizon, &cfg.body_controls())?;
    let rescaled = rescale(&prepared.spec, &physical);
    Ok(BodyRun { prepared, physical, rescaled })
}

/// The matching point-vortex trajectory from the same `q̃₀`.
pub fn point_vortex_run(cfg: &RunConfig) -> Result<Trajectory> {
    integrate_pv(cfg.regime.limit_system(), &cfg.gammas(), &cfg.qtilde0(), cfg.r0, cfg.horizon, &cfg.pv_integrator)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub log_factor: f64,
    pub status: String,
    pub sup_distance: Option<f64>,
    pub energy_drift: Option<f64>,
    pub static_check: Option<f64>,
    pub steps: usize,
    #[serde(skip)]
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub regime: RegimeKind,
    pub rows: Vec<SweepRow>,
}

fn status_of(t: &Termination) -> String {
    match t {
        Termination::Completed => "completed".into(),
        Termination::Collision { time, gap } => format!("collision at t={time:.6e} (gap {gap:.3e})"),
        Termination::DomainExit { time, reason } => format!("domain exit at t={time:.6e}: {reason}"),
        Termination::Failure { time, reason } => format!("failure at t={time:.6e}: {reason}"),
    }
}

fn sweep_row(cfg: &RunConfig, epsilon: f64, pv: &Trajectory) -> Result<SweepRow> {
    let start = Instant::now();
    let log_factor = epsilon.ln().abs();
    let run = match simulate(cfg, epsilon) {
        Ok(r) => r,
        Err(Error::Configuration(m)) => {
            return Ok(SweepRow {
                epsilon,
                log_factor,
                status: format!("skipped: {m}"),
                sup_distance: None,
                energy_drift: None,
                static_check: None,
                steps: 0,
                runtime_s: start.elapsed().as_secs_f64(),
            })
        }
        Err(e) => return Err(e),
    };
    let samples = cfg.integrator.outputs.max(cfg.pv_integrator.outputs);
    let check = static_check(&run.prepared.spec, &run.prepared.coeffs, &cfg.gammas(), &cfg.qtilde0())?;
    Ok(SweepRow {
        epsilon,
        log_factor,
        status: status_of(&run.physical.termination),
        sup_distance: sup_distance(&run.rescaled, pv, samples),
        energy_drift: Some(run.physical.energy_drift()),
        static_check: Some(check),
        steps: run.physical.accepted_steps,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs every `ε` of the configuration; rows are independent and may run concurrently.
pub fn run_epsilon_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let eps = cfg.epsilons();
    if eps.is_empty() {
        return Ok(SweepReport { regime: cfg.regime, rows: vec![] });
    }
    let pv = point_vortex_run(cfg)?;
    let rows = eps.par_iter().map(|&e| sweep_row(cfg, e, &pv)).collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { regime: cfg.regime, rows })
}

impl SweepReport {
    /// `column[i+1] ≤ (1 + slack)·column[i]` over consecutive completed rows.
    pub fn nonincreasing(&self, slack: f64, column: impl Fn(&SweepRow) -> Option<f64>) -> bool {
        let vals: Vec<f64> = self.rows.iter().filter_map(&column).collect();
        vals.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0])
    }

    /// Deterministic CSV (no timings).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epsilon", "log_factor", "status", "sup_distance", "energy_drift", "static_check", "steps"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            wr.write_record([
                r.epsilon.to_string(),
                r.log_factor.to_string(),
                r.status.clone(),
                opt(r.sup_distance),
                opt(r.energy_drift),
                opt(r.static_check),
                r.steps.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_timing<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["epsilon", "runtime_s"])?;
        for r in &self.rows {
            wr.write_record([r.epsilon.to_string(), format!("{:.3}", r.runtime_s)])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_list_gives_empty_report() {
        let mut cfg = RunConfig::leapfrog();
        cfg.epsilon_list = Some(vec![]);
        assert!(run_epsilon_sweep(&cfg).unwrap().rows.is_empty());
    }

    #[test]
    fn static_check_shrinks_with_epsilon() {
        let cfg = RunConfig::leapfrog();
        let vals: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&e| {
                let p = prepare(&cfg, e).unwrap();
                static_check(&p.spec, &p.coeffs, &cfg.gammas(), &cfg.qtilde0()).unwrap()
            })
            .collect();
        assert!(vals[1] < vals[0] && vals[2] < vals[1], "{vals:?}");
    }

    #[test]
    fn large_epsilon_row_skipped() {
        let mut cfg = RunConfig::leapfrog();
        cfg.epsilon_list = Some(vec![0.3]);
        cfg.bodies[0].volume = 50.0;
        let rep = run_epsilon_sweep(&cfg).unwrap();
        assert!(rep.rows[0].status.starts_with("skipped"), "{}", rep.rows[0].status);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("epsilon,log_factor,status"));
    }
}
