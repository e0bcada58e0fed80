use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ringvortex::coefficients::{assemble, AssemblyOptions};
use ringvortex::config::RunConfig;
use ringvortex::sweep::{point_vortex_run, prepare, run_epsilon_sweep, simulate};
use ringvortex::validate::{run_validation_suite, Level};
use ringvortex::{Error, Result};

const BUILD_ID: &str = env!("RINGVORTEX_BUILD_ID");

#[derive(Parser)]
#[command(
    name = "ringvortex",
    version,
    about = "Thin vortex rings as rigid bodies: coefficients, dynamics and point-vortex limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble and dump E, M, A, G, C at the initial configuration.
    Coeffs {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Integrate the body equation at one epsilon.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Integrate the limiting point-vortex system of the configured regime.
    Pointvortex {
        #[command(flatten)]
        common: Common,
    },
    /// Body runs over an epsilon list compared with the point-vortex limit.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Run the invariant checks of every module.
    Validate {
        #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
        /// Directory for validation.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("RINGVORTEX_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::Parameter(format!("RINGVORTEX_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    }
    Ok(())
}

struct Output {
    dir: PathBuf,
    prefix: String,
}

impl Output {
    fn new(cfg: &RunConfig, out: Option<PathBuf>) -> Result<Self> {
        let dir = out.or_else(|| cfg.outputs.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, prefix: cfg.outputs.prefix.clone().unwrap_or_default() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}", self.prefix))
    }

    /// Writes through a temporary file and renames it into place.
    fn write(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut buf = Vec::new();
        f(&mut buf)?;
        write_atomic(&path, &buf)?;
        Ok(path)
    }

    fn json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
        self.write(name, |b| {
            serde_json::to_writer_pretty(&mut *b, value)?;
            b.push(b'\n');
            Ok(())
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load(common: &Common) -> Result<(RunConfig, Output)> {
    let cfg = RunConfig::from_path(&common.config)?;
    let out = Output::new(&cfg, common.out.clone())?;
    Ok((cfg, out))
}

fn with_epsilon(mut cfg: RunConfig, eps: Option<f64>) -> Result<RunConfig> {
    if let Some(e) = eps {
        cfg.epsilon = Some(e);
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Coeffs { common, eps } => {
            let (cfg, out) = load(&common)?;
            let cfg = with_epsilon(cfg, eps)?;
            let e = eps.map_or_else(|| cfg.primary_epsilon(), Ok)?;
            let p = prepare(&cfg, e)?;
            let c = assemble(&p.config, AssemblyOptions { nodes: cfg.node_count, ..Default::default() })?;
            let path = out.json(
                "coeffs.json",
                &json!({
                    "build": BUILD_ID,
                    "epsilon": e,
                    "q": p.config.positions(),
                    "radii": p.config.radii(),
                    "coefficients": c.record(),
                }),
            )?;
            let (lo, hi) = c.inertia_spectrum();
            println!(
                "coeffs: k={} eps={e:e} lambda(E+M) in [{lo:.4e}, {hi:.4e}] |G|={:.4e} -> {}",
                p.config.len(),
                c.g.norm(),
                path.display()
            );
        }
        Command::Simulate { common, eps } => {
            let (cfg, out) = load(&common)?;
            let cfg = with_epsilon(cfg, eps)?;
            let e = eps.map_or_else(|| cfg.primary_epsilon(), Ok)?;
            let run = simulate(&cfg, e)?;
            let csv = out.write("trajectory.csv", |b| run.physical.write_csv(b))?;
            out.write("rescaled.csv", |b| run.rescaled.write_csv(b))?;
            out.json(
                "trajectory.json",
                &json!({
                    "build": BUILD_ID,
                    "config": cfg,
                    "epsilon": e,
                    "regime": cfg.regime,
                    "controls": cfg.body_controls(),
                    "termination": run.physical.termination,
                    "accepted_steps": run.physical.accepted_steps,
                    "rejected_steps": run.physical.rejected_steps,
                    "rhs_evals": run.physical.rhs_evals,
                    "energy_drift": run.physical.energy_drift(),
                    "exchanges": exchange_counts(&run.physical),
                }),
            )?;
            println!(
                "simulate: eps={e:e} status={} steps={} energy drift={:.3e} -> {}",
                status(&run.physical.termination),
                run.physical.accepted_steps,
                run.physical.energy_drift(),
                csv.display()
            );
        }
        Command::Pointvortex { common } => {
            let (cfg, out) = load(&common)?;
            let t = point_vortex_run(&cfg)?;
            let csv = out.write("pointvortex.csv", |b| t.write_csv(b))?;
            out.json(
                "pointvortex.json",
                &json!({
                    "build": BUILD_ID,
                    "config": cfg,
                    "system": cfg.regime.limit_system(),
                    "controls": cfg.pv_integrator,
                    "termination": t.termination,
                    "accepted_steps": t.accepted_steps,
                    "hamiltonian_drift": t.energy_drift() * t.energy[0].abs(),
                    "impulse_drift": t.impulse_drift(),
                    "exchanges": exchange_counts(&t),
                }),
            )?;
            println!(
                "pointvortex: {:?} status={} H drift={:.3e} P drift={:.3e} -> {}",
                cfg.regime.limit_system(),
                status(&t.termination),
                t.energy_drift() * t.energy[0].abs(),
                t.impulse_drift(),
                csv.display()
            );
        }
        Command::Sweep { common, eps } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(list) = eps {
                cfg.epsilon_list = Some(list);
                cfg.validate()?;
            }
            let rep = run_epsilon_sweep(&cfg)?;
            let csv = out.write("sweep.csv", |b| rep.write_csv(b))?;
            out.write("sweep_timing.csv", |b| rep.write_timing(b))?;
            out.json("sweep.json", &json!({ "build": BUILD_ID, "config": cfg, "report": rep }))?;
            for r in &rep.rows {
                println!(
                    "sweep: eps={:e} status={} sup-distance={} energy drift={} static={} ({:.1} s)",
                    r.epsilon,
                    r.status,
                    opt(r.sup_distance),
                    opt(r.energy_drift),
                    opt(r.static_check),
                    r.runtime_s
                );
            }
            let mono = rep.nonincreasing(0.1, |r| r.sup_distance);
            println!(
                "sweep: {} rows, sup-distance nonincreasing (10% slack): {mono} -> {}",
                rep.rows.len(),
                csv.display()
            );
        }
        Command::Validate { level, out } => {
            let level = match level {
                LevelArg::Fast => Level::Fast,
                LevelArg::Full => Level::Full,
            };
            let rep = run_validation_suite(level, false);
            for c in &rep.checks {
                println!("{}", c.line());
            }
            println!("{}", rep.summary());
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                let mut bytes = serde_json::to_vec_pretty(&json!({ "build": BUILD_ID, "report": rep }))?;
                bytes.push(b'\n');
                write_atomic(&dir.join("validation.json"), &bytes)?;
            }
            return Ok(rep.passed());
        }
    }
    Ok(true)
}

fn exchange_counts(t: &ringvortex::dynamics::Trajectory) -> Vec<serde_json::Value> {
    let k = t.bodies();
    let mut v = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            v.push(json!({ "pair": [i + 1, j + 1], "count": t.exchanges(i, j) }));
        }
    }
    v
}

fn status(t: &ringvortex::dynamics::Termination) -> String {
    serde_json::to_value(t)
        .ok()
        .and_then(|v| v.get("status").and_then(|s| s.as_str()).map(String::from))
        .unwrap_or_default()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
