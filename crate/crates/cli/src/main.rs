use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use curvflow::experiment::config::{Experiment, ExperimentConfig};
use curvflow::experiment::report::{self, RunOutput};
use curvflow::experiment::run_experiment;
use curvflow::mesh::{fixtures, io, tube, Geometry};
use curvflow::{Error, Result};

#[derive(Parser)]
#[command(name = "curvflow", version, about = "Curvature growth under isotropic Brownian flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the noise invariant battery with the config's spectral measure and seed.
    AuditNoise {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a fixture mesh (OFF) or polyline (CSV).
    Fixtures {
        #[command(subcommand)]
        kind: FixtureKind,
        /// Output file; stdout when omitted.
        #[arg(long, short, global = true)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo tube volume of a mesh or polyline.
    Tube {
        mesh: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated radii for a tube-formula coefficient fit.
        #[arg(long, value_delimiter = ',')]
        fit: Vec<f64>,
        #[arg(long, default_value_t = 0.02)]
        cell: f64,
        #[arg(long, default_value_t = 8)]
        replicates: usize,
    },
    /// Discrete Lipschitz-Killing curvatures of a mesh or polyline.
    Lk { mesh: PathBuf },
}

#[derive(Subcommand)]
enum FixtureKind {
    Icosphere {
        #[arg(long, default_value_t = 4)]
        level: u32,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    Polygon {
        #[arg(long, default_value_t = 1024)]
        vertices: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    Torus {
        #[arg(long, default_value_t = 1.0)]
        major: f64,
        #[arg(long, default_value_t = 0.3)]
        minor: f64,
        #[arg(long, default_value_t = 48)]
        nu: usize,
        #[arg(long, default_value_t = 16)]
        nv: usize,
    },
}

fn finish(out: &RunOutput, dir: Option<&Path>) -> Result<i32> {
    if let Some(dir) = dir {
        report::write_outputs(dir, out)?;
    }
    print!("{}", report::report_json(&out.report)?);
    let r = &out.report;
    let mut line = format!("{}: {}", r.experiment, if r.passed { "PASS" } else { "FAIL" });
    if let Some(rate) = &r.rate {
        line += &format!(
            " fitted {:.4} [{:.4}, {:.4}] predicted {:.4}",
            rate.fitted_rate, rate.ci[0], rate.ci[1], rate.predicted_rate
        );
    }
    for c in r.checks.iter().filter(|c| !c.passed) {
        line += &format!("; {} = {:.3e} > {:.3e}", c.name, c.value, c.tolerance);
    }
    eprintln!("{line}");
    Ok(r.exit_code())
}

fn run(config: &Path, out: Option<PathBuf>, audit: bool) -> Result<i32> {
    let mut cfg = ExperimentConfig::load(config)?;
    if audit {
        cfg.experiment = Experiment::NoiseAudit;
    }
    let dir = out.or_else(|| cfg.out.as_ref().map(|p| cfg.base_dir.as_deref().unwrap_or(Path::new(".")).join(p)));
    let result = run_experiment(&cfg)?;
    finish(&result, dir.as_deref())
}

fn emit(text: &str, output: Option<&Path>) -> Result<i32> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out } => run(&config, out, false),
        Command::AuditNoise { config, out } => run(&config, out, true),
        Command::Fixtures { kind, output } => {
            let text = match kind {
                FixtureKind::Icosphere { level, radius } => {
                    if level > 8 || !(radius > 0.0) {
                        return Err(Error::InvalidArgument("icosphere needs level <= 8 and radius > 0".into()));
                    }
                    io::write_off(&fixtures::icosphere(level, radius))
                }
                FixtureKind::Polygon { vertices, radius, dim } => {
                    io::write_polyline_csv(&fixtures::regular_polygon(vertices, radius, dim)?)
                }
                FixtureKind::Torus { major, minor, nu, nv } => {
                    if !(minor > 0.0 && major > minor) || nu < 3 || nv < 3 {
                        return Err(Error::InvalidArgument("torus needs major > minor > 0 and at least 3 segments".into()));
                    }
                    io::write_off(&fixtures::torus(major, minor, nu, nv))
                }
            };
            emit(&text, output.as_deref())
        }
        Command::Tube { mesh, rho, samples, seed, fit, cell, replicates } => {
            let g = io::load_geometry(&mesh)?;
            let est = tube::tube_volume_mc(&g, rho, samples, seed)?;
            let mut v = serde_json::json!({
                "rho": rho,
                "volume": est.volume,
                "std_error": est.std_error,
                "samples": est.samples,
                "lk": lk(&g),
            });
            if !fit.is_empty() {
                let f = tube::tube_fit(&g, &fit, cell, replicates, seed)?;
                v["fit"] = serde_json::json!({
                    "rhos": f.rhos,
                    "volumes": f.volumes,
                    "std_errors": f.std_errors,
                    "coefficients": f.coefficients,
                    "L": f.l,
                    "L_std_error": f.l_se,
                });
            }
            println!("{}", serde_json::to_string_pretty(&v)?);
            Ok(0)
        }
        Command::Lk { mesh } => {
            let g = io::load_geometry(&mesh)?;
            println!("{}", serde_json::to_string_pretty(&lk(&g))?);
            Ok(0)
        }
    }
}

fn lk(g: &Geometry) -> curvflow::mesh::LkReport {
    match g {
        Geometry::Mesh(m) => m.lk(),
        Geometry::Curve(c) => c.lk(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
