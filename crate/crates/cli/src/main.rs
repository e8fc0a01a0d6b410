use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use smc_core::geometry::{
    compatibility_constant, gaussian_width_lower, gaussian_width_upper_polar, partial_complexity, rsc_verify,
    ConeSampler, GeometryEstimate, PolarChoice, SamplerMethod, SamplingLaw, SpikySlice, WidthSet,
};
use smc_core::harness::{
    generate_instance, run_sweep, verify, write_outputs, ExperimentConfig, RecordFormat, SampleSize,
};
use smc_core::io;
use smc_core::model::sample_omega;
use smc_core::solvers::{solve, EstimatorConfig, EstimatorKind, GlmLoss};
use smc_core::{Error, NormSpec};

#[derive(Parser)]
#[command(name = "smc", version, about = "Structured matrix completion experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Estimator {
    ConstrainedNorm,
    Dantzig,
    GlmRegularized,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one completion problem from a MatrixMarket coordinate file.
    Solve {
        /// Observations (1-based coordinate MatrixMarket).
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value = "nuclear")]
        norm: NormSpec,
        #[arg(long, value_enum, default_value = "constrained-norm")]
        estimator: Estimator,
        #[arg(long)]
        lambda: f64,
        /// Spikiness cap; omit for no box.
        #[arg(long, default_value_t = f64::INFINITY)]
        alpha_star: f64,
        #[arg(long, default_value = "gaussian")]
        loss: GlmLoss,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run a config-driven sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the seed list by seed, seed+1, ... of the same length.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Width, compatibility, curvature and partial complexity estimates for
    /// the instances of a config.
    Geometry {
        #[arg(long)]
        config: PathBuf,
        /// Use this matrix instead of generated instances.
        #[arg(long)]
        theta: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Run the built-in oracle checks on small instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NONCONVERGED: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence(_) => EXIT_NONCONVERGED,
        Error::Io(_) | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn record_format(f: Format) -> RecordFormat {
    match f {
        Format::Csv => RecordFormat::Csv,
        Format::Json => RecordFormat::Json,
    }
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Solve {
            obs,
            norm,
            estimator,
            lambda,
            alpha_star,
            loss,
            max_iter,
            tol,
            out,
            format,
        } => {
            let (omega, y) = io::read_observations(&obs)?;
            let kind = match estimator {
                Estimator::ConstrainedNorm => EstimatorKind::ConstrainedNorm { lambda },
                Estimator::Dantzig => EstimatorKind::Dantzig { lambda },
                Estimator::GlmRegularized => EstimatorKind::GlmRegularized { lambda, loss },
            };
            let cfg = EstimatorConfig {
                estimator: kind,
                alpha_star,
                max_iter,
                objective_tol: tol,
                constraint_tol: tol,
            };
            let res = solve(&y, &omega, &norm, &cfg)?;
            std::fs::create_dir_all(&out)?;
            io::write_matrix(&out.join("theta.mtx"), &res.theta)?;
            let s = res.summary(Some("theta.mtx"));
            match format {
                Format::Json => std::fs::write(out.join("solve.json"), res.to_json(Some("theta.mtx")))?,
                Format::Csv => std::fs::write(
                    out.join("solve.csv"),
                    format!(
                        "objective,constraint_residual,iterations,converged,certificate,wall_time_s,theta_path\n{},{},{},{},{},{:.6},theta.mtx\n",
                        s.objective, s.constraint_residual, s.iterations, s.converged, s.certificate, s.wall_time_s
                    ),
                )?,
            }
            println!(
                "objective {} iterations {} converged {} -> {}",
                s.objective,
                s.iterations,
                s.converged,
                out.display()
            );
            Ok(if res.converged { 0 } else { EXIT_NONCONVERGED })
        }
        Command::Sweep {
            config,
            out,
            seed,
            format,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config).map_err(config_error)?;
            if let Some(s) = seed {
                cfg.override_seed(s);
            }
            let dir = out.unwrap_or_else(|| cfg.output_path());
            let output = run_sweep(&cfg)?;
            write_outputs(&dir, &cfg, &output, record_format(format))?;
            print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
            let stuck = output.records.iter().filter(|r| r.is_nonconverged()).count();
            if stuck > 0 {
                eprintln!("{stuck} of {} trials did not converge", output.records.len());
                return Ok(EXIT_NONCONVERGED);
            }
            Ok(0)
        }
        Command::Geometry {
            config,
            theta,
            out,
            seed,
            format,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config).map_err(config_error)?;
            if let Some(s) = seed {
                cfg.override_seed(s);
            }
            let dir = out.unwrap_or_else(|| cfg.output_path());
            let anchors = match theta {
                Some(p) => vec![(0, io::read_matrix(&p)?)],
                None => cfg
                    .sweep
                    .seeds
                    .iter()
                    .map(|&s| Ok((s, generate_instance(&cfg, s)?)))
                    .collect::<Result<Vec<_>, Error>>()?,
            };
            let rows = geometry_rows(&cfg, &anchors)?;
            write_geometry(&dir, &rows, format)?;
            for (seed, e) in &rows {
                println!(
                    "{seed} {} {} ± {} ({})",
                    e.estimator,
                    e.value,
                    e.stderr,
                    e.direction.as_str()
                );
            }
            Ok(0)
        }
        Command::Verify { seed, format } => {
            let checks = verify(seed)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&checks).expect("plain data")),
                Format::Csv => {
                    for c in &checks {
                        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                    }
                }
            }
            Ok(if checks.iter().all(|c| c.passed) {
                0
            } else {
                EXIT_CHECK_FAILED
            })
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Io(_) | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn geometry_rows(
    cfg: &ExperimentConfig,
    anchors: &[(u64, smc_core::DenseMatrix)],
) -> Result<Vec<(u64, GeometryEstimate)>, Error> {
    let spec = cfg.instance.norm;
    let g = cfg.geometry;
    let mut rows = Vec::new();
    for (seed, theta) in anchors {
        let sampler = ConeSampler::new(spec, theta.clone(), SamplerMethod::BoundaryRay, 10)?;
        let set = WidthSet::from(sampler);
        let (d1, d2) = theta.shape();
        let lower = gaussian_width_lower(&set, g.n_gauss, g.n_ascent, *seed)?;
        let width_sq = lower.value * lower.value;
        rows.push((*seed, lower));
        rows.push((
            *seed,
            gaussian_width_upper_polar(&spec, theta, g.n_gauss, PolarChoice::Optimal, *seed)?,
        ));
        rows.push((*seed, compatibility_constant(&set, &spec, g.n_compat, *seed)?));
        for m_spec in &cfg.sweep.m {
            let m = m_spec.resolve(d1, d2, width_sq);
            let law = match m_spec {
                SampleSize::Full => SamplingLaw::Full,
                _ => SamplingLaw::Uniform { m },
            };
            let omega = match m_spec {
                SampleSize::Full => smc_core::ObservationSet::full(d1, d2)?,
                _ => sample_omega(d1, d2, m, *seed)?,
            };
            let mut e = rsc_verify(&omega, &set, SpikySlice::unrestricted(), g.n_rsc, *seed)?;
            e.estimator = format!("rsc-curvature[m={m}]");
            rows.push((*seed, e));
            let mut e = partial_complexity(&set, law, cfg.sweep.noise, g.n_gauss, g.n_ascent, *seed)?;
            e.estimator = format!("partial-complexity[m={m}]");
            rows.push((*seed, e));
        }
    }
    Ok(rows)
}

fn write_geometry(dir: &Path, rows: &[(u64, GeometryEstimate)], format: Format) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Csv => {
            let mut s = format!("instance_seed,{}\n", GeometryEstimate::CSV_HEADER);
            for (seed, e) in rows {
                s.push_str(&format!("{seed},{}\n", e.csv_row()));
            }
            std::fs::write(dir.join("geometry.csv"), s)?;
        }
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(seed, e)| serde_json::json!({ "instance_seed": seed, "estimate": e }))
                .collect();
            std::fs::write(
                dir.join("geometry.json"),
                serde_json::to_string_pretty(&v).expect("plain data"),
            )?;
        }
    }
    Ok(())
}
