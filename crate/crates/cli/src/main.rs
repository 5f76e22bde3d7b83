//! `qsc` — experiment driver for quantum-state channel simulation, rate
//! estimation, auxiliary-channel bounds, and difference-function optimization.
//!
//! Channels are given either as JSON files or as inline preset specs
//! (`qgec:...`, `gec:...`, `bsc:...`); see `channel_spec` below. Every command
//! is deterministic under an explicit `--seed`, and every CSV written to disk
//! is accompanied by a `<name>.manifest.json` recording the resolved run
//! parameters and input digests.
//!
//! Exit codes: 0 ok, 2 validation failure, 3 numerical failure, 64 usage.

mod manifest;
mod spec;

use clap::{Args, Parser, Subcommand};
use qsc_core::{
    algorithm2_estimate, algorithm2_on_trajectory, estimate_bounds, indecomposability_probe,
    optimize_delta, random_aux, sample_trajectory, validate, DensityOperator, Error,
    OptimizerConfig, Trajectory,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "qsc",
    version,
    about = "Simulate quantum-state channels, estimate information rates, and optimize auxiliary-channel bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonSampling {
    /// Trajectory length.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// RNG seed; identical seeds give byte-identical outputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input pmf as comma-separated probabilities (default: uniform).
    #[arg(long)]
    q: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check Choi positivity and trace preservation of a channel.
    Validate {
        /// Channel file or preset spec.
        channel: String,
        /// Validation tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Estimate the information rate by Monte-Carlo state-metric recursions.
    Estimate {
        /// Channel file or preset spec.
        channel: String,
        #[command(flatten)]
        sampling: CommonSampling,
        /// Initial memory state: "ground", "mixed", or a JSON matrix file.
        #[arg(long, default_value = "ground")]
        rho0: String,
        /// Write the CSV (plus manifest) here in addition to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate auxiliary-channel upper/lower bounds on a shared trajectory.
    Bounds {
        /// True channel file or preset spec.
        true_channel: String,
        /// Auxiliary channel file or preset spec.
        aux_channel: String,
        #[command(flatten)]
        sampling: CommonSampling,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize the difference function over auxiliary channels by projected
    /// gradient descent on true-channel data.
    Optimize {
        /// Data source: a trace file (data-driven mode) or a channel file /
        /// preset spec to sample from.
        source: String,
        /// Auxiliary memory dimension.
        #[arg(long, default_value_t = 2)]
        aux_dim: usize,
        /// Step size.
        #[arg(long, default_value_t = 0.05)]
        gamma: f64,
        /// Maximum number of gradient updates.
        #[arg(long, default_value_t = 400)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trajectory length when sampling from a channel source.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        q: Option<String>,
        /// Initial auxiliary channel: "random" or a channel JSON file.
        #[arg(long, default_value = "random")]
        init: String,
        /// Restrict the auxiliary channel to classical (diagonal) form.
        #[arg(long)]
        diagonal: bool,
        /// Write the optimized auxiliary channel here.
        #[arg(long, default_value = "aux-optimized.json")]
        out_channel: PathBuf,
        /// Write the per-iteration history CSV here.
        #[arg(long, default_value = "optimize-history.csv")]
        history: PathBuf,
        /// Record wall-clock seconds in the history CSV (off keeps reruns
        /// byte-identical).
        #[arg(long)]
        timings: bool,
    },
    /// Sweep a preset parameter grid, estimating the rate at every point.
    Sweep {
        /// Preset name: fig6a, fig6b, fig6c, or fig6d.
        preset: String,
        /// Number of grid points.
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also optimize a d-dimensional auxiliary lower bound per point.
        #[arg(long)]
        aux_dim: Option<usize>,
        /// Gradient updates per point when --aux-dim is set.
        #[arg(long, default_value_t = 200)]
        opt_iters: usize,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Sample a trajectory and write it as a trace file.
    Sample {
        /// Channel file or preset spec.
        channel: String,
        #[command(flatten)]
        sampling: CommonSampling,
        #[arg(long, default_value = "ground")]
        rho0: String,
        #[arg(long, default_value = "trace.tsv")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
        Error::Json(_)
        | Error::Format { .. }
        | Error::InvalidPmf { .. }
        | Error::UnknownSymbol { .. }
        | Error::Dimension { .. }
        | Error::NotSquare { .. }
        | Error::ParameterRange { .. }
        | Error::TrajectoryMismatch { .. } => EXIT_USAGE,
        Error::Completeness { .. }
        | Error::ChoiNotPsd { .. }
        | Error::PovmIncomplete { .. }
        | Error::NotStochastic { .. }
        | Error::InvalidDensity { .. } => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

fn parse_q(q: &Option<String>, num_inputs: usize) -> Result<Vec<f64>, Error> {
    match q {
        None => Ok(vec![1.0 / num_inputs as f64; num_inputs]),
        Some(text) => {
            let parsed: Result<Vec<f64>, _> =
                text.split(',').map(|t| t.trim().parse::<f64>()).collect();
            parsed.map_err(|_| Error::InvalidPmf {
                reason: format!("cannot parse '{text}'"),
            })
        }
    }
}

fn parse_rho0(spec: &str, dim: usize) -> Result<DensityOperator, Error> {
    match spec {
        "ground" => Ok(DensityOperator::ground(dim)),
        "mixed" => Ok(DensityOperator::maximally_mixed(dim)),
        path => {
            let text = std::fs::read_to_string(path)?;
            let rows: Vec<Vec<[f64; 2]>> = serde_json::from_str(&text)?;
            let d = rows.len();
            let m = qsc_core::ComplexMatrix::from_fn(d, d, |i, j| {
                qsc_core::Complex64::new(rows[i][j][0], rows[i][j][1])
            });
            DensityOperator::new(m)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Validate { channel, tol } => cmd_validate(&channel, tol),
        Command::Estimate {
            channel,
            sampling,
            rho0,
            out,
        } => cmd_estimate(&channel, &sampling, &rho0, out.as_deref()),
        Command::Bounds {
            true_channel,
            aux_channel,
            sampling,
            out,
        } => cmd_bounds(&true_channel, &aux_channel, &sampling, out.as_deref()),
        Command::Optimize {
            source,
            aux_dim,
            gamma,
            iters,
            seed,
            n,
            q,
            init,
            diagonal,
            out_channel,
            history,
            timings,
        } => cmd_optimize(
            &source,
            aux_dim,
            gamma,
            iters,
            seed,
            n,
            &q,
            &init,
            diagonal,
            &out_channel,
            &history,
            timings,
        ),
        Command::Sweep {
            preset,
            points,
            n,
            seed,
            aux_dim,
            opt_iters,
            out,
        } => cmd_sweep(&preset, points, n, seed, aux_dim, opt_iters, &out),
        Command::Sample {
            channel,
            sampling,
            rho0,
            out,
        } => cmd_sample(&channel, &sampling, &rho0, &out),
    }
}

fn cmd_validate(channel: &str, tol: f64) -> Result<ExitCode, Error> {
    let ch = spec::load_channel_spec_lenient(channel)?;
    let report = validate(&ch, tol);
    print!("{report}");
    Ok(if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn cmd_estimate(
    channel: &str,
    sampling: &CommonSampling,
    rho0_spec: &str,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let ch = spec::load_channel_spec(channel)?;
    let q = parse_q(&sampling.q, ch.num_inputs())?;
    let rho0 = parse_rho0(rho0_spec, ch.dim())?;
    let est = algorithm2_estimate(&ch, &q, sampling.n, Some(&rho0), sampling.seed)?;
    let mut csv = String::from("# qsc-csv v1\n");
    csv.push_str("channel,n,seed,rho0,h_x_bits,h_y_bits,h_xy_bits,rate_bits,se_bits\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        channel,
        est.n,
        sampling.seed,
        rho0_spec,
        est.h_x_bits,
        est.h_y_bits,
        est.h_xy_bits,
        est.rate_bits,
        est.std_error_bits
    ));
    print!("{csv}");
    if let Some(path) = out {
        std::fs::write(path, &csv)?;
        manifest::write(
            path,
            "estimate",
            sampling.seed,
            serde_json::json!({
                "channel": channel,
                "n": sampling.n,
                "q": q,
                "rho0": rho0_spec,
            }),
            &[channel],
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds(
    true_channel: &str,
    aux_channel: &str,
    sampling: &CommonSampling,
    out: Option<&Path>,
) -> Result<ExitCode, Error> {
    let true_ch = spec::load_channel_spec(true_channel)?;
    let aux = spec::load_channel_spec(aux_channel)?;
    let q = parse_q(&sampling.q, true_ch.num_inputs())?;
    let rho0 = DensityOperator::ground(true_ch.dim());
    let traj = sample_trajectory(&true_ch, &q, sampling.n, &rho0, sampling.seed)?;
    let bounds = estimate_bounds(&true_ch, &aux, &traj, &q)?;
    let rate = algorithm2_on_trajectory(&true_ch, &q, &traj, &rho0, false)?;
    let mut csv = String::from("# qsc-csv v1\n");
    csv.push_str("true_channel,aux_channel,n,seed,upper_bits,lower_bits,delta_bits,rate_bits,rate_se_bits\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        true_channel,
        aux_channel,
        bounds.n,
        sampling.seed,
        bounds.upper_bits,
        bounds.lower_bits,
        bounds.delta_bits,
        rate.rate_bits,
        rate.std_error_bits
    ));
    print!("{csv}");
    if let Some(path) = out {
        std::fs::write(path, &csv)?;
        manifest::write(
            path,
            "bounds",
            sampling.seed,
            serde_json::json!({
                "true_channel": true_channel,
                "aux_channel": aux_channel,
                "n": sampling.n,
                "q": q,
            }),
            &[true_channel, aux_channel],
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    source: &str,
    aux_dim: usize,
    gamma: f64,
    iters: usize,
    seed: u64,
    n: usize,
    q_flag: &Option<String>,
    init: &str,
    diagonal: bool,
    out_channel: &Path,
    history_path: &Path,
    timings: bool,
) -> Result<ExitCode, Error> {
    // A trace file is the data-driven mode; anything else is a channel to
    // sample from (which also enables the delta column in the history).
    let (traj, true_log2_xy): (Trajectory, Option<f64>) = if spec::is_trace_file(source) {
        (qsc_core::io::read_trace(source)?, None)
    } else {
        let true_ch = spec::load_channel_spec(source)?;
        let q = parse_q(q_flag, true_ch.num_inputs())?;
        let rho0 = DensityOperator::ground(true_ch.dim());
        let traj = sample_trajectory(&true_ch, &q, n, &rho0, seed)?;
        let est = algorithm2_on_trajectory(&true_ch, &q, &traj, &rho0, false)?;
        // (1/n) log2 P(y|x) = H(X) - H(X,Y) of the estimate.
        (traj, Some(est.h_x_bits - est.h_xy_bits))
    };
    let num_inputs = traj.input_symbols.len();
    let q = parse_q(q_flag, num_inputs)?;

    let inputs = qsc_core::Alphabet::new(traj.input_symbols.clone());
    let outputs = qsc_core::Alphabet::new(traj.output_symbols.clone());
    let aux0 = match init {
        "random" => random_aux(aux_dim, &inputs, &outputs, seed.wrapping_add(1))?,
        path => spec::load_channel_spec(path)?,
    };

    let cfg = OptimizerConfig {
        step_size: gamma,
        max_iterations: iters,
        diagonal_aux: diagonal,
        trajectory_length: Some(n.min(traj.len())),
        seed,
        ..OptimizerConfig::default()
    };
    let (aux, history) = optimize_delta(&traj, &aux0, &q, &cfg, true_log2_xy)?;

    qsc_core::io::save_channel(&aux, out_channel)?;
    let mut csv = String::from("# qsc-csv v1\n");
    csv.push_str("iteration,proxy_bits,delta_bits,lower_bits,gradient_norm,wall_clock_s\n");
    for rec in &history {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.iteration,
            rec.proxy_bits,
            rec.delta_bits.map(|d| d.to_string()).unwrap_or_default(),
            rec.lower_bits,
            rec.gradient_norm,
            if timings {
                rec.elapsed_secs.to_string()
            } else {
                String::new()
            }
        ));
    }
    std::fs::write(history_path, &csv)?;
    manifest::write(
        history_path,
        "optimize",
        seed,
        serde_json::json!({
            "source": source,
            "aux_dim": aux_dim,
            "gamma": gamma,
            "iters": iters,
            "n": n,
            "q": q,
            "init": init,
            "diagonal": diagonal,
            "out_channel": out_channel.display().to_string(),
        }),
        &[source],
    )?;
    println!(
        "optimize: {} iterations, proxy {} -> {} bits, auxiliary channel written to {}",
        history.len(),
        history.first().map(|r| r.proxy_bits).unwrap_or(f64::NAN),
        history.last().map(|r| r.proxy_bits).unwrap_or(f64::NAN),
        out_channel.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    preset_name: &str,
    points: usize,
    n_override: Option<usize>,
    seed: u64,
    aux_dim: Option<usize>,
    opt_iters: usize,
    out: &Path,
) -> Result<ExitCode, Error> {
    let preset = qsc_core::SweepPreset::by_name(preset_name).ok_or_else(|| Error::Format {
        reason: format!("unknown preset '{preset_name}' (expected fig6a..fig6d)"),
    })?;
    let n = n_override.unwrap_or(preset.n);
    let grid = preset.grid(points);

    struct Row {
        value: f64,
        rate: f64,
        se: f64,
        lower: Option<f64>,
        probe_gap: f64,
    }

    let workers: usize = std::env::var("QSC_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        })
        .max(1);

    let mut rows: Vec<Option<Result<Row, Error>>> = Vec::new();
    rows.resize_with(grid.len(), || None);
    let rows = std::sync::Mutex::new(rows);
    let next = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..workers.min(grid.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= grid.len() {
                    break;
                }
                let value = grid[i];
                // Independent per-point seeds derived from the run seed.
                let point_seed = seed ^ (i as u64);
                let result = (|| -> Result<Row, Error> {
                    let ch = preset.channel_at(value, None)?;
                    let q = vec![0.5, 0.5];
                    let rho0 = DensityOperator::ground(ch.dim());
                    let traj = sample_trajectory(&ch, &q, n, &rho0, point_seed)?;
                    let est = algorithm2_on_trajectory(&ch, &q, &traj, &rho0, false)?;
                    let lower = match aux_dim {
                        None => None,
                        Some(d) => {
                            let aux0 = random_aux(d, ch.inputs(), ch.outputs(), point_seed ^ 0x5eed)?;
                            let cfg = OptimizerConfig {
                                max_iterations: opt_iters,
                                trajectory_length: Some(n),
                                seed: point_seed,
                                ..OptimizerConfig::default()
                            };
                            let (aux, _) = optimize_delta(&traj, &aux0, &q, &cfg, None)?;
                            Some(qsc_core::estimate_lower(&aux, &traj, &q)?)
                        }
                    };
                    let probe_gap = indecomposability_probe(
                        &ch,
                        &q,
                        &DensityOperator::ground(ch.dim()),
                        &DensityOperator::maximally_mixed(ch.dim()),
                        50,
                        4,
                        point_seed,
                    )?;
                    Ok(Row {
                        value,
                        rate: est.rate_bits,
                        se: est.std_error_bits,
                        lower,
                        probe_gap,
                    })
                })();
                rows.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let mut csv = String::from("# qsc-csv v1\n");
    csv.push_str("preset,parameter,n,seed,rate_bits,se_bits,lower_bits,probe_gap\n");
    for slot in rows.into_inner().unwrap() {
        let row = slot.expect("worker filled every slot")?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            preset_name,
            row.value,
            n,
            seed,
            row.rate,
            row.se,
            row.lower.map(|v| v.to_string()).unwrap_or_default(),
            row.probe_gap
        ));
    }
    std::fs::write(out, &csv)?;
    manifest::write(
        out,
        "sweep",
        seed,
        serde_json::json!({
            "preset": preset_name,
            "points": points,
            "n": n,
            "aux_dim": aux_dim,
            "opt_iters": opt_iters,
        }),
        &[],
    )?;
    println!("sweep: wrote {} points to {}", grid.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample(
    channel: &str,
    sampling: &CommonSampling,
    rho0_spec: &str,
    out: &Path,
) -> Result<ExitCode, Error> {
    let ch = spec::load_channel_spec(channel)?;
    let q = parse_q(&sampling.q, ch.num_inputs())?;
    let rho0 = parse_rho0(rho0_spec, ch.dim())?;
    let mut traj = sample_trajectory(&ch, &q, sampling.n, &rho0, sampling.seed)?;
    traj.initial_state = rho0_spec.to_string();
    qsc_core::io::write_trace(&traj, out)?;
    manifest::write(
        out,
        "sample",
        sampling.seed,
        serde_json::json!({
            "channel": channel,
            "n": sampling.n,
            "q": q,
            "rho0": rho0_spec,
        }),
        &[channel],
    )?;
    println!("sample: wrote {} pairs to {}", traj.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

