//! Command-line frontend: config ingestion, subcommand dispatch, and result
//! serialization.
//!
//! Exit codes: 0 on success, 2 on usage or configuration errors, 3 on
//! numerical failure. Every command is deterministic given the same config
//! file and seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{sha256_hex, RunConfig, SweepKind};
use crate::error::Error;
use crate::metrics;
use crate::optimizer;
use crate::output::{self, OutputMeta};
use crate::reproduce;
use crate::rmc;
use crate::sim;

#[derive(Debug, Parser)]
#[command(
    name = "dtdq",
    version,
    about = "Exact AoI analysis of discrete-time dual-queue status updates with freezing"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact AoI and peak-AoI distributions and moments (requires k >= 1).
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Residual-mass cutoff for the emitted PMFs.
        #[arg(long)]
        tail_tol: Option<f64>,
    },
    /// Slot-level Monte Carlo run (k >= 1, or k = 0 for zero-wait).
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Measured slots (1% extra warm-up is simulated and discarded).
        #[arg(long)]
        slots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scan k analytically and compare with the zero-wait baseline.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        k_max: Option<u64>,
        /// Slot budget for the zero-wait baseline simulation.
        #[arg(long)]
        slots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Grid sweep over means or variances, per the config's [sweep] section.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        slots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k_max: Option<u64>,
        #[arg(long, value_enum, default_value = "both")]
        format: OutputFormat,
    },
    /// Regenerate a named study (fig3..fig8) at desk scale.
    Reproduce {
        /// One of: fig3, fig4, fig5, fig6, fig7, fig8.
        figure: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Simulation slot budget per point.
        #[arg(long)]
        slots: Option<u64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Dump the state enumerations as CSV.
    DumpStates {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Dump transition matrices and probability vectors as CSV.
    DumpMatrix {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Parses arguments, runs the command, maps errors to exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match &e {
                Error::Numerical(_) | Error::Incomplete(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("output error: {e}"))
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(io_err)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Analyze { common, tail_tol } => cmd_analyze(&common, tail_tol),
        Command::Simulate { common, slots, seed } => cmd_simulate(&common, slots, seed),
        Command::Optimize { common, k_max, slots, seed } => {
            cmd_optimize(&common, k_max, slots, seed)
        }
        Command::Sweep { common, slots, seed, k_max, format } => {
            cmd_sweep(&common, slots, seed, k_max, format)
        }
        Command::Reproduce { figure, out, slots, seed } => {
            ensure_dir(&out)?;
            reproduce::run(&figure, &out, slots, seed)
        }
        Command::DumpStates { common } => cmd_dump_states(&common),
        Command::DumpMatrix { common } => cmd_dump_matrix(&common),
    }
}

fn load(common: &CommonArgs) -> Result<(RunConfig, String), Error> {
    let loaded = RunConfig::from_path(&common.config)?;
    ensure_dir(&common.out)?;
    Ok(loaded)
}

fn cmd_analyze(common: &CommonArgs, tail_tol: Option<f64>) -> Result<(), Error> {
    let (config, hash) = load(common)?;
    let system = config.system.system_config()?;
    if system.k == 0 {
        return Err(Error::InvalidParameter(
            "k = 0 has no analytic model; run `dtdq simulate` for the zero-wait benchmark".into(),
        ));
    }
    let tail_tol = tail_tol.unwrap_or_else(|| config.tail_tol());
    let model = rmc::build_complete_amc(&system)?;
    let report = metrics::aoi_report(&model, tail_tol)?;
    let meta = OutputMeta::new(&hash, None);
    output::write_report_files(&common.out, &meta, &report).map_err(io_err)?;
    println!(
        "aoi_mean={} aoi_second_moment={} paoi_mean={}",
        report.aoi_mean, report.aoi_second_moment, report.paoi_mean
    );
    println!("wrote report.json, aoi_pmf.csv, paoi_pmf.csv to {}", common.out.display());
    Ok(())
}

fn cmd_simulate(common: &CommonArgs, slots: Option<u64>, seed: Option<u64>) -> Result<(), Error> {
    let (config, hash) = load(common)?;
    let system = config.system.system_config()?;
    let sim_section = config.simulation.as_ref();
    let slots = slots
        .or_else(|| sim_section.and_then(|s| s.slots))
        .unwrap_or(4_000_000);
    let seed = seed.or_else(|| sim_section.and_then(|s| s.seed)).unwrap_or(1);
    let result = sim::simulate(&system, slots, seed)?;
    let meta = OutputMeta::new(&hash, Some(seed));
    output::write_sim_files(&common.out, &meta, &result).map_err(io_err)?;
    println!(
        "aoi_mean={}±{} aoi_second_moment={}±{} paoi_mean={}±{} cycles={} obsolete={}",
        result.aoi_mean.value,
        result.aoi_mean.std_err,
        result.aoi_second_moment.value,
        result.aoi_second_moment.std_err,
        result.paoi_mean.value,
        result.paoi_mean.std_err,
        result.cycles,
        result.obsolete_count
    );
    println!("wrote sim_result.json, aoi_histogram.csv to {}", common.out.display());
    Ok(())
}

fn cmd_optimize(
    common: &CommonArgs,
    k_max: Option<u64>,
    slots: Option<u64>,
    seed: Option<u64>,
) -> Result<(), Error> {
    let (config, hash) = load(common)?;
    let base = config.system.base_system()?;
    let section = config.optimize.as_ref();
    let k_max = k_max
        .or_else(|| section.and_then(|o| o.k_max))
        .map(|k| k as usize)
        .unwrap_or_else(|| optimizer::default_k_max(&base));
    let slots = slots
        .or_else(|| section.and_then(|o| o.baseline_slots))
        .unwrap_or(1_000_000);
    let seed = seed.or_else(|| section.and_then(|o| o.seed)).unwrap_or(1);
    let record = optimizer::freezing_gain(&base, k_max, slots, seed)?;
    let meta = OutputMeta::new(&hash, Some(seed));
    output::write_json(&common.out.join("optimum.json"), &meta, &record).map_err(io_err)?;
    output::write_k_curve_csv(&common.out.join("k_curve.csv"), &meta, &record.curve)
        .map_err(io_err)?;
    println!(
        "k_star={} optimum_aoi={} baseline={}±{} gain_percent={}",
        record.k_star,
        record.optimum_aoi,
        record.baseline.value,
        record.baseline.std_err,
        record.gain_percent
    );
    println!("wrote optimum.json, k_curve.csv to {}", common.out.display());
    Ok(())
}

fn cmd_sweep(
    common: &CommonArgs,
    slots: Option<u64>,
    seed: Option<u64>,
    k_max: Option<u64>,
    format: OutputFormat,
) -> Result<(), Error> {
    let (config, hash) = load(common)?;
    let section = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("config has no [sweep] section".into()))?;
    let priority = config.system.priority.into();
    let family = section.family()?;
    let slots = slots.or(section.slots).unwrap_or(1_000_000);
    let seed = seed.or(section.seed).unwrap_or(1);
    let k_max = k_max.or(section.k_max).map(|k| k as usize);

    let need = |field: &Option<Vec<f64>>, name: &str| {
        field.clone().ok_or_else(|| {
            Error::InvalidParameter(format!("sweep.{name} is required for this sweep kind"))
        })
    };
    let sweep = match section.kind {
        SweepKind::Mean => optimizer::sweep_mean(
            family,
            priority,
            &need(&section.means, "means")?,
            k_max,
            slots,
            seed,
        )?,
        SweepKind::Variance => {
            let mean = section.mean.ok_or_else(|| {
                Error::InvalidParameter("sweep.mean is required for a variance sweep".into())
            })?;
            optimizer::sweep_variance(
                mean,
                priority,
                &need(&section.variances, "variances")?,
                k_max,
                slots,
                seed,
            )?
        }
        SweepKind::Nonidentical => optimizer::sweep_nonidentical(
            family,
            priority,
            &need(&section.means1, "means1")?,
            &need(&section.means2, "means2")?,
            k_max,
            slots,
            seed,
        )?,
    };

    let meta = OutputMeta::new(&hash, Some(seed));
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        output::write_json(&common.out.join("sweep.json"), &meta, &sweep).map_err(io_err)?;
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        output::write_sweep_long_csv(&common.out.join("sweep_long.csv"), &meta, &sweep)
            .map_err(io_err)?;
        output::write_sweep_gain_csv(&common.out.join("sweep_gain.csv"), &meta, &sweep)
            .map_err(io_err)?;
    }
    reproduce::emit_sweep_plot(&common.out, &meta, &sweep).map_err(io_err)?;
    let best = sweep
        .points
        .iter()
        .max_by(|a, b| a.gain.gain_percent.partial_cmp(&b.gain.gain_percent).unwrap());
    if let Some(best) = best {
        println!(
            "points={} max_gain_percent={} at mean1={} mean2={} (k_star={})",
            sweep.points.len(),
            best.gain.gain_percent,
            best.mean1,
            best.mean2,
            best.gain.k_star
        );
    }
    println!("wrote sweep outputs to {}", common.out.display());
    Ok(())
}

fn cmd_dump_states(common: &CommonArgs) -> Result<(), Error> {
    let (config, hash) = load(common)?;
    let system = config.system.system_config()?;
    let amc = crate::amc::build_amc(&system)?;
    let rmc_model = rmc::build_rmc(&system)?;
    let meta = OutputMeta::new(&hash, None);
    output::write_amc_states_csv(&common.out.join("amc_states.csv"), &meta, &amc)
        .map_err(io_err)?;
    output::write_rmc_states_csv(&common.out.join("rmc_states.csv"), &meta, &rmc_model)
        .map_err(io_err)?;
    println!(
        "wrote amc_states.csv ({} states), rmc_states.csv ({} states) to {}",
        amc.size(),
        rmc_model.size(),
        common.out.display()
    );
    Ok(())
}

fn cmd_dump_matrix(common: &CommonArgs) -> Result<(), Error> {
    let (config, hash) = load(common)?;
    let system = config.system.system_config()?;
    let mut rmc_model = rmc::build_rmc(&system)?;
    rmc::solve_steady_state(&mut rmc_model)?;
    let mut amc = crate::amc::build_amc(&system)?;
    rmc::initial_vector(&rmc_model, &mut amc)?;
    let meta = OutputMeta::new(&hash, None);
    let out = &common.out;
    output::write_amc_matrix_csv(&out.join("amc_matrix.csv"), &meta, &amc).map_err(io_err)?;
    output::write_amc_vector_csv(&out.join("amc_cs.csv"), &meta, &amc, &amc.c_s)
        .map_err(io_err)?;
    output::write_amc_vector_csv(&out.join("amc_cu.csv"), &meta, &amc, &amc.c_u)
        .map_err(io_err)?;
    output::write_amc_vector_csv(&out.join("amc_v.csv"), &meta, &amc, &amc.v).map_err(io_err)?;
    output::write_amc_vector_csv(&out.join("amc_sigma.csv"), &meta, &amc, amc.sigma()?)
        .map_err(io_err)?;
    output::write_rmc_matrix_csv(&out.join("rmc_matrix.csv"), &meta, &rmc_model)
        .map_err(io_err)?;
    output::write_rmc_vector_csv(&out.join("rmc_pi.csv"), &meta, &rmc_model, rmc_model.pi()?)
        .map_err(io_err)?;
    println!("wrote matrix and vector dumps to {}", out.display());
    Ok(())
}

/// Stable hash for commands that run without a config file.
pub fn descriptor_hash(descriptor: &str) -> String {
    sha256_hex(descriptor.as_bytes())
}
