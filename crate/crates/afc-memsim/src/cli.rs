//! Command-line interface.
//!
//! Every run reads a config (a file path or a built-in preset name), runs
//! one experiment, writes a JSON report into the output directory, and with
//! `--format csv` additionally writes the tabular outputs. Exit codes:
//! 0 success, 1 configuration error, 2 runtime error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::ExperimentConfig;
use crate::runner::{
    run_echo_trace, run_efficiency_curve, run_null_phase, run_oracle, run_qpt, RunnerError,
};

#[derive(Parser)]
#[command(name = "afc-memsim", version, about = "Atomic-frequency-comb optical memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate the probe pulse and report the echo trace.
    Echo(CommonOpts),
    /// Simulate process tomography of the polarization memory.
    Qpt(QptOpts),
    /// Sweep storage time and tabulate recall efficiency.
    Efficiency(CommonOpts),
    /// Cross-check the propagation engine against the discrete-atom oracle.
    Oracle(CommonOpts),
    /// Solve for the compensation phase-plate angle.
    #[command(name = "null-phase")]
    NullPhase(CommonOpts),
}

#[derive(Args)]
struct CommonOpts {
    /// Config file path or preset name (paper_200ns, paper_500ns, ideal).
    #[arg(long)]
    config: String,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for reports and tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct QptOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Override the trials per tomography setting.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(RunnerError::Config(e)) => {
            eprintln!("config error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig, RunnerError> {
    let mut cfg = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), RunnerError> {
    match cli.command {
        Command::Echo(opts) => {
            let cfg = load_config(&opts)?;
            let report = run_echo_trace(&cfg)?;
            write_json(&opts, "echo_report.json", &report.to_json())?;
            if opts.format == OutputFormat::Csv {
                let mut buf = String::from("time_ns,counts_per_bin_per_s\n");
                for p in &report.results.trace {
                    buf.push_str(&format!("{},{}\n", p.time_ns, p.counts_per_bin_per_s));
                }
                write_file(&opts.out, "echo_trace.csv", buf.as_bytes())?;
            }
            println!(
                "echo: eta1 = {:.4}, first echo at {:.1} ns, transmitted fraction {:.4}",
                report.results.eta1,
                report.results.echoes.first().map(|e| e.center_time_ns).unwrap_or(f64::NAN),
                report.results.transmitted_fraction
            );
            Ok(())
        }
        Command::Qpt(opts) => {
            let cfg = load_config(&opts.common)?;
            let run = run_qpt(&cfg, opts.trials)?;
            write_json(&opts.common, "qpt_report.json", &run.report.to_json())?;
            if opts.common.format == OutputFormat::Csv {
                let mut buf = Vec::new();
                run.chi_mle.write_csv(&mut buf)?;
                write_file(&opts.common.out, "chi_mle.csv", &buf)?;
                buf.clear();
                run.chi_linear.write_csv(&mut buf)?;
                write_file(&opts.common.out, "chi_linear.csv", &buf)?;
                buf.clear();
                run.dataset.write_csv(&mut buf)?;
                write_file(&opts.common.out, "tomography_counts.csv", &buf)?;
            }
            let r = &run.report.results;
            println!(
                "qpt: F_p = {:.4} +- {:.4} (linear {:.4}), F_avg = {:.4}, eta1 = {:.4}, trials/setting = {}",
                r.f_p, r.f_p_std, r.f_p_linear, r.f_avg, r.eta1, r.trials_per_setting
            );
            Ok(())
        }
        Command::Efficiency(opts) => {
            let cfg = load_config(&opts)?;
            let report = run_efficiency_curve(&cfg, &cfg.efficiency.storage_times_ns)?;
            write_json(&opts, "efficiency_report.json", &report.to_json())?;
            if opts.format == OutputFormat::Csv {
                let mut buf = String::from("storage_time_ns,efficiency\n");
                for p in &report.results.points {
                    buf.push_str(&format!("{},{}\n", p.storage_time_ns, p.eta1));
                }
                write_file(&opts.out, "efficiency_curve.csv", buf.as_bytes())?;
            }
            println!("efficiency: {} points at tooth width {} MHz", report.results.points.len(), report.results.tooth_fwhm_mhz);
            Ok(())
        }
        Command::Oracle(opts) => {
            let cfg = load_config(&opts)?;
            let report = run_oracle(&cfg)?;
            write_json(&opts, "oracle_report.json", &report.to_json())?;
            if opts.format == OutputFormat::Csv {
                let c = &report.results.comparison;
                let buf = format!(
                    "oracle_peak_time_ns,expected_time_ns,grid_step_ns,oracle_peak_intensity,transfer_dephasing_factor,ratio\n{},{},{},{},{},{}\n",
                    c.oracle_peak_time_ns,
                    c.expected_time_ns,
                    c.grid_step_ns,
                    c.oracle_peak_intensity,
                    c.transfer_dephasing_factor,
                    c.ratio
                );
                write_file(&opts.out, "oracle_comparison.csv", buf.as_bytes())?;
            }
            let c = &report.results.comparison;
            println!(
                "oracle: peak at {:.2} ns (expected {:.2}), dephasing ratio {:.3}",
                c.oracle_peak_time_ns, c.expected_time_ns, c.ratio
            );
            Ok(())
        }
        Command::NullPhase(opts) => {
            let cfg = load_config(&opts)?;
            let report = run_null_phase(&cfg)?;
            write_json(&opts, "null_phase_report.json", &report.to_json())?;
            let r = &report.results;
            println!(
                "null-phase: theta = {:.6} rad, fidelity {:.6} -> {:.6}",
                r.phase_plate_rad, r.fidelity_before, r.fidelity_after
            );
            Ok(())
        }
    }
}

fn write_json(opts: &CommonOpts, name: &str, json: &str) -> Result<(), RunnerError> {
    write_file(&opts.out, name, json.as_bytes())
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), RunnerError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path)?;
    f.write_all(bytes)?;
    println!("wrote {}", path.display());
    Ok(())
}
