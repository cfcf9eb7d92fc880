//! `hetpol` command-line interface.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 I/O failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hetpol::fock::{
    dense_oracle, imbalanced_twin_state, min_detectable_angle, number_difference_moments, parse_state_spec,
    ObservableSpec, PolarizationRotation,
};
use hetpol::scenario::{
    self, emit_summary, emit_sweep_summary, parse_config, preset, run_scenario, spectra_csv, sweep_csv, sweep_theta,
    RunMode, ScenarioConfig,
};
use hetpol::sideband::{to_db, Calibration};
use hetpol::spectral::shot_noise_reference;
use hetpol::timeseries::DetectorConfig;
use hetpol::{trace_dump, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Summary,
}

#[derive(Debug, Parser)]
#[command(name = "hetpol", version, about = "Twin-beam heterodyne polarimetry simulator")]
struct Cli {
    /// Scenario configuration file (flat dotted keys).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in preset used when no --config is given.
    #[arg(long, global = true, value_parser = ["fig2a", "fig2b", "fig2c"])]
    preset: Option<String>,

    /// Overrides grid.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Summary)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fock-space moments of the rotated number difference, or θ_min.
    Fock {
        /// State, e.g. "twin:[1,1]" or "0.6*ket:(2,2) + 0.8i*ket:(1,3)".
        #[arg(long, default_value = "twin:[1,1]")]
        state: String,
        /// Truncation; defaults to the largest occupation plus one.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta_deg: f64,
        /// Also evaluate the dense-matrix oracle.
        #[arg(long)]
        oracle: bool,
        /// Report the minimum detectable angle of the imbalanced twin state
        /// with this photon number instead.
        #[arg(long)]
        min_angle_n: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Analytic sideband-model curves and metrics.
    Model,
    /// Time-domain run of the configured scenario.
    Simulate {
        /// Also write the raw difference photocurrent here.
        #[arg(long)]
        dump_trace: Option<PathBuf>,
    },
    /// Sweep the rotation angle.
    Sweep {
        /// Comma-separated angles in degrees.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        thetas_deg: Vec<f64>,
        /// Comma-separated seeds, one per angle or a single shared seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Shot-noise reference trace of the configured operating point.
    Calibrate,
    /// Run a built-in preset.
    Scenario {
        #[arg(value_parser = ["fig2a", "fig2b", "fig2c"])]
        name: String,
    },
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut config = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Error::Config("pass --config <file> or --preset <fig2a|fig2b|fig2c>".into())),
    };
    if let Some(seed) = cli.seed {
        config.grid.seed = seed;
    }
    Ok(config)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn key_values(format: Format, rows: &[(&str, String)]) -> String {
    let mut out = String::new();
    if format == Format::Csv {
        out.push_str("quantity,value\n");
    }
    for (k, v) in rows {
        match format {
            Format::Csv => out.push_str(&format!("{k},{v}\n")),
            Format::Summary => out.push_str(&format!("{k} = {v}\n")),
        }
    }
    out
}

fn run_fock(
    format: Format,
    state: &str,
    n_max: Option<usize>,
    theta_deg: f64,
    oracle: bool,
    min_angle_n: Option<usize>,
    epsilon: f64,
) -> Result<String> {
    if let Some(n) = min_angle_n {
        let theta = min_detectable_angle(n, epsilon)?;
        let dim = imbalanced_twin_state(n, epsilon)?.dim();
        let hl = 1.0 / (2.0 * ((n * (n + 1)) as f64).sqrt());
        return Ok(key_values(
            format,
            &[
                ("n", n.to_string()),
                ("epsilon", format!("{epsilon}")),
                ("dim", dim.to_string()),
                ("theta_min_rad", format!("{theta:.12e}")),
                ("heisenberg_estimate_rad", format!("{hl:.12e}")),
                ("ratio", format!("{:.6}", theta / hl)),
            ],
        ));
    }
    let psi = parse_state_spec(state, n_max)?;
    let rotation = PolarizationRotation::from_degrees(theta_deg)?;
    let m = number_difference_moments(&psi, rotation)?;
    let mut rows = vec![
        ("n_max", psi.n_max().to_string()),
        ("twin", psi.is_twin().to_string()),
        ("theta_rad", format!("{:.12e}", rotation.theta)),
        ("mean", format!("{:.12e}", m.mean)),
        ("variance", format!("{:.12e}", m.variance)),
        ("beat_mean_re", format!("{:.12e}", m.beat_mean.re)),
        ("beat_mean_im", format!("{:.12e}", m.beat_mean.im)),
    ];
    if oracle {
        let o = dense_oracle(&psi, ObservableSpec::NumberDifference(rotation))?;
        rows.push(("oracle_mean", format!("{:.12e}", o.mean)));
        rows.push(("oracle_variance", format!("{:.12e}", o.variance)));
    }
    Ok(key_values(format, &rows))
}

fn run_calibrate(format: Format, config: &ScenarioConfig) -> Result<String> {
    let errors = scenario::constraint_violations(config);
    if !errors.is_empty() {
        return Err(Error::Violations(errors));
    }
    let detector = DetectorConfig {
        eta: config.model.eta,
        electronic_floor: config.impairments.electronic_floor,
    };
    let op = &config.op_point;
    let est = shot_noise_reference(op, &detector, &config.grid, &config.analyzer, config.grid.seed)?
        .with_calibration(Calibration::from_carrier_anchor(
            config.analysis.carrier_anchor_dbm,
            op.power_1,
            op.power_2,
            config.model.eta,
        ));
    match format {
        Format::Csv => spectra_csv(&[("snl", &est)]),
        Format::Summary => {
            let span = est.span_bins();
            let (lo, hi) = est.psd_rel_snl[span.clone()]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            let dbm = Calibration { dbm_offset: est.dbm_offset.unwrap_or(0.0) }.to_dbm(est.snl_reference * est.rbw);
            Ok(key_values(
                format,
                &[
                    ("seed", config.grid.seed.to_string()),
                    ("total_power_w", format!("{}", op.total_power())),
                    ("snl_density_w2_per_hz", format!("{:.6e}", est.snl_reference)),
                    ("snl_dbm_per_rbw", format!("{dbm:.2}")),
                    ("rbw_hz", format!("{}", est.rbw)),
                    ("bins", span.len().to_string()),
                    ("min_bin_db", format!("{:.2}", to_db(lo))),
                    ("max_bin_db", format!("{:.2}", to_db(hi))),
                    ("parseval_error", format!("{:.3e}", est.parseval_error())),
                ],
            ))
        }
    }
}

fn render_scenario(format: Format, config: &ScenarioConfig) -> Result<String> {
    let result = run_scenario(config)?;
    match format {
        Format::Csv => spectra_csv(&result.spectra()),
        Format::Summary => Ok(emit_summary(&result)),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let text = match &cli.command {
        Command::Fock {
            state,
            n_max,
            theta_deg,
            oracle,
            min_angle_n,
            epsilon,
        } => run_fock(cli.format, state, *n_max, *theta_deg, *oracle, *min_angle_n, *epsilon)?,
        Command::Model => {
            let mut config = load_config(cli)?;
            config.mode = RunMode::Analytic;
            render_scenario(cli.format, &config)?
        }
        Command::Simulate { dump_trace } => {
            let mut config = load_config(cli)?;
            config.mode = RunMode::Timeseries;
            if let Some(path) = dump_trace {
                let errors = scenario::constraint_violations(&config);
                if !errors.is_empty() {
                    return Err(Error::Violations(errors));
                }
                let trace = scenario::simulate_signal_trace(&config)?;
                let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
                trace_dump::write_trace(std::io::BufWriter::new(file), trace.grid.sample_rate, &trace.samples)
                    .map_err(|e| Error::io(path, e))?;
            }
            render_scenario(cli.format, &config)?
        }
        Command::Sweep { thetas_deg, seeds } => {
            let config = load_config(cli)?;
            let thetas: Vec<f64> = thetas_deg.iter().map(|d| d.to_radians()).collect();
            let seeds = if seeds.is_empty() { vec![config.grid.seed] } else { seeds.clone() };
            let result = sweep_theta(&config, &thetas, &seeds)?;
            match cli.format {
                Format::Csv => sweep_csv(&result)?,
                Format::Summary => emit_sweep_summary(&result),
            }
        }
        Command::Calibrate => run_calibrate(cli.format, &load_config(cli)?)?,
        Command::Scenario { name } => {
            let mut config = preset(name)?;
            if let Some(seed) = cli.seed {
                config.grid.seed = seed;
            }
            render_scenario(cli.format, &config)?
        }
    };
    write_output(cli.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
