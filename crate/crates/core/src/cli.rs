//! Command-line front end.
//!
//! ```text
//! b92sim simulate  [--config F] [--set k=v]... [--format csv|kv] [--out R.csv]
//! b92sim sweep     [--config F] [--set k=v]... --axis name=v1,v2,... [--out S.csv]
//! b92sim analytic  [--config F] [--set k=v]... --curve qber_vs_clock|rate_vs_distance [--points a,b,...] [--out C.csv]
//! b92sim histogram [--config F] [--set k=v]... [--samples N] [--rate CPS] [--out H.csv]
//! ```
//!
//! With `--out` the data goes to the file and its path is printed;
//! otherwise the data itself goes to stdout. The resolved configuration is
//! echoed to stderr. Exit status is 0 on success, 1 for usage and
//! configuration errors, 2 for runtime failures, including trials whose
//! protocol run did not complete.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::analytic::{expected_link_budget, qber_vs_clock_curve, rate_vs_distance_curve};
use crate::engine::{jitter_histogram, run_trial, sweep, Outcome, RunReport, SimConfig};

pub const DEFAULT_CLOCK_GRID: &[f64] = &[1.0, 1.5, 2.0, 2.5, 3.0, 3.3];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e9)`.
pub fn format_number(v: f64) -> String {
    const P: i32 = 9;
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, v);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_fraction(mantissa), sign, exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Parser)]
#[command(name = "b92sim", version, about = "GHz-clocked B92 QKD link simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// TOML configuration file; absent keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one field, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Kv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    #[value(name = "qber_vs_clock")]
    QberVsClock,
    #[value(name = "rate_vs_distance")]
    RateVsDistance,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one Monte Carlo trial.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
    },
    /// Run one trial per value of a configuration field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `name=v1,v2,...`
        #[arg(long)]
        axis: String,
    },
    /// Evaluate the closed-form link budget along a curve.
    Analytic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        curve: Curve,
        /// Comma-separated clocks (GHz) or distances (km).
        #[arg(long, value_delimiter = ',')]
        points: Option<Vec<f64>>,
    },
    /// Sample the detector's timing response.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Count rate setting the jitter width; defaults to the link
        /// budget's predicted rate.
        #[arg(long)]
        rate: Option<f64>,
    },
}

/// File values, then overrides, then defaults for whatever is left.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<SimConfig, CliError> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            SimConfig::from_toml_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => SimConfig::default(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{o}` is not of the form key=value")))?;
        config = config.with_override(k.trim(), v).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(config)
}

/// Header plus one line per row.
pub fn emit_csv(header: &str, rows: &[String], out: Option<&Path>) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Usage("nothing to write: no rows".into()));
    }
    let mut text = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    write_output(&text, out)
}

fn write_output(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    let runtime = |e: io::Error, what: &str| CliError::Runtime(format!("{what}: {e}"));
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| runtime(e, &p.display().to_string()))?;
            println!("{}", p.display());
        }
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(|e| runtime(e, "stdout"))?,
    }
    Ok(())
}

fn echo(config: &SimConfig) {
    eprintln!("# resolved configuration\n{}", config.to_toml());
}

fn check_outcomes(reports: &[RunReport]) -> Result<(), CliError> {
    match reports.iter().find(|r| r.outcome != Outcome::Completed) {
        Some(r) => Err(CliError::Runtime(format!("trial with seed {} ended with outcome {}", r.seed, r.outcome))),
        None => Ok(()),
    }
}

fn parse_axis(axis: &str) -> Result<(String, Vec<String>), CliError> {
    let (name, values) = axis
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("axis `{axis}` is not of the form name=v1,v2,...")))?;
    let values: Vec<String> = values.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    Ok((name.trim().to_string(), values))
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, format } => {
            let config = load_config(common.config.as_deref(), &common.overrides)?;
            echo(&config);
            let report = run_trial(&config).map_err(|e| CliError::Usage(e.to_string()))?;
            match format {
                ReportFormat::Csv => emit_csv(&RunReport::csv_header(), &[report.csv_row()], common.out.as_deref())?,
                ReportFormat::Kv => write_output(&report.to_key_values(), common.out.as_deref())?,
            }
            check_outcomes(&[report])
        }
        Command::Sweep { common, axis } => {
            let config = load_config(common.config.as_deref(), &common.overrides)?;
            echo(&config);
            let (name, values) = parse_axis(&axis)?;
            let reports = sweep(&config, &name, &values).map_err(|e| CliError::Usage(e.to_string()))?;
            let rows: Vec<String> = reports.iter().map(RunReport::csv_row).collect();
            emit_csv(&RunReport::csv_header(), &rows, common.out.as_deref())?;
            check_outcomes(&reports)
        }
        Command::Analytic { common, curve, points } => {
            let config = load_config(common.config.as_deref(), &common.overrides)?;
            echo(&config);
            let f = format_number;
            let bad = |e: crate::analytic::AnalyticError| CliError::Usage(e.to_string());
            match curve {
                Curve::QberVsClock => {
                    let grid = points.unwrap_or_else(|| DEFAULT_CLOCK_GRID.to_vec());
                    let rows: Vec<String> = qber_vs_clock_curve(&config, &grid)
                        .map_err(bad)?
                        .iter()
                        .map(|p| format!("{},{},{},{}", f(p.clock_ghz), f(p.qber_standard), f(p.qber_enhanced), f(p.improvement)))
                        .collect();
                    emit_csv("clock_ghz,qber_standard,qber_enhanced,improvement", &rows, common.out.as_deref())
                }
                Curve::RateVsDistance => {
                    let grid = points.unwrap_or_else(|| (0..=40).map(|i| i as f64 * 0.5).collect());
                    let rows: Vec<String> = rate_vs_distance_curve(&config, &grid)
                        .map_err(bad)?
                        .iter()
                        .map(|p| format!("{},{},{}", f(p.distance_km), f(p.r_sift_cps), f(p.r_net_cps)))
                        .collect();
                    emit_csv("distance_km,r_sift,r_net", &rows, common.out.as_deref())
                }
            }
        }
        Command::Histogram { common, samples, rate } => {
            let config = load_config(common.config.as_deref(), &common.overrides)?;
            echo(&config);
            let rate = rate.unwrap_or_else(|| expected_link_budget(&config).count_rate_cps);
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(CliError::Usage(format!("--rate must be a finite count rate >= 0, got {rate}")));
            }
            let hist = jitter_histogram(&config, rate, samples);
            let mut buf = Vec::new();
            hist.write_csv(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
            write_output(&String::from_utf8(buf).expect("ascii csv"), common.out.as_deref())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(6.55), "6.55");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333");
        assert_eq!(format_number(123456789.0), "123456789");
        assert_eq!(format_number(1234567890.0), "1.23456789e+09");
        assert_eq!(format_number(0.0001), "0.0001");
        assert_eq!(format_number(0.00001234), "1.234e-05");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(999999999.6), "1e+09");
        assert_eq!(format_number(f64::INFINITY), "inf");
    }

    #[test]
    fn axis_parsing() {
        let (n, v) = parse_axis("clock_ghz=1.0, 2.0,3.3").unwrap();
        assert_eq!(n, "clock_ghz");
        assert_eq!(v, vec!["1.0", "2.0", "3.3"]);
        assert!(parse_axis("clock_ghz").is_err());
    }

    #[test]
    fn overrides_apply_after_defaults() {
        let c = load_config(None, &["clock_ghz=3.3".into()]).unwrap();
        assert_eq!(c.clock_ghz, 3.3);
        let err = load_config(None, &["clock_ghz=-1".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("clock_ghz"));
        assert!(load_config(None, &["clock_ghz".into()]).is_err());
    }
}
