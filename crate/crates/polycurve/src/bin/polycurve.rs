use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polycurve::estimate::{cmd_estimate, Mode, Model, TableFormat};
use polycurve::simulate::cmd_simulate;
use polycurve::spec::ExperimentSpec;
use polycurve::verify::{self, run_verify, VerifyConfig};
use polycurve::{io, Error, Result};

#[derive(Parser)]
#[command(name = "polycurve", version, about = "Shape and tip-force estimation for tendon-driven continuum instruments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario log from an experiment spec.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate shapes from a scenario log.
    Estimate(EstimateArgs),
    /// Estimate shapes and tip forces from a scenario log.
    Force(EstimateArgs),
    /// Run the self-check suite; exits with 2 when a check fails.
    Verify(ReportArgs),
    /// Compare analytic Jacobians with finite differences.
    JacobianCheck(ReportArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Directory written by `simulate`.
    log: PathBuf,
    #[arg(long, value_enum, default_value = "poly2")]
    model: Model,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: TableFormat,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the report; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: TableFormat,
}

fn emit<T: serde::Serialize>(value: &T, flat: Vec<(String, String)>, out: Option<&Path>, stem: &str, format: TableFormat) -> Result<()> {
    let text = match format {
        TableFormat::Json => serde_json::to_string_pretty(value).expect("report serializes") + "\n",
        TableFormat::Csv => {
            let mut s = String::from("# polycurve-report v1.0\nkey,value\n");
            for (k, v) in flat {
                s.push_str(&format!("{k},{v}\n"));
            }
            s
        }
    };
    match out {
        Some(dir) => {
            io::create_dir(dir)?;
            let ext = if format == TableFormat::Json { "json" } else { "csv" };
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Leaf values of a JSON document as dotted keys, in document order.
fn flatten(value: &serde_json::Value, prefix: &str, out: &mut Vec<(String, String)>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(v, &key, out);
            }
        }
        serde_json::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(v, &format!("{prefix}.{i}"), out);
            }
        }
        serde_json::Value::String(s) => out.push((prefix.to_string(), format!("\"{}\"", s.replace('"', "\"\"")))),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn report<T: serde::Serialize>(value: &T, args: &ReportArgs, stem: &str) -> Result<()> {
    let mut flat = Vec::new();
    flatten(&serde_json::to_value(value).expect("report serializes"), "", &mut flat);
    emit(value, flat, args.out.as_deref(), stem, args.format)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate { spec, seed, out } => {
            let mut spec = ExperimentSpec::load(&spec)?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let sim = cmd_simulate(&spec, &out)?;
            eprintln!("wrote {} samples to {}", sim.log.samples.len(), out.display());
            Ok(0)
        }
        Command::Estimate(a) => estimate(a, Mode::Shape),
        Command::Force(a) => estimate(a, Mode::ShapeForce),
        Command::Verify(args) => {
            let r = run_verify(&VerifyConfig::new(args.seed))?;
            report(&r, &args, "verify")?;
            if !r.passed {
                eprintln!("verification failed");
                if let Some(d) = &r.gradient.diagnostic {
                    eprintln!("{d}");
                }
                return Ok(2);
            }
            Ok(0)
        }
        Command::JacobianCheck(args) => {
            let params = polycurve::core::InstrumentParams::default();
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(args.seed);
            let states: Vec<_> = (0..verify::STATES).map(|_| verify::random_state(&mut rng)).collect();
            let section = verify::jacobian_section(&states, &params)?;
            report(&section, &args, "jacobian-check")?;
            Ok(if section.passed { 0 } else { 2 })
        }
    }
}

fn estimate(a: EstimateArgs, mode: Mode) -> Result<u8> {
    let est = cmd_estimate(&a.log, mode, a.model, &a.out, a.format)?;
    let s = &est.summary;
    eprintln!(
        "{} of {} samples estimated; rms tip error {:.4} mm, rms along-body error {:.4} mm",
        s.estimated, s.samples, s.shape.rms_tip_position_error_mm, s.shape.rms_along_body_error_mm
    );
    if s.counters.rejected_rows > 0 {
        eprintln!("{} rows rejected for negative tension", s.counters.rejected_rows);
    }
    Ok(0)
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
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
