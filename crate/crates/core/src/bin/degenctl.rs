use clap::{Parser, Subcommand};
use degenctl::cli::{
    cmd_control, cmd_sweep, cmd_validate, cmd_verify, write_json, ControlMode, Exit, Scenario, SweepParam, VERIFY_CHECKS,
};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "degenctl", version, about = "Null controls and inequality checks for degenerate heat equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the coefficient, the weight parameters and the kernel hypotheses.
    Validate {
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a null control and write u.csv, y.csv and summary.json.
    Control {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Free evolution up to the switch time, then the fixed point.
        #[arg(long, conflicts_with = "shortcut")]
        two_phase: bool,
        /// Direct construction for kernels supported in the control set.
        #[arg(long)]
        shortcut: bool,
    },
    /// Run numerical checks, writing <check>.json and <check>.csv.
    Verify {
        config: PathBuf,
        #[arg(long, required = true, value_parser = clap::builder::PossibleValuesParser::new(VERIFY_CHECKS))]
        check: Vec<String>,
        /// Carleman sweep `lo:hi:k`, geometric.
        #[arg(long, value_parser = parse_range)]
        s_sweep: Option<(f64, f64, usize)>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Repeat the control over a list of parameter values and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// One of s, epsilon, alpha, n, m.
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_range(text: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err("expected lo:hi:k".into());
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("hi: {e}"))?;
    let k: usize = parts[2].parse().map_err(|e| format!("k: {e}"))?;
    if !(lo > 0.0 && hi >= lo && k > 0) {
        return Err("need 0 < lo <= hi and k > 0".into());
    }
    Ok((lo, hi, k))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn load(path: &Path) -> Result<Scenario, Exit> {
    Scenario::load(path).map_err(|e| {
        eprintln!("degenctl: {}: {e}", path.display());
        Exit::Usage
    })
}

fn configure_threads() {
    if let Some(n) = std::env::var("DEGENCTL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run(cli: Cli) -> Result<Exit, Exit> {
    let fail = |e: degenctl::Error| {
        eprintln!("degenctl: {e}");
        Exit::Fail
    };
    match cli.command {
        Command::Validate { config, out } => {
            let sc = load(&config)?;
            let (exit, report) = cmd_validate(&sc);
            match out {
                Some(path) => {
                    let dir = path.parent().unwrap_or(Path::new("."));
                    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("validate.json");
                    write_json(dir, name, &report).map_err(fail)?;
                }
                None => emit(&(serde_json::to_string_pretty(&report).unwrap_or_default() + "\n")),
            }
            Ok(exit)
        }
        Command::Control { config, out, two_phase, shortcut } => {
            let sc = load(&config)?;
            let mode = if two_phase {
                ControlMode::TwoPhase
            } else if shortcut {
                ControlMode::Shortcut
            } else {
                ControlMode::Default
            };
            let (exit, summary) = cmd_control(&sc, mode, &out).map_err(fail)?;
            let ratio = summary.get("final_ratio").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
            emit(&format!("final_ratio {ratio:.6e}\n"));
            Ok(exit)
        }
        Command::Verify { config, check, s_sweep, out } => {
            let sc = load(&config)?;
            let (exit, status) = cmd_verify(&sc, &check, s_sweep, &out).map_err(fail)?;
            if let Some(map) = status.as_object() {
                for (name, ok) in map {
                    emit(&format!("{name} {}\n", if ok.as_bool() == Some(true) { "PASS" } else { "FAIL" }));
                }
            }
            Ok(exit)
        }
        Command::Sweep { config, param, values, out } => {
            let sc = load(&config)?;
            let Some(p) = SweepParam::parse(&param) else {
                eprintln!("degenctl: unknown sweep parameter {param}; expected s, epsilon, alpha, n or m");
                return Err(Exit::Usage);
            };
            let (exit, csv) = cmd_sweep(&sc, p, &values, ControlMode::Default, &out).map_err(fail)?;
            emit(&csv);
            Ok(exit)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { Exit::Usage } else { Exit::Pass };
            return ExitCode::from(code.code() as u8);
        }
    };
    configure_threads();
    let exit = run(cli).unwrap_or_else(|e| e);
    ExitCode::from(exit.code() as u8)
}
