use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coverage_lab::analytic::{boundary_layer_check, BoundaryLayerForm};
use coverage_lab::experiment::{
    emit, format_number as num, gamma_table, model_curves, run_campaign, ExperimentConfig, GAMMA_HEADER,
};
use coverage_lab::{Error, Result};

#[derive(Parser)]
#[command(name = "coverage-lab", version, about = "Two-sample k-coverage threshold laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write one report directory per size.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vacancy expectation table (CSV on stdout).
    Gamma {
        #[arg(long)]
        config: PathBuf,
    },
    /// Boundary-layer integral against its two-term expansion (CSV on stdout).
    #[command(name = "check-lemexp", visible_alias = "check-boundary-layer")]
    CheckBoundaryLayer {
        #[arg(long)]
        ell: u32,
        #[arg(long)]
        alpha0: f64,
        #[arg(long)]
        d: usize,
        /// `lo:hi:factor`, a geometric grid of scales.
        #[arg(long, default_value = "100:10000:10")]
        s_grid: String,
        #[arg(long, value_enum, default_value_t = Form::Plain)]
        form: Form,
    },
    /// Limit and corrected CDF tables without simulation (CSV on stdout).
    Curves {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Form {
    Plain,
    Weighted,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn stdout_error(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn run(command: Command) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match command {
        Command::Simulate { config, threads, out: dir } => {
            let config = ExperimentConfig::load(&config)?;
            let root = dir.unwrap_or_else(|| config.output_dir.clone());
            for report in run_campaign(&config, threads)? {
                let target = root.join(report.label());
                emit(&report, &target)?;
                writeln!(
                    out,
                    "{}: ks_limit={:.4} ks_corrected={:.4} failed={} -> {}",
                    report.label(),
                    report.ks_limit,
                    report.ks_corrected,
                    report.failed,
                    target.display()
                )
                .map_err(stdout_error)?;
            }
        }
        Command::Gamma { config } => {
            let rows = gamma_table(&ExperimentConfig::load(&config)?)?;
            writeln!(out, "{GAMMA_HEADER}").map_err(stdout_error)?;
            for row in rows {
                writeln!(out, "{}", row.csv()).map_err(stdout_error)?;
            }
        }
        Command::CheckBoundaryLayer {
            ell,
            alpha0,
            d,
            s_grid,
            form,
        } => {
            let form = match form {
                Form::Plain => BoundaryLayerForm::Plain,
                Form::Weighted => BoundaryLayerForm::Weighted,
            };
            writeln!(out, "s,lhs,rhs,residual").map_err(stdout_error)?;
            for s in parse_grid(&s_grid)? {
                let c = boundary_layer_check(s, alpha0, ell, d, form)?;
                writeln!(out, "{},{},{},{}", num(s), num(c.lhs), num(c.rhs), num(c.residual)).map_err(stdout_error)?;
            }
        }
        Command::Curves { config } => {
            let config = ExperimentConfig::load(&config)?;
            writeln!(out, "size,beta,limit,corrected").map_err(stdout_error)?;
            for (size, rows) in model_curves(&config)? {
                for (beta, limit, corrected) in rows {
                    writeln!(out, "{},{},{},{}", num(size), num(beta), num(limit), num(corrected)).map_err(stdout_error)?;
                }
            }
        }
    }
    Ok(())
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("bad s-grid {text:?}: {e}")))?;
    let [lo, hi, factor] = parts[..] else {
        return Err(Error::Config(format!("s-grid must be lo:hi:factor, got {text:?}")));
    };
    if !(lo > 1.0 && hi >= lo && factor > 1.0 && hi.is_finite()) {
        return Err(Error::Config(format!("s-grid needs 1 < lo <= hi and factor > 1, got {text:?}")));
    }
    let mut grid = Vec::new();
    let mut s = lo;
    while s <= hi * (1.0 + 1e-12) {
        grid.push(s);
        s *= factor;
    }
    Ok(grid)
}
