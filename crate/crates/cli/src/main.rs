use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use ergocouple::estimation::{fit_exponential_tail, FitPolicy, SurvivalCurve};
use ergocouple::run::{self, RunConfig};

#[derive(Parser)]
#[command(name = "ergocouple", version, about = "Estimate geometric ergodicity rates by coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Fit the exponential tail of a survival.csv file.
    Fit {
        survival: PathBuf,
        /// Step size; when given the slope is reported per unit time.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = FitPolicy::default().min_survivors)]
        min_survivors: u64,
    },
    /// Refit every survival.csv of a finished run and compare with summary.csv.
    Check { config: PathBuf },
    /// Print the build version, or the provenance of a config.
    Version { config: Option<PathBuf> },
}

fn load(path: &PathBuf) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(RunConfig::parse(&text)?)
}

fn main_inner(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = load(&config)?;
            let report = run::run(&cfg)?;
            for p in &report.points {
                match &p.estimate {
                    Some(e) => println!("{}: slope {} (R² {:.4}, window {}..{})", p.id, e.slope_r, e.r_squared, e.t_lo, e.t_hi),
                    None => println!("{}: no fit", p.id),
                }
            }
            println!("wrote {}", cfg.out.join(run::SUMMARY_FILE).display());
        }
        Command::Fit { survival, h, min_survivors } => {
            let curve = SurvivalCurve::read_csv(&survival)?;
            let policy = FitPolicy::default().with_min_survivors(min_survivors);
            let mut e = fit_exponential_tail::<f64>(&curve, &policy)?;
            if let Some(h) = h {
                if !(h.is_finite() && h > 0.0) {
                    bail!("--h must be positive");
                }
                e = e.per_unit_time(h);
            }
            println!("slope,std_err,r_squared,t_lo,t_hi,N");
            println!("{},{},{},{},{},{}", e.slope_r, e.std_err, e.r_squared, e.t_lo, e.t_hi, curve.total());
        }
        Command::Check { config } => {
            let cfg = load(&config)?;
            let rows = run::check(&cfg)?;
            let mut ok = true;
            for r in &rows {
                println!("{}: summary {:?} refit {:?} {}", r.id, r.summary_slope, r.refit_slope, if r.agrees() { "ok" } else { "MISMATCH" });
                ok &= r.agrees();
            }
            if !ok {
                bail!("summary.csv disagrees with its survival curves");
            }
        }
        Command::Version { config } => match config {
            Some(path) => println!("{}", run::version_and_provenance(&load(&path)?)),
            None => println!("ergocouple {}", run::version()),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
