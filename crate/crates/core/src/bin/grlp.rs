use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grlp::experiment::{
    emit_curves, run_property_suite, run_table1, run_table2, write_property_report, write_table1,
    write_table2, ExperimentConfig,
};

#[derive(Parser)]
#[command(
    version,
    about = "Exact, approximate and reduced LPs for discounted MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// E_T for each constraint-matrix recipe.
    Table1(Common),
    /// Weighted L1 error of the reduced LP for each recipe and zeta.
    Table2(Common),
    /// Per-state value curves.
    Curves(Common),
    /// Randomized invariant suite; exits nonzero on any failure.
    Properties(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Search-box half-width.
    #[arg(long = "box")]
    box_half_width: Option<f64>,
}

impl Common {
    fn load(&self) -> grlp::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.override_seed(seed);
        }
        if let Some(b) = self.box_half_width {
            cfg.override_box(b)?;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)?;
        Ok((cfg, out))
    }
}

fn run(cli: Cli) -> grlp::Result<bool> {
    match cli.command {
        Command::Table1(args) => {
            let (cfg, out) = args.load()?;
            write_table1(&run_table1(&cfg)?, &out)?;
        }
        Command::Table2(args) => {
            let (cfg, out) = args.load()?;
            write_table2(&run_table2(&cfg)?, &out)?;
        }
        Command::Curves(args) => {
            let (cfg, out) = args.load()?;
            emit_curves(&cfg, &out)?;
        }
        Command::Properties(args) => {
            let (cfg, out) = args.load()?;
            let report = run_property_suite(&cfg.properties)?;
            write_property_report(&report, &out)?;
            for t in report
                .invariants
                .iter()
                .filter(|t| t.failed > 0 || t.skipped > 0)
            {
                eprintln!(
                    "{}: {} failed, {} skipped; first: {}",
                    t.name,
                    t.failed,
                    t.skipped,
                    t.first_failure.as_deref().unwrap_or("-")
                );
            }
            return Ok(report.all_passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
