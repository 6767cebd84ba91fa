//! Command-line front end: `run`, `sweep`, `bounds`, `plot-boltzmann`,
//! `plot-curves`. Exit codes: 0 success, 2 configuration error,
//! 3 numeric failure, 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sfopt::bench::{
    emit_curves, leaderboard_table, plot_boltzmann, read_records_dir, run_experiment, summary_table, sweep, Config,
    ExperimentConfig, SweepSpec,
};
use sfopt::bounds::{verify_corollary, write_reports_csv, BoundConstants};
use sfopt::targets::{Carrillo, Objective, Quadratic};
use sfopt::{Error, Result};

#[derive(Parser)]
#[command(name = "sfopt", version, about = "Global optimisation by Schrödinger-Föllmer diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (`[section]` headers, `key = value` lines).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a dotted key, e.g. `--set bench.lr=0.01`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides bench.out_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(out) = &self.out {
            cfg.set("bench.out_dir", out.display().to_string())?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimiser over every configured seed and write run CSVs.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write one final-state diffusion path per seed.
        #[arg(long)]
        dump_trajectory: bool,
    },
    /// Random-search the `[sweep]` ranges, then optionally rerun the winner.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run the best configuration over bench.seeds for bench.steps.
        #[arg(long)]
        then_run: bool,
    },
    /// Solve for (σ, ε̂, T) at a failure level δ and check the bound.
    Bounds(BoundsArgs),
    /// Plot V and exp(−V/σ) for a univariate objective.
    PlotBoltzmann {
        /// quadratic or carrillo.
        #[arg(long, default_value = "carrillo")]
        objective: String,
        /// Minimiser location (quadratic centre or Carrillo shift).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        at: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.1")]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
        hi: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[arg(long, default_value = "boltzmann.svg")]
        out: PathBuf,
    },
    /// Plot mean ± std training loss per optimiser from a directory of run CSVs.
    PlotCurves {
        /// Directory containing `<optimiser>_seed<N>.csv` files.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "curves.svg")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BoundsArgs {
    /// Failure levels δ.
    #[arg(long, value_delimiter = ',', default_value = "0.09")]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    c_tail: f64,
    #[arg(long, default_value_t = 1.0)]
    c_lprime: f64,
    #[arg(long, default_value_t = 1.0)]
    lprime: f64,
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Budget split C₁,C₂,C₃ (must sum to 1).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    splits: Option<Vec<f64>>,
    /// Also write the reports as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            dump_trajectory,
        } => {
            let mut exp = ExperimentConfig::from_config(&config.load()?)?;
            exp.settings.dump_trajectory = dump_trajectory;
            let records = run_experiment(&exp)?;
            print!("{}", summary_table(&records));
            println!("wrote {}", exp.settings.out_dir.display());
            if records.iter().all(|r| r.failure.is_some()) {
                let reason = records[0].failure.clone().unwrap_or_default();
                return Err(Error::NumericFailure {
                    location: "run".into(),
                    detail: format!("every seed failed; first: {reason}"),
                });
            }
            Ok(())
        }
        Command::Sweep { config, then_run } => {
            let cfg = config.load()?;
            let exp = ExperimentConfig::from_config(&cfg)?;
            let spec = SweepSpec::from_config(&cfg)?;
            let result = sweep(&spec, &exp)?;
            let table = leaderboard_table(&result);
            print!("{table}");
            std::fs::create_dir_all(&exp.settings.out_dir).map_err(|e| io_err(&exp.settings.out_dir, e))?;
            let board = exp.settings.out_dir.join("leaderboard.txt");
            std::fs::write(&board, &table).map_err(|e| io_err(&board, e))?;
            println!("best: {}", result.best.describe());
            if then_run {
                let best = ExperimentConfig {
                    optimiser: result.best,
                    ..exp
                };
                print!("{}", summary_table(&run_experiment(&best)?));
            }
            Ok(())
        }
        Command::Bounds(args) => {
            let mut k = BoundConstants {
                c_tail: args.c_tail,
                c_lprime: args.c_lprime,
                lprime: args.lprime,
                l: args.l,
                c: args.c,
                r: args.r,
                tau: args.tau,
                eps: args.eps,
                ..BoundConstants::default()
            };
            if let Some(s) = args.splits {
                k.splits = (s[0], s[1], s[2]);
            }
            let reports = args
                .delta
                .iter()
                .map(|&d| verify_corollary(&k, d))
                .collect::<Result<Vec<_>>>()?;
            for r in &reports {
                println!("{}", r.table());
            }
            if let Some(path) = args.csv {
                write_reports_csv(&reports, &path)?;
            }
            Ok(())
        }
        Command::PlotBoltzmann {
            objective,
            at,
            sigmas,
            lo,
            hi,
            points,
            out,
        } => {
            let obj = match objective.as_str() {
                "quadratic" => Objective::new(Quadratic::new(vec![at])),
                "carrillo" => Objective::new(Carrillo::new(vec![at])?),
                other => {
                    return Err(Error::Config(format!(
                        "plot-boltzmann supports quadratic or carrillo, got '{other}'"
                    )))
                }
            };
            let curves = plot_boltzmann(&obj, &sigmas, lo, hi, points, &out)?;
            for (k, s) in sigmas.iter().enumerate() {
                println!("sigma {s}: peak at x = {}", curves.xs[curves.argmax(k)]);
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::PlotCurves { dir, out } => {
            let records = read_records_dir(&dir, true)?;
            if records.is_empty() {
                return Err(Error::Config(format!("no run CSVs found in {}", dir.display())));
            }
            for band in emit_curves(&records, &out)? {
                let last = band.mean.len().saturating_sub(1);
                println!(
                    "{}: {} seeds, final train loss {:.6} ± {:.6}",
                    band.optimiser, band.seeds, band.mean[last], band.std[last]
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
