use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use rwt_core::bounds::{theorem1_regret_bound, theorem2_regret_bound, BoundInputs};
use rwt_core::harness::config::Algorithm;
use rwt_core::harness::{preset, presets, run_experiment, write_outputs, ExperimentConfig, SummaryTable};
use rwt_core::sequential_tests::TestConfig;
use rwt_core::verify;

#[derive(Parser)]
#[command(name = "rwt", version, about = "Regret experiments for the random walk on a tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Run a built-in experiment.
    Preset {
        #[arg(value_parser = presets::PRESETS)]
        name: String,
        #[arg(long, default_value_t = presets::DEFAULT_RUNS)]
        runs: u64,
        #[arg(long, default_value_t = presets::DEFAULT_HORIZON)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the preset as a config file instead of running it.
        #[arg(long)]
        print_config: bool,
    },
    /// Tabulate the regret bounds for the walk policies of a config.
    Bounds { config: PathBuf },
    /// Run the statistical and structural self-checks.
    Verify {
        /// Include the full-horizon figure experiments (several minutes).
        #[arg(long)]
        full: bool,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
    let cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("malformed config {}", path.display()))?;
    cfg.validate().with_context(|| format!("invalid config {}", path.display()))?;
    Ok(cfg)
}

fn run(cfg: &ExperimentConfig) -> Result<()> {
    let table = run_experiment(cfg)?;
    let (csv, gp) = write_outputs(cfg, &table).context("cannot write results")?;
    print_final(&table, cfg.horizon);
    println!("wrote {}", csv.display());
    println!("wrote {}", gp.display());
    Ok(())
}

fn print_final(table: &SummaryTable, horizon: u64) {
    println!("{:<24} {:>16} {:>12}", "policy", "mean regret", "stderr");
    for p in table.policies() {
        if let Some(last) = table.curve(p).into_iter().rev().find(|r| r.checkpoint_t <= horizon) {
            println!("{:<24} {:>16.4} {:>12.4}", p, last.mean_regret, last.stderr);
        }
    }
}

fn bounds(cfg: &ExperimentConfig) -> Result<()> {
    let times = cfg.checkpoint_times();
    let mut any = false;
    for p in cfg.resolve()? {
        let test = match &p.algorithm {
            Algorithm::Rwt(t) | Algorithm::RwtCached(t, _) => t,
            Algorithm::Sgd(_) => continue,
        };
        any = true;
        let g_max = p.objective.g_max();
        let (inputs, heavy) = match test {
            TestConfig::SubGaussian(c) => (BoundInputs::subgaussian(c.sigma_sq(), c.p_check(), g_max), false),
            TestConfig::HeavyTail(c) => (BoundInputs::heavy_tail(c, g_max), true),
        };
        let class = p.objective.fclass();
        println!("# {}: {class:?}, p = {:.6}, g_max = {g_max:.6}", p.label, inputs.p);
        println!("{:>12} {:>20}", "T", "regret bound");
        for &t in &times {
            let v = if heavy {
                theorem2_regret_bound(&class, &inputs, t)
            } else {
                theorem1_regret_bound(&class, &inputs, t)
            };
            match v {
                Ok(v) => println!("{t:>12} {v:>20.6e}"),
                Err(e) => println!("{t:>12} {:>20}", format!("({e})")),
            }
        }
    }
    if !any {
        bail!("the config has no walk policy to bound");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config } => load(&config).and_then(|cfg| run(&cfg)),
        Command::Preset {
            name,
            runs,
            horizon,
            seed,
            print_config,
        } => preset(&name, runs, horizon, seed).map_err(Into::into).and_then(|cfg| {
            cfg.validate()?;
            if print_config {
                print!("{}", cfg.to_toml()?);
                Ok(())
            } else {
                run(&cfg)
            }
        }),
        Command::Bounds { config } => load(&config).and_then(|cfg| bounds(&cfg)),
        Command::Verify { full } => {
            let results = if full { verify::full_suite() } else { verify::quick_suite() };
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(anyhow::anyhow!("{failed} check(s) failed"))
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
