use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

use harl_core::harness::{self, SweepPlan, TrainOptions};
use harl_core::metrics::write_rows;
use harl_core::sim::events::write_jsonl;
use harl_core::{ControllerKind, ScenarioConfig};

#[derive(Parser)]
#[command(name = "harl", version, about = "Train, evaluate and compare intersection controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learned controller (one epoch is one episode).
    Train {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory; an existing training state there is resumed.
        #[arg(long)]
        out: PathBuf,
        /// Save state and stop once this many epochs are done.
        #[arg(long)]
        stop_after: Option<u32>,
    },
    /// Run one evaluation and write a metrics row.
    Eval {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Agents checkpoint, required for learned controllers.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory for metrics.csv and events.jsonl; prints the row when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate controllers x flows x seeds into one table.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', default_value = "harl,flat_sac,fixed_time,lqf,fcfs_vtl,fcfs_platoon")]
        controllers: Vec<ControllerKind>,
        #[arg(long, value_delimiter = ',', default_value = "450,900,1200")]
        flows: Vec<f64>,
        /// Defaults to the scenario seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// `controller=PATH`; learned controllers without one are trained first.
        #[arg(long)]
        checkpoint: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe the agents stored in a checkpoint.
    InspectCheckpoint {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Check a scenario file; prints its canonical form on success.
    ValidateConfig {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    controller: Option<ControllerKind>,
    /// Vehicles per lane per hour.
    #[arg(long, allow_negative_numbers = true)]
    flow: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    hv_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds of an evaluation run.
    #[arg(long, allow_negative_numbers = true)]
    duration: Option<f64>,
    /// Apply the reduced-size preset before the flags above.
    #[arg(long)]
    desk_scale: bool,
}

impl ScenarioArgs {
    /// File, then preset, then flags; validated.
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ScenarioConfig::default(),
        };
        if self.desk_scale {
            cfg = cfg.desk_scale();
        }
        if let Some(c) = self.controller {
            cfg.controller = c;
        }
        if let Some(f) = self.flow {
            cfg.flow = f;
        }
        if let Some(h) = self.hv_fraction {
            cfg.hv_fraction = h;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_csv(path: &Path, rows: &[harl_core::MetricsRow]) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_rows(f, rows)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { scenario, out, stop_after } => {
            let cfg = scenario.resolve()?;
            let s = harness::train(&cfg, &out, &TrainOptions { stop_after, quiet: false })?;
            if let Some(e) = s.resumed_from {
                eprintln!("resumed after epoch {e}");
            }
            match s.final_checkpoint {
                Some(p) => println!(
                    "trained {} epochs, {} steps; final checkpoint {}",
                    s.epochs_done,
                    s.env_steps,
                    p.display()
                ),
                None => println!(
                    "stopped after {} epochs, {} steps; state in {}",
                    s.epochs_done,
                    s.env_steps,
                    out.display()
                ),
            }
        }
        Command::Eval { scenario, checkpoint, out } => {
            let cfg = scenario.resolve()?;
            let agents = match (cfg.controller.is_learned(), checkpoint) {
                (true, Some(p)) => {
                    let (kind, agents) = harness::load_agents(&p)?;
                    if kind != cfg.controller {
                        bail!("{} holds `{kind}` agents, not `{}`", p.display(), cfg.controller);
                    }
                    Some(agents)
                }
                (true, None) => bail!("missing checkpoint: controller `{}` needs --checkpoint", cfg.controller),
                (false, _) => None,
            };
            let run = harness::evaluate(&cfg, agents)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    write_csv(&dir.join("metrics.csv"), std::slice::from_ref(&run.row))?;
                    let f = std::fs::File::create(dir.join("events.jsonl"))?;
                    write_jsonl(std::io::BufWriter::new(f), run.events())?;
                }
                None => write_rows(std::io::stdout().lock(), std::slice::from_ref(&run.row))?,
            }
            let a = &run.log.audit;
            if !a.clean() {
                bail!(
                    "clamp audit failed: {} commanded and {} applied violations",
                    a.command_violations,
                    a.applied_violations
                );
            }
        }
        Command::Sweep { scenario, controllers, flows, seeds, checkpoint, out } => {
            let cfg = scenario.resolve()?;
            let mut checkpoints = Vec::new();
            for c in checkpoint {
                let (k, p) = c.split_once('=').with_context(|| format!("--checkpoint `{c}` is not controller=PATH"))?;
                checkpoints.push((k.parse::<ControllerKind>().map_err(anyhow::Error::msg)?, PathBuf::from(p)));
            }
            let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds };
            let plan = SweepPlan { controllers, flows, seeds, checkpoints };
            std::fs::create_dir_all(&out)?;
            let rows = harness::sweep(&cfg, &plan, &out, harness::sweep_threads())?;
            write_csv(&out.join("sweep.csv"), &rows)?;
            println!("{} rows written to {}", rows.len(), out.join("sweep.csv").display());
        }
        Command::InspectCheckpoint { checkpoint } => {
            let info = harness::inspect_checkpoint(&checkpoint)?;
            println!("{}", serde_json::to_string_pretty(&info)?);
        }
        Command::ValidateConfig { scenario } => {
            let cfg = scenario.resolve()?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}
