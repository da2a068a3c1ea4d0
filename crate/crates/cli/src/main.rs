//! `mirror`: simulate VP groups, train the cyber player, validate it on
//! other topologies and recompute metrics from saved time series.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mirror_core::ensemble::TopologyKind;
use mirror_core::harness::artifacts::{
    analyze_dir, config_beside, simulate_to_dir, sweep_to_dir, train_to_dir, validate_to_dir,
};
use mirror_core::harness::ExperimentConfig;
use mirror_core::QNetwork;

#[derive(Parser)]
#[command(name = "mirror", version, about = "Group mirror game with virtual and cyber players")]
struct Cli {
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the VP-only group and write its time series and metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the cyber player in shadow mode.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `trial_count`.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Substitute the target player with a trained checkpoint.
    Validate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// complete, ring, path or star (cg, rg, pg, sg also accepted).
        #[arg(long)]
        topology: TopologyKind,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the `config.toml` next to the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Group synchrony with and without the cyber player on every topology.
    Sweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `validation.trials`.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Recompute metrics for the time-series files in a directory.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn checkpoint_and_config(
    checkpoint: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<(QNetwork, ExperimentConfig)> {
    let net = QNetwork::load(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let mut cfg = match config {
        Some(p) => load_config(p, None)?,
        None => config_beside(checkpoint)?,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((net, cfg))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let rec = simulate_to_dir(&cfg, &out)?;
            println!(
                "{} trial(s): rho_g {:.4} ± {:.4}, rms {:.4} ± {:.4}",
                rec.trials.len(),
                rec.summary.rho_g.mean,
                rec.summary.rho_g.sd,
                rec.summary.rms.mean,
                rec.summary.rms.sd
            );
        }
        Command::Train { config, out, trials } => {
            let mut cfg = load_config(&config, cli.seed)?;
            if let Some(n) = trials {
                cfg.trial_count = n;
            }
            let rec = train_to_dir(&cfg, &out)?;
            match rec.terminated_at {
                Some(t) => println!("termination test held after trial {t}"),
                None => println!("ran all {} trials without meeting the termination test", rec.trials_run),
            }
        }
        Command::Validate {
            checkpoint,
            topology,
            trials,
            out,
            config,
        } => {
            if trials == 0 {
                bail!("--trials must be positive");
            }
            let (net, cfg) = checkpoint_and_config(&checkpoint, config.as_deref(), cli.seed)?;
            let rec = validate_to_dir(&cfg, &net, topology, trials, &out)?;
            let r = &rec.report;
            println!("{:<10}{:>18}{:>18}", topology, "CP", "VP");
            for (name, cp, vp) in [
                ("rho_g", r.cp_summary.rho_g, r.vp_summary.rho_g),
                ("delta_phi", r.cp_summary.delta_phi, r.vp_summary.delta_phi),
                ("rms", r.cp_summary.rms, r.vp_summary.rms),
                ("time_lag", r.cp_summary.time_lag, r.vp_summary.time_lag),
                ("rpe", r.cp_summary.rpe_mean, r.vp_summary.rpe_mean),
            ] {
                println!(
                    "{name:<10}{:>9.4} ± {:<6.4}{:>9.4} ± {:<6.4}",
                    cp.mean, cp.sd, vp.mean, vp.sd
                );
            }
        }
        Command::Sweep {
            checkpoint,
            out,
            config,
            trials,
        } => {
            let (net, mut cfg) = checkpoint_and_config(&checkpoint, config.as_deref(), cli.seed)?;
            if let Some(n) = trials {
                cfg.validation.trials = n;
            }
            let rec = sweep_to_dir(&cfg, &net, &out)?;
            for row in &rec.sweep.rows {
                println!(
                    "{:<9}{:<3}{:.4} ± {:.4}",
                    row.topology.as_str(),
                    if matches!(row.condition, mirror_core::harness::Condition::Vp) { "vp" } else { "cp" },
                    row.rho_g_mean,
                    row.rho_g_sd
                );
            }
        }
        Command::Analyze { input, out } => {
            let rec = analyze_dir(&input, &out)?;
            println!("{} file(s): rho_g {:.4} ± {:.4}", rec.files.len(), rec.summary.rho_g.mean, rec.summary.rho_g.sd);
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
