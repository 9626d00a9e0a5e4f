//! Command-line front end: load a scenario, run it (single or seed sweep),
//! validate configs, and compare run reports.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tsnbridge_core::core5g::{ChannelMode, SchedulerKind};
use tsnbridge_core::gptp::validate_hierarchy;
use tsnbridge_core::report;
use tsnbridge_core::runner::{self, RunOptions};
use tsnbridge_core::{Overrides, RunReport, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "tsnbridge",
    about = "Deterministic discrete-event simulator of a 5G logical TSN bridge",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Ideal,
    Fading,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulerArg {
    Maxci,
    Pf,
    Rr,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Scenario configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the endpoint count
    #[arg(long)]
    endpoints: Option<usize>,
    /// Override the channel model
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    /// Override the MAC scheduler discipline
    #[arg(long, value_enum)]
    scheduler: Option<SchedulerArg>,
    /// Proceed even if the clock hierarchy fails validation
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json, report.txt and per-endpoint
    /// residence CSVs
    Run {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Output directory (created if missing)
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also dump per-packet lineage records (large)
        #[arg(long)]
        lineage_dump: bool,
        /// Also dump per-slot scheduler grants (large)
        #[arg(long)]
        grant_trace: bool,
    },
    /// Validate a scenario config and its clock hierarchy without running
    Validate {
        /// Scenario configuration file (TOML)
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare two report.json files side by side
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
    },
    /// Run a scenario across a seed range and print aggregate statistics
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        /// First seed (inclusive)
        #[arg(long)]
        seed_from: u64,
        /// Last seed (inclusive)
        #[arg(long)]
        seed_to: u64,
        /// Write per-seed reports into this directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn overrides_of(common: &CommonRunArgs) -> Overrides {
    Overrides {
        seed: common.seed,
        endpoints: common.endpoints,
        channel: common.channel.map(|c| match c {
            ChannelArg::Ideal => ChannelMode::Ideal,
            ChannelArg::Fading => ChannelMode::Fading,
        }),
        scheduler: common.scheduler.map(|s| match s {
            SchedulerArg::Maxci => SchedulerKind::MaxCi,
            SchedulerArg::Pf => SchedulerKind::Pf,
            SchedulerArg::Rr => SchedulerKind::Rr,
        }),
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut config = ScenarioConfig::from_toml(&text)?;
    config.apply_overrides(overrides);
    config.validate()?;
    Ok(config)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            common,
            out,
            lineage_dump,
            grant_trace,
        } => {
            let config = load_config(&common.config, &overrides_of(&common))?;
            let hierarchy = validate_hierarchy(&config.resolved_hierarchy());
            for error in &hierarchy.errors {
                eprintln!("hierarchy: {error}");
            }
            if !hierarchy.is_valid() && !common.force {
                bail!("clock hierarchy validation failed (use --force to run anyway)");
            }
            let options = RunOptions {
                force: common.force,
                grant_trace,
            };
            let output = runner::run(&config, &options)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("report.json"), output.report.to_json())?;
            fs::write(out.join("report.txt"), output.report.to_text())?;
            for (i, log) in output.residence_logs.iter().enumerate() {
                fs::write(
                    out.join(format!("residence_{i}.csv")),
                    report::residence_csv(log),
                )?;
            }
            if lineage_dump {
                fs::write(
                    out.join("lineage.csv"),
                    report::lineage_csv(&output.lineages, &output.flows),
                )?;
            }
            if grant_trace {
                if let Some(grants) = &output.grants_dl {
                    fs::write(out.join("grants_dl.csv"), report::grants_csv(grants))?;
                }
                if let Some(grants) = &output.grants_ul {
                    fs::write(out.join("grants_ul.csv"), report::grants_csv(grants))?;
                }
            }
            print!("{}", output.report.to_text());
            println!("reports written to {}", out.display());
        }

        Command::Validate { config } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading config {}", config.display()))?;
            let parsed = ScenarioConfig::from_toml(&text)?;
            parsed.validate()?;
            let hierarchy = validate_hierarchy(&parsed.resolved_hierarchy());
            println!(
                "config ok: {} endpoint(s), {} flow(s), horizon {} ms",
                parsed.endpoint_count,
                parsed.flows.len(),
                parsed.horizon_ns / 1_000_000
            );
            println!(
                "hierarchy: {} error(s); transparent clocks {:?}",
                hierarchy.errors.len(),
                hierarchy.registered_transparent_clocks
            );
            for error in &hierarchy.errors {
                println!("  {error}");
            }
            if !hierarchy.is_valid() {
                bail!("clock hierarchy validation failed");
            }
        }

        Command::Compare { report_a, report_b } => {
            let a: RunReport = serde_json::from_str(&fs::read_to_string(&report_a)?)
                .with_context(|| format!("parsing {}", report_a.display()))?;
            let b: RunReport = serde_json::from_str(&fs::read_to_string(&report_b)?)
                .with_context(|| format!("parsing {}", report_b.display()))?;
            print!("{}", report::compare(&a, &b));
        }

        Command::Sweep {
            common,
            seed_from,
            seed_to,
            out,
        } => {
            if seed_to < seed_from {
                bail!("--seed-to must be >= --seed-from");
            }
            let options = RunOptions {
                force: common.force,
                grant_trace: false,
            };
            let mut rows = Vec::new();
            for seed in seed_from..=seed_to {
                let mut overrides = overrides_of(&common);
                overrides.seed = Some(seed);
                let config = load_config(&common.config, &overrides)?;
                let report = runner::run_report(&config, &options)?;
                if let Some(dir) = &out {
                    fs::create_dir_all(dir)?;
                    fs::write(
                        dir.join(format!("report_seed{seed}.json")),
                        report.to_json(),
                    )?;
                }
                rows.push(report);
            }
            print_sweep_summary(&rows);
        }
    }
    Ok(())
}

fn print_sweep_summary(reports: &[RunReport]) {
    println!(
        "{:<8}{:>14}{:>14}{:>16}{:>14}{:>12}",
        "seed", "hp mean ms", "be mean ms", "residence us", "spread us", "dropped"
    );
    let mut hp_means = Vec::new();
    for r in reports {
        let hp = r
            .class("high-prio")
            .and_then(|c| c.delay_post_warmup)
            .map(|d| d.mean_ns / 1e6);
        let be = r
            .class("best-effort")
            .and_then(|c| c.delay_post_warmup)
            .map(|d| d.mean_ns / 1e6);
        let res = r.af.total.as_ref().map(|t| t.mean_ns / 1e3);
        let spread = r.residence_spread_ns().map(|s| s as f64 / 1e3);
        if let Some(v) = hp {
            hp_means.push(v);
        }
        println!(
            "{:<8}{:>14}{:>14}{:>16}{:>14}{:>12}",
            r.seed,
            hp.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            be.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            res.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            spread
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into()),
            r.bridge.total_dropped
        );
    }
    if !hp_means.is_empty() {
        let min = hp_means.iter().copied().fold(f64::INFINITY, f64::min);
        let max = hp_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = hp_means.iter().sum::<f64>() / hp_means.len() as f64;
        println!(
            "aggregate over {} seed(s): hp mean delay min {min:.4} / mean {mean:.4} / max {max:.4} ms",
            hp_means.len()
        );
    }
}
