use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use joss_cli::*;
use joss_core::baselines::SchedulerKind;
use joss_core::platform::default_tx2;
use joss_core::sched::Goal;

#[derive(Parser)]
#[command(name = "joss", version, about = "Energy-aware task scheduling on a simulated asymmetric multicore")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time the synthetic ladder at every configuration.
    Profile {
        #[arg(long)]
        platform: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "profile")]
        out: PathBuf,
    },
    /// Fit per-option time and power models from a profile.
    Fit {
        #[arg(long)]
        platform: Option<PathBuf>,
        #[arg(long, default_value = "profile/profile.csv")]
        profile: PathBuf,
        #[arg(long, default_value = "profile/idle.csv")]
        idle: PathBuf,
        #[arg(long, default_value = "models")]
        out: PathBuf,
    },
    /// Run one workload under one scheduler.
    Run(RunArgs),
    /// Run several schedulers on the same workload, normalized to GRWS.
    Compare(RunArgs),
    /// Oracle energy of one kernel over the whole configuration grid.
    Sweep {
        #[arg(long)]
        platform: Option<PathBuf>,
        /// Kernel preset name or TOML file.
        #[arg(long)]
        kernel: String,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Write the built-in platform as TOML.
    Platform {
        #[arg(long, default_value = "platform.toml")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment TOML; flags given alongside it override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    platform: Option<PathBuf>,
    /// Suite workload name or TOML file with a [workload] table.
    #[arg(long)]
    workload: Option<String>,
    #[arg(long)]
    scheduler: Option<SchedulerKind>,
    /// Comma-separated list for `compare`.
    #[arg(long, value_delimiter = ',')]
    schedulers: Vec<SchedulerKind>,
    /// min_energy | speedup:<x> | max_perf
    #[arg(long)]
    goal: Option<Goal>,
    #[arg(long)]
    seed: Option<u64>,
    /// models.json written by `fit`.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the event trace.
    #[arg(long)]
    trace: bool,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_toml_file(p)?,
            None => {
                let (Some(w), Some(seed)) = (&self.workload, self.seed) else {
                    anyhow::bail!("--workload and --seed are required without --config");
                };
                let (name, workload) = resolve_workload(w)?;
                ExperimentConfig {
                    platform: None,
                    models: None,
                    workload,
                    name,
                    scheduler: SchedulerKind::Joss,
                    schedulers: vec![],
                    goal: "min_energy".into(),
                    seed,
                    out: "out".into(),
                    trace: false,
                }
            }
        };
        if self.config.is_some() {
            if let Some(w) = &self.workload {
                (cfg.name, cfg.workload) = resolve_workload(w)?;
            }
            if let Some(s) = self.seed {
                cfg.seed = s;
            }
        }
        if self.platform.is_some() {
            cfg.platform = self.platform;
        }
        if self.models.is_some() {
            cfg.models = self.models;
        }
        if let Some(s) = self.scheduler {
            cfg.scheduler = s;
        }
        if !self.schedulers.is_empty() {
            cfg.schedulers = self.schedulers;
        }
        if let Some(g) = self.goal {
            cfg.goal = g.to_string();
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        cfg.trace |= self.trace;
        Ok(cfg)
    }
}

fn main_inner() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Profile { platform, seed, out } => {
            let p = load_platform(platform.as_deref())?;
            let n = cmd_profile(&p, seed, &out)?;
            println!("wrote {n} rows to {}", out.join("profile.csv").display());
        }
        Cmd::Fit { platform, profile, idle, out } => {
            let p = load_platform(platform.as_deref())?;
            let fit = cmd_fit(&p, &profile, &idle, &out)?;
            println!("fitted {} options; wrote {}", fit.models.options.len(), out.join("models.json").display());
            for a in &fit.accuracy {
                println!("{:5} median {:.4}  p10 {:.4}  mean {:.4}", a.kind.as_str(), a.median, a.p10, a.mean);
            }
        }
        Cmd::Run(args) => {
            let cfg = args.into_config()?;
            let f = cmd_run(&cfg)?;
            let r = &f.report;
            println!(
                "{} on {}: {:.3} J ({:.3} cpu, {:.3} mem) in {:.3} s",
                r.scheduler, f.workload, r.total_energy_j, r.cpu_energy_j, r.mem_energy_j, r.makespan_s
            );
            if let (Some(t), Some(a)) = (f.target_speedup, f.achieved_speedup) {
                println!("speedup target {t}, achieved {a:.3}");
            }
            println!("wrote {}", cfg.out.join("report.json").display());
        }
        Cmd::Compare(args) => {
            let cfg = args.into_config()?;
            let rows = cmd_compare(&cfg)?;
            println!("{:<12} {:>12} {:>10} {:>10}", "scheduler", "energy_j", "norm_e", "norm_t");
            for r in rows {
                println!(
                    "{:<12} {:>12.3} {:>10.4} {:>10.4}",
                    r.scheduler, r.total_energy_j, r.normalized_energy, r.normalized_time
                );
            }
        }
        Cmd::Sweep { platform, kernel, out } => {
            let p = load_platform(platform.as_deref())?;
            let k = resolve_kernel(&kernel)?;
            let rows = cmd_sweep(&p, &k, &out)?;
            let b = argmin_energy(&rows);
            println!(
                "{} configurations; minimum {:.6} J at <{}, {}, {}GHz, {}GHz>",
                rows.len(),
                b.total_energy_j,
                b.cluster,
                b.n_cores,
                b.f_c,
                b.f_m
            );
        }
        Cmd::Platform { out } => {
            std::fs::write(&out, default_tx2().to_toml_string())?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
