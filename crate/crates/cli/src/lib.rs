//! Experiment harness: profiling, model fitting, single runs, scheduler
//! comparisons and oracle sweeps, all driven by files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use joss_core::baselines::SchedulerKind;
use joss_core::dag::TaskDag;
use joss_core::models::{
    fit_from_oracle, fit_models, profile_accuracy, profile_kernels, synthetic_ladder, AccuracySummary, IdlePowerTable,
    ModelKind, ModelSet, ProfileRow,
};
use joss_core::mpr::feature_names;
use joss_core::platform::{default_tx2, ClusterId, KernelParams, Platform};
use joss_core::sched::{Goal, SchedParams};
use joss_core::sim::{run, RunOutcome, RunReport, SimOptions};
use joss_core::workload::{kernel_preset, preset, WorkloadSpec};

pub fn load_platform(path: Option<&Path>) -> Result<Platform> {
    match path {
        None => Ok(default_tx2()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading platform {}", p.display()))?;
            Platform::from_toml_str(&text).with_context(|| format!("in platform {}", p.display()))
        }
    }
}

#[derive(Debug, Deserialize)]
struct WorkloadFile {
    workload: WorkloadSpec,
}

/// A suite preset name, or a TOML file with a `[workload]` table.
pub fn resolve_workload(arg: &str) -> Result<(String, WorkloadSpec)> {
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "toml") {
        let text = fs::read_to_string(path).with_context(|| format!("reading workload {arg}"))?;
        let f: WorkloadFile = toml::from_str(&text).with_context(|| format!("in workload {arg}"))?;
        let name = path.file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
        return Ok((name, f.workload));
    }
    Ok((arg.to_string(), preset(arg)?))
}

/// A kernel preset name, or a TOML file holding one kernel's parameters.
pub fn resolve_kernel(arg: &str) -> Result<KernelParams> {
    if Path::new(arg).extension().is_some_and(|e| e == "toml") {
        let text = fs::read_to_string(arg).with_context(|| format!("reading kernel {arg}"))?;
        let k: KernelParams = toml::from_str(&text).with_context(|| format!("in kernel {arg}"))?;
        k.validate()?;
        return Ok(k);
    }
    kernel_preset(arg).with_context(|| format!("unknown kernel `{arg}`"))
}

pub fn load_models(path: Option<&Path>, platform: &Platform) -> Result<ModelSet> {
    match path {
        None => Ok(fit_from_oracle(platform, 0)?),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading models {}", p.display()))?;
            let m: ModelSet = serde_json::from_str(&text).with_context(|| format!("in models {}", p.display()))?;
            if m.options.len() != platform.spec.options().len() {
                bail!("models in {} were fitted for a different platform", p.display());
            }
            Ok(m)
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a run depends on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Platform TOML; the built-in TX2-like machine when absent.
    #[serde(default)]
    pub platform: Option<PathBuf>,
    /// Fitted models (JSON from `joss fit`); fitted on the fly when absent.
    #[serde(default)]
    pub models: Option<PathBuf>,
    pub workload: WorkloadSpec,
    /// Label used in reports.
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_scheduler")]
    pub scheduler: SchedulerKind,
    /// Used by `compare`; every scheduler when empty.
    #[serde(default)]
    pub schedulers: Vec<SchedulerKind>,
    #[serde(default = "default_goal")]
    pub goal: String,
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub trace: bool,
}

fn default_name() -> String {
    "workload".into()
}

fn default_scheduler() -> SchedulerKind {
    SchedulerKind::Joss
}

fn default_goal() -> String {
    "min_energy".into()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading experiment {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("in experiment {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.platform, &mut cfg.models].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for p in [&self.platform, &self.models].into_iter().flatten() {
            if !p.exists() {
                bail!("referenced file {} does not exist", p.display());
            }
        }
        self.goal()?;
        Ok(())
    }

    pub fn goal(&self) -> Result<Goal> {
        Ok(self.goal.parse::<Goal>()?)
    }
}

/// Resolved inputs of a run.
pub struct Prepared {
    pub platform: Platform,
    pub models: ModelSet,
    pub dag: TaskDag,
    pub hash: String,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let platform = load_platform(cfg.platform.as_deref())?;
    let models = load_models(cfg.models.as_deref(), &platform)?;
    let dag = cfg.workload.build()?;
    let mut h = Sha256::new();
    h.update(platform.to_toml_string().as_bytes());
    h.update(serde_json::to_vec(&models)?);
    h.update(serde_json::to_vec(&cfg.workload)?);
    h.update(cfg.scheduler.label().as_bytes());
    h.update(cfg.goal.as_bytes());
    h.update(cfg.seed.to_le_bytes());
    Ok(Prepared { platform, models, dag, hash: hex(&h.finalize()) })
}

pub fn simulate(p: &Prepared, kind: SchedulerKind, goal: Goal, seed: u64, trace: bool) -> Result<RunOutcome> {
    let mut pol = kind.build(SchedParams { goal, ..SchedParams::default() }, Some(&p.models))?;
    let opts = SimOptions { trace, ..SimOptions::seeded(seed) };
    Ok(run(&p.dag, pol.as_mut(), &p.platform, &opts)?)
}

/// Written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub config_hash: String,
    pub workload: String,
    pub goal: String,
    pub seed: u64,
    pub target_speedup: Option<f64>,
    /// Makespan of the min-energy run over this run's makespan.
    pub achieved_speedup: Option<f64>,
    pub reference_makespan_s: Option<f64>,
    pub report: RunReport,
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "workload",
    "scheduler",
    "goal",
    "seed",
    "tasks",
    "makespan_s",
    "cpu_energy_j",
    "mem_energy_j",
    "total_energy_j",
    "target_speedup",
    "achieved_speedup",
    "config_hash",
];

impl RunFile {
    pub fn summary_row(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        let r = &self.report;
        vec![
            self.workload.clone(),
            r.scheduler.clone(),
            self.goal.clone(),
            self.seed.to_string(),
            r.tasks.to_string(),
            r.makespan_s.to_string(),
            r.cpu_energy_j.to_string(),
            r.mem_energy_j.to_string(),
            r.total_energy_j.to_string(),
            opt(self.target_speedup),
            opt(self.achieved_speedup),
            self.config_hash.clone(),
        ]
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunFile> {
    let p = prepare(cfg)?;
    let goal = cfg.goal()?;
    let out = simulate(&p, cfg.scheduler, goal, cfg.seed, cfg.trace)?;
    let reference = match goal {
        Goal::MinEnergy => None,
        _ => Some(simulate(&p, cfg.scheduler, Goal::MinEnergy, cfg.seed, false)?.report.makespan_s),
    };
    let file = RunFile {
        config_hash: p.hash,
        workload: cfg.name.clone(),
        goal: goal.to_string(),
        seed: cfg.seed,
        target_speedup: match goal {
            Goal::Speedup(x) => Some(x),
            _ => None,
        },
        achieved_speedup: reference.map(|m| if out.report.makespan_s > 0.0 { m / out.report.makespan_s } else { 1.0 }),
        reference_makespan_s: reference,
        report: out.report,
    };
    ensure_dir(&cfg.out)?;
    fs::write(cfg.out.join("report.json"), serde_json::to_string_pretty(&file)? + "\n")?;
    write_csv(&cfg.out.join("summary.csv"), &SUMMARY_HEADER, [file.summary_row()])?;
    if let Some(trace) = out.trace {
        fs::write(cfg.out.join("trace.txt"), trace)?;
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub scheduler: String,
    pub total_energy_j: f64,
    /// Relative to GRWS; lower is better.
    pub normalized_energy: f64,
    pub makespan_s: f64,
    pub normalized_time: f64,
    pub cpu_energy_j: f64,
    pub mem_energy_j: f64,
}

/// Runs every scheduler on the same DAG and seed, one thread each.
pub fn compare_reports(p: &Prepared, kinds: &[SchedulerKind], goal: Goal, seed: u64) -> Result<Vec<RunReport>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&k| s.spawn(move || simulate(p, k, goal, seed, false).map(|o| o.report)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    })
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    let p = prepare(cfg)?;
    let mut kinds = if cfg.schedulers.is_empty() { SchedulerKind::ALL.to_vec() } else { cfg.schedulers.clone() };
    if !kinds.contains(&SchedulerKind::Grws) {
        kinds.insert(0, SchedulerKind::Grws);
    }
    let reports = compare_reports(&p, &kinds, cfg.goal()?, cfg.seed)?;
    let base = reports[kinds.iter().position(|&k| k == SchedulerKind::Grws).expect("inserted")].clone();
    let rows: Vec<CompareRow> = reports
        .iter()
        .map(|r| CompareRow {
            scheduler: r.scheduler.clone(),
            total_energy_j: r.total_energy_j,
            normalized_energy: r.total_energy_j / base.total_energy_j,
            makespan_s: r.makespan_s,
            normalized_time: r.makespan_s / base.makespan_s,
            cpu_energy_j: r.cpu_energy_j,
            mem_energy_j: r.mem_energy_j,
        })
        .collect();
    ensure_dir(&cfg.out)?;
    let mut w = csv::Writer::from_path(cfg.out.join("compare.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

pub fn cmd_profile(platform: &Platform, seed: u64, out: &Path) -> Result<usize> {
    ensure_dir(out)?;
    let rows = profile_kernels(platform, &synthetic_ladder(platform), seed);
    let mut w = csv::Writer::from_path(out.join("profile.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let idle = IdlePowerTable::measure(platform);
    let spec = &platform.spec;
    let mut idle_rows = Vec::new();
    for (c, ws) in idle.cluster_w.iter().enumerate() {
        for (&f, &w) in spec.core_ladder().iter().zip(ws) {
            idle_rows.push(vec![spec.cluster(ClusterId(c)).name.clone(), f.to_string(), w.to_string()]);
        }
    }
    for (&f, &w) in spec.mem_ladder().iter().zip(&idle.mem_w) {
        idle_rows.push(vec!["memory".into(), f.to_string(), w.to_string()]);
    }
    write_csv(&out.join("idle.csv"), &["domain", "freq_ghz", "watts"], idle_rows)?;
    Ok(rows.len())
}

pub fn read_profile(path: &Path) -> Result<Vec<ProfileRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ProfileRow>, _>>()?;
    if rows.is_empty() {
        bail!("profile {} has no rows", path.display());
    }
    Ok(rows)
}

#[derive(Debug, Deserialize)]
struct IdleRow {
    domain: String,
    freq_ghz: f64,
    watts: f64,
}

pub fn read_idle(path: &Path, platform: &Platform) -> Result<IdlePowerTable> {
    let spec = &platform.spec;
    let mut t = IdlePowerTable {
        cluster_w: vec![vec![f64::NAN; spec.core_ladder().len()]; spec.clusters.len()],
        mem_w: vec![f64::NAN; spec.mem_ladder().len()],
    };
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    for row in r.deserialize::<IdleRow>() {
        let row = row?;
        let slot = if row.domain == "memory" {
            spec.fm_index(row.freq_ghz).map(|i| &mut t.mem_w[i])
        } else {
            let c = spec.cluster_by_name(&row.domain).with_context(|| format!("unknown domain `{}`", row.domain))?;
            spec.fc_index(row.freq_ghz).map(|i| &mut t.cluster_w[c.0][i])
        };
        *slot.with_context(|| format!("{} GHz is not on the {} ladder", row.freq_ghz, row.domain))? = row.watts;
    }
    if t.cluster_w.iter().flatten().chain(&t.mem_w).any(|w| w.is_nan()) {
        bail!("idle table {} does not cover every frequency", path.display());
    }
    t.validate()?;
    Ok(t)
}

pub struct FitOutput {
    pub models: ModelSet,
    pub accuracy: Vec<AccuracySummary>,
}

/// Fits per-option models and writes them with their coefficients listed
/// by `(cluster, n_cores, kind)` and the training accuracy.
pub fn cmd_fit(platform: &Platform, profile: &Path, idle: &Path, out: &Path) -> Result<FitOutput> {
    let rows = read_profile(profile)?;
    let idle = read_idle(idle, platform)?;
    let models = fit_models(&platform.spec, &rows, idle)?;
    let accuracy = profile_accuracy(&platform.spec, &rows, &models)?;
    ensure_dir(out)?;
    fs::write(out.join("models.json"), serde_json::to_string_pretty(&models)? + "\n")?;
    let mut coef_rows = Vec::new();
    for o in &models.options {
        for kind in ModelKind::ALL {
            let m = o.model(kind);
            for (name, c) in feature_names(m.n_vars).into_iter().zip(&m.coefficients) {
                coef_rows.push(vec![o.cluster.clone(), o.n_cores.to_string(), kind.as_str().into(), name, c.to_string()]);
            }
        }
    }
    write_csv(&out.join("coefficients.csv"), &["cluster", "n_cores", "kind", "feature", "coefficient"], coef_rows)?;
    write_csv(
        &out.join("accuracy.csv"),
        &["kind", "cells", "median", "p10", "mean"],
        accuracy.iter().map(|a| {
            vec![a.kind.as_str().into(), a.cells.to_string(), a.median.to_string(), a.p10.to_string(), a.mean.to_string()]
        }),
    )?;
    Ok(FitOutput { models, accuracy })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cluster: String,
    pub n_cores: usize,
    pub f_c: f64,
    pub f_m: f64,
    pub time_s: f64,
    pub cpu_w: f64,
    pub mem_w: f64,
    pub idle_w: f64,
    pub cpu_energy_j: f64,
    pub total_energy_j: f64,
}

/// Oracle energy of one task of `kernel` at every configuration, charging
/// the awake cluster and memory idle power to it.
pub fn sweep(platform: &Platform, kernel: &KernelParams) -> Vec<SweepRow> {
    let spec = &platform.spec;
    let grid = joss_core::models::TableGrid::from_spec(spec);
    grid.points()
        .map(|gp| {
            let cfg = spec.config(gp);
            let c = platform.evaluate_point(kernel, gp);
            let cl_idle = platform.cluster_idle_power(cfg.cluster, cfg.f_c);
            let idle = cl_idle + platform.mem_idle_power(cfg.f_m);
            SweepRow {
                cluster: spec.cluster(cfg.cluster).name.clone(),
                n_cores: cfg.n_cores,
                f_c: cfg.f_c,
                f_m: cfg.f_m,
                time_s: c.time,
                cpu_w: c.cpu_w,
                mem_w: c.mem_w,
                idle_w: idle,
                cpu_energy_j: c.time * (c.cpu_w + cl_idle),
                total_energy_j: c.time * (c.cpu_w + c.mem_w + idle),
            }
        })
        .collect()
}

pub fn cmd_sweep(platform: &Platform, kernel: &KernelParams, out: &Path) -> Result<Vec<SweepRow>> {
    let rows = sweep(platform, kernel);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let mut w = csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}

pub fn argmin_energy(rows: &[SweepRow]) -> &SweepRow {
    rows.iter().min_by(|a, b| a.total_energy_j.total_cmp(&b.total_energy_j)).expect("non-empty grid")
}
