//! Learned predictors: memory-boundness estimation from two timed samples,
//! the time / CPU-power / memory-power regressions fitted per
//! `<cluster, n_cores>` on a synthetic benchmark ladder, and the per-kernel
//! lookup tables they populate.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpr::{self, MprModel, ProfileDataset};
use crate::platform::{ClusterId, Configuration, CoreOption, GridPoint, KernelParams, Platform, PlatformSpec};

pub const LADDER_LEN: usize = 41;
pub const LADDER_STEP: f64 = 0.025;
/// Floor applied to predicted times.
pub const MIN_TIME_S: f64 = 1e-6;
/// Reference execution time of every ladder kernel.
pub const LADDER_REF_TIME_S: f64 = 0.01;
const LADDER_KAPPA: f64 = 0.8;
const LADDER_MU: f64 = 0.1;

/// `(Time'/Time - r) / (1 - r)` with `r = f_c / f_c'`, clamped to `[0, 1]`.
pub fn estimate_mb(time: f64, time_prime: f64, f_c: f64, f_c_prime: f64) -> Result<f64> {
    Ok(estimate_mb_raw(time, time_prime, f_c, f_c_prime)?.clamp(0.0, 1.0))
}

pub fn estimate_mb_raw(time: f64, time_prime: f64, f_c: f64, f_c_prime: f64) -> Result<f64> {
    if f_c == f_c_prime {
        return Err(Error::EqualFrequencies(f_c));
    }
    if !(time > 0.0 && time_prime > 0.0) {
        return Err(Error::InvalidInput("sampled times must be positive".into()));
    }
    let r = f_c / f_c_prime;
    Ok((time_prime / time - r) / (1.0 - r))
}

/// `1 - |real - predicted| / real`; negative for very poor predictions.
pub fn accuracy(real: f64, predicted: f64) -> Result<f64> {
    if !(real > 0.0) {
        return Err(Error::InvalidInput(format!("accuracy needs real > 0, got {real}")));
    }
    Ok(1.0 - (real - predicted).abs() / real)
}

/// Splits `watts` among tasks in proportion to the cores each uses.
/// `None` means nothing is running and the power stays unattributed.
pub fn attribute_idle_by_cores(watts: f64, cores_used: &[usize]) -> Option<Vec<f64>> {
    let total: usize = cores_used.iter().sum();
    if total == 0 {
        return None;
    }
    Some(cores_used.iter().map(|&c| watts * c as f64 / total as f64).collect())
}

/// Splits `watts` equally among `n` running tasks.
pub fn attribute_idle_equal(watts: f64, n: usize) -> Option<Vec<f64>> {
    (n > 0).then(|| vec![watts / n as f64; n])
}

/// The two core frequencies every kernel is timed at, with memory held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub f_c: f64,
    pub f_c_prime: f64,
    pub f_m: f64,
}

impl SamplingPlan {
    /// Top of the core ladder and the rung nearest 1.11/2.04 of it; memory at max.
    pub fn for_spec(spec: &PlatformSpec) -> Self {
        let ladder = spec.core_ladder();
        let f_c = spec.max_core_freq();
        let target = f_c * 1.11 / 2.04;
        let f_c_prime = ladder
            .iter()
            .copied()
            .filter(|&f| f < f_c)
            .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
            .unwrap_or(f_c);
        Self { f_c, f_c_prime, f_m: spec.max_mem_freq() }
    }

    pub fn is_degenerate(&self) -> bool {
        self.f_c == self.f_c_prime
    }

    /// Frequency of sampling stage 0 or 1.
    pub fn stage_freq(&self, stage: usize) -> f64 {
        if stage == 0 {
            self.f_c
        } else {
            self.f_c_prime
        }
    }
}

/// 41 kernels whose compute share at the reference configuration (first
/// cluster, one core, maximum frequencies) goes from 0% to 100% in 2.5%
/// steps, all with the same reference time.
pub fn synthetic_ladder(platform: &Platform) -> Vec<KernelParams> {
    let spec = &platform.spec;
    let t0 = &platform.truth.clusters[0];
    let f = spec.max_core_freq();
    (0..LADDER_LEN)
        .map(|i| {
            let frac = i as f64 * LADDER_STEP;
            KernelParams {
                name: format!("synth{:02}", i),
                ops: frac * LADDER_REF_TIME_S * t0.ipc * t0.eff[0] * f,
                bytes: (1.0 - frac) * LADDER_REF_TIME_S * t0.bw_gbps[0] / (1.0 + LADDER_MU),
                kappa: LADDER_KAPPA,
                mu: LADDER_MU,
            }
        })
        .collect()
}

/// One profiled `(kernel, configuration)` measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub kernel: String,
    pub cluster: String,
    pub n_cores: usize,
    pub f_c: f64,
    pub f_m: f64,
    pub time_s: f64,
    pub cpu_w: f64,
    pub mem_w: f64,
}

/// Runs `kernels` at every configuration of the grid. Timing noise (if the
/// platform enables it) is drawn from a generator seeded with `seed`.
pub fn profile_kernels(platform: &Platform, kernels: &[KernelParams], seed: u64) -> Vec<ProfileRow> {
    let spec = &platform.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(kernels.len() * spec.cells_per_kernel());
    for k in kernels {
        for (oi, o) in spec.options().iter().enumerate() {
            for fc in 0..spec.core_ladder().len() {
                for fm in 0..spec.mem_ladder().len() {
                    let gp = GridPoint { option: oi, fc, fm };
                    let cell = platform.evaluate_point(k, gp);
                    let cfg = spec.config(gp);
                    rows.push(ProfileRow {
                        kernel: k.name.clone(),
                        cluster: spec.cluster(o.cluster).name.clone(),
                        n_cores: o.n_cores,
                        f_c: cfg.f_c,
                        f_m: cfg.f_m,
                        time_s: cell.time * platform.noise_factor(&mut rng),
                        cpu_w: cell.cpu_w,
                        mem_w: cell.mem_w,
                    });
                }
            }
        }
    }
    rows
}

/// Idle watts measured with no work running.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdlePowerTable {
    /// Whole-cluster idle watts, indexed `[cluster][f_c index]`.
    pub cluster_w: Vec<Vec<f64>>,
    /// Memory idle watts per memory ladder index.
    pub mem_w: Vec<f64>,
}

impl IdlePowerTable {
    pub fn measure(platform: &Platform) -> Self {
        let spec = &platform.spec;
        Self {
            cluster_w: (0..spec.clusters.len())
                .map(|c| {
                    spec.core_ladder()
                        .iter()
                        .map(|&f| platform.cluster_idle_power(ClusterId(c), f))
                        .collect()
                })
                .collect(),
            mem_w: spec.mem_ladder().iter().map(|&f| platform.mem_idle_power(f)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let monotone = |v: &[f64]| v.iter().all(|&w| w >= 0.0) && v.windows(2).all(|w| w[0] <= w[1]);
        if !self.cluster_w.iter().all(|v| monotone(v)) || !monotone(&self.mem_w) {
            return Err(Error::InvalidInput("idle power must be >= 0 and non-decreasing".into()));
        }
        Ok(())
    }
}

/// Fitted models for one `<cluster, n_cores>` option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionModels {
    pub cluster: String,
    pub n_cores: usize,
    /// Stall-time fraction over `[MB, f_c/f_c', f_m/f_m']`.
    pub time: MprModel,
    /// CPU watts over `[MB, f_c']`.
    pub cpu: MprModel,
    /// Memory watts over `[MB, f_c', f_m']`.
    pub mem: MprModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub plan: SamplingPlan,
    pub options: Vec<OptionModels>,
    pub idle: IdlePowerTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Time,
    Cpu,
    Mem,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Time, ModelKind::Cpu, ModelKind::Mem];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Time => "time",
            ModelKind::Cpu => "cpu",
            ModelKind::Mem => "mem",
        }
    }
}

impl OptionModels {
    pub fn model(&self, kind: ModelKind) -> &MprModel {
        match kind {
            ModelKind::Time => &self.time,
            ModelKind::Cpu => &self.cpu,
            ModelKind::Mem => &self.mem,
        }
    }
}

/// Predicted time at `(f_c', f_m')` from a time measured at `(f_c, f_m)`.
pub fn predict_time(time: f64, mb: f64, f_c: f64, f_c_prime: f64, f_m: f64, f_m_prime: f64, stall: &MprModel) -> f64 {
    let rc = f_c / f_c_prime;
    let comp = time * (1.0 - mb) * rc;
    let stall_t = time * stall.eval(&[mb, rc, f_m / f_m_prime]);
    (comp + stall_t).max(MIN_TIME_S)
}

pub fn predict_cpu_power(mb: f64, f_c: f64, model: &MprModel) -> f64 {
    model.eval(&[mb, f_c])
}

pub fn predict_mem_power(mb: f64, f_c: f64, f_m: f64, model: &MprModel) -> f64 {
    model.eval(&[mb, f_c, f_m])
}

type RowKey = (String, String, usize, u64, u64);

fn row_key(kernel: &str, cluster: &str, n: usize, f_c: f64, f_m: f64) -> RowKey {
    (kernel.to_string(), cluster.to_string(), n, f_c.to_bits(), f_m.to_bits())
}

/// Fits the three models for every option from profile rows.
pub fn fit_models(spec: &PlatformSpec, rows: &[ProfileRow], idle: IdlePowerTable) -> Result<ModelSet> {
    let plan = SamplingPlan::for_spec(spec);
    let index: HashMap<RowKey, &ProfileRow> =
        rows.iter().map(|r| (row_key(&r.kernel, &r.cluster, r.n_cores, r.f_c, r.f_m), r)).collect();
    let mut kernels: Vec<&str> = rows.iter().map(|r| r.kernel.as_str()).collect();
    kernels.sort_unstable();
    kernels.dedup();

    let mut options = Vec::new();
    for o in spec.options() {
        let cname = &spec.cluster(o.cluster).name;
        let tag = format!("{cname}/{}", o.n_cores);
        let mut time_d = ProfileDataset::new(tag.clone());
        let mut cpu_d = ProfileDataset::new(tag.clone());
        let mut mem_d = ProfileDataset::new(tag.clone());
        for &k in &kernels {
            let sample = |f_c: f64| {
                index.get(&row_key(k, cname, o.n_cores, f_c, plan.f_m)).map(|r| r.time_s)
            };
            let (Some(t), Some(tp)) = (sample(plan.f_c), sample(plan.f_c_prime)) else {
                continue;
            };
            let mb = if plan.is_degenerate() { 0.5 } else { estimate_mb(t, tp, plan.f_c, plan.f_c_prime)? };
            for &f_c in spec.core_ladder() {
                for &f_m in spec.mem_ladder() {
                    let Some(r) = index.get(&row_key(k, cname, o.n_cores, f_c, f_m)) else {
                        continue;
                    };
                    let rc = plan.f_c / f_c;
                    time_d.push(vec![mb, rc, plan.f_m / f_m], (r.time_s - t * (1.0 - mb) * rc) / t);
                    cpu_d.push(vec![mb, f_c], r.cpu_w);
                    mem_d.push(vec![mb, f_c, f_m], r.mem_w);
                }
            }
        }
        if time_d.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no profile rows at the sampling frequencies for {tag}"
            )));
        }
        options.push(OptionModels {
            cluster: cname.clone(),
            n_cores: o.n_cores,
            time: mpr::fit(&time_d)?,
            cpu: mpr::fit(&cpu_d)?,
            mem: mpr::fit(&mem_d)?,
        });
    }
    Ok(ModelSet { plan, options, idle })
}

/// Offline pipeline: profile the synthetic ladder on the oracle and fit.
pub fn fit_from_oracle(platform: &Platform, seed: u64) -> Result<ModelSet> {
    let rows = profile_kernels(platform, &synthetic_ladder(platform), seed);
    fit_models(&platform.spec, &rows, IdlePowerTable::measure(platform))
}

/// Sampled times of one kernel at one option.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSample {
    pub time: f64,
    pub time_prime: f64,
    pub mb: f64,
}

impl OptionSample {
    pub fn new(time: f64, time_prime: f64, plan: &SamplingPlan) -> Result<Self> {
        let mb = if plan.is_degenerate() {
            0.5
        } else {
            estimate_mb(time, time_prime, plan.f_c, plan.f_c_prime)?
        };
        Ok(Self { time, time_prime, mb })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelProfile {
    pub kernel: String,
    /// Indexed like [`PlatformSpec::options`].
    pub samples: Vec<Option<OptionSample>>,
}

impl KernelProfile {
    pub fn empty(kernel: impl Into<String>, n_options: usize) -> Self {
        Self { kernel: kernel.into(), samples: vec![None; n_options] }
    }

    pub fn is_complete(&self) -> bool {
        self.samples.iter().all(Option::is_some)
    }

    /// Samples taken directly from the oracle.
    pub fn from_oracle(platform: &Platform, k: &KernelParams) -> Result<Self> {
        let spec = &platform.spec;
        let plan = SamplingPlan::for_spec(spec);
        let samples = spec
            .options()
            .iter()
            .map(|o| {
                let cfg = |f_c| Configuration { cluster: o.cluster, n_cores: o.n_cores, f_c, f_m: plan.f_m };
                let t = platform.ground_truth_time(k, &cfg(plan.f_c))?;
                let tp = platform.ground_truth_time(k, &cfg(plan.f_c_prime))?;
                OptionSample::new(t, tp, &plan).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kernel: k.name.clone(), samples })
    }
}

/// The configuration grid a table is laid out on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    pub options: Vec<CoreOption>,
    /// Core count of the cluster each option belongs to.
    pub cluster_cores: Vec<usize>,
    pub core_ladder: Vec<f64>,
    pub mem_ladder: Vec<f64>,
}

impl TableGrid {
    pub fn from_spec(spec: &PlatformSpec) -> Self {
        let options = spec.options();
        Self {
            cluster_cores: options.iter().map(|o| spec.cluster(o.cluster).core_count).collect(),
            options,
            core_ladder: spec.core_ladder().to_vec(),
            mem_ladder: spec.mem_ladder().to_vec(),
        }
    }

    pub fn n_fc(&self) -> usize {
        self.core_ladder.len()
    }

    pub fn n_fm(&self) -> usize {
        self.mem_ladder.len()
    }

    pub fn cells(&self) -> usize {
        self.options.len() * self.n_fc() * self.n_fm()
    }

    pub fn index(&self, gp: GridPoint) -> usize {
        (gp.option * self.n_fc() + gp.fc) * self.n_fm() + gp.fm
    }

    pub fn point(&self, idx: usize) -> GridPoint {
        let fm = idx % self.n_fm();
        let rest = idx / self.n_fm();
        GridPoint { option: rest / self.n_fc(), fc: rest % self.n_fc(), fm }
    }

    pub fn points(&self) -> impl Iterator<Item = GridPoint> + '_ {
        (0..self.cells()).map(|i| self.point(i))
    }

    pub fn config(&self, gp: GridPoint) -> Configuration {
        let o = self.options[gp.option];
        Configuration {
            cluster: o.cluster,
            n_cores: o.n_cores,
            f_c: self.core_ladder[gp.fc],
            f_m: self.mem_ladder[gp.fm],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSource {
    Measured,
    Predicted,
}

/// Time, CPU-power and memory-power tables of one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub kernel: String,
    pub grid: TableGrid,
    pub idle: IdlePowerTable,
    pub time: Vec<f64>,
    pub cpu_w: Vec<f64>,
    pub mem_w: Vec<f64>,
    /// Applies to the time entry; power entries are always predicted.
    pub source: Vec<CellSource>,
}

impl KernelTable {
    pub fn entries(&self) -> usize {
        self.time.len() + self.cpu_w.len() + self.mem_w.len()
    }

    pub fn measured_count(&self) -> usize {
        self.source.iter().filter(|s| **s == CellSource::Measured).count()
    }

    /// Builds a table from per-cell closures; used for planted tables.
    pub fn from_fn(
        kernel: impl Into<String>,
        grid: TableGrid,
        idle: IdlePowerTable,
        mut f: impl FnMut(GridPoint) -> (f64, f64, f64),
    ) -> Self {
        let n = grid.cells();
        let (mut time, mut cpu_w, mut mem_w) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for gp in grid.points() {
            let (t, c, m) = f(gp);
            time.push(t);
            cpu_w.push(c);
            mem_w.push(m);
        }
        Self { kernel: kernel.into(), grid, idle, time, cpu_w, mem_w, source: vec![CellSource::Predicted; n] }
    }

    /// Exact oracle values, for reference comparisons.
    pub fn from_oracle(platform: &Platform, k: &KernelParams) -> Self {
        let grid = TableGrid::from_spec(&platform.spec);
        Self::from_fn(&k.name, grid, IdlePowerTable::measure(platform), |gp| {
            let c = platform.evaluate_point(k, gp);
            (c.time, c.cpu_w, c.mem_w)
        })
    }

    pub fn at(&self, gp: GridPoint) -> (f64, f64, f64) {
        let i = self.grid.index(gp);
        (self.time[i], self.cpu_w[i], self.mem_w[i])
    }

    /// CSV rows: kernel, cluster, n_cores, f_c, f_m, time_s, cpu_w, mem_w, source.
    pub fn csv_rows(&self, spec: &PlatformSpec) -> Vec<[String; 9]> {
        self.grid
            .points()
            .map(|gp| {
                let i = self.grid.index(gp);
                let cfg = self.grid.config(gp);
                [
                    self.kernel.clone(),
                    spec.cluster(cfg.cluster).name.clone(),
                    cfg.n_cores.to_string(),
                    format!("{:.2}", cfg.f_c),
                    format!("{:.2}", cfg.f_m),
                    format!("{:e}", self.time[i]),
                    format!("{:e}", self.cpu_w[i]),
                    format!("{:e}", self.mem_w[i]),
                    match self.source[i] {
                        CellSource::Measured => "measured".into(),
                        CellSource::Predicted => "predicted".into(),
                    },
                ]
            })
            .collect()
    }
}

/// Populates a kernel's tables from its samples and the fitted models.
pub fn build_tables(profile: &KernelProfile, models: &ModelSet, spec: &PlatformSpec) -> Result<KernelTable> {
    let grid = TableGrid::from_spec(spec);
    if profile.samples.len() != grid.options.len() || models.options.len() != grid.options.len() {
        return Err(Error::InvalidInput("profile/model option count does not match the platform".into()));
    }
    for (oi, s) in profile.samples.iter().enumerate() {
        if s.is_none() {
            let o = grid.options[oi];
            return Err(Error::MissingProfile {
                cluster: spec.cluster(o.cluster).name.clone(),
                n_cores: o.n_cores,
            });
        }
    }
    let plan = models.plan;
    let sample_fc = spec.fc_index(plan.f_c);
    let sample_fc_prime = spec.fc_index(plan.f_c_prime);
    let sample_fm = spec.fm_index(plan.f_m);
    let mut table = KernelTable::from_fn(&profile.kernel, grid.clone(), models.idle.clone(), |gp| {
        let s = profile.samples[gp.option].expect("checked");
        let m = &models.options[gp.option];
        let f_c = grid.core_ladder[gp.fc];
        let f_m = grid.mem_ladder[gp.fm];
        (
            predict_time(s.time, s.mb, plan.f_c, f_c, plan.f_m, f_m, &m.time),
            predict_cpu_power(s.mb, f_c, &m.cpu).max(0.0),
            predict_mem_power(s.mb, f_c, f_m, &m.mem).max(0.0),
        )
    });
    if let Some(fm) = sample_fm {
        for (oi, s) in profile.samples.iter().enumerate() {
            let s = s.expect("checked");
            for (fc, t) in [(sample_fc_prime, s.time_prime), (sample_fc, s.time)] {
                if let Some(fc) = fc {
                    let i = grid.index(GridPoint { option: oi, fc, fm });
                    table.time[i] = t;
                    table.source[i] = CellSource::Measured;
                }
            }
        }
    }
    Ok(table)
}

/// Per-kernel profiles read off the sampling-plan rows of a profile.
pub fn profiles_from_rows(spec: &PlatformSpec, rows: &[ProfileRow]) -> Result<Vec<KernelProfile>> {
    let plan = SamplingPlan::for_spec(spec);
    let options = spec.options();
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.kernel.as_str()) {
            names.push(&r.kernel);
        }
    }
    let index: HashMap<RowKey, &ProfileRow> =
        rows.iter().map(|r| (row_key(&r.kernel, &r.cluster, r.n_cores, r.f_c, r.f_m), r)).collect();
    names
        .into_iter()
        .map(|name| {
            let mut prof = KernelProfile::empty(name, options.len());
            for (oi, o) in options.iter().enumerate() {
                let cl = &spec.cluster(o.cluster).name;
                let get = |f_c| index.get(&row_key(name, cl, o.n_cores, f_c, plan.f_m)).map(|r| r.time_s);
                if let (Some(t), Some(tp)) = (get(plan.f_c), get(plan.f_c_prime)) {
                    prof.samples[oi] = Some(OptionSample::new(t, tp, &plan)?);
                }
            }
            Ok(prof)
        })
        .collect()
}

/// Distribution of per-cell accuracy for one model kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub kind: ModelKind,
    pub cells: usize,
    pub median: f64,
    pub p10: f64,
    pub mean: f64,
}

impl AccuracySummary {
    pub fn from_values(kind: ModelKind, mut v: Vec<f64>) -> Self {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let pick = |q: f64| if n == 0 { f64::NAN } else { v[((n - 1) as f64 * q).round() as usize] };
        Self { kind, cells: n, median: pick(0.5), p10: pick(0.1), mean: v.iter().sum::<f64>() / n.max(1) as f64 }
    }
}

/// Accuracy of tables built from `rows`' own samples against every row.
pub fn profile_accuracy(spec: &PlatformSpec, rows: &[ProfileRow], models: &ModelSet) -> Result<Vec<AccuracySummary>> {
    let mut acc: [Vec<f64>; 3] = Default::default();
    let profiles = profiles_from_rows(spec, rows)?;
    let tables: HashMap<&str, KernelTable> = profiles
        .iter()
        .map(|p| build_tables(p, models, spec).map(|t| (p.kernel.as_str(), t)))
        .collect::<Result<_>>()?;
    for r in rows {
        let t = &tables[r.kernel.as_str()];
        let cluster = spec
            .cluster_by_name(&r.cluster)
            .ok_or_else(|| Error::InvalidInput(format!("unknown cluster `{}`", r.cluster)))?;
        let cfg = Configuration { cluster, n_cores: r.n_cores, f_c: r.f_c, f_m: r.f_m };
        let (time, cpu, mem) = t.at(spec.grid_point(&cfg)?);
        for (i, (real, pred)) in [(r.time_s, time), (r.cpu_w, cpu), (r.mem_w, mem)].into_iter().enumerate() {
            if real > 0.0 {
                acc[i].push(accuracy(real, pred)?);
            }
        }
    }
    Ok(ModelKind::ALL.iter().zip(acc).map(|(&k, v)| AccuracySummary::from_values(k, v)).collect())
}
