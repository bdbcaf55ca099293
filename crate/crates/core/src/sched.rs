//! The energy-aware scheduler: runtime sampling of every kernel, table
//! construction, memoized per-kernel configuration selection, placement
//! with same-cluster stealing, moldable execution, frequency coordination
//! between concurrent tasks and coarsening of fine-grained tasks.
//!
//! The same machinery, with a different search space and knob set, also
//! provides the ERASE-like and STEER-like baselines and the variant without
//! memory DVFS.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dag::{KernelId, TaskId};
use crate::error::{Error, Result};
use crate::models::{build_tables, KernelProfile, KernelTable, ModelSet, OptionSample, SamplingPlan};
use crate::platform::{ClusterId, Configuration};
use crate::search::{self, HintPolicy, Objective, SearchMode, SearchResult, SearchSpace};
use crate::sim::{Domain, KernelSelection, Policy, RunReport, Sim, TaskDone};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    MinEnergy,
    Speedup(f64),
    MaxPerf,
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_energy" => Ok(Goal::MinEnergy),
            "max_perf" => Ok(Goal::MaxPerf),
            _ => {
                let x = s
                    .strip_prefix("speedup:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse(format!("unknown goal `{s}` (min_energy | speedup:<x> | max_perf)")))?;
                if !(x >= 1.0) {
                    return Err(Error::InvalidInput(format!("speedup target must be >= 1, got {x}")));
                }
                Ok(Goal::Speedup(x))
            }
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::MinEnergy => write!(f, "min_energy"),
            Goal::Speedup(x) => write!(f, "speedup:{x}"),
            Goal::MaxPerf => write!(f, "max_perf"),
        }
    }
}

/// How the idle-power share is estimated when selecting a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintMode {
    /// Charge the full idle power to every task.
    Solo,
    /// Share with the tasks in the system when the selection is made.
    Instantaneous,
    /// Share with the DAG's average parallelism.
    Dop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedParams {
    pub goal: Goal,
    /// Tasks whose sampled single-core time is below this are coarsened;
    /// `None` means ten cluster DVFS latencies.
    pub fine_grain_threshold_s: Option<f64>,
    pub min_group: usize,
    pub hint: HintMode,
}

impl Default for SchedParams {
    fn default() -> Self {
        Self { goal: Goal::MinEnergy, fine_grain_threshold_s: None, min_group: 8, hint: HintMode::Instantaneous }
    }
}

/// Which knobs and objective the table-driven scheduler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full `<T_C, N_C, f_C, f_M>` search on total energy.
    Joss,
    /// Memory frequency left at its maximum.
    JossNoMem,
    /// `<T_C, N_C, f_C>` on CPU energy, memory at maximum.
    SteerLike,
    /// `<T_C, N_C>` on CPU energy at maximum frequencies.
    EraseLike,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Joss => "joss",
            Variant::JossNoMem => "joss-nomem",
            Variant::SteerLike => "steer",
            Variant::EraseLike => "erase",
        }
    }

    fn sets_cluster_freq(self) -> bool {
        !matches!(self, Variant::EraseLike)
    }

    fn sets_mem_freq(self) -> bool {
        matches!(self, Variant::Joss)
    }

    pub fn search_space(self, table: &KernelTable, hint: HintPolicy) -> (SearchSpace, SearchMode) {
        let max_fc = table.grid.n_fc() - 1;
        let max_fm = table.grid.n_fm() - 1;
        let base = SearchSpace { hint, ..SearchSpace::default() };
        match self {
            Variant::Joss => (base, SearchMode::Descent),
            Variant::JossNoMem => (SearchSpace { fixed_fm: Some(max_fm), ..base }, SearchMode::Descent),
            Variant::SteerLike => {
                (SearchSpace { objective: Objective::CpuOnly, fixed_fm: Some(max_fm), ..base }, SearchMode::Exhaustive)
            }
            Variant::EraseLike => (
                SearchSpace { objective: Objective::CpuOnly, fixed_fc: Some(max_fc), fixed_fm: Some(max_fm), ..base },
                SearchMode::Exhaustive,
            ),
        }
    }
}

/// Configuration for one kernel under a goal.
pub fn select_config(table: &KernelTable, goal: Goal, space: &SearchSpace, mode: SearchMode) -> Result<SearchResult> {
    match goal {
        Goal::MinEnergy => Ok(search::min_energy(table, space, mode)),
        Goal::Speedup(x) => search::constrained_min_energy(table, space, x, mode),
        Goal::MaxPerf => Ok(search::min_time(table, space)),
    }
}

/// Memoized per-kernel selection.
#[derive(Debug, Clone, Default)]
pub struct SelectionCache {
    entries: Vec<Option<SearchResult>>,
    pub evaluations: usize,
}

impl SelectionCache {
    pub fn get_or_select(
        &mut self,
        kernel: KernelId,
        table: &KernelTable,
        goal: Goal,
        space: &SearchSpace,
        mode: SearchMode,
    ) -> Result<&SearchResult> {
        let k = kernel.0 as usize;
        if self.entries.len() <= k {
            self.entries.resize(k + 1, None);
        }
        if self.entries[k].is_none() {
            let r = select_config(table, goal, space, mode)?;
            self.evaluations += r.stats.cells_evaluated;
            self.entries[k] = Some(r);
        }
        Ok(self.entries[k].as_ref().expect("filled"))
    }

    pub fn get(&self, kernel: KernelId) -> Option<&SearchResult> {
        self.entries.get(kernel.0 as usize).and_then(Option::as_ref)
    }
}

/// Mean of the requested and current value snapped to the ladder when the
/// domain is shared; the request itself otherwise. Equidistant snaps go
/// toward the request.
pub fn coordinate_frequency(ladder: &[f64], requested: f64, current: f64, concurrency: usize) -> f64 {
    if concurrency <= 1 {
        return requested;
    }
    let mean = 0.5 * (requested + current);
    let mut best = ladder[0];
    for &f in ladder {
        let d = (f - mean).abs();
        let db = (best - mean).abs();
        if d < db - 1e-9 || ((d - db).abs() <= 1e-9 && (f - requested).abs() < (best - requested).abs()) {
            best = f;
        }
    }
    best
}

fn ladder_index(ladder: &[f64], f: f64) -> usize {
    ladder.iter().position(|&x| (x - f).abs() < 1e-9).expect("ladder value")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Open,
    InFlight,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KernelState {
    Unseen,
    Sampling,
    Steady,
}

#[derive(Debug, Clone)]
struct KernelSampling {
    state: KernelState,
    /// `[option][stage]`.
    slots: Vec<[Slot; 2]>,
    times: Vec<[Option<f64>; 2]>,
    last: Option<(usize, usize)>,
    unreleased: usize,
}

/// Runtime sampling: every kernel is timed once per `<cluster, n_cores>`
/// option at each of the two sampling frequencies. Each cluster is held at
/// one sampling stage while that stage has work, then moves to the other.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub plan: SamplingPlan,
    kernels: Vec<KernelSampling>,
    option_cluster: Vec<ClusterId>,
    stage: Vec<usize>,
    active: Vec<bool>,
    pub phase_end: f64,
    pub sampled_executions: usize,
}

impl Sampler {
    pub fn new(sim: &Sim, plan: SamplingPlan) -> Self {
        let options = sim.platform.spec.options();
        let counts = sim.dag.kernel_counts();
        let n_cl = sim.platform.spec.clusters.len();
        Self {
            plan,
            kernels: counts
                .iter()
                .map(|&c| KernelSampling {
                    state: KernelState::Unseen,
                    slots: vec![[Slot::Open; 2]; options.len()],
                    times: vec![[None; 2]; options.len()],
                    last: None,
                    unreleased: c,
                })
                .collect(),
            option_cluster: options.iter().map(|o| o.cluster).collect(),
            stage: vec![0; n_cl],
            active: vec![false; n_cl],
            phase_end: 0.0,
            sampled_executions: 0,
        }
    }

    pub fn is_steady(&self, k: KernelId) -> bool {
        self.kernels[k.0 as usize].state == KernelState::Steady
    }

    pub fn any_sampling(&self) -> bool {
        self.kernels.iter().any(|k| k.state == KernelState::Sampling)
    }

    pub fn cluster_active(&self, c: ClusterId) -> bool {
        self.active[c.0]
    }

    fn stage_index(&self, sim: &Sim, stage: usize) -> usize {
        ladder_index(sim.platform.spec.core_ladder(), self.plan.stage_freq(stage))
    }

    fn mem_index(&self, sim: &Sim) -> usize {
        ladder_index(sim.platform.spec.mem_ladder(), self.plan.f_m)
    }

    /// Registers a ready instance; returns true if the kernel was new.
    fn note_release(&mut self, k: KernelId) -> bool {
        let ks = &mut self.kernels[k.0 as usize];
        ks.unreleased -= 1;
        if ks.state == KernelState::Unseen {
            ks.state = KernelState::Sampling;
            return true;
        }
        false
    }

    /// Reserves an open slot whose cluster is settled at that slot's stage.
    fn try_reserve(&mut self, sim: &Sim, k: KernelId) -> Option<(usize, usize)> {
        let mem_ok = !sim.has_pending(Domain::Memory) && sim.freq_index(Domain::Memory) == self.mem_index(sim);
        if !mem_ok || self.kernels[k.0 as usize].state != KernelState::Sampling {
            return None;
        }
        for o in 0..self.option_cluster.len() {
            let c = self.option_cluster[o];
            let s = self.stage[c.0];
            let d = Domain::Cluster(c);
            if self.kernels[k.0 as usize].slots[o][s] != Slot::Open {
                continue;
            }
            if sim.has_pending(d) || sim.freq_index(d) != self.stage_index(sim, s) {
                continue;
            }
            self.kernels[k.0 as usize].slots[o][s] = Slot::InFlight;
            return Some((o, s));
        }
        None
    }

    /// Records a sampled time; returns true once the kernel has all samples.
    fn record(&mut self, k: KernelId, option: usize, stage: usize, time: f64) -> bool {
        self.sampled_executions += 1;
        let ks = &mut self.kernels[k.0 as usize];
        ks.slots[option][stage] = Slot::Done;
        ks.times[option][stage] = Some(time);
        ks.last = Some((option, stage));
        ks.slots.iter().all(|s| s.iter().all(|x| *x == Slot::Done))
    }

    fn exhausted(&self, k: KernelId) -> bool {
        let ks = &self.kernels[k.0 as usize];
        ks.state == KernelState::Sampling
            && ks.unreleased == 0
            && !ks.slots.iter().any(|s| s.contains(&Slot::InFlight))
    }

    /// Profile from complete samples, or a best-effort one when instances
    /// ran out: single-stage options assume MB = 0.5 and options without
    /// samples reuse the last sample taken.
    fn profile(&self, sim: &Sim, k: KernelId) -> Result<(KernelProfile, bool)> {
        let ks = &self.kernels[k.0 as usize];
        let name = sim.dag.kernel_params(k).name.clone();
        let mut prof = KernelProfile::empty(name, ks.slots.len());
        let mut fallback = false;
        let r = self.plan.f_c / self.plan.f_c_prime;
        let last = ks.last.and_then(|(o, s)| ks.times[o][s].map(|t| (s, t)));
        for (o, t) in ks.times.iter().enumerate() {
            prof.samples[o] = match (t[0], t[1]) {
                (Some(a), Some(b)) => Some(OptionSample::new(a, b, &self.plan)?),
                (a, b) => {
                    fallback = true;
                    let (stage, t) = match (a, b) {
                        (Some(a), None) => (0, a),
                        (None, Some(b)) => (1, b),
                        _ => match last {
                            Some(v) => v,
                            None => return Err(Error::InsufficientData("no samples".into())),
                        },
                    };
                    let time = if stage == 0 { t } else { t / (0.5 * r + 0.5) };
                    Some(OptionSample { time, time_prime: time * (0.5 * r + 0.5), mb: 0.5 })
                }
            };
        }
        Ok((prof, fallback))
    }

    /// Moves clusters between stages and pins memory while sampling runs.
    fn update(&mut self, sim: &mut Sim) {
        let n_cl = self.stage.len();
        for c in 0..n_cl {
            let mut open = [0usize; 2];
            let mut inflight = [0usize; 2];
            for ks in self.kernels.iter().filter(|k| k.state == KernelState::Sampling) {
                for (o, slots) in ks.slots.iter().enumerate() {
                    if self.option_cluster[o].0 != c {
                        continue;
                    }
                    for s in 0..2 {
                        match slots[s] {
                            Slot::Open => open[s] += 1,
                            Slot::InFlight => inflight[s] += 1,
                            Slot::Done => {}
                        }
                    }
                }
            }
            let d = Domain::Cluster(ClusterId(c));
            if open.iter().chain(&inflight).all(|&x| x == 0) {
                if self.active[c] {
                    self.active[c] = false;
                    self.stage[c] = 0;
                    let top = self.stage_index(sim, 0);
                    sim.request_freq(d, top);
                }
                continue;
            }
            self.active[c] = true;
            let s = self.stage[c];
            if inflight[s] == 0 && open[s] == 0 && open[1 - s] > 0 {
                self.stage[c] = 1 - s;
            }
            let want = self.stage_index(sim, self.stage[c]);
            if sim.target_index(d) != want {
                sim.request_freq(d, want);
            }
        }
        if self.any_sampling() {
            let want = self.mem_index(sim);
            if sim.target_index(Domain::Memory) != want {
                sim.request_freq(Domain::Memory, want);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TaskPlan {
    None,
    Sample { option: usize, stage: usize },
    Unsampled,
    Steady,
    Grouped,
}

/// The table-driven scheduler.
pub struct JossPolicy {
    pub variant: Variant,
    pub params: SchedParams,
    models: ModelSet,
    sampler: Option<Sampler>,
    tables: Vec<Option<KernelTable>>,
    cache: SelectionCache,
    spaces: Vec<Option<(SearchSpace, SearchMode)>>,
    fine: Vec<bool>,
    plans: Vec<TaskPlan>,
    sampled_busy: f64,
    total_busy: f64,
    dvfs_decisions: usize,
    groups: usize,
    fallback: Vec<String>,
    oracle: bool,
}

impl JossPolicy {
    pub fn new(variant: Variant, params: SchedParams, models: ModelSet) -> Self {
        Self {
            variant,
            params,
            models,
            sampler: None,
            tables: Vec::new(),
            cache: SelectionCache::default(),
            spaces: Vec::new(),
            fine: Vec::new(),
            plans: Vec::new(),
            sampled_busy: 0.0,
            total_busy: 0.0,
            dvfs_decisions: 0,
            groups: 0,
            fallback: Vec::new(),
            oracle: false,
        }
    }

    /// Skips sampling and selects from the platform's exact tables; a
    /// reference for what perfect models would achieve.
    pub fn with_oracle_tables(mut self) -> Self {
        self.oracle = true;
        self
    }

    fn sampler(&mut self) -> &mut Sampler {
        self.sampler.as_mut().expect("initialised")
    }

    pub fn table(&self, k: KernelId) -> Option<&KernelTable> {
        self.tables.get(k.0 as usize).and_then(Option::as_ref)
    }

    pub fn selection(&self, k: KernelId) -> Option<&SearchResult> {
        self.cache.get(k)
    }

    /// Search space and mode the kernel's selection was made in.
    pub fn selection_space(&self, k: KernelId) -> Option<(SearchSpace, SearchMode)> {
        self.spaces.get(k.0 as usize).copied().flatten()
    }

    fn hint(&self, sim: &Sim) -> HintPolicy {
        match self.params.hint {
            HintMode::Solo => HintPolicy::Fixed(1.0),
            HintMode::Instantaneous => HintPolicy::Tasks(sim.tasks_in_system().max(1) as f64),
            HintMode::Dop => HintPolicy::Tasks(sim.dag.declared_dop.max(1.0)),
        }
    }

    fn selected(&mut self, sim: &Sim, k: KernelId) -> Option<Configuration> {
        if let Some(r) = self.cache.get(k) {
            return Some(r.config());
        }
        let table = self.tables.get(k.0 as usize)?.as_ref()?;
        let (space, mode) = self.variant.search_space(table, self.hint(sim));
        self.spaces[k.0 as usize] = Some((space, mode));
        let cfg = self
            .cache
            .get_or_select(k, table, self.params.goal, &space, mode)
            .expect("goal validated at construction")
            .config();
        let threshold = self
            .params
            .fine_grain_threshold_s
            .unwrap_or(10.0 * sim.platform.spec.cpu_dvfs_latency_s);
        let one_core = sim.platform.spec.option_index(cfg.cluster, 1).expect("single core option");
        let sampled = table.time[table.grid.index(crate::platform::GridPoint {
            option: one_core,
            fc: table.grid.n_fc() - 1,
            fm: table.grid.n_fm() - 1,
        })];
        self.fine[k.0 as usize] = sampled < threshold && self.params.min_group > 1;
        Some(cfg)
    }

    fn become_steady(&mut self, sim: &mut Sim, k: KernelId) {
        let (prof, fallback) = match self.sampler().profile(sim, k) {
            Ok(v) => v,
            Err(_) => {
                self.sampler().kernels[k.0 as usize].state = KernelState::Steady;
                return;
            }
        };
        if fallback {
            log::warn!("kernel {} ran out of instances before sampling finished; using fallback profile", prof.kernel);
            self.fallback.push(prof.kernel.clone());
        }
        self.tables[k.0 as usize] = build_tables(&prof, &self.models, &sim.platform.spec).ok();
        let now = sim.now();
        let s = self.sampler();
        s.kernels[k.0 as usize].state = KernelState::Steady;
        if !s.any_sampling() {
            s.phase_end = now;
        }
    }

    fn request(&mut self, sim: &mut Sim, cfg: &Configuration) {
        let sampler = self.sampler.as_ref().expect("initialised");
        let mut decided = false;
        if self.variant.sets_cluster_freq() && !sampler.cluster_active(cfg.cluster) {
            let d = Domain::Cluster(cfg.cluster);
            let ladder = sim.platform.spec.core_ladder();
            let cur = ladder[sim.target_index(d)];
            let f = coordinate_frequency(ladder, cfg.f_c, cur, sim.running_on(cfg.cluster) + 1);
            sim.request_freq(d, ladder_index(ladder, f));
            decided = true;
        }
        if self.variant.sets_mem_freq() && !sampler.any_sampling() {
            let ladder = sim.platform.spec.mem_ladder();
            let cur = ladder[sim.target_index(Domain::Memory)];
            let f = coordinate_frequency(ladder, cfg.f_m, cur, sim.running_tasks() + 1);
            sim.request_freq(Domain::Memory, ladder_index(ladder, f));
            decided = true;
        }
        if decided {
            self.dvfs_decisions += 1;
        }
    }

    /// Looks round-robin through the cluster's queues for same-kernel tasks.
    fn try_group(&mut self, sim: &Sim, task: TaskId, core: usize, cluster: ClusterId) -> bool {
        let kernel = sim.dag.kernel(task);
        let cores: Vec<usize> = sim.platform.spec.cores_of(cluster).collect();
        let queues: Vec<Vec<TaskId>> = cores
            .iter()
            .map(|&c| {
                sim.queued_tasks(c)
                    .filter(|&t| sim.dag.kernel(t) == kernel && self.plans[t.0 as usize] == TaskPlan::Steady)
                    .collect()
            })
            .collect();
        let need = self.params.min_group - 1;
        let start = cores.iter().position(|&c| c == core).unwrap_or(0);
        let mut found = Vec::with_capacity(need);
        let mut depth = 0;
        while found.len() < need {
            let mut any = false;
            for i in 0..cores.len() {
                let q = &queues[(start + i) % cores.len()];
                if let Some(&t) = q.get(depth) {
                    any = true;
                    if found.len() < need {
                        found.push(t);
                    }
                }
            }
            if !any {
                break;
            }
            depth += 1;
        }
        if found.len() < need {
            return false;
        }
        for t in found {
            self.plans[t.0 as usize] = TaskPlan::Grouped;
        }
        true
    }

    fn write_selections(&self, sim: &Sim, report: &mut RunReport) {
        for (ki, kp) in sim.dag.kernels.iter().enumerate() {
            let Some(r) = self.cache.get(KernelId(ki as u16)) else { continue };
            let c = r.config();
            report.selections.push(KernelSelection {
                kernel: kp.name.clone(),
                config: sim.platform.spec.describe(&c),
                cluster: sim.platform.spec.cluster(c.cluster).name.clone(),
                n_cores: c.n_cores,
                f_c: c.f_c,
                f_m: c.f_m,
                predicted_time_s: r.best.time,
                predicted_energy_j: r.best.energy,
                cells_evaluated: r.stats.cells_evaluated,
            });
        }
    }
}

impl Policy for JossPolicy {
    fn name(&self) -> String {
        if self.oracle {
            format!("{}-oracle", self.variant.label())
        } else {
            self.variant.label().into()
        }
    }

    fn init(&mut self, sim: &mut Sim) {
        self.sampler = Some(Sampler::new(sim, self.models.plan));
        self.tables = vec![None; sim.dag.kernels.len()];
        self.fine = vec![false; sim.dag.kernels.len()];
        self.spaces = vec![None; sim.dag.kernels.len()];
        self.plans = vec![TaskPlan::None; sim.dag.len()];
        if self.oracle {
            let s = self.sampler.as_mut().expect("initialised");
            for (k, kp) in sim.dag.kernels.iter().enumerate() {
                self.tables[k] = Some(KernelTable::from_oracle(sim.platform, kp));
                s.kernels[k].state = KernelState::Steady;
            }
        }
    }

    fn on_ready(&mut self, sim: &mut Sim, task: TaskId, _from: Option<usize>) {
        let k = sim.dag.kernel(task);
        if self.sampler().note_release(k) {
            self.sampler.as_mut().expect("initialised").update(sim);
        }
        if !self.sampler().is_steady(k) {
            if let Some((option, stage)) = self.sampler.as_mut().expect("initialised").try_reserve(sim, k) {
                let cluster = sim.grid.options[option].cluster;
                let core = sim.random_core_of(cluster);
                sim.push_task(core, task, Some(cluster));
                self.plans[task.0 as usize] = TaskPlan::Sample { option, stage };
                return;
            }
            let core = sim.random_core();
            let cluster = sim.core_cluster(core);
            sim.push_task(core, task, Some(cluster));
            self.plans[task.0 as usize] = TaskPlan::Unsampled;
            if self.sampler().exhausted(k) {
                self.become_steady(sim, k);
                self.sampler.as_mut().expect("initialised").update(sim);
            }
            return;
        }
        match self.selected(sim, k) {
            Some(cfg) => {
                let core = sim.random_core_of(cfg.cluster);
                sim.push_task(core, task, Some(cfg.cluster));
                self.plans[task.0 as usize] = TaskPlan::Steady;
            }
            None => {
                let core = sim.random_core();
                let cluster = sim.core_cluster(core);
                sim.push_task(core, task, Some(cluster));
                self.plans[task.0 as usize] = TaskPlan::Unsampled;
            }
        }
    }

    fn on_start(&mut self, sim: &mut Sim, task: TaskId, core: usize) -> usize {
        let k = sim.dag.kernel(task);
        match self.plans[task.0 as usize] {
            TaskPlan::Sample { option, .. } => sim.grid.options[option].n_cores,
            TaskPlan::Unsampled | TaskPlan::None => 1,
            TaskPlan::Grouped => self.cache.get(k).map_or(1, |r| r.config().n_cores),
            TaskPlan::Steady => {
                let cfg = self.cache.get(k).expect("steady tasks have a selection").config();
                if self.fine[k.0 as usize] {
                    if self.try_group(sim, task, core, cfg.cluster) {
                        self.groups += 1;
                        self.request(sim, &cfg);
                    }
                } else {
                    self.request(sim, &cfg);
                }
                cfg.n_cores
            }
        }
    }

    fn on_task_done(&mut self, sim: &mut Sim, done: &TaskDone) {
        let busy = done.busy_time * done.n_cores as f64;
        self.total_busy += busy;
        let k = done.kernel;
        if let TaskPlan::Sample { option, stage } = self.plans[done.task.0 as usize] {
            self.sampled_busy += busy;
            let complete = self.sampler().record(k, option, stage, done.busy_time);
            if complete || self.sampler().exhausted(k) {
                self.become_steady(sim, k);
            }
            self.sampler.as_mut().expect("initialised").update(sim);
        } else if self.sampler().exhausted(k) {
            self.become_steady(sim, k);
            self.sampler.as_mut().expect("initialised").update(sim);
        }
    }

    fn finish(&mut self, sim: &Sim, report: &mut RunReport) {
        self.write_selections(sim, report);
        let s = self.sampler.as_ref().expect("initialised");
        report.sampling_overhead = if self.total_busy > 0.0 { self.sampled_busy / self.total_busy } else { 0.0 };
        report.sampling_phase_end_s = s.phase_end;
        report.sampled_executions = s.sampled_executions;
        report.fallback_kernels = self.fallback.clone();
        report.search_cells_evaluated = self.cache.evaluations;
        report.dvfs_decisions = self.dvfs_decisions;
        report.coarsened_groups = self.groups;
    }
}
