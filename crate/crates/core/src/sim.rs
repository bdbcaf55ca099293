//! Discrete-event simulation of the platform running a task DAG under a
//! scheduling [`Policy`].
//!
//! Each core owns a deque (owner pops the back, thieves take the front).
//! A task started on `n` cores is split into `n` partitions; the one on the
//! starting core runs immediately and the rest are pushed to other cores of
//! the same cluster. Frequency changes take effect after the domain latency
//! and rescale the remaining work of every partition they touch. Power is
//! piecewise constant between events and integrated exactly.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dag::{KernelId, ReadyTracker, TaskDag, TaskId};
use crate::error::{Error, Result};
use crate::models::TableGrid;
use crate::platform::{ClusterId, Configuration, GridPoint, OracleCell, Platform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PartitionDone,
    FreqTransitionDone,
    SampleBoundary,
    Steal,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    kind: EventKind,
    id: u64,
    gen: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.cmp(&self.kind))
            .then(other.id.cmp(&self.id))
            .then(other.gen.cmp(&self.gen))
    }
}

/// A frequency domain: one per cluster, plus memory (last).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Cluster(ClusterId),
    Memory,
}

#[derive(Debug, Clone)]
struct DomainState {
    cur: usize,
    pending: Option<usize>,
    transitions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ItemKind {
    Task,
    Partition,
}

#[derive(Debug, Clone, Copy)]
struct Item {
    task: TaskId,
    kind: ItemKind,
    /// Cluster the item must run on; `None` lets any core take it.
    affinity: Option<ClusterId>,
}

#[derive(Debug, Clone, Copy)]
struct Part {
    task: TaskId,
    started: f64,
    seg_start: f64,
    /// Fraction of the partition's work left at `seg_start`.
    rem: f64,
    /// Duration of the whole partition at the current frequencies.
    seg_total: f64,
    end: f64,
    /// Work fraction executed in completed segments, measured from elapsed time.
    executed: f64,
}

#[derive(Debug, Clone)]
struct Core {
    cluster: ClusterId,
    deque: VecDeque<Item>,
    running: Option<Part>,
    gen: u64,
}

#[derive(Debug, Clone)]
struct RunningTask {
    option: usize,
    cluster: ClusterId,
    n: usize,
    noise: f64,
    parts_left: usize,
    parts_unstarted: usize,
    max_busy: f64,
    work_done: f64,
}

/// Completion details handed to [`Policy::on_task_done`].
#[derive(Debug, Clone, Copy)]
pub struct TaskDone {
    pub task: TaskId,
    pub kernel: KernelId,
    pub cluster: ClusterId,
    pub n_cores: usize,
    /// Longest busy interval over the task's partitions.
    pub busy_time: f64,
    pub core: usize,
}

/// Per-task start/end as observed by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub start: f64,
    pub end: f64,
    pub cluster: usize,
    pub n_cores: usize,
    pub starts: u32,
}

/// Scheduler callbacks. All run on the event loop.
pub trait Policy {
    fn name(&self) -> String;

    fn init(&mut self, _sim: &mut Sim) {}

    /// `task` became ready; it must be pushed to some core. `from_core` is
    /// the core that completed its last predecessor.
    fn on_ready(&mut self, sim: &mut Sim, task: TaskId, from_core: Option<usize>);

    /// A core is about to run `task`; returns the number of cores to use.
    fn on_start(&mut self, sim: &mut Sim, task: TaskId, core: usize) -> usize;

    fn on_task_done(&mut self, _sim: &mut Sim, _done: &TaskDone) {}

    fn on_tick(&mut self, _sim: &mut Sim, _tick: u64) {}

    fn on_steal(&mut self, _sim: &mut Sim, _thief: usize, _victim: usize) {}

    fn finish(&mut self, _sim: &Sim, _report: &mut RunReport) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub seed: u64,
    pub trace: bool,
    /// Also integrate power with the platform's sensor period.
    pub sampled_meter: bool,
}

impl SimOptions {
    pub fn seeded(seed: u64) -> Self {
        Self { seed, trace: false, sampled_meter: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelSelection {
    pub kernel: String,
    pub config: String,
    pub cluster: String,
    pub n_cores: usize,
    pub f_c: f64,
    pub f_m: f64,
    pub predicted_time_s: f64,
    pub predicted_energy_j: f64,
    pub cells_evaluated: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheduler: String,
    pub tasks: usize,
    pub makespan_s: f64,
    pub cpu_energy_j: f64,
    pub mem_energy_j: f64,
    pub total_energy_j: f64,
    pub cpu_dynamic_j: f64,
    pub cpu_idle_j: f64,
    pub mem_dynamic_j: f64,
    pub mem_idle_j: f64,
    pub attributed_j: f64,
    pub unattributed_idle_j: f64,
    pub sampled_meter_j: Option<f64>,
    pub cluster_transitions: usize,
    pub mem_transitions: usize,
    pub steals: usize,
    pub selections: Vec<KernelSelection>,
    /// Share of core-busy time spent on sampled executions.
    pub sampling_overhead: f64,
    /// When the last kernel left the sampling phase.
    pub sampling_phase_end_s: f64,
    pub sampled_executions: usize,
    pub fallback_kernels: Vec<String>,
    pub search_cells_evaluated: usize,
    pub dvfs_decisions: usize,
    pub coarsened_groups: usize,
}

/// Everything a run produces besides the report.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub records: Vec<TaskRecord>,
    pub task_energy_j: Vec<f64>,
    /// Executed fraction of each task's work (1 when complete).
    pub work_fraction: Vec<f64>,
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Default)]
struct Meter {
    cpu_dyn: f64,
    cpu_idle: f64,
    mem_dyn: f64,
    mem_idle: f64,
    unattributed: f64,
    sampled: f64,
    next_sample: f64,
}

/// Simulation state visible to policies.
pub struct Sim<'a> {
    pub platform: &'a Platform,
    pub dag: &'a TaskDag,
    pub grid: TableGrid,
    pub rng: ChaCha8Rng,
    now: f64,
    events: BinaryHeap<Event>,
    cores: Vec<Core>,
    domains: Vec<DomainState>,
    cells: Vec<Vec<OracleCell>>,
    running: Vec<Option<RunningTask>>,
    tracker: ReadyTracker,
    records: Vec<TaskRecord>,
    task_energy: Vec<f64>,
    work_fraction: Vec<f64>,
    meter: Meter,
    sampled_meter: bool,
    trace: Option<String>,
    done: usize,
    in_system: usize,
    running_per_cluster: Vec<usize>,
    steals: usize,
}

impl<'a> Sim<'a> {
    fn new(platform: &'a Platform, dag: &'a TaskDag, opts: &SimOptions) -> Self {
        let spec = &platform.spec;
        let grid = TableGrid::from_spec(spec);
        let cells = dag
            .kernels
            .iter()
            .map(|k| grid.points().map(|gp| platform.evaluate_point(k, gp)).collect())
            .collect();
        let cores = spec
            .clusters
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| {
                (0..c.core_count).map(move |_| Core {
                    cluster: ClusterId(ci),
                    deque: VecDeque::new(),
                    running: None,
                    gen: 0,
                })
            })
            .collect();
        let mut domains: Vec<DomainState> = spec
            .clusters
            .iter()
            .map(|c| DomainState { cur: c.core_freqs_ghz.len() - 1, pending: None, transitions: 0 })
            .collect();
        domains.push(DomainState { cur: spec.mem_freqs_ghz.len() - 1, pending: None, transitions: 0 });
        let n = dag.len();
        Self {
            platform,
            dag,
            grid,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            now: 0.0,
            events: BinaryHeap::new(),
            cores,
            domains,
            cells,
            running: vec![None; n],
            tracker: ReadyTracker::new(dag),
            records: vec![TaskRecord { start: f64::NAN, end: f64::NAN, cluster: 0, n_cores: 0, starts: 0 }; n],
            task_energy: vec![0.0; n],
            work_fraction: vec![0.0; n],
            meter: Meter { next_sample: 0.0, ..Meter::default() },
            sampled_meter: opts.sampled_meter,
            trace: opts.trace.then(String::new),
            done: 0,
            in_system: 0,
            running_per_cluster: vec![0; spec.clusters.len()],
            steals: 0,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn n_cores(&self) -> usize {
        self.cores.len()
    }

    pub fn core_cluster(&self, core: usize) -> ClusterId {
        self.cores[core].cluster
    }

    pub fn queue_len(&self, core: usize) -> usize {
        self.cores[core].deque.len()
    }

    /// Whole tasks (not partitions) waiting in a core's deque, front to back.
    pub fn queued_tasks(&self, core: usize) -> impl Iterator<Item = TaskId> + '_ {
        self.cores[core].deque.iter().filter(|it| it.kind == ItemKind::Task).map(|it| it.task)
    }

    pub fn core_busy(&self, core: usize) -> bool {
        self.cores[core].running.is_some()
    }

    /// Ready (queued) plus running tasks.
    pub fn tasks_in_system(&self) -> usize {
        self.in_system
    }

    pub fn running_tasks(&self) -> usize {
        self.running_per_cluster.iter().sum()
    }

    pub fn running_on(&self, cluster: ClusterId) -> usize {
        self.running_per_cluster[cluster.0]
    }

    /// Running task count and per-task core usage.
    pub fn concurrency(&self) -> (usize, Vec<(TaskId, usize)>) {
        let mut usage: Vec<(TaskId, usize)> = Vec::new();
        for c in &self.cores {
            if let Some(p) = &c.running {
                match usage.iter_mut().find(|(t, _)| *t == p.task) {
                    Some(u) => u.1 += 1,
                    None => usage.push((p.task, 1)),
                }
            }
        }
        (self.running_tasks(), usage)
    }

    pub fn tasks_done(&self) -> usize {
        self.done
    }

    pub fn remaining_tasks(&self) -> usize {
        self.dag.len() - self.done
    }

    fn domain_index(&self, d: Domain) -> usize {
        match d {
            Domain::Cluster(c) => c.0,
            Domain::Memory => self.domains.len() - 1,
        }
    }

    fn ladder(&self, d: Domain) -> &[f64] {
        match d {
            Domain::Cluster(c) => &self.platform.spec.cluster(c).core_freqs_ghz,
            Domain::Memory => &self.platform.spec.mem_freqs_ghz,
        }
    }

    /// Effective ladder index.
    pub fn freq_index(&self, d: Domain) -> usize {
        self.domains[self.domain_index(d)].cur
    }

    /// Where the domain is heading: the pending target, else the current value.
    pub fn target_index(&self, d: Domain) -> usize {
        let s = &self.domains[self.domain_index(d)];
        s.pending.unwrap_or(s.cur)
    }

    pub fn freq(&self, d: Domain) -> f64 {
        self.ladder(d)[self.freq_index(d)]
    }

    pub fn has_pending(&self, d: Domain) -> bool {
        self.domains[self.domain_index(d)].pending.is_some()
    }

    /// Requests a ladder index. Returns true if a new transition was scheduled.
    pub fn request_freq(&mut self, d: Domain, target: usize) -> bool {
        let latency = match d {
            Domain::Cluster(_) => self.platform.spec.cpu_dvfs_latency_s,
            Domain::Memory => self.platform.spec.mem_dvfs_latency_s,
        };
        let di = self.domain_index(d);
        let now = self.now;
        let s = &mut self.domains[di];
        match s.pending {
            Some(_) => {
                s.pending = Some(target);
                false
            }
            None if s.cur == target => false,
            None => {
                s.pending = Some(target);
                self.events.push(Event { time: now + latency, kind: EventKind::FreqTransitionDone, id: di as u64, gen: 0 });
                true
            }
        }
    }

    pub fn schedule_tick(&mut self, at: f64, id: u64) {
        self.events.push(Event { time: at, kind: EventKind::SampleBoundary, id, gen: 0 });
    }

    /// Pushes a ready task onto a core's deque.
    pub fn push_task(&mut self, core: usize, task: TaskId, affinity: Option<ClusterId>) {
        self.cores[core].deque.push_back(Item { task, kind: ItemKind::Task, affinity });
    }

    pub fn random_core(&mut self) -> usize {
        self.rng.random_range(0..self.cores.len())
    }

    pub fn random_core_of(&mut self, cluster: ClusterId) -> usize {
        let r = self.platform.spec.cores_of(cluster);
        self.rng.random_range(r)
    }

    pub fn oracle_cell(&self, kernel: KernelId, gp: GridPoint) -> &OracleCell {
        &self.cells[kernel.0 as usize][self.grid.index(gp)]
    }

    fn current_point(&self, option: usize, cluster: ClusterId) -> GridPoint {
        GridPoint {
            option,
            fc: self.domains[cluster.0].cur,
            fm: self.domains[self.domains.len() - 1].cur,
        }
    }

    fn part_duration(&self, task: TaskId, rt: &RunningTask) -> f64 {
        let gp = self.current_point(rt.option, rt.cluster);
        self.oracle_cell(self.dag.kernel(task), gp).time * rt.noise
    }

    /// Per-partition (cpu, mem) dynamic watts at the current frequencies.
    fn part_power(&self, task: TaskId, rt: &RunningTask) -> (f64, f64) {
        let gp = self.current_point(rt.option, rt.cluster);
        let k = self.dag.kernel(task);
        let cell = self.oracle_cell(k, gp);
        let n = rt.n as f64;
        let mem = if rt.noise == 1.0 {
            cell.mem_w
        } else {
            let m = &self.platform.truth.memory;
            let t = cell.time * rt.noise;
            let traffic = if t > 0.0 { self.dag.kernel_params(k).bytes / t } else { 0.0 };
            m.delta0 * self.grid.mem_ladder[gp.fm] + m.delta1 * traffic
        };
        (cell.cpu_w / n, mem / n)
    }

    fn log(&mut self, kind: &str, core: Option<usize>, cluster: Option<usize>, task: Option<TaskId>) {
        if self.trace.is_none() {
            return;
        }
        let (fc, fm) = match cluster {
            Some(c) => (format!("{:.2}", self.freq(Domain::Cluster(ClusterId(c)))), format!("{:.2}", self.freq(Domain::Memory))),
            None => ("-".into(), format!("{:.2}", self.freq(Domain::Memory))),
        };
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let line = format!(
            "{:.9} {} {} {} {} {} {}",
            self.now,
            kind,
            opt(core.map(|c| c.to_string())),
            opt(cluster.map(|c| self.platform.spec.clusters[c].name.clone())),
            fc,
            fm,
            opt(task.map(|t| t.0.to_string())),
        );
        let out = self.trace.as_mut().expect("checked");
        out.push_str(&line);
        out.push('\n');
    }

    fn integrate(&mut self, until: f64) {
        let dt = until - self.now;
        if dt <= 0.0 {
            return;
        }
        let spec = &self.platform.spec;
        let mut total_power = 0.0;
        let mut running_tasks: [Option<TaskId>; 64] = [None; 64];
        let mut n_running = 0;
        let mut cluster_parts = vec![0usize; spec.clusters.len()];
        let mut cluster_awake = vec![false; spec.clusters.len()];
        for core in &self.cores {
            if core.running.is_some() || !core.deque.is_empty() {
                cluster_awake[core.cluster.0] = true;
            }
            if let Some(p) = &core.running {
                let rt = self.running[p.task.0 as usize].as_ref().expect("running task");
                let (c, m) = self.part_power(p.task, rt);
                self.meter.cpu_dyn += c * dt;
                self.meter.mem_dyn += m * dt;
                self.task_energy[p.task.0 as usize] += (c + m) * dt;
                total_power += c + m;
                cluster_parts[core.cluster.0] += 1;
                if !running_tasks[..n_running].contains(&Some(p.task)) && n_running < running_tasks.len() {
                    running_tasks[n_running] = Some(p.task);
                    n_running += 1;
                }
            }
        }
        for (ci, awake) in cluster_awake.iter().enumerate() {
            if !awake {
                continue;
            }
            let cid = ClusterId(ci);
            let w = self.platform.cluster_idle_power(cid, self.freq(Domain::Cluster(cid)));
            total_power += w;
            let e = w * dt;
            self.meter.cpu_idle += e;
            if cluster_parts[ci] == 0 {
                self.meter.unattributed += e;
                continue;
            }
            let share = e / cluster_parts[ci] as f64;
            for core in spec.cores_of(cid) {
                if let Some(p) = &self.cores[core].running {
                    self.task_energy[p.task.0 as usize] += share;
                }
            }
        }
        let mw = self.platform.mem_idle_power(self.freq(Domain::Memory));
        total_power += mw;
        let e = mw * dt;
        self.meter.mem_idle += e;
        if n_running == 0 {
            self.meter.unattributed += e;
        } else {
            let share = e / n_running as f64;
            for t in running_tasks[..n_running].iter().flatten() {
                self.task_energy[t.0 as usize] += share;
            }
        }
        if self.sampled_meter {
            let period = spec.power_sample_period_s;
            while self.meter.next_sample < until {
                self.meter.sampled += total_power * period;
                self.meter.next_sample += period;
            }
        }
    }

    fn schedule_part_done(&mut self, core: usize) {
        let c = &mut self.cores[core];
        c.gen += 1;
        let end = c.running.as_ref().expect("running").end;
        self.events.push(Event { time: end, kind: EventKind::PartitionDone, id: core as u64, gen: c.gen });
    }

    fn start_part(&mut self, core: usize, task: TaskId) {
        let rt = self.running[task.0 as usize].as_mut().expect("task started");
        rt.parts_unstarted -= 1;
        let rt = self.running[task.0 as usize].as_ref().expect("task started");
        let dur = self.part_duration(task, rt);
        let now = self.now;
        self.cores[core].running = Some(Part { task, started: now, seg_start: now, rem: 1.0, seg_total: dur, end: now + dur, executed: 0.0 });
        self.schedule_part_done(core);
        let cluster = self.cores[core].cluster.0;
        self.log("part_start", Some(core), Some(cluster), Some(task));
    }

    fn start_task(&mut self, policy: &mut dyn Policy, core: usize, task: TaskId) -> Result<()> {
        let n = policy.on_start(self, task, core);
        let cluster = self.cores[core].cluster;
        let option = self.platform.spec.option_index(cluster, n).ok_or_else(|| {
            Error::Simulation(format!("policy chose {n} cores on cluster {}", cluster.0))
        })?;
        let noise = self.platform.noise_factor(&mut self.rng);
        self.running[task.0 as usize] = Some(RunningTask {
            option,
            cluster,
            n,
            noise,
            parts_left: n,
            parts_unstarted: n,
            max_busy: 0.0,
            work_done: 0.0,
        });
        self.running_per_cluster[cluster.0] += 1;
        let rec = &mut self.records[task.0 as usize];
        rec.start = self.now;
        rec.cluster = cluster.0;
        rec.n_cores = n;
        rec.starts += 1;
        self.log("start", Some(core), Some(cluster.0), Some(task));
        self.start_part(core, task);
        // Spread the remaining partitions over the other cores of the cluster,
        // idle ones first, then the shortest queues.
        let mut others: Vec<usize> = self.platform.spec.cores_of(cluster).filter(|&c| c != core).collect();
        others.sort_by_key(|&c| (self.cores[c].running.is_some(), self.cores[c].deque.len(), c));
        for &c in others.iter().take(n - 1) {
            self.cores[c].deque.push_back(Item { task, kind: ItemKind::Partition, affinity: Some(cluster) });
        }
        Ok(())
    }

    fn steal_for(&mut self, thief: usize) -> Option<(usize, Item)> {
        let cl = self.cores[thief].cluster;
        let candidates: Vec<usize> = (0..self.cores.len())
            .filter(|&v| v != thief)
            .filter(|&v| {
                self.cores[v].deque.front().is_some_and(|it| it.affinity.is_none_or(|a| a == cl))
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let victim = candidates[self.rng.random_range(0..candidates.len())];
        let item = self.cores[victim].deque.pop_front().expect("non-empty");
        Some((victim, item))
    }

    fn dispatch(&mut self, policy: &mut dyn Policy) -> Result<()> {
        loop {
            // Owners drain their own deques before anyone steals.
            let mut progressed = false;
            for core in 0..self.cores.len() {
                if self.cores[core].running.is_some() {
                    continue;
                }
                if let Some(it) = self.cores[core].deque.pop_back() {
                    progressed = true;
                    self.start_item(policy, core, it)?;
                }
            }
            if progressed {
                continue;
            }
            for core in 0..self.cores.len() {
                if self.cores[core].running.is_some() {
                    continue;
                }
                if let Some((victim, it)) = self.steal_for(core) {
                    progressed = true;
                    self.steals += 1;
                    let cl = self.cores[core].cluster.0;
                    self.log("steal", Some(core), Some(cl), Some(it.task));
                    policy.on_steal(self, core, victim);
                    self.start_item(policy, core, it)?;
                }
            }
            if !progressed {
                return Ok(());
            }
        }
    }

    fn start_item(&mut self, policy: &mut dyn Policy, core: usize, it: Item) -> Result<()> {
        match it.kind {
            ItemKind::Task => self.start_task(policy, core, it.task)?,
            ItemKind::Partition => self.start_part(core, it.task),
        }
        Ok(())
    }

    fn ready(&mut self, policy: &mut dyn Policy, task: TaskId, from: Option<usize>) {
        self.in_system += 1;
        policy.on_ready(self, task, from);
    }

    fn on_part_done(&mut self, policy: &mut dyn Policy, core: usize) {
        let part = self.cores[core].running.take().expect("running partition");
        let task = part.task;
        let busy = self.now - part.started;
        let cluster = self.cores[core].cluster.0;
        self.log("part_done", Some(core), Some(cluster), Some(task));
        let rt = self.running[task.0 as usize].as_mut().expect("running task");
        rt.parts_left -= 1;
        rt.max_busy = rt.max_busy.max(busy);
        // The completion event ends the last segment with exactly its remaining work.
        rt.work_done += (part.executed + part.rem) / rt.n as f64;
        if rt.parts_left > 0 {
            return;
        }
        let rt = self.running[task.0 as usize].take().expect("running task");
        self.work_fraction[task.0 as usize] = rt.work_done;
        self.running_per_cluster[rt.cluster.0] -= 1;
        self.in_system -= 1;
        self.done += 1;
        self.records[task.0 as usize].end = self.now;
        self.log("task_done", Some(core), Some(cluster), Some(task));
        let done = TaskDone {
            task,
            kernel: self.dag.kernel(task),
            cluster: rt.cluster,
            n_cores: rt.n,
            busy_time: rt.max_busy,
            core,
        };
        policy.on_task_done(self, &done);
        for s in self.tracker.complete(task) {
            self.ready(policy, s, Some(core));
        }
    }

    fn on_freq_done(&mut self, di: usize) {
        let target = self.domains[di].pending.take().expect("pending transition");
        if target == self.domains[di].cur {
            return;
        }
        self.domains[di].cur = target;
        self.domains[di].transitions += 1;
        let is_mem = di == self.domains.len() - 1;
        let now = self.now;
        for core in 0..self.cores.len() {
            if !is_mem && self.cores[core].cluster.0 != di {
                continue;
            }
            let Some(p) = self.cores[core].running else { continue };
            let rt = self.running[p.task.0 as usize].as_ref().expect("running task");
            let new_total = self.part_duration(p.task, rt);
            let (rem, end) = rescale_inflight(p.rem, p.seg_start, p.seg_total, now, new_total);
            let executed = p.executed + segment_fraction(p.seg_start, p.seg_total, now, p.rem);
            self.cores[core].running = Some(Part { rem, seg_start: now, seg_total: new_total, end, executed, ..p });
            self.schedule_part_done(core);
        }
        let cl = if is_mem { None } else { Some(di) };
        self.log(if is_mem { "mem_freq" } else { "cluster_freq" }, None, cl, None);
    }
}

fn segment_fraction(seg_start: f64, seg_total: f64, now: f64, rem: f64) -> f64 {
    if seg_total > 0.0 {
        (now - seg_start) / seg_total
    } else {
        rem
    }
}

/// Remaining work fraction after running `now - seg_start` of a segment
/// whose full duration is `seg_total`, and the completion time at a new
/// full duration.
pub fn rescale_inflight(rem: f64, seg_start: f64, seg_total: f64, now: f64, new_total: f64) -> (f64, f64) {
    let done = if seg_total > 0.0 { (now - seg_start) / seg_total } else { rem };
    let left = (rem - done).max(0.0);
    (left, now + left * new_total)
}

/// Runs `dag` to completion under `policy`.
pub fn run(dag: &TaskDag, policy: &mut dyn Policy, platform: &Platform, opts: &SimOptions) -> Result<RunOutcome> {
    platform.validate()?;
    dag.validate()?;
    let mut sim = Sim::new(platform, dag, opts);
    policy.init(&mut sim);
    for root in sim.tracker.roots() {
        sim.ready(policy, root, None);
    }
    sim.dispatch(policy)?;
    while sim.done < dag.len() {
        let Some(ev) = sim.events.pop() else {
            return Err(Error::Simulation(format!(
                "deadlock: {} of {} tasks finished and no events remain",
                sim.done,
                dag.len()
            )));
        };
        let stale = match ev.kind {
            EventKind::PartitionDone => {
                let c = &sim.cores[ev.id as usize];
                c.gen != ev.gen || c.running.is_none()
            }
            _ => false,
        };
        if stale {
            continue;
        }
        sim.integrate(ev.time);
        sim.now = sim.now.max(ev.time);
        match ev.kind {
            EventKind::PartitionDone => sim.on_part_done(policy, ev.id as usize),
            EventKind::FreqTransitionDone => sim.on_freq_done(ev.id as usize),
            EventKind::SampleBoundary => {
                sim.log("tick", None, None, None);
                policy.on_tick(&mut sim, ev.id)
            }
            EventKind::Steal => {}
        }
        sim.dispatch(policy)?;
    }
    let m = &sim.meter;
    let n_cl = sim.platform.spec.clusters.len();
    let mut report = RunReport {
        scheduler: policy.name(),
        tasks: dag.len(),
        makespan_s: sim.now,
        cpu_energy_j: m.cpu_dyn + m.cpu_idle,
        mem_energy_j: m.mem_dyn + m.mem_idle,
        total_energy_j: m.cpu_dyn + m.cpu_idle + m.mem_dyn + m.mem_idle,
        cpu_dynamic_j: m.cpu_dyn,
        cpu_idle_j: m.cpu_idle,
        mem_dynamic_j: m.mem_dyn,
        mem_idle_j: m.mem_idle,
        attributed_j: sim.task_energy.iter().sum(),
        unattributed_idle_j: m.unattributed,
        sampled_meter_j: sim.sampled_meter.then_some(m.sampled),
        cluster_transitions: sim.domains[..n_cl].iter().map(|d| d.transitions).sum(),
        mem_transitions: sim.domains[n_cl].transitions,
        steals: sim.steals,
        ..RunReport::default()
    };
    policy.finish(&sim, &mut report);
    Ok(RunOutcome {
        report,
        records: sim.records,
        task_energy_j: sim.task_energy,
        work_fraction: sim.work_fraction,
        trace: sim.trace,
    })
}

/// Checks exactly-once execution and dependency order from task records.
pub fn verify_schedule(dag: &TaskDag, records: &[TaskRecord]) -> Result<()> {
    if records.len() != dag.len() {
        return Err(Error::Simulation("record count differs from task count".into()));
    }
    for (t, r) in dag.tasks.iter().zip(records) {
        if r.starts != 1 {
            return Err(Error::Simulation(format!("task {} started {} times", t.id.0, r.starts)));
        }
        if !(r.end >= r.start) {
            return Err(Error::Simulation(format!("task {} has no completion", t.id.0)));
        }
        for p in &t.preds {
            let pe = records[p.0 as usize].end;
            if r.start < pe {
                return Err(Error::Simulation(format!(
                    "task {} started at {} before predecessor {} ended at {}",
                    t.id.0, r.start, p.0, pe
                )));
            }
        }
    }
    Ok(())
}

/// Rebuilds per-task start/end times from a trace and runs [`verify_schedule`].
pub fn verify_trace(dag: &TaskDag, trace: &str) -> Result<()> {
    let mut recs = vec![TaskRecord { start: f64::NAN, end: f64::NAN, cluster: 0, n_cores: 0, starts: 0 }; dag.len()];
    for line in trace.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 || f[6] == "-" {
            continue;
        }
        let t: f64 = f[0].parse().map_err(|_| Error::Parse(format!("bad time in `{line}`")))?;
        let id: usize = f[6].parse().map_err(|_| Error::Parse(format!("bad task in `{line}`")))?;
        let r = recs.get_mut(id).ok_or_else(|| Error::Parse(format!("unknown task {id}")))?;
        match f[1] {
            "start" => {
                r.start = t;
                r.starts += 1;
            }
            "task_done" => r.end = t,
            _ => {}
        }
    }
    // Times are printed with 1 ns resolution.
    for (task, r) in dag.tasks.iter().zip(&recs) {
        for p in &task.preds {
            if r.start + 1e-9 < recs[p.0 as usize].end {
                return Err(Error::Simulation(format!("task {} starts before predecessor {}", task.id.0, p.0)));
            }
        }
    }
    for (t, r) in dag.tasks.iter().zip(&recs) {
        if r.starts != 1 || !(r.end >= r.start) {
            return Err(Error::Simulation(format!("task {} executed {} times", t.id.0, r.starts)));
        }
    }
    Ok(())
}

/// A fixed configuration for every task; useful as a reference policy.
#[derive(Debug, Clone)]
pub struct FixedConfigPolicy {
    pub cfg: Configuration,
    /// Lock tasks to the configured cluster.
    pub pinned: bool,
}

impl Policy for FixedConfigPolicy {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn init(&mut self, sim: &mut Sim) {
        let spec = &sim.platform.spec;
        let fc = spec.fc_index(self.cfg.f_c).expect("valid config");
        let fm = spec.fm_index(self.cfg.f_m).expect("valid config");
        for c in 0..spec.clusters.len() {
            sim.domains[c].cur = fc;
        }
        let last = sim.domains.len() - 1;
        sim.domains[last].cur = fm;
    }

    fn on_ready(&mut self, sim: &mut Sim, task: TaskId, _from: Option<usize>) {
        let core = sim.random_core_of(self.cfg.cluster);
        sim.push_task(core, task, self.pinned.then_some(self.cfg.cluster));
    }

    fn on_start(&mut self, _sim: &mut Sim, _task: TaskId, _core: usize) -> usize {
        self.cfg.n_cores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::{gen_chain, gen_forkjoin, ForkJoinLayer, TaskNode};
    use crate::platform::{default_tx2, KernelParams};

    fn compute(ops: f64) -> KernelParams {
        KernelParams { name: "c".into(), ops, bytes: 0.0, kappa: 0.5, mu: 0.0 }
    }

    fn max_cfg(cluster: usize, n: usize) -> Configuration {
        Configuration { cluster: ClusterId(cluster), n_cores: n, f_c: 2.04, f_m: 1.87 }
    }

    #[test]
    fn empty_dag_costs_nothing() {
        let p = default_tx2();
        let dag = TaskDag::new(vec![compute(1.0)], vec![]).unwrap();
        let mut pol = FixedConfigPolicy { cfg: max_cfg(0, 1), pinned: true };
        let out = run(&dag, &mut pol, &p, &SimOptions::seeded(1)).unwrap();
        assert_eq!(out.report.makespan_s, 0.0);
        assert_eq!(out.report.total_energy_j, 0.0);
    }

    #[test]
    fn single_task_matches_closed_form() {
        let p = default_tx2();
        let k = compute(2.04);
        let dag = gen_chain(&k, 1, 1).unwrap();
        let cfg = max_cfg(1, 1);
        let mut pol = FixedConfigPolicy { cfg, pinned: true };
        let out = run(&dag, &mut pol, &p, &SimOptions::seeded(1)).unwrap();
        let t = p.ground_truth_time(&k, &cfg).unwrap();
        assert!((out.report.makespan_s - t).abs() < 1e-12);
        assert!((t - 1.0).abs() < 1e-12);
        let w = p.ground_truth_cpu_power(&cfg, 0.0).unwrap();
        assert!((out.report.cpu_dynamic_j - w * t).abs() < 1e-12);
        let idle = p.cluster_idle_power(ClusterId(1), 2.04) + p.mem_idle_power(1.87);
        assert!((out.report.cpu_idle_j + out.report.mem_idle_j - idle * t).abs() < 1e-12);
    }

    #[test]
    fn two_partitions_halve_compute_time() {
        let mut p = default_tx2();
        p.truth.clusters[1].eff = vec![1.0, 1.0, 1.0];
        let k = compute(2.04);
        let dag = gen_chain(&k, 1, 1).unwrap();
        let mut pol = FixedConfigPolicy { cfg: max_cfg(1, 2), pinned: true };
        let out = run(&dag, &mut pol, &p, &SimOptions::seeded(3)).unwrap();
        assert!((out.report.makespan_s - 0.5).abs() < 1e-12);
        assert!((out.work_fraction[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn successors_start_after_last_partition() {
        let p = default_tx2();
        let layers = vec![
            ForkJoinLayer { kernel: compute(0.5), width: 3 },
            ForkJoinLayer { kernel: compute(0.5), width: 3 },
        ];
        let dag = gen_forkjoin(&layers, None).unwrap();
        let mut pol = FixedConfigPolicy { cfg: max_cfg(1, 2), pinned: true };
        let out = run(&dag, &mut pol, &p, &SimOptions { seed: 2, trace: true, sampled_meter: false }).unwrap();
        verify_schedule(&dag, &out.records).unwrap();
        verify_trace(&dag, out.trace.as_deref().unwrap()).unwrap();
        let first_end = out.records[..3].iter().map(|r| r.end).fold(0.0, f64::max);
        assert!(out.records[3..].iter().all(|r| r.start >= first_end));
    }

    #[test]
    fn runs_are_deterministic() {
        let p = default_tx2();
        let dag = gen_chain(&compute(0.3), 40, 4).unwrap();
        let go = || {
            let mut pol = FixedConfigPolicy { cfg: max_cfg(1, 1), pinned: false };
            run(&dag, &mut pol, &p, &SimOptions::seeded(9)).unwrap().report
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn freq_requests_coalesce_and_respect_latency() {
        let p = default_tx2();
        let dag = TaskDag::new(vec![compute(1.0)], vec![TaskNode { id: TaskId(0), kernel: KernelId(0), preds: vec![] }]).unwrap();
        let mut sim = Sim::new(&p, &dag, &SimOptions::seeded(0));
        let d = Domain::Cluster(ClusterId(0));
        assert!(!sim.request_freq(d, 9));
        assert!(sim.events.is_empty());
        sim.now = 1.0;
        assert!(sim.request_freq(d, 3));
        assert!(!sim.request_freq(d, 5));
        let ev = sim.events.pop().unwrap();
        assert!((ev.time - 1.00005).abs() < 1e-12);
        sim.now = ev.time;
        sim.on_freq_done(ev.id as usize);
        assert_eq!(sim.freq_index(d), 5);
        assert!(sim.events.is_empty());
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale_inflight(1.0, 0.0, 2.0, 1.0, 2.0), (0.5, 2.0));
        // pure compute at 50% with f_c halved: remaining time doubles
        let (rem, end) = rescale_inflight(1.0, 0.0, 2.0, 1.0, 4.0);
        assert_eq!(rem, 0.5);
        assert_eq!(end - 1.0, 2.0);
    }

    #[test]
    fn mid_task_transition_conserves_work_and_energy() {
        struct Switcher;
        impl Policy for Switcher {
            fn name(&self) -> String {
                "switch".into()
            }
            fn init(&mut self, sim: &mut Sim) {
                sim.schedule_tick(0.3, 0);
                sim.schedule_tick(0.6, 1);
            }
            fn on_ready(&mut self, sim: &mut Sim, task: TaskId, _from: Option<usize>) {
                sim.push_task(0, task, Some(ClusterId(0)));
            }
            fn on_start(&mut self, _sim: &mut Sim, _t: TaskId, _c: usize) -> usize {
                1
            }
            fn on_tick(&mut self, sim: &mut Sim, tick: u64) {
                sim.request_freq(Domain::Cluster(ClusterId(0)), if tick == 0 { 3 } else { 6 });
                sim.request_freq(Domain::Memory, 0);
            }
        }
        let p = default_tx2();
        let k = KernelParams { name: "m".into(), ops: 3.4 * 2.04, bytes: 3.0, kappa: 0.7, mu: 0.1 };
        let dag = gen_chain(&k, 1, 1).unwrap();
        let out = run(&dag, &mut Switcher, &p, &SimOptions::seeded(0)).unwrap();
        assert!((out.work_fraction[0] - 1.0).abs() < 1e-9);
        let r = &out.report;
        assert!(r.cluster_transitions == 2 && r.mem_transitions == 1);
        let total = r.cpu_energy_j + r.mem_energy_j;
        assert!(((r.attributed_j + r.unattributed_idle_j) - total).abs() <= 1e-9 * total);
        // Segments: (2.04, 1.87) until the cluster switch lands, (1.11, 1.87)
        // until memory follows 50 µs later, (1.11, 0.8), then (1.57, 0.8).
        let cfg0 = max_cfg(0, 1);
        let time = |f_c, f_m| p.ground_truth_time(&k, &Configuration { f_c, f_m, ..cfg0 }).unwrap();
        let mut left = 1.0;
        left -= 0.30005 / time(2.04, 1.87);
        left -= 0.00005 / time(1.11, 1.87);
        left -= (0.60005 - 0.3001) / time(1.11, 0.8);
        let expect_end = 0.60005 + left * time(1.57, 0.8);
        assert!((r.makespan_s - expect_end).abs() < 1e-9 * expect_end, "{} vs {}", r.makespan_s, expect_end);
    }

    #[test]
    fn sampled_meter_tracks_exact_meter() {
        let p = default_tx2();
        let dag = gen_chain(&compute(0.4), 20, 2).unwrap();
        let mut pol = FixedConfigPolicy { cfg: max_cfg(0, 1), pinned: true };
        let out = run(&dag, &mut pol, &p, &SimOptions { seed: 1, trace: false, sampled_meter: true }).unwrap();
        let exact = out.report.total_energy_j;
        let s = out.report.sampled_meter_j.unwrap();
        assert!((s - exact).abs() < 0.01 * exact, "{s} vs {exact}");
    }

    #[test]
    fn cross_cluster_steal_blocked_for_pinned_items() {
        let p = default_tx2();
        let dag = gen_chain(&compute(0.05), 64, 64).unwrap();
        let mut pol = FixedConfigPolicy { cfg: max_cfg(0, 1), pinned: true };
        let out = run(&dag, &mut pol, &p, &SimOptions::seeded(5)).unwrap();
        assert!(out.records.iter().all(|r| r.cluster == 0));
        let mut free = FixedConfigPolicy { cfg: max_cfg(0, 1), pinned: false };
        let out = run(&dag, &mut free, &p, &SimOptions::seeded(5)).unwrap();
        assert!(out.records.iter().any(|r| r.cluster == 1));
    }
}
