//! Comparison schedulers, and the name-to-policy mapping shared by every
//! front end.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dag::TaskId;
use crate::error::{Error, Result};
use crate::models::ModelSet;
use crate::platform::ClusterId;
use crate::sched::{JossPolicy, SchedParams, Variant};
use crate::sim::{Domain, Policy, Sim};

/// Random work stealing: single-core tasks, frequencies left at maximum.
#[derive(Debug, Clone, Default)]
pub struct GrwsPolicy;

fn push_local(sim: &mut Sim, task: TaskId, from: Option<usize>) {
    let core = match from {
        Some(c) => c,
        None => sim.random_core(),
    };
    sim.push_task(core, task, None);
}

impl Policy for GrwsPolicy {
    fn name(&self) -> String {
        "grws".into()
    }

    fn on_ready(&mut self, sim: &mut Sim, task: TaskId, from: Option<usize>) {
        push_local(sim, task, from);
    }

    fn on_start(&mut self, _sim: &mut Sim, _task: TaskId, _core: usize) -> usize {
        1
    }
}

pub const AEQUITAS_SLICE_S: f64 = 1.0;
pub const AEQUITAS_QUEUE_THRESHOLD: usize = 4;

/// Work stealing whose cluster frequencies follow per-core wishes: a core
/// that mostly steals asks for one step lower, a core with a long queue
/// for one step higher. Every slice, each cluster applies the wish of the
/// next core in round-robin order.
#[derive(Debug, Clone)]
pub struct AequitasPolicy {
    pub slice_s: f64,
    pub queue_threshold: usize,
    desired: Vec<usize>,
    stole: Vec<i64>,
    cursor: Vec<usize>,
}

impl Default for AequitasPolicy {
    fn default() -> Self {
        Self {
            slice_s: AEQUITAS_SLICE_S,
            queue_threshold: AEQUITAS_QUEUE_THRESHOLD,
            desired: Vec::new(),
            stole: Vec::new(),
            cursor: Vec::new(),
        }
    }
}

impl AequitasPolicy {
    /// Desired ladder index of each core.
    pub fn desired(&self) -> &[usize] {
        &self.desired
    }
}

impl Policy for AequitasPolicy {
    fn name(&self) -> String {
        "aequitas".into()
    }

    fn init(&mut self, sim: &mut Sim) {
        let n = sim.n_cores();
        self.desired = (0..n).map(|c| sim.freq_index(Domain::Cluster(sim.core_cluster(c)))).collect();
        self.stole = vec![0; n];
        self.cursor = vec![0; sim.platform.spec.clusters.len()];
        sim.schedule_tick(self.slice_s, 0);
    }

    fn on_ready(&mut self, sim: &mut Sim, task: TaskId, from: Option<usize>) {
        push_local(sim, task, from);
    }

    fn on_start(&mut self, _sim: &mut Sim, _task: TaskId, _core: usize) -> usize {
        1
    }

    fn on_steal(&mut self, _sim: &mut Sim, thief: usize, victim: usize) {
        self.stole[thief] += 1;
        self.stole[victim] -= 1;
    }

    fn on_tick(&mut self, sim: &mut Sim, _tick: u64) {
        for c in 0..sim.n_cores() {
            let top = sim.platform.spec.cluster(sim.core_cluster(c)).core_freqs_ghz.len() - 1;
            if self.stole[c] > 0 {
                self.desired[c] = self.desired[c].saturating_sub(1);
            } else if sim.queue_len(c) > self.queue_threshold {
                self.desired[c] = (self.desired[c] + 1).min(top);
            }
            self.stole[c] = 0;
        }
        for ci in 0..self.cursor.len() {
            let cl = ClusterId(ci);
            let cores: Vec<usize> = sim.platform.spec.cores_of(cl).collect();
            let active: Vec<usize> =
                cores.iter().copied().filter(|&c| sim.core_busy(c) || sim.queue_len(c) > 0).collect();
            if active.is_empty() {
                continue;
            }
            let pick = active[self.cursor[ci] % active.len()];
            self.cursor[ci] = self.cursor[ci].wrapping_add(1);
            if sim.target_index(Domain::Cluster(cl)) != self.desired[pick] {
                sim.request_freq(Domain::Cluster(cl), self.desired[pick]);
            }
        }
        sim.schedule_tick(sim.now() + self.slice_s, 0);
    }
}

/// Every scheduler selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    Grws,
    Erase,
    Aequitas,
    Steer,
    Joss,
    JossNomem,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 6] = [
        SchedulerKind::Grws,
        SchedulerKind::Erase,
        SchedulerKind::Aequitas,
        SchedulerKind::Steer,
        SchedulerKind::Joss,
        SchedulerKind::JossNomem,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchedulerKind::Grws => "grws",
            SchedulerKind::Erase => "erase",
            SchedulerKind::Aequitas => "aequitas",
            SchedulerKind::Steer => "steer",
            SchedulerKind::Joss => "joss",
            SchedulerKind::JossNomem => "joss-nomem",
        }
    }

    /// Whether the scheduler needs fitted models.
    pub fn uses_models(self) -> bool {
        !matches!(self, SchedulerKind::Grws | SchedulerKind::Aequitas)
    }

    pub fn build(self, params: SchedParams, models: Option<&ModelSet>) -> Result<Box<dyn Policy>> {
        let variant = match self {
            SchedulerKind::Grws => return Ok(Box::new(GrwsPolicy)),
            SchedulerKind::Aequitas => return Ok(Box::new(AequitasPolicy::default())),
            SchedulerKind::Erase => Variant::EraseLike,
            SchedulerKind::Steer => Variant::SteerLike,
            SchedulerKind::Joss => Variant::Joss,
            SchedulerKind::JossNomem => Variant::JossNoMem,
        };
        let models = models
            .ok_or_else(|| Error::InvalidInput(format!("scheduler `{}` needs fitted models", self.label())))?
            .clone();
        Ok(Box::new(JossPolicy::new(variant, params, models)))
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scheduler `{s}`")))
    }
}
