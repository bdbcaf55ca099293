//! The simulated machine: core clusters, frequency ladders, DVFS latencies,
//! and the analytic ground truth that stands in for real hardware.
//!
//! Everything the scheduler learns (times, CPU power, memory power) is
//! produced by the oracle functions here. The scheduler side never reads
//! [`GroundTruthParams`] directly; it only sees sampled times and the
//! profiles gathered from the synthetic ladder.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FREQ_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub name: String,
    pub core_count: usize,
    pub core_freqs_ghz: Vec<f64>,
    #[serde(default)]
    pub perf_class: String,
}

impl ClusterSpec {
    /// Per-task core counts: powers of two up to the cluster size.
    pub fn core_options(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut n = 1;
        while n <= self.core_count {
            out.push(n);
            n *= 2;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub clusters: Vec<ClusterSpec>,
    pub mem_freqs_ghz: Vec<f64>,
    pub cpu_dvfs_latency_s: f64,
    pub mem_dvfs_latency_s: f64,
    pub power_sample_period_s: f64,
}

/// A `<core type, core count>` pair; the unit a per-kernel lookup table is
/// split by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoreOption {
    pub cluster: ClusterId,
    pub n_cores: usize,
}

/// Index form of a configuration: option index into
/// [`PlatformSpec::options`], then core and memory ladder indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPoint {
    pub option: usize,
    pub fc: usize,
    pub fm: usize,
}

/// `<core type, core count, core frequency, memory frequency>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub cluster: ClusterId,
    pub n_cores: usize,
    pub f_c: f64,
    pub f_m: f64,
}

fn strictly_ascending_positive(v: &[f64]) -> bool {
    !v.is_empty() && v.iter().all(|&x| x > 0.0 && x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

fn ladder_index(ladder: &[f64], f: f64) -> Option<usize> {
    ladder.iter().position(|&x| (x - f).abs() <= FREQ_EPS)
}

impl PlatformSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::InvalidPlatform("at least one cluster required".into()));
        }
        for c in &self.clusters {
            if c.core_count == 0 {
                return Err(Error::InvalidPlatform(format!("cluster {} has no cores", c.name)));
            }
            if !strictly_ascending_positive(&c.core_freqs_ghz) {
                return Err(Error::InvalidPlatform(format!(
                    "cluster {} core ladder must be non-empty, positive and strictly ascending",
                    c.name
                )));
            }
            if c.core_freqs_ghz != self.clusters[0].core_freqs_ghz {
                return Err(Error::InvalidPlatform(format!(
                    "cluster {} does not share the core-frequency ladder of {}",
                    c.name, self.clusters[0].name
                )));
            }
        }
        let mut names: Vec<&str> = self.clusters.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidPlatform("cluster names must be unique".into()));
        }
        if !strictly_ascending_positive(&self.mem_freqs_ghz) {
            return Err(Error::InvalidPlatform(
                "memory ladder must be non-empty, positive and strictly ascending".into(),
            ));
        }
        for (what, v) in [
            ("cpu_dvfs_latency_s", self.cpu_dvfs_latency_s),
            ("mem_dvfs_latency_s", self.mem_dvfs_latency_s),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidPlatform(format!("{what} must be >= 0")));
            }
        }
        if !(self.power_sample_period_s > 0.0) {
            return Err(Error::InvalidPlatform("power_sample_period_s must be > 0".into()));
        }
        Ok(())
    }

    pub fn core_ladder(&self) -> &[f64] {
        &self.clusters[0].core_freqs_ghz
    }

    pub fn mem_ladder(&self) -> &[f64] {
        &self.mem_freqs_ghz
    }

    pub fn max_core_freq(&self) -> f64 {
        *self.core_ladder().last().expect("validated ladder")
    }

    pub fn max_mem_freq(&self) -> f64 {
        *self.mem_ladder().last().expect("validated ladder")
    }

    pub fn cluster(&self, id: ClusterId) -> &ClusterSpec {
        &self.clusters[id.0]
    }

    pub fn cluster_by_name(&self, name: &str) -> Option<ClusterId> {
        self.clusters.iter().position(|c| c.name == name).map(ClusterId)
    }

    pub fn total_cores(&self) -> usize {
        self.clusters.iter().map(|c| c.core_count).sum()
    }

    /// All `<cluster, n_cores>` options, cluster-major, core count ascending.
    pub fn options(&self) -> Vec<CoreOption> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| {
                c.core_options()
                    .into_iter()
                    .map(move |n| CoreOption { cluster: ClusterId(ci), n_cores: n })
            })
            .collect()
    }

    pub fn option_index(&self, cluster: ClusterId, n_cores: usize) -> Option<usize> {
        self.options()
            .iter()
            .position(|o| o.cluster == cluster && o.n_cores == n_cores)
    }

    /// Global core ids belonging to a cluster (clusters are laid out in order).
    pub fn cores_of(&self, cluster: ClusterId) -> std::ops::Range<usize> {
        let start: usize = self.clusters[..cluster.0].iter().map(|c| c.core_count).sum();
        start..start + self.clusters[cluster.0].core_count
    }

    pub fn fc_index(&self, f_c: f64) -> Option<usize> {
        ladder_index(self.core_ladder(), f_c)
    }

    pub fn fm_index(&self, f_m: f64) -> Option<usize> {
        ladder_index(self.mem_ladder(), f_m)
    }

    /// Number of `(configuration)` cells in one kernel's table.
    pub fn cells_per_kernel(&self) -> usize {
        self.options().len() * self.core_ladder().len() * self.mem_ladder().len()
    }

    /// Entries across the time, CPU-power and memory-power tables of one kernel.
    pub fn table_entries_per_kernel(&self) -> usize {
        3 * self.cells_per_kernel()
    }

    pub fn validate_config(&self, cfg: &Configuration) -> Result<()> {
        self.grid_point(cfg).map(|_| ())
    }

    pub fn grid_point(&self, cfg: &Configuration) -> Result<GridPoint> {
        if cfg.cluster.0 >= self.clusters.len() {
            return Err(Error::InvalidConfiguration(format!("no cluster {}", cfg.cluster.0)));
        }
        let option = self.option_index(cfg.cluster, cfg.n_cores).ok_or_else(|| {
            Error::InvalidConfiguration(format!(
                "{} cores is not an allowed count on {}",
                cfg.n_cores,
                self.cluster(cfg.cluster).name
            ))
        })?;
        let fc = self.fc_index(cfg.f_c).ok_or_else(|| {
            Error::InvalidConfiguration(format!("{} GHz is not on the core ladder", cfg.f_c))
        })?;
        let fm = self.fm_index(cfg.f_m).ok_or_else(|| {
            Error::InvalidConfiguration(format!("{} GHz is not on the memory ladder", cfg.f_m))
        })?;
        Ok(GridPoint { option, fc, fm })
    }

    pub fn config(&self, gp: GridPoint) -> Configuration {
        let o = self.options()[gp.option];
        Configuration {
            cluster: o.cluster,
            n_cores: o.n_cores,
            f_c: self.core_ladder()[gp.fc],
            f_m: self.mem_ladder()[gp.fm],
        }
    }

    /// Human-readable `<name, n, f_c, f_m>`.
    pub fn describe(&self, cfg: &Configuration) -> String {
        format!(
            "<{}, {}, {:.2}GHz, {:.2}GHz>",
            self.cluster(cfg.cluster).name,
            cfg.n_cores,
            cfg.f_c,
            cfg.f_m
        )
    }
}

/// Hidden per-cluster behaviour. `eff` and `bw_gbps` are indexed like
/// [`ClusterSpec::core_options`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTruth {
    pub ipc: f64,
    pub eff: Vec<f64>,
    pub bw_gbps: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub v0: f64,
    pub v1: f64,
    /// Idle watts per core per volt.
    pub iota: f64,
}

impl ClusterTruth {
    fn voltage(&self, f_c: f64) -> f64 {
        self.v0 + self.v1 * f_c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryTruth {
    pub delta0: f64,
    pub delta1: f64,
    pub rho0: f64,
    pub rho1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthParams {
    pub clusters: Vec<ClusterTruth>,
    pub memory: MemoryTruth,
    /// Relative spread of the multiplicative timing noise; 0 disables it.
    #[serde(default)]
    pub noise_rel: f64,
}

/// Characteristics of one kernel (task type) as seen by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub name: String,
    /// Giga-operations per task.
    pub ops: f64,
    /// Gigabytes moved per task.
    pub bytes: f64,
    /// Share of the stall that follows memory latency rather than issue rate.
    pub kappa: f64,
    /// Weight of the core/memory interaction stall term.
    pub mu: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ops >= 0.0
            && self.bytes >= 0.0
            && self.mu >= 0.0
            && (0.0..=1.0).contains(&self.kappa)
            && self.ops.is_finite()
            && self.bytes.is_finite()
            && self.mu.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("kernel {} has out-of-range parameters", self.name)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeParts {
    pub comp: f64,
    pub stall: f64,
}

impl TimeParts {
    pub fn total(&self) -> f64 {
        self.comp + self.stall
    }

    /// True fraction of time stalled on memory.
    pub fn mb(&self) -> f64 {
        let t = self.total();
        if t > 0.0 {
            self.stall / t
        } else {
            0.0
        }
    }
}

/// Oracle outputs for one kernel at one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCell {
    pub time: f64,
    pub mb: f64,
    pub cpu_w: f64,
    pub mem_w: f64,
}

/// Platform spec plus its hidden ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub spec: PlatformSpec,
    pub truth: GroundTruthParams,
}

impl Platform {
    pub fn new(spec: PlatformSpec, truth: GroundTruthParams) -> Result<Self> {
        let p = Self { spec, truth };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.truth.clusters.len() != self.spec.clusters.len() {
            return Err(Error::InvalidPlatform(
                "ground truth must describe every cluster".into(),
            ));
        }
        for (c, t) in self.spec.clusters.iter().zip(&self.truth.clusters) {
            let n_opts = c.core_options().len();
            if t.eff.len() != n_opts || t.bw_gbps.len() != n_opts {
                return Err(Error::InvalidPlatform(format!(
                    "cluster {}: eff and bw_gbps need {} entries",
                    c.name, n_opts
                )));
            }
            let rates = [t.ipc, t.alpha, t.beta, t.v0, t.v1, t.iota];
            if rates.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || t.ipc == 0.0 {
                return Err(Error::InvalidPlatform(format!(
                    "cluster {}: coefficients must be finite and >= 0 (ipc > 0)",
                    c.name
                )));
            }
            if (t.eff[0] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidPlatform(format!("cluster {}: eff(1) must be 1", c.name)));
            }
            if t.eff.iter().any(|&e| !(e > 0.0)) || t.eff.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::InvalidPlatform(format!(
                    "cluster {}: eff must be positive and non-increasing",
                    c.name
                )));
            }
            if t.bw_gbps.iter().any(|&b| !(b > 0.0)) || t.bw_gbps.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidPlatform(format!(
                    "cluster {}: bw_gbps must be positive and non-decreasing",
                    c.name
                )));
            }
        }
        let m = &self.truth.memory;
        if [m.delta0, m.delta1, m.rho0, m.rho1, self.truth.noise_rel]
            .iter()
            .any(|&x| !(x >= 0.0) || !x.is_finite())
        {
            return Err(Error::InvalidPlatform("memory coefficients must be >= 0".into()));
        }
        if self.truth.noise_rel >= 0.5 {
            return Err(Error::InvalidPlatform("noise_rel must be below 0.5".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Platform = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("platform serializes")
    }

    fn option_slot(&self, cfg: &Configuration) -> Result<usize> {
        self.spec.validate_config(cfg)?;
        Ok(self
            .spec
            .cluster(cfg.cluster)
            .core_options()
            .iter()
            .position(|&n| n == cfg.n_cores)
            .expect("validated"))
    }

    /// Computation and stall components of one task's execution time.
    pub fn time_parts(&self, k: &KernelParams, cfg: &Configuration) -> Result<TimeParts> {
        let slot = self.option_slot(cfg)?;
        let t = &self.truth.clusters[cfg.cluster.0];
        let n = cfg.n_cores as f64;
        let comp = k.ops / (t.ipc * n * t.eff[slot] * cfg.f_c);
        let base_stall = k.bytes / t.bw_gbps[slot];
        let r = self.spec.max_core_freq() / cfg.f_c;
        let q = self.spec.max_mem_freq() / cfg.f_m;
        let stall = base_stall * (k.kappa * q + (1.0 - k.kappa) * r + k.mu * r * q);
        Ok(TimeParts { comp, stall })
    }

    pub fn ground_truth_time(&self, k: &KernelParams, cfg: &Configuration) -> Result<f64> {
        Ok(self.time_parts(k, cfg)?.total())
    }

    /// Multiplicative timing noise factor; exactly 1 when noise is disabled.
    pub fn noise_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.truth.noise_rel == 0.0 {
            return 1.0;
        }
        // Uniform with the configured standard deviation.
        let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
        1.0 + u * self.truth.noise_rel * 3f64.sqrt()
    }

    pub fn noisy_time<R: Rng + ?Sized>(
        &self,
        k: &KernelParams,
        cfg: &Configuration,
        rng: &mut R,
    ) -> Result<f64> {
        Ok(self.ground_truth_time(k, cfg)? * self.noise_factor(rng))
    }

    /// Dynamic CPU power of a task spread over `cfg.n_cores` cores.
    pub fn ground_truth_cpu_power(&self, cfg: &Configuration, mb_true: f64) -> Result<f64> {
        self.spec.validate_config(cfg)?;
        if !(0.0..=1.0).contains(&mb_true) {
            return Err(Error::InvalidInput(format!("memory-boundness {mb_true} outside [0,1]")));
        }
        let t = &self.truth.clusters[cfg.cluster.0];
        let v = t.voltage(cfg.f_c);
        Ok(cfg.n_cores as f64 * t.alpha * cfg.f_c * v * v * (1.0 - t.beta * mb_true))
    }

    /// Dynamic memory power at a given traffic rate (GB/s).
    pub fn ground_truth_mem_power(&self, cfg: &Configuration, traffic_gbps: f64) -> Result<f64> {
        self.spec.validate_config(cfg)?;
        if !(traffic_gbps >= 0.0) {
            return Err(Error::InvalidInput("traffic rate must be >= 0".into()));
        }
        let m = &self.truth.memory;
        Ok(m.delta0 * cfg.f_m + m.delta1 * traffic_gbps)
    }

    /// Idle watts of a whole (awake) cluster at core frequency `f_c`.
    pub fn cluster_idle_power(&self, cluster: ClusterId, f_c: f64) -> f64 {
        let t = &self.truth.clusters[cluster.0];
        t.iota * self.spec.cluster(cluster).core_count as f64 * t.voltage(f_c)
    }

    pub fn mem_idle_power(&self, f_m: f64) -> f64 {
        self.truth.memory.rho0 + self.truth.memory.rho1 * f_m
    }

    /// Time and dynamic power of a kernel at a configuration.
    pub fn evaluate(&self, k: &KernelParams, cfg: &Configuration) -> Result<OracleCell> {
        let parts = self.time_parts(k, cfg)?;
        let time = parts.total();
        let mb = parts.mb();
        let cpu_w = self.ground_truth_cpu_power(cfg, mb)?;
        let traffic = if time > 0.0 { k.bytes / time } else { 0.0 };
        let mem_w = self.ground_truth_mem_power(cfg, traffic)?;
        Ok(OracleCell { time, mb, cpu_w, mem_w })
    }

    pub fn evaluate_point(&self, k: &KernelParams, gp: GridPoint) -> OracleCell {
        self.evaluate(k, &self.spec.config(gp)).expect("grid points are valid")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {:.2}, {:.2}>", self.cluster.0, self.n_cores, self.f_c, self.f_m)
    }
}

pub const TX2_CORE_LADDER: [f64; 10] = [0.65, 0.81, 0.96, 1.11, 1.27, 1.42, 1.57, 1.73, 1.88, 2.04];
pub const TX2_MEM_LADDER: [f64; 5] = [0.80, 1.06, 1.33, 1.60, 1.87];

/// A Jetson-TX2-like machine: a dual-core Denver cluster and a quad-core
/// A57 cluster sharing one core ladder, plus a memory ladder.
pub fn default_tx2_spec() -> PlatformSpec {
    PlatformSpec {
        clusters: vec![
            ClusterSpec {
                name: "denver".into(),
                core_count: 2,
                core_freqs_ghz: TX2_CORE_LADDER.to_vec(),
                perf_class: "big".into(),
            },
            ClusterSpec {
                name: "a57".into(),
                core_count: 4,
                core_freqs_ghz: TX2_CORE_LADDER.to_vec(),
                perf_class: "little".into(),
            },
        ],
        mem_freqs_ghz: TX2_MEM_LADDER.to_vec(),
        cpu_dvfs_latency_s: 50e-6,
        mem_dvfs_latency_s: 100e-6,
        power_sample_period_s: 5e-3,
    }
}

pub fn default_tx2_truth() -> GroundTruthParams {
    GroundTruthParams {
        clusters: vec![
            ClusterTruth {
                ipc: 3.4,
                eff: vec![1.0, 0.98],
                bw_gbps: vec![10.0, 10.05],
                alpha: 0.64,
                beta: 0.73,
                v0: 0.79,
                v1: 0.35,
                iota: 0.71,
            },
            ClusterTruth {
                ipc: 1.0,
                eff: vec![1.0, 0.96, 0.90],
                bw_gbps: vec![4.3, 5.6, 6.9],
                alpha: 0.44,
                beta: 0.73,
                v0: 0.79,
                v1: 0.35,
                iota: 0.17,
            },
        ],
        memory: MemoryTruth { delta0: 0.28, delta1: 0.05, rho0: 0.03, rho1: 0.13 },
        noise_rel: 0.0,
    }
}

pub fn default_tx2() -> Platform {
    Platform { spec: default_tx2_spec(), truth: default_tx2_truth() }
}
