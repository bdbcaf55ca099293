//! Kernel presets, workload descriptions that can be read from TOML, and the
//! standard six-workload suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dag::{
    gen_chain, gen_forkjoin, gen_mixed, gen_sparselu, gen_stencil, ForkJoinLayer, SparseLuKernels, TaskDag,
};
use crate::error::{Error, Result};
use crate::platform::KernelParams;

fn kernel(name: &str, ops: f64, bytes: f64, kappa: f64, mu: f64) -> KernelParams {
    KernelParams { name: name.into(), ops, bytes, kappa, mu }
}

/// Dense matrix multiply block: compute-bound.
pub fn dgemm() -> KernelParams {
    kernel("dgemm", 0.04, 0.0002, 0.8, 0.1)
}

/// Streaming copy: memory-bound.
pub fn stream() -> KernelParams {
    kernel("stream", 0.004, 0.04, 0.8, 0.1)
}

/// Stencil sweep over one tile: in between.
pub fn heat() -> KernelParams {
    kernel("heat", 0.015, 0.012, 0.6, 0.2)
}

pub fn sparselu_kernels() -> SparseLuKernels {
    SparseLuKernels {
        lu0: kernel("lu0", 0.02, 0.002, 0.8, 0.1),
        fwd: kernel("fwd", 0.015, 0.003, 0.8, 0.1),
        bdiv: kernel("bdiv", 0.015, 0.003, 0.8, 0.1),
        bmod: kernel("bmod", 0.03, 0.0015, 0.8, 0.1),
    }
}

pub fn conv() -> KernelParams {
    kernel("conv", 0.05, 0.005, 0.7, 0.1)
}

pub fn pool() -> KernelParams {
    kernel("pool", 0.003, 0.015, 0.8, 0.1)
}

pub fn dense() -> KernelParams {
    kernel("dense", 0.01, 0.03, 0.9, 0.1)
}

pub fn concat() -> KernelParams {
    kernel("concat", 0.001, 0.002, 0.8, 0.1)
}

/// Every named kernel preset.
pub fn kernel_presets() -> Vec<KernelParams> {
    let s = sparselu_kernels();
    vec![dgemm(), stream(), heat(), s.lu0, s.fwd, s.bdiv, s.bmod, conv(), pool(), dense(), concat()]
}

pub fn kernel_preset(name: &str) -> Option<KernelParams> {
    kernel_presets().into_iter().find(|k| k.name == name)
}

/// Seeded kernels spread between compute- and memory-bound, with
/// millisecond-scale task times.
pub fn random_kernels(seed: u64, n: usize) -> Vec<KernelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let ops = 10f64.powf(rng.random_range(-3.0..-1.0));
            let bytes = 10f64.powf(rng.random_range(-5.0..-1.3));
            kernel(&format!("rand{i}"), ops, bytes, rng.random_range(0.3..1.0), rng.random_range(0.0..0.3))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kernel: KernelParams,
    pub width: usize,
    /// Consecutive copies of this layer.
    #[serde(default = "one")]
    pub repeat: usize,
}

fn one() -> usize {
    1
}

/// A DAG recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSpec {
    /// One of [`suite_names`].
    Preset { name: String },
    Chain { kernel: KernelParams, n_tasks: usize, dop: usize },
    Stencil { kernel: KernelParams, width: usize, steps: usize },
    SparseLu { blocks: usize, lu0: KernelParams, fwd: KernelParams, bdiv: KernelParams, bmod: KernelParams },
    ForkJoin {
        layers: Vec<LayerSpec>,
        /// Repeats the whole layer list.
        #[serde(default = "one")]
        rounds: usize,
        join: Option<KernelParams>,
    },
    Mixed { seed: u64, pool: Vec<KernelParams>, n_tasks: usize },
}

impl WorkloadSpec {
    pub fn build(&self) -> Result<TaskDag> {
        match self {
            WorkloadSpec::Preset { name } => preset(name)?.build(),
            WorkloadSpec::Chain { kernel, n_tasks, dop } => gen_chain(kernel, *n_tasks, *dop),
            WorkloadSpec::Stencil { kernel, width, steps } => gen_stencil(kernel, *width, *steps),
            WorkloadSpec::SparseLu { blocks, lu0, fwd, bdiv, bmod } => gen_sparselu(
                *blocks,
                &SparseLuKernels { lu0: lu0.clone(), fwd: fwd.clone(), bdiv: bdiv.clone(), bmod: bmod.clone() },
            ),
            WorkloadSpec::ForkJoin { layers, rounds, join } => {
                let mut flat = Vec::new();
                for _ in 0..*rounds {
                    for l in layers {
                        for _ in 0..l.repeat {
                            flat.push(ForkJoinLayer { kernel: l.kernel.clone(), width: l.width });
                        }
                    }
                }
                gen_forkjoin(&flat, join.as_ref())
            }
            WorkloadSpec::Mixed { seed, pool, n_tasks } => gen_mixed(*seed, pool, *n_tasks),
        }
    }
}

pub const SUITE: [&str; 6] = ["compute-chain", "memory-chain", "stencil", "sparselu", "forkjoin", "mixed"];

pub fn suite_names() -> &'static [&'static str] {
    &SUITE
}

/// Recipe of a suite workload.
pub fn preset(name: &str) -> Result<WorkloadSpec> {
    let s = sparselu_kernels();
    Ok(match name {
        "compute-chain" => WorkloadSpec::Chain { kernel: dgemm(), n_tasks: 10_000, dop: 1 },
        "memory-chain" => WorkloadSpec::Chain { kernel: stream(), n_tasks: 10_000, dop: 1 },
        "stencil" => WorkloadSpec::Stencil { kernel: heat(), width: 16, steps: 640 },
        "sparselu" => WorkloadSpec::SparseLu { blocks: 50, lu0: s.lu0, fwd: s.fwd, bdiv: s.bdiv, bmod: s.bmod },
        "forkjoin" => WorkloadSpec::ForkJoin {
            layers: vec![
                LayerSpec { kernel: conv(), width: 64, repeat: 2 },
                LayerSpec { kernel: pool(), width: 32, repeat: 1 },
                LayerSpec { kernel: dense(), width: 16, repeat: 1 },
            ],
            rounds: 60,
            join: Some(concat()),
        },
        "mixed" => WorkloadSpec::Mixed {
            seed: 7,
            pool: vec![dgemm(), stream(), heat(), conv(), pool(), dense()],
            n_tasks: 10_000,
        },
        _ => return Err(Error::InvalidInput(format!("unknown workload `{name}` (known: {})", SUITE.join(", ")))),
    })
}

pub fn build_preset(name: &str) -> Result<TaskDag> {
    preset(name)?.build()
}
