//! Task DAGs and the workload generators used to approximate the benchmark
//! families: chains, stencils, blocked sparse LU, fork-join layers and
//! random layered graphs.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, Ordering};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::KernelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

/// Index into [`TaskDag::kernels`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KernelId(pub u16);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskNode {
    pub id: TaskId,
    pub kernel: KernelId,
    pub preds: Vec<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDag {
    pub kernels: Vec<KernelParams>,
    pub tasks: Vec<TaskNode>,
    pub declared_dop: f64,
}

impl TaskDag {
    /// Builds a DAG, computing its dop from the structure.
    pub fn new(kernels: Vec<KernelParams>, tasks: Vec<TaskNode>) -> Result<Self> {
        let mut dag = Self { kernels, tasks, declared_dop: 0.0 };
        dag.check_structure()?;
        dag.declared_dop = dag.computed_dop()?;
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn kernel(&self, t: TaskId) -> KernelId {
        self.tasks[t.0 as usize].kernel
    }

    pub fn kernel_params(&self, k: KernelId) -> &KernelParams {
        &self.kernels[k.0 as usize]
    }

    pub fn kernel_by_name(&self, name: &str) -> Option<KernelId> {
        self.kernels.iter().position(|k| k.name == name).map(|i| KernelId(i as u16))
    }

    /// Number of tasks per kernel.
    pub fn kernel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.kernels.len()];
        for t in &self.tasks {
            counts[t.kernel.0 as usize] += 1;
        }
        counts
    }

    fn check_structure(&self) -> Result<()> {
        let mut names: Vec<&str> = self.kernels.iter().map(|k| k.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDag("kernel names must be unique".into()));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        let n = self.tasks.len();
        for (i, t) in self.tasks.iter().enumerate() {
            if t.id.0 as usize != i {
                return Err(Error::InvalidDag(format!("task at position {i} has id {}", t.id.0)));
            }
            if t.kernel.0 as usize >= self.kernels.len() {
                return Err(Error::InvalidDag(format!("task {i} references unknown kernel")));
            }
            for p in &t.preds {
                if p.0 as usize >= n {
                    return Err(Error::InvalidDag(format!(
                        "task {i} depends on missing task {}",
                        p.0
                    )));
                }
            }
        }
        self.topo_order().map(|_| ())
    }

    /// Kahn's algorithm; errors on cycles.
    pub fn topo_order(&self) -> Result<Vec<TaskId>> {
        let succ = self.successors();
        let mut indeg: Vec<usize> = self.tasks.iter().map(|t| t.preds.len()).collect();
        let mut queue: VecDeque<usize> =
            indeg.iter().enumerate().filter(|(_, &d)| d == 0).map(|(i, _)| i).collect();
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(i) = queue.pop_front() {
            order.push(TaskId(i as u32));
            for s in &succ[i] {
                let d = &mut indeg[s.0 as usize];
                *d -= 1;
                if *d == 0 {
                    queue.push_back(s.0 as usize);
                }
            }
        }
        if order.len() != self.tasks.len() {
            return Err(Error::InvalidDag(format!(
                "cycle detected: {} of {} tasks unreachable by topological order",
                self.tasks.len() - order.len(),
                self.tasks.len()
            )));
        }
        Ok(order)
    }

    pub fn successors(&self) -> Vec<Vec<TaskId>> {
        let mut succ = vec![Vec::new(); self.tasks.len()];
        for t in &self.tasks {
            for p in &t.preds {
                succ[p.0 as usize].push(t.id);
            }
        }
        succ
    }

    /// Length (in tasks) of the longest dependency path.
    pub fn longest_path(&self) -> Result<usize> {
        let order = self.topo_order()?;
        let mut depth = vec![0usize; self.tasks.len()];
        let mut best = 0;
        for id in order {
            let t = &self.tasks[id.0 as usize];
            let d = 1 + t.preds.iter().map(|p| depth[p.0 as usize]).max().unwrap_or(0);
            depth[id.0 as usize] = d;
            best = best.max(d);
        }
        Ok(best)
    }

    /// Task count over longest path length.
    pub fn computed_dop(&self) -> Result<f64> {
        if self.tasks.is_empty() {
            return Ok(0.0);
        }
        Ok(self.tasks.len() as f64 / self.longest_path()? as f64)
    }

    /// Full validation, including the declared dop.
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        let dop = self.computed_dop()?;
        if (dop - self.declared_dop).abs() > 1e-6 * dop.max(1.0) {
            return Err(Error::InvalidDag(format!(
                "declared dop {} does not match computed {}",
                self.declared_dop, dop
            )));
        }
        Ok(())
    }

    /// Line format: `id kernel pred,pred,...` (`-` for no predecessors),
    /// preceded by a `# dop` header.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dop {}", self.declared_dop);
        for t in &self.tasks {
            let preds = if t.preds.is_empty() {
                "-".to_string()
            } else {
                t.preds.iter().map(|p| p.0.to_string()).collect::<Vec<_>>().join(",")
            };
            let _ = writeln!(out, "{} {} {}", t.id.0, self.kernels[t.kernel.0 as usize].name, preds);
        }
        out
    }

    /// Parses the line format; kernel names resolve against `kernels`.
    pub fn from_text(text: &str, kernels: Vec<KernelParams>) -> Result<Self> {
        let by_name: HashMap<&str, usize> =
            kernels.iter().enumerate().map(|(i, k)| (k.name.as_str(), i)).collect();
        let mut used = vec![false; kernels.len()];
        let mut declared = None;
        let mut tasks = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("dop") {
                    let v = it.next().and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| {
                        Error::Parse(format!("line {}: bad dop header", lineno + 1))
                    })?;
                    declared = Some(v);
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let bad = || Error::Parse(format!("line {}: expected `id kernel preds`", lineno + 1));
            let id: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let kname = it.next().ok_or_else(bad)?;
            let preds_s = it.next().unwrap_or("-");
            if it.next().is_some() {
                return Err(bad());
            }
            let k = *by_name.get(kname).ok_or_else(|| {
                Error::Parse(format!("line {}: unknown kernel {kname}", lineno + 1))
            })?;
            used[k] = true;
            let preds = if preds_s == "-" {
                Vec::new()
            } else {
                preds_s
                    .split(',')
                    .map(|s| s.parse::<u32>().map(TaskId).map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?
            };
            tasks.push(TaskNode { id: TaskId(id), kernel: KernelId(k as u16), preds });
        }
        let mut dag = Self::new(kernels, tasks)?;
        if let Some(d) = declared {
            dag.declared_dop = d;
            dag.validate()?;
        }
        let _ = used;
        Ok(dag)
    }
}

/// Runtime predecessor counters. Decrements are atomic so a threaded host
/// can release successors concurrently.
#[derive(Debug)]
pub struct ReadyTracker {
    remaining: Vec<AtomicU32>,
    succ: Vec<Vec<TaskId>>,
}

impl ReadyTracker {
    pub fn new(dag: &TaskDag) -> Self {
        Self {
            remaining: dag.tasks.iter().map(|t| AtomicU32::new(t.preds.len() as u32)).collect(),
            succ: dag.successors(),
        }
    }

    pub fn roots(&self) -> Vec<TaskId> {
        self.remaining
            .iter()
            .enumerate()
            .filter(|(_, c)| c.load(Ordering::Acquire) == 0)
            .map(|(i, _)| TaskId(i as u32))
            .collect()
    }

    pub fn is_ready(&self, t: TaskId) -> bool {
        self.remaining[t.0 as usize].load(Ordering::Acquire) == 0
    }

    /// Marks `t` complete and returns successors that became ready.
    pub fn complete(&self, t: TaskId) -> Vec<TaskId> {
        let mut ready = Vec::new();
        for &s in &self.succ[t.0 as usize] {
            let prev = self.remaining[s.0 as usize].fetch_sub(1, Ordering::AcqRel);
            assert!(prev > 0, "task {} released more times than it has predecessors", s.0);
            if prev == 1 {
                ready.push(s);
            }
        }
        ready
    }
}

fn kernel_set(list: &[&KernelParams]) -> (Vec<KernelParams>, Vec<KernelId>) {
    let mut kernels: Vec<KernelParams> = Vec::new();
    let mut ids = Vec::with_capacity(list.len());
    for k in list {
        let idx = match kernels.iter().position(|x| x.name == k.name) {
            Some(i) => i,
            None => {
                kernels.push((*k).clone());
                kernels.len() - 1
            }
        };
        ids.push(KernelId(idx as u16));
    }
    (kernels, ids)
}

/// `dop` independent chains of `n_tasks / dop` tasks each.
pub fn gen_chain(kernel: &KernelParams, n_tasks: usize, dop: usize) -> Result<TaskDag> {
    if n_tasks == 0 || dop == 0 {
        return Err(Error::InvalidInput("chain needs n_tasks >= 1 and dop >= 1".into()));
    }
    if !n_tasks.is_multiple_of(dop) {
        return Err(Error::InvalidInput(format!("dop {dop} does not divide {n_tasks} tasks")));
    }
    let len = n_tasks / dop;
    let mut tasks = Vec::with_capacity(n_tasks);
    for c in 0..dop {
        for i in 0..len {
            let id = (c * len + i) as u32;
            let preds = if i == 0 { vec![] } else { vec![TaskId(id - 1)] };
            tasks.push(TaskNode { id: TaskId(id), kernel: KernelId(0), preds });
        }
    }
    TaskDag::new(vec![kernel.clone()], tasks)
}

#[derive(Debug, Clone)]
pub struct SparseLuKernels {
    pub lu0: KernelParams,
    pub fwd: KernelParams,
    pub bdiv: KernelParams,
    pub bmod: KernelParams,
}

/// Blocked sparse LU with the usual non-null block pattern; fill-in blocks
/// are created by `bmod`. Dependencies follow the last writer of each block.
pub fn gen_sparselu(blocks: usize, kernels: &SparseLuKernels) -> Result<TaskDag> {
    if blocks < 2 {
        return Err(Error::InvalidInput("sparse LU needs at least 2 blocks".into()));
    }
    let nb = blocks;
    let mut present = vec![vec![false; nb]; nb];
    for (ii, row) in present.iter_mut().enumerate() {
        for (jj, cell) in row.iter_mut().enumerate() {
            let mut null = (ii < jj && ii % 3 != 0) || (ii > jj && jj % 3 != 0);
            null |= ii % 2 == 1 || jj % 2 == 1;
            if ii == jj || ii + 1 == jj || jj + 1 == ii {
                null = false;
            }
            *cell = !null;
        }
    }
    let (kset, ids) = kernel_set(&[&kernels.lu0, &kernels.fwd, &kernels.bdiv, &kernels.bmod]);
    let [lu0, fwd, bdiv, bmod] = [ids[0], ids[1], ids[2], ids[3]];
    let mut writer: Vec<Vec<Option<TaskId>>> = vec![vec![None; nb]; nb];
    let mut tasks: Vec<TaskNode> = Vec::new();
    let push = |tasks: &mut Vec<TaskNode>, kernel, mut preds: Vec<TaskId>| {
        preds.sort_unstable();
        preds.dedup();
        let id = TaskId(tasks.len() as u32);
        tasks.push(TaskNode { id, kernel, preds });
        id
    };
    for kk in 0..nb {
        let diag = push(&mut tasks, lu0, writer[kk][kk].into_iter().collect());
        writer[kk][kk] = Some(diag);
        for jj in kk + 1..nb {
            if present[kk][jj] {
                let preds = std::iter::once(diag).chain(writer[kk][jj]).collect();
                writer[kk][jj] = Some(push(&mut tasks, fwd, preds));
            }
        }
        for ii in kk + 1..nb {
            if present[ii][kk] {
                let preds = std::iter::once(diag).chain(writer[ii][kk]).collect();
                writer[ii][kk] = Some(push(&mut tasks, bdiv, preds));
            }
        }
        for ii in kk + 1..nb {
            if !present[ii][kk] {
                continue;
            }
            for jj in kk + 1..nb {
                if !present[kk][jj] {
                    continue;
                }
                let mut preds = vec![writer[ii][kk].unwrap(), writer[kk][jj].unwrap()];
                preds.extend(writer[ii][jj]);
                present[ii][jj] = true;
                writer[ii][jj] = Some(push(&mut tasks, bmod, preds));
            }
        }
    }
    TaskDag::new(kset, tasks)
}

#[derive(Debug, Clone)]
pub struct ForkJoinLayer {
    pub kernel: KernelParams,
    pub width: usize,
}

/// Layers of parallel tasks. Without a join kernel every task of a layer
/// depends on every task of the previous layer; with one, a join task sits
/// between consecutive layers.
pub fn gen_forkjoin(layers: &[ForkJoinLayer], join: Option<&KernelParams>) -> Result<TaskDag> {
    if layers.is_empty() || layers.iter().any(|l| l.width == 0) {
        return Err(Error::InvalidInput("fork-join needs >= 1 layer of width >= 1".into()));
    }
    let mut refs: Vec<&KernelParams> = layers.iter().map(|l| &l.kernel).collect();
    if let Some(j) = join {
        refs.push(j);
    }
    let (kset, ids) = kernel_set(&refs);
    let join_id = join.map(|_| ids[layers.len()]);
    let mut tasks: Vec<TaskNode> = Vec::new();
    let mut prev: Vec<TaskId> = Vec::new();
    for (li, layer) in layers.iter().enumerate() {
        if li > 0 {
            if let Some(jk) = join_id {
                let id = TaskId(tasks.len() as u32);
                tasks.push(TaskNode { id, kernel: jk, preds: prev.clone() });
                prev = vec![id];
            }
        }
        let mut cur = Vec::with_capacity(layer.width);
        for _ in 0..layer.width {
            let id = TaskId(tasks.len() as u32);
            tasks.push(TaskNode { id, kernel: ids[li], preds: prev.clone() });
            cur.push(id);
        }
        prev = cur;
    }
    TaskDag::new(kset, tasks)
}

/// Iterative 1-D stencil: cell `i` at step `t` depends on cells `i-1..=i+1`
/// at step `t-1`.
pub fn gen_stencil(kernel: &KernelParams, width: usize, steps: usize) -> Result<TaskDag> {
    if width == 0 || steps == 0 {
        return Err(Error::InvalidInput("stencil needs width >= 1 and steps >= 1".into()));
    }
    let mut tasks = Vec::with_capacity(width * steps);
    for t in 0..steps {
        for i in 0..width {
            let id = TaskId((t * width + i) as u32);
            let preds = if t == 0 {
                vec![]
            } else {
                (i.saturating_sub(1)..=(i + 1).min(width - 1)).map(|j| TaskId(((t - 1) * width + j) as u32)).collect()
            };
            tasks.push(TaskNode { id, kernel: KernelId(0), preds });
        }
    }
    TaskDag::new(vec![kernel.clone()], tasks)
}

/// Seeded random layered DAG drawing kernels from `pool`.
pub fn gen_mixed(seed: u64, pool: &[KernelParams], n_tasks: usize) -> Result<TaskDag> {
    if pool.is_empty() {
        return Err(Error::InvalidInput("kernel pool is empty".into()));
    }
    if n_tasks == 0 {
        return Err(Error::InvalidInput("empty DAG requested".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let refs: Vec<&KernelParams> = pool.iter().collect();
    let (kset, ids) = kernel_set(&refs);
    let mut tasks: Vec<TaskNode> = Vec::with_capacity(n_tasks);
    let mut prev_layer: Vec<TaskId> = Vec::new();
    while tasks.len() < n_tasks {
        let width = rng.random_range(1..=16usize).min(n_tasks - tasks.len());
        let mut layer = Vec::with_capacity(width);
        for _ in 0..width {
            let id = TaskId(tasks.len() as u32);
            let kernel = *ids.choose(&mut rng).expect("non-empty");
            let mut preds = Vec::new();
            if !prev_layer.is_empty() {
                let k = rng.random_range(1..=3usize.min(prev_layer.len()));
                for _ in 0..k {
                    preds.push(*prev_layer.choose(&mut rng).expect("non-empty"));
                }
                preds.sort_unstable();
                preds.dedup();
            }
            tasks.push(TaskNode { id, kernel, preds });
            layer.push(id);
        }
        prev_layer = layer;
    }
    TaskDag::new(kset, tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(name: &str) -> KernelParams {
        KernelParams { name: name.into(), ops: 0.1, bytes: 0.01, kappa: 0.8, mu: 0.1 }
    }

    fn slu_kernels() -> SparseLuKernels {
        SparseLuKernels { lu0: k("lu0"), fwd: k("fwd"), bdiv: k("bdiv"), bmod: k("bmod") }
    }

    #[test]
    fn stencil_shape() {
        let d = gen_stencil(&k("s"), 4, 3).unwrap();
        assert_eq!(d.len(), 12);
        assert_eq!(d.longest_path().unwrap(), 3);
        assert_eq!(d.declared_dop, 4.0);
        assert_eq!(d.tasks[4].preds, vec![TaskId(0), TaskId(1)]);
        assert_eq!(d.tasks[6].preds, vec![TaskId(1), TaskId(2), TaskId(3)]);
        assert!(gen_stencil(&k("s"), 0, 3).is_err());
    }

    #[test]
    fn chain_shapes() {
        let d = gen_chain(&k("mm"), 10, 1).unwrap();
        assert_eq!(d.len(), 10);
        assert_eq!(d.longest_path().unwrap(), 10);
        assert_eq!(d.declared_dop, 1.0);

        let d = gen_chain(&k("mc"), 10, 2).unwrap();
        assert_eq!(d.longest_path().unwrap(), 5);
        assert_eq!(d.computed_dop().unwrap(), 2.0);

        let d = gen_chain(&k("x"), 1, 1).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.declared_dop, 1.0);

        assert!(gen_chain(&k("x"), 10, 3).is_err());
        assert!(gen_chain(&k("x"), 0, 1).is_err());
    }

    #[test]
    fn sparselu_two_blocks_by_hand() {
        let d = gen_sparselu(2, &slu_kernels()).unwrap();
        // lu0(0) -> fwd(0,1), bdiv(1,0) -> bmod(1,1) -> lu0(1)
        let names: Vec<&str> = d.tasks.iter().map(|t| d.kernels[t.kernel.0 as usize].name.as_str()).collect();
        assert_eq!(names, ["lu0", "fwd", "bdiv", "bmod", "lu0"]);
        let preds: Vec<Vec<u32>> = d.tasks.iter().map(|t| t.preds.iter().map(|p| p.0).collect()).collect();
        assert_eq!(preds, vec![vec![], vec![0], vec![0], vec![1, 2], vec![3]]);
        d.validate().unwrap();
    }

    #[test]
    fn sparselu_64_blocks_is_bmod_dominated() {
        let d = gen_sparselu(64, &slu_kernels()).unwrap();
        let counts = d.kernel_counts();
        let bmod = counts[d.kernel_by_name("bmod").unwrap().0 as usize] as f64;
        let frac = bmod / d.len() as f64;
        assert!((frac - 0.91).abs() < 0.01, "bmod fraction {frac}");
        d.validate().unwrap();
        for nb in [48, 56, 64] {
            let d = gen_sparselu(nb, &slu_kernels()).unwrap();
            let c = d.kernel_counts();
            assert!(c[3] as f64 / d.len() as f64 >= 0.85, "{nb}");
        }
    }

    #[test]
    fn forkjoin_shapes() {
        let single = gen_forkjoin(&[ForkJoinLayer { kernel: k("a"), width: 1 }], None).unwrap();
        assert_eq!(single.len(), 1);

        let layers = vec![
            ForkJoinLayer { kernel: k("a"), width: 4 },
            ForkJoinLayer { kernel: k("b"), width: 4 },
        ];
        let d = gen_forkjoin(&layers, None).unwrap();
        assert_eq!(d.len(), 8);
        assert_eq!(d.computed_dop().unwrap(), 4.0);

        let joined = gen_forkjoin(&layers, Some(&k("join"))).unwrap();
        assert_eq!(joined.len(), 4 + 4 + 1);
        let join = &joined.tasks[4];
        assert_eq!(join.preds.len(), 4);
        assert_eq!(joined.longest_path().unwrap(), 3);
    }

    #[test]
    fn mixed_is_deterministic_and_uses_pool() {
        let pool = vec![k("cpu"), k("mem")];
        let a = gen_mixed(5, &pool, 1000).unwrap();
        let b = gen_mixed(5, &pool, 1000).unwrap();
        assert_eq!(a, b);
        assert!(a.kernel_counts().iter().all(|&c| c > 0));
        assert!(gen_mixed(5, &pool, 0).is_err());
        assert!(gen_mixed(5, &[], 10).is_err());
        assert_ne!(a, gen_mixed(6, &pool, 1000).unwrap());
    }

    #[test]
    fn cycles_and_dangling_edges_are_rejected() {
        let tasks = vec![
            TaskNode { id: TaskId(0), kernel: KernelId(0), preds: vec![TaskId(1)] },
            TaskNode { id: TaskId(1), kernel: KernelId(0), preds: vec![TaskId(0)] },
        ];
        assert!(TaskDag::new(vec![k("a")], tasks).is_err());
        let tasks = vec![TaskNode { id: TaskId(0), kernel: KernelId(0), preds: vec![TaskId(4)] }];
        assert!(TaskDag::new(vec![k("a")], tasks).is_err());
    }

    #[test]
    fn text_format_roundtrip() {
        let d = gen_sparselu(6, &slu_kernels()).unwrap();
        let text = d.to_text();
        assert!(text.lines().nth(1).unwrap().starts_with("0 lu0 -"));
        let back = TaskDag::from_text(&text, d.kernels.clone()).unwrap();
        assert_eq!(back, d);

        let bad = "# dop 3\n0 lu0 -\n1 lu0 0\n";
        assert!(TaskDag::from_text(bad, d.kernels.clone()).is_err());
        assert!(TaskDag::from_text("0 nope -\n", d.kernels.clone()).is_err());
    }

    #[test]
    fn ready_tracker_releases_once() {
        let d = gen_sparselu(4, &slu_kernels()).unwrap();
        let tr = ReadyTracker::new(&d);
        let mut ready = tr.roots();
        let mut done = vec![false; d.len()];
        let mut seen = 0;
        while let Some(t) = ready.pop() {
            assert!(!done[t.0 as usize]);
            done[t.0 as usize] = true;
            seen += 1;
            ready.extend(tr.complete(t));
        }
        assert_eq!(seen, d.len());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn generators_are_acyclic_with_consistent_dop(seed in 0u64..1000, n in 1usize..400, blocks in 2usize..12, width in 1usize..6, layers in 1usize..6) {
                let pool = vec![k("a"), k("b"), k("c")];
                let dags = vec![
                    gen_mixed(seed, &pool, n).unwrap(),
                    gen_chain(&k("a"), n, 1).unwrap(),
                    gen_sparselu(blocks, &slu_kernels()).unwrap(),
                    gen_forkjoin(&vec![ForkJoinLayer { kernel: k("a"), width }; layers], None).unwrap(),
                ];
                for d in dags {
                    prop_assert!(d.topo_order().is_ok());
                    prop_assert!(d.validate().is_ok());
                    let dop = d.len() as f64 / d.longest_path().unwrap() as f64;
                    prop_assert!((dop - d.declared_dop).abs() < 1e-12);
                }
            }
        }
    }
}
