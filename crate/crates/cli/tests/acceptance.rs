//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use joss_cli::{compare_reports, Prepared};
use joss_core::baselines::SchedulerKind;
use joss_core::dag::{gen_chain, gen_mixed, gen_sparselu, gen_stencil, KernelId, SparseLuKernels, TaskDag};
use joss_core::models::{
    accuracy, build_tables, estimate_mb, fit_from_oracle, synthetic_ladder, KernelProfile, KernelTable, ModelSet,
};
use joss_core::platform::{default_tx2, GridPoint, KernelParams, Platform};
use joss_core::sched::{Goal, JossPolicy, SchedParams, Variant};
use joss_core::search::{self, SearchSpace};
use joss_core::sim::{run, verify_schedule, verify_trace, RunOutcome, SimOptions};
use joss_core::workload::{build_preset, random_kernels, SUITE};

fn verdict(n: u32, what: &str, ok: bool, detail: String, elapsed: Duration) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[acceptance] criterion {n} {tag}: {what} ({detail}; {:.2}s)", elapsed.as_secs_f64());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn setup() -> (Platform, ModelSet) {
    let p = default_tx2();
    let m = fit_from_oracle(&p, 0).unwrap();
    (p, m)
}

fn joss(goal: Goal, m: &ModelSet) -> JossPolicy {
    JossPolicy::new(Variant::Joss, SchedParams { goal, ..SchedParams::default() }, m.clone())
}

fn c1_memory_boundness_round_trip() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ladder = default_tx2().spec.core_ladder().to_vec();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mb0: f64 = rng.random();
        let time = 10f64.powf(rng.random_range(-5.0..1.0));
        let i = rng.random_range(1..ladder.len());
        let j = rng.random_range(0..i);
        let (f, fp) = (ladder[i], ladder[j]);
        // only the computation share stretches with the core clock
        let time_prime = time * ((1.0 - mb0) * f / fp + mb0);
        let mb = estimate_mb(time, time_prime, f, fp).unwrap();
        worst = worst.max((mb - mb0).abs());
    }
    let el = t0.elapsed();
    verdict(1, "MB estimate round-trip", worst <= 1e-9 && el < Duration::from_secs(1), format!("max error {worst:.2e}"), el);
}

fn c2_model_accuracy() {
    let t0 = Instant::now();
    let (p, m) = setup();
    let mut kernels = synthetic_ladder(&p);
    kernels.extend(random_kernels(11, 10));
    let (mut at, mut ac, mut am) = (vec![], vec![], vec![]);
    for k in &kernels {
        let table = build_tables(&KernelProfile::from_oracle(&p, k).unwrap(), &m, &p.spec).unwrap();
        let truth = KernelTable::from_oracle(&p, k);
        for i in 0..table.time.len() {
            at.push(accuracy(truth.time[i], table.time[i]).unwrap());
            ac.push(accuracy(truth.cpu_w[i], table.cpu_w[i]).unwrap());
            am.push(accuracy(truth.mem_w[i], table.mem_w[i]).unwrap());
        }
    }
    let (mt, mc, mm) = (median(at), median(ac), median(am));
    let el = t0.elapsed();
    let ok = mt >= 0.95 && mc >= 0.88 && mm >= 0.78 && el < Duration::from_secs(30);
    verdict(2, "model accuracy", ok, format!("median time {mt:.4}, cpu {mc:.4}, mem {mm:.4} over {} kernels", kernels.len()), el);
}

fn c3_descent_vs_exhaustive() {
    let t0 = Instant::now();
    let (p, m) = setup();
    let mut kernels = synthetic_ladder(&p);
    kernels.extend(random_kernels(5, 170));
    let space = SearchSpace::default();
    let (mut close, mut reduction) = (0usize, 0.0);
    for k in &kernels {
        let t = build_tables(&KernelProfile::from_oracle(&p, k).unwrap(), &m, &p.spec).unwrap();
        let ex = search::exhaustive_min_energy(&t, &space);
        let de = search::steepest_descent_min_energy(&t, &space);
        assert!(de.best.energy >= ex.best.energy);
        if de.best.energy <= 1.03 * ex.best.energy {
            close += 1;
        }
        reduction += 1.0 - de.stats.cells_evaluated as f64 / ex.stats.cells_evaluated as f64;
    }
    let n = kernels.len();
    let share = close as f64 / n as f64;
    let reduction = reduction / n as f64;
    let el = t0.elapsed();
    let ok = n >= 200 && share >= 0.95 && reduction >= 0.5 && el < Duration::from_secs(30);
    verdict(3, "descent vs exhaustive", ok, format!("{close}/{n} within 3%, mean evaluation reduction {reduction:.3}"), el);
}

fn c4_scheduler_ordering() {
    let t0 = Instant::now();
    let (platform, models) = setup();
    let kinds = SchedulerKind::ALL;
    let mut sums = vec![0.0; kinds.len()];
    let mut violations = Vec::new();
    let idx = |k: SchedulerKind| kinds.iter().position(|&x| x == k).unwrap();
    for name in SUITE {
        let dag = build_preset(name).unwrap();
        let p = Prepared { platform: platform.clone(), models: models.clone(), dag, hash: String::new() };
        let reports = compare_reports(&p, &kinds, Goal::MinEnergy, 1).unwrap();
        let base = reports[idx(SchedulerKind::Grws)].total_energy_j;
        let j = reports[idx(SchedulerKind::Joss)].total_energy_j;
        for (k, r) in kinds.iter().zip(&reports) {
            sums[idx(*k)] += r.total_energy_j / base / SUITE.len() as f64;
            if j > 1.01 * r.total_energy_j {
                violations.push(format!("{name}: joss {j:.2} J > {} {:.2} J", k.label(), r.total_energy_j));
            }
        }
        let norm: Vec<String> =
            kinds.iter().zip(&reports).map(|(k, r)| format!("{}={:.3}", k.label(), r.total_energy_j / base)).collect();
        println!("  {name:14} {}", norm.join(" "));
    }
    let avg = |k| sums[idx(k)];
    let ordered = avg(SchedulerKind::Joss) < avg(SchedulerKind::JossNomem)
        && avg(SchedulerKind::JossNomem) < avg(SchedulerKind::Steer)
        && avg(SchedulerKind::Steer) < avg(SchedulerKind::Grws);
    let el = t0.elapsed();
    let detail = format!(
        "suite average joss {:.3} < joss-nomem {:.3} < steer {:.3} < grws {:.3}: {ordered}; per-workload violations: {}",
        avg(SchedulerKind::Joss),
        avg(SchedulerKind::JossNomem),
        avg(SchedulerKind::Steer),
        avg(SchedulerKind::Grws),
        if violations.is_empty() { "none".to_string() } else { violations.join("; ") }
    );
    verdict(4, "scheduler ordering", ordered && violations.is_empty() && el < Duration::from_secs(300), detail, el);
}

/// Brute-force check of one constrained selection; returns an error text.
fn check_constrained(pol: &JossPolicy, k: KernelId, target: f64) -> Option<String> {
    let table = pol.table(k)?;
    let sel = pol.selection(k)?;
    let (space, mode) = pol.selection_space(k).expect("selected kernels record their space");
    let base = search::min_energy(table, &space, mode);
    let limit = base.best.time / target;
    let all: Vec<GridPoint> = table.grid.points().collect();
    let est = |gp| search::estimate(table, gp, &space);
    let feasible: Vec<_> = all.iter().map(|&gp| est(gp)).filter(|e| e.time <= limit).collect();
    let got = est(sel.best.point);
    if feasible.is_empty() {
        let fastest = all.iter().map(|&gp| est(gp).time).fold(f64::INFINITY, f64::min);
        return (got.time != fastest).then(|| format!("{}: fallback time {} != fastest {}", table.kernel, got.time, fastest));
    }
    let best = feasible.iter().map(|e| e.energy).fold(f64::INFINITY, f64::min);
    if got.time > limit || got.energy != best {
        return Some(format!("{}: selected {} J, feasible optimum {} J", table.kernel, got.energy, best));
    }
    None
}

fn c5_constrained_mode() {
    let t0 = Instant::now();
    let (p, m) = setup();
    let opts = SimOptions::seeded(1);
    let mut problems = Vec::new();
    let (mut checked, mut fallbacks, mut compared) = (0, 0, 0);
    for name in SUITE {
        let dag = build_preset(name).unwrap();
        let base = run(&dag, &mut joss(Goal::MinEnergy, &m), &p, &opts).unwrap().report.makespan_s;
        let oracle_base =
            run(&dag, &mut joss(Goal::MinEnergy, &m).with_oracle_tables(), &p, &opts).unwrap().report.makespan_s;
        for target in [1.2, 1.4] {
            let mut pol = joss(Goal::Speedup(target), &m);
            let got = base / run(&dag, &mut pol, &p, &opts).unwrap().report.makespan_s;
            for k in 0..dag.kernels.len() {
                let k = KernelId(k as u16);
                if pol.selection(k).is_some() {
                    checked += 1;
                }
                if let Some(e) = check_constrained(&pol, k, target) {
                    problems.push(e);
                }
            }
            let mut opol = joss(Goal::Speedup(target), &m).with_oracle_tables();
            let oracle = oracle_base / run(&dag, &mut opol, &p, &opts).unwrap().report.makespan_s;
            for k in 0..dag.kernels.len() {
                let k = KernelId(k as u16);
                let t = opol.table(k).unwrap();
                let (space, mode) = opol.selection_space(k).unwrap();
                let limit = search::min_energy(t, &space, mode).best.time / target;
                if t.grid.points().all(|gp| search::estimate(t, gp, &space).time > limit) {
                    fallbacks += 1;
                }
                if let Some(e) = check_constrained(&opol, k, target) {
                    problems.push(e);
                }
            }
            println!("  {name:14} target {target}: joss {got:.3}, oracle selection {oracle:.3}");
            if oracle >= target {
                compared += 1;
                if got < 0.95 * target {
                    problems.push(format!("{name} at {target}: achieved {got:.3} while the oracle reached {oracle:.3}"));
                }
            }
        }
    }
    let el = t0.elapsed();
    let detail = format!(
        "{checked} selections verified, {fallbacks} infeasible fallbacks, {compared} end-to-end comparisons; problems: {}",
        if problems.is_empty() { "none".to_string() } else { problems.join("; ") }
    );
    verdict(5, "constrained mode", problems.is_empty() && checked > 0 && el < Duration::from_secs(300), detail, el);
}

fn closure_error(out: &RunOutcome) -> f64 {
    let r = &out.report;
    let attributed: f64 = out.task_energy_j.iter().sum();
    ((attributed + r.unattributed_idle_j) - r.total_energy_j).abs() / r.total_energy_j
}

fn c6_energy_closure() {
    let t0 = Instant::now();
    let (p, m) = setup();
    let mut worst: f64 = 0.0;
    for name in SUITE {
        let dag = build_preset(name).unwrap();
        for kind in SchedulerKind::ALL {
            let mut pol = kind.build(SchedParams::default(), Some(&m)).unwrap();
            let out = run(&dag, pol.as_mut(), &p, &SimOptions::seeded(1)).unwrap();
            worst = worst.max(closure_error(&out));
        }
    }
    let el = t0.elapsed();
    verdict(6, "energy accounting closure", worst <= 1e-9, format!("worst relative error {worst:.2e} over 36 runs"), el);
}

fn c7_table_sizing() {
    let t0 = Instant::now();
    let (p, m) = setup();
    let spec = &p.spec;
    let expected: usize = 3
        * spec.clusters.iter().map(|c| c.core_count.ilog2() as usize + 1).sum::<usize>()
        * spec.core_ladder().len()
        * spec.mem_ladder().len();
    let table = build_tables(&KernelProfile::from_oracle(&p, &synthetic_ladder(&p)[0]).unwrap(), &m, spec).unwrap();
    let mut wide = p.clone();
    wide.spec.clusters[1].core_count = 8;
    wide.truth.clusters[1].eff.push(0.85);
    wide.truth.clusters[1].bw_gbps.push(7.5);
    let wide_expected = 3 * (2 + 4) * 10 * 5;
    let ok = expected == 750
        && spec.table_entries_per_kernel() == expected
        && table.entries() == expected
        && wide.validate().is_ok()
        && wide.spec.table_entries_per_kernel() == wide_expected;
    verdict(
        7,
        "lookup-table sizing",
        ok,
        format!("TX2 {} entries per kernel, 4+8-core variant {}", table.entries(), wide.spec.table_entries_per_kernel()),
        t0.elapsed(),
    );
}

fn c8_determinism_across_processes() {
    let t0 = Instant::now();
    let bin = env!("CARGO_BIN_EXE_joss");
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let cases = [("sparselu", "joss", "min_energy"), ("mixed", "aequitas", "min_energy"), ("stencil", "steer", "speedup:1.2")];
    for (w, s, g) in cases {
        let mut outputs = Vec::new();
        for i in 0..2 {
            let out = dir.path().join(format!("{w}-{s}-{i}"));
            let st = Command::new(bin)
                .args(["run", "--workload", w, "--scheduler", s, "--goal", g, "--seed", "42", "--trace", "--out"])
                .arg(&out)
                .stdout(Stdio::null())
                .status()
                .unwrap();
            assert!(st.success());
            outputs.push((std::fs::read(out.join("report.json")).unwrap(), std::fs::read(out.join("trace.txt")).unwrap()));
        }
        if outputs[0] != outputs[1] {
            mismatches.push(format!("{w}/{s}/{g}"));
        }
    }
    let detail = format!("{} configurations run twice; mismatches: {mismatches:?}", cases.len());
    verdict(8, "determinism", mismatches.is_empty(), detail, t0.elapsed());
}

fn random_dag(i: u64, pool: &[KernelParams]) -> TaskDag {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
    let n = if i == 0 { 50_000 } else { 10f64.powf(rng.random_range(1.0..4.2)) as usize };
    let k = |rng: &mut ChaCha8Rng| pool[rng.random_range(0..pool.len())].clone();
    match i % 5 {
        0 | 1 => gen_mixed(i, pool, n.max(1)).unwrap(),
        2 => {
            let dop = rng.random_range(1..=8usize);
            gen_chain(&k(&mut rng), n.div_ceil(dop) * dop, dop).unwrap()
        }
        3 => {
            let width = rng.random_range(1..=24usize);
            gen_stencil(&k(&mut rng), width, n.div_ceil(width)).unwrap()
        }
        _ => {
            let kernels = SparseLuKernels { lu0: k(&mut rng), fwd: k(&mut rng), bdiv: k(&mut rng), bmod: k(&mut rng) };
            let mut kernels = kernels;
            for (j, kp) in [&mut kernels.lu0, &mut kernels.fwd, &mut kernels.bdiv, &mut kernels.bmod].into_iter().enumerate() {
                kp.name = format!("{}-{j}", kp.name);
            }
            gen_sparselu(rng.random_range(2..=30usize), &kernels).unwrap()
        }
    }
}

fn c9_dag_execution_correctness() {
    let t0 = Instant::now();
    let (p, m) = setup();
    let mut pool = random_kernels(77, 12);
    // a few tiny kernels so coarsening is exercised
    pool.push(KernelParams { name: "tiny".into(), ops: 2e-4, bytes: 1e-6, kappa: 0.8, mu: 0.1 });
    pool.push(KernelParams { name: "tiny-mem".into(), ops: 1e-5, bytes: 2e-6, kappa: 0.9, mu: 0.1 });
    let mut failures = Vec::new();
    let (mut runs, mut tasks, mut largest) = (0, 0, 0);
    for i in 0..50 {
        let dag = random_dag(i, &pool);
        largest = largest.max(dag.len());
        for kind in SchedulerKind::ALL {
            let mut pol = kind.build(SchedParams::default(), Some(&m)).unwrap();
            let opts = SimOptions { trace: true, ..SimOptions::seeded(i) };
            runs += 1;
            tasks += dag.len();
            let out = match run(&dag, pol.as_mut(), &p, &opts) {
                Ok(o) => o,
                Err(e) => {
                    failures.push(format!("dag {i} {}: {e}", kind.label()));
                    continue;
                }
            };
            let checks = [
                verify_schedule(&dag, &out.records).err().map(|e| e.to_string()),
                verify_trace(&dag, out.trace.as_deref().unwrap()).err().map(|e| e.to_string()),
                out.work_fraction.iter().map(|w| (w - 1.0).abs()).reduce(f64::max).filter(|&d| d > 1e-9).map(|d| format!("work fraction off by {d:.2e} (makespan {})", out.report.makespan_s)),
            ];
            failures.extend(checks.into_iter().flatten().map(|e| format!("dag {i} {}: {e}", kind.label())));
        }
    }
    let el = t0.elapsed();
    let detail = format!(
        "{runs} runs, {tasks} task executions, largest DAG {largest}; failures: {}",
        if failures.is_empty() { "none".to_string() } else { failures.join("; ") }
    );
    verdict(9, "DAG execution correctness", failures.is_empty() && el < Duration::from_secs(300), detail, el);
}

fn main() -> std::process::ExitCode {
    let checks: [(&str, fn()); 9] = [
        ("c1_memory_boundness_round_trip", c1_memory_boundness_round_trip),
        ("c2_model_accuracy", c2_model_accuracy),
        ("c3_descent_vs_exhaustive", c3_descent_vs_exhaustive),
        ("c4_scheduler_ordering", c4_scheduler_ordering),
        ("c5_constrained_mode", c5_constrained_mode),
        ("c6_energy_closure", c6_energy_closure),
        ("c7_table_sizing", c7_table_sizing),
        ("c8_determinism_across_processes", c8_determinism_across_processes),
        ("c9_dag_execution_correctness", c9_dag_execution_correctness),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (name, check) in checks {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        if std::panic::catch_unwind(check).is_err() {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        println!("[acceptance] failed: {}", failed.join(", "));
        std::process::ExitCode::FAILURE
    }
}
