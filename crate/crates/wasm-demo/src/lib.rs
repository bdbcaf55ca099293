//! Browser bindings. Every export returns a JSON string; errors come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use std::cell::OnceCell;

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use joss_core::baselines::SchedulerKind;
use joss_core::models::{build_tables, fit_from_oracle, KernelProfile, ModelSet, TableGrid};
use joss_core::platform::{default_tx2, KernelParams, Platform};
use joss_core::sched::{Goal, SchedParams};
use joss_core::search::{self, SearchSpace};
use joss_core::sim::{run, SimOptions};
use joss_core::workload::{build_preset, SUITE};

thread_local! {
    static MODELS: OnceCell<ModelSet> = const { OnceCell::new() };
}

fn with_models<T>(f: impl FnOnce(&ModelSet) -> T) -> T {
    MODELS.with(|m| f(m.get_or_init(|| fit_from_oracle(&default_tx2(), 0).expect("built-in platform fits"))))
}

fn kernel(ops: f64, bytes: f64, kappa: f64, mu: f64) -> KernelParams {
    KernelParams { name: "custom".into(), ops, bytes, kappa, mu }
}

fn respond<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn option_labels(p: &Platform, grid: &TableGrid) -> Vec<String> {
    grid.options.iter().map(|o| format!("{} x{}", p.spec.cluster(o.cluster).name, o.n_cores)).collect()
}

#[derive(Serialize)]
pub struct Grid {
    pub options: Vec<String>,
    pub core_ladder: Vec<f64>,
    pub mem_ladder: Vec<f64>,
    /// `energy[option][fc][fm]`, joules per task including idle power.
    pub energy: Vec<Vec<Vec<f64>>>,
    pub time: Vec<Vec<Vec<f64>>>,
    pub best: [usize; 3],
}

pub fn energy_grid_of(k: &KernelParams) -> Result<Grid, String> {
    k.validate().map_err(|e| e.to_string())?;
    let p = default_tx2();
    let grid = TableGrid::from_spec(&p.spec);
    let mut energy = vec![vec![vec![0.0; grid.n_fm()]; grid.n_fc()]; grid.options.len()];
    let mut time = energy.clone();
    let mut best = ([0; 3], f64::INFINITY);
    for gp in grid.points() {
        let cfg = p.spec.config(gp);
        let c = p.evaluate_point(k, gp);
        let idle = p.cluster_idle_power(cfg.cluster, cfg.f_c) + p.mem_idle_power(cfg.f_m);
        let e = c.time * (c.cpu_w + c.mem_w + idle);
        energy[gp.option][gp.fc][gp.fm] = e;
        time[gp.option][gp.fc][gp.fm] = c.time;
        if e < best.1 {
            best = ([gp.option, gp.fc, gp.fm], e);
        }
    }
    Ok(Grid {
        options: option_labels(&p, &grid),
        core_ladder: grid.core_ladder,
        mem_ladder: grid.mem_ladder,
        energy,
        time,
        best: best.0,
    })
}

#[derive(Serialize)]
pub struct Step {
    pub option: usize,
    pub fc: usize,
    pub fm: usize,
    pub energy: f64,
}

#[derive(Serialize)]
pub struct Descent {
    pub options: Vec<String>,
    pub core_ladder: Vec<f64>,
    pub mem_ladder: Vec<f64>,
    pub path: Vec<Step>,
    pub descent_cells: usize,
    pub exhaustive: Step,
    pub exhaustive_cells: usize,
}

/// Steepest descent over the model-built table next to the exhaustive optimum.
pub fn descent_of(k: &KernelParams) -> Result<Descent, String> {
    k.validate().map_err(|e| e.to_string())?;
    let p = default_tx2();
    let table = with_models(|m| {
        let prof = KernelProfile::from_oracle(&p, k)?;
        build_tables(&prof, m, &p.spec)
    })
    .map_err(|e| e.to_string())?;
    let space = SearchSpace::default();
    let sd = search::steepest_descent_min_energy(&table, &space);
    let ex = search::exhaustive_min_energy(&table, &space);
    let step = |gp: joss_core::platform::GridPoint, energy| Step { option: gp.option, fc: gp.fc, fm: gp.fm, energy };
    Ok(Descent {
        options: option_labels(&p, &table.grid),
        core_ladder: table.grid.core_ladder.clone(),
        mem_ladder: table.grid.mem_ladder.clone(),
        path: sd.trace.iter().map(|s| step(s.point, s.energy)).collect(),
        descent_cells: sd.stats.cells_evaluated,
        exhaustive: step(ex.best.point, ex.best.energy),
        exhaustive_cells: ex.stats.cells_evaluated,
    })
}

#[derive(Serialize)]
pub struct Row {
    pub scheduler: String,
    pub energy_j: f64,
    pub makespan_s: f64,
    pub normalized_energy: f64,
    pub normalized_time: f64,
}

pub fn compare_on(workload: &str, goal: &str, seed: u64) -> Result<Vec<Row>, String> {
    let goal: Goal = goal.parse().map_err(|e: joss_core::error::Error| e.to_string())?;
    let dag = build_preset(workload).map_err(|e| e.to_string())?;
    let p = default_tx2();
    let params = SchedParams { goal, ..SchedParams::default() };
    let mut reports = Vec::new();
    for kind in SchedulerKind::ALL {
        let mut pol = with_models(|m| kind.build(params, Some(m))).map_err(|e| e.to_string())?;
        let out = run(&dag, pol.as_mut(), &p, &SimOptions::seeded(seed)).map_err(|e| e.to_string())?;
        reports.push(out.report);
    }
    let base = reports.iter().find(|r| r.scheduler == "grws").ok_or("no grws run")?;
    let (be, bt) = (base.total_energy_j, base.makespan_s);
    Ok(reports
        .iter()
        .map(|r| Row {
            scheduler: r.scheduler.clone(),
            energy_j: r.total_energy_j,
            makespan_s: r.makespan_s,
            normalized_energy: r.total_energy_j / be,
            normalized_time: r.makespan_s / bt,
        })
        .collect())
}

#[wasm_bindgen]
pub fn workloads() -> String {
    respond(Ok(SUITE))
}

#[wasm_bindgen]
pub fn energy_grid(ops: f64, bytes: f64, kappa: f64, mu: f64) -> String {
    respond(energy_grid_of(&kernel(ops, bytes, kappa, mu)))
}

#[wasm_bindgen]
pub fn descent(ops: f64, bytes: f64, kappa: f64, mu: f64) -> String {
    respond(descent_of(&kernel(ops, bytes, kappa, mu)))
}

#[wasm_bindgen]
pub fn compare(workload: &str, goal: &str, seed: u32) -> String {
    respond(compare_on(workload, goal, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_best_is_minimal() {
        let g = energy_grid_of(&kernel(0.004, 0.04, 0.8, 0.1)).unwrap();
        let [o, c, m] = g.best;
        let min = g.energy.iter().flatten().flatten().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(g.energy[o][c][m], min);
        assert_eq!(g.energy.len() * g.core_ladder.len() * g.mem_ladder.len(), 250);
    }

    #[test]
    fn descent_path_decreases() {
        let d = descent_of(&kernel(0.015, 0.012, 0.6, 0.2)).unwrap();
        assert!(d.path.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!(d.descent_cells < d.exhaustive_cells);
        assert!(d.path.last().unwrap().energy >= d.exhaustive.energy);
    }

    #[test]
    fn errors_are_json() {
        let v: serde_json::Value = serde_json::from_str(&energy_grid(-1.0, 0.0, 0.5, 0.0)).unwrap();
        assert!(v.get("error").is_some());
        let v: serde_json::Value = serde_json::from_str(&compare("nope", "min_energy", 1)).unwrap();
        assert!(v["error"].as_str().unwrap().contains("nope"));
    }

    #[test]
    fn compare_is_normalized() {
        let rows = compare_on("memory-chain", "min_energy", 1).unwrap();
        assert_eq!(rows.len(), SchedulerKind::ALL.len());
        let g = rows.iter().find(|r| r.scheduler == "grws").unwrap();
        assert_eq!((g.normalized_energy, g.normalized_time), (1.0, 1.0));
    }
}
