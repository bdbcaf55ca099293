//! Configuration search over a kernel's lookup tables.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::KernelTable;
use crate::platform::{Configuration, GridPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// CPU + memory dynamic power plus the idle share.
    Total,
    /// CPU dynamic power plus the cluster idle share only.
    CpuOnly,
}

/// How many tasks a cell's idle power is shared with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HintPolicy {
    Fixed(f64),
    /// `clamp(tasks, 1, cluster_cores / n_cores)`: at most as many tasks as
    /// fit side by side on the cell's cluster.
    Tasks(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub objective: Objective,
    pub hint: HintPolicy,
    /// Restrict to one core-ladder index.
    pub fixed_fc: Option<usize>,
    /// Restrict to one memory-ladder index.
    pub fixed_fm: Option<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { objective: Objective::Total, hint: HintPolicy::Fixed(1.0), fixed_fc: None, fixed_fm: None }
    }
}

impl SearchSpace {
    fn fc_range(&self, t: &KernelTable) -> (usize, usize) {
        self.fixed_fc.map_or((0, t.grid.n_fc() - 1), |i| (i, i))
    }

    fn fm_range(&self, t: &KernelTable) -> (usize, usize) {
        self.fixed_fm.map_or((0, t.grid.n_fm() - 1), |i| (i, i))
    }

    fn hint_for(&self, t: &KernelTable, gp: GridPoint) -> f64 {
        match self.hint {
            HintPolicy::Fixed(h) => h.max(1.0),
            HintPolicy::Tasks(n) => {
                let fit = t.grid.cluster_cores[gp.option] as f64 / t.grid.options[gp.option].n_cores as f64;
                n.clamp(1.0, fit.max(1.0))
            }
        }
    }

    fn cells<'a>(&self, t: &'a KernelTable) -> impl Iterator<Item = GridPoint> + 'a {
        let (c0, c1) = self.fc_range(t);
        let (m0, m1) = self.fm_range(t);
        (0..t.grid.options.len()).flat_map(move |option| {
            (c0..=c1).flat_map(move |fc| (m0..=m1).map(move |fm| GridPoint { option, fc, fm }))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub config: Configuration,
    pub point: GridPoint,
    pub time: f64,
    pub power_w: f64,
    pub energy: f64,
}

pub fn estimate(t: &KernelTable, gp: GridPoint, space: &SearchSpace) -> EnergyEstimate {
    let (time, cpu_w, mem_w) = t.at(gp);
    let cfg = t.grid.config(gp);
    let cluster_idle = t.idle.cluster_w[cfg.cluster.0][gp.fc];
    let hint = space.hint_for(t, gp);
    let power_w = match space.objective {
        Objective::Total => cpu_w + mem_w + (cluster_idle + t.idle.mem_w[gp.fm]) / hint,
        Objective::CpuOnly => cpu_w + cluster_idle / hint,
    };
    EnergyEstimate { config: cfg, point: gp, time, power_w, energy: time * power_w }
}

/// `E = time x (cpu + mem + idle / hint)` at a configuration.
pub fn energy_of(t: &KernelTable, cfg: &Configuration, hint: f64) -> Result<EnergyEstimate> {
    let g = &t.grid;
    let option = g
        .options
        .iter()
        .position(|o| o.cluster == cfg.cluster && o.n_cores == cfg.n_cores)
        .ok_or_else(|| Error::InvalidConfiguration(format!("no table for {cfg}")))?;
    let fc = g.core_ladder.iter().position(|&f| (f - cfg.f_c).abs() < 1e-9);
    let fm = g.mem_ladder.iter().position(|&f| (f - cfg.f_m).abs() < 1e-9);
    let (Some(fc), Some(fm)) = (fc, fm) else {
        return Err(Error::InvalidConfiguration(format!("no table cell for {cfg}")));
    };
    let space = SearchSpace { hint: HintPolicy::Fixed(hint), ..SearchSpace::default() };
    Ok(estimate(t, GridPoint { option, fc, fm }, &space))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub cells_evaluated: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub point: GridPoint,
    pub config: Configuration,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: EnergyEstimate,
    pub stats: SearchStats,
    pub trace: Vec<TraceStep>,
}

impl SearchResult {
    pub fn config(&self) -> Configuration {
        self.best.config
    }

    /// `step cluster n f_c f_m energy`, one line per visited cell.
    pub fn trace_text(&self, cluster_names: &[String]) -> String {
        let mut out = String::new();
        for s in &self.trace {
            let c = &s.config;
            let _ = writeln!(out, "{} {} {} {:.2} {:.2} {:e}", s.step, cluster_names[c.cluster.0], c.n_cores, c.f_c, c.f_m, s.energy);
        }
        out
    }
}

/// Deterministic tie order: higher f_c, fewer cores, cluster order, lower f_m.
fn tie_order(a: &EnergyEstimate, b: &EnergyEstimate) -> Ordering {
    b.point
        .fc
        .cmp(&a.point.fc)
        .then(a.config.n_cores.cmp(&b.config.n_cores))
        .then(a.config.cluster.cmp(&b.config.cluster))
        .then(a.point.fm.cmp(&b.point.fm))
}

fn by_energy(a: &EnergyEstimate, b: &EnergyEstimate) -> Ordering {
    a.energy.total_cmp(&b.energy).then_with(|| tie_order(a, b))
}

fn by_time(a: &EnergyEstimate, b: &EnergyEstimate) -> Ordering {
    a.time.total_cmp(&b.time).then(a.energy.total_cmp(&b.energy)).then_with(|| tie_order(a, b))
}

fn min_over(
    t: &KernelTable,
    space: &SearchSpace,
    keep: impl Fn(&EnergyEstimate) -> bool,
    cmp: fn(&EnergyEstimate, &EnergyEstimate) -> Ordering,
) -> (Option<EnergyEstimate>, usize) {
    let mut n = 0;
    let best = space
        .cells(t)
        .map(|gp| {
            n += 1;
            estimate(t, gp, space)
        })
        .filter(|e| keep(e))
        .min_by(cmp);
    (best, n)
}

pub fn exhaustive_min_energy(t: &KernelTable, space: &SearchSpace) -> SearchResult {
    let (best, n) = min_over(t, space, |_| true, by_energy);
    let best = best.expect("tables are never empty");
    SearchResult { best, stats: SearchStats { cells_evaluated: n, steps: 0 }, trace: vec![] }
}

/// Fastest cell, ties by lower energy.
pub fn min_time(t: &KernelTable, space: &SearchSpace) -> SearchResult {
    let (best, n) = min_over(t, space, |_| true, by_time);
    let best = best.expect("tables are never empty");
    SearchResult { best, stats: SearchStats { cells_evaluated: n, steps: 0 }, trace: vec![] }
}

struct Evaluator<'a> {
    table: &'a KernelTable,
    space: &'a SearchSpace,
    seen: Vec<Option<EnergyEstimate>>,
    evaluated: usize,
}

impl Evaluator<'_> {
    fn get(&mut self, gp: GridPoint) -> EnergyEstimate {
        let i = self.table.grid.index(gp);
        if let Some(e) = self.seen[i] {
            return e;
        }
        let e = estimate(self.table, gp, self.space);
        self.seen[i] = Some(e);
        self.evaluated += 1;
        e
    }
}

/// Corner-seeded steepest descent over the `(f_c, f_m)` grid of the
/// `<cluster, n_cores>` table that wins the most corner comparisons.
pub fn steepest_descent_min_energy(t: &KernelTable, space: &SearchSpace) -> SearchResult {
    if t.grid.n_fc() < 2 || t.grid.n_fm() < 2 {
        return exhaustive_min_energy(t, space);
    }
    let (c0, c1) = space.fc_range(t);
    let (m0, m1) = space.fm_range(t);
    let mut ev = Evaluator { table: t, space, seen: vec![None; t.grid.cells()], evaluated: 0 };
    let n_opt = t.grid.options.len();
    let corners = [(c0, m0), (c0, m1), (c1, m0), (c1, m1)];
    let corner_e: Vec<[EnergyEstimate; 4]> = (0..n_opt)
        .map(|option| corners.map(|(fc, fm)| ev.get(GridPoint { option, fc, fm })))
        .collect();

    let mut wins = vec![0usize; n_opt];
    for pos in 0..4 {
        let w = (0..n_opt).min_by(|&a, &b| by_energy(&corner_e[a][pos], &corner_e[b][pos])).expect("options");
        wins[w] += 1;
    }
    let total = |o: usize| corner_e[o].iter().map(|e| e.energy).sum::<f64>();
    let chosen = (0..n_opt)
        .min_by(|&a, &b| wins[b].cmp(&wins[a]).then(total(a).total_cmp(&total(b))).then(a.cmp(&b)))
        .expect("options");

    let mut cur = *corner_e[chosen].iter().min_by(|a, b| by_energy(a, b)).expect("corners");
    let mut trace = vec![TraceStep { step: 0, point: cur.point, config: cur.config, energy: cur.energy }];
    let mut steps = 0;
    loop {
        let p = cur.point;
        let mut best_nb: Option<EnergyEstimate> = None;
        for dc in -1i64..=1 {
            for dm in -1i64..=1 {
                if dc == 0 && dm == 0 {
                    continue;
                }
                let fc = p.fc as i64 + dc;
                let fm = p.fm as i64 + dm;
                if fc < c0 as i64 || fc > c1 as i64 || fm < m0 as i64 || fm > m1 as i64 {
                    continue;
                }
                let e = ev.get(GridPoint { option: chosen, fc: fc as usize, fm: fm as usize });
                if best_nb.is_none_or(|b| by_energy(&e, &b) == Ordering::Less) {
                    best_nb = Some(e);
                }
            }
        }
        match best_nb {
            Some(nb) if nb.energy < cur.energy => {
                steps += 1;
                cur = nb;
                trace.push(TraceStep { step: steps, point: cur.point, config: cur.config, energy: cur.energy });
            }
            _ => break,
        }
    }
    SearchResult { best: cur, stats: SearchStats { cells_evaluated: ev.evaluated, steps }, trace }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Descent,
}

pub fn min_energy(t: &KernelTable, space: &SearchSpace, mode: SearchMode) -> SearchResult {
    match mode {
        SearchMode::Exhaustive => exhaustive_min_energy(t, space),
        SearchMode::Descent => steepest_descent_min_energy(t, space),
    }
}

/// Cheapest cell at least `speedup` times faster than the min-energy cell;
/// the fastest cell when none qualifies.
pub fn constrained_min_energy(t: &KernelTable, space: &SearchSpace, speedup: f64, mode: SearchMode) -> Result<SearchResult> {
    if !(speedup >= 1.0) {
        return Err(Error::InvalidInput(format!("speedup target must be >= 1, got {speedup}")));
    }
    let base = min_energy(t, space, mode);
    if speedup == 1.0 {
        return Ok(base);
    }
    let limit = base.best.time / speedup;
    let (best, n) = min_over(t, space, |e| e.time <= limit, by_energy);
    let stats = SearchStats { cells_evaluated: base.stats.cells_evaluated + n, steps: base.stats.steps };
    Ok(match best {
        Some(best) => SearchResult { best, stats, trace: vec![] },
        None => {
            let fastest = min_time(t, space);
            SearchResult { best: fastest.best, stats: SearchStats { cells_evaluated: stats.cells_evaluated + fastest.stats.cells_evaluated, ..stats }, trace: vec![] }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{IdlePowerTable, TableGrid};
    use crate::platform::{default_tx2, ClusterId, CoreOption, KernelParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn no_idle(g: &TableGrid) -> IdlePowerTable {
        let clusters = g.options.iter().map(|o| o.cluster.0).max().unwrap() + 1;
        IdlePowerTable { cluster_w: vec![vec![0.0; g.n_fc()]; clusters], mem_w: vec![0.0; g.n_fm()] }
    }

    fn grid(n_opt: usize, nfc: usize, nfm: usize) -> TableGrid {
        TableGrid {
            options: (0..n_opt).map(|i| CoreOption { cluster: ClusterId(i), n_cores: 1 }).collect(),
            cluster_cores: vec![1; n_opt],
            core_ladder: (0..nfc).map(|i| 1.0 + i as f64).collect(),
            mem_ladder: (0..nfm).map(|i| 1.0 + i as f64).collect(),
        }
    }

    fn planted(g: TableGrid, f: impl Fn(GridPoint) -> f64) -> KernelTable {
        let idle = no_idle(&g);
        KernelTable::from_fn("k", g, idle, |gp| (1.0, f(gp), 0.0))
    }

    #[test]
    fn energy_is_power_times_time() {
        let g = grid(1, 1, 1);
        let t = KernelTable::from_fn("k", g.clone(), no_idle(&g), |_| (2.0, 2.0, 1.0));
        let e = energy_of(&t, &g.config(GridPoint { option: 0, fc: 0, fm: 0 }), 1.0).unwrap();
        assert_eq!(e.energy, 6.0);
        assert!(energy_of(&t, &Configuration { cluster: ClusterId(0), n_cores: 1, f_c: 9.0, f_m: 1.0 }, 1.0).is_err());
    }

    #[test]
    fn hint_scales_idle_share() {
        let g = grid(1, 1, 1);
        let idle = IdlePowerTable { cluster_w: vec![vec![0.0]], mem_w: vec![4.0] };
        let t = KernelTable::from_fn("k", g.clone(), idle, |_| (1.0, 0.0, 0.0));
        let cfg = g.config(GridPoint { option: 0, fc: 0, fm: 0 });
        assert_eq!(energy_of(&t, &cfg, 1.0).unwrap().energy, 4.0);
        assert_eq!(energy_of(&t, &cfg, 2.0).unwrap().energy, 2.0);
    }

    #[test]
    fn exhaustive_finds_planted_minimum_and_single_cell() {
        let t = planted(grid(1, 1, 1), |_| 3.0);
        let r = exhaustive_min_energy(&t, &SearchSpace::default());
        assert_eq!(r.stats.cells_evaluated, 1);
        let t = planted(grid(3, 6, 4), |gp| if gp == (GridPoint { option: 1, fc: 2, fm: 3 }) { 0.5 } else { 1.0 });
        let r = exhaustive_min_energy(&t, &SearchSpace::default());
        assert_eq!(r.best.point, GridPoint { option: 1, fc: 2, fm: 3 });
        assert_eq!(r.stats.cells_evaluated, 72);
    }

    #[test]
    fn ties_prefer_high_fc_then_few_cores_then_low_fm() {
        let t = planted(grid(2, 3, 3), |_| 1.0);
        let r = exhaustive_min_energy(&t, &SearchSpace::default());
        assert_eq!(r.best.point, GridPoint { option: 0, fc: 2, fm: 0 });
    }

    #[test]
    fn descent_on_convex_table_matches_exhaustive() {
        let t = planted(grid(3, 10, 5), |gp| {
            let (a, b) = (gp.fc as f64 - 3.3, gp.fm as f64 - 1.2);
            1.0 + 0.3 * gp.option as f64 + a * a + 2.0 * b * b + 0.5 * a * b
        });
        let d = steepest_descent_min_energy(&t, &SearchSpace::default());
        let e = exhaustive_min_energy(&t, &SearchSpace::default());
        assert_eq!(d.best.point, e.best.point);
        assert!(d.stats.cells_evaluated < e.stats.cells_evaluated);
        assert_eq!(d.trace.last().unwrap().point, d.best.point);
    }

    #[test]
    fn two_by_two_descent_is_min_corner() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let vals: Vec<f64> = (0..8).map(|_| rng.random()).collect();
            let t = planted(grid(2, 2, 2), |gp| vals[gp.option * 4 + gp.fc * 2 + gp.fm]);
            let d = steepest_descent_min_energy(&t, &SearchSpace::default());
            let corners: Vec<f64> = (0..4).map(|i| vals[d.best.point.option * 4 + i]).collect();
            assert_eq!(d.best.energy, corners.iter().cloned().fold(f64::INFINITY, f64::min));
        }
    }

    #[test]
    fn constrained_examples() {
        // time falls with fc, energy rises with fc
        let g = grid(1, 5, 1);
        let t = KernelTable::from_fn("k", g.clone(), no_idle(&g), |gp| {
            let f = g.core_ladder[gp.fc];
            (10.0 / f, f * f / 10.0, 0.0)
        });
        let sp = SearchSpace::default();
        let base = exhaustive_min_energy(&t, &sp);
        let one = constrained_min_energy(&t, &sp, 1.0, SearchMode::Exhaustive).unwrap();
        assert_eq!(one.best.point, base.best.point);
        let c = constrained_min_energy(&t, &sp, 2.0, SearchMode::Exhaustive).unwrap();
        assert_eq!(c.best.point.fc, 1);
        let far = constrained_min_energy(&t, &sp, 100.0, SearchMode::Exhaustive).unwrap();
        assert_eq!(far.best.point, min_time(&t, &sp).best.point);
        assert!(constrained_min_energy(&t, &sp, 0.5, SearchMode::Exhaustive).is_err());
    }

    fn bmod() -> KernelParams {
        KernelParams { name: "bmod".into(), ops: 3.4 * 2.04 * 0.02, bytes: 0.00015, kappa: 0.8, mu: 0.1 }
    }

    #[test]
    fn oracle_bmod_selections() {
        let p = default_tx2();
        let t = KernelTable::from_oracle(&p, &bmod());
        let r = exhaustive_min_energy(&t, &SearchSpace::default());
        assert_eq!(p.spec.describe(&r.config()), "<denver, 2, 1.11GHz, 0.80GHz>");

        let steer = SearchSpace { objective: Objective::CpuOnly, fixed_fm: Some(4), ..SearchSpace::default() };
        let r = exhaustive_min_energy(&t, &steer);
        assert_eq!(p.spec.describe(&r.config()), "<denver, 2, 1.11GHz, 1.87GHz>");

        let erase = SearchSpace { fixed_fc: Some(9), ..steer };
        let r = exhaustive_min_energy(&t, &erase);
        assert_eq!((r.config().cluster, r.config().n_cores), (ClusterId(0), 2));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn descent_never_beats_exhaustive(seed in 0u64..10_000, n_opt in 1usize..5, nfc in 2usize..11, nfm in 2usize..6) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let vals: Vec<f64> = (0..n_opt * nfc * nfm).map(|_| rng.random_range(0.1..5.0)).collect();
                let g = grid(n_opt, nfc, nfm);
                let t = planted(g.clone(), |gp| vals[g.index(gp)]);
                let sp = SearchSpace::default();
                let d = steepest_descent_min_energy(&t, &sp);
                let e = exhaustive_min_energy(&t, &sp);
                prop_assert!(d.best.energy >= e.best.energy);
                prop_assert!(d.stats.cells_evaluated <= e.stats.cells_evaluated);
                let again = steepest_descent_min_energy(&t, &sp);
                prop_assert_eq!(again, d);
                let c1 = constrained_min_energy(&t, &sp, 1.0, SearchMode::Exhaustive).unwrap();
                prop_assert_eq!(c1.best.point, e.best.point);
            }
        }
    }
}
