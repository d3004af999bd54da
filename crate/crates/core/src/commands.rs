//! The four pipeline commands behind the `sdgem` binary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::efficiency::{effect_report, Arm, EffectReport};
use crate::error::{Error, Result};
use crate::gem::{solve_gem, Snapshot, TransportSolution, DEFAULT_LAMBDA};
use crate::graph::CellGraph;
use crate::indices::{demand_index, local_gaps, market_indices, supply_index, DEFAULT_DELTA, DEFAULT_EPSILON};
use crate::inference::{
    arm_samples, run_standard_battery, shift_by_market, ExperimentDesign, IndexTable, InferenceResult, MarketShift, PeriodIndex,
    DEFAULT_PERMUTATIONS,
};
use crate::io::{self, DualRecord, EffectRecord, IndexRecord};
use crate::sim::{measure_window, run_ab_experiment, run_episode, ticks_per_period};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub radius: f64,
    pub snapshots: Option<PathBuf>,
    pub sim_config: Option<PathBuf>,
    pub lambda: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Snapshots per aggregation window in `indices`.
    pub window: usize,
    pub design: Option<PathBuf>,
    /// Minutes per experiment period.
    pub period_length: f64,
    pub n_permutations: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: None,
            radius: 1.0,
            snapshots: None,
            sim_config: None,
            lambda: DEFAULT_LAMBDA,
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            window: 12,
            design: None,
            period_length: 60.0,
            n_permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
            out_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Reads `key = value` settings; relative paths resolve against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = RunConfig::default();
        for (line, key, value) in io::parse_key_values(&text, path)? {
            let bad = |msg: String| Error::Parse { path: path.to_path_buf(), line, message: msg };
            let num = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("{key}: cannot parse {v:?}")));
            let int = |v: &str| v.parse::<u64>().map_err(|_| bad(format!("{key}: cannot parse {v:?}")));
            let at = |v: &str| Some(base.join(v));
            match key.as_str() {
                "graph" => cfg.graph = at(&value),
                "radius" => cfg.radius = num(&value)?,
                "snapshots" => cfg.snapshots = at(&value),
                "sim_config" => cfg.sim_config = at(&value),
                "lambda" => cfg.lambda = num(&value)?,
                "epsilon" => cfg.epsilon = num(&value)?,
                "delta" => cfg.delta = num(&value)?,
                "window" => cfg.window = int(&value)? as usize,
                "design" => cfg.design = at(&value),
                "period_length" => cfg.period_length = num(&value)?,
                "n_permutations" => cfg.n_permutations = int(&value)? as usize,
                "seed" => cfg.seed = int(&value)?,
                "out_dir" => cfg.out_dir = base.join(&value),
                _ => return Err(bad(format!("unknown key {key:?}"))),
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be finite and nonnegative, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.radius >= 0.0) {
            return Err(Error::invalid(format!("radius must be nonnegative, got {}", self.radius)));
        }
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1"));
        }
        Ok(())
    }

    fn need<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("missing required input: {name}")))
    }

    fn load_graph(&self) -> Result<CellGraph> {
        io::read_graph(self.need(&self.graph, "graph")?, self.radius)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn solve_all(graph: &CellGraph, snapshots: &[Snapshot], lambda: f64) -> Result<Vec<TransportSolution>> {
    snapshots.par_iter().map(|s| solve_gem(graph, s, lambda)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub t: i64,
    pub rho: f64,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
}

/// Solves every snapshot; writes `rho.csv` and `duals.csv`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<Vec<SolveSummary>> {
    cfg.validate()?;
    let graph = cfg.load_graph()?;
    let snapshots = io::read_snapshots(cfg.need(&cfg.snapshots, "snapshots")?, graph.n_cells())?;
    let solutions = solve_all(&graph, &snapshots, cfg.lambda)?;
    let summaries: Vec<SolveSummary> = snapshots
        .iter()
        .zip(solutions)
        .map(|(s, sol)| SolveSummary {
            t: s.time_index,
            rho: sol.objective,
            w: sol.supply_duals,
            u: sol.demand_duals,
        })
        .collect();

    let rho: Vec<(i64, f64)> = summaries.iter().map(|s| (s.t, s.rho)).collect();
    let duals: Vec<DualRecord> = summaries
        .iter()
        .flat_map(|s| {
            (0..s.u.len()).map(move |cell| DualRecord { t: s.t, cell, w: s.w[cell], u: s.u[cell] })
        })
        .collect();
    io::write_atomic(&cfg.out("rho.csv"), &io::format_rho(&rho))?;
    io::write_atomic(&cfg.out("duals.csv"), &io::format_duals(&duals))?;
    Ok(summaries)
}

fn index_record(t: Option<i64>, dispatched: &[f64], demand: &[f64], epsilon: f64, delta: f64) -> Result<IndexRecord> {
    let field = local_gaps(dispatched, demand, epsilon)?;
    let (m, n) = (field.total_supply(), field.total_demand());
    Ok(match market_indices(&field, delta) {
        Ok(mi) => IndexRecord { t, a_d: mi.a_d, a_s: mi.a_s, total_supply: m, total_demand: n, label: Some(mi.label) },
        Err(Error::UndefinedIndex(_)) => {
            let a_d = demand_index(&field).unwrap_or(f64::NAN);
            let a_s = supply_index(&field).unwrap_or(f64::NAN);
            IndexRecord { t, a_d, a_s, total_supply: m, total_demand: n, label: None }
        }
        Err(e) => return Err(e),
    })
}

/// Indices per window of `cfg.window` consecutive snapshots plus a whole-run
/// row; writes `indices.csv` and `scatter.csv`.
pub fn cmd_indices(cfg: &RunConfig) -> Result<Vec<IndexRecord>> {
    cfg.validate()?;
    let graph = cfg.load_graph()?;
    let snapshots = io::read_snapshots(cfg.need(&cfg.snapshots, "snapshots")?, graph.n_cells())?;
    let solutions = solve_all(&graph, &snapshots, cfg.lambda)?;

    let mut rows = Vec::new();
    let (mut all_tilde, mut all_demand) = (Vec::new(), Vec::new());
    for (snaps, sols) in snapshots.chunks(cfg.window).zip(solutions.chunks(cfg.window)) {
        let tilde: Vec<f64> = sols.iter().flat_map(|s| s.dispatched_supply.iter().copied()).collect();
        let demand: Vec<f64> = snaps.iter().flat_map(|s| s.demand.iter().copied()).collect();
        rows.push(index_record(Some(snaps[0].time_index), &tilde, &demand, cfg.epsilon, cfg.delta)?);
        all_tilde.extend(tilde);
        all_demand.extend(demand);
    }
    rows.push(index_record(None, &all_tilde, &all_demand, cfg.epsilon, cfg.delta)?);

    io::write_atomic(&cfg.out("indices.csv"), &io::format_indices(&rows))?;
    io::write_atomic(&cfg.out("scatter.csv"), &io::format_scatter(&rows))?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct EffectsOutput {
    pub table: IndexTable,
    pub report: EffectReport,
    pub results: Vec<InferenceResult>,
    pub shifts: Vec<MarketShift>,
}

/// Per-period indices from recorded snapshots. Period `p` covers the
/// snapshots whose time index `t` satisfies `t / ticks_per_period == p`.
pub fn period_table(
    graph: &CellGraph,
    markets: &[(String, Vec<Snapshot>)],
    design: &ExperimentDesign,
    lambda: f64,
    epsilon: f64,
) -> Result<IndexTable> {
    let tpp = ticks_per_period(design.period_length)? as i64;
    let mut rows = Vec::new();
    for m in &design.markets {
        let snaps = &markets
            .iter()
            .find(|(name, _)| *name == m.market)
            .ok_or_else(|| Error::invalid(format!("no snapshots for market {}", m.market)))?
            .1;
        for (p, _) in &m.periods {
            let window: Vec<Snapshot> = snaps
                .iter()
                .filter(|s| s.time_index.div_euclid(tpp) == *p)
                .cloned()
                .collect();
            if window.is_empty() {
                return Err(Error::invalid(format!("market {} has no snapshots in period {p}", m.market)));
            }
            let (a_d, a_s, rho) = measure_window(graph, &window, lambda, epsilon)?;
            rows.push(PeriodIndex { market: m.market.clone(), period: *p, a_d, a_s, rho });
        }
    }
    Ok(IndexTable { rows })
}

/// Experiment analysis: per-period indices from a simulator config or from
/// recorded snapshots, the standard permutation battery, and per-market
/// shift vectors. Writes `effects.csv` and `ate_by_market.csv`.
pub fn cmd_effects(cfg: &RunConfig) -> Result<EffectsOutput> {
    cfg.validate()?;
    let design = io::read_design(cfg.need(&cfg.design, "design")?, cfg.period_length, cfg.seed)?;
    let table = if let Some(sim_path) = &cfg.sim_config {
        let sim = io::read_sim_config(sim_path)?;
        let run = run_ab_experiment(&sim, &design, cfg.lambda, cfg.epsilon)?;
        for (market, snaps) in &run.snapshots {
            io::write_snapshots(&cfg.out("snapshots").join(format!("{market}.csv")), snaps)?;
        }
        run.table
    } else {
        let graph = cfg.load_graph()?;
        let markets = io::read_market_snapshots(cfg.need(&cfg.snapshots, "snapshots")?, graph.n_cells())?;
        period_table(&graph, &markets, &design, cfg.lambda, cfg.epsilon)?
    };

    let results = run_standard_battery(&design, &table, cfg.n_permutations, cfg.seed)?;
    let report = effect_report(
        &arm_samples(&design, &table, Arm::Treatment)?,
        &arm_samples(&design, &table, Arm::Control)?,
    )?;
    let shifts = shift_by_market(&design, &table)?;

    let records: Vec<EffectRecord> = results.iter().map(EffectRecord::from).collect();
    io::write_atomic(&cfg.out("effects.csv"), &io::format_effects(&records))?;
    io::write_atomic(&cfg.out("ate_by_market.csv"), &io::format_market_shifts(&shifts))?;
    Ok(EffectsOutput { table, report, results, shifts })
}

/// Runs one untreated episode; writes `snapshots.csv` and `graph.csv`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<Snapshot>> {
    let sim = io::read_sim_config(cfg.need(&cfg.sim_config, "sim_config")?)?;
    let snapshots = run_episode(&sim)?;
    io::write_snapshots(&cfg.out("snapshots.csv"), &snapshots)?;
    io::write_graph(&cfg.out("graph.csv"), &sim.graph)?;
    Ok(snapshots)
}
