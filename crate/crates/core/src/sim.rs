//! Two-sided queue simulator on a cell graph.
//!
//! Each 5-minute tick: Poisson request and sign-in arrivals plus trip
//! completions, then binomial cancellations and sign-offs, then the pre-match
//! snapshot is recorded, then a greedy nearest-cost matching clears what it can
//! inside dispatch neighborhoods. Matched drivers are busy for `trip_ticks` and
//! reappear idle at a destination drawn from the request cell's row of the
//! destination matrix.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Poisson};
use rayon::prelude::*;

use crate::efficiency::Arm;
use crate::error::{Error, Result};
use crate::gem::{solve_gem, Snapshot, DEFAULT_LAMBDA};
use crate::graph::CellGraph;
use crate::indices::{demand_index, local_gaps, supply_index};
use crate::inference::{ExperimentDesign, IndexTable, PeriodIndex};

pub const TICK_MINUTES: f64 = 5.0;

/// Treatment-arm changes to the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Intervention {
    /// Sign-in rates are multiplied by `1 + supply_scale`.
    pub supply_scale: f64,
    /// Fraction of leftover idle drivers in cells with `u <= 0` sent toward the
    /// reachable cell with the largest positive demand dual.
    pub repositioning_strength: f64,
}

impl Intervention {
    pub fn is_null(&self) -> bool {
        self.supply_scale == 0.0 && self.repositioning_strength == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub graph: CellGraph,
    pub horizon: usize,
    pub request_rates: Vec<f64>,
    pub driver_signin_rates: Vec<f64>,
    pub cancel_prob: f64,
    pub signoff_prob: f64,
    pub destination_matrix: Vec<Vec<f64>>,
    pub trip_ticks: usize,
    /// Ticks simulated before the first emitted snapshot.
    pub warmup_ticks: usize,
    pub intervention: Intervention,
    /// λ of the GEM solve that drives repositioning.
    pub reposition_lambda: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Uniform rates, no intervention, trips end where they start.
    pub fn uniform(graph: CellGraph, horizon: usize, request_rate: f64, signin_rate: f64, seed: u64) -> Self {
        let n = graph.n_cells();
        let destination_matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        SimConfig {
            graph,
            horizon,
            request_rates: vec![request_rate; n],
            driver_signin_rates: vec![signin_rate; n],
            cancel_prob: 0.2,
            signoff_prob: 0.05,
            destination_matrix,
            trip_ticks: 3,
            warmup_ticks: 0,
            intervention: Intervention::default(),
            reposition_lambda: DEFAULT_LAMBDA,
            seed,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.graph.n_cells()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_cells();
        for (name, v) in [("request_rates", &self.request_rates), ("driver_signin_rates", &self.driver_signin_rates)] {
            if v.len() != n {
                return Err(Error::invalid(format!("{name} has {} entries for {n} cells", v.len())));
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and nonnegative, got {x}")));
            }
        }
        for (name, p) in [("cancel_prob", self.cancel_prob), ("signoff_prob", self.signoff_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.destination_matrix.len() != n {
            return Err(Error::invalid(format!(
                "destination matrix has {} rows for {n} cells",
                self.destination_matrix.len()
            )));
        }
        for (i, row) in self.destination_matrix.iter().enumerate() {
            if row.len() != n || row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::invalid(format!("destination row {i} must hold {n} nonnegative entries")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("destination row {i} sums to {s}, not 1")));
            }
        }
        if self.trip_ticks == 0 {
            return Err(Error::invalid("trip_ticks must be at least 1"));
        }
        let iv = &self.intervention;
        if !(iv.supply_scale > -1.0 && iv.supply_scale.is_finite()) {
            return Err(Error::invalid(format!("supply_scale must exceed -1, got {}", iv.supply_scale)));
        }
        if !(0.0..=1.0).contains(&iv.repositioning_strength) {
            return Err(Error::invalid(format!(
                "repositioning_strength must lie in [0, 1], got {}",
                iv.repositioning_strength
            )));
        }
        if !(self.reposition_lambda >= 0.0 && self.reposition_lambda.is_finite()) {
            return Err(Error::invalid("reposition_lambda must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub tick: usize,
    pub open_requests: Vec<u64>,
    pub idle_drivers: Vec<u64>,
    /// `in_flight[k][cell]` drivers become idle at `cell` in `k + 1` ticks.
    pub in_flight: VecDeque<Vec<u64>>,
    pub signed_in: u64,
    pub signed_off: u64,
}

impl SimState {
    pub fn empty(config: &SimConfig) -> Self {
        let n = config.n_cells();
        SimState {
            tick: 0,
            open_requests: vec![0; n],
            idle_drivers: vec![0; n],
            in_flight: (0..config.trip_ticks).map(|_| vec![0; n]).collect(),
            signed_in: 0,
            signed_off: 0,
        }
    }

    pub fn in_flight_total(&self) -> u64 {
        self.in_flight.iter().flatten().sum()
    }

    /// `(destination, remaining ticks, drivers)` for every nonempty slot.
    pub fn in_flight_trips(&self) -> Vec<(usize, usize, u64)> {
        let mut out = Vec::new();
        for (k, slot) in self.in_flight.iter().enumerate() {
            for (cell, &c) in slot.iter().enumerate() {
                if c > 0 {
                    out.push((cell, k + 1, c));
                }
            }
        }
        out
    }

    /// Drivers idle + busy + signed off equals drivers ever signed in.
    pub fn conserves_drivers(&self) -> bool {
        self.idle_drivers.iter().sum::<u64>() + self.in_flight_total() + self.signed_off == self.signed_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Pre-match supply (idle drivers) and demand (open requests).
    pub snapshot: Snapshot,
    pub matched: u64,
    pub repositioned: u64,
}

/// Precomputed pieces reused every tick.
pub struct Stepper<'a> {
    config: &'a SimConfig,
    match_order: Vec<(usize, usize)>,
    destinations: Vec<Option<WeightedIndex<f64>>>,
}

impl<'a> Stepper<'a> {
    pub fn new(config: &'a SimConfig) -> Result<Self> {
        config.validate()?;
        let g = &config.graph;
        let mut match_order: Vec<(f64, usize, usize)> = (0..g.n_cells())
            .flat_map(|i| {
                g.neighborhood(i)
                    .iter()
                    .map(move |&j| (g.cost(i, j).expect("neighbors are reachable"), i, j))
            })
            .collect();
        match_order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let destinations = config
            .destination_matrix
            .iter()
            .map(|row| WeightedIndex::new(row).ok())
            .collect();
        Ok(Stepper {
            config,
            match_order: match_order.into_iter().map(|(_, i, j)| (i, j)).collect(),
            destinations,
        })
    }

    /// Advances `state` by one tick; `treated` switches the intervention on.
    pub fn step(&self, state: &mut SimState, treated: bool, rng: &mut ChaCha8Rng) -> Result<StepReport> {
        let cfg = self.config;
        let n = cfg.n_cells();
        let iv = if treated { cfg.intervention } else { Intervention::default() };

        // 1. arrivals
        let arrived = state.in_flight.pop_front().unwrap_or_else(|| vec![0; n]);
        state.in_flight.push_back(vec![0; n]);
        for i in 0..n {
            state.idle_drivers[i] += arrived[i];
            state.open_requests[i] += poisson(cfg.request_rates[i], rng);
            let signins = poisson(cfg.driver_signin_rates[i] * (1.0 + iv.supply_scale), rng);
            state.idle_drivers[i] += signins;
            state.signed_in += signins;
        }

        // 2. cancellations and sign-offs
        for i in 0..n {
            state.open_requests[i] -= binomial(state.open_requests[i], cfg.cancel_prob, rng);
            let off = binomial(state.idle_drivers[i], cfg.signoff_prob, rng);
            state.idle_drivers[i] -= off;
            state.signed_off += off;
        }

        // 3. pre-match snapshot
        let as_f64 = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<f64>>();
        let snapshot = Snapshot::new(
            state.tick as i64,
            as_f64(&state.idle_drivers),
            as_f64(&state.open_requests),
        )?;

        // 4. greedy matching, cheapest pairs first
        let mut matched = 0;
        let last = cfg.trip_ticks - 1;
        for &(i, j) in &self.match_order {
            let k = state.idle_drivers[i].min(state.open_requests[j]);
            if k == 0 {
                continue;
            }
            state.idle_drivers[i] -= k;
            state.open_requests[j] -= k;
            matched += k;
            match &self.destinations[j] {
                Some(dist) => {
                    for _ in 0..k {
                        state.in_flight[last][dist.sample(rng)] += 1;
                    }
                }
                None => state.in_flight[last][j] += k,
            }
        }

        let repositioned = if iv.repositioning_strength > 0.0 {
            self.reposition(state, &snapshot, iv.repositioning_strength)?
        } else {
            0
        };

        state.tick += 1;
        Ok(StepReport { snapshot, matched, repositioned })
    }

    fn reposition(&self, state: &mut SimState, snapshot: &Snapshot, strength: f64) -> Result<u64> {
        let cfg = self.config;
        let g = &cfg.graph;
        let n = cfg.n_cells();
        let u = solve_gem(g, snapshot, cfg.reposition_lambda)?.demand_duals;
        let last = cfg.trip_ticks - 1;
        let mut moved = 0;
        for i in 0..n {
            if u[i] > 0.0 || state.idle_drivers[i] == 0 {
                continue;
            }
            let target = (0..n)
                .filter(|&j| j != i && u[j] > 0.0)
                .filter_map(|j| g.cost(i, j).map(|c| (j, c)))
                .min_by(|a, b| {
                    u[b.0].total_cmp(&u[a.0]).then(a.1.total_cmp(&b.1)).then(a.0.cmp(&b.0))
                });
            let Some((j, _)) = target else { continue };
            let k = ((state.idle_drivers[i] as f64) * strength).round() as u64;
            let k = k.min(state.idle_drivers[i]);
            state.idle_drivers[i] -= k;
            state.in_flight[last][j] += k;
            moved += k;
        }
        Ok(moved)
    }
}

fn poisson(rate: f64, rng: &mut ChaCha8Rng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("finite positive rate").sample(rng) as u64
}

fn binomial(n: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p).expect("probability in [0, 1]").sample(rng)
}

/// RNG of one independent episode.
pub fn episode_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Snapshots of one untreated episode, after warmup, indexed `0..horizon`.
pub fn run_episode(config: &SimConfig) -> Result<Vec<Snapshot>> {
    run_schedule(config, 0, |_| false).map(|r| r.into_iter().map(|s| s.snapshot).collect())
}

/// Steps through warmup plus `horizon` ticks on RNG stream `stream`.
/// `treated(t)` is queried for every emitted tick `t`; warmup is untreated.
pub fn run_schedule(
    config: &SimConfig,
    stream: u64,
    treated: impl Fn(usize) -> bool,
) -> Result<Vec<StepReport>> {
    let stepper = Stepper::new(config)?;
    let mut rng = episode_rng(config.seed, stream);
    let mut state = SimState::empty(config);
    for _ in 0..config.warmup_ticks {
        stepper.step(&mut state, false, &mut rng)?;
    }
    let mut out = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        let mut report = stepper.step(&mut state, treated(t), &mut rng)?;
        report.snapshot.time_index = t as i64;
        out.push(report);
    }
    Ok(out)
}

/// Ticks per experiment period.
pub fn ticks_per_period(period_length: f64) -> Result<usize> {
    let ticks = period_length / TICK_MINUTES;
    if !(ticks >= 1.0 && ticks.fract() == 0.0) {
        return Err(Error::invalid(format!(
            "period length {period_length} min is not a positive multiple of {TICK_MINUTES} min"
        )));
    }
    Ok(ticks as usize)
}

#[derive(Debug, Clone)]
pub struct AbRun {
    pub table: IndexTable,
    /// Emitted snapshots per market, in design order.
    pub snapshots: Vec<(String, Vec<Snapshot>)>,
}

/// Simulates every market of `design` on its own RNG stream, applying the
/// intervention during treatment periods, and measures each period by solving
/// GEM at every tick. Indices pool all (cell, tick) pairs of the period; ρ is
/// the mean over its ticks. Undefined indices are recorded as NaN.
pub fn run_ab_experiment(config: &SimConfig, design: &ExperimentDesign, lambda: f64, epsilon: f64) -> Result<AbRun> {
    design.validate()?;
    let tpp = ticks_per_period(design.period_length)?;
    for m in &design.markets {
        for (p, _) in &m.periods {
            if *p < 0 || (*p as usize + 1) * tpp > config.horizon {
                return Err(Error::invalid(format!(
                    "market {} period {p} does not fit in a {}-tick horizon",
                    m.market, config.horizon
                )));
            }
        }
    }

    let markets: Vec<(Vec<PeriodIndex>, (String, Vec<Snapshot>))> = design
        .markets
        .par_iter()
        .enumerate()
        .map(|(k, m)| {
            let mut arm_of = vec![Arm::Control; config.horizon / tpp + 1];
            for (p, arm) in &m.periods {
                arm_of[*p as usize] = *arm;
            }
            let reports = run_schedule(config, k as u64, |t| arm_of[t / tpp] == Arm::Treatment)?;
            let snaps: Vec<Snapshot> = reports.into_iter().map(|r| r.snapshot).collect();
            let rows = m
                .periods
                .iter()
                .map(|(p, _)| {
                    let window = &snaps[*p as usize * tpp..(*p as usize + 1) * tpp];
                    let (a_d, a_s, rho) = measure_window(&config.graph, window, lambda, epsilon)?;
                    Ok(PeriodIndex { market: m.market.clone(), period: *p, a_d, a_s, rho })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((rows, (m.market.clone(), snaps)))
        })
        .collect::<Result<_>>()?;

    let mut table = IndexTable::default();
    let mut snapshots = Vec::new();
    for (rows, s) in markets {
        table.rows.extend(rows);
        snapshots.push(s);
    }
    Ok(AbRun { table, snapshots })
}

/// `(A_d, A_s, mean ρ)` over a window of ticks; undefined indices become NaN.
pub fn measure_window(graph: &CellGraph, window: &[Snapshot], lambda: f64, epsilon: f64) -> Result<(f64, f64, f64)> {
    let mut tilde = Vec::new();
    let mut demand = Vec::new();
    let mut rho = 0.0;
    for snap in window {
        let sol = solve_gem(graph, snap, lambda)?;
        rho += sol.objective;
        tilde.extend_from_slice(&sol.dispatched_supply);
        demand.extend_from_slice(&snap.demand);
    }
    let field = local_gaps(&tilde, &demand, epsilon)?;
    let a_d = demand_index(&field).unwrap_or(f64::NAN);
    let a_s = supply_index(&field).unwrap_or(f64::NAN);
    Ok((a_d, a_s, rho / window.len().max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::grid_graph;
    use proptest::prelude::*;

    fn single_cell(horizon: usize, req: f64, sign: f64) -> SimConfig {
        SimConfig::uniform(grid_graph(1, 1, 1.0).unwrap(), horizon, req, sign, 1)
    }

    #[test]
    fn zero_rates_fixed_point() {
        let cfg = single_cell(5, 0.0, 0.0);
        let stepper = Stepper::new(&cfg).unwrap();
        let mut state = SimState::empty(&cfg);
        let before = state.clone();
        let r = stepper.step(&mut state, false, &mut episode_rng(1, 0)).unwrap();
        assert_eq!(r.snapshot.supply, vec![0.0]);
        assert_eq!(r.snapshot.demand, vec![0.0]);
        assert_eq!(state.open_requests, before.open_requests);
        assert_eq!(state.idle_drivers, before.idle_drivers);
        assert_eq!(state.in_flight, before.in_flight);
    }

    #[test]
    fn supply_only_accumulates() {
        let mut cfg = SimConfig::uniform(grid_graph(2, 2, 1.0).unwrap(), 40, 0.0, 2.0, 3);
        cfg.signoff_prob = 0.0;
        let snaps = run_episode(&cfg).unwrap();
        assert!(snaps.iter().all(|s| s.demand.iter().all(|&d| d == 0.0)));
        let totals: Vec<f64> = snaps.iter().map(|s| s.supply.iter().sum()).collect();
        assert!(totals.windows(2).all(|w| w[1] >= w[0]));
        assert!(totals[39] > 100.0);
    }

    #[test]
    fn horizon_zero_is_empty() {
        assert!(run_episode(&single_cell(0, 1.0, 1.0)).unwrap().is_empty());
    }

    #[test]
    fn single_cell_never_holds_both_sides() {
        let cfg = single_cell(300, 3.0, 3.0);
        let stepper = Stepper::new(&cfg).unwrap();
        let mut state = SimState::empty(&cfg);
        let mut rng = episode_rng(4, 0);
        for _ in 0..300 {
            stepper.step(&mut state, false, &mut rng).unwrap();
            assert!(state.open_requests[0] == 0 || state.idle_drivers[0] == 0);
            assert!(state.conserves_drivers());
        }
    }

    #[test]
    fn deterministic_episodes() {
        let mut cfg = SimConfig::uniform(grid_graph(3, 3, 1.0).unwrap(), 50, 2.0, 1.5, 42);
        cfg.intervention.repositioning_strength = 0.5;
        let a = run_schedule(&cfg, 0, |t| t % 2 == 0).unwrap();
        let b = run_schedule(&cfg, 0, |t| t % 2 == 0).unwrap();
        assert_eq!(a, b);
        cfg.seed = 43;
        assert_ne!(a, run_schedule(&cfg, 0, |t| t % 2 == 0).unwrap());
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SimConfig::uniform(grid_graph(1, 2, 1.0).unwrap(), 5, 1.0, 1.0, 0);
        let mut c = base.clone();
        c.cancel_prob = 1.5;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.destination_matrix[0] = vec![0.5, 0.4];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.request_rates = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.trip_ticks = 0;
        assert!(c.validate().is_err());
        let mut c = base;
        c.intervention.supply_scale = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn greedy_matching_bounded_by_exact_matching() {
        let mut cfg = SimConfig::uniform(grid_graph(2, 3, 1.0).unwrap(), 60, 2.0, 2.0, 9);
        cfg.request_rates = vec![4.0, 0.5, 0.0, 3.0, 0.2, 1.0];
        let reports = run_schedule(&cfg, 0, |_| false).unwrap();
        for r in &reports {
            let sol = solve_gem(&cfg.graph, &r.snapshot, 0.0).unwrap();
            let m: f64 = r.snapshot.supply.iter().sum();
            let n: f64 = r.snapshot.demand.iter().sum();
            let max_matching = (m + n - sol.objective) / 2.0;
            assert!(r.matched as f64 <= max_matching + 1e-9);
        }
    }

    #[test]
    fn matching_stays_in_neighborhoods() {
        // two isolated cells: drivers only in cell 0, requests only in cell 1
        let graph = CellGraph::from_edges(2, vec![], 1.0).unwrap();
        let mut cfg = SimConfig::uniform(graph, 30, 0.0, 0.0, 5);
        cfg.request_rates = vec![0.0, 2.0];
        cfg.driver_signin_rates = vec![2.0, 0.0];
        let reports = run_schedule(&cfg, 0, |_| false).unwrap();
        assert!(reports.iter().all(|r| r.matched == 0));
    }

    #[test]
    fn repositioning_moves_toward_positive_duals() {
        let graph = grid_graph(1, 3, 1.0).unwrap();
        let mut cfg = SimConfig::uniform(graph, 1, 0.0, 0.0, 0);
        cfg.intervention.repositioning_strength = 1.0;
        cfg.cancel_prob = 0.0;
        cfg.signoff_prob = 0.0;
        let stepper = Stepper::new(&cfg).unwrap();
        let mut state = SimState::empty(&cfg);
        state.idle_drivers = vec![10, 0, 0];
        state.open_requests = vec![0, 0, 4];
        state.signed_in = 10;
        let r = stepper.step(&mut state, true, &mut episode_rng(0, 0)).unwrap();
        assert_eq!(r.matched, 0);
        assert!(r.repositioned > 0);
        assert_eq!(state.in_flight.back().unwrap()[2], r.repositioned);
        assert!(state.conserves_drivers());
    }

    #[test]
    fn misaligned_period_rejected() {
        let cfg = single_cell(12, 1.0, 1.0);
        let d = ExperimentDesign::alternating(1, 2, 7.0, 0).unwrap();
        assert!(run_ab_experiment(&cfg, &d, 0.1, 0.5).is_err());
        let d = ExperimentDesign::alternating(1, 5, 15.0, 0).unwrap();
        assert!(run_ab_experiment(&cfg, &d, 0.1, 0.5).is_err());
        let d = ExperimentDesign::alternating(1, 4, 15.0, 0).unwrap();
        let run = run_ab_experiment(&cfg, &d, 0.1, 0.5).unwrap();
        assert_eq!(run.table.rows.len(), 4);
        assert_eq!(run.snapshots[0].1.len(), 12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn drivers_conserved(seed in any::<u64>(), req in 0.0f64..4.0, sign in 0.0f64..4.0, strength in 0.0f64..1.0) {
            let mut cfg = SimConfig::uniform(grid_graph(2, 2, 1.0).unwrap(), 40, req, sign, seed);
            cfg.destination_matrix = vec![vec![0.25; 4]; 4];
            cfg.intervention.repositioning_strength = strength;
            cfg.intervention.supply_scale = 0.5;
            let stepper = Stepper::new(&cfg).unwrap();
            let mut state = SimState::empty(&cfg);
            let mut rng = episode_rng(seed, 0);
            for t in 0..40 {
                stepper.step(&mut state, t % 3 == 0, &mut rng).unwrap();
                prop_assert!(state.conserves_drivers());
            }
        }
    }
}
