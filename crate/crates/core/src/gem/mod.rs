//! Exact solution of the graph-based equilibrium metric (GEM) transport problem.
//!
//! Given supply `μ` and demand `ν` over the cells of a [`CellGraph`], find a
//! plan `γ` moving each cell's supply within its dispatch neighborhood that
//! minimizes
//!
//! ```text
//! ρ = Σ_j |ν_j − μ̃_j| + λ Σ_ij c_ij γ_ij,     μ̃_j = Σ_i γ_ij
//! ```
//!
//! The problem is solved as a min-cost flow: source `S_i` ships `μ_i` to
//! destination `D_j` at cost `λ c_ij`, and each `D_j` drains into a sink over
//! a capacity-`ν_j` arc of cost `−1` (matched demand) and an uncapacitated arc
//! of cost `+1` (surplus supply). With the constant `Σ ν` added back this is
//! exactly `ρ`.
//!
//! Duals refer to the LP with supply rows (`w`, free), under-supply rows
//! (`uᵘ ≥ 0`) and over-supply rows (`uᵒ ≤ 0`); `u = uᵘ + uᵒ`. When the dual
//! optimum is not unique the reported duals are the componentwise-greatest
//! `u` (equivalently least `w`) over the optimal dual face. That `u_j` is the
//! right derivative of `ρ` in `ν_j` and `w_i` the left derivative in `μ_i`
//! (the value lost by removing a unit of supply).

mod oracle;
mod simplex;

pub use oracle::brute_force_objective;

use crate::error::{Error, Result};
use crate::graph::CellGraph;
use simplex::{Arc, Network};

/// λ used when no configuration overrides it.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Absolute tolerance for feasibility and complementary-slackness checks.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Per-cell supply and demand counts at one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time_index: i64,
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
}

impl Snapshot {
    pub fn new(time_index: i64, supply: Vec<f64>, demand: Vec<f64>) -> Result<Self> {
        let s = Snapshot { time_index, supply, demand };
        s.validate()?;
        Ok(s)
    }

    pub fn n_cells(&self) -> usize {
        self.supply.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.supply.len() != self.demand.len() {
            return Err(Error::invalid(format!(
                "snapshot t={} has {} supply entries but {} demand entries",
                self.time_index,
                self.supply.len(),
                self.demand.len()
            )));
        }
        let bad = self
            .supply
            .iter()
            .chain(&self.demand)
            .find(|x| !x.is_finite() || **x < 0.0);
        if let Some(x) = bad {
            return Err(Error::invalid(format!(
                "snapshot t={} has entry {x}; counts must be finite and nonnegative",
                self.time_index
            )));
        }
        Ok(())
    }
}

/// One positive entry of a transport plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub from: usize,
    pub to: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    /// Positive entries of `γ`, sorted by `(from, to)`.
    pub plan: Vec<PlanEntry>,
    pub dispatched_supply: Vec<f64>,
    /// `s_j = |ν_j − μ̃_j|`.
    pub slack: Vec<f64>,
    pub objective: f64,
    pub supply_duals: Vec<f64>,
    pub demand_duals_under: Vec<f64>,
    pub demand_duals_over: Vec<f64>,
    pub demand_duals: Vec<f64>,
    pub lambda: f64,
    pub pivots: usize,
}

/// One row of the per-cell dual table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRow {
    pub cell: usize,
    pub w: f64,
    pub u: f64,
}

/// Largest residuals of the optimality conditions for a solved instance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Certificate {
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Primal minus dual objective.
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub slackness_violation: f64,
}

impl Certificate {
    pub fn is_optimal(&self, tol: f64) -> bool {
        self.duality_gap.abs() <= tol
            && self.primal_infeasibility <= tol
            && self.dual_infeasibility <= tol
            && self.slackness_violation <= tol
    }
}

fn check_inputs(graph: &CellGraph, snapshot: &Snapshot, lambda: f64) -> Result<()> {
    snapshot.validate()?;
    if snapshot.n_cells() != graph.n_cells() {
        return Err(Error::invalid(format!(
            "snapshot t={} has {} cells but the graph has {}",
            snapshot.time_index,
            snapshot.n_cells(),
            graph.n_cells()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
    }
    Ok(())
}

/// Solves the GEM problem and returns the plan, objective and canonical duals.
pub fn solve_gem(graph: &CellGraph, snapshot: &Snapshot, lambda: f64) -> Result<TransportSolution> {
    check_inputs(graph, snapshot, lambda)?;
    let n = graph.n_cells();
    let mu = &snapshot.supply;
    let nu = &snapshot.demand;

    for i in 0..n {
        if mu[i] > 0.0 && graph.neighborhood(i).is_empty() {
            return Err(Error::Infeasible { cell: i });
        }
    }

    // nodes: S_i = i, D_j = n + j, sink = 2n
    let sink = 2 * n;
    let mut arcs = Vec::new();
    let mut transport_arcs = Vec::new();
    for i in 0..n {
        for &j in graph.neighborhood(i) {
            let c = graph.cost(i, j).ok_or(Error::Infeasible { cell: i })?;
            transport_arcs.push((i, j, c, arcs.len()));
            arcs.push(Arc { tail: i, head: n + j, cost: lambda * c, cap: f64::INFINITY });
        }
    }
    for j in 0..n {
        if nu[j] > 0.0 {
            arcs.push(Arc { tail: n + j, head: sink, cost: -1.0, cap: nu[j] });
        }
        arcs.push(Arc { tail: n + j, head: sink, cost: 1.0, cap: f64::INFINITY });
    }
    let mut supply = vec![0.0; 2 * n + 1];
    supply[..n].copy_from_slice(mu);
    supply[sink] = -mu.iter().sum::<f64>();

    let flow = simplex::min_cost_flow(&Network { supply, arcs })?;

    let mut plan = Vec::new();
    let mut dispatched = vec![0.0; n];
    let mut transport_cost = 0.0;
    for &(i, j, c, a) in &transport_arcs {
        let g = flow.flow[a];
        if g > 0.0 {
            plan.push(PlanEntry { from: i, to: j, amount: g });
            dispatched[j] += g;
            transport_cost += c * g;
        }
    }
    let slack: Vec<f64> = (0..n).map(|j| (nu[j] - dispatched[j]).abs()).collect();
    let objective = slack.iter().sum::<f64>() + lambda * transport_cost;

    let (supply_duals, demand_duals) =
        canonical_duals(graph, mu, nu, &plan, &dispatched, lambda, flow.pivots)?;

    Ok(TransportSolution {
        plan,
        slack,
        objective,
        demand_duals_under: demand_duals.iter().map(|&u| u.max(0.0)).collect(),
        demand_duals_over: demand_duals.iter().map(|&u| u.min(0.0)).collect(),
        dispatched_supply: dispatched,
        supply_duals,
        demand_duals,
        lambda,
        pivots: flow.pivots,
    })
}

/// Greatest `u` (least `w`) among duals that satisfy complementary slackness
/// with `plan`. The constraints are difference constraints in `(u, −w)`, so
/// the greatest solution is a shortest-path distance from a bound root.
fn canonical_duals(
    graph: &CellGraph,
    mu: &[f64],
    nu: &[f64],
    plan: &[PlanEntry],
    dispatched: &[f64],
    lambda: f64,
    pivots: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = graph.n_cells();
    let tol = 1e-9 * (1.0 + mu.iter().chain(nu).fold(0.0f64, |a, &b| a.max(b)));
    // variables: u_j = j, v_i = -w_i = n + i, root = 2n
    let root = 2 * n;
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut carried = vec![false; n * n];
    for e in plan {
        carried[e.from * n + e.to] = true;
    }
    for i in (0..n).filter(|&i| mu[i] > 0.0) {
        for &j in graph.neighborhood(i) {
            let c = lambda * graph.cost(i, j).expect("neighborhood cells are reachable");
            // u_j - v_i <= λc
            edges.push((n + i, j, c));
            if carried[i * n + j] {
                // v_i - u_j <= -λc
                edges.push((j, n + i, -c));
            }
        }
    }
    for j in 0..n {
        let (lo, hi) = if dispatched[j] > nu[j] + tol {
            (-1.0, -1.0)
        } else if dispatched[j] < nu[j] - tol {
            (1.0, 1.0)
        } else {
            (-1.0, 1.0)
        };
        edges.push((root, j, hi));
        edges.push((j, root, -lo));
    }

    let n_vars = 2 * n + 1;
    let mut dist = vec![f64::INFINITY; n_vars];
    dist[root] = 0.0;
    let mut settled = false;
    for _ in 0..n_vars {
        let mut changed = false;
        for &(a, b, w) in &edges {
            if dist[a].is_finite() && dist[a] + w < dist[b] - 1e-15 {
                dist[b] = dist[a] + w;
                changed = true;
            }
        }
        if !changed {
            settled = true;
            break;
        }
    }
    if !settled || dist[root] != 0.0 {
        return Err(Error::Solver { iterations: pivots });
    }

    let u: Vec<f64> = dist[..n].to_vec();
    let w: Vec<f64> = (0..n)
        .map(|i| {
            if mu[i] > 0.0 {
                -dist[n + i]
            } else {
                graph
                    .neighborhood(i)
                    .iter()
                    .map(|&j| lambda * graph.cost(i, j).expect("reachable") - u[j])
                    .fold(f64::INFINITY, f64::min)
            }
        })
        .collect();
    Ok((w, u))
}

/// Stored objective `ρ`.
pub fn objective_value(solution: &TransportSolution) -> f64 {
    solution.objective
}

/// `ρ` recomputed from the plan and demand.
pub fn recompute_objective(graph: &CellGraph, snapshot: &Snapshot, solution: &TransportSolution) -> f64 {
    let n = graph.n_cells();
    let mut tilde = vec![0.0; n];
    let mut cost = 0.0;
    for e in &solution.plan {
        tilde[e.to] += e.amount;
        cost += graph.cost(e.from, e.to).unwrap_or(f64::INFINITY) * e.amount;
    }
    (0..n).map(|j| (snapshot.demand[j] - tilde[j]).abs()).sum::<f64>() + solution.lambda * cost
}

fn cell_in_range(solution: &TransportSolution, cell: usize) -> Result<()> {
    if cell >= solution.demand_duals.len() {
        return Err(Error::invalid(format!(
            "cell {cell} out of range 0..{}",
            solution.demand_duals.len()
        )));
    }
    Ok(())
}

/// Demand dual `u` at `cell`: marginal change in `ρ` per request added.
pub fn demand_dual_at(solution: &TransportSolution, cell: usize) -> Result<f64> {
    cell_in_range(solution, cell)?;
    Ok(solution.demand_duals[cell])
}

/// Supply dual `w` at `cell`: marginal change in `ρ` per driver.
pub fn supply_dual_at(solution: &TransportSolution, cell: usize) -> Result<f64> {
    cell_in_range(solution, cell)?;
    Ok(solution.supply_duals[cell])
}

/// Per-cell `(w, u)` table sorted by cell index, for heatmap export.
pub fn dual_fields(solution: &TransportSolution) -> Vec<DualRow> {
    solution
        .supply_duals
        .iter()
        .zip(&solution.demand_duals)
        .enumerate()
        .map(|(cell, (&w, &u))| DualRow { cell, w, u })
        .collect()
}

/// Checks primal feasibility, dual feasibility, complementary slackness and
/// the duality gap of `solution` against the LP.
pub fn certify(graph: &CellGraph, snapshot: &Snapshot, solution: &TransportSolution) -> Certificate {
    let n = graph.n_cells();
    let mu = &snapshot.supply;
    let nu = &snapshot.demand;
    let lambda = solution.lambda;
    let w = &solution.supply_duals;
    let (uu, uo) = (&solution.demand_duals_under, &solution.demand_duals_over);

    let mut primal_inf = 0.0f64;
    let mut row = vec![0.0; n];
    let mut tilde = vec![0.0; n];
    for e in &solution.plan {
        primal_inf = primal_inf.max(-e.amount);
        if !graph.neighborhood(e.from).contains(&e.to) {
            primal_inf = primal_inf.max(e.amount);
        }
        row[e.from] += e.amount;
        tilde[e.to] += e.amount;
    }
    for i in 0..n {
        primal_inf = primal_inf.max((row[i] - mu[i]).abs());
        primal_inf = primal_inf.max((tilde[i] - solution.dispatched_supply[i]).abs());
    }

    let mut dual_inf = 0.0f64;
    let mut cs = 0.0f64;
    for j in 0..n {
        dual_inf = dual_inf
            .max(uu[j] - uo[j] - 1.0)
            .max(-uu[j])
            .max(uo[j])
            .max((uu[j] + uo[j] - solution.demand_duals[j]).abs());
        let s = solution.slack[j];
        if s > FEASIBILITY_TOL {
            cs = cs.max((uu[j] - uo[j] - 1.0).abs());
        }
        if tilde[j] > nu[j] + FEASIBILITY_TOL {
            cs = cs.max(uu[j].abs());
        }
        if tilde[j] < nu[j] - FEASIBILITY_TOL {
            cs = cs.max(uo[j].abs());
        }
    }
    for i in 0..n {
        for &j in graph.neighborhood(i) {
            let c = lambda * graph.cost(i, j).unwrap_or(f64::INFINITY);
            dual_inf = dual_inf.max(w[i] + uu[j] + uo[j] - c);
        }
    }
    for e in &solution.plan {
        if e.amount > FEASIBILITY_TOL {
            let c = lambda * graph.cost(e.from, e.to).unwrap_or(f64::INFINITY);
            cs = cs.max((w[e.from] + uu[e.to] + uo[e.to] - c).abs());
        }
    }

    let primal = recompute_objective(graph, snapshot, solution);
    let dual: f64 = (0..n)
        .map(|k| mu[k] * w[k] + nu[k] * uu[k] + nu[k] * uo[k])
        .sum();
    Certificate {
        primal_objective: primal,
        dual_objective: dual,
        duality_gap: primal - dual,
        primal_infeasibility: primal_inf.max(0.0),
        dual_infeasibility: dual_inf.max(0.0),
        slackness_violation: cs,
    }
}
