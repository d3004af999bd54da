use crate::error::{Error, Result};
use crate::gem::Snapshot;
use crate::graph::CellGraph;

/// Upper bound on the number of integer plans enumerated.
const MAX_PLANS: f64 = 5e6;

/// Exact GEM objective by enumerating every integer transport plan.
///
/// Test oracle for small instances. The GEM constraint matrix is a network
/// matrix, so integer supply and demand admit an integral optimal plan and
/// the minimum over integer plans equals the LP optimum.
pub fn brute_force_objective(graph: &CellGraph, snapshot: &Snapshot, lambda: f64) -> Result<f64> {
    snapshot.validate()?;
    let n = graph.n_cells();
    if snapshot.n_cells() != n {
        return Err(Error::invalid("snapshot and graph sizes differ"));
    }
    let as_count = |x: f64| -> Result<u32> {
        if x.fract() != 0.0 || x > 1e6 {
            return Err(Error::invalid(format!("brute force needs integer counts, got {x}")));
        }
        Ok(x as u32)
    };
    let mu: Vec<u32> = snapshot.supply.iter().map(|&x| as_count(x)).collect::<Result<_>>()?;
    let nu: Vec<u32> = snapshot.demand.iter().map(|&x| as_count(x)).collect::<Result<_>>()?;

    let mut plans = 1.0f64;
    for i in 0..n {
        let k = graph.neighborhood(i).len();
        if mu[i] > 0 && k == 0 {
            return Err(Error::Infeasible { cell: i });
        }
        plans *= compositions(mu[i], k);
    }
    if plans > MAX_PLANS {
        return Err(Error::invalid(format!(
            "instance has {plans:.0} integer plans; too large to enumerate"
        )));
    }

    let mut search = Search {
        graph,
        mu: &mu,
        nu: &nu,
        lambda,
        tilde: vec![0; n],
        best: f64::INFINITY,
    };
    search.source(0, 0.0);
    Ok(search.best)
}

fn compositions(units: u32, parts: usize) -> f64 {
    if units == 0 || parts <= 1 {
        return 1.0;
    }
    // C(units + parts - 1, parts - 1)
    let mut c = 1.0;
    for k in 1..parts {
        c = c * (units as f64 + k as f64) / k as f64;
    }
    c
}

struct Search<'a> {
    graph: &'a CellGraph,
    mu: &'a [u32],
    nu: &'a [u32],
    lambda: f64,
    tilde: Vec<u32>,
    best: f64,
}

impl Search<'_> {
    fn source(&mut self, i: usize, cost: f64) {
        if i == self.mu.len() {
            let gap: u32 = self
                .tilde
                .iter()
                .zip(self.nu)
                .map(|(&t, &v)| t.abs_diff(v))
                .sum();
            self.best = self.best.min(gap as f64 + self.lambda * cost);
            return;
        }
        self.split(i, 0, self.mu[i], cost);
    }

    /// Distributes `left` units of cell `i`'s supply over neighborhood slots `k..`.
    fn split(&mut self, i: usize, k: usize, left: u32, cost: f64) {
        let hood = self.graph.neighborhood(i);
        if left == 0 {
            self.source(i + 1, cost);
            return;
        }
        let j = hood[k];
        let c = self.graph.cost(i, j).expect("neighborhood cells are reachable");
        if k + 1 == hood.len() {
            self.tilde[j] += left;
            self.source(i + 1, cost + c * left as f64);
            self.tilde[j] -= left;
            return;
        }
        for a in 0..=left {
            self.tilde[j] += a;
            self.split(i, k + 1, left - a, cost + c * a as f64);
            self.tilde[j] -= a;
        }
    }
}
