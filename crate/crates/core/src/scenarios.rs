//! Preset simulator configurations.

use crate::graph::grid_graph;
use crate::sim::SimConfig;

fn uniform_destinations(n: usize) -> Vec<Vec<f64>> {
    vec![vec![1.0 / n as f64; n]; n]
}

/// 3×3 grid, two requests and 0.8 sign-ins per cell and tick, trips to any
/// cell. Over-supplied, with enough churn that periods decorrelate quickly.
pub fn city_grid(horizon: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::uniform(grid_graph(3, 3, 1.0).expect("valid grid"), horizon, 2.0, 0.8, seed);
    cfg.destination_matrix = uniform_destinations(9);
    cfg.warmup_ticks = 24;
    cfg
}

/// [`city_grid`] with sign-off probability 0.2, so the idle pool tracks the
/// sign-in rate within a few ticks.
pub fn responsive_city_grid(horizon: usize, seed: u64) -> SimConfig {
    let mut cfg = city_grid(horizon, seed);
    cfg.signoff_prob = 0.2;
    cfg
}

/// 10×10 grid with requests and drivers matched closely enough that long-run
/// indices sit inside the neutral bands. Both queues decay fast (cancel and
/// sign-off 0.5, one-tick trips), so the state is stationary.
pub fn balanced_grid(horizon: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::uniform(grid_graph(10, 10, 1.0).expect("valid grid"), horizon, 8.0, 4.25, seed);
    cfg.cancel_prob = 0.5;
    cfg.signoff_prob = 0.5;
    cfg.trip_ticks = 1;
    cfg.warmup_ticks = 48;
    cfg
}

/// Five cells on a line. Drivers sign in at the west end, most requests
/// appear at the east end, and every trip finishes back west. Dispatch
/// reaches adjacent cells only, so idle drivers pile up west while eastern
/// requests wait: an SD-misaligned market.
pub fn misaligned_corridor(horizon: usize, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::uniform(grid_graph(1, 5, 1.0).expect("valid grid"), horizon, 0.0, 0.0, seed);
    cfg.driver_signin_rates = vec![1.5, 1.5, 0.0, 0.0, 0.0];
    cfg.request_rates = vec![0.5, 0.5, 0.0, 1.5, 1.5];
    cfg.signoff_prob = 0.2;
    cfg.destination_matrix = vec![vec![0.5, 0.5, 0.0, 0.0, 0.0]; 5];
    cfg.warmup_ticks = 24;
    cfg
}
