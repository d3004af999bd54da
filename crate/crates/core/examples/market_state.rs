//! Compute both indices for four hand-built markets and place each in the state matrix.
//!
//! Run with `cargo run --example market_state`.

use sdgem::gem::{solve_gem, Snapshot};
use sdgem::graph::grid_graph;
use sdgem::indices::{classify, local_gaps, market_indices, DEFAULT_DELTA, DEFAULT_EPSILON};

fn main() -> sdgem::Result<()> {
    // Two neighborhoods four blocks apart; dispatch only reaches adjacent cells.
    let graph = grid_graph(1, 5, 1.0)?;
    let markets = [
        ("matched", [3.0, 0.0, 0.0, 0.0, 3.0], [3.0, 0.0, 0.0, 0.0, 3.0]),
        ("drivers everywhere", [6.0, 0.0, 0.0, 0.0, 6.0], [2.0, 0.0, 0.0, 0.0, 2.0]),
        ("riders everywhere", [1.0, 0.0, 0.0, 0.0, 1.0], [5.0, 0.0, 0.0, 0.0, 5.0]),
        ("drivers west, riders east", [6.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 6.0]),
    ];
    println!("{:<26} {:>7} {:>7}  label", "market", "A_d", "A_s");
    for (name, supply, demand) in markets {
        let snapshot = Snapshot::new(0, supply.to_vec(), demand.to_vec())?;
        let sol = solve_gem(&graph, &snapshot, 0.1)?;
        let field = local_gaps(&sol.dispatched_supply, &snapshot.demand, DEFAULT_EPSILON)?;
        let idx = market_indices(&field, DEFAULT_DELTA)?;
        println!("{name:<26} {:>7.3} {:>7.3}  {}", idx.a_d, idx.a_s, idx.label);
    }

    println!("\nfull state matrix at delta = {DEFAULT_DELTA}:");
    let ticks = [-1.0, 0.0, 1.0];
    for a_s in ticks.iter().rev() {
        let row: Vec<String> = ticks
            .iter()
            .map(|&a_d| classify(a_d, *a_s, DEFAULT_DELTA).map(|l| l.to_string()).unwrap_or_else(|_| "-".into()))
            .collect();
        println!("  A_s = {a_s:>4}: {}", row.join(" | "));
    }
    Ok(())
}
