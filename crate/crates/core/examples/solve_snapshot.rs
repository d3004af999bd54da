//! Solve one snapshot on a 3×3 grid and check the optimality certificate.
//!
//! Run with `cargo run --example solve_snapshot`.

use sdgem::gem::{certify, solve_gem, Snapshot};
use sdgem::graph::grid_graph;

fn main() -> sdgem::Result<()> {
    // Drivers bunched in the top-left corner, riders spread along the bottom row.
    let graph = grid_graph(3, 3, 1.0)?.with_radius(2.0)?;
    let supply = vec![4.0, 2.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let demand = vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 2.0, 2.0, 2.0];
    let snapshot = Snapshot::new(0, supply, demand)?;

    let lambda = 0.1;
    let sol = solve_gem(&graph, &snapshot, lambda)?;
    println!("rho = {:.4} at lambda = {lambda} ({} pivots)", sol.objective, sol.pivots);

    println!("\ntransport plan");
    for e in &sol.plan {
        println!("  {} -> {}  {:.1} drivers, cost {:.1}", e.from, e.to, e.amount, graph.cost(e.from, e.to).unwrap());
    }

    println!("\ncell  supply  dispatched  demand  unmatched");
    for i in 0..graph.n_cells() {
        println!(
            "{i:>4}  {:>6}  {:>10}  {:>6}  {:>9}",
            snapshot.supply[i], sol.dispatched_supply[i], snapshot.demand[i], sol.slack[i]
        );
    }

    let cert = certify(&graph, &snapshot, &sol);
    println!(
        "\nduality gap {:.1e}, primal infeasibility {:.1e}, dual infeasibility {:.1e}",
        cert.duality_gap, cert.primal_infeasibility, cert.dual_infeasibility
    );
    assert!(cert.is_optimal(1e-8));
    Ok(())
}
