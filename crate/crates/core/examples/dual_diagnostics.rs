//! Read the demand and supply duals as marginal values and confirm them by re-solving.
//!
//! Run with `cargo run --example dual_diagnostics`.

use sdgem::gem::{dual_fields, solve_gem, Snapshot};
use sdgem::graph::grid_graph;

fn main() -> sdgem::Result<()> {
    let graph = grid_graph(1, 6, 1.0)?;
    let snapshot = Snapshot::new(0, vec![3.0, 3.0, 0.0, 0.0, 1.0, 0.0], vec![1.0, 0.0, 2.0, 0.0, 1.0, 3.0])?;
    let lambda = 0.2;
    let base = solve_gem(&graph, &snapshot, lambda)?;
    println!("rho = {:.3}\n", base.objective);

    println!("cell      w      u   rho(+1 request) - rho   rho(+1 driver) - rho");
    for row in dual_fields(&base) {
        let mut more_demand = snapshot.clone();
        more_demand.demand[row.cell] += 1.0;
        let mut more_supply = snapshot.clone();
        more_supply.supply[row.cell] += 1.0;
        let d_demand = solve_gem(&graph, &more_demand, lambda)?.objective - base.objective;
        let d_supply = solve_gem(&graph, &more_supply, lambda)?.objective - base.objective;
        println!(
            "{:>4} {:>6.2} {:>6.2} {:>23.2} {:>22.2}",
            row.cell, row.w, row.u, d_demand, d_supply
        );
    }
    println!("\nu = 1 marks cells where an extra request would go unserved.");
    println!("u is the right derivative of rho in demand, so it matches the re-solve;");
    println!("w is one valid supply price and can overstate a whole extra driver's effect.");
    Ok(())
}
