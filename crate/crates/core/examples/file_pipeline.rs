//! Drive the file-based commands end to end in a scratch directory.
//!
//! Run with `cargo run --example file_pipeline`. The same steps are available
//! from the `sdgem` binary as `simulate`, `solve`, `indices` and `effects`.

use std::fs;

use sdgem::commands::{cmd_effects, cmd_indices, cmd_simulate, cmd_solve, RunConfig};
use sdgem::inference::ExperimentDesign;
use sdgem::io;

fn main() -> sdgem::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| sdgem::Error::Io { path: ".".into(), source: e })?;
    let root = dir.path();
    let sim = root.join("market.cfg");
    fs::write(
        &sim,
        "graph = grid:3x3\nhorizon = 72\nrequest_rates = 2\ndriver_signin_rates = 0.8\n\
         destination = uniform\nsignoff_prob = 0.2\nwarmup_ticks = 24\nsupply_scale = 0.5\nseed = 3\n",
    )
    .map_err(|e| sdgem::Error::Io { path: sim.clone(), source: e })?;

    let mut cfg = RunConfig { sim_config: Some(sim.clone()), out_dir: root.join("sim"), ..RunConfig::default() };
    let snaps = cmd_simulate(&cfg)?;
    println!("simulate: {} snapshots", snaps.len());

    cfg.sim_config = None;
    cfg.graph = Some(root.join("sim/graph.csv"));
    cfg.snapshots = Some(root.join("sim/snapshots.csv"));
    cfg.out_dir = root.join("solve");
    let solved = cmd_solve(&cfg)?;
    let mean_rho = solved.iter().map(|s| s.rho).sum::<f64>() / solved.len() as f64;
    println!("solve: mean rho {mean_rho:.3}");

    cfg.out_dir = root.join("indices");
    for row in cmd_indices(&cfg)? {
        let t = row.t.map(|t| t.to_string()).unwrap_or_else(|| "all".into());
        let label = row.label.map(|l| l.to_string()).unwrap_or_default();
        println!("indices: t={t:<4} A_d {:+.3}  A_s {:+.3}  {label}", row.a_d, row.a_s);
    }

    let design = ExperimentDesign::randomized(2, 6, 60.0, 5)?;
    io::write_design(&root.join("design.csv"), &design)?;
    cfg.sim_config = Some(sim);
    cfg.design = Some(root.join("design.csv"));
    cfg.out_dir = root.join("effects");
    let effects = cmd_effects(&cfg)?;
    println!("effects: tau_vol {:+.3}, tau_dist {:+.3}", effects.report.tau_vol_hat, effects.report.tau_dist_hat);
    print!("{}", fs::read_to_string(root.join("effects/effects.csv")).unwrap_or_default());
    Ok(())
}
