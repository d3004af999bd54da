//! Run the market simulator and track the indices window by window.
//!
//! Run with `cargo run --release --example simulate_market`.

use sdgem::indices::{classify, DEFAULT_DELTA, DEFAULT_EPSILON};
use sdgem::scenarios::{balanced_grid, misaligned_corridor};
use sdgem::sim::{measure_window, run_episode, TICK_MINUTES};

fn main() -> sdgem::Result<()> {
    let window = 48;
    for (name, config) in [
        ("balanced 10x10 grid", balanced_grid(4 * window, 7)),
        ("misaligned corridor", misaligned_corridor(4 * window, 7)),
    ] {
        let snaps = run_episode(&config)?;
        println!("{name}: {} cells, {} ticks of {TICK_MINUTES} minutes", config.n_cells(), snaps.len());
        for (k, chunk) in snaps.chunks(window).enumerate() {
            let (a_d, a_s, rho) = measure_window(&config.graph, chunk, 0.1, DEFAULT_EPSILON)?;
            let label = classify(a_d, a_s, DEFAULT_DELTA).map(|l| l.to_string()).unwrap_or_default();
            println!("  window {k}: A_d {a_d:+.3}  A_s {a_s:+.3}  mean rho {rho:7.2}  {label}");
        }
        println!();
    }
    Ok(())
}
