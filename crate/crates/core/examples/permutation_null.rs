//! Estimate the false-positive rate of the permutation tests on sham experiments.
//!
//! Run with `cargo run --release --example permutation_null`.

use rayon::prelude::*;
use sdgem::inference::{permutation_test, ExperimentDesign, PermutationMode, Sidedness, Statistic};
use sdgem::scenarios::city_grid;
use sdgem::sim::{run_ab_experiment, ticks_per_period};

fn main() -> sdgem::Result<()> {
    let (replicates, periods, period_length) = (200u64, 10, 15.0);
    let stats = [Statistic::DemandIndex, Statistic::SupplyIndex, Statistic::Tau1];
    let p_values: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            // No intervention: both arms run the same market.
            let config = city_grid(periods * ticks_per_period(period_length)?, 1000 + r);
            let design = ExperimentDesign::randomized(2, periods, period_length, r)?;
            let run = run_ab_experiment(&config, &design, 0.1, 0.5)?;
            stats
                .iter()
                .map(|&s| {
                    permutation_test(&design, &run.table, s, 1000, Sidedness::TwoSided, PermutationMode::Auto, r)
                        .map(|res| res.p_value)
                })
                .collect()
        })
        .collect::<sdgem::Result<_>>()?;

    for (k, s) in stats.iter().enumerate() {
        let rejected = p_values.iter().filter(|p| p[k] <= 0.05).count();
        println!("{:<5} rejected at 0.05 in {rejected}/{replicates} sham experiments", s.name());
    }
    Ok(())
}
