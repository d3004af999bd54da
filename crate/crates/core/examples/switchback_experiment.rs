//! Simulate a switchback experiment with a repositioning policy and run the permutation battery.
//!
//! Run with `cargo run --release --example switchback_experiment`.

use sdgem::efficiency::{effect_report, quadrant_interpretation, Arm, Interpretation};
use sdgem::inference::{arm_samples, run_standard_battery, shift_by_market, ExperimentDesign};
use sdgem::scenarios::misaligned_corridor;
use sdgem::sim::{run_ab_experiment, ticks_per_period};

fn main() -> sdgem::Result<()> {
    let (periods, period_length) = (20, 60.0);
    let design = ExperimentDesign::randomized(2, periods, period_length, 11)?;
    let mut config = misaligned_corridor(periods * ticks_per_period(period_length)?, 42);
    config.intervention.repositioning_strength = 0.5;

    let run = run_ab_experiment(&config, &design, 0.1, 0.5)?;
    let report = effect_report(
        &arm_samples(&design, &run.table, Arm::Treatment)?,
        &arm_samples(&design, &run.table, Arm::Control)?,
    )?;
    println!(
        "control mean ({:+.3}, {:+.3}) -> treatment mean ({:+.3}, {:+.3})",
        report.control_mean.a_d, report.control_mean.a_s, report.treatment_mean.a_d, report.treatment_mean.a_s
    );
    if let Interpretation::SameQuadrant { quadrant, verdict, .. } = quadrant_interpretation(&report) {
        println!("both arms in quadrant {}: {}", quadrant.number(), verdict.as_str());
    }

    println!("\nstatistic   estimate       se   p-value  sidedness");
    for r in run_standard_battery(&design, &run.table, 2000, 1)? {
        println!(
            "{:<10} {:>+9.4} {:>8.4} {:>9.4}  {}",
            r.statistic.name(), r.estimate, r.standard_error, r.p_value, r.sidedness.as_str()
        );
    }

    println!("\nper-market shift (dA_d, dA_s)");
    for s in shift_by_market(&design, &run.table)? {
        println!("  {}: ({:+.3}, {:+.3})", s.market, s.delta_a_d, s.delta_a_s);
    }
    Ok(())
}
