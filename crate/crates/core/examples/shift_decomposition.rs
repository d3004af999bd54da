//! Split a treatment effect into volume and distribution components and interpret it.
//!
//! Run with `cargo run --example shift_decomposition`.

use sdgem::efficiency::{effect_report, quadrant_interpretation, Arm, ArmSamples, IndexPair, Interpretation};

fn samples(arm: Arm, points: &[(f64, f64)]) -> ArmSamples {
    ArmSamples::new(arm, points.iter().map(|&(d, s)| IndexPair::new(d, s)).collect()).expect("non-empty arm")
}

fn main() -> sdgem::Result<()> {
    let cases = [
        (
            "repositioning in a misaligned market",
            samples(Arm::Control, &[(-0.60, 0.80), (-0.50, 0.70), (-0.70, 0.90)]),
            samples(Arm::Treatment, &[(-0.30, 0.40), (-0.20, 0.50), (-0.40, 0.45)]),
        ),
        (
            "driver bonus in an under-supplied market",
            samples(Arm::Control, &[(-0.90, -0.40), (-0.80, -0.50)]),
            samples(Arm::Treatment, &[(-0.60, -0.15), (-0.50, -0.25)]),
        ),
        (
            "driver bonus in an over-supplied market",
            samples(Arm::Control, &[(0.30, 0.50), (0.40, 0.60)]),
            samples(Arm::Treatment, &[(0.60, 0.80), (0.70, 0.90)]),
        ),
    ];
    for (name, control, treatment) in cases {
        let r = effect_report(&treatment, &control)?;
        println!("{name}");
        println!(
            "  tau1 = {:+.3}  tau_total = {:.3}  tau_vol = {:+.3}  tau_dist = {:+.3}",
            r.tau1_hat, r.tau_total_hat, r.tau_vol_hat, r.tau_dist_hat
        );
        match quadrant_interpretation(&r) {
            Interpretation::SameQuadrant { quadrant, verdict, driver, .. } => {
                println!("  both arms in quadrant {}: {} driven by {driver:?}\n", quadrant.number(), verdict.as_str())
            }
            Interpretation::CrossQuadrant => println!("  arms in different quadrants\n"),
        }
    }
    Ok(())
}
