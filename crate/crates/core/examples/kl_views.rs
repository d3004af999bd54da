//! Relate the indices to KL divergences and check the volume margin `A_s·M/N − A_d ≥ 0`.
//!
//! Run with `cargo run --example kl_views`.

use sdgem::indices::{demand_index, kl_forms, local_gaps, volume_margin, supply_index};

fn main() -> sdgem::Result<()> {
    let supply = [4.0, 1.0, 3.0, 6.0, 2.0];
    let demand = [2.0, 3.0, 3.0, 2.0, 5.0];
    let field = local_gaps(&supply, &demand, 0.5)?;
    let (a_d, a_s) = (demand_index(&field)?, supply_index(&field)?);
    let kl = kl_forms(&supply, &demand, 0.5)?;

    println!("A_s = {a_s:.6}   KL(supply || demand) + ln(M/N) = {:.6}", kl.forward + kl.log_volume_ratio);
    println!("A_d = {a_d:.6}   -KL(demand || supply) + ln(M/N) = {:.6}", -kl.reverse + kl.log_volume_ratio);

    let (m, n) = (field.total_supply(), field.total_demand());
    let margin = volume_margin(a_d, a_s, m, n)?;
    println!("\nM = {m}, N = {n}, A_s*M/N - A_d = {:.6} (violated: {})", margin.value, margin.violated);
    println!("the margin is (1/N) * sum (supply - demand) * gap, a sum of nonnegative terms");
    Ok(())
}
