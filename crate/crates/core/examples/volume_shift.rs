//! Scale every cell's supply by `1 + β` and watch both indices move along the unit diagonal.
//!
//! Run with `cargo run --example volume_shift`.

use sdgem::indices::{demand_index, local_gaps, scaled_supply_indices, supply_index};

fn main() -> sdgem::Result<()> {
    let field = local_gaps(&[3.0, 1.0, 5.0, 2.0], &[2.0, 4.0, 1.0, 2.0], 0.5)?;
    let (a_d, a_s) = (demand_index(&field)?, supply_index(&field)?);
    println!("baseline: A_d = {a_d:.4}, A_s = {a_s:.4}");
    println!("\n beta   dA_d     dA_s     ln(1+beta)");
    for beta in [-0.5, -0.2, 0.1, 0.5, 1.0, 2.0] {
        let (d, s) = scaled_supply_indices(&field, beta)?;
        println!("{beta:>5}  {:>7.4}  {:>7.4}  {:>7.4}", d - a_d, s - a_s, (1.0f64 + beta).ln());
    }
    Ok(())
}
