//! Ratio of kernel derivatives to the pointwise majorant, measured on a
//! window of a few kinetic scales. A bounded spread across times is what
//! the estimate predicts.

use ffpe::kernel::{check_pointwise_bound, GridPolicy, Window};
use ffpe::{Params, TorusGrid};

fn main() -> ffpe::Result<()> {
    let params = Params::default();
    let grid = TorusGrid::new(1, 104.0, 26.0, 2048, 256)?;
    let times = [0.5, 1.0, 2.0, 4.0];
    let orders = [(0, 0), (1, 0), (0, 1)];
    let report = check_pointwise_bound(&times, &orders, GridPolicy::Fixed(grid), &params, Window::KineticScales(5.0))?;
    for row in &report.rows {
        println!("t={:<5} m={} n={} sup ratio={:.4}", row.t, row.m, row.n, row.sup_ratio);
    }
    for (m, n) in orders {
        println!("spread (m={m}, n={n}): {:.3}", report.spread(m, n));
    }
    Ok(())
}
