//! Seed norm of initial data and the solution norm of its linear flow, for
//! a few data families.

use ffpe::data::DataFamily;
use ffpe::norms::{holder_seminorm, seed_norm, x_norm, NormConfig};
use ffpe::solver::linear_trajectory;
use ffpe::trajectory::TimeGrid;
use ffpe::{Params, TorusGrid};

fn main() -> ffpe::Result<()> {
    let params = Params::default();
    let grid = TorusGrid::new(1, 16.0, 16.0, 128, 128)?;
    let cfg = NormConfig::for_params(&params);
    let times = TimeGrid::dyadic(1.0, -5)?;
    let families = [
        ("gaussian", DataFamily::Gaussian { amplitude: 0.1, wx: 1.0, wv: 0.5 }),
        ("modes", DataFamily::Modes { amplitude: 0.1, kmax: 6, decay: 1.5, seed: 3 }),
        ("rough", DataFamily::Rough { amplitude: 0.1, seed: 3 }),
    ];
    println!("gamma = {:.4}", params.gamma);
    for (name, family) in &families {
        let f0 = family.sample(&grid, &params)?;
        let traj = linear_trajectory(&f0, &times, params.alpha);
        println!(
            "{:<8} sup={:.3e} seed={:.3e} holder(x)={:.3e} X(linear)={:.3e}",
            name,
            f0.sup_norm(),
            seed_norm(&f0, &params, &cfg),
            holder_seminorm(&f0, params.gamma, 0.0, &cfg),
            x_norm(&traj, &params, &cfg)
        );
    }
    Ok(())
}
