//! Solves the nonlinear equation by Picard iteration on the mild form and
//! prints the contraction history.

use ffpe::data::DataFamily;
use ffpe::solver::{picard_solve, PicardOptions};
use ffpe::trajectory::TimeGrid;
use ffpe::{Params, TorusGrid};

fn main() -> ffpe::Result<()> {
    let params = Params::default();
    let grid = TorusGrid::new(1, 16.0, 16.0, 128, 128)?;
    let f0 = DataFamily::Gaussian { amplitude: 0.15, wx: 1.0, wv: 0.5 }.sample(&grid, &params)?;
    let times = TimeGrid::dyadic(1.0, -4)?;
    let (traj, diag) = picard_solve(&f0, &times, &params, &PicardOptions::new(1e-8, 12, &params))?;
    for (k, inc) in diag.increments.iter().enumerate() {
        let ratio = if k > 0 { format!("{:.3}", diag.ratios[k - 1]) } else { "-".into() };
        println!("iteration {:>2}: increment {inc:.3e} ratio {ratio}", k + 1);
    }
    println!("converged={} residual={:.2e} seed norm={:.3e}", diag.converged, diag.residual, diag.seed_norm);
    for (t, m) in traj.time_grid.times.iter().zip(&traj.masses) {
        println!("t={t:<8} mass={m:+.3e}");
    }
    Ok(())
}
