//! Power-law fits of weighted L1 norms of the kernel in time and in the
//! shift size.

use ffpe::kernel::{l1_scaling_fit, Estimate, FitSettings, GridPolicy, Probe, Regime};
use ffpe::{Params, TorusGrid};

fn main() -> ffpe::Result<()> {
    let params = Params::default();
    let settings = FitSettings::new(GridPolicy::KineticScaled(TorusGrid::new(1, 32.0, 24.0, 512, 256)?));
    let times = [0.125, 0.25, 0.5, 1.0, 2.0];
    let probes = [
        Probe::e1(0, 0, 0.0, 0.0),
        Probe::e1(1, 0, 0.5, 0.0),
        Probe::e1(0, 1, 0.0, 0.5),
        Probe::shifted(Estimate::E2, 0, 0, 0.0, 0.0, Regime::Small),
        Probe::shifted(Estimate::E3, 0, 1, 0.0, 0.0, Regime::Large),
    ];
    for probe in &probes {
        let r = l1_scaling_fit(probe, &times, &settings, &params)?;
        print!("{:<28} t-slope {:+.4} (theory {:+.4})", r.probe_id, r.fitted_slope, r.theory_slope);
        if let (Some(a), Some(b)) = (r.a_fitted_slope, r.a_theory_slope) {
            print!("  a-slope {a:+.4} (theory {b:+.4})");
        }
        println!();
    }
    Ok(())
}
