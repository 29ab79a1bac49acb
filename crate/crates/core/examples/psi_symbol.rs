//! Evaluates the phase `psi(t, xi, eta)` three ways and shows its scaling.

use ffpe::symbols::{psi, psi_closed_form_1d, psi_quadrature};

fn main() {
    let alpha = 1.5;
    println!("{:>6} {:>6} {:>6} {:>14} {:>10}", "t", "xi", "eta", "psi", "quad err");
    for &(t, xi, eta) in &[(0.5, 1.0, 0.0), (1.0, 2.0, 1.0), (1.0, -3.0, 2.0), (2.0, 0.5, -4.0)] {
        let exact = psi_closed_form_1d(t, xi, eta, alpha);
        let quad = psi_quadrature(t, &[xi], &[eta], alpha, 1e-12);
        assert!((psi(t, &[xi], &[eta], alpha) - exact).abs() <= 1e-12 * exact.max(1.0));
        println!("{t:>6} {xi:>6} {eta:>6} {exact:>14.8} {:>10.1e}", (quad - exact).abs() / exact);
    }

    // t -> c t, xi -> xi / c^{1+1/alpha}, eta -> eta / c^{1/alpha} leaves psi unchanged
    let c: f64 = 3.0;
    let s = c.powf(1.0 / alpha);
    let before = psi(1.0, &[2.0], &[1.0], alpha);
    let after = psi(c, &[2.0 / (c * s)], &[1.0 / s], alpha);
    println!("kinetic rescaling by {c}: {before:.12} -> {after:.12}");
}
