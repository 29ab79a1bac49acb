//! Property tests for structural invariants of the symbols, flows, norms
//! and file format.

use ffpe::data::DataFamily;
use ffpe::grid::Side;
use ffpe::io::{decode, read_array, write_field};
use ffpe::norms::{holder_seminorm, seed_norm, NormConfig};
use ffpe::solver::{bilinear_force, linear_evolve, nonlinearity, transport};
use ffpe::symbols::{psi, psi_closed_form_1d, psi_quadrature};
use ffpe::{Params, PhaseField, TorusGrid};
use proptest::prelude::*;

fn grid() -> TorusGrid {
    TorusGrid::new(1, 8.0, 8.0, 16, 16).unwrap()
}

fn field(seed: u64, amplitude: f64) -> PhaseField {
    DataFamily::Modes { amplitude, kmax: 4, decay: 1.0, seed }.sample(&grid(), &Params::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psi_is_homogeneous_and_critical(t in 0.05f64..4.0, xi in -10f64..10.0, eta in -10f64..10.0, c in 0.2f64..5.0, alpha in 1.05f64..1.95) {
        let base = psi(t, &[xi], &[eta], alpha);
        prop_assert!(base >= 0.0);
        prop_assert!(rel(psi(t, &[c * xi], &[c * eta], alpha), c.powf(alpha) * base) < 1e-11);
        let s = c.powf(1.0 / alpha);
        prop_assert!(rel(psi(c * t, &[xi / (c * s)], &[eta / s], alpha), base) < 1e-11);
    }

    #[test]
    fn psi_quadrature_agrees_off_lattice(t in 0.05f64..4.0, xi in -20f64..20.0, eta in -20f64..20.0, alpha in 1.05f64..1.95) {
        let exact = psi_closed_form_1d(t, xi, eta, alpha);
        prop_assert!(rel(psi_quadrature(t, &[xi], &[eta], alpha, 1e-12), exact) < 1e-10);
    }

    #[test]
    fn linear_flow_conserves_mass_and_is_linear(seed in 0u64..1000, t in 0.0f64..3.0, a in -2f64..2.0) {
        let p = Params::default();
        let f = field(seed, 1.0);
        let g = field(seed + 1, 1.0);
        let lhs = linear_evolve(&f.scale(a).add(&g), t, p.alpha);
        let rhs = linear_evolve(&f, t, p.alpha).scale(a).add(&linear_evolve(&g, t, p.alpha));
        prop_assert!(lhs.sup_diff(&rhs) < 1e-12);
        let moved = PhaseField::from_fn(&grid(), |_, _| 1.0).add(&f);
        prop_assert!((linear_evolve(&moved, t, p.alpha).mass() - moved.mass()).abs() < 1e-10);
    }

    #[test]
    fn linear_flow_commutes_with_position_translations(seed in 0u64..1000, t in 0.0f64..3.0, shift in -8i64..8) {
        let p = Params::default();
        let f = field(seed, 1.0);
        let a = linear_evolve(&f.roll(Side::X, 0, shift), t, p.alpha);
        let b = linear_evolve(&f, t, p.alpha).roll(Side::X, 0, shift);
        prop_assert!(a.sup_diff(&b) < 1e-12);
    }

    #[test]
    fn transport_is_a_group(seed in 0u64..1000, s in -2f64..2.0, r in -2f64..2.0) {
        let f = field(seed, 1.0);
        let once = transport(&f, s + r);
        let twice = transport(&transport(&f, s), r);
        prop_assert!(once.sup_diff(&twice) < 1e-11);
        prop_assert!(transport(&transport(&f, s), -s).sup_diff(&f) < 1e-11);
    }

    #[test]
    fn holder_seminorm_is_a_seminorm(seed in 0u64..1000, c in -3f64..3.0) {
        let cfg = NormConfig::dyadic(3);
        let f = field(seed, 1.0);
        let g = field(seed + 7, 0.5);
        let nf = holder_seminorm(&f, 0.3, 0.6, &cfg);
        prop_assert!(rel(holder_seminorm(&f.scale(c), 0.3, 0.6, &cfg), c.abs() * nf) < 1e-12);
        let sum = holder_seminorm(&f.add(&g), 0.3, 0.6, &cfg);
        prop_assert!(sum <= nf + holder_seminorm(&g, 0.3, 0.6, &cfg) + 1e-12);
        let constant = PhaseField::from_fn(&grid(), |_, _| c);
        prop_assert!((holder_seminorm(&f.add(&constant), 0.3, 0.6, &cfg) - nf).abs() < 1e-12);
    }

    #[test]
    fn seed_norm_is_homogeneous(seed in 0u64..1000, c in -3f64..3.0) {
        let p = Params::default();
        let cfg = NormConfig::for_params(&p);
        let f = field(seed, 1.0);
        prop_assert!(rel(seed_norm(&f.scale(c), &p, &cfg), c.abs() * seed_norm(&f, &p, &cfg)) < 1e-12);
    }

    #[test]
    fn force_is_bilinear_and_needs_velocity_dependence(seed in 0u64..1000, a in -2f64..2.0) {
        let p = Params::default();
        let f = field(seed, 1.0);
        let g = field(seed + 3, 1.0);
        let h = field(seed + 5, 1.0);
        let lhs = bilinear_force(&f.scale(a).add(&g), &h, p.beta).unwrap();
        let rhs = bilinear_force(&f, &h, p.beta).unwrap();
        let rhs2 = bilinear_force(&g, &h, p.beta).unwrap();
        let expect = rhs.components[0].scale(a).add(&rhs2.components[0]);
        prop_assert!(lhs.components[0].sup_diff(&expect) < 1e-12);
        // a velocity-independent density exerts no drift
        let flat = PhaseField::from_fn(&grid(), |x, _| (std::f64::consts::PI * x[0] / 4.0).sin() * a);
        prop_assert!(nonlinearity(&flat, &p).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn arrays_round_trip(seed in 0u64..1000, time in 0f64..10.0, code in 0u32..6) {
        let f = field(seed, 3.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        write_field(&path, &f, time, code).unwrap();
        let (h, back) = read_array(&path).unwrap();
        prop_assert_eq!(h.time, time);
        prop_assert_eq!(h.provenance, code);
        prop_assert_eq!(&back[0], &f);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        prop_assert!(decode(&bytes).is_err());
    }
}
