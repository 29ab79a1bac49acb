//! Seeded initial-data families.
//!
//! All families are mean-zero, real and band-limited to the dealiasing
//! window, so the nonlinearity sees every active mode exactly.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseField, Spectrum, TorusGrid};
use crate::params::Params;
use crate::symbols::p_symbol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataFamily {
    /// Product of Gaussians of widths `wx` and `wv`, minus its box mean.
    Gaussian { amplitude: f64, wx: f64, wv: f64 },
    /// Random phases on the modes with `|k| <= kmax` per axis, amplitude
    /// `(1 + |k|^2)^{-decay/2}` in lattice units.
    Modes { amplitude: f64, kmax: usize, decay: f64, seed: u64 },
    /// Random phases with `|f_hat| ∝ (1 + P)^{-(4 - beta)/alpha}`, inside the
    /// dealiasing window.
    Rough { amplitude: f64, seed: u64 },
    /// `exp(-|v|^2 / (2 wv^2)) (1 + cos(2π x_1 / L_x + 0.4))` minus its mean:
    /// one position wave under a velocity bump, for boxes whose position
    /// side is too short to hold a bump.
    Wave { amplitude: f64, wv: f64 },
}

impl DataFamily {
    pub fn amplitude(&self) -> f64 {
        match *self {
            DataFamily::Gaussian { amplitude, .. }
            | DataFamily::Modes { amplitude, .. }
            | DataFamily::Rough { amplitude, .. }
            | DataFamily::Wave { amplitude, .. } => amplitude,
        }
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        match &mut self {
            DataFamily::Gaussian { amplitude, .. }
            | DataFamily::Modes { amplitude, .. }
            | DataFamily::Rough { amplitude, .. }
            | DataFamily::Wave { amplitude, .. } => *amplitude = a,
        }
        self
    }

    pub fn label(&self) -> &'static str {
        match self {
            DataFamily::Gaussian { .. } => "gaussian",
            DataFamily::Modes { .. } => "modes",
            DataFamily::Rough { .. } => "rough",
            DataFamily::Wave { .. } => "wave",
        }
    }

    /// The three default families, at unit amplitude.
    pub fn defaults(seed: u64) -> Vec<DataFamily> {
        vec![
            DataFamily::Gaussian { amplitude: 1.0, wx: 1.0, wv: 0.5 },
            DataFamily::Modes { amplitude: 1.0, kmax: 4, decay: 2.0, seed },
            DataFamily::Rough { amplitude: 1.0, seed },
        ]
    }

    pub fn sample(&self, grid: &TorusGrid, params: &Params) -> Result<PhaseField> {
        if !self.amplitude().is_finite() {
            return Err(Error::InvalidParams { field: "amplitude", reason: "must be finite".into() });
        }
        let f = match *self {
            DataFamily::Gaussian { amplitude, wx, wv } => {
                if !(wx > 0.0 && wv > 0.0) {
                    return Err(Error::InvalidParams { field: "width", reason: "widths must be positive".into() });
                }
                let raw = PhaseField::from_fn(grid, |x, v| {
                    let mut e = 0.0;
                    for c in 0..grid.d {
                        e += (x[c] / wx).powi(2) + (v[c] / wv).powi(2);
                    }
                    (-0.5 * e).exp()
                });
                let spec = band_limit(&raw.spectrum());
                remove_mean(spec).to_field().scale(amplitude / raw.sup_norm())
            }
            DataFamily::Modes { amplitude, kmax, decay, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let limit = (grid.nx.min(grid.nv) / 3) as i64;
                let k = (kmax as i64).min(limit);
                let mut spec = Spectrum::zeros(grid);
                for (i, m) in grid.modes().enumerate() {
                    let inside = (0..grid.d).all(|c| m.ix[c].abs() <= k && m.iv[c].abs() <= k);
                    if inside {
                        let k2: i64 = (0..grid.d).map(|c| m.ix[c].pow(2) + m.iv[c].pow(2)).sum();
                        let phase = rng.gen_range(0.0..2.0 * PI);
                        spec.coeffs[i] = Complex64::from_polar((1.0 + k2 as f64).powf(-0.5 * decay), phase);
                    }
                }
                finish(spec, amplitude)
            }
            DataFamily::Rough { amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = p_symbol(grid, params.alpha);
                let s = (4.0 - params.beta) / params.alpha;
                let mut spec = Spectrum::zeros(grid);
                for (i, _) in grid.modes().enumerate() {
                    let phase = rng.gen_range(0.0..2.0 * PI);
                    spec.coeffs[i] = Complex64::from_polar((1.0 + p[i]).powf(-s), phase);
                }
                finish(band_limit(&spec), amplitude)
            }
            DataFamily::Wave { amplitude, wv } => {
                if !(wv > 0.0) {
                    return Err(Error::InvalidParams { field: "width", reason: "widths must be positive".into() });
                }
                let k = 2.0 * PI / grid.lx;
                let raw = PhaseField::from_fn(grid, |x, v| {
                    let vv: f64 = v[..grid.d].iter().map(|c| c * c).sum();
                    (-0.5 * vv / (wv * wv)).exp() * (1.0 + (k * x[0] + 0.4).cos())
                });
                remove_mean(band_limit(&raw.spectrum())).to_field().scale(amplitude)
            }
        };
        Ok(f)
    }
}

fn remove_mean(mut spec: Spectrum) -> Spectrum {
    spec.coeffs[0] = Complex64::new(0.0, 0.0);
    spec
}

fn band_limit(spec: &Spectrum) -> Spectrum {
    crate::solver::dealias(spec)
}

/// Real part, mean removed, scaled to the given sup norm.
fn finish(spec: Spectrum, amplitude: f64) -> PhaseField {
    let f = remove_mean(spec).to_field();
    let s = f.sup_norm();
    if s == 0.0 {
        f
    } else {
        f.scale(amplitude / s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_are_mean_zero_and_scaled() {
        let g = TorusGrid::new(1, 16.0, 8.0, 64, 64).unwrap();
        let p = Params::default();
        for fam in DataFamily::defaults(7) {
            let f = fam.with_amplitude(0.3).sample(&g, &p).unwrap();
            assert!(f.mass().abs() < 1e-13, "{}", fam.label());
            if !matches!(fam, DataFamily::Gaussian { .. }) {
                assert!((f.sup_norm() - 0.3).abs() < 1e-14);
            }
            let again = fam.with_amplitude(0.3).sample(&g, &p).unwrap();
            assert_eq!(f, again);
        }
    }

    #[test]
    fn seeds_differ() {
        let g = TorusGrid::new(1, 16.0, 8.0, 32, 32).unwrap();
        let p = Params::default();
        let a = DataFamily::Rough { amplitude: 1.0, seed: 1 }.sample(&g, &p).unwrap();
        let b = DataFamily::Rough { amplitude: 1.0, seed: 2 }.sample(&g, &p).unwrap();
        assert!(a.sup_diff(&b) > 0.1);
    }
}
