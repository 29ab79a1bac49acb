//! Fourier multipliers: the sheared phase integral, the kernel symbol, the
//! drift operator, the anisotropic symbol of the seed norm, derivatives and
//! shifts.
//!
//! Odd symbols (anything with an odd number of `i xi` or `i eta` factors)
//! vanish on the Nyquist planes so that real fields stay real.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::grid::{Side, TorusGrid};
use crate::quadrature::{adaptive, Kink};

/// Relative tolerance of the quadrature branch of [`psi`].
pub const PSI_REL_TOL: f64 = 1e-12;

/// `psi(t, xi, eta) = ∫_0^t |eta - s xi|^alpha ds`.
///
/// Closed forms cover `xi = 0`, `alpha = 2` and `d = 1`; the general case
/// falls back to [`psi_quadrature`].
pub fn psi(t: f64, xi: &[f64], eta: &[f64], alpha: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t == 0.0 {
        return 0.0;
    }
    let xi2 = dot(xi, xi);
    if xi2 == 0.0 {
        return t * dot(eta, eta).sqrt().powf(alpha);
    }
    if alpha == 2.0 {
        let v = t * dot(eta, eta) - t * t * dot(xi, eta) + t * t * t * xi2 / 3.0;
        return v.max(0.0);
    }
    if xi.len() == 1 {
        return psi_closed_form_1d(t, xi[0], eta[0], alpha);
    }
    psi_quadrature(t, xi, eta, alpha, PSI_REL_TOL)
}

/// One-dimensional antiderivative form, valid for `xi != 0`.
pub fn psi_closed_form_1d(t: f64, xi: f64, eta: f64, alpha: f64) -> f64 {
    if xi == 0.0 {
        return t * eta.abs().powf(alpha);
    }
    let signed_pow = |u: f64| u * u.abs().powf(alpha);
    let u = eta - t * xi;
    // when t*xi is tiny against eta the two terms nearly cancel; expand instead
    if (t * xi).abs() < 1e-6 * eta.abs() {
        let e = eta.abs().powf(alpha);
        let r = t * xi / eta;
        return t * e * (1.0 - 0.5 * alpha * r + alpha * (alpha - 1.0) / 6.0 * r * r);
    }
    ((signed_pow(u) - signed_pow(eta)) / (-(alpha + 1.0) * xi)).max(0.0)
}

/// Adaptive Gauss–Legendre evaluation of `psi`, split at the minimizer
/// `s* = xi·eta / |xi|^2` of the integrand when it lies inside `(0, t)`.
pub fn psi_quadrature(t: f64, xi: &[f64], eta: &[f64], alpha: f64, rel_tol: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let xi2 = dot(xi, xi);
    let f = |s: f64| {
        let mut r2 = 0.0;
        for c in 0..xi.len() {
            let u = eta[c] - s * xi[c];
            r2 += u * u;
        }
        r2.sqrt().powf(alpha)
    };
    if xi2 == 0.0 {
        return adaptive(&f, 0.0, t, Kink::None, rel_tol);
    }
    let s_star = dot(xi, eta) / xi2;
    if s_star <= 0.0 {
        adaptive(&f, 0.0, t, Kink::Left, rel_tol)
    } else if s_star >= t {
        adaptive(&f, 0.0, t, Kink::Right, rel_tol)
    } else {
        adaptive(&f, 0.0, s_star, Kink::Right, rel_tol) + adaptive(&f, s_star, t, Kink::Left, rel_tol)
    }
}

/// `exp(-psi(t, xi, eta))` on the whole dual lattice.
pub fn propagator_symbol(t: f64, grid: &TorusGrid, alpha: f64) -> Vec<f64> {
    hermitian_symbol(grid, |xi, eta| (-psi(t, xi, eta, alpha)).exp())
}

pub(crate) fn propagator_symbol_prefix(t: f64, grid: &TorusGrid, alpha: f64, len: usize) -> Vec<f64> {
    hermitian_symbol_prefix(grid, len, |xi, eta| (-psi(t, xi, eta, alpha)).exp())
}

/// Samples a real even-in-`(xi, eta)` symbol on the dual lattice.
///
/// A Nyquist index stands for both `+k_N` and `-k_N`. Symbols that are only
/// jointly even (like `psi`, which couples `xi` and `eta`) would otherwise
/// break Hermitian symmetry on the Nyquist planes, so there the value is
/// averaged over the sign choices of the Nyquist components.
pub fn hermitian_symbol(grid: &TorusGrid, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Vec<f64> {
    hermitian_symbol_prefix(grid, grid.len(), f)
}

/// [`hermitian_symbol`] on the first `len` flat indices only.
pub(crate) fn hermitian_symbol_prefix(grid: &TorusGrid, len: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Vec<f64> {
    let d = grid.d;
    (0..len)
        .into_par_iter()
        .map(|i| {
            let m = grid.mode(i);
            if !(m.any_nyquist_x() || m.any_nyquist_v()) {
                return f(&m.xi[..d], &m.eta[..d]);
            }
            let mut flips: Vec<(bool, usize)> = Vec::new();
            for c in 0..d {
                if m.nyq_x[c] {
                    flips.push((true, c));
                }
                if m.nyq_v[c] {
                    flips.push((false, c));
                }
            }
            let count = 1usize << flips.len();
            let mut acc = 0.0;
            for mask in 0..count {
                let (mut xi, mut eta) = (m.xi, m.eta);
                for (b, &(is_x, c)) in flips.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        if is_x {
                            xi[c] = -xi[c];
                        } else {
                            eta[c] = -eta[c];
                        }
                    }
                }
                acc += f(&xi[..d], &eta[..d]);
            }
            acc / count as f64
        })
        .collect()
}

/// Components of `∇_v Λ_v^{-beta}`: `i eta_c |eta|^{-beta}`, zero at `eta = 0`
/// and on the Nyquist plane of component `c`.
pub fn frac_grad_inv_symbol(grid: &TorusGrid, beta: f64) -> Vec<Vec<Complex64>> {
    (0..grid.d)
        .map(|c| {
            (0..grid.len())
                .map(|i| {
                    let m = grid.mode(i);
                    let r = m.eta_norm();
                    if r == 0.0 || m.nyq_v[c] {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, m.eta[c] * r.powf(-beta))
                    }
                })
                .collect()
        })
        .collect()
}

/// Components of `div_v`: `i eta_c`, Nyquist plane zeroed.
pub fn div_v_symbol(grid: &TorusGrid) -> Vec<Vec<Complex64>> {
    (0..grid.d)
        .map(|c| {
            grid.modes()
                .map(|m| if m.nyq_v[c] { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, m.eta[c]) })
                .collect()
        })
        .collect()
}

/// `P(xi, eta) = (|xi|^{2/(1+alpha)} + |eta|^2)^{alpha/2}`.
pub fn p_symbol(grid: &TorusGrid, alpha: f64) -> Vec<f64> {
    grid.modes()
        .map(|m| {
            let a = m.xi_norm().powf(2.0 / (1.0 + alpha)) + m.eta_norm().powi(2);
            a.powf(alpha / 2.0)
        })
        .collect()
}

/// Orders of a derivative/fractional decoration.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DerivOrders {
    /// Integer derivative order per position component.
    pub x: [usize; 2],
    /// Integer derivative order per velocity component.
    pub v: [usize; 2],
    /// Fractional order of `Λ_x`.
    pub frac_x: f64,
    /// Fractional order of `Λ_v`.
    pub frac_v: f64,
}

impl DerivOrders {
    /// `∂_{x_1}^m ∂_{v_1}^n`.
    pub fn along_first(m: usize, n: usize) -> Self {
        DerivOrders { x: [m, 0], v: [n, 0], ..Default::default() }
    }

    pub fn with_frac(mut self, frac_x: f64, frac_v: f64) -> Self {
        self.frac_x = frac_x;
        self.frac_v = frac_v;
        self
    }

    pub fn total_x(&self) -> usize {
        self.x[0] + self.x[1]
    }

    pub fn total_v(&self) -> usize {
        self.v[0] + self.v[1]
    }

    pub fn is_identity(&self) -> bool {
        self.total_x() == 0 && self.total_v() == 0 && self.frac_x == 0.0 && self.frac_v == 0.0
    }

    /// Every component multi-index with `|x| = m` and `|v| = n` in dimension `d`.
    pub fn all_of_order(d: usize, m: usize, n: usize) -> Vec<DerivOrders> {
        let split = |k: usize| -> Vec<[usize; 2]> {
            if d == 1 {
                vec![[k, 0]]
            } else {
                (0..=k).map(|a| [a, k - a]).collect()
            }
        };
        let mut out = Vec::new();
        for x in split(m) {
            for v in split(n) {
                out.push(DerivOrders { x, v, frac_x: 0.0, frac_v: 0.0 });
            }
        }
        out
    }
}

/// `(i xi)^x (i eta)^v |xi|^{frac_x} |eta|^{frac_v}`.
pub fn derivative_symbol(grid: &TorusGrid, orders: &DerivOrders) -> Vec<Complex64> {
    grid.modes()
        .map(|m| {
            for c in 0..grid.d {
                if (orders.x[c] % 2 == 1 && m.nyq_x[c]) || (orders.v[c] % 2 == 1 && m.nyq_v[c]) {
                    return Complex64::new(0.0, 0.0);
                }
            }
            let mut z = Complex64::new(1.0, 0.0);
            for c in 0..grid.d {
                z *= Complex64::new(0.0, m.xi[c]).powu(orders.x[c] as u32);
                z *= Complex64::new(0.0, m.eta[c]).powu(orders.v[c] as u32);
            }
            if orders.frac_x != 0.0 {
                z *= m.xi_norm().powf(orders.frac_x);
            }
            if orders.frac_v != 0.0 {
                z *= m.eta_norm().powf(orders.frac_v);
            }
            z
        })
        .collect()
}

/// Translation multiplier `exp(-i k·a)` on one side: `f(· - a)`.
pub fn shift_symbol(grid: &TorusGrid, side: Side, a: &[f64]) -> Vec<Complex64> {
    grid.modes()
        .map(|m| {
            let k = match side {
                Side::X => m.xi,
                Side::V => m.eta,
            };
            let ph: f64 = (0..grid.d).map(|c| k[c] * a[c]).sum();
            Complex64::from_polar(1.0, -ph)
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhaseField;
    use std::f64::consts::PI;

    #[test]
    fn psi_trivial_cases() {
        assert_eq!(psi(0.0, &[1.0], &[2.0], 1.5), 0.0);
        let v = psi(2.0, &[0.0], &[3.0], 1.5);
        assert!((v - 2.0 * 3f64.powf(1.5)).abs() < 1e-13);
        // ∫_0^1 s^1.5 ds = 0.4
        assert!((psi(1.0, &[1.0], &[0.0], 1.5) - 0.4).abs() < 1e-15);
        assert!((psi_quadrature(1.0, &[1.0], &[0.0], 1.5, 1e-13) - 0.4).abs() < 1e-13);
    }

    #[test]
    fn psi_alpha_two_is_the_expanded_square() {
        let (t, xi, eta) = (0.7, [1.3, -0.4], [0.2, 2.0]);
        let expect = t * dot(&eta, &eta) - t * t * dot(&xi, &eta) + t.powi(3) * dot(&xi, &xi) / 3.0;
        assert!((psi(t, &xi, &eta, 2.0) - expect).abs() < 1e-14);
        let q = psi_quadrature(t, &xi, &eta, 2.0, 1e-13);
        assert!((q - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn quadrature_matches_closed_form_in_one_dimension() {
        for &alpha in &[1.2, 1.5, 1.8] {
            for &t in &[0.25, 1.0, 4.0] {
                for &(xi, eta) in &[(1.0, 0.5), (-3.0, 2.0), (0.5, -7.0), (2.0, 8.0), (10.0, 1.0)] {
                    let c = psi_closed_form_1d(t, xi, eta, alpha);
                    let q = psi_quadrature(t, &[xi], &[eta], alpha, PSI_REL_TOL);
                    assert!((c - q).abs() <= 1e-10 * c, "alpha={alpha} t={t} xi={xi} eta={eta}: {c} vs {q}");
                }
            }
        }
    }

    #[test]
    fn psi_is_not_additive_in_time() {
        let (xi, eta, alpha) = ([1.3], [0.4], 1.5);
        let (s, t) = (0.3, 0.7);
        let sum = psi(s, &xi, &eta, alpha) + psi(t, &xi, &eta, alpha);
        assert!((psi(s + t, &xi, &eta, alpha) - sum).abs() > 1e-3);
        // the sheared composition is exact
        let shifted = [eta[0] - s * xi[0]];
        let comp = psi(s, &xi, &eta, alpha) + psi(t, &xi, &shifted, alpha);
        assert!((psi(s + t, &xi, &eta, alpha) - comp).abs() < 1e-13);
    }

    #[test]
    fn propagator_symbol_basics() {
        let g = TorusGrid::new(1, 2.0 * PI, 2.0 * PI, 16, 16).unwrap();
        assert!(propagator_symbol(0.0, &g, 1.5).iter().all(|&m| m == 1.0));
        let m = propagator_symbol(0.8, &g, 1.5);
        assert_eq!(m[0], 1.0);
        assert!(m.iter().all(|&v| v > 0.0 && v <= 1.0));
        // Hermitian symmetry holds on the Nyquist planes too
        for i in 0..g.len() {
            let md = g.mode(i);
            let jx = (-md.ix[0]).rem_euclid(16) as usize;
            let jv = (-md.iv[0]).rem_euclid(16) as usize;
            assert!((m[i] - m[jx * 16 + jv]).abs() < 1e-15);
        }
    }

    #[test]
    fn frac_grad_on_single_mode() {
        let g = TorusGrid::new(1, 2.0 * PI, 2.0 * PI, 16, 16).unwrap();
        let sym = frac_grad_inv_symbol(&g, 0.5);
        assert_eq!(sym[0][0], Complex64::new(0.0, 0.0));
        // |eta| = 1 entry has unit magnitude
        assert!((sym[0][1].norm() - 1.0).abs() < 1e-15);
        let f = PhaseField::from_fn(&g, |_, v| (2.0 * v[0]).cos());
        let out = f.spectrum().apply(&sym[0]).to_field();
        let expect = PhaseField::from_fn(&g, |_, v| -(2f64.sqrt()) * (2.0 * v[0]).sin());
        assert!(out.sup_diff(&expect) < 1e-13);
        // odd symbol: sym(-eta) = -sym(eta)
        for iv in 1..8 {
            assert!((sym[0][iv] + sym[0][16 - iv]).norm() < 1e-15);
        }
    }

    #[test]
    fn p_symbol_values() {
        let g = TorusGrid::new(1, 2.0 * PI, 2.0 * PI, 8, 8).unwrap();
        let p = p_symbol(&g, 1.5);
        assert_eq!(p[0], 0.0);
        assert!((p[1] - 1.0).abs() < 1e-15); // xi = 0, eta = 1
        assert!((p[8] - 1.0).abs() < 1e-15); // xi = 1, eta = 0
    }

    #[test]
    fn derivative_symbol_kills_constants_and_nyquist() {
        let g = TorusGrid::new(1, 2.0 * PI, 2.0 * PI, 8, 8).unwrap();
        let s = derivative_symbol(&g, &DerivOrders::along_first(1, 0));
        assert_eq!(s[0], Complex64::new(0.0, 0.0));
        assert_eq!(s[4 * 8], Complex64::new(0.0, 0.0));
        let s2 = derivative_symbol(&g, &DerivOrders::along_first(2, 0));
        assert!((s2[4 * 8].re + 16.0).abs() < 1e-12);
    }
}
