//! Gauss–Legendre rules and an adaptive integrator for integrands with a
//! known endpoint kink.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Rule applied on `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn rule10() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10))
}

/// Which end of an interval carries a derivative singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kink {
    None,
    Left,
    Right,
}

/// Adaptive Gauss–Legendre quadrature to relative tolerance `rel_tol`.
///
/// Intervals adjacent to a kink are split geometrically toward it (ratio
/// 0.15); smooth intervals are bisected. An interval is accepted when the
/// one-panel and two-panel estimates agree to its share of the tolerance.
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, kink: Kink, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = rule10();
    let whole = rule.integrate(a, b, f);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    refine(f, rule, a, b, kink, whole, rel_tol * scale, b - a, 0)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    kink: Kink,
    coarse: f64,
    abs_tol: f64,
    total_len: f64,
    depth: usize,
) -> f64 {
    let m = match kink {
        Kink::Left => a + 0.15 * (b - a),
        Kink::Right => b - 0.15 * (b - a),
        Kink::None => 0.5 * (a + b),
    };
    let left = rule.integrate(a, m, f);
    let right = rule.integrate(m, b, f);
    let fine = left + right;
    let share = abs_tol * (b - a) / total_len;
    if (fine - coarse).abs() <= share || depth >= 60 || m <= a || m >= b {
        return fine;
    }
    let (kl, kr) = match kink {
        Kink::Left => (Kink::Left, Kink::None),
        Kink::Right => (Kink::None, Kink::Right),
        Kink::None => (Kink::None, Kink::None),
    };
    refine(f, rule, a, m, kl, left, abs_tol, total_len, depth + 1)
        + refine(f, rule, m, b, kr, right, abs_tol, total_len, depth + 1)
}

/// Trapezoid weights for an arbitrary increasing node set.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = nodes[i + 1] - nodes[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let r = GaussLegendre::new(10);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 19 is the exactness limit of a 10-point rule
        let v = r.integrate(0.0, 1.0, |x| x.powi(19));
        assert!((v - 0.05).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_power_kinks() {
        for &alpha in &[1.1, 1.5, 1.9] {
            let f = |s: f64| s.powf(alpha);
            let v = adaptive(&f, 0.0, 1.0, Kink::Left, 1e-13);
            assert!((v - 1.0 / (alpha + 1.0)).abs() < 1e-12 / (alpha + 1.0));
            let g = |s: f64| (1.0 - s).powf(alpha);
            let v = adaptive(&g, 0.0, 1.0, Kink::Right, 1e-13);
            assert!((v - 1.0 / (alpha + 1.0)).abs() < 1e-12 / (alpha + 1.0));
        }
    }

    #[test]
    fn trapezoid_weights_sum_to_length() {
        let nodes: Vec<f64> = (0..=8).map(|j| 1.0 - (1.0 - j as f64 / 8.0).powi(3)).collect();
        let w = trapezoid_weights(&nodes);
        assert!(w.iter().all(|&w| w > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
