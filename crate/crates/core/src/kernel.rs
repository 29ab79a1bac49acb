//! Kernel laboratory: decorated snapshots of the fundamental solution,
//! weighted L1 norms, finite differences, the pointwise bound and the
//! power-law fits of the weighted L1 estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::log_log_fit;
use crate::grid::{inverse, pairwise_sum, PhaseField, Side, Spectrum, TorusGrid};
use crate::params::Params;
use crate::symbols::{derivative_symbol, propagator_symbol, shift_symbol, DerivOrders};

/// Largest imaginary residue tolerated before a snapshot is rejected.
const IMAG_TOL: f64 = 1e-10;

/// `H(t)` (possibly decorated) sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSnapshot {
    pub t: f64,
    pub decoration: DerivOrders,
    pub field: PhaseField,
}

impl KernelSnapshot {
    pub fn grid(&self) -> TorusGrid {
        self.field.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    /// Cell-weighted sum.
    pub fn mass(&self) -> f64 {
        self.field.mass()
    }

    /// `δ_a H` along one side, decoration kept.
    pub fn difference(&self, side: Side, a: &[f64]) -> KernelSnapshot {
        KernelSnapshot { field: finite_difference(&self.field, side, a), ..self.clone() }
    }

    /// `max |H(z) - H(-z)| / max |H|`.
    pub fn evenness_defect(&self) -> f64 {
        let g = self.grid();
        let mut reflected = self.field.clone();
        for (i, r) in reflected.values.iter_mut().enumerate() {
            *r = self.field.values[reflected_index(&g, i)];
        }
        self.field.sup_diff(&reflected) / self.field.sup_norm().max(f64::MIN_POSITIVE)
    }

    /// `min H / max |H|`; nonnegative kernels give a value near zero or above.
    pub fn relative_min(&self) -> f64 {
        let min = self.field.values.iter().copied().fold(f64::INFINITY, f64::min);
        min / self.field.sup_norm().max(f64::MIN_POSITIVE)
    }
}

fn reflected_index(g: &TorusGrid, i: usize) -> usize {
    let (ix, iv) = g.unflatten(i);
    let mut idx = 0;
    for c in 0..g.d {
        idx = idx * g.nx + (g.nx - ix[c]) % g.nx;
    }
    for c in 0..g.d {
        idx = idx * g.nv + (g.nv - iv[c]) % g.nv;
    }
    idx
}

/// Tail rule: both box sides at least 20 kinetic scales at time `t`.
pub fn box_fits(t: f64, grid: &TorusGrid, alpha: f64) -> bool {
    let sv = t.powf(1.0 / alpha);
    grid.lx >= 20.0 * t * sv && grid.lv >= 20.0 * sv
}

/// Rough size of the symbol on the edge of the truncated dual lattice.
///
/// The symbol decays slowest along the sheared ridge `eta = t xi / 2`, where
/// `psi = t^{1+alpha} |xi|^alpha / (2^alpha (alpha + 1))`; on the velocity edge
/// its minimum is `t |eta|^alpha / (alpha + 1)`. Values above about `1e-7`
/// leave visible Gibbs ripples and negative kernel values.
pub fn spectral_floor(t: f64, grid: &TorusGrid, alpha: f64) -> f64 {
    let xi_n = std::f64::consts::PI / grid.dx();
    let eta_n = std::f64::consts::PI / grid.dv();
    let on_x = t.powf(1.0 + alpha) * xi_n.powf(alpha) / (2f64.powf(alpha) * (alpha + 1.0));
    let on_v = t * eta_n.powf(alpha) / (alpha + 1.0);
    (-on_x.min(on_v)).exp()
}

fn check_decoration(deco: &DerivOrders, params: &Params) -> Result<()> {
    let order = deco.total_x() + deco.total_v();
    if order > params.max_deriv {
        return Err(Error::DerivativeCap { order, cap: params.max_deriv });
    }
    for (name, g) in [("gamma1", deco.frac_x), ("gamma2", deco.frac_v)] {
        if !(0.0..1.0).contains(&g) {
            return Err(Error::InvalidParams { field: "decoration", reason: format!("{name} = {g} is outside [0, 1)") });
        }
    }
    Ok(())
}

/// Inverse transform of the decorated symbol, divided by the box volume so
/// that the undecorated snapshot has cell-sum exactly 1.
pub fn kernel_snapshot(t: f64, decoration: DerivOrders, grid: &TorusGrid, params: &Params) -> Result<KernelSnapshot> {
    if t <= 0.0 {
        return Err(Error::ZeroTime);
    }
    check_decoration(&decoration, params)?;
    if !box_fits(t, grid, params.alpha) {
        log::warn!("box ({}, {}) is below 20 kinetic scales at t = {t}", grid.lx, grid.lv);
    }
    if spectral_floor(t, grid, params.alpha) > 1e-7 {
        log::warn!("grid under-resolves the kernel at t = {t}");
    }
    let m = propagator_symbol(t, grid, params.alpha);
    let mut spec = Spectrum { grid: *grid, coeffs: m.iter().map(|&m| m.into()).collect() };
    if !decoration.is_identity() {
        spec = spec.apply(&derivative_symbol(grid, &decoration));
    }
    let (field, imag) = inverse(&spec);
    let vol = grid.volume();
    let field = field.scale(1.0 / vol);
    let sup = field.sup_norm();
    if imag / vol > IMAG_TOL * sup.max(f64::MIN_POSITIVE) {
        return Err(Error::Breakdown(format!("kernel imaginary residue {} exceeds tolerance", imag / vol)));
    }
    Ok(KernelSnapshot { t, decoration, field })
}

/// `∫ |x|^{l1} |v|^{l2} |H|`, distances to the nearest periodic image.
pub fn weighted_l1(snapshot: &KernelSnapshot, l1: f64, l2: f64) -> f64 {
    let g = snapshot.grid();
    let d = g.d;
    let terms: Vec<f64> = snapshot
        .field
        .values
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            if *h == 0.0 {
                return 0.0;
            }
            let (x, v) = g.point(i);
            let rx = x[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
            let rv = v[..d].iter().map(|c| c * c).sum::<f64>().sqrt();
            weight(rx, l1) * weight(rv, l2) * h.abs()
        })
        .collect();
    pairwise_sum(&terms) * g.cell_volume()
}

fn weight(r: f64, l: f64) -> f64 {
    if l == 0.0 {
        1.0
    } else {
        r.powf(l)
    }
}

/// `δ_a f(z) = f(z) - f(z - a)` along one side. Shifts that are whole
/// multiples of the spacing are exact rolls; others use a spectral phase.
pub fn finite_difference(field: &PhaseField, side: Side, a: &[f64]) -> PhaseField {
    shifted(field, side, a).map_or_else(|| field.clone(), |s| field.sub(&s))
}

/// `f(z - a)` along one side, or `None` for a zero shift.
pub fn shifted(field: &PhaseField, side: Side, a: &[f64]) -> Option<PhaseField> {
    let g = field.grid;
    let h = g.spacing(side);
    let n = g.side_points(side) as f64;
    let steps: Vec<f64> = a.iter().take(g.d).map(|ai| ai / h).collect();
    if steps.iter().all(|&s| s == 0.0) {
        return None;
    }
    let on_lattice = steps.iter().all(|s| (s - s.round()).abs() <= 1e-9 * s.abs().max(1.0));
    if on_lattice {
        let mut out = field.clone();
        for (c, s) in steps.iter().enumerate() {
            let k = (s.round() as i64).rem_euclid(n as i64);
            if k != 0 {
                out = out.roll(side, c, k);
            }
        }
        return Some(out);
    }
    let mut full = [0.0; 2];
    full[..g.d].copy_from_slice(&a[..g.d]);
    Some(field.spectrum().apply(&shift_symbol(&g, side, &full[..g.d])).to_field())
}

/// How a kernel grid depends on the sampled time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridPolicy {
    /// One grid for every time.
    Fixed(TorusGrid),
    /// The given grid at `t = 1`; at time `t` both sides are multiplied by
    /// the kinetic scales `t^{1+1/alpha}` and `t^{1/alpha}`.
    KineticScaled(TorusGrid),
}

impl GridPolicy {
    pub fn grid_at(&self, t: f64, alpha: f64) -> TorusGrid {
        match self {
            GridPolicy::Fixed(g) => *g,
            GridPolicy::KineticScaled(g) => {
                let sv = t.powf(1.0 / alpha);
                g.scaled(t * sv, sv)
            }
        }
    }
}

/// Right side of the pointwise kernel bound (without its constant).
pub fn pointwise_rhs(t: f64, x: &[f64], v: &[f64], m: usize, n: usize, alpha: f64) -> f64 {
    let d = x.len() as f64;
    let sx = t.powf(-1.0 / alpha - 1.0);
    let sv = t.powf(-1.0 / alpha);
    let xx: f64 = x.iter().map(|c| c * c).sum();
    let vv: f64 = v.iter().map(|c| c * c).sum();
    let bracket1 = (1.0 + sx * sx * xx + sv * sv * vv).sqrt();
    let near = inf_segment_distance(x, v, t);
    let bracket2 = (1.0 + sx * sx * near * near).sqrt();
    let prefactor = t.powf(-(2.0 * d + (m + n) as f64) / alpha - m as f64 - d);
    prefactor / (bracket1.powf(d + alpha + 1.0) * bracket2.powf(d + alpha - 1.0))
}

/// `inf_{s in [0,1]} |x - s t v|`, minimizing the quadratic in closed form.
pub fn inf_segment_distance(x: &[f64], v: &[f64], t: f64) -> f64 {
    let w: Vec<f64> = v.iter().map(|c| t * c).collect();
    let ww: f64 = w.iter().map(|c| c * c).sum();
    let s = if ww == 0.0 {
        0.0
    } else {
        (x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / ww).clamp(0.0, 1.0)
    };
    x.iter().zip(&w).map(|(a, b)| (a - s * b).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub t: f64,
    pub m: usize,
    pub n: usize,
    pub sup_ratio: f64,
    /// Phase-space location of the largest ratio.
    pub argmax_x: Vec<f64>,
    pub argmax_v: Vec<f64>,
    pub kernel_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub rows: Vec<PointwiseRow>,
}

impl PointwiseReport {
    /// Largest over smallest sup ratio across times, per `(m, n)`.
    pub fn spread(&self, m: usize, n: usize) -> f64 {
        let r: Vec<f64> = self.rows.iter().filter(|r| r.m == m && r.n == n).map(|r| r.sup_ratio).collect();
        let hi = r.iter().copied().fold(0.0, f64::max);
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Region where the pointwise ratio is measured.
///
/// Periodic images of the heavy kernel tails dominate far from the origin,
/// where the whole-space bound says nothing about the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Window {
    /// Central fraction of each box side.
    BoxFraction(f64),
    /// `|x| <= w t^{1+1/alpha}` and `|v| <= w t^{1/alpha}` per component: the
    /// same self-similar region at every time.
    KineticScales(f64),
}

/// Sup of `|∂_x^m ∂_v^n H| / RHS` over the window at each time, derivatives
/// along the first component.
pub fn check_pointwise_bound(
    t_list: &[f64],
    orders: &[(usize, usize)],
    policy: GridPolicy,
    params: &Params,
    window: Window,
) -> Result<PointwiseReport> {
    let mut rows = Vec::new();
    for &t in t_list {
        let grid = policy.grid_at(t, params.alpha);
        let (hx, hv) = match window {
            Window::BoxFraction(w) => (0.5 * w * grid.lx, 0.5 * w * grid.lv),
            Window::KineticScales(w) => {
                let sv = t.powf(1.0 / params.alpha);
                (w * t * sv, w * sv)
            }
        };
        for &(m, n) in orders {
            let snap = kernel_snapshot(t, DerivOrders::along_first(m, n), &grid, params)?;
            let d = grid.d;
            let (best, idx) = snap
                .field
                .values
                .par_iter()
                .enumerate()
                .map(|(i, h)| {
                    let (x, v) = grid.point(i);
                    let inside = (0..d).all(|c| x[c].abs() <= hx && v[c].abs() <= hv);
                    if !inside {
                        return (0.0, i);
                    }
                    (h.abs() / pointwise_rhs(t, &x[..d], &v[..d], m, n, params.alpha), i)
                })
                .reduce(|| (0.0, 0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
            let (x, v) = grid.point(idx);
            rows.push(PointwiseRow {
                t,
                m,
                n,
                sup_ratio: best,
                argmax_x: x[..d].to_vec(),
                argmax_v: v[..d].to_vec(),
                kernel_sup: snap.field.sup_norm(),
            });
        }
    }
    Ok(PointwiseReport { rows })
}

/// Which of the five weighted L1 estimates a probe exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimate {
    /// `|x|^{l1}|v|^{l2} ∇^{j1}∇^{j2} H`.
    E1,
    /// Same with an x-difference.
    E2,
    /// Same with a v-difference.
    E3,
    /// Fractional decoration, x-difference, no weights.
    E4,
    /// Fractional decoration, v-difference, no weights.
    E5,
}

/// Shift size relative to the kinetic scale of the shifted side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub estimate: Estimate,
    pub j1: usize,
    pub j2: usize,
    pub l1: f64,
    pub l2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub regime: Option<Regime>,
}

impl Probe {
    pub fn e1(j1: usize, j2: usize, l1: f64, l2: f64) -> Self {
        Probe { estimate: Estimate::E1, j1, j2, l1, l2, gamma1: 0.0, gamma2: 0.0, regime: None }
    }

    pub fn shifted(estimate: Estimate, j1: usize, j2: usize, l1: f64, l2: f64, regime: Regime) -> Self {
        Probe { estimate, j1, j2, l1, l2, gamma1: 0.0, gamma2: 0.0, regime: Some(regime) }
    }

    pub fn fractional(estimate: Estimate, gamma1: f64, gamma2: f64, regime: Regime) -> Self {
        Probe { estimate, j1: 0, j2: 0, l1: 0.0, l2: 0.0, gamma1, gamma2, regime: Some(regime) }
    }

    pub fn id(&self) -> String {
        let base = format!(
            "{:?}({},{},{},{})",
            self.estimate, self.j1, self.j2, self.l1, self.l2
        )
        .to_lowercase();
        let frac = if self.gamma1 != 0.0 || self.gamma2 != 0.0 {
            format!("[g={},{}]", self.gamma1, self.gamma2)
        } else {
            String::new()
        };
        match self.regime {
            Some(r) => format!("{base}{frac}-{}", format!("{r:?}").to_lowercase()),
            None => format!("{base}{frac}"),
        }
    }

    fn decoration(&self) -> DerivOrders {
        DerivOrders::along_first(self.j1, self.j2).with_frac(self.gamma1, self.gamma2)
    }

    fn side(&self) -> Option<Side> {
        match self.estimate {
            Estimate::E1 => None,
            Estimate::E2 | Estimate::E4 => Some(Side::X),
            Estimate::E3 | Estimate::E5 => Some(Side::V),
        }
    }

    fn validate(&self, params: &Params) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidParams { field: "probe", reason });
        if !(0.0..1.0).contains(&self.l1) || !(0.0..1.0).contains(&self.l2) {
            return bad(format!("weights ({}, {}) must lie in [0, 1)", self.l1, self.l2));
        }
        if self.l1 + self.l2 >= params.alpha {
            return bad(format!("l1 + l2 = {} must stay below alpha", self.l1 + self.l2));
        }
        if self.estimate == Estimate::E1 && self.regime.is_some() {
            return bad("an undifferenced probe has no shift regime".into());
        }
        if self.estimate != Estimate::E1 && self.regime.is_none() {
            return bad("a differenced probe needs a shift regime".into());
        }
        Ok(())
    }

    /// Exponent of `t` in the undifferenced bound at this decoration.
    fn base_exponent(&self, alpha: f64) -> f64 {
        let j1 = self.j1 as f64 + self.gamma1;
        let j2 = self.j2 as f64 + self.gamma2;
        ((self.l1 - j1) * (1.0 + alpha) + self.l2 - j2) / alpha
    }

    /// Kinetic scale of the shifted side at time `t`.
    fn side_scale(&self, t: f64, alpha: f64) -> f64 {
        match self.side() {
            Some(Side::X) => t.powf((1.0 + alpha) / alpha),
            _ => t.powf(1.0 / alpha),
        }
    }

    /// Predicted slope in `t`. Small shifts are held fixed, large shifts
    /// grow with the kinetic scale (a fixed shift cannot stay large on every
    /// probed box).
    pub fn t_exponent(&self, alpha: f64) -> f64 {
        let base = self.base_exponent(alpha);
        let side_exp = match self.side() {
            None => return base,
            Some(Side::X) => (1.0 + alpha) / alpha,
            Some(Side::V) => 1.0 / alpha,
        };
        match self.regime.expect("validated") {
            // |a| times the undifferenced norm with one more derivative
            Regime::Small => base - side_exp,
            // a on the kinetic scale: |a|^l replaces the weight's own scaling
            Regime::Large => base,
        }
    }

    /// Predicted slope in `|a|` at fixed time.
    pub fn a_exponent(&self) -> Option<f64> {
        let weight = match self.side()? {
            Side::X => self.l1,
            Side::V => self.l2,
        };
        Some(match (self.estimate, self.regime?) {
            (_, Regime::Small) => 1.0,
            (Estimate::E2 | Estimate::E3, Regime::Large) => weight,
            (_, Regime::Large) => 0.0,
        })
    }
}

/// Knobs of a scaling fit; the defaults are the values used by the
/// acceptance suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub policy: GridPolicy,
    /// Small shift used for every time, as a fraction of the kinetic scale at the smallest time.
    pub small_fraction: f64,
    /// Large shift as a multiple of the kinetic scale.
    pub large_multiple: f64,
    /// Time at which the shift sweep runs.
    pub a_sweep_time: f64,
}

impl FitSettings {
    pub fn new(policy: GridPolicy) -> Self {
        FitSettings { policy, small_fraction: 1.0 / 64.0, large_multiple: 4.0, a_sweep_time: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFitReport {
    pub probe: Probe,
    pub probe_id: String,
    pub shift_side: Option<Side>,
    pub times: Vec<f64>,
    /// Shift used at each time (empty for undifferenced probes).
    pub shifts: Vec<f64>,
    pub norms: Vec<f64>,
    pub fitted_slope: f64,
    pub theory_slope: f64,
    pub residual: f64,
    /// Sweep in `|a|` at fixed time, if the probe is differenced.
    pub a_values: Vec<f64>,
    pub a_norms: Vec<f64>,
    pub a_fitted_slope: Option<f64>,
    pub a_theory_slope: Option<f64>,
}

impl ScalingFitReport {
    pub fn t_error(&self) -> f64 {
        (self.fitted_slope - self.theory_slope).abs()
    }

    pub fn a_error(&self) -> Option<f64> {
        Some((self.a_fitted_slope? - self.a_theory_slope?).abs())
    }
}

fn probe_norm(probe: &Probe, t: f64, a: f64, settings: &FitSettings, params: &Params) -> Result<f64> {
    let grid = settings.policy.grid_at(t, params.alpha);
    let snap = kernel_snapshot(t, probe.decoration(), &grid, params)?;
    let snap = match probe.side() {
        None => snap,
        Some(side) => {
            let mut shift = [0.0; 2];
            shift[0] = a;
            snap.difference(side, &shift[..grid.d])
        }
    };
    Ok(weighted_l1(&snap, probe.l1, probe.l2))
}

/// Measures one weighted L1 estimate over `t_list` and fits its power law.
pub fn l1_scaling_fit(probe: &Probe, t_list: &[f64], settings: &FitSettings, params: &Params) -> Result<ScalingFitReport> {
    probe.validate(params)?;
    if t_list.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} times, need at least 3", t_list.len())));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateFit("times must be strictly increasing".into()));
    }
    let alpha = params.alpha;
    let t_min = t_list[0];
    let shift_at = |t: f64| match probe.regime {
        None => 0.0,
        Some(Regime::Small) => settings.small_fraction * probe.side_scale(t_min, alpha),
        Some(Regime::Large) => settings.large_multiple * probe.side_scale(t, alpha),
    };
    let shifts: Vec<f64> = if probe.side().is_some() { t_list.iter().map(|&t| shift_at(t)).collect() } else { vec![] };
    let norms = t_list
        .par_iter()
        .map(|&t| probe_norm(probe, t, shift_at(t), settings, params))
        .collect::<Result<Vec<f64>>>()?;
    let fit = log_log_fit(t_list, &norms)?;

    let (mut a_values, mut a_norms, mut a_fitted) = (vec![], vec![], None);
    if probe.side().is_some() {
        let t = settings.a_sweep_time;
        let w = probe.side_scale(t, alpha);
        a_values = match probe.regime.expect("validated") {
            Regime::Small => vec![w / 64.0, w / 32.0, w / 16.0],
            Regime::Large => vec![settings.large_multiple * w / 2.0, settings.large_multiple * w, 2.0 * settings.large_multiple * w],
        };
        a_norms = a_values
            .par_iter()
            .map(|&a| probe_norm(probe, t, a, settings, params))
            .collect::<Result<Vec<f64>>>()?;
        a_fitted = Some(log_log_fit(&a_values, &a_norms)?.slope);
    }
    Ok(ScalingFitReport {
        probe: *probe,
        probe_id: probe.id(),
        shift_side: probe.side(),
        times: t_list.to_vec(),
        shifts,
        norms,
        fitted_slope: fit.slope,
        theory_slope: probe.t_exponent(alpha),
        residual: fit.residual,
        a_values,
        a_norms,
        a_fitted_slope: a_fitted,
        a_theory_slope: probe.a_exponent(),
    })
}

/// `‖Λ_v^γ f‖_1 / (‖f‖_1^{1-γ} ‖∇_v f‖_1^γ)`; zero for a zero field.
/// In `d = 2` the gradient norm is the L1 norm of `|∇_v f|`.
pub fn interpolation_check(field: &PhaseField, gamma: f64) -> f64 {
    let g = field.grid;
    let spec = field.spectrum();
    let frac = spec.apply(&derivative_symbol(&g, &DerivOrders::default().with_frac(0.0, gamma))).to_field();
    let grads: Vec<PhaseField> = (0..g.d)
        .map(|c| {
            let mut o = DerivOrders::default();
            o.v[c] = 1;
            spec.apply(&derivative_symbol(&g, &o)).to_field()
        })
        .collect();
    let grad_mag: Vec<f64> = (0..g.len())
        .map(|i| grads.iter().map(|f| f.values[i] * f.values[i]).sum::<f64>().sqrt())
        .collect();
    let grad_l1 = pairwise_sum(&grad_mag) * g.cell_volume();
    let f_l1 = field.l1_norm();
    if f_l1 == 0.0 || grad_l1 == 0.0 {
        return 0.0;
    }
    frac.l1_norm() / (f_l1.powf(1.0 - gamma) * grad_l1.powf(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params() -> Params {
        Params::default()
    }

    #[test]
    fn snapshot_mass_is_one_and_even() {
        let g = TorusGrid::new(1, 64.0, 32.0, 1024, 256).unwrap();
        for &t in &[1.0, 2.0] {
            assert!(spectral_floor(t, &g, 1.5) < 1e-7);
            let s = kernel_snapshot(t, DerivOrders::default(), &g, &params()).unwrap();
            assert!((s.mass() - 1.0).abs() < 1e-12);
            assert!(s.evenness_defect() < 1e-12);
            assert!(s.relative_min() > -1e-8, "t={t} min={}", s.relative_min());
        }
        assert!(matches!(kernel_snapshot(0.0, DerivOrders::default(), &g, &params()), Err(Error::ZeroTime)));
        let too_many = DerivOrders::along_first(2, 2);
        assert!(matches!(kernel_snapshot(1.0, too_many, &g, &params()), Err(Error::DerivativeCap { .. })));
    }

    #[test]
    fn gaussian_kernel_matches_kolmogorov_covariance() {
        // psi = t|eta|^2 - t^2 xi eta + t^3 xi^2 / 3 is half the quadratic form of
        // C = [[2t^3/3, -t^2], [-t^2, 2t]], so H is the centred Gaussian with covariance C
        let p = Params::linear_only(2.0, 1).unwrap();
        let g = TorusGrid::new(1, 40.0, 40.0, 256, 256).unwrap();
        let t = 1.0;
        let s = kernel_snapshot(t, DerivOrders::default(), &g, &p).unwrap();
        let (cxx, cxv, cvv) = (2.0 * t * t * t / 3.0, -t * t, 2.0 * t);
        let det = cxx * cvv - cxv * cxv;
        let exact = PhaseField::from_fn(&g, |x, v| {
            let q = (cvv * x[0] * x[0] - 2.0 * cxv * x[0] * v[0] + cxx * v[0] * v[0]) / det;
            (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
        });
        assert!(s.field.sup_diff(&exact) < 1e-10 * exact.sup_norm());
    }

    #[test]
    fn differences_roll_and_trig_identity() {
        let g = TorusGrid::new(1, 2.0 * PI, 2.0 * PI, 16, 32).unwrap();
        let f = PhaseField::from_fn(&g, |x, v| v[0].cos() + 0.3 * (x[0] + v[0]).sin());
        let h = g.dv();
        let rolled = f.sub(&f.roll(Side::V, 0, 3));
        assert_eq!(finite_difference(&f, Side::V, &[3.0 * h]), rolled);
        let c = PhaseField::from_fn(&g, |_, _| 2.5);
        assert!(finite_difference(&c, Side::X, &[0.37]).sup_norm() < 1e-14);
        assert!(finite_difference(&f, Side::V, &[2.0 * PI]).sup_norm() < 1e-14);
        let cosv = PhaseField::from_fn(&g, |_, v| v[0].cos());
        let two_cos = cosv.scale(2.0);
        assert!(finite_difference(&cosv, Side::V, &[PI]).sup_diff(&two_cos) < 1e-14);
        // off-lattice shift goes through the spectral phase
        let off = finite_difference(&cosv, Side::V, &[0.3]);
        let exact = PhaseField::from_fn(&g, |_, v| v[0].cos() - (v[0] - 0.3).cos());
        assert!(off.sup_diff(&exact) < 1e-13);
    }

    #[test]
    fn segment_distance_closed_form() {
        assert_eq!(inf_segment_distance(&[1.0], &[0.0], 1.0), 1.0);
        assert!(inf_segment_distance(&[0.5], &[1.0], 1.0).abs() < 1e-15);
        assert!((inf_segment_distance(&[3.0], &[1.0], 1.0) - 2.0).abs() < 1e-15);
        assert!((inf_segment_distance(&[-1.0], &[1.0], 1.0) - 1.0).abs() < 1e-15);
        assert!(pointwise_rhs(1.0, &[0.0], &[0.0], 0, 0, 1.5) == 1.0);
    }

    #[test]
    fn theory_exponents() {
        let a = 1.5;
        assert!((Probe::e1(0, 1, 0.0, 0.0).t_exponent(a) + 2.0 / 3.0).abs() < 1e-15);
        assert!(Probe::e1(0, 0, 0.0, 0.0).t_exponent(a).abs() < 1e-15);
        let small = Probe::shifted(Estimate::E2, 0, 0, 0.5, 0.0, Regime::Small);
        assert!((small.t_exponent(a) - (-0.5 * 2.5 / 1.5)).abs() < 1e-15);
        assert_eq!(small.a_exponent(), Some(1.0));
        let large = Probe::shifted(Estimate::E2, 0, 0, 0.5, 0.0, Regime::Large);
        assert_eq!(large.a_exponent(), Some(0.5));
        let e4 = Probe::fractional(Estimate::E4, 0.3, 0.3, Regime::Large);
        assert!((e4.t_exponent(a) - (-(0.3 * 2.5) - 0.3) / 1.5).abs() < 1e-15);
    }

    #[test]
    fn interpolation_single_mode_is_one() {
        let g = TorusGrid::new(1, 2.0 * PI, 2.0 * PI, 8, 64).unwrap();
        let f = PhaseField::from_fn(&g, |_, v| v[0].cos());
        assert!((interpolation_check(&f, 0.5) - 1.0).abs() < 1e-3);
        assert_eq!(interpolation_check(&PhaseField::zeros(&g), 0.5), 0.0);
    }
}
