//! Linear flow, Duhamel operator, nonlinearity, Picard iteration and the two
//! independent oracles (mode-wise ODE integration and Strang splitting).
//!
//! Transport is applied as an exact per-velocity shift of the position
//! variable: after transforming only the position axes, row `v` is
//! multiplied by `exp(-i xi·s v)`. This keeps every time representable on
//! the same lattice.

use std::collections::BTreeMap;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{transform_axes, v_axes, x_axes, Direction, PhaseField, Side, Spectrum, TorusGrid};
use crate::norms::{seed_norm, x_norm, NormConfig};
use crate::params::Params;
use crate::symbols::{div_v_symbol, frac_grad_inv_symbol, hermitian_symbol, propagator_symbol, propagator_symbol_prefix};
use crate::trajectory::{ForceTrajectory, Provenance, TimeGrid, Trajectory, VectorField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `exp(-i xi·(s v))` on the mixed (frequency in x, point in v) layout.
fn shear_phase(grid: &TorusGrid, s: f64) -> Vec<Complex64> {
    shear_phase_prefix(grid, s, grid.len())
}

fn shear_phase_prefix(grid: &TorusGrid, s: f64, len: usize) -> Vec<Complex64> {
    let d = grid.d;
    let xi = grid.wavenumbers(Side::X);
    let v = grid.coordinates(Side::V);
    let vl = grid.v_len();
    (0..len)
        .into_par_iter()
        .map(|i| {
            let (ix, iv) = (i / vl, i % vl);
            let mut ph = 0.0;
            let (mut rx, mut rv) = (ix, iv);
            for _ in 0..d {
                ph += xi[rx % grid.nx] * v[rv % grid.nv];
                rx /= grid.nx;
                rv /= grid.nv;
            }
            Complex64::from_polar(1.0, -s * ph)
        })
        .collect()
}

/// Real part of the inverse transform of a mixed-layout array over the position axes.
fn mixed_to_physical(grid: &TorusGrid, mut mixed: Vec<Complex64>) -> PhaseField {
    transform_axes(&mut mixed, &grid.shape(), &x_axes(grid), Direction::Inverse);
    PhaseField { grid: *grid, values: mixed.iter().map(|c| c.re).collect() }
}

/// Spectrum of the unsheared field `u`, returned as `u(x - s v, v)` in physical space.
pub fn shear_to_physical(spec: &Spectrum, s: f64) -> PhaseField {
    let g = spec.grid;
    let mut data = spec.coeffs.clone();
    transform_axes(&mut data, &g.shape(), &v_axes(&g), Direction::Inverse);
    if s != 0.0 {
        let ph = shear_phase(&g, s);
        data.par_iter_mut().zip(&ph).for_each(|(c, p)| *c *= p);
    }
    mixed_to_physical(&g, data)
}

/// Free transport over time `s`: `f(x - s v, v)`.
pub fn transport(field: &PhaseField, s: f64) -> PhaseField {
    if s == 0.0 {
        return field.clone();
    }
    let g = field.grid;
    let mut data: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_axes(&mut data, &g.shape(), &x_axes(&g), Direction::Forward);
    let ph = shear_phase(&g, s);
    let norm = 1.0 / g.x_len() as f64;
    data.par_iter_mut().zip(&ph).for_each(|(c, p)| *c *= p * norm);
    mixed_to_physical(&g, data)
}

/// Solution of the linear equation (no drift) at time `t`.
pub fn linear_evolve(f0: &PhaseField, t: f64, alpha: f64) -> PhaseField {
    if t == 0.0 {
        return f0.clone();
    }
    let spec = f0.spectrum().apply_real(&propagator_symbol(t, &f0.grid, alpha));
    shear_to_physical(&spec, t)
}

/// Linear trajectory `h_L` on a time grid, with `f0` as its initial value.
pub fn linear_trajectory(f0: &PhaseField, time_grid: &TimeGrid, alpha: f64) -> Trajectory {
    let spec = f0.spectrum();
    let fields = time_grid
        .times
        .iter()
        .map(|&t| shear_to_physical(&spec.apply_real(&propagator_symbol(t, &f0.grid, alpha)), t))
        .collect();
    Trajectory::new(time_grid.clone(), fields, Provenance::Linear)
        .expect("one field per sample")
        .with_initial(f0.clone())
}

/// Mode-wise RK4 amplification of `y' = -|eta - s xi|^alpha y` over `[0, t]`.
///
/// The rate has a kink where `eta = s xi`; the steps are split between the
/// two sides of it in proportion to their lengths so that no step straddles
/// the kink.
fn rk4_amplification(t: f64, xi: &[f64], eta: &[f64], alpha: f64, steps: usize) -> f64 {
    let rate = |s: f64| {
        let mut r2 = 0.0;
        for c in 0..xi.len() {
            let u = eta[c] - s * xi[c];
            r2 += u * u;
        }
        r2.sqrt().powf(alpha)
    };
    let xi2: f64 = xi.iter().map(|x| x * x).sum();
    let kink = if xi2 > 0.0 { xi.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>() / xi2 } else { -1.0 };
    let mut pieces = vec![(0.0, t, steps)];
    if kink > 0.0 && kink < t {
        let left = ((steps as f64 * kink / t).round() as usize).clamp(1, steps - 1);
        pieces = vec![(0.0, kink, left), (kink, t, steps - left)];
    }
    let mut y = 1.0;
    for (a, b, n) in pieces {
        let h = (b - a) / n as f64;
        // real stability interval of classical RK4 is about [-2.78, 0]
        if h * rate(a).max(rate(b)) > 2.7 {
            return f64::NAN;
        }
        for k in 0..n {
            let s = a + k as f64 * h;
            let (r0, rh, r1) = (rate(s), rate(s + 0.5 * h), rate(s + h));
            let k1 = -r0 * y;
            let k2 = -rh * (y + 0.5 * h * k1);
            let k3 = -rh * (y + 0.5 * h * k2);
            let k4 = -r1 * (y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    y
}

/// Reference for [`linear_evolve`]: integrates the sheared mode-wise ODE
/// with classical RK4, then undoes the shear with the exact transport.
pub fn fourier_ode_oracle(f0: &PhaseField, t: f64, steps: usize, alpha: f64) -> Result<PhaseField> {
    if steps < 16 {
        return Err(Error::InvalidParams { field: "steps", reason: format!("{steps} is below 16") });
    }
    if t == 0.0 {
        return Ok(f0.clone());
    }
    let mut amp = hermitian_symbol(&f0.grid, |xi, eta| rk4_amplification(t, xi, eta, alpha, steps));
    let spec = f0.spectrum();
    let top = spec.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (a, c) in amp.iter_mut().zip(&spec.coeffs) {
        if a.is_nan() {
            if c.norm() > 1e-13 * top {
                return Err(Error::InvalidParams { field: "steps", reason: "too few steps for the stiffest populated mode".into() });
            }
            *a = 0.0;
        }
    }
    Ok(shear_to_physical(&spec.apply_real(&amp), t))
}

/// RK4 reference for a forced linear problem whose source does not depend
/// on position, `∂_t f + Λ_v^α f = S(t, v)`; there the shear is invisible
/// and each velocity mode obeys `y' = -|eta|^alpha y + S_hat(t, eta)`.
pub fn fourier_ode_forced(
    f0: &PhaseField,
    t: f64,
    steps: usize,
    alpha: f64,
    source: impl Fn(f64) -> Spectrum,
) -> Result<PhaseField> {
    if steps < 16 {
        return Err(Error::InvalidParams { field: "steps", reason: format!("{steps} is below 16") });
    }
    let g = f0.grid;
    let h = t / steps as f64;
    let rate: Vec<f64> = g.modes().map(|m| if m.xi_norm() == 0.0 { m.eta_norm().powf(alpha) } else { 0.0 }).collect();
    let mut y = f0.spectrum();
    for k in 0..steps {
        let s = k as f64 * h;
        let (s0, sh, s1) = (source(s), source(s + 0.5 * h), source(s + h));
        if g.modes().zip(&s0.coeffs).any(|(m, c)| m.xi_norm() != 0.0 && c.norm() > 0.0) {
            return Err(Error::InvalidParams { field: "source", reason: "source depends on position".into() });
        }
        let rhs = |y: &[Complex64], src: &Spectrum| -> Vec<Complex64> {
            y.iter().zip(&rate).zip(&src.coeffs).map(|((y, r), s)| -r * y + s).collect()
        };
        let y0 = y.coeffs.clone();
        let k1 = rhs(&y0, &s0);
        let y1: Vec<Complex64> = y0.iter().zip(&k1).map(|(y, k)| y + 0.5 * h * k).collect();
        let k2 = rhs(&y1, &sh);
        let y2: Vec<Complex64> = y0.iter().zip(&k2).map(|(y, k)| y + 0.5 * h * k).collect();
        let k3 = rhs(&y2, &sh);
        let y3: Vec<Complex64> = y0.iter().zip(&k3).map(|(y, k)| y + h * k).collect();
        let k4 = rhs(&y3, &s1);
        for i in 0..y0.len() {
            y.coeffs[i] = y0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    // modes with xi != 0 carry only the (zero) data part here
    let f0_spec = f0.spectrum();
    let amp = propagator_symbol(t, &g, alpha);
    for (i, m) in g.modes().enumerate() {
        if m.xi_norm() != 0.0 {
            y.coeffs[i] = f0_spec.coeffs[i] * amp[i];
        }
    }
    Ok(shear_to_physical(&y, t))
}

/// Keeps modes with `|k| <= n/3` on every axis.
pub fn dealias(spec: &Spectrum) -> Spectrum {
    let g = spec.grid;
    let (cx, cv) = (g.nx as i64 / 3, g.nv as i64 / 3);
    let mut out = spec.clone();
    for (c, m) in out.coeffs.iter_mut().zip(g.modes()) {
        let keep = (0..g.d).all(|k| m.ix[k].abs() <= cx && m.iv[k].abs() <= cv);
        if !keep {
            *c = ZERO;
        }
    }
    out
}

/// `f2 ∇_v Λ_v^{-beta} f1`, both factors dealiased before the product.
pub fn bilinear_force(f2: &PhaseField, f1: &PhaseField, beta: f64) -> Result<VectorField> {
    if !f2.grid.is_compatible(&f1.grid) {
        return Err(Error::IncompatibleGrids("bilinear factors on different grids".into()));
    }
    let g = f1.grid;
    let a = dealias(&f2.spectrum()).to_field();
    let b = dealias(&f1.spectrum());
    let components = frac_grad_inv_symbol(&g, beta)
        .iter()
        .map(|sym| a.mul(&b.apply(sym).to_field()))
        .collect();
    Ok(VectorField { components })
}

/// Drift flux `F[g] = g ∇_v Λ_v^{-beta} g`.
pub fn nonlinearity(g: &PhaseField, params: &Params) -> Result<VectorField> {
    params.require_nonlinear()?;
    bilinear_force(g, g, params.beta)
}

/// `div_v F` in spectral form.
fn divergence_spectrum(f: &VectorField) -> Spectrum {
    let g = f.grid();
    let div = div_v_symbol(&g);
    let mut out = Spectrum::zeros(&g);
    for (comp, sym) in f.components.iter().zip(&div) {
        let s = comp.spectrum();
        for ((o, c), m) in out.coeffs.iter_mut().zip(&s.coeffs).zip(sym) {
            *o += c * m;
        }
    }
    out
}

/// Forces `F[g(t)]` at `t = 0` and every sample time of `g`.
pub fn force_trajectory(g: &Trajectory, params: &Params) -> Result<ForceTrajectory> {
    params.require_nonlinear()?;
    let g0 = g
        .initial
        .as_ref()
        .ok_or_else(|| Error::InvalidParams { field: "trajectory", reason: "initial value required for the force".into() })?;
    let fields = std::iter::once(g0)
        .chain(&g.fields)
        .map(|f| nonlinearity(f, params))
        .collect::<Result<Vec<_>>>()?;
    ForceTrajectory::new(g.time_grid.clone(), fields)
}

/// Lag keys are lags on a `2^-40` lattice, so coinciding lags from
/// different targets share one propagator evaluation.
fn lag_key(lag: f64) -> i64 {
    (lag * (1u64 << 40) as f64).round() as i64
}

/// Cached propagator symbols above this many bytes are recomputed per use.
const SYMBOL_CACHE_BYTES: usize = 512 << 20;

struct LagGroup {
    lag: f64,
    symbol: Option<Vec<f64>>,
    /// Per target: `(interval, weight on left sample, weight on right sample)`.
    targets: Vec<(usize, Vec<(usize, f64, f64)>)>,
}

/// Precomputed quadrature for the Duhamel integral on one time grid.
///
/// Real fields have Hermitian spectra, and both the propagator and the
/// shear phase respect that symmetry, so only position frequencies with a
/// nonnegative leading index are propagated. They form a prefix of the
/// flat layout; the other rows are their conjugates.
pub struct DuhamelPlan {
    grid: TorusGrid,
    time_grid: TimeGrid,
    alpha: f64,
    groups: Vec<LagGroup>,
    half: usize,
}

impl DuhamelPlan {
    pub fn new(time_grid: &TimeGrid, grid: &TorusGrid, alpha: f64) -> Result<Self> {
        time_grid.validate()?;
        let mut map: BTreeMap<i64, (f64, BTreeMap<usize, Vec<(usize, f64, f64)>>)> = BTreeMap::new();
        for i in 0..time_grid.len() {
            let (a, b) = time_grid.interval(i);
            let (taus, ws) = time_grid.interval_nodes(i);
            for k in i..time_grid.len() {
                let tk = time_grid.times[k];
                for (&tau, &w) in taus.iter().zip(&ws) {
                    if w == 0.0 {
                        continue;
                    }
                    let lambda = (tau - a) / (b - a);
                    let lag = (tk - tau).max(0.0);
                    let entry = map.entry(lag_key(lag)).or_insert((lag, BTreeMap::new()));
                    entry.1.entry(k).or_default().push((i, w * (1.0 - lambda), w * lambda));
                }
            }
        }
        let rows = (grid.nx / 2 + 1) * grid.x_len() / grid.nx;
        let half = rows * grid.v_len();
        let cache = map.len() * half * 8 <= SYMBOL_CACHE_BYTES;
        let mut groups: Vec<LagGroup> = map
            .into_values()
            .map(|(lag, targets)| LagGroup { lag, symbol: None, targets: targets.into_iter().collect() })
            .collect();
        if cache {
            for gr in &mut groups {
                gr.symbol = Some(propagator_symbol_prefix(gr.lag, grid, alpha, half));
            }
        }
        Ok(DuhamelPlan { grid: *grid, time_grid: time_grid.clone(), alpha, groups, half })
    }

    /// Number of distinct lags at which the propagator is evaluated.
    pub fn lag_count(&self) -> usize {
        self.groups.len()
    }

    /// `∫_0^{t_k} T(t_k - τ) div_v F(τ) dτ` at every sample time, where `T(s)`
    /// is the linear flow and `F` is linear in time between samples.
    pub fn apply(&self, force: &ForceTrajectory) -> Result<Vec<PhaseField>> {
        let g = self.grid;
        if !force.grid().is_compatible(&g) {
            return Err(Error::IncompatibleGrids("force and plan grids differ".into()));
        }
        if force.time_grid.times != self.time_grid.times {
            return Err(Error::InvalidParams { field: "time_grid", reason: "force sampled on a different time grid".into() });
        }
        let half = self.half;
        let sources: Vec<Vec<Complex64>> = force
            .fields
            .par_iter()
            .map(|f| {
                let mut c = divergence_spectrum(f).coeffs;
                c.truncate(half);
                c
            })
            .collect();
        let nk = self.time_grid.len();
        if sources.iter().all(|s| s.iter().all(|c| *c == ZERO)) {
            return Ok(vec![PhaseField::zeros(&g); nk]);
        }
        let mut vshape = vec![half / g.v_len()];
        vshape.extend(std::iter::repeat_n(g.nv, g.d));
        let vax: Vec<usize> = (1..=g.d).collect();
        let mut acc: Vec<Vec<Complex64>> = vec![vec![ZERO; half]; nk];
        for gr in &self.groups {
            let owned;
            let m = match &gr.symbol {
                Some(m) => m,
                None => {
                    owned = propagator_symbol_prefix(gr.lag, &g, self.alpha, half);
                    &owned
                }
            };
            let phase = (gr.lag > 0.0).then(|| shear_phase_prefix(&g, gr.lag, half));
            let parts: Vec<Vec<Complex64>> = gr
                .targets
                .par_iter()
                .map(|(_, items)| {
                    let mut data = vec![ZERO; half];
                    for &(i, wl, wr) in items {
                        let (left, right) = (&sources[i], &sources[i + 1]);
                        for (n, d) in data.iter_mut().enumerate() {
                            *d += left[n] * wl + right[n] * wr;
                        }
                    }
                    for (d, m) in data.iter_mut().zip(m) {
                        *d *= m;
                    }
                    transform_axes(&mut data, &vshape, &vax, Direction::Inverse);
                    if let Some(ph) = &phase {
                        for (d, p) in data.iter_mut().zip(ph) {
                            *d *= p;
                        }
                    }
                    data
                })
                .collect();
            for ((k, _), data) in gr.targets.iter().zip(parts) {
                for (a, d) in acc[*k].iter_mut().zip(&data) {
                    *a += d;
                }
            }
        }
        let out: Vec<PhaseField> = acc.into_par_iter().map(|a| mixed_to_physical(&g, unfold_half(&g, a))).collect();
        if out.iter().any(|f| f.values.iter().any(|v| !v.is_finite())) {
            return Err(Error::Breakdown("non-finite Duhamel integral".into()));
        }
        Ok(out)
    }
}

/// Completes the rows with negative leading position index by conjugation.
fn unfold_half(g: &TorusGrid, mut prefix: Vec<Complex64>) -> Vec<Complex64> {
    let vl = g.v_len();
    let inner = g.x_len() / g.nx;
    let half_rows = prefix.len() / vl;
    prefix.resize(g.len(), ZERO);
    for row in half_rows..g.x_len() {
        // partner of (i0, rest) is (-i0, -rest) with the same velocity point
        let (i0, rest) = (row / inner, row % inner);
        let mut partner_rest = 0;
        let mut r = rest;
        let mut place = 1;
        for _ in 1..g.d {
            let ic = r % g.nx;
            partner_rest += ((g.nx - ic) % g.nx) * place;
            r /= g.nx;
            place *= g.nx;
        }
        let partner = ((g.nx - i0) % g.nx) * inner + partner_rest;
        for j in 0..vl {
            prefix[row * vl + j] = prefix[partner * vl + j].conj();
        }
    }
    prefix
}

/// Duhamel integral at every sample time of the force's time grid.
pub fn duhamel_all(force: &ForceTrajectory, alpha: f64) -> Result<Vec<PhaseField>> {
    DuhamelPlan::new(&force.time_grid, &force.grid(), alpha)?.apply(force)
}

/// Duhamel integral at one sample time `t` of the force's time grid.
pub fn duhamel_apply(force: &ForceTrajectory, t: f64, alpha: f64) -> Result<PhaseField> {
    let k = force
        .time_grid
        .index_of(t)
        .ok_or_else(|| Error::InvalidParams { field: "t", reason: format!("{t} is not a sample time") })?;
    let head = TimeGrid { times: force.time_grid.times[..=k].to_vec(), ..force.time_grid.clone() };
    let sub = ForceTrajectory::new(head, force.fields[..=k + 1].to_vec())?;
    Ok(duhamel_all(&sub, alpha)?.pop().expect("nonempty"))
}

/// One application of the solution map: `h_L + M(F[g])`.
pub fn solution_map(h_linear: &Trajectory, g: &Trajectory, params: &Params) -> Result<Trajectory> {
    let plan = DuhamelPlan::new(&h_linear.time_grid, &h_linear.grid(), params.alpha)?;
    solution_map_with(&plan, h_linear, g, params)
}

fn solution_map_with(plan: &DuhamelPlan, h_linear: &Trajectory, g: &Trajectory, params: &Params) -> Result<Trajectory> {
    let force = force_trajectory(g, params)?;
    let hn = plan.apply(&force)?;
    let fields = h_linear.fields.iter().zip(&hn).map(|(a, b)| a.add(b)).collect();
    let mut out = Trajectory::new(h_linear.time_grid.clone(), fields, g.provenance)?;
    out.initial = h_linear.initial.clone();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Stop once the solution norm of the increment drops below `tol`
    /// times the solution norm of the linear part.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed-norm smallness threshold; exceeding it only raises a warning.
    pub smallness: Option<f64>,
    pub norms: NormConfig,
}

impl PicardOptions {
    pub fn new(tol: f64, max_iter: usize, params: &Params) -> Self {
        PicardOptions { tol, max_iter, smallness: None, norms: NormConfig::for_params(params) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    /// Solution norm of `h^{(k+1)} - h^{(k)}` per iteration.
    pub increments: Vec<f64>,
    /// `increments[k+1] / increments[k]`.
    pub ratios: Vec<f64>,
    /// Sup-norm of `h_L + M(F[h]) - h` for the returned trajectory.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub seed_norm: f64,
    pub smallness_warning: bool,
    pub linear_norm: f64,
}

/// Fixed point of the solution map on the time grid, starting from `h_L`.
pub fn picard_solve(
    f0: &PhaseField,
    time_grid: &TimeGrid,
    params: &Params,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardDiagnostics)> {
    params.require_nonlinear()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParams { field: "tol", reason: format!("{} must be positive", opts.tol) });
    }
    let seed = seed_norm(f0, params, &opts.norms);
    let smallness_warning = opts.smallness.is_some_and(|s| seed > s);
    if smallness_warning {
        log::warn!("seed norm {seed:.3e} exceeds the smallness threshold");
    }
    let h_lin = linear_trajectory(f0, time_grid, params.alpha);
    let plan = DuhamelPlan::new(time_grid, &f0.grid, params.alpha)?;
    let linear_norm = x_norm(&h_lin, params, &opts.norms);
    let mut h = h_lin.clone();
    let mut increments = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = solution_map_with(&plan, &h_lin, &h, params)?;
        let inc = x_norm(&next.sub(&h), params, &opts.norms);
        if !inc.is_finite() {
            return Err(Error::Breakdown(format!("increment norm is {inc} at iteration {iterations}")));
        }
        increments.push(inc);
        h = next;
        h.provenance = Provenance::PicardIterate(iterations);
        log::debug!("picard iteration {iterations}: increment {inc:.3e}");
        if inc <= opts.tol * linear_norm {
            converged = true;
            break;
        }
    }
    let ratios = increments.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let check = solution_map_with(&plan, &h_lin, &h, params)?;
    let residual = check.sup_diff(&h);
    let diag = PicardDiagnostics {
        increments,
        ratios,
        residual,
        converged,
        iterations,
        seed_norm: seed,
        smallness_warning,
        linear_norm,
    };
    Ok((h, diag))
}

/// `‖h_2 - h_1‖_X / ‖h_1 - h_L‖_X` for the first two iterates `h_1 = S(h_L)`,
/// `h_2 = S(h_1)`; the quantity the smallness threshold is calibrated on.
pub fn first_contraction_ratio(f0: &PhaseField, time_grid: &TimeGrid, params: &Params, norms: &NormConfig) -> Result<f64> {
    params.require_nonlinear()?;
    let h_lin = linear_trajectory(f0, time_grid, params.alpha);
    let plan = DuhamelPlan::new(time_grid, &f0.grid, params.alpha)?;
    let h1 = solution_map_with(&plan, &h_lin, &h_lin, params)?;
    let h2 = solution_map_with(&plan, &h_lin, &h1, params)?;
    let first = x_norm(&h1.sub(&h_lin), params, norms);
    if first == 0.0 {
        return Ok(0.0);
    }
    Ok(x_norm(&h2.sub(&h1), params, norms) / first)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingOptions {
    /// Switch the drift off to get the linear flow.
    pub nonlinear: bool,
    /// Store every `record_every`-th step.
    pub record_every: usize,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        SplittingOptions { nonlinear: true, record_every: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingDiagnostics {
    /// Largest `dt · eta_max · sup|∇_v Λ_v^{-beta} f|` seen; the explicit
    /// drift step is comfortably stable while this stays below 1.
    pub drift_cfl: f64,
    pub max_sup_growth: f64,
}

/// Strang splitting: half transport, a Lawson–Heun step of
/// `∂_t f = -Λ_v^α f + div_v F[f]` with the exact diffusion factor, half
/// transport.
pub fn splitting_stepper(
    f0: &PhaseField,
    dt: f64,
    nsteps: usize,
    params: &Params,
    opts: SplittingOptions,
) -> Result<(Trajectory, SplittingDiagnostics)> {
    if !(dt > 0.0) || nsteps == 0 || opts.record_every == 0 {
        return Err(Error::InvalidParams { field: "dt", reason: "need dt > 0, nsteps >= 1 and record_every >= 1".into() });
    }
    if opts.nonlinear {
        params.require_nonlinear()?;
    }
    let g = f0.grid;
    let e: Vec<f64> = g.modes().map(|m| (-dt * m.eta_norm().powf(params.alpha)).exp()).collect();
    let eta_max = std::f64::consts::PI / g.dv() * (g.d as f64).sqrt();
    let sup0 = f0.sup_norm();
    let drift = |f: &PhaseField| -> Result<(Spectrum, f64)> {
        if !opts.nonlinear {
            return Ok((Spectrum::zeros(&g), 0.0));
        }
        let flux = nonlinearity(f, params)?;
        let speed = dealias(&f.spectrum());
        let w = frac_grad_inv_symbol(&g, params.beta)
            .iter()
            .map(|s| speed.apply(s).to_field().sup_norm())
            .fold(0.0, f64::max);
        Ok((divergence_spectrum(&flux), w))
    };
    let mut f = f0.clone();
    let mut fields = Vec::new();
    let mut times = Vec::new();
    let mut diag = SplittingDiagnostics { drift_cfl: 0.0, max_sup_growth: 1.0 };
    for step in 1..=nsteps {
        let half = transport(&f, 0.5 * dt);
        let fh = half.spectrum();
        let (k1, w1) = drift(&half)?;
        // f* = E (f + dt k1)
        let star: Vec<Complex64> = fh.coeffs.iter().zip(&k1.coeffs).zip(&e).map(|((y, k), e)| (y + dt * k) * e).collect();
        let star = Spectrum { grid: g, coeffs: star };
        let (k2, w2) = drift(&star.to_field())?;
        // f_new = E f + dt/2 (E k1 + N(f*))
        let next: Vec<Complex64> = fh
            .coeffs
            .iter()
            .zip(&k1.coeffs)
            .zip(&k2.coeffs)
            .zip(&e)
            .map(|(((y, a), b), e)| e * y + 0.5 * dt * (e * a + b))
            .collect();
        let mid = Spectrum { grid: g, coeffs: next }.to_field();
        f = transport(&mid, 0.5 * dt);
        diag.drift_cfl = diag.drift_cfl.max(dt * eta_max * w1.max(w2));
        let sup = f.sup_norm();
        if !sup.is_finite() || (sup0 > 0.0 && sup > 10.0 * sup0) {
            return Err(Error::Breakdown(format!("splitting sup norm {sup:.3e} at step {step}")));
        }
        if sup0 > 0.0 {
            diag.max_sup_growth = diag.max_sup_growth.max(sup / sup0);
        }
        if step % opts.record_every == 0 || step == nsteps {
            times.push(step as f64 * dt);
            fields.push(f.clone());
        }
    }
    let tg = TimeGrid::from_times(times)?;
    let traj = Trajectory::new(tg, fields, Provenance::Splitting)?.with_initial(f0.clone());
    Ok((traj, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(1, 2.0 * PI, 2.0 * PI, n, n).unwrap()
    }

    fn smooth(g: &TorusGrid) -> PhaseField {
        PhaseField::from_fn(g, |x, v| {
            0.3 * (x[0] + v[0]).cos() + 0.2 * (2.0 * v[0]).sin() + 0.1 * (x[0] - 2.0 * v[0] + 0.4).cos()
        })
    }

    #[test]
    fn linear_evolve_identity_and_pure_diffusion() {
        let g = grid(32);
        let f = smooth(&g);
        assert_eq!(linear_evolve(&f, 0.0, 1.5), f);
        let c = PhaseField::from_fn(&g, |_, v| (2.0 * v[0]).cos());
        let out = linear_evolve(&c, 0.7, 1.5);
        let exact = c.scale((-0.7 * 2f64.powf(1.5)).exp());
        assert!(out.sup_diff(&exact) < 1e-14);
    }

    #[test]
    fn transport_composes_exactly() {
        let g = grid(32);
        let f = smooth(&g);
        let a = transport(&transport(&f, 0.3), 0.45);
        assert!(a.sup_diff(&transport(&f, 0.75)) < 1e-13);
        // a single mode is moved to the expected off-lattice velocity frequency
        let m = PhaseField::from_fn(&g, |x, v| (x[0] + v[0]).cos());
        let moved = transport(&m, 0.3);
        let exact = PhaseField::from_fn(&g, |x, v| (x[0] + 0.7 * v[0]).cos());
        assert!(moved.sup_diff(&exact) < 1e-13);
    }

    #[test]
    fn ode_oracle_matches_closed_form() {
        let g = grid(32);
        let f = smooth(&g);
        let exact = linear_evolve(&f, 1.0, 1.5);
        let ode = fourier_ode_oracle(&f, 1.0, 256, 1.5).unwrap();
        assert!(ode.sup_diff(&exact) < 1e-9, "{}", ode.sup_diff(&exact));
        assert!(fourier_ode_oracle(&f, 1.0, 8, 1.5).is_err());
    }

    #[test]
    fn nonlinearity_single_mode() {
        // ∂_v Λ^{-1/2} cos v = -sin v, so F = -cos v sin v = -sin(2v)/2
        let g = grid(32);
        let f = PhaseField::from_fn(&g, |_, v| v[0].cos());
        let out = bilinear_force(&f, &f, 0.5).unwrap();
        let exact = PhaseField::from_fn(&g, |_, v| -(2.0 * v[0]).sin() / 2.0);
        assert!(out.components[0].sup_diff(&exact) < 1e-14);
        let flat = PhaseField::from_fn(&g, |x, _| x[0].sin());
        assert!(bilinear_force(&flat, &flat, 0.5).unwrap().sup_norm() < 1e-15);
        let p = Params::linear_only(2.0, 1).unwrap();
        assert!(nonlinearity(&f, &p).is_err());
    }

    #[test]
    fn nonlinearity_matches_brute_force_convolution() {
        let g = grid(32);
        let f = PhaseField::from_fn(&g, |x, v| 0.5 * (x[0] - v[0]).cos() + 0.3 * (3.0 * v[0]).sin() + 0.2 * (2.0 * x[0] + v[0]).cos());
        let beta = 0.8;
        let fast = bilinear_force(&f, &f, beta).unwrap().components[0].clone();
        // direct sum over mode pairs of the dealiased spectra
        let spec = dealias(&f.spectrum());
        let active: Vec<(usize, Complex64)> = spec.coeffs.iter().copied().enumerate().filter(|(_, c)| c.norm() > 1e-14).collect();
        let slow = PhaseField::from_fn(&g, |x, v| {
            let mut s = Complex64::new(0.0, 0.0);
            for &(i, a) in &active {
                let mi = g.mode(i);
                let ei = Complex64::from_polar(1.0, mi.xi[0] * x[0] + mi.eta[0] * v[0]);
                for &(j, b) in &active {
                    let mj = g.mode(j);
                    if mj.eta[0] == 0.0 || mj.nyq_v[0] {
                        continue;
                    }
                    let sym = Complex64::new(0.0, mj.eta[0] * mj.eta[0].abs().powf(-beta));
                    let ej = Complex64::from_polar(1.0, mj.xi[0] * x[0] + mj.eta[0] * v[0]);
                    s += a * ei * b * sym * ej;
                }
            }
            s.re
        });
        assert!(fast.sup_diff(&slow) < 1e-13);
    }

    #[test]
    fn kernel_gradient_form_matches_divergence_form() {
        // propagating div_v F equals convolving F with the velocity gradient
        // of the kernel, then shearing
        let g = grid(16);
        let (t, alpha) = (0.7, 1.5);
        let flux = PhaseField::from_fn(&g, |x, v| 0.4 * (x[0] - v[0]).sin() + 0.3 * (2.0 * v[0]).cos() * x[0].cos());
        let div = div_v_symbol(&g);
        let divergence_form = linear_evolve(&flux.spectrum().apply(&div[0]).to_field(), t, alpha);
        let n = g.len() as f64;
        let kernel_sym: Vec<Complex64> = propagator_symbol(t, &g, alpha).iter().zip(&div[0]).map(|(h, d)| d * h / n).collect();
        let mut unit = Spectrum::zeros(&g);
        unit.coeffs.iter_mut().for_each(|c| *c = Complex64::new(1.0, 0.0));
        let kernel = unit.apply(&kernel_sym).to_field();
        let m = g.nx;
        let conv = PhaseField {
            grid: g,
            values: (0..g.len())
                .map(|i| {
                    let (ix, iv) = (i / m, i % m);
                    let mut s = 0.0;
                    for jx in 0..m {
                        for jv in 0..m {
                            s += kernel.values[((ix + m - jx) % m) * m + (iv + m - jv) % m] * flux.values[jx * m + jv];
                        }
                    }
                    s
                })
                .collect(),
        };
        let gradient_form = transport(&conv, t);
        assert!(gradient_form.sup_diff(&divergence_form) < 1e-13, "{}", gradient_form.sup_diff(&divergence_form));
    }

    #[test]
    fn duhamel_of_zero_and_constant_force() {
        let g = grid(16);
        let tg = TimeGrid::uniform(1.0, 2).unwrap();
        let zero = ForceTrajectory::new(tg.clone(), vec![VectorField::zeros(&g); 3]).unwrap();
        assert!(duhamel_all(&zero, 1.5).unwrap().iter().all(|f| f.sup_norm() == 0.0));
        let c = VectorField { components: vec![PhaseField::from_fn(&g, |_, _| 0.7)] };
        let constant = ForceTrajectory::new(tg, vec![c; 3]).unwrap();
        assert!(duhamel_all(&constant, 1.5).unwrap().iter().all(|f| f.sup_norm() < 1e-15));
    }

    #[test]
    fn duhamel_matches_forced_ode_for_velocity_source() {
        let g = grid(32);
        let alpha = 1.5;
        // flux a(t) sin(2v) with a linear in t, so interpolation is exact
        let flux = |t: f64| VectorField { components: vec![PhaseField::from_fn(&g, move |_, v| (0.5 + t) * (2.0 * v[0]).sin())] };
        let div = div_v_symbol(&g);
        let src = |t: f64| flux(t).components[0].spectrum().apply(&div[0]);
        let reference = fourier_ode_forced(&PhaseField::zeros(&g), 1.0, 4096, alpha, src).unwrap();
        let error = |nodes: usize| {
            let tg = TimeGrid::uniform(1.0, 4).unwrap().with_nodes(nodes, 3.0).unwrap();
            let fields = std::iter::once(0.0).chain(tg.times.iter().copied()).map(flux).collect();
            let force = ForceTrajectory::new(tg, fields).unwrap();
            let hn = duhamel_all(&force, alpha).unwrap();
            assert_eq!(duhamel_apply(&force, 1.0, alpha).unwrap(), hn[3]);
            hn[3].sup_diff(&reference)
        };
        let (coarse, fine) = (error(32), error(64));
        assert!(coarse < 1e-6, "{coarse}");
        assert!(fine < coarse / 8.0, "{coarse} {fine}");
    }

    #[test]
    fn duhamel_plan_matches_node_by_node_sum() {
        for d in [1, 2] {
            let (n, alpha) = if d == 1 { (32, 1.5) } else { (8, 1.7) };
            let g = TorusGrid::new(d, 2.0 * PI, 3.0, n, n).unwrap();
            let tg = TimeGrid::dyadic(0.5, -3).unwrap().with_nodes(6, 3.0).unwrap();
            let flux = |t: f64| VectorField {
                components: (0..d)
                    .map(|c| PhaseField::from_fn(&g, move |x, v| (1.0 + t * t) * (x[0] + 2.0 * v[c] + 0.3).sin() + t * (2.0 * x[d - 1] - v[0]).cos()))
                    .collect(),
            };
            let fields: Vec<VectorField> = std::iter::once(0.0).chain(tg.times.iter().copied()).map(flux).collect();
            let force = ForceTrajectory::new(tg.clone(), fields.clone()).unwrap();
            let fast = duhamel_all(&force, alpha).unwrap();
            let div = |f: &VectorField| divergence_spectrum(f).to_field();
            for (k, &tk) in tg.times.iter().enumerate() {
                let mut slow = PhaseField::zeros(&g);
                for i in 0..=k {
                    let (a, b) = tg.interval(i);
                    let (left, right) = (div(&fields[i]), div(&fields[i + 1]));
                    let (taus, ws) = tg.interval_nodes(i);
                    for (&tau, &w) in taus.iter().zip(&ws) {
                        let lam = (tau - a) / (b - a);
                        let src = left.scale(1.0 - lam).add(&right.scale(lam));
                        slow = slow.add(&linear_evolve(&src, tk - tau, alpha).scale(w));
                    }
                }
                assert!(fast[k].sup_diff(&slow) < 1e-12 * slow.sup_norm().max(1.0), "d={d} k={k}");
            }
        }
    }

    #[test]
    fn picard_zero_data_converges_immediately() {
        let g = grid(16);
        let p = Params::default();
        let tg = TimeGrid::uniform(1.0, 2).unwrap();
        let opts = PicardOptions::new(1e-12, 5, &p);
        let (traj, diag) = picard_solve(&PhaseField::zeros(&g), &tg, &p, &opts).unwrap();
        assert!(diag.converged);
        assert_eq!(diag.iterations, 1);
        assert!(traj.fields.iter().all(|f| f.sup_norm() == 0.0));
    }

    #[test]
    fn splitting_linear_x_independent_is_exact() {
        let g = grid(32);
        let p = Params::default();
        let f = PhaseField::from_fn(&g, |_, v| (2.0 * v[0]).cos() + 0.5 * v[0].sin());
        let opts = SplittingOptions { nonlinear: false, record_every: 1 };
        let (traj, _) = splitting_stepper(&f, 0.1, 5, &p, opts).unwrap();
        let exact = linear_evolve(&f, 0.5, p.alpha);
        assert!(traj.fields[4].sup_diff(&exact) < 1e-14);
    }
}
