//! Verification experiments. Each returns a [`VerdictReport`] whose criteria
//! carry the measured value, the target and the pass decision; wall-clock
//! time is kept out of the serialized form so reruns compare byte for byte.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataFamily;
use crate::error::{Error, Result};
use crate::fit::log_log_fit;
use crate::grid::{PhaseField, TorusGrid};
use crate::io::{PlotSeries, Table};
use crate::kernel::{
    check_pointwise_bound, interpolation_check, kernel_snapshot, l1_scaling_fit, Estimate, FitSettings, GridPolicy, Probe, Window,
    Regime, ScalingFitReport,
};
use crate::norms::{force_norm, seed_norm, x_norm, NormConfig};
use crate::params::Params;
use crate::solver::{
    bilinear_force, duhamel_all, first_contraction_ratio, force_trajectory, fourier_ode_oracle, linear_evolve,
    linear_trajectory, picard_solve, splitting_stepper, PicardDiagnostics, PicardOptions, SplittingOptions,
};
use crate::symbols::{derivative_symbol, psi_closed_form_1d, psi_quadrature, DerivOrders};
use crate::trajectory::{ForceTrajectory, Provenance, TimeGrid, Trajectory, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    AtLeast,
    /// `|measured - target| <= tolerance`.
    Within,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
}

impl Criterion {
    pub fn at_most(name: impl Into<String>, measured: f64, target: f64) -> Self {
        Self::make(name.into(), measured, target, 0.0, Bound::AtMost)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, target: f64) -> Self {
        Self::make(name.into(), measured, target, 0.0, Bound::AtLeast)
    }

    pub fn within(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Self::make(name.into(), measured, target, tolerance, Bound::Within)
    }

    fn make(name: String, measured: f64, target: f64, tolerance: f64, bound: Bound) -> Self {
        // NaN compares false everywhere, so a broken measurement fails
        let passed = match bound {
            Bound::AtMost => measured <= target,
            Bound::AtLeast => measured >= target,
            Bound::Within => (measured - target).abs() <= tolerance,
        };
        Criterion { name, measured, target, tolerance, bound, passed }
    }

    pub fn describe(&self) -> String {
        let rel = match self.bound {
            Bound::AtMost => format!("<= {:.3e}", self.target),
            Bound::AtLeast => format!(">= {:.3e}", self.target),
            Bound::Within => format!("= {:.4} ± {}", self.target, self.tolerance),
        };
        format!("{} {}: measured {:.4e}, want {rel}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.measured)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub experiment: String,
    pub quantities: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    #[serde(skip)]
    pub runtime: Duration,
    #[serde(skip)]
    pub table: Option<Table>,
    #[serde(skip)]
    pub plots: Vec<PlotSeries>,
}

impl VerdictReport {
    pub fn new(experiment: &str) -> Self {
        VerdictReport {
            experiment: experiment.into(),
            quantities: BTreeMap::new(),
            criteria: Vec::new(),
            runtime: Duration::ZERO,
            table: None,
            plots: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn quantity(&mut self, name: impl Into<String>, value: f64) {
        self.quantities.insert(name.into(), value);
    }

    pub fn check(&mut self, c: Criterion) {
        self.criteria.push(c);
    }

    /// Merges another report's criteria and quantities under a prefix.
    pub fn absorb(&mut self, other: VerdictReport) {
        for (k, v) in other.quantities {
            self.quantities.insert(format!("{}.{k}", other.experiment), v);
        }
        for mut c in other.criteria {
            c.name = format!("{}.{}", other.experiment, c.name);
            self.criteria.push(c);
        }
        self.plots.extend(other.plots);
        if self.table.is_none() {
            self.table = other.table;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    PsiOracle,
    GaussianOracle,
    OdeOracle,
    KernelMass,
    PointwiseBound,
    E1Scaling,
    ShiftScaling,
    Interpolation,
    Picard,
    CrossOracle,
    ScalingInvariance,
    DecayBound,
    Bilinear,
    Reproducibility,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 14] = [
        ExperimentId::PsiOracle,
        ExperimentId::GaussianOracle,
        ExperimentId::OdeOracle,
        ExperimentId::KernelMass,
        ExperimentId::PointwiseBound,
        ExperimentId::E1Scaling,
        ExperimentId::ShiftScaling,
        ExperimentId::Interpolation,
        ExperimentId::Picard,
        ExperimentId::CrossOracle,
        ExperimentId::ScalingInvariance,
        ExperimentId::DecayBound,
        ExperimentId::Bilinear,
        ExperimentId::Reproducibility,
    ];

    pub fn name(&self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::Config { field: "experiment".into(), reason: format!("unknown experiment `{s}`") })
    }
}

/// What one experiment runs on. Grids and data are pinned per experiment;
/// only the equation parameters and the random seed are shared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub params: Params,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, params: Params, seed: u64) -> Self {
        ExperimentSpec { id, params, seed }
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<VerdictReport> {
    let start = Instant::now();
    let p = &spec.params;
    let mut report = match spec.id {
        ExperimentId::PsiOracle => psi_oracle(p),
        ExperimentId::GaussianOracle => gaussian_oracle(),
        ExperimentId::OdeOracle => ode_oracle(p, spec.seed),
        ExperimentId::KernelMass => kernel_mass(p),
        ExperimentId::PointwiseBound => pointwise_bound(p),
        ExperimentId::E1Scaling => e1_scaling(p),
        ExperimentId::ShiftScaling => shift_scaling(p),
        ExperimentId::Interpolation => interpolation(p, spec.seed),
        ExperimentId::Picard => picard(p),
        ExperimentId::CrossOracle => cross_oracle(p),
        ExperimentId::ScalingInvariance => scaling_invariance(p),
        ExperimentId::DecayBound => decay_bound(p, spec.seed),
        ExperimentId::Bilinear => bilinear(p, spec.seed),
        ExperimentId::Reproducibility => reproducibility(p, spec.seed),
    }?;
    report.runtime = start.elapsed();
    Ok(report)
}

/// Production grid: `d = 1`, sides 24, 256 points per axis.
pub fn default_grid(d: usize) -> TorusGrid {
    TorusGrid::new(d, 24.0, 24.0, 256, 256).expect("valid grid")
}

/// Default time grid of the mild solver: `2^-6, ..., 1`.
pub fn default_time_grid() -> TimeGrid {
    TimeGrid::dyadic(1.0, -6).expect("valid time grid")
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

fn need_d1(params: &Params, what: &str) -> Result<()> {
    if params.d != 1 {
        return Err(Error::InvalidParams { field: "d", reason: format!("{what} runs in d = 1 only") });
    }
    Ok(())
}

pub const PSI_TOL: f64 = 1e-10;
pub const PSI_TIMES: [f64; 3] = [0.25, 1.0, 4.0];

/// Adaptive quadrature of `psi` against the closed form on every frequency
/// of the production grid.
pub fn psi_oracle(params: &Params) -> Result<VerdictReport> {
    let grid = default_grid(1);
    let alpha = params.alpha;
    let mut r = VerdictReport::new("psi-oracle");
    let mut worst = 0.0f64;
    for t in PSI_TIMES {
        let err = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let m = grid.mode(i);
                let (xi, eta) = (m.xi[0], m.eta[0]);
                let exact = psi_closed_form_1d(t, xi, eta, alpha);
                let q = psi_quadrature(t, &[xi], &[eta], alpha, 1e-12);
                if exact == 0.0 {
                    q.abs()
                } else {
                    (q - exact).abs() / exact
                }
            })
            .reduce(|| 0.0, f64::max);
        r.quantity(format!("max-rel-error-t{t}"), err);
        worst = worst.max(err);
    }
    r.check(Criterion::at_most("psi-quadrature-rel-error", worst, PSI_TOL));
    Ok(r)
}

pub const GAUSSIAN_TOL: f64 = 1e-6;

/// `alpha = 2` flow of a unit Gaussian against its closed form: covariance
/// `A (I + C) A^T` with `C = [[2t^3/3, -t^2], [-t^2, 2t]]` and the shear `A`.
pub fn gaussian_oracle() -> Result<VerdictReport> {
    let grid = TorusGrid::new(1, 40.0, 40.0, 256, 256)?;
    let t: f64 = 1.0;
    let f0 = PhaseField::from_fn(&grid, |x, v| (-0.5 * (x[0] * x[0] + v[0] * v[0])).exp());
    let numeric = linear_evolve(&f0, t, 2.0);
    let (a, b, c) = (1.0 + 2.0 * t.powi(3) / 3.0, -t * t, 1.0 + 2.0 * t);
    let (sxx, sxv, svv) = (a + 2.0 * b * t + c * t * t, b + c * t, c);
    let det = sxx * svv - sxv * sxv;
    let exact = PhaseField::from_fn(&grid, |x, v| {
        let q = (svv * x[0] * x[0] - 2.0 * sxv * x[0] * v[0] + sxx * v[0] * v[0]) / det;
        (-0.5 * q).exp() / det.sqrt()
    });
    let err = numeric.sup_diff(&exact) / exact.sup_norm();
    let mut r = VerdictReport::new("gaussian-oracle");
    r.quantity("mass-numeric", numeric.mass());
    r.quantity("mass-initial", f0.mass());
    r.check(Criterion::at_most("gaussian-rel-sup-error", err, GAUSSIAN_TOL));
    Ok(r)
}

pub const ODE_TOL: f64 = 1e-8;
pub const SEMIGROUP_TOL: f64 = 1e-9;
pub const ODE_STEPS: usize = 1024;

/// Linear flow against a mode-by-mode RK4 integration, plus the semigroup
/// property on a box where the transport is exactly periodic.
pub fn ode_oracle(params: &Params, seed: u64) -> Result<VerdictReport> {
    need_d1(params, "the ODE oracle")?;
    let alpha = params.alpha;
    let mut r = VerdictReport::new("ode-oracle");
    let grid = default_grid(1);
    let mut worst = 0.0f64;
    for fam in oracle_families(seed) {
        let f0 = fam.sample(&grid, params)?;
        let exact = linear_evolve(&f0, 1.0, alpha);
        let ode = fourier_ode_oracle(&f0, 1.0, ODE_STEPS, alpha)?;
        let err = ode.sup_diff(&exact);
        r.quantity(format!("ode-sup-error-{}", fam.label()), err);
        worst = worst.max(err);
    }
    r.check(Criterion::at_most("ode-sup-error", worst, ODE_TOL));

    // transport over time s is periodic in v iff s L_v / L_x is an integer
    let torus = TorusGrid::new(1, 2.0 * PI, 20.0 * PI, 32, 512)?;
    let mut worst = 0.0f64;
    for fam in oracle_families(seed) {
        let f0 = fam.sample(&torus, params)?;
        let direct = linear_evolve(&f0, 1.0, alpha);
        let composed = linear_evolve(&linear_evolve(&f0, 0.3, alpha), 0.7, alpha);
        worst = worst.max(direct.sup_diff(&composed));
    }
    r.check(Criterion::at_most("semigroup-sup-error", worst, SEMIGROUP_TOL));

    // convergence order of the oracle itself, on a small grid
    let small = TorusGrid::new(1, 8.0, 8.0, 32, 32)?;
    let f0 = DataFamily::Modes { amplitude: 1.0, kmax: 4, decay: 2.0, seed }.sample(&small, params)?;
    let exact = linear_evolve(&f0, 1.0, alpha);
    let steps = [16usize, 32, 64, 128];
    let errs = steps
        .iter()
        .map(|&s| Ok(fourier_ode_oracle(&f0, 1.0, s, alpha)?.sup_diff(&exact)))
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
    let order = -log_log_fit(&xs, &errs)?.slope;
    r.quantity("ode-observed-order", order);
    r.plots.push(PlotSeries { name: "ode_error_vs_steps".into(), log_log: true, points: xs.into_iter().zip(errs).collect() });
    Ok(r)
}

fn oracle_families(seed: u64) -> Vec<DataFamily> {
    vec![
        DataFamily::Gaussian { amplitude: 1.0, wx: 1.0, wv: 0.5 },
        DataFamily::Modes { amplitude: 1.0, kmax: 4, decay: 2.0, seed },
        DataFamily::Rough { amplitude: 1.0, seed },
    ]
}

pub const KERNEL_TIMES: [f64; 3] = [0.25, 1.0, 4.0];
pub const MASS_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Kernel grid at `t = 1`; other times scale the sides with the kinetic
/// scales, keeping the kernel equally well resolved and equally far from
/// the box edge.
pub fn kernel_policy(params: &Params) -> GridPolicy {
    let g = match params.d {
        1 => TorusGrid::new(1, 32.0, 24.0, 512, 256),
        _ => TorusGrid::new(2, 32.0, 24.0, 64, 32),
    };
    GridPolicy::KineticScaled(g.expect("valid grid"))
}

pub fn kernel_mass(params: &Params) -> Result<VerdictReport> {
    let policy = kernel_policy(params);
    let mut r = VerdictReport::new("kernel-mass");
    let (mut mass_err, mut rel_min, mut even) = (0.0f64, f64::INFINITY, 0.0f64);
    for t in KERNEL_TIMES {
        let snap = kernel_snapshot(t, DerivOrders::default(), &policy.grid_at(t, params.alpha), params)?;
        let m = (snap.mass() - 1.0).abs();
        let lo = snap.relative_min();
        r.quantity(format!("mass-error-t{t}"), m);
        r.quantity(format!("relative-min-t{t}"), lo);
        mass_err = mass_err.max(m);
        rel_min = rel_min.min(lo);
        even = even.max(snap.evenness_defect());
    }
    r.quantity("evenness-defect", even);
    r.check(Criterion::at_most("mass-error", mass_err, MASS_TOL));
    r.check(Criterion::at_least("relative-min", rel_min, -POSITIVITY_TOL));
    Ok(r)
}

pub const POINTWISE_ORDERS: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 0)];
pub const POINTWISE_SPREAD: f64 = 10.0;
pub const SLOPE_TOL: f64 = 0.1;
/// Region of the pointwise ratio: five kinetic scales around the origin.
pub const POINTWISE_WINDOW: Window = Window::KineticScales(5.0);

/// One fixed box for all three times: 20 kinetic scales at the largest time
/// and a resolved spectrum at the smallest.
pub fn pointwise_grid(params: &Params) -> Result<TorusGrid> {
    need_d1(params, "the pointwise bound")?;
    TorusGrid::new(1, 208.0, 52.0, 8192, 512)
}

pub fn pointwise_bound(params: &Params) -> Result<VerdictReport> {
    let grid = pointwise_grid(params)?;
    let rep = check_pointwise_bound(&KERNEL_TIMES, &POINTWISE_ORDERS, GridPolicy::Fixed(grid), params, POINTWISE_WINDOW)?;
    let mut r = VerdictReport::new("pointwise-bound");
    let mut table = Table::new(&["t", "m", "n", "sup_ratio", "argmax_x", "argmax_v", "kernel_sup"]);
    for row in &rep.rows {
        table.push(vec![
            row.t.to_string(),
            row.m.to_string(),
            row.n.to_string(),
            row.sup_ratio.to_string(),
            row.argmax_x[0].to_string(),
            row.argmax_v[0].to_string(),
            row.kernel_sup.to_string(),
        ]);
    }
    for (m, n) in POINTWISE_ORDERS {
        r.check(Criterion::at_most(format!("spread-m{m}-n{n}"), rep.spread(m, n), POINTWISE_SPREAD));
    }
    let sups: Vec<(f64, f64)> = rep.rows.iter().filter(|w| w.m == 0 && w.n == 0).map(|w| (w.t, w.kernel_sup)).collect();
    let (ts, hs): (Vec<f64>, Vec<f64>) = sups.iter().copied().unzip();
    let slope = log_log_fit(&ts, &hs)?.slope;
    let d = params.d as f64;
    r.check(Criterion::within("kernel-sup-slope", slope, -(2.0 * d / params.alpha + d), SLOPE_TOL));
    r.plots.push(PlotSeries { name: "kernel_sup_vs_t".into(), log_log: true, points: sups });
    r.table = Some(table);
    Ok(r)
}

pub fn scaling_times() -> Vec<f64> {
    (-4..=2).map(|k| 2f64.powi(k)).collect()
}

pub fn e1_probes() -> Vec<Probe> {
    vec![
        Probe::e1(0, 0, 0.0, 0.0),
        Probe::e1(0, 1, 0.0, 0.0),
        Probe::e1(1, 0, 0.0, 0.0),
        Probe::e1(0, 0, 0.5, 0.0),
        Probe::e1(0, 0, 0.0, 0.5),
    ]
}

pub fn shift_probes() -> Vec<Probe> {
    let mut v = Vec::new();
    for regime in [Regime::Small, Regime::Large] {
        v.push(Probe::shifted(Estimate::E2, 0, 0, 0.5, 0.0, regime));
        v.push(Probe::shifted(Estimate::E3, 0, 0, 0.0, 0.5, regime));
    }
    v.push(Probe::fractional(Estimate::E4, 0.3, 0.3, Regime::Small));
    v.push(Probe::fractional(Estimate::E5, 0.3, 0.3, Regime::Small));
    v
}

fn fit_table() -> Table {
    Table::new(&[
        "probe", "estimate", "j1", "j2", "l1", "l2", "gamma1", "gamma2", "variable", "value", "norm", "fitted_slope",
        "theory_slope", "residual",
    ])
}

fn push_fit(table: &mut Table, f: &ScalingFitReport) {
    let p = &f.probe;
    let head = |var: &str, value: f64, norm: f64, fitted: f64, theory: f64, resid: String| {
        vec![
            f.probe_id.clone(),
            format!("{:?}", p.estimate).to_lowercase(),
            p.j1.to_string(),
            p.j2.to_string(),
            p.l1.to_string(),
            p.l2.to_string(),
            p.gamma1.to_string(),
            p.gamma2.to_string(),
            var.to_string(),
            value.to_string(),
            norm.to_string(),
            fitted.to_string(),
            theory.to_string(),
            resid,
        ]
    };
    for (&t, &n) in f.times.iter().zip(&f.norms) {
        table.push(head("t", t, n, f.fitted_slope, f.theory_slope, f.residual.to_string()));
    }
    if let (Some(fit), Some(theory)) = (f.a_fitted_slope, f.a_theory_slope) {
        for (&a, &n) in f.a_values.iter().zip(&f.a_norms) {
            table.push(head("a", a, n, fit, theory, String::new()));
        }
    }
}

fn scaling_report(name: &str, probes: &[Probe], params: &Params) -> Result<VerdictReport> {
    let settings = FitSettings::new(kernel_policy(params));
    let times = scaling_times();
    let mut r = VerdictReport::new(name);
    let mut table = fit_table();
    for probe in probes {
        let fit = l1_scaling_fit(probe, &times, &settings, params)?;
        push_fit(&mut table, &fit);
        r.check(Criterion::within(format!("t-slope {}", fit.probe_id), fit.fitted_slope, fit.theory_slope, SLOPE_TOL));
        if let (Some(m), Some(t)) = (fit.a_fitted_slope, fit.a_theory_slope) {
            r.check(Criterion::within(format!("a-slope {}", fit.probe_id), m, t, SLOPE_TOL));
        }
        r.plots.push(PlotSeries {
            name: fit.probe_id.replace(['(', ')', ',', '[', ']', '='], "_"),
            log_log: true,
            points: fit.times.iter().copied().zip(fit.norms.iter().copied()).collect(),
        });
    }
    r.table = Some(table);
    Ok(r)
}

pub fn e1_scaling(params: &Params) -> Result<VerdictReport> {
    scaling_report("e1-scaling", &e1_probes(), params)
}

pub fn shift_scaling(params: &Params) -> Result<VerdictReport> {
    scaling_report("shift-scaling", &shift_probes(), params)
}

pub const INTERPOLATION_FIELDS: u64 = 20;
pub const INTERPOLATION_BOUND: f64 = 4.0;

/// Interpolation inequality ratio over random band-limited fields.
pub fn interpolation(params: &Params, seed: u64) -> Result<VerdictReport> {
    let grid = TorusGrid::new(params.d, 16.0, 16.0, 64, if params.d == 1 { 64 } else { 16 })?;
    let mut r = VerdictReport::new("interpolation");
    let mut worst = 0.0f64;
    for k in 0..INTERPOLATION_FIELDS {
        let fam = DataFamily::Modes { amplitude: 1.0, kmax: 2 + (k as usize % 8), decay: 0.5 + 0.25 * (k % 5) as f64, seed: seed.wrapping_add(k) };
        let f = fam.sample(&grid, params)?;
        for gamma in [0.25, 0.5, 0.75] {
            worst = worst.max(interpolation_check(&f, gamma));
        }
    }
    r.check(Criterion::at_most("interpolation-ratio", worst, INTERPOLATION_BOUND));
    Ok(r)
}

/// Contraction ratio at which the smallness threshold is defined.
pub const SIGMA_RATIO: f64 = 0.5;
/// Default data sit at this fraction of the calibrated threshold.
pub const DATA_FRACTION: f64 = 0.25;
pub const PICARD_TOL: f64 = 1e-8;
pub const PICARD_MAX_ITER: usize = 10;
pub const RESIDUAL_TOL: f64 = 1e-6;
pub const MASS_DRIFT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Amplitude at which the first contraction ratio reaches the target.
    pub amplitude: f64,
    /// Seed norm of the data at that amplitude.
    pub sigma: f64,
    pub ratio: f64,
    pub evaluations: usize,
}

/// Finds the amplitude at which the first contraction ratio equals
/// `SIGMA_RATIO`. The ratio is close to linear in the amplitude, so a
/// proportional update converges in a handful of steps.
pub fn calibrate_smallness(
    family: &DataFamily,
    grid: &TorusGrid,
    time_grid: &TimeGrid,
    params: &Params,
    norms: &NormConfig,
) -> Result<Calibration> {
    let mut a = family.amplitude();
    let mut evaluations = 0;
    loop {
        let f0 = family.with_amplitude(a).sample(grid, params)?;
        let ratio = first_contraction_ratio(&f0, time_grid, params, norms)?;
        evaluations += 1;
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::Breakdown(format!("contraction ratio {ratio} at amplitude {a}")));
        }
        if (ratio / SIGMA_RATIO - 1.0).abs() <= 0.02 || evaluations >= 10 {
            return Ok(Calibration { amplitude: a, sigma: seed_norm(&f0, params, norms), ratio, evaluations });
        }
        a *= (SIGMA_RATIO / ratio).clamp(0.25, 4.0);
    }
}

/// Calibrated Picard run on the production grid.
pub fn picard(params: &Params) -> Result<VerdictReport> {
    let grid = default_grid(params.d);
    let tg = default_time_grid();
    let opts = PicardOptions::new(PICARD_TOL, PICARD_MAX_ITER, params);
    let family = DataFamily::Gaussian { amplitude: 1.0, wx: 1.0, wv: 0.5 };
    let cal = calibrate_smallness(&family, &grid, &tg, params, &opts.norms)?;
    let f0 = family.with_amplitude(DATA_FRACTION * cal.amplitude).sample(&grid, params)?;
    let opts = PicardOptions { smallness: Some(cal.sigma), ..opts };
    let (traj, diag) = picard_solve(&f0, &tg, params, &opts)?;
    let mut r = VerdictReport::new("picard");
    r.quantity("calibrated-amplitude", cal.amplitude);
    r.quantity("sigma", cal.sigma);
    r.quantity("calibration-ratio", cal.ratio);
    r.quantity("calibration-evaluations", cal.evaluations as f64);
    picard_criteria(&mut r, &traj, &diag, f0.mass(), Some(cal.sigma));
    Ok(r)
}

pub fn picard_criteria(r: &mut VerdictReport, traj: &Trajectory, diag: &PicardDiagnostics, mass0: f64, sigma: Option<f64>) {
    r.quantity("seed-norm", diag.seed_norm);
    r.quantity("linear-norm", diag.linear_norm);
    r.quantity("iterations", diag.iterations as f64);
    for (k, inc) in diag.increments.iter().enumerate() {
        r.quantity(format!("increment-{:02}", k + 1), *inc);
    }
    if let Some(s) = sigma {
        r.check(Criterion::at_most("seed-norm-vs-sigma", diag.seed_norm, s));
    }
    r.check(Criterion::at_most("max-contraction-ratio", max_of(diag.ratios.iter().copied()), SIGMA_RATIO));
    r.check(Criterion::at_least("converged", if diag.converged { 1.0 } else { 0.0 }, 1.0));
    r.check(Criterion::at_most("iterations", diag.iterations as f64, PICARD_MAX_ITER as f64));
    r.check(Criterion::at_most("residual", diag.residual, RESIDUAL_TOL));
    r.check(Criterion::at_most("mass-drift", traj.mass_drift(mass0), MASS_DRIFT_TOL));
    r.plots.push(PlotSeries {
        name: "picard_increments".into(),
        log_log: false,
        points: diag.increments.iter().enumerate().map(|(k, &v)| ((k + 1) as f64, v)).collect(),
    });
}

pub const CROSS_TOL: f64 = 1e-3;
pub const CROSS_IMPROVEMENT: f64 = 4.0;

/// Box on which the free transport is exactly periodic at every step of
/// both discretizations (`s L_v / L_x` is an integer for all step sizes
/// down to `1/256`).
pub fn cross_oracle_grid(params: &Params) -> Result<TorusGrid> {
    need_d1(params, "the cross-oracle")?;
    TorusGrid::new(1, 0.75, 192.0, 8, 2048)
}

/// Picard on the mild formulation against Strang splitting at `t = 1`, at
/// the default resolution and at half the time step and Duhamel mesh.
pub fn cross_oracle(params: &Params) -> Result<VerdictReport> {
    let grid = cross_oracle_grid(params)?;
    let f0 = DataFamily::Wave { amplitude: 0.1, wv: 1.0 }.sample(&grid, params)?;
    let coarse = default_time_grid();
    let mut r = VerdictReport::new("cross-oracle");
    let mut diffs = Vec::new();
    for (label, tg, dt) in [("default", coarse.clone(), 1.0 / 64.0), ("refined", coarse.refined(), 1.0 / 128.0)] {
        let (traj, diag) = picard_solve(&f0, &tg, params, &PicardOptions::new(1e-12, 30, params))?;
        let n = (tg.horizon() / dt).round() as usize;
        let (split, sd) = splitting_stepper(&f0, dt, n, params, SplittingOptions { nonlinear: true, record_every: 1 })?;
        let diff = traj.fields.last().expect("nonempty").sup_diff(split.fields.last().expect("nonempty"));
        r.quantity(format!("{label}-sup-difference"), diff);
        r.quantity(format!("{label}-picard-iterations"), diag.iterations as f64);
        r.quantity(format!("{label}-drift-cfl"), sd.drift_cfl);
        diffs.push(diff);
    }
    r.quantity("nonlinear-size", traj_nonlinear_size(&f0, params)?);
    r.check(Criterion::at_most("sup-difference", diffs[0], CROSS_TOL));
    r.check(Criterion::at_least("refinement-improvement", diffs[0] / diffs[1], CROSS_IMPROVEMENT));
    Ok(r)
}

/// Size of the nonlinear correction at `t = 1`, so the agreement above is
/// seen against something that is not trivially zero.
fn traj_nonlinear_size(f0: &PhaseField, params: &Params) -> Result<f64> {
    let tg = default_time_grid();
    let (traj, _) = picard_solve(f0, &tg, params, &PicardOptions::new(1e-12, 30, params))?;
    Ok(traj.fields.last().expect("nonempty").sup_diff(&linear_evolve(f0, tg.horizon(), params.alpha)))
}

pub const SCALING_LAMBDA: f64 = 2.0;
pub const SCALING_LINEAR_TOL: f64 = 1e-8;
pub const SCALING_NONLINEAR_TOL: f64 = 1e-3;

/// Runs `f0` and its critical rescaling `λ^{-κ} f0(λ^{-1-1/α} x, λ^{-1/α} v)`
/// on the correspondingly rescaled box and time grid, and returns the
/// largest relative sup discrepancy `f_λ(λ t) - λ^{-κ} f(t)`.
pub fn scaling_test(f0: &PhaseField, lambda: f64, time_grid: &TimeGrid, params: &Params, nonlinear: bool) -> Result<f64> {
    let alpha = params.alpha;
    let kappa = params.kappa;
    let sv = lambda.powf(1.0 / alpha);
    let grid2 = f0.grid.scaled(lambda * sv, sv);
    let c = lambda.powf(-kappa);
    let g0 = PhaseField { grid: grid2, values: f0.values.iter().map(|v| c * v).collect() };
    let tg2 = time_grid.scaled(lambda);
    let run = |f: &PhaseField, tg: &TimeGrid| -> Result<Trajectory> {
        if nonlinear {
            Ok(picard_solve(f, tg, params, &PicardOptions::new(1e-12, 30, params))?.0)
        } else {
            Ok(linear_trajectory(f, tg, alpha))
        }
    };
    let a = run(f0, time_grid)?;
    let b = run(&g0, &tg2)?;
    let scale = max_of(b.fields.iter().map(|f| f.sup_norm()));
    let diff = max_of(a.fields.iter().zip(&b.fields).map(|(fa, fb)| {
        fb.values.iter().zip(&fa.values).map(|(y, x)| (y - c * x).abs()).fold(0.0, f64::max)
    }));
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

pub fn scaling_invariance(params: &Params) -> Result<VerdictReport> {
    let grid = TorusGrid::new(params.d, 16.0, 16.0, 64, if params.d == 1 { 64 } else { 16 })?;
    let tg = default_time_grid();
    let f0 = DataFamily::Gaussian { amplitude: 0.05, wx: 1.0, wv: 1.0 }.sample(&grid, params)?;
    let mut r = VerdictReport::new("scaling-invariance");
    let lin = scaling_test(&f0, SCALING_LAMBDA, &tg, &Params { nonlinear: false, ..*params }, false)?;
    let non = scaling_test(&f0, SCALING_LAMBDA, &tg, params, true)?;
    let identity = scaling_test(&f0, 1.0, &tg, params, true)?;
    r.quantity("identity-discrepancy", identity);
    r.check(Criterion::at_most("linear-discrepancy", lin, SCALING_LINEAR_TOL));
    r.check(Criterion::at_most("nonlinear-discrepancy", non, SCALING_NONLINEAR_TOL));
    Ok(r)
}

pub const DECAY_CONSTANT_MAX: f64 = 100.0;
pub const DECAY_HALVING_TOL: f64 = 0.1;
/// Seed norm at which the decay experiment places each family.
pub const DECAY_SEED: f64 = 0.05;

/// Weighted sup norms `t^{m + (m+n+α+β-2)/α} ‖∇_x^m ∇_v^n f(t)‖_∞` per
/// `(m, n)` with `m + n <= 2`, maximized over the sample times inside the
/// window `t^{1+1/α} <= L / 20`.
pub fn decay_bound_check(traj: &Trajectory, params: &Params) -> BTreeMap<(usize, usize), Vec<(f64, f64)>> {
    let g = traj.grid();
    let alpha = params.alpha;
    let limit = g.lx.min(g.lv) / 20.0;
    let mut out = BTreeMap::new();
    for total in 0..=2usize {
        for m in 0..=total {
            let n = total - m;
            let symbols: Vec<_> = DerivOrders::all_of_order(g.d, m, n).iter().map(|o| derivative_symbol(&g, o)).collect();
            let mut series = Vec::new();
            for (&t, f) in traj.times().iter().zip(&traj.fields) {
                if t.powf(1.0 + 1.0 / alpha) > limit {
                    continue;
                }
                let spec = f.spectrum();
                let sup = max_of(symbols.iter().map(|s| spec.apply(s).to_field().sup_norm()));
                let w = t.powf(m as f64 + (total as f64 + alpha + params.beta - 2.0) / alpha);
                series.push((t, w * sup));
            }
            out.insert((m, n), series);
        }
    }
    out
}

fn decay_constants(family: &DataFamily, grid: &TorusGrid, tg: &TimeGrid, params: &Params) -> Result<(BTreeMap<(usize, usize), f64>, f64)> {
    let f0 = family.sample(grid, params)?;
    let opts = PicardOptions::new(PICARD_TOL, 30, params);
    let seed = seed_norm(&f0, params, &opts.norms);
    let (traj, _) = picard_solve(&f0, tg, params, &opts)?;
    let curves = decay_bound_check(&traj, params);
    let consts = curves.iter().map(|(&k, s)| (k, max_of(s.iter().map(|p| p.1)) / seed)).collect();
    // log slope of the weighted norms over the last two window samples
    let trend = max_of(curves.values().filter(|s| s.len() >= 2).map(|s| {
        let (a, b) = (s[s.len() - 2], s[s.len() - 1]);
        (b.1 / a.1).ln() / (b.0 / a.0).ln()
    }));
    Ok((consts, trend))
}

/// Decay constants of three data families, and their stability when the
/// amplitude is halved.
pub fn decay_bound(params: &Params, seed: u64) -> Result<VerdictReport> {
    let grid = TorusGrid::new(params.d, 48.0, 48.0, 128, if params.d == 1 { 128 } else { 32 })?;
    let tg = TimeGrid::dyadic(2.0, -7)?;
    let norms = NormConfig::for_params(params);
    let mut r = VerdictReport::new("decay-bound");
    let mut table = Table::new(&["family", "amplitude", "m", "n", "constant"]);
    let (mut worst, mut worst_change, mut worst_trend) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for fam in oracle_families(seed) {
        let unit = seed_norm(&fam.with_amplitude(1.0).sample(&grid, params)?, params, &norms);
        let a = DECAY_SEED / unit;
        let (full, trend) = decay_constants(&fam.with_amplitude(a), &grid, &tg, params)?;
        let (half, _) = decay_constants(&fam.with_amplitude(0.5 * a), &grid, &tg, params)?;
        for (&(m, n), &c) in &full {
            table.push(vec![fam.label().into(), a.to_string(), m.to_string(), n.to_string(), c.to_string()]);
            table.push(vec![fam.label().into(), (0.5 * a).to_string(), m.to_string(), n.to_string(), half[&(m, n)].to_string()]);
            worst = worst.max(c).max(half[&(m, n)]);
            worst_change = worst_change.max((half[&(m, n)] / c - 1.0).abs());
        }
        r.quantity(format!("end-trend-{}", fam.label()), trend);
        worst_trend = worst_trend.max(trend);
    }
    r.check(Criterion::at_most("max-decay-constant", worst, DECAY_CONSTANT_MAX));
    r.check(Criterion::at_most("halving-change", worst_change, DECAY_HALVING_TOL));
    r.quantity("max-end-trend", worst_trend);
    r.table = Some(table);
    Ok(r)
}

pub const AMPLITUDE_TOL: f64 = 0.01;
pub const DOUBLING_TOL: f64 = 0.2;
pub const IDENTITY_TOL: f64 = 1e-12;

/// `F[f2, f1] = f2 ∇_v Λ_v^{-β} f1` at `t = 0` and every sample time.
pub fn bilinear_force_trajectory(f2: &Trajectory, f1: &Trajectory, beta: f64) -> Result<ForceTrajectory> {
    let first = |t: &Trajectory| {
        t.initial
            .clone()
            .ok_or_else(|| Error::InvalidParams { field: "trajectory", reason: "initial value required for the force".into() })
    };
    let (a0, b0) = (first(f2)?, first(f1)?);
    let fields = std::iter::once((&a0, &b0))
        .chain(f2.fields.iter().zip(&f1.fields))
        .map(|(a, b)| bilinear_force(a, b, beta))
        .collect::<Result<Vec<_>>>()?;
    ForceTrajectory::new(f1.time_grid.clone(), fields)
}

/// `|||F[f2, f1]||| / (‖f1‖_X ‖f2‖_X)` for two linear flows.
pub fn bilinear_estimate_check(f1: &PhaseField, f2: &PhaseField, time_grid: &TimeGrid, params: &Params) -> Result<f64> {
    let norms = NormConfig::for_params(params);
    let g1 = linear_trajectory(f1, time_grid, params.alpha);
    let g2 = linear_trajectory(f2, time_grid, params.alpha);
    let force = bilinear_force_trajectory(&g2, &g1, params.beta)?;
    Ok(force_norm(&force, params, &norms) / (x_norm(&g1, params, &norms) * x_norm(&g2, params, &norms)))
}

/// `‖S g1 - S g2‖_X / ((‖g1‖_X + ‖g2‖_X) ‖g1 - g2‖_X)`, and the relative
/// defect of the identity `F[g1] - F[g2] = F[g1, g1 - g2] + F[g1 - g2, g2]`.
pub fn contraction_estimate(g1: &Trajectory, g2: &Trajectory, params: &Params) -> Result<(f64, f64)> {
    let norms = NormConfig::for_params(params);
    let f1 = force_trajectory(g1, params)?;
    let f2 = force_trajectory(g2, params)?;
    let diff_fields: Vec<VectorField> = f1.fields.iter().zip(&f2.fields).map(|(a, b)| a.sub(b)).collect();
    let diff = ForceTrajectory::new(g1.time_grid.clone(), diff_fields)?;
    let mut delta = g1.sub(g2);
    delta.initial = match (&g1.initial, &g2.initial) {
        (Some(a), Some(b)) => Some(a.sub(b)),
        _ => None,
    };
    let split = bilinear_force_trajectory(g1, &delta, params.beta)?;
    let split2 = bilinear_force_trajectory(&delta, g2, params.beta)?;
    let defect = max_of(diff.fields.iter().zip(split.fields.iter().zip(&split2.fields)).map(|(d, (a, b))| {
        let scale = max_of([d.sup_norm(), a.sup_norm(), b.sup_norm()]);
        let e = d.sub(&a.add(b)).sup_norm();
        if scale > 0.0 {
            e / scale
        } else {
            e
        }
    }));
    let m = duhamel_all(&diff, params.alpha)?;
    let sdiff = Trajectory::new(g1.time_grid.clone(), m, Provenance::Linear)?;
    let ratio = x_norm(&sdiff, params, &norms) / ((x_norm(g1, params, &norms) + x_norm(g2, params, &norms)) * x_norm(&delta, params, &norms));
    Ok((ratio, defect))
}

/// Bilinear and contraction ratios: amplitude invariance and grid doubling.
///
/// The box has `L_v / L_x = 64`, so the free transport is periodic at every
/// sample time; elsewhere the sheared tails jump across the velocity edge
/// and derivative norms grow with the resolution.
pub fn bilinear(params: &Params, _seed: u64) -> Result<VerdictReport> {
    need_d1(params, "the bilinear experiment")?;
    let tg = default_time_grid();
    let coarse = TorusGrid::new(1, 2.0 * PI, 128.0 * PI, 16, 1024)?;
    let fine = coarse.refined(2);
    let fa = DataFamily::Wave { amplitude: 0.1, wv: 1.0 };
    let fb = DataFamily::Wave { amplitude: 0.1, wv: 2.0 };
    let mut r = VerdictReport::new("bilinear");
    let measure = |grid: &TorusGrid, s: f64| -> Result<(f64, f64, f64)> {
        let a = fa.sample(grid, params)?.scale(s);
        let b = fb.sample(grid, params)?.scale(s);
        let bil = bilinear_estimate_check(&a, &b, &tg, params)?;
        let g1 = linear_trajectory(&a, &tg, params.alpha);
        let g2 = linear_trajectory(&b, &tg, params.alpha);
        let (con, defect) = contraction_estimate(&g1, &g2, params)?;
        Ok((bil, con, defect))
    };
    let (b0, c0, d0) = measure(&coarse, 1.0)?;
    let (b1, c1, d1) = measure(&coarse, 0.5)?;
    let (b2, c2, d2) = measure(&fine, 1.0)?;
    r.quantity("bilinear-ratio", b0);
    r.quantity("bilinear-ratio-fine", b2);
    r.quantity("contraction-ratio", c0);
    r.quantity("contraction-ratio-fine", c2);
    r.check(Criterion::at_most("bilinear-amplitude-change", (b1 / b0 - 1.0).abs(), AMPLITUDE_TOL));
    r.check(Criterion::at_most("bilinear-doubling-change", (b2 / b0 - 1.0).abs(), DOUBLING_TOL));
    r.check(Criterion::at_most("contraction-amplitude-change", (c1 / c0 - 1.0).abs(), AMPLITUDE_TOL));
    r.check(Criterion::at_most("contraction-doubling-change", (c2 / c0 - 1.0).abs(), DOUBLING_TOL));
    r.check(Criterion::at_most("difference-identity-defect", max_of([d0, d1, d2]), IDENTITY_TOL));
    Ok(r)
}

/// Thread counts compared by the reproducibility experiment.
pub const THREAD_COUNTS: [usize; 2] = [1, 4];

/// Serialized report and CSV bytes of a few rayon-heavy experiments.
fn fingerprint(params: &Params, seed: u64) -> Result<Vec<u8>> {
    let grid = TorusGrid::new(params.d, 16.0, 16.0, 64, if params.d == 1 { 64 } else { 16 })?;
    let tg = default_time_grid();
    let f0 = DataFamily::Modes { amplitude: 0.05, kmax: 4, decay: 2.0, seed }.sample(&grid, params)?;
    let (traj, diag) = picard_solve(&f0, &tg, params, &PicardOptions::new(PICARD_TOL, 20, params))?;
    let mut r = VerdictReport::new("fingerprint");
    picard_criteria(&mut r, &traj, &diag, f0.mass(), None);
    let mut bytes = serde_json::to_vec(&r)?;
    for f in &traj.fields {
        for v in &f.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let e1 = e1_scaling(params)?;
    bytes.extend(serde_json::to_vec(&e1)?);
    if let Some(t) = &e1.table {
        bytes.extend(t.to_csv_bytes()?);
    }
    Ok(bytes)
}

/// Same outputs, byte for byte, under different thread counts.
pub fn reproducibility(params: &Params, seed: u64) -> Result<VerdictReport> {
    let mut prints = Vec::new();
    for n in THREAD_COUNTS {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Breakdown(format!("thread pool: {e}")))?;
        prints.push(pool.install(|| fingerprint(params, seed))?);
    }
    let differing = prints[1..].iter().filter(|p| **p != prints[0]).count();
    let mut r = VerdictReport::new("reproducibility");
    r.quantity("fingerprint-bytes", prints[0].len() as f64);
    r.check(Criterion::at_most("differing-runs", differing as f64, 0.0));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_fail_on_nan() {
        assert!(!Criterion::at_most("a", f64::NAN, 1.0).passed);
        assert!(!Criterion::at_least("a", f64::NAN, 1.0).passed);
        assert!(!Criterion::within("a", f64::NAN, 1.0, 0.1).passed);
        assert!(Criterion::within("a", 1.05, 1.0, 0.1).passed);
    }

    #[test]
    fn experiment_names_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(ExperimentId::parse(&id.name()).unwrap(), id);
        }
        assert!(ExperimentId::parse("nope").is_err());
    }

    #[test]
    fn report_json_skips_runtime() {
        let mut r = VerdictReport::new("x");
        r.runtime = Duration::from_secs(3);
        r.check(Criterion::at_most("c", 0.5, 1.0));
        let s = serde_json::to_string(&r).unwrap();
        assert!(!s.contains("runtime"));
        assert!(r.passed());
    }

    #[test]
    fn linear_scaling_is_exact_on_a_small_grid() {
        let p = Params::default();
        let g = TorusGrid::new(1, 8.0, 8.0, 32, 32).unwrap();
        let f0 = DataFamily::Modes { amplitude: 1.0, kmax: 3, decay: 1.0, seed: 3 }.sample(&g, &p).unwrap();
        let tg = TimeGrid::dyadic(1.0, -3).unwrap();
        assert!(scaling_test(&f0, 2.0, &tg, &p, false).unwrap() < 1e-10);
    }
}
