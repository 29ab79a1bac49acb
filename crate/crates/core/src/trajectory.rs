//! Time sampling, Duhamel quadrature nodes and time-sampled fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{PhaseField, TorusGrid};

/// Sample times `0 < t_1 < ... < t_K = T` plus the per-interval graded
/// quadrature mesh used for Duhamel integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    /// Quadrature panels per sample interval.
    pub nodes_per_interval: usize,
    /// Grading exponent `p` of `tau_j = a + (b - a)(1 - (1 - j/J)^p)`.
    pub grading: f64,
}

impl TimeGrid {
    pub const DEFAULT_NODES: usize = 32;
    pub const DEFAULT_GRADING: f64 = 3.0;

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        let g = TimeGrid { times, nodes_per_interval: Self::DEFAULT_NODES, grading: Self::DEFAULT_GRADING };
        g.validate()?;
        Ok(g)
    }

    /// `k` equally spaced samples on `(0, horizon]`.
    pub fn uniform(horizon: f64, k: usize) -> Result<Self> {
        Self::from_times((1..=k).map(|i| horizon * i as f64 / k as f64).collect())
    }

    /// Dyadic samples `2^j` for `j >= jmin` below the horizon, then the horizon.
    pub fn dyadic(horizon: f64, jmin: i32) -> Result<Self> {
        let mut times = Vec::new();
        let mut j = jmin;
        while 2f64.powi(j) < horizon * (1.0 - 1e-12) {
            times.push(2f64.powi(j));
            j += 1;
        }
        times.push(horizon);
        Self::from_times(times)
    }

    /// Dyadic head `2^{jmin}, ..., 2^{-1}` followed by a uniform tail of
    /// spacing `horizon / k`. Small times resolve the norm weights, the
    /// uniform tail keeps the force interpolation accurate.
    pub fn dyadic_then_uniform(horizon: f64, jmin: i32, k: usize) -> Result<Self> {
        let h = horizon / k as f64;
        let mut times: Vec<f64> = (jmin..0).map(|j| 2f64.powi(j)).filter(|&t| t < h * (1.0 - 1e-12)).collect();
        times.extend((1..=k).map(|i| horizon * i as f64 / k as f64));
        Self::from_times(times)
    }

    pub fn with_nodes(mut self, nodes_per_interval: usize, grading: f64) -> Result<Self> {
        self.nodes_per_interval = nodes_per_interval;
        self.grading = grading;
        self.validate()?;
        Ok(self)
    }

    /// Midpoint inserted into every interval (including `(0, t_1)`); the
    /// node count per interval is kept, so the quadrature mesh halves too.
    pub fn refined(&self) -> Self {
        let mut times = Vec::with_capacity(2 * self.times.len());
        let mut a = 0.0;
        for &t in &self.times {
            times.push(0.5 * (a + t));
            times.push(t);
            a = t;
        }
        TimeGrid { times, ..self.clone() }
    }

    /// All sample times multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        TimeGrid { times: self.times.iter().map(|t| t * c).collect(), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::InvalidGrid("time grid has no samples".into()));
        }
        if self.times[0] <= 0.0 || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("sample times must be positive and strictly increasing".into()));
        }
        if self.nodes_per_interval == 0 {
            return Err(Error::InvalidGrid("at least one quadrature panel per interval".into()));
        }
        if self.grading < 2.0 {
            return Err(Error::InvalidGrid(format!("grading {} is below 2", self.grading)));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("validated time grid is nonempty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Interval endpoints `(t_{i-1}, t_i)` with `t_0 = 0`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        let a = if i == 0 { 0.0 } else { self.times[i - 1] };
        (a, self.times[i])
    }

    /// Graded nodes on interval `i`, clustered toward its right end, with
    /// weights from Simpson's rule in the uniform variable `u = j/J`
    /// (trapezoid when `J` is odd). The substitution Jacobian vanishes at
    /// the right end, so the node at lag zero carries weight zero.
    pub fn interval_nodes(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.interval(i);
        let jn = self.nodes_per_interval;
        let p = self.grading;
        let du = 1.0 / jn as f64;
        let mut nodes = Vec::with_capacity(jn + 1);
        let mut weights = Vec::with_capacity(jn + 1);
        for j in 0..=jn {
            let u = j as f64 * du;
            nodes.push(a + (b - a) * (1.0 - (1.0 - u).powf(p)));
            let rule = if jn % 2 == 1 {
                if j == 0 || j == jn { 0.5 } else { 1.0 }
            } else if j == 0 || j == jn {
                1.0 / 3.0
            } else if j % 2 == 1 {
                4.0 / 3.0
            } else {
                2.0 / 3.0
            };
            let jacobian = (b - a) * p * (1.0 - u).powf(p - 1.0);
            weights.push(rule * du * jacobian);
        }
        nodes[0] = a;
        nodes[jn] = b;
        (nodes, weights)
    }

    /// Index of a sample time, matched to relative precision `1e-12`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// Where a trajectory came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Linear,
    PicardIterate(usize),
    Splitting,
    FourierOde,
    Rescaled,
}

impl Provenance {
    pub fn code(&self) -> u32 {
        match self {
            Provenance::Linear => 1,
            Provenance::PicardIterate(_) => 2,
            Provenance::Splitting => 3,
            Provenance::FourierOde => 4,
            Provenance::Rescaled => 5,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Provenance::Linear => "linear".into(),
            Provenance::PicardIterate(k) => format!("picard-iterate-{k}"),
            Provenance::Splitting => "splitting".into(),
            Provenance::FourierOde => "fourier-ode".into(),
            Provenance::Rescaled => "rescaled".into(),
        }
    }
}

/// One field per sample time on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time_grid: TimeGrid,
    pub fields: Vec<PhaseField>,
    pub provenance: Provenance,
    pub masses: Vec<f64>,
    /// Value at `t = 0`, when known.
    pub initial: Option<PhaseField>,
}

impl Trajectory {
    pub fn new(time_grid: TimeGrid, fields: Vec<PhaseField>, provenance: Provenance) -> Result<Self> {
        if fields.len() != time_grid.len() {
            return Err(Error::DimensionMismatch { expected: time_grid.len(), actual: fields.len() });
        }
        if let Some(first) = fields.first() {
            if fields.iter().any(|f| !f.grid.is_compatible(&first.grid)) {
                return Err(Error::IncompatibleGrids("trajectory fields on different grids".into()));
            }
        }
        let masses = fields.iter().map(PhaseField::mass).collect();
        Ok(Trajectory { time_grid, fields, provenance, masses, initial: None })
    }

    pub fn with_initial(mut self, f0: PhaseField) -> Self {
        self.initial = Some(f0);
        self
    }

    fn map_with(&self, other: Option<&Trajectory>, op: impl Fn(&PhaseField, Option<&PhaseField>) -> PhaseField) -> Self {
        let fields = match other {
            Some(o) => self.fields.iter().zip(&o.fields).map(|(a, b)| op(a, Some(b))).collect(),
            None => self.fields.iter().map(|a| op(a, None)).collect(),
        };
        let initial = match (&self.initial, other.map(|o| &o.initial)) {
            (Some(a), Some(Some(b))) => Some(op(a, Some(b))),
            (Some(a), None) => Some(op(a, None)),
            _ => None,
        };
        let mut t = Trajectory::new(self.time_grid.clone(), fields, self.provenance).expect("shape preserved");
        t.initial = initial;
        t
    }

    pub fn grid(&self) -> TorusGrid {
        self.fields[0].grid
    }

    pub fn times(&self) -> &[f64] {
        &self.time_grid.times
    }

    pub fn at(&self, t: f64) -> Option<&PhaseField> {
        self.time_grid.index_of(t).map(|i| &self.fields[i])
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_with(None, |a, _| a.scale(c))
    }

    pub fn sub(&self, other: &Trajectory) -> Self {
        self.map_with(Some(other), |a, b| a.sub(b.expect("paired")))
    }

    pub fn add(&self, other: &Trajectory) -> Self {
        self.map_with(Some(other), |a, b| a.add(b.expect("paired")))
    }

    /// Largest relative drift of the mass away from `reference`.
    pub fn mass_drift(&self, reference: f64) -> f64 {
        let scale = reference.abs().max(self.fields.iter().map(PhaseField::l1_norm).fold(0.0, f64::max));
        if scale == 0.0 {
            return 0.0;
        }
        self.masses.iter().map(|m| (m - reference).abs()).fold(0.0, f64::max) / scale
    }

    pub fn sup_diff(&self, other: &Trajectory) -> f64 {
        self.fields.iter().zip(&other.fields).map(|(a, b)| a.sup_diff(b)).fold(0.0, f64::max)
    }
}

/// Vector field with `d` components, e.g. the drift flux `F[g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub components: Vec<PhaseField>,
}

impl VectorField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        VectorField { components: vec![PhaseField::zeros(grid); grid.d] }
    }

    pub fn grid(&self) -> TorusGrid {
        self.components[0].grid
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        VectorField { components: self.components.iter().zip(&other.components).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        VectorField { components: self.components.iter().zip(&other.components).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.components.iter().map(PhaseField::sup_norm).fold(0.0, f64::max)
    }
}

/// Force samples at `0, t_1, ..., t_K` for a given time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceTrajectory {
    pub time_grid: TimeGrid,
    /// `fields[0]` is the force at `t = 0`, `fields[i]` at `t_i`.
    pub fields: Vec<VectorField>,
}

impl ForceTrajectory {
    pub fn new(time_grid: TimeGrid, fields: Vec<VectorField>) -> Result<Self> {
        if fields.len() != time_grid.len() + 1 {
            return Err(Error::DimensionMismatch { expected: time_grid.len() + 1, actual: fields.len() });
        }
        Ok(ForceTrajectory { time_grid, fields })
    }

    pub fn grid(&self) -> TorusGrid {
        self.fields[0].grid()
    }

    /// Sample times including the initial time 0.
    pub fn times_with_origin(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.time_grid.times.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_nodes_cluster_at_right_end() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let (nodes, w) = g.interval_nodes(2);
        assert_eq!(nodes.len(), 33);
        assert_eq!(nodes[0], 0.5);
        assert_eq!(*nodes.last().unwrap(), 0.75);
        assert!(w[..32].iter().all(|&w| w > 0.0));
        assert_eq!(w[32], 0.0);
        assert!((w.iter().sum::<f64>() - 0.25).abs() < 1e-15);
        // fourth order in the graded variable: cubics in tau are integrated to round-off
        let cubic: f64 = nodes.iter().zip(&w).map(|(t, w)| w * t.powi(3)).sum();
        assert!((cubic - (0.75f64.powi(4) - 0.5f64.powi(4)) / 4.0).abs() < 1e-5);
        assert!(nodes[32] - nodes[31] < nodes[1] - nodes[0]);
    }

    #[test]
    fn dyadic_grid_ends_at_horizon() {
        let g = TimeGrid::dyadic(1.0, -6).unwrap();
        assert_eq!(g.times.first(), Some(&(1.0 / 64.0)));
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.len(), 7);
        let h = TimeGrid::dyadic_then_uniform(1.0, -6, 8).unwrap();
        assert_eq!(h.times[..3], [1.0 / 64.0, 1.0 / 32.0, 1.0 / 16.0]);
        assert_eq!(h.len(), 11);
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(TimeGrid::from_times(vec![]).is_err());
        assert!(TimeGrid::from_times(vec![0.5, 0.5]).is_err());
        assert!(TimeGrid::from_times(vec![0.0, 0.5]).is_err());
        assert!(TimeGrid::uniform(1.0, 4).unwrap().with_nodes(8, 1.5).is_err());
    }
}
