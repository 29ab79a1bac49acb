//! Periodic phase-space lattice, scalar fields and the discrete Fourier pair.
//!
//! Arrays are flat, row-major, with the `d` position axes first and the `d`
//! velocity axes last. Both lattices use FFT ordering: index `j` on an axis
//! of `n` points and side `L` sits at the signed coordinate `j * L / n` for
//! `j < n/2` and `(j - n) * L / n` otherwise, so the origin is index 0.
//!
//! Normalization: the forward transform carries `1 / N_total`, the inverse
//! carries nothing. A constant field maps to its own value at the zero mode.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position or velocity half of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    X,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub d: usize,
    pub lx: f64,
    pub lv: f64,
    pub nx: usize,
    pub nv: usize,
}

impl TorusGrid {
    pub fn new(d: usize, lx: f64, lv: f64, nx: usize, nv: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidGrid(format!("dimension {d} is not 1 or 2")));
        }
        if !(lx > 0.0 && lv > 0.0 && lx.is_finite() && lv.is_finite()) {
            return Err(Error::InvalidGrid(format!("box sides must be positive, got ({lx}, {lv})")));
        }
        for n in [nx, nv] {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidGrid(format!("{n} points per axis is not a power of two >= 4")));
            }
        }
        if d == 2 && nx.max(nv) > 64 {
            return Err(Error::InvalidGrid("d = 2 grids are capped at 64 points per axis".into()));
        }
        Ok(TorusGrid { d, lx, lv, nx, nv })
    }

    /// Same grid with both sides multiplied, points unchanged.
    pub fn scaled(&self, sx: f64, sv: f64) -> Self {
        TorusGrid { lx: self.lx * sx, lv: self.lv * sv, ..*self }
    }

    /// Same box with `factor` times more points per axis.
    pub fn refined(&self, factor: usize) -> Self {
        TorusGrid { nx: self.nx * factor, nv: self.nv * factor, ..*self }
    }

    pub fn len(&self) -> usize {
        self.nx.pow(self.d as u32) * self.nv.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.nx; self.d];
        s.extend(std::iter::repeat(self.nv).take(self.d));
        s
    }

    /// Number of points in the position block (`nx^d`).
    pub fn x_len(&self) -> usize {
        self.nx.pow(self.d as u32)
    }

    /// Number of points in the velocity block (`nv^d`).
    pub fn v_len(&self) -> usize {
        self.nv.pow(self.d as u32)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        self.lv / self.nv as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (self.dx() * self.dv()).powi(self.d as i32)
    }

    pub fn volume(&self) -> f64 {
        (self.lx * self.lv).powi(self.d as i32)
    }

    pub fn side_len(&self, side: Side) -> f64 {
        match side {
            Side::X => self.lx,
            Side::V => self.lv,
        }
    }

    pub fn side_points(&self, side: Side) -> usize {
        match side {
            Side::X => self.nx,
            Side::V => self.nv,
        }
    }

    pub fn spacing(&self, side: Side) -> f64 {
        self.side_len(side) / self.side_points(side) as f64
    }

    pub fn is_compatible(&self, other: &TorusGrid) -> bool {
        self == other
    }

    /// Splits a flat index into `(x multi-index, v multi-index)`.
    pub fn unflatten(&self, idx: usize) -> ([usize; 2], [usize; 2]) {
        let mut x = [0; 2];
        let mut v = [0; 2];
        let mut r = idx;
        for c in (0..self.d).rev() {
            v[c] = r % self.nv;
            r /= self.nv;
        }
        for c in (0..self.d).rev() {
            x[c] = r % self.nx;
            r /= self.nx;
        }
        (x, v)
    }

    /// Physical coordinates of a flat index.
    pub fn point(&self, idx: usize) -> ([f64; 2], [f64; 2]) {
        let (ix, iv) = self.unflatten(idx);
        let mut x = [0.0; 2];
        let mut v = [0.0; 2];
        for c in 0..self.d {
            x[c] = signed_index(ix[c], self.nx) as f64 * self.dx();
            v[c] = signed_index(iv[c], self.nv) as f64 * self.dv();
        }
        (x, v)
    }

    /// Frequency vectors of a flat spectral index.
    pub fn mode(&self, idx: usize) -> Mode {
        let (ix, iv) = self.unflatten(idx);
        let mut m = Mode::default();
        let kx = 2.0 * PI / self.lx;
        let kv = 2.0 * PI / self.lv;
        for c in 0..self.d {
            m.xi[c] = signed_index(ix[c], self.nx) as f64 * kx;
            m.eta[c] = signed_index(iv[c], self.nv) as f64 * kv;
            m.nyq_x[c] = ix[c] == self.nx / 2;
            m.nyq_v[c] = iv[c] == self.nv / 2;
            m.ix[c] = signed_index(ix[c], self.nx);
            m.iv[c] = signed_index(iv[c], self.nv);
        }
        m
    }

    /// Iterator over all modes in flat spectral order.
    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }

    /// Per-axis frequency table for one side.
    pub fn wavenumbers(&self, side: Side) -> Vec<f64> {
        let n = self.side_points(side);
        let k = 2.0 * PI / self.side_len(side);
        (0..n).map(|j| signed_index(j, n) as f64 * k).collect()
    }

    /// Per-axis coordinate table for one side.
    pub fn coordinates(&self, side: Side) -> Vec<f64> {
        let n = self.side_points(side);
        let h = self.spacing(side);
        (0..n).map(|j| signed_index(j, n) as f64 * h).collect()
    }
}

/// Signed FFT-order index; the Nyquist index `n/2` maps to `-n/2`.
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Frequency data for one lattice point in spectral space.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Mode {
    pub xi: [f64; 2],
    pub eta: [f64; 2],
    pub ix: [i64; 2],
    pub iv: [i64; 2],
    pub nyq_x: [bool; 2],
    pub nyq_v: [bool; 2],
}

impl Mode {
    pub fn xi_norm(&self) -> f64 {
        (self.xi[0] * self.xi[0] + self.xi[1] * self.xi[1]).sqrt()
    }

    pub fn eta_norm(&self) -> f64 {
        (self.eta[0] * self.eta[0] + self.eta[1] * self.eta[1]).sqrt()
    }

    pub fn any_nyquist_v(&self) -> bool {
        self.nyq_v[0] || self.nyq_v[1]
    }

    pub fn any_nyquist_x(&self) -> bool {
        self.nyq_x[0] || self.nyq_x[1]
    }
}

/// Real scalar field on the phase-space lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl PhaseField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        PhaseField { grid: *grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
        }
        Ok(PhaseField { grid: *grid, values })
    }

    /// Samples `f(x, v)` at every lattice point.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> Self {
        let d = grid.d;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, v) = grid.point(i);
                f(&x[..d], &v[..d])
            })
            .collect();
        PhaseField { grid: *grid, values }
    }

    pub fn spectrum(&self) -> Spectrum {
        forward(self)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Cell-weighted sum; the torus integral of the field.
    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        pairwise_sum(&abs) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        (pairwise_sum(&sq) * self.grid.cell_volume()).sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        PhaseField { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &PhaseField) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PhaseField) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &PhaseField) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with(&self, other: &PhaseField, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid.is_compatible(&other.grid), "fields live on different grids");
        PhaseField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn sup_diff(&self, other: &PhaseField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Integer roll along one coordinate axis: `out(z) = f(z - shift * h e_axis)`.
    pub fn roll(&self, side: Side, component: usize, shift: i64) -> Self {
        let g = &self.grid;
        let shape = g.shape();
        let axis = match side {
            Side::X => component,
            Side::V => g.d + component,
        };
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let s = shift.rem_euclid(n as i64) as usize;
        let mut out = vec![0.0; self.values.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let j = (i / stride) % n;
            let src_j = (j + n - s) % n;
            *o = self.values[i - j * stride + src_j * stride];
        }
        PhaseField { grid: self.grid, values: out }
    }

    /// `‖f - roll(f)‖_∞` without materializing the rolled field.
    pub fn roll_sup_diff(&self, side: Side, component: usize, shift: i64) -> f64 {
        let g = &self.grid;
        let shape = g.shape();
        let axis = match side {
            Side::X => component,
            Side::V => g.d + component,
        };
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let s = shift.rem_euclid(n as i64) as usize;
        let mut best = 0.0_f64;
        for block in self.values.chunks(n * stride) {
            for j in 0..n {
                let src = (j + n - s) % n;
                let a = &block[j * stride..(j + 1) * stride];
                let b = &block[src * stride..(src + 1) * stride];
                best = a.iter().zip(b).fold(best, |m, (x, y)| m.max((x - y).abs()));
            }
        }
        best
    }
}

/// Complex coefficients of a field on the dual lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: TorusGrid,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Spectrum { grid: *grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Inverse transform; the imaginary residue is discarded.
    pub fn to_field(&self) -> PhaseField {
        inverse(self).0
    }

    /// Entrywise product with a real multiplier.
    pub fn apply_real(&self, m: &[f64]) -> Spectrum {
        assert_eq!(m.len(), self.coeffs.len());
        Spectrum {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(m).map(|(c, m)| c * m).collect(),
        }
    }

    pub fn apply(&self, m: &[Complex64]) -> Spectrum {
        assert_eq!(m.len(), self.coeffs.len());
        Spectrum {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(m).map(|(c, m)| c * m).collect(),
        }
    }

    /// Discrete l2 norm scaled so that it equals the physical L2 norm.
    pub fn l2_norm(&self) -> f64 {
        let sq: Vec<f64> = self.coeffs.iter().map(|c| c.norm_sqr()).collect();
        (pairwise_sum(&sq) * self.grid.volume()).sqrt()
    }
}

/// Forward transform with the `1/N` normalization.
pub fn forward(field: &PhaseField) -> Spectrum {
    let g = field.grid;
    let mut data: Vec<Complex64> = field.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_axes(&mut data, &g.shape(), &all_axes(&g), Direction::Forward);
    let s = 1.0 / g.len() as f64;
    data.iter_mut().for_each(|c| *c *= s);
    Spectrum { grid: g, coeffs: data }
}

/// Inverse transform. Returns the real part and the largest imaginary residue.
pub fn inverse(spec: &Spectrum) -> (PhaseField, f64) {
    let g = spec.grid;
    let mut data = spec.coeffs.clone();
    transform_axes(&mut data, &g.shape(), &all_axes(&g), Direction::Inverse);
    let imag = data.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    (PhaseField { grid: g, values: data.iter().map(|c| c.re).collect() }, imag)
}

/// Checked forward transform of a raw value array.
pub fn transform(grid: &TorusGrid, values: &[f64]) -> Result<Spectrum> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), actual: values.len() });
    }
    Ok(forward(&PhaseField { grid: *grid, values: values.to_vec() }))
}

/// Checked inverse transform of a raw coefficient array.
pub fn inverse_transform(grid: &TorusGrid, coeffs: &[Complex64]) -> Result<PhaseField> {
    if coeffs.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), actual: coeffs.len() });
    }
    Ok(inverse(&Spectrum { grid: *grid, coeffs: coeffs.to_vec() }).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

pub(crate) fn all_axes(g: &TorusGrid) -> Vec<usize> {
    (0..2 * g.d).collect()
}

pub(crate) fn x_axes(g: &TorusGrid) -> Vec<usize> {
    (0..g.d).collect()
}

pub(crate) fn v_axes(g: &TorusGrid) -> Vec<usize> {
    (g.d..2 * g.d).collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(n),
            Direction::Inverse => p.plan_fft_inverse(n),
        }
    })
}

/// Unnormalized in-place DFT along the listed axes of a row-major array.
///
/// Lanes are independent, so they are processed in parallel; each lane's
/// arithmetic is identical regardless of the thread count.
pub fn transform_axes(data: &mut [Complex64], shape: &[usize], axes: &[usize], dir: Direction) {
    for &axis in axes {
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        if stride == 1 {
            data.par_chunks_mut(n * (4096 / n).max(1)).for_each(|chunk| {
                let fft = plan(n, dir);
                fft.process(chunk);
            });
        } else {
            let block = n * stride;
            data.par_chunks_mut(block).for_each(|blk| {
                let fft = plan(n, dir);
                let mut lane = vec![Complex64::new(0.0, 0.0); n * stride];
                // transpose block so each lane is contiguous
                for j in 0..n {
                    for s in 0..stride {
                        lane[s * n + j] = blk[j * stride + s];
                    }
                }
                fft.process(&mut lane);
                for j in 0..n {
                    for s in 0..stride {
                        blk[j * stride + s] = lane[s * n + j];
                    }
                }
            });
        }
    }
}

/// Deterministic pairwise summation (fixed tree independent of threads).
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid16() -> TorusGrid {
        TorusGrid::new(1, 2.0 * PI, 2.0 * PI, 16, 16).unwrap()
    }

    fn naive_dft(g: &TorusGrid, values: &[f64]) -> Vec<Complex64> {
        // direct O(N^2) sum over lattice points with the 1/N normalization
        let n = g.len();
        (0..n)
            .map(|k| {
                let m = g.mode(k);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &f) in values.iter().enumerate() {
                    let (x, v) = g.point(j);
                    let mut ph = 0.0;
                    for c in 0..g.d {
                        ph += m.xi[c] * x[c] + m.eta[c] * v[c];
                    }
                    acc += Complex64::from_polar(f, -ph);
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(3, 1.0, 1.0, 16, 16).is_err());
        assert!(TorusGrid::new(1, 1.0, 1.0, 12, 16).is_err());
        assert!(TorusGrid::new(1, -1.0, 1.0, 16, 16).is_err());
        assert!(TorusGrid::new(2, 1.0, 1.0, 128, 16).is_err());
    }

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = grid16();
        let f = PhaseField::from_fn(&g, |_, _| 2.5);
        let s = f.spectrum();
        assert!((s.coeffs[0].re - 2.5).abs() < 1e-15);
        assert!(s.coeffs[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn cosine_maps_to_conjugate_pair() {
        let g = grid16();
        let f = PhaseField::from_fn(&g, |_, v| (3.0 * v[0]).cos());
        let s = f.spectrum();
        for (i, c) in s.coeffs.iter().enumerate() {
            let m = g.mode(i);
            let expect = if m.ix[0] == 0 && m.iv[0].abs() == 3 { 0.5 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-14, "mode {i}");
        }
    }

    #[test]
    fn fft_matches_direct_dft_on_16x16() {
        let g = grid16();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = transform(&g, &vals).unwrap();
        let slow = naive_dft(&g, &vals);
        for (a, b) in fast.coeffs.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn round_trip_and_parseval_2d() {
        let g = TorusGrid::new(2, 3.0, 5.0, 8, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = PhaseField::from_values(&g, vals).unwrap();
        let s = f.spectrum();
        let (back, imag) = inverse(&s);
        assert!(imag < 1e-13);
        let scale = f.sup_norm();
        assert!(f.sup_diff(&back) <= 1e-12 * scale);
        assert!((f.l2_norm() - s.l2_norm()).abs() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn hermitian_symmetry_of_real_fields() {
        let g = TorusGrid::new(1, 4.0, 6.0, 8, 16).unwrap();
        let f = PhaseField::from_fn(&g, |x, v| (x[0] * 0.7).sin() + (v[0] - 0.3).powi(2) * 0.1);
        let s = f.spectrum();
        for i in 0..g.len() {
            let m = g.mode(i);
            let jx = (-m.ix[0]).rem_euclid(g.nx as i64) as usize;
            let jv = (-m.iv[0]).rem_euclid(g.nv as i64) as usize;
            let j = jx * g.nv + jv;
            assert!((s.coeffs[i] - s.coeffs[j].conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = grid16();
        assert!(transform(&g, &[0.0; 10]).is_err());
        assert!(inverse_transform(&g, &[Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn coordinates_are_fft_ordered() {
        let g = TorusGrid::new(1, 8.0, 4.0, 8, 8).unwrap();
        assert_eq!(g.coordinates(Side::X), vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
        let (x, v) = g.point(3 * 8 + 5);
        assert_eq!((x[0], v[0]), (3.0, -1.5));
    }

    #[test]
    fn roll_moves_values_forward() {
        let g = TorusGrid::new(1, 4.0, 4.0, 4, 4).unwrap();
        let f = PhaseField::from_values(&g, (0..16).map(|i| i as f64).collect()).unwrap();
        let r = f.roll(Side::V, 0, 1);
        assert_eq!(&r.values[..4], &[3.0, 0.0, 1.0, 2.0]);
        let r = f.roll(Side::X, 0, 1);
        assert_eq!(&r.values[..4], &[12.0, 13.0, 14.0, 15.0]);
    }

    #[test]
    fn fused_roll_difference_matches_roll() {
        let g = TorusGrid::new(2, 4.0, 3.0, 4, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = PhaseField::from_values(&g, (0..g.len()).map(|_| rng.gen::<f64>()).collect()).unwrap();
        for side in [Side::X, Side::V] {
            for c in 0..2 {
                for s in [1, 3, -2] {
                    assert_eq!(f.roll_sup_diff(side, c, s), f.sup_diff(&f.roll(side, c, s)));
                }
            }
        }
    }
}
