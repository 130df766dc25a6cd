//! Truncated periodic lattices and band-limited fields.
//!
//! A [`Grid`] is the box `[-L, L)^dim` with `n` points per axis and periodic
//! wrap. Derivatives are exact for the trigonometric interpolant: the
//! spectral coefficients are multiplied by `prod (i k_j)^{m_j}` with the
//! Nyquist mode dropped along every axis carrying an odd derivative order.

use crate::{Error, Result, C64};
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

/// Derivative multi-index for `dim <= 2`. Unused axes stay zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(pub [u32; 2]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0, 0]);

    pub fn new(mx: u32, my: u32) -> Self {
        MultiIndex([mx, my])
    }

    /// Order `m` along the first axis.
    pub fn x(m: u32) -> Self {
        MultiIndex([m, 0])
    }

    pub fn unit(axis: usize) -> Self {
        let mut m = [0, 0];
        m[axis] = 1;
        MultiIndex(m)
    }

    pub fn order(self) -> u32 {
        self.0[0] + self.0[1]
    }

    pub fn is_zero(self) -> bool {
        self.order() == 0
    }

    pub fn checked_sub(self, other: MultiIndex) -> Option<MultiIndex> {
        if self.0[0] >= other.0[0] && self.0[1] >= other.0[1] {
            Some(MultiIndex([self.0[0] - other.0[0], self.0[1] - other.0[1]]))
        } else {
            None
        }
    }

    /// Whether the index only uses the first `dim` axes.
    pub fn fits(self, dim: usize) -> bool {
        dim >= 2 || self.0[1] == 0
    }

    /// Axis list with repetition, e.g. `(2, 1) -> [0, 0, 1]`.
    pub fn axes(self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.order() as usize);
        for (axis, &m) in self.0.iter().enumerate() {
            out.extend(std::iter::repeat_n(axis, m as usize));
        }
        out
    }

    pub fn from_axes(axes: &[usize]) -> Self {
        let mut m = [0, 0];
        for &a in axes {
            m[a] += 1;
        }
        MultiIndex(m)
    }

    /// All indices with `lo <= |m| <= hi` on `dim` axes, ordered by total order.
    pub fn all(dim: usize, lo: u32, hi: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for order in lo..=hi {
            if dim == 1 {
                out.push(MultiIndex::x(order));
            } else {
                for mx in (0..=order).rev() {
                    out.push(MultiIndex([mx, order - mx]));
                }
            }
        }
        out
    }

    /// All `g <= self` componentwise.
    pub fn sub_indices(self) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for gx in 0..=self.0[0] {
            for gy in 0..=self.0[1] {
                out.push(MultiIndex([gx, gy]));
            }
        }
        out
    }

    /// Product of binomial coefficients `prod C(self_j, g_j)`.
    pub fn binomial(self, g: MultiIndex) -> f64 {
        binomial(self.0[0], g.0[0]) * binomial(self.0[1], g.0[1])
    }
}

impl Add for MultiIndex {
    type Output = MultiIndex;
    fn add(self, o: MultiIndex) -> MultiIndex {
        MultiIndex([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0[0], self.0[1])
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

struct GridInner {
    dim: usize,
    n: usize,
    half_width: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Per-axis wavenumbers in FFT order.
    wavenumbers: Vec<f64>,
}

/// Periodic lattice on `[-L, L)^dim`. Cheap to clone and shareable across threads.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("half_width", &self.half_width())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.n() == other.n()
                && self.half_width() == other.half_width())
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let base = std::f64::consts::PI / half_width;
        let wavenumbers = (0..n)
            .map(|j| {
                let s = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                base * s
            })
            .collect();
        Ok(Grid {
            inner: Arc::new(GridInner {
                dim,
                n,
                half_width,
                fwd,
                inv,
                wavenumbers,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn half_width(&self) -> f64 {
        self.inner.half_width
    }

    /// Mesh spacing `h = 2L / n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.inner.half_width / self.inner.n as f64
    }

    /// Total number of points `n^dim`.
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.dim as i32)
    }

    /// Wavenumbers `k_j = (pi / L) j` in FFT order, `j in [-n/2, n/2)`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    pub fn nyquist_index(&self) -> usize {
        self.inner.n / 2
    }

    pub fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n()).map(|j| -self.half_width() + j as f64 * h).collect()
    }

    /// Per-axis lattice indices of the flat index `idx` (row-major, axis 0 slowest).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.dim() == 1 {
            [idx, 0]
        } else {
            [idx / self.n(), idx % self.n()]
        }
    }

    /// Physical coordinates of the flat index `idx`; unused axes are 0.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let l = self.half_width();
        let [i, j] = self.unflatten(idx);
        if self.dim() == 1 {
            [-l + i as f64 * h, 0.0]
        } else {
            [-l + i as f64 * h, -l + j as f64 * h]
        }
    }

    /// Wavevector of the flat spectral index `idx` (FFT order).
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        let k = self.wavenumbers();
        if self.dim() == 1 {
            [k[i], 0.0]
        } else {
            [k[i], k[j]]
        }
    }

    /// Whether the flat spectral index sits on the Nyquist line of `axis`.
    pub fn is_nyquist(&self, idx: usize, axis: usize) -> bool {
        axis < self.dim() && self.unflatten(idx)[axis] == self.nyquist_index()
    }

    /// Sample a symbol on every wavevector, FFT order.
    pub fn symbol<F: Fn([f64; 2]) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.len()).map(|i| f(self.wavevector(i))).collect()
    }

    /// Unnormalized forward DFT along every axis.
    pub fn forward(&self, values: &[C64]) -> Vec<C64> {
        let mut data = values.to_vec();
        self.transform(&mut data, &self.inner.fwd);
        data
    }

    /// Inverse DFT, normalized so that `inverse(forward(v)) == v`.
    pub fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut data = coeffs.to_vec();
        self.transform(&mut data, &self.inner.inv);
        let scale = 1.0 / self.len() as f64;
        for v in &mut data {
            *v *= scale;
        }
        data
    }

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.len(), "buffer length does not match grid");
        let n = self.n();
        // Rows are contiguous, so one call transforms every row along the last axis.
        plan.process(data);
        if self.dim() == 2 {
            transpose_square(data, n);
            plan.process(data);
            transpose_square(data, n);
        }
    }

    /// Apply a Fourier multiplier given in FFT order.
    pub fn apply_symbol(&self, values: &[C64], symbol: &[C64]) -> Vec<C64> {
        let mut coeffs = self.forward(values);
        for (c, s) in coeffs.iter_mut().zip(symbol) {
            *c *= s;
        }
        self.inverse(&coeffs)
    }

    /// Symbol `prod (i k_j)^{m_j}` of `D^m`, Nyquist dropped on odd axes.
    pub fn derivative_symbol(&self, m: MultiIndex) -> Vec<C64> {
        (0..self.len())
            .map(|idx| {
                let k = self.wavevector(idx);
                let mut s = C64::new(1.0, 0.0);
                for axis in 0..self.dim() {
                    let order = m.0[axis];
                    if order % 2 == 1 && self.is_nyquist(idx, axis) {
                        return C64::new(0.0, 0.0);
                    }
                    s *= C64::new(0.0, k[axis]).powu(order);
                }
                s
            })
            .collect()
    }
}

fn transpose_square(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Complex samples on a [`Grid`]. Immutable once built.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<C64>,
}

impl Field {
    pub fn new(grid: &Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} samples, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument(format!("non-finite sample at index {i}")));
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Internal constructor for values produced by finite arithmetic.
    pub(crate) fn from_vec(grid: &Grid, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_real(grid: &Grid, values: &[f64]) -> Result<Self> {
        Field::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: &Grid) -> Self {
        Field::constant(grid, C64::new(0.0, 0.0))
    }

    pub fn constant(grid: &Grid, c: C64) -> Self {
        Field::from_vec(grid, vec![c; grid.len()])
    }

    pub fn from_fn<F: Fn([f64; 2]) -> C64>(grid: &Grid, f: F) -> Self {
        let values: Vec<C64> = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Field::from_vec(grid, values)
    }

    pub fn from_real_fn<F: Fn([f64; 2]) -> f64>(grid: &Grid, f: F) -> Self {
        Field::from_fn(grid, |x| C64::new(f(x), 0.0))
    }

    /// Field from spectral coefficients (unnormalized DFT convention).
    pub fn from_spectral(grid: &Grid, coeffs: &[C64]) -> Self {
        Field::from_vec(grid, grid.inverse(coeffs))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn to_spectral(&self) -> Vec<C64> {
        self.grid.forward(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Discrete norm `(h^dim sum |f_i|^p)^{1/p}`; `p = inf` gives the max modulus.
    pub fn norm_p(&self, p: f64) -> f64 {
        norm_p(&self.values, self.grid.cell_volume(), p)
    }

    /// Weighted inner product `h^dim sum conj(f_i) g_i`.
    pub fn inner(&self, other: &Field) -> C64 {
        assert!(self.grid == other.grid, "inner product across grids");
        let s: C64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn map<F: Fn(C64) -> C64>(&self, f: F) -> Field {
        Field::from_vec(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with<F: Fn(C64, C64) -> C64>(&self, other: &Field, f: F) -> Field {
        assert!(self.grid == other.grid, "pointwise operation across grids");
        Field::from_vec(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn scale(&self, c: C64) -> Field {
        self.map(|v| v * c)
    }

    /// Exact derivative of the trigonometric interpolant, `|m| <= 4`.
    pub fn spectral_derivative(&self, m: MultiIndex) -> Result<Field> {
        if m.order() > 4 {
            return Err(Error::OrderTooHigh(m.order()));
        }
        if !m.fits(self.grid.dim()) {
            return Err(Error::InvalidArgument(format!(
                "multi-index {m} uses an axis beyond dimension {}",
                self.grid.dim()
            )));
        }
        if m.is_zero() {
            return Ok(self.clone());
        }
        Ok(self.derivative_unchecked(m))
    }

    pub(crate) fn derivative_unchecked(&self, m: MultiIndex) -> Field {
        let symbol = self.grid.derivative_symbol(m);
        Field::from_vec(&self.grid, self.grid.apply_symbol(&self.values, &symbol))
    }

    /// Laplacian via the spectral symbol `-|k|^2`.
    pub fn laplacian(&self) -> Field {
        let symbol = self.grid.symbol(|k| C64::new(-(k[0] * k[0] + k[1] * k[1]), 0.0));
        Field::from_vec(&self.grid, self.grid.apply_symbol(&self.values, &symbol))
    }
}

/// Weighted discrete `p`-norm of raw samples.
pub fn norm_p(values: &[C64], weight: f64, p: f64) -> f64 {
    assert!(p >= 1.0, "norm exponent must be >= 1");
    if p.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.norm()));
    }
    if p == 2.0 {
        let s: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        return (weight * s).sqrt();
    }
    let s: f64 = values.iter().map(|v| v.norm().powf(p)).sum();
    (weight * s).powf(1.0 / p)
}

impl Add for &Field {
    type Output = Field;
    fn add(self, o: &Field) -> Field {
        self.zip_with(o, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, o: &Field) -> Field {
        self.zip_with(o, |a, b| a - b)
    }
}

/// Pointwise product.
impl Mul for &Field {
    type Output = Field;
    fn mul(self, o: &Field) -> Field {
        self.zip_with(o, |a, b| a * b)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.map(|v| -v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn rel_err(a: &[C64], b: &[C64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den).sqrt()
    }

    #[test]
    fn spacing_and_wavenumbers_1d() {
        let g = Grid::new(1, 16, PI).unwrap();
        assert_relative_eq!(g.spacing(), PI / 8.0);
        let mut k: Vec<f64> = g.wavenumbers().to_vec();
        k.sort_by(f64::total_cmp);
        let expect: Vec<f64> = (-8..8).map(f64::from).collect();
        for (a, b) in k.iter().zip(&expect) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_2d_points_and_wavenumbers() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        assert_eq!(g.len(), 64);
        let mut k: Vec<f64> = g.wavenumbers().to_vec();
        k.sort_by(f64::total_cmp);
        for (a, j) in k.iter().zip(-4..4) {
            assert_relative_eq!(*a, PI * f64::from(j), epsilon = 1e-14);
        }
        assert_relative_eq!(g.spacing() * g.n() as f64, 2.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 7, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 16, 0.0).is_err());
        assert!(Grid::new(1, 16, -1.0).is_err());
        assert!(Grid::new(3, 16, 1.0).is_err());
    }

    #[test]
    fn constant_and_zero_norms() {
        let g = Grid::new(1, 16, PI).unwrap();
        let one = Field::constant(&g, C64::new(1.0, 0.0));
        assert_relative_eq!(one.norm_p(2.0), (2.0 * PI).sqrt(), epsilon = 1e-13);
        let zero = Field::zeros(&g);
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            assert_eq!(zero.norm_p(p), 0.0);
        }
    }

    #[test]
    fn norm_matches_direct_summation() {
        let g = Grid::new(2, 16, 2.0).unwrap();
        let f = Field::new(&g, rng::complex_normal_vec(&mut rng::stream(1, "norm"), g.len())).unwrap();
        let euclid: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert_relative_eq!(f.norm_p(2.0), euclid * g.spacing(), max_relative = 1e-13);
        let direct3: f64 = f.values().iter().map(|v| v.norm().powi(3)).sum::<f64>();
        assert_relative_eq!(
            f.norm_p(3.0),
            (direct3 * g.cell_volume()).cbrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn fourth_derivative_of_exponential() {
        let g = Grid::new(1, 32, PI).unwrap();
        let f = Field::from_fn(&g, |x| C64::new(0.0, 2.0 * x[0]).exp());
        let d4 = f.spectral_derivative(MultiIndex::x(4)).unwrap();
        let expect: Vec<C64> = f.values().iter().map(|v| v * 16.0).collect();
        assert!(rel_err(d4.values(), &expect) < 1e-12);
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let g = Grid::new(1, 16, PI).unwrap();
        let f = Field::from_real_fn(&g, |x| x[0].sin());
        let d = f.spectral_derivative(MultiIndex::x(1)).unwrap();
        for (i, v) in d.values().iter().enumerate() {
            assert!((v - C64::new(g.point(i)[0].cos(), 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn second_derivative_matches_finite_differences() {
        // Smooth band-limited field; centered differences converge at O(h^2).
        let mut errs = Vec::new();
        for n in [64, 128, 256] {
            let g = Grid::new(1, n, PI).unwrap();
            let f = Field::from_real_fn(&g, |x| (x[0].sin() + 0.5 * (3.0 * x[0]).cos()).exp().sin());
            let d2 = f.spectral_derivative(MultiIndex::x(2)).unwrap();
            let h = g.spacing();
            let v = f.values();
            let fd: Vec<C64> = (0..n)
                .map(|i| (v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) / (h * h))
                .collect();
            errs.push(rel_err(&fd, d2.values()));
        }
        assert!(errs[0] < 5e-2);
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn rejects_orders_above_four() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let f = Field::zeros(&g);
        assert!(matches!(
            f.spectral_derivative(MultiIndex::new(3, 2)),
            Err(Error::OrderTooHigh(5))
        ));
        let g1 = Grid::new(1, 8, 1.0).unwrap();
        assert!(Field::zeros(&g1).spectral_derivative(MultiIndex::new(0, 1)).is_err());
    }

    #[test]
    fn odd_derivative_zeroes_nyquist() {
        let g = Grid::new(1, 8, PI).unwrap();
        // cos(4x) is the Nyquist mode on this grid.
        let f = Field::from_real_fn(&g, |x| (4.0 * x[0]).cos());
        let d = f.spectral_derivative(MultiIndex::x(1)).unwrap();
        assert!(d.max_abs() < 1e-14);
        let d2 = f.spectral_derivative(MultiIndex::x(2)).unwrap();
        assert_relative_eq!(d2.max_abs(), 16.0, epsilon = 1e-12);
    }

    #[test]
    fn multi_index_helpers() {
        assert_eq!(MultiIndex::new(2, 1).axes(), vec![0, 0, 1]);
        assert_eq!(MultiIndex::from_axes(&[1, 0, 1]), MultiIndex::new(1, 2));
        assert_eq!(MultiIndex::all(1, 1, 3).len(), 3);
        assert_eq!(MultiIndex::all(2, 1, 3).len(), 9);
        assert_eq!(MultiIndex::new(2, 2).binomial(MultiIndex::new(1, 2)), 2.0);
        assert_eq!(MultiIndex::new(2, 2).sub_indices().len(), 9);
    }
}
