//! Potentials `V >= 0`, their derivative growth certificate, mollification,
//! and the multiplication symbol `M = (mu + omega2 + V)^{-1}`.
//!
//! Radial families are written as `V = phi(s)` with `phi(s) = (1 + s)^{r/2}`
//! and `s = sum_j q(x_j)`. The power law uses `q(x) = x^2`; the periodic
//! surrogate uses `q(x) = (2L^2/pi^2)(1 - cos(pi x / L))`, which agrees with
//! `x^2` to fourth order at the origin and is `2L`-periodic, so every
//! spectral identity holds without truncation error.

use crate::grid::{Field, Grid, MultiIndex};
use crate::{Error, Result, C64};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Candidate growth exponents are sampled on `[0, 3/4)` with this step.
pub const ALPHA_STEP: f64 = 0.05;
/// Exclusive upper bound on the growth exponent.
pub const ALPHA_MAX: f64 = 0.75;
/// Number of box doublings used to decide whether a sup stabilizes.
pub const ENLARGEMENTS: u32 = 2;
/// A sup is stable when the last doubling grows it by at most this fraction.
pub const STABILITY_TOL: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialFamily {
    /// `(1 + |x|^2)^{r/2}` evaluated on the raw box.
    PowerLaw { r: f64 },
    /// `(1 + rho(x)^2)^{r/2}` with a smooth periodic coordinate `rho`.
    PeriodicSurrogate { r: f64 },
    Constant { v0: f64 },
    /// Samples on a specific grid; derivatives are spectral.
    Tabulated { values: Vec<f64> },
}

impl PotentialFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialFamily::PowerLaw { .. } => "power_law",
            PotentialFamily::PeriodicSurrogate { .. } => "periodic_surrogate",
            PotentialFamily::Constant { .. } => "constant",
            PotentialFamily::Tabulated { .. } => "tabulated",
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, PotentialFamily::Constant { .. })
    }
}

/// A potential family with its claimed growth certificate `(alpha, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    pub alpha: f64,
    pub c: f64,
}

impl PotentialSpec {
    pub fn new(family: PotentialFamily, alpha: f64, c: f64) -> Result<Self> {
        if !(0.0..ALPHA_MAX).contains(&alpha) {
            return Err(Error::InvalidArgument(format!(
                "growth exponent alpha = {alpha} outside [0, 3/4)"
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("certificate constant c = {c} must be positive")));
        }
        match &family {
            PotentialFamily::PowerLaw { r } | PotentialFamily::PeriodicSurrogate { r } => {
                if !(r.is_finite() && *r < 4.0) {
                    return Err(Error::InvalidArgument(format!("growth exponent r = {r} must be < 4")));
                }
            }
            PotentialFamily::Constant { v0 } => {
                if !(*v0 >= 0.0 && v0.is_finite()) {
                    return Err(Error::InvalidArgument(format!("constant potential {v0} must be >= 0")));
                }
            }
            PotentialFamily::Tabulated { .. } => {}
        }
        Ok(PotentialSpec { family, alpha, c })
    }

    pub fn constant(v0: f64) -> Self {
        PotentialSpec {
            family: PotentialFamily::Constant { v0 },
            alpha: 0.0,
            c: 1.0,
        }
    }
}

/// `V` and its derivatives `D^m V` for `1 <= |m| <= 3` on one grid.
#[derive(Clone, Debug)]
pub struct PotentialFields {
    value: Field,
    derivs: BTreeMap<MultiIndex, Field>,
}

impl PotentialFields {
    pub fn grid(&self) -> &Grid {
        self.value.grid()
    }

    pub fn value(&self) -> &Field {
        &self.value
    }

    /// `D^m V`; the zero index returns `V` itself.
    pub fn derivative(&self, m: MultiIndex) -> &Field {
        if m.is_zero() {
            &self.value
        } else {
            self.derivs
                .get(&m)
                .unwrap_or_else(|| panic!("derivative {m} not tabulated (|m| <= 3 only)"))
        }
    }

    pub fn min(&self) -> f64 {
        self.value.values().iter().fold(f64::INFINITY, |m, v| m.min(v.re))
    }

    pub fn max(&self) -> f64 {
        self.value.values().iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.re))
    }

    pub fn is_constant(&self) -> bool {
        self.derivs.values().all(|d| d.max_abs() == 0.0)
    }

    fn from_parts(value: Field, derivs: BTreeMap<MultiIndex, Field>) -> Result<Self> {
        if let Some((index, v)) = value
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| v.re < 0.0)
        {
            return Err(Error::NegativePotential { index, value: v.re });
        }
        Ok(PotentialFields { value, derivs })
    }
}

/// Radial profile `phi(s) = (1 + s)^{r/2}` and its first three derivatives.
fn profile(r: f64, s: f64) -> [f64; 4] {
    let e = r / 2.0;
    let b = 1.0 + s;
    [
        b.powf(e),
        e * b.powf(e - 1.0),
        e * (e - 1.0) * b.powf(e - 2.0),
        e * (e - 1.0) * (e - 2.0) * b.powf(e - 3.0),
    ]
}

/// Coordinate map `q` and its derivatives for one axis.
fn coordinate(family: &PotentialFamily, half_width: f64, x: f64) -> [f64; 4] {
    match family {
        PotentialFamily::PeriodicSurrogate { .. } => {
            let w = PI / half_width;
            let (s, c) = (w * x).sin_cos();
            [
                2.0 / (w * w) * (1.0 - c),
                2.0 / w * s,
                2.0 * c,
                -2.0 * w * s,
            ]
        }
        _ => [x * x, 2.0 * x, 2.0, 0.0],
    }
}

/// Chain rule for `D^m phi(sum_j q(x_j))` with `m` given as an axis list.
fn radial_derivative(phi: &[f64; 4], q: &[[f64; 4]; 2], axes: &[usize]) -> f64 {
    let d = |i: usize, ord: usize| q[i][ord];
    match *axes {
        [] => phi[0],
        [i] => phi[1] * d(i, 1),
        [i, j] => {
            let mut v = phi[2] * d(i, 1) * d(j, 1);
            if i == j {
                v += phi[1] * d(i, 2);
            }
            v
        }
        [i, j, k] => {
            let mut v = phi[3] * d(i, 1) * d(j, 1) * d(k, 1);
            if i == j {
                v += phi[2] * d(i, 2) * d(k, 1);
            }
            if i == k {
                v += phi[2] * d(i, 2) * d(j, 1);
            }
            if j == k {
                v += phi[2] * d(j, 2) * d(i, 1);
            }
            if i == j && j == k {
                v += phi[1] * d(i, 3);
            }
            v
        }
        _ => unreachable!("potential derivatives are tabulated up to order 3"),
    }
}

/// Evaluate `V` and `D^m V` (`|m| <= 3`) on `grid`.
pub fn eval_potential(spec: &PotentialSpec, grid: &Grid) -> Result<PotentialFields> {
    let indices = MultiIndex::all(grid.dim(), 1, 3);
    match &spec.family {
        PotentialFamily::Constant { v0 } => {
            let value = Field::constant(grid, C64::new(*v0, 0.0));
            let derivs = indices.into_iter().map(|m| (m, Field::zeros(grid))).collect();
            PotentialFields::from_parts(value, derivs)
        }
        PotentialFamily::Tabulated { values } => {
            let value = Field::from_real(grid, values)?;
            let derivs = indices
                .into_iter()
                .map(|m| {
                    let d = value.derivative_unchecked(m);
                    // Derivatives of a real field are real.
                    (m, d.map(|v| C64::new(v.re, 0.0)))
                })
                .collect();
            PotentialFields::from_parts(value, derivs)
        }
        PotentialFamily::PowerLaw { r } | PotentialFamily::PeriodicSurrogate { r } => {
            let n = grid.len();
            let mut value = Vec::with_capacity(n);
            let mut derivs: BTreeMap<MultiIndex, Vec<C64>> =
                indices.iter().map(|&m| (m, Vec::with_capacity(n))).collect();
            for idx in 0..n {
                let x = grid.point(idx);
                let mut q = [[0.0; 4]; 2];
                let mut s = 0.0;
                for axis in 0..grid.dim() {
                    q[axis] = coordinate(&spec.family, grid.half_width(), x[axis]);
                    s += q[axis][0];
                }
                let phi = profile(*r, s);
                value.push(C64::new(phi[0], 0.0));
                for (m, out) in derivs.iter_mut() {
                    out.push(C64::new(radial_derivative(&phi, &q, &m.axes()), 0.0));
                }
            }
            let value = Field::new(grid, value)?;
            let derivs = derivs
                .into_iter()
                .map(|(m, v)| Field::new(grid, v).map(|f| (m, f)))
                .collect::<Result<_>>()?;
            PotentialFields::from_parts(value, derivs)
        }
    }
}

/// `max |D^m V| / V^alpha` over points with `|x_j| <= radius` and `1 <= |m| <= 3`.
///
/// Returns `+inf` when `V` vanishes at a point with a nonzero derivative and
/// `alpha > 0`; such points are reported rather than regularized.
pub fn growth_sup(fields: &PotentialFields, alpha: f64, radius: f64) -> f64 {
    let grid = fields.grid();
    let v = fields.value().values();
    let mut sup: f64 = 0.0;
    for m in MultiIndex::all(grid.dim(), 1, 3) {
        let d = fields.derivative(m).values();
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            if x.iter().take(grid.dim()).any(|c| c.abs() > radius) {
                continue;
            }
            let num = d[idx].norm();
            if num == 0.0 {
                continue;
            }
            let den = if alpha == 0.0 { 1.0 } else { v[idx].re.max(0.0).powf(alpha) };
            if den == 0.0 {
                return f64::INFINITY;
            }
            sup = sup.max(num / den);
        }
    }
    sup
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    pub alpha: f64,
    /// Sup of `|D^m V| / V^alpha` on the given grid.
    pub c_measured: f64,
    /// `(half width, sup)` over successive box doublings at fixed spacing.
    pub box_sups: Vec<(f64, f64)>,
    /// Ratio of the sup on the largest box to the sup on the previous one.
    pub growth_factor: f64,
    pub stable: bool,
    /// Smallest sampled exponent whose sup stabilizes under enlargement.
    pub alpha_min_measured: Option<f64>,
    /// Whether the measured sup stays below the claimed constant `c`.
    pub certificate_holds: bool,
    pub pass: bool,
}

/// Candidate exponents `0, 0.05, ..., 0.70`.
pub fn alpha_candidates() -> Vec<f64> {
    let count = (ALPHA_MAX / ALPHA_STEP).round() as usize;
    (0..count).map(|i| i as f64 * ALPHA_STEP).collect()
}

fn box_sequence(spec: &PotentialSpec, grid: &Grid) -> Result<Vec<PotentialFields>> {
    if matches!(spec.family, PotentialFamily::Tabulated { .. }) {
        return Ok(vec![eval_potential(spec, grid)?]);
    }
    (0..=ENLARGEMENTS)
        .map(|j| {
            let scale = 1usize << j;
            let g = Grid::new(grid.dim(), grid.n() * scale, grid.half_width() * scale as f64)?;
            eval_potential(spec, &g)
        })
        .collect()
}

fn stability(sups: &[f64]) -> (f64, bool) {
    if sups.iter().any(|s| !s.is_finite()) {
        return (f64::INFINITY, false);
    }
    let growth = match sups {
        [.., prev, last] if *prev > 0.0 => last / prev,
        [.., prev, last] if *prev == 0.0 && *last > 0.0 => f64::INFINITY,
        _ => 1.0,
    };
    (growth, growth <= 1.0 + STABILITY_TOL)
}

/// Check `|D^m V| <= c V^alpha` on `grid` and under box enlargement.
///
/// The raw family is evaluated with analytic derivatives over the whole box.
/// The certificate passes when the sup is finite and stops growing as the box
/// doubles (the continuum sup exists), and `alpha` lies in `[0, 3/4)`.
pub fn verify_growth_condition(spec: &PotentialSpec, grid: &Grid) -> Result<GrowthReport> {
    let boxes = box_sequence(spec, grid)?;
    let sups_for = |alpha: f64| -> Vec<f64> {
        boxes
            .iter()
            .map(|f| growth_sup(f, alpha, f64::INFINITY))
            .collect()
    };
    let sups = sups_for(spec.alpha);
    let (growth_factor, stable) = stability(&sups);
    let alpha_min_measured = alpha_candidates()
        .into_iter()
        .find(|&a| stability(&sups_for(a)).1);
    let c_measured = sups[0];
    let in_range = (0.0..ALPHA_MAX).contains(&spec.alpha);
    Ok(GrowthReport {
        alpha: spec.alpha,
        c_measured,
        box_sups: boxes
            .iter()
            .zip(&sups)
            .map(|(f, &s)| (f.grid().half_width(), s))
            .collect(),
        growth_factor,
        stable,
        alpha_min_measured,
        certificate_holds: c_measured <= spec.c,
        pass: c_measured.is_finite() && stable && in_range,
    })
}

/// Fixed `C^inf` bump `exp(-1 / (1 - |y|^2))` on the unit ball.
fn bump(y2: f64) -> f64 {
    if y2 < 1.0 {
        (-1.0 / (1.0 - y2)).exp()
    } else {
        0.0
    }
}

/// Unit-mass mollifier `rho_level(y) ~ rho(level * y)` sampled with its
/// centre at lattice index 0, returned as a spectral multiplier.
pub fn mollifier_symbol(grid: &Grid, level: u32) -> Vec<C64> {
    let h = grid.spacing();
    let n = grid.n();
    let disp = |j: usize| if j < n / 2 { j as f64 * h } else { (j as f64 - n as f64) * h };
    let scale = f64::from(level);
    let mut kernel: Vec<C64> = (0..grid.len())
        .map(|idx| {
            let [i, j] = grid.unflatten(idx);
            let mut y2 = (scale * disp(i)).powi(2);
            if grid.dim() == 2 {
                y2 += (scale * disp(j)).powi(2);
            }
            C64::new(bump(y2), 0.0)
        })
        .collect();
    let mass: f64 = kernel.iter().map(|c| c.re).sum();
    for c in &mut kernel {
        *c /= mass;
    }
    grid.forward(&kernel)
}

/// Mollified potential `V_n = rho_n * V` with `D^m V_n = rho_n * D^m V`.
pub fn mollify(spec: &PotentialSpec, grid: &Grid, level: u32) -> Result<PotentialFields> {
    if level == 0 {
        return Err(Error::InvalidArgument("mollifier level must be >= 1".into()));
    }
    let fields = eval_potential(spec, grid)?;
    let symbol = mollifier_symbol(grid, level);
    let convolve = |f: &Field| -> Vec<C64> {
        grid.apply_symbol(f.values(), &symbol)
            .into_iter()
            .map(|v| C64::new(v.re, 0.0))
            .collect()
    };
    let floor = 1e-13 * fields.max().abs().max(1.0);
    let value: Vec<C64> = convolve(fields.value())
        .into_iter()
        .map(|v| if v.re < 0.0 && v.re > -floor { C64::new(0.0, 0.0) } else { v })
        .collect();
    let derivs = fields
        .derivs
        .iter()
        .map(|(&m, f)| (m, Field::from_vec(grid, convolve(f))))
        .collect();
    PotentialFields::from_parts(Field::new(grid, value)?, derivs)
}

/// Whether `mu` lies in the open sector `|arg mu| < pi`.
pub fn in_open_sector(mu: C64) -> bool {
    mu.norm() > 0.0 && mu.is_finite() && !(mu.im == 0.0 && mu.re < 0.0)
}

/// `M = (mu + omega2 + V)^{-1}` with closed-form derivatives up to order 3.
#[derive(Clone, Debug)]
pub struct MPack {
    pub mu: C64,
    pub omega2: f64,
    m: Field,
    derivs: BTreeMap<MultiIndex, Field>,
}

impl MPack {
    pub fn value(&self) -> &Field {
        &self.m
    }

    pub fn grid(&self) -> &Grid {
        self.m.grid()
    }

    pub fn derivative(&self, m: MultiIndex) -> &Field {
        if m.is_zero() {
            &self.m
        } else {
            self.derivs
                .get(&m)
                .unwrap_or_else(|| panic!("derivative {m} of M not available (|m| <= 3 only)"))
        }
    }

    /// `Delta M`.
    pub fn laplacian(&self) -> Field {
        self.sum_over_axes(|a| MultiIndex::unit(a) + MultiIndex::unit(a))
    }

    /// `D_i Delta M`.
    pub fn grad_laplacian(&self, axis: usize) -> Field {
        self.sum_over_axes(|a| MultiIndex::unit(a) + MultiIndex::unit(a) + MultiIndex::unit(axis))
    }

    fn sum_over_axes<F: Fn(usize) -> MultiIndex>(&self, idx: F) -> Field {
        let mut acc = self.derivative(idx(0)).clone();
        for a in 1..self.grid().dim() {
            acc = &acc + self.derivative(idx(a));
        }
        acc
    }

    /// Whether `M` is constant (all derivatives vanish).
    pub fn is_constant(&self) -> bool {
        self.derivs.values().all(|d| d.max_abs() == 0.0)
    }
}

/// Assemble `M` and `D^m M` for `|m| <= 3` from the derivatives of `V`:
///
/// ```text
/// D_i M   = -M^2 V_i
/// D_ij M  = 2 M^3 V_i V_j - M^2 V_ij
/// D_ijk M = -6 M^4 V_i V_j V_k + 2 M^3 (V_ij V_k + V_ik V_j + V_jk V_i) - M^2 V_ijk
/// ```
pub fn build_m(fields: &PotentialFields, mu: C64, omega2: f64) -> Result<MPack> {
    if !in_open_sector(mu) {
        return Err(Error::OutsideSector(format!("{mu}")));
    }
    if !(omega2 > 0.0) {
        return Err(Error::InvalidArgument(format!("omega2 = {omega2} must be positive")));
    }
    let grid = fields.grid();
    let m = fields.value().map(|v| 1.0 / (mu + omega2 + v));
    let mv = m.values();
    let dv = |axes: &[usize]| fields.derivative(MultiIndex::from_axes(axes)).values();
    let mut derivs = BTreeMap::new();
    for idx in MultiIndex::all(grid.dim(), 1, 3) {
        let axes = idx.axes();
        let values: Vec<C64> = match axes.as_slice() {
            &[i] => {
                let vi = dv(&[i]);
                (0..grid.len()).map(|p| -mv[p] * mv[p] * vi[p]).collect()
            }
            &[i, j] => {
                let (vi, vj, vij) = (dv(&[i]), dv(&[j]), dv(&[i, j]));
                (0..grid.len())
                    .map(|p| {
                        let m1 = mv[p];
                        2.0 * m1.powu(3) * vi[p] * vj[p] - m1 * m1 * vij[p]
                    })
                    .collect()
            }
            &[i, j, k] => {
                let (vi, vj, vk) = (dv(&[i]), dv(&[j]), dv(&[k]));
                let (vij, vik, vjk) = (dv(&[i, j]), dv(&[i, k]), dv(&[j, k]));
                let vijk = dv(&[i, j, k]);
                (0..grid.len())
                    .map(|p| {
                        let m1 = mv[p];
                        -6.0 * m1.powu(4) * vi[p] * vj[p] * vk[p]
                            + 2.0 * m1.powu(3) * (vij[p] * vk[p] + vik[p] * vj[p] + vjk[p] * vi[p])
                            - m1 * m1 * vijk[p]
                    })
                    .collect()
            }
            _ => unreachable!(),
        };
        derivs.insert(idx, Field::new(grid, values)?);
    }
    Ok(MPack {
        mu,
        omega2,
        m,
        derivs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid1(n: usize, l: f64) -> Grid {
        Grid::new(1, n, l).unwrap()
    }

    #[test]
    fn constant_potential_has_zero_derivatives() {
        let g = grid1(16, 2.0);
        let f = eval_potential(&PotentialSpec::constant(1.0), &g).unwrap();
        assert!(f.value().values().iter().all(|v| *v == C64::new(1.0, 0.0)));
        for m in MultiIndex::all(1, 1, 3) {
            assert_eq!(f.derivative(m).max_abs(), 0.0);
        }
    }

    #[test]
    fn power_law_r2_closed_form() {
        let g = grid1(32, 4.0);
        let spec = PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, 0.6, 2.0).unwrap();
        let f = eval_potential(&spec, &g).unwrap();
        for idx in 0..g.len() {
            let x = g.point(idx)[0];
            assert_relative_eq!(f.value().values()[idx].re, 1.0 + x * x, epsilon = 1e-12);
            assert_relative_eq!(f.derivative(MultiIndex::x(1)).values()[idx].re, 2.0 * x, epsilon = 1e-12);
            assert_relative_eq!(f.derivative(MultiIndex::x(2)).values()[idx].re, 2.0, epsilon = 1e-12);
            assert!(f.derivative(MultiIndex::x(3)).values()[idx].norm() < 1e-12);
        }
    }

    #[test]
    fn power_law_r3_at_one() {
        // Grid on [-4, 4) with h = 0.25 contains x = 1 at index 20.
        let g = grid1(32, 4.0);
        let spec = PotentialSpec::new(PotentialFamily::PowerLaw { r: 3.0 }, 0.7, 5.0).unwrap();
        let f = eval_potential(&spec, &g).unwrap();
        assert_eq!(g.point(20)[0], 1.0);
        assert_relative_eq!(f.value().values()[20].re, 2.0f64.powf(1.5), epsilon = 1e-12);
        assert_relative_eq!(f.value().values()[20].re, 2.8284271247461903, epsilon = 1e-12);
    }

    #[test]
    fn radial_derivatives_match_finite_differences_2d() {
        for family in [
            PotentialFamily::PowerLaw { r: 3.0 },
            PotentialFamily::PeriodicSurrogate { r: 2.5 },
        ] {
            let eps = 1e-4;
            let r = match family {
                PotentialFamily::PowerLaw { r } | PotentialFamily::PeriodicSurrogate { r } => r,
                _ => unreachable!(),
            };
            let v_at = |x: [f64; 2]| {
                let q0 = coordinate(&family, 3.0, x[0]);
                let q1 = coordinate(&family, 3.0, x[1]);
                profile(r, q0[0] + q1[0])
            };
            let x = [0.7, -0.4];
            let q = [coordinate(&family, 3.0, x[0]), coordinate(&family, 3.0, x[1])];
            let phi = v_at(x);
            // Second mixed derivative by central differences of the analytic first derivative.
            let d1 = |x: [f64; 2], axis: usize| {
                let q = [coordinate(&family, 3.0, x[0]), coordinate(&family, 3.0, x[1])];
                radial_derivative(&v_at(x), &q, &[axis])
            };
            let d2 = |x: [f64; 2], a: usize, b: usize| {
                let q = [coordinate(&family, 3.0, x[0]), coordinate(&family, 3.0, x[1])];
                radial_derivative(&v_at(x), &q, &[a, b])
            };
            let shift = |x: [f64; 2], axis: usize, h: f64| {
                let mut y = x;
                y[axis] += h;
                y
            };
            let fd01 = (d1(shift(x, 1, eps), 0) - d1(shift(x, 1, -eps), 0)) / (2.0 * eps);
            assert_relative_eq!(radial_derivative(&phi, &q, &[0, 1]), fd01, max_relative = 1e-6);
            let fd001 = (d2(shift(x, 1, eps), 0, 0) - d2(shift(x, 1, -eps), 0, 0)) / (2.0 * eps);
            assert_relative_eq!(radial_derivative(&phi, &q, &[0, 0, 1]), fd001, max_relative = 1e-6);
            let fd000 = (d2(shift(x, 0, eps), 0, 0) - d2(shift(x, 0, -eps), 0, 0)) / (2.0 * eps);
            assert_relative_eq!(radial_derivative(&phi, &q, &[0, 0, 0]), fd000, max_relative = 1e-6);
        }
    }

    #[test]
    fn growth_constant_passes_for_any_alpha() {
        let g = grid1(32, 4.0);
        for alpha in [0.0, 0.3, 0.7] {
            let mut spec = PotentialSpec::constant(1.0);
            spec.alpha = alpha;
            let rep = verify_growth_condition(&spec, &g).unwrap();
            assert_eq!(rep.c_measured, 0.0);
            assert!(rep.pass);
            assert_eq!(rep.alpha_min_measured, Some(0.0));
        }
    }

    #[test]
    fn growth_power_law_r2() {
        let g = grid1(64, 8.0);
        let half = PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, 0.5, 2.0).unwrap();
        let rep = verify_growth_condition(&half, &g).unwrap();
        // sup of 2|x|/sqrt(1+x^2) and 2/sqrt(1+x^2) is 2 (the second attained at x = 0).
        assert!(rep.c_measured <= 2.0 + 1e-12);
        assert!(rep.pass);
        assert_eq!(rep.alpha_min_measured, Some(0.5));

        let example = PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, 0.6, 2.0).unwrap();
        let rep = verify_growth_condition(&example, &g).unwrap();
        assert!(rep.pass && rep.c_measured.is_finite() && rep.certificate_holds);

        let low = PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, 0.3, 2.0).unwrap();
        let rep = verify_growth_condition(&low, &g).unwrap();
        assert!(!rep.pass);
        assert!(rep.growth_factor > 1.1, "{rep:?}");
    }

    #[test]
    fn growth_power_law_r3_threshold() {
        let g = grid1(64, 8.0);
        let spec = PotentialSpec::new(PotentialFamily::PowerLaw { r: 3.0 }, 0.7, 10.0).unwrap();
        let rep = verify_growth_condition(&spec, &g).unwrap();
        // (r - 1) / r = 2/3 rounds up to the 0.70 candidate.
        assert_eq!(rep.alpha_min_measured.map(|a| (a * 100.0).round()), Some(70.0));
        assert!(rep.pass);
    }

    #[test]
    fn zeros_with_nonzero_derivative_are_unbounded() {
        let g = grid1(16, std::f64::consts::PI);
        let values: Vec<f64> = (0..16).map(|i| 1.0 - g.point(i)[0].cos()).collect();
        let spec = PotentialSpec::new(PotentialFamily::Tabulated { values }, 0.5, 1.0).unwrap();
        let rep = verify_growth_condition(&spec, &g).unwrap();
        assert!(rep.c_measured.is_infinite());
        assert!(!rep.pass);
    }

    #[test]
    fn negative_potential_rejected() {
        let g = grid1(8, 1.0);
        let mut values = vec![1.0; 8];
        values[3] = -0.5;
        let spec = PotentialSpec::new(PotentialFamily::Tabulated { values }, 0.0, 1.0).unwrap();
        assert!(matches!(
            eval_potential(&spec, &g),
            Err(Error::NegativePotential { index: 3, .. })
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(PotentialSpec::new(PotentialFamily::PowerLaw { r: 4.0 }, 0.5, 1.0).is_err());
        assert!(PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, 0.75, 1.0).is_err());
        assert!(PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, -0.1, 1.0).is_err());
        assert!(PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, 0.5, 0.0).is_err());
    }

    #[test]
    fn mollify_constant_is_identity() {
        let g = grid1(64, 4.0);
        for level in [1, 2, 8, 100] {
            let f = mollify(&PotentialSpec::constant(1.0), &g, level).unwrap();
            assert!(f.value().values().iter().all(|v| (v.re - 1.0).abs() < 1e-13));
        }
    }

    #[test]
    fn build_m_zero_potential() {
        let g = grid1(16, 2.0);
        let f = eval_potential(&PotentialSpec::constant(0.0), &g).unwrap();
        let pack = build_m(&f, C64::new(1.0, 0.0), 1.0).unwrap();
        assert!(pack.value().values().iter().all(|v| (v - 0.5).norm() < 1e-15));
        assert!(pack.is_constant());
    }

    #[test]
    fn build_m_power_law_at_origin() {
        let g = grid1(16, 2.0);
        let spec = PotentialSpec::new(PotentialFamily::PowerLaw { r: 2.0 }, 0.6, 2.0).unwrap();
        let f = eval_potential(&spec, &g).unwrap();
        let pack = build_m(&f, C64::new(1.0, 0.0), 1.0).unwrap();
        assert_eq!(g.point(8)[0], 0.0);
        assert_relative_eq!(pack.value().values()[8].re, 1.0 / 3.0, epsilon = 1e-15);
        assert!(pack.derivative(MultiIndex::x(1)).values()[8].norm() < 1e-15);
    }

    #[test]
    fn build_m_rejects_negative_axis() {
        let g = grid1(16, 2.0);
        let f = eval_potential(&PotentialSpec::constant(0.0), &g).unwrap();
        assert!(matches!(build_m(&f, C64::new(-2.0, 0.0), 1.0), Err(Error::OutsideSector(_))));
        assert!(build_m(&f, C64::new(0.0, 0.0), 1.0).is_err());
        assert!(build_m(&f, C64::new(-2.0, 1e-3), 1.0).is_ok());
    }
}
