//! Coefficient sets `a_{alpha beta}` for `L = sum D^alpha a_{alpha beta} D^beta`
//! and the parameter-ellipticity verifier.

use crate::grid::{Field, Grid, MultiIndex};
use crate::{Error, Result, C64};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

/// Named coefficient presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientPreset {
    /// `a = 1` on every top-order pair of `Delta^2`.
    Bilaplacian,
    /// The top-order pairs of `Delta^2` weighted by `2 + sin x_1`.
    Sine,
}

impl CoefficientPreset {
    pub fn name(self) -> &'static str {
        match self {
            CoefficientPreset::Bilaplacian => "bilaplacian",
            CoefficientPreset::Sine => "sine",
        }
    }

    pub fn build(self, grid: &Grid) -> CoefficientSet {
        match self {
            CoefficientPreset::Bilaplacian => CoefficientSet::bilaplacian(grid),
            CoefficientPreset::Sine => CoefficientSet::sine(grid),
        }
    }
}

impl std::str::FromStr for CoefficientPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilaplacian" | "constant" => Ok(CoefficientPreset::Bilaplacian),
            "sine" | "2+sin" => Ok(CoefficientPreset::Sine),
            other => Err(Error::InvalidArgument(format!("unknown coefficient preset {other:?}"))),
        }
    }
}

impl fmt::Display for CoefficientPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sampled sup-norms of a coefficient and its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Smoothness {
    pub sup: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
}

impl Smoothness {
    pub fn is_finite(&self) -> bool {
        self.sup.is_finite() && self.sup_d1.is_finite() && self.sup_d2.is_finite()
    }
}

pub type Pair = (MultiIndex, MultiIndex);

/// Map from `(alpha, beta)` with `|alpha|, |beta| <= 2` to coefficient fields.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    grid: Grid,
    entries: BTreeMap<Pair, Field>,
}

impl CoefficientSet {
    pub fn new(grid: &Grid) -> Self {
        CoefficientSet {
            grid: grid.clone(),
            entries: BTreeMap::new(),
        }
    }

    /// Insert `a_{alpha beta}`. Top-order coefficients must be real.
    pub fn insert(&mut self, alpha: MultiIndex, beta: MultiIndex, a: Field) -> Result<()> {
        if a.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let dim = self.grid.dim();
        if alpha.order() > 2 || beta.order() > 2 || !alpha.fits(dim) || !beta.fits(dim) {
            return Err(Error::InvalidArgument(format!(
                "coefficient index ({alpha}, {beta}) outside |alpha|, |beta| <= 2 in {dim}D"
            )));
        }
        if alpha.order() == 2 && beta.order() == 2 && a.values().iter().any(|v| v.im != 0.0) {
            return Err(Error::InvalidArgument(format!(
                "top-order coefficient ({alpha}, {beta}) must be real"
            )));
        }
        self.entries.insert((alpha, beta), a);
        Ok(())
    }

    /// The constant-coefficient bilaplacian `sum_ij D_i^2 D_j^2`.
    pub fn bilaplacian(grid: &Grid) -> Self {
        Self::weighted_bilaplacian(grid, Field::constant(grid, C64::new(1.0, 0.0)))
    }

    /// `sum_ij D_i^2 (2 + sin x_1) D_j^2`.
    pub fn sine(grid: &Grid) -> Self {
        Self::weighted_bilaplacian(grid, Field::from_real_fn(grid, |x| 2.0 + x[0].sin()))
    }

    fn weighted_bilaplacian(grid: &Grid, a: Field) -> Self {
        let mut set = CoefficientSet::new(grid);
        for i in 0..grid.dim() {
            for j in 0..grid.dim() {
                let (di, dj) = (MultiIndex::unit(i), MultiIndex::unit(j));
                set.entries.insert((di + di, dj + dj), a.clone());
            }
        }
        set
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pair, &Field)> {
        self.entries.iter()
    }

    pub fn get(&self, alpha: MultiIndex, beta: MultiIndex) -> Option<&Field> {
        self.entries.get(&(alpha, beta))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Top-order entries `|alpha| = |beta| = 2`.
    pub fn top_order(&self) -> impl Iterator<Item = (&Pair, &Field)> {
        self.entries
            .iter()
            .filter(|((a, b), _)| a.order() == 2 && b.order() == 2)
    }

    /// Whether every coefficient is constant on the grid.
    pub fn is_constant(&self) -> bool {
        self.entries.values().all(|f| {
            let v0 = f.values()[0];
            f.values().iter().all(|v| *v == v0)
        })
    }

    /// Coefficients of the formal adjoint
    /// `L* = sum (-1)^{|alpha|+|beta|} D^beta conj(a_{alpha beta}) D^alpha`.
    pub fn adjoint(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|(&(a, b), f)| {
                let sign = if (a.order() + b.order()) % 2 == 0 { 1.0 } else { -1.0 };
                ((b, a), f.map(|v| v.conj() * sign))
            })
            .collect();
        CoefficientSet {
            grid: self.grid.clone(),
            entries,
        }
    }

    /// Symbol of the constant-coefficient operator built from coefficient means.
    pub fn mean_symbol(&self) -> Vec<C64> {
        let g = &self.grid;
        let mut sym = vec![C64::new(0.0, 0.0); g.len()];
        for (&(a, b), f) in &self.entries {
            let mean = f.values().iter().sum::<C64>() / f.len() as f64;
            let da = g.derivative_symbol(a);
            let db = g.derivative_symbol(b);
            for ((s, x), y) in sym.iter_mut().zip(&da).zip(&db) {
                *s += mean * x * y;
            }
        }
        sym
    }

    /// Top-order principal symbol `sum a_{alpha beta}(x) xi^{alpha+beta}` at one point.
    pub fn principal_symbol(&self, idx: usize, xi: [f64; 2]) -> C64 {
        self.top_order()
            .map(|(&(a, b), f)| {
                let m = a + b;
                f.values()[idx] * xi[0].powi(m.0[0] as i32) * xi[1].powi(m.0[1] as i32)
            })
            .sum()
    }

    /// Sampled `W^{2,inf}` norms of each coefficient.
    pub fn smoothness(&self) -> BTreeMap<Pair, Smoothness> {
        let dim = self.grid.dim();
        self.entries
            .iter()
            .map(|(&k, f)| {
                let sup_d = |order: u32| {
                    MultiIndex::all(dim, order, order)
                        .into_iter()
                        .map(|m| f.derivative_unchecked(m).max_abs())
                        .fold(0.0, f64::max)
                };
                (
                    k,
                    Smoothness {
                        sup: f.max_abs(),
                        sup_d1: sup_d(1),
                        sup_d2: sup_d(2),
                    },
                )
            })
            .collect()
    }

    /// Check the structural hypotheses: real bounded top-order coefficients
    /// with two bounded derivatives, bounded lower-order coefficients.
    pub fn validate(&self) -> Result<()> {
        for ((a, b), s) in self.smoothness() {
            if !s.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "coefficient ({a}, {b}) is not in W^2,inf on the grid"
                )));
            }
        }
        Ok(())
    }
}

/// Sampling plan for [`verify_ellipticity`].
#[derive(Clone, Debug)]
pub struct EllipticitySamples {
    /// Unit directions for `xi`.
    pub directions: Vec<[f64; 2]>,
    /// Radii `|xi|`.
    pub radii: Vec<f64>,
    /// Values of `r >= 0`.
    pub rs: Vec<f64>,
    /// Angles `theta` on the parameter arc.
    pub thetas: Vec<f64>,
}

impl EllipticitySamples {
    /// Directions on a half circle (the top-order symbol is even), radii
    /// `10^{-2..2}`, `r` in `{0} U radii` and `theta` on `[-pi/2, pi/2]`.
    pub fn standard(dim: usize) -> Self {
        let directions = if dim == 1 {
            vec![[1.0, 0.0]]
        } else {
            (0..16)
                .map(|i| {
                    let phi = std::f64::consts::PI * i as f64 / 16.0;
                    [phi.cos(), phi.sin()]
                })
                .collect()
        };
        let radii: Vec<f64> = (0..41).map(|i| 10f64.powf(-2.0 + 0.1 * i as f64)).collect();
        let mut rs = vec![0.0];
        rs.extend(&radii);
        let thetas = (0..61).map(|i| -FRAC_PI_2 + std::f64::consts::PI * i as f64 / 60.0).collect();
        EllipticitySamples {
            directions,
            radii,
            rs,
            thetas,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EllipticityReport {
    pub nu: f64,
    pub min_ratio: f64,
    /// Grid index, `xi`, `r` and `theta` attaining the minimum.
    pub argmin: (usize, [f64; 2], f64, f64),
    pub pass: bool,
}

/// Minimum of `|sum a(x) xi^{alpha+beta} + r^4 e^{i theta}| / (|xi|^4 + r^4)`.
pub fn verify_ellipticity(
    coeffs: &CoefficientSet,
    nu: f64,
    samples: &EllipticitySamples,
) -> EllipticityReport {
    let g = coeffs.grid();
    let mut best = (f64::INFINITY, (0, [0.0, 0.0], 0.0, 0.0));
    // Identical coefficient values give identical ratios; evaluate each once.
    let mut seen: Vec<(C64, [f64; 2])> = Vec::new();
    for idx in 0..g.len() {
        for dir in &samples.directions {
            let unit = coeffs.principal_symbol(idx, *dir);
            if seen.iter().any(|(u, d)| *u == unit && d == dir) {
                continue;
            }
            seen.push((unit, *dir));
            for &rad in &samples.radii {
                let xi = [dir[0] * rad, dir[1] * rad];
                let s = unit * rad.powi(4);
                for &r in &samples.rs {
                    let r4 = r.powi(4);
                    let den = rad.powi(4) + r4;
                    for &theta in &samples.thetas {
                        let ratio = (s + C64::from_polar(r4, theta)).norm() / den;
                        if ratio < best.0 {
                            best = (ratio, (idx, xi, r, theta));
                        }
                    }
                }
            }
        }
    }
    EllipticityReport {
        nu,
        min_ratio: best.0,
        argmin: best.1,
        pass: best.0 >= nu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_preset_minimum_is_inverse_sqrt2() {
        let g = Grid::new(1, 16, std::f64::consts::PI).unwrap();
        let c = CoefficientSet::bilaplacian(&g);
        let s = EllipticitySamples::standard(1);
        let rep = verify_ellipticity(&c, 0.70, &s);
        assert!(rep.pass);
        assert!((rep.min_ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(!verify_ellipticity(&c, 0.72, &s).pass);
    }

    #[test]
    fn degenerate_coefficients_fail() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let mut c = CoefficientSet::new(&g);
        c.insert(MultiIndex::x(2), MultiIndex::x(2), Field::zeros(&g)).unwrap();
        let rep = verify_ellipticity(&c, 1e-6, &EllipticitySamples::standard(1));
        assert_eq!(rep.min_ratio, 0.0);
        assert!(!rep.pass);
    }

    #[test]
    fn sine_preset_bound() {
        let g = Grid::new(1, 64, 3.0 * std::f64::consts::PI).unwrap();
        let c = CoefficientSet::sine(&g);
        let rep = verify_ellipticity(&c, 0.0, &EllipticitySamples::standard(1));
        // With a in [1, 3]: |a + t e^{i theta}| / (1 + t) >= min(a, 1) / sqrt 2 at theta = pi/2.
        assert!(rep.min_ratio > 0.69 && rep.min_ratio <= 0.7072, "{rep:?}");
        assert!(c.validate().is_ok());
    }

    #[test]
    fn complex_top_order_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut c = CoefficientSet::new(&g);
        let z = Field::constant(&g, C64::new(1.0, 1.0));
        assert!(c.insert(MultiIndex::x(2), MultiIndex::x(2), z.clone()).is_err());
        assert!(c.insert(MultiIndex::x(1), MultiIndex::x(2), z).is_ok());
        assert!(c.insert(MultiIndex::x(3), MultiIndex::ZERO, Field::zeros(&g)).is_err());
    }

    #[test]
    fn adjoint_swaps_and_signs() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut c = CoefficientSet::new(&g);
        c.insert(MultiIndex::x(1), MultiIndex::x(2), Field::constant(&g, C64::new(3.0, 0.0)))
            .unwrap();
        let a = c.adjoint();
        assert_eq!(a.get(MultiIndex::x(2), MultiIndex::x(1)).unwrap().values()[0], C64::new(-3.0, 0.0));
    }
}
