//! Linear maps on grid samples and discrete operator-norm estimation.

use crate::grid::{norm_p, Grid};
use crate::linalg::{self, CMatrix};
use crate::operator::{OperatorHandle, Resolvent, DENSE_LIMIT};
use crate::par::{self, Exec};
use crate::{rng, Error, Result, C64};
use nalgebra::DVector;
use std::fmt;
use std::sync::Arc;

/// A linear map on the samples of one grid.
///
/// Discrete `L^p` norms carry the same cell weight on both sides, so operator
/// norms are those of the unweighted matrix and the weighted adjoint is the
/// conjugate transpose.
pub trait LinearMap: Sync {
    fn grid(&self) -> &Grid;

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>>;

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>>;

    /// Entries of the map when it is pointwise multiplication.
    fn physical_diagonal(&self) -> Option<Vec<C64>> {
        None
    }

    /// Symbol of the map when it is a Fourier multiplier.
    fn fourier_diagonal(&self) -> Option<Vec<C64>> {
        None
    }

    fn to_dense(&self, exec: Exec) -> Result<CMatrix> {
        let n = self.grid().len();
        if n > DENSE_LIMIT {
            return Err(Error::Capability(format!("{n} unknowns exceed the dense limit")));
        }
        let idx: Vec<usize> = (0..n).collect();
        let cols = par::try_map(exec, &idx, |&j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            self.apply(&e)
        })?;
        Ok(CMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }
}

impl LinearMap for OperatorHandle {
    fn grid(&self) -> &Grid {
        OperatorHandle::grid(self)
    }

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok(self.apply_values(v))
    }

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok(self.adjoint().apply_values(v))
    }

    fn physical_diagonal(&self) -> Option<Vec<C64>> {
        OperatorHandle::physical_diagonal(self).map(<[C64]>::to_vec)
    }

    fn fourier_diagonal(&self) -> Option<Vec<C64>> {
        self.fourier_symbol().map(<[C64]>::to_vec)
    }

    fn to_dense(&self, exec: Exec) -> Result<CMatrix> {
        OperatorHandle::to_dense(self, exec)
    }
}

/// Explicit matrix.
#[derive(Clone, Debug)]
pub struct DenseMap {
    grid: Grid,
    matrix: CMatrix,
}

impl DenseMap {
    pub fn new(grid: &Grid, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::InvalidArgument("dense map shape does not match grid".into()));
        }
        Ok(DenseMap {
            grid: grid.clone(),
            matrix,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

impl LinearMap for DenseMap {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok((&self.matrix * DVector::from_column_slice(v)).as_slice().to_vec())
    }

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok((self.matrix.adjoint() * DVector::from_column_slice(v)).as_slice().to_vec())
    }

    fn to_dense(&self, _exec: Exec) -> Result<CMatrix> {
        Ok(self.matrix.clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Physical,
    Fourier,
}

/// Multiplication in physical or Fourier space.
#[derive(Clone, Debug)]
pub struct DiagonalMap {
    grid: Grid,
    diag: Vec<C64>,
    space: Space,
}

impl DiagonalMap {
    pub fn new(grid: &Grid, diag: Vec<C64>, space: Space) -> Result<Self> {
        if diag.len() != grid.len() {
            return Err(Error::InvalidArgument("diagonal length does not match grid".into()));
        }
        Ok(DiagonalMap {
            grid: grid.clone(),
            diag,
            space,
        })
    }

    pub fn identity(grid: &Grid) -> Self {
        DiagonalMap {
            grid: grid.clone(),
            diag: vec![C64::new(1.0, 0.0); grid.len()],
            space: Space::Physical,
        }
    }

    /// `D_axis` as a Fourier multiplier.
    pub fn derivative(grid: &Grid, axis: usize) -> Self {
        DiagonalMap {
            grid: grid.clone(),
            diag: grid.derivative_symbol(crate::MultiIndex::unit(axis)),
            space: Space::Fourier,
        }
    }

    pub fn entries(&self) -> &[C64] {
        &self.diag
    }

    pub fn space(&self) -> Space {
        self.space
    }

    fn mul(&self, v: &[C64], conj: bool) -> Vec<C64> {
        let d = |x: &C64| if conj { x.conj() } else { *x };
        match self.space {
            Space::Physical => v.iter().zip(&self.diag).map(|(a, b)| a * d(b)).collect(),
            Space::Fourier => {
                let sym: Vec<C64> = self.diag.iter().map(d).collect();
                self.grid.apply_symbol(v, &sym)
            }
        }
    }
}

impl LinearMap for DiagonalMap {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok(self.mul(v, false))
    }

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        Ok(self.mul(v, true))
    }

    fn physical_diagonal(&self) -> Option<Vec<C64>> {
        (self.space == Space::Physical).then(|| self.diag.clone())
    }

    fn fourier_diagonal(&self) -> Option<Vec<C64>> {
        (self.space == Space::Fourier).then(|| self.diag.clone())
    }
}

/// `scale * (lambda + A)^{-1}`.
pub struct ResolventMap {
    op: OperatorHandle,
    scale: C64,
    fwd: Resolvent,
    adj: Resolvent,
    dense_op: Option<Arc<CMatrix>>,
}

impl ResolventMap {
    pub fn new(op: &OperatorHandle, lambda: C64, scale: C64) -> Result<Self> {
        Ok(ResolventMap {
            op: op.clone(),
            scale,
            fwd: op.resolvent(lambda)?,
            adj: op.adjoint().resolvent(lambda.conj())?,
            dense_op: None,
        })
    }

    /// As [`ResolventMap::new`], densifying through a materialized `A`.
    pub fn with_dense(op: &OperatorHandle, lambda: C64, scale: C64, dense: Arc<CMatrix>) -> Result<Self> {
        let mut m = Self::new(op, lambda, scale)?;
        m.dense_op = Some(dense);
        Ok(m)
    }

    pub fn lambda(&self) -> C64 {
        self.fwd.lambda()
    }

    fn diag(&self, d: &[C64]) -> Vec<C64> {
        d.iter().map(|v| self.scale / (self.lambda() + v)).collect()
    }
}

impl LinearMap for ResolventMap {
    fn grid(&self) -> &Grid {
        self.op.grid()
    }

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut x = self.fwd.solve_values(v)?;
        x.iter_mut().for_each(|a| *a *= self.scale);
        Ok(x)
    }

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut x = self.adj.solve_values(v)?;
        x.iter_mut().for_each(|a| *a *= self.scale.conj());
        Ok(x)
    }

    fn physical_diagonal(&self) -> Option<Vec<C64>> {
        self.op.physical_diagonal().map(|d| self.diag(d))
    }

    fn fourier_diagonal(&self) -> Option<Vec<C64>> {
        self.op.fourier_symbol().map(|d| self.diag(d))
    }

    fn to_dense(&self, exec: Exec) -> Result<CMatrix> {
        match &self.dense_op {
            Some(a) => {
                let n = a.nrows();
                let mut m = (**a).clone();
                for i in 0..n {
                    m[(i, i)] += self.lambda();
                }
                let inv = m
                    .try_inverse()
                    .ok_or_else(|| Error::SingularShift(format!("-lambda = {}", -self.lambda())))?;
                Ok(inv * self.scale)
            }
            None => {
                let n = self.grid().len();
                let idx: Vec<usize> = (0..n).collect();
                let cols = par::try_map(exec, &idx, |&j| {
                    let mut e = vec![C64::new(0.0, 0.0); n];
                    e[j] = C64::new(1.0, 0.0);
                    self.apply(&e)
                })?;
                Ok(CMatrix::from_fn(n, n, |i, j| cols[j][i]))
            }
        }
    }
}

/// Composition `outer * inner`.
pub struct Product<A, B> {
    pub outer: A,
    pub inner: B,
}

impl<A: LinearMap, B: LinearMap> LinearMap for Product<A, B> {
    fn grid(&self) -> &Grid {
        self.outer.grid()
    }

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.outer.apply(&self.inner.apply(v)?)
    }

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.inner.apply_adjoint(&self.outer.apply_adjoint(v)?)
    }

    fn physical_diagonal(&self) -> Option<Vec<C64>> {
        let (a, b) = (self.outer.physical_diagonal()?, self.inner.physical_diagonal()?);
        Some(a.iter().zip(&b).map(|(x, y)| x * y).collect())
    }

    fn fourier_diagonal(&self) -> Option<Vec<C64>> {
        let (a, b) = (self.outer.fourier_diagonal()?, self.inner.fourier_diagonal()?);
        Some(a.iter().zip(&b).map(|(x, y)| x * y).collect())
    }

    fn to_dense(&self, exec: Exec) -> Result<CMatrix> {
        Ok(self.outer.to_dense(exec)? * self.inner.to_dense(exec)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NormMethod {
    ExactMultiplier,
    Svd,
    PNormLowerBound,
}

impl NormMethod {
    pub fn name(self) -> &'static str {
        match self {
            NormMethod::ExactMultiplier => "exact_multiplier",
            NormMethod::Svd => "svd",
            NormMethod::PNormLowerBound => "p_norm_lower_bound",
        }
    }
}

impl fmt::Display for NormMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct LowerBoundOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        LowerBoundOptions {
            restarts: 6,
            max_iter: 30,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub method: NormMethod,
    /// Running maximum after each restart (lower-bound estimator only).
    pub history: Vec<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("norm exponent p = {p} must lie in (1, inf)")))
    }
}

/// Discrete `L^p -> L^p` norm of `map` with an explicit method.
pub fn opnorm<M: LinearMap + ?Sized>(
    map: &M,
    p: f64,
    method: NormMethod,
    opts: &LowerBoundOptions,
) -> Result<NormEstimate> {
    check_p(p)?;
    let exact = |value| NormEstimate {
        value,
        method,
        history: Vec::new(),
    };
    match method {
        NormMethod::ExactMultiplier => {
            if let Some(d) = map.physical_diagonal() {
                return Ok(exact(d.iter().fold(0.0, |m, v| m.max(v.norm()))));
            }
            match map.fourier_diagonal() {
                Some(d) if p == 2.0 => Ok(exact(d.iter().fold(0.0, |m, v| m.max(v.norm())))),
                Some(_) => Err(Error::Capability(
                    "Fourier multiplier norms are exact only for p = 2".into(),
                )),
                None => Err(Error::Capability("map is not diagonal".into())),
            }
        }
        NormMethod::Svd => {
            if p != 2.0 {
                return Err(Error::Capability("singular values give the p = 2 norm only".into()));
            }
            Ok(exact(linalg::norm2(&map.to_dense(Exec::Sequential)?)))
        }
        NormMethod::PNormLowerBound => pnorm_lower_bound(map, p, opts),
    }
}

/// Pick the cheapest method that is exact when possible.
pub fn auto_norm<M: LinearMap + ?Sized>(map: &M, p: f64, opts: &LowerBoundOptions) -> Result<NormEstimate> {
    check_p(p)?;
    if map.physical_diagonal().is_some() || (p == 2.0 && map.fourier_diagonal().is_some()) {
        return opnorm(map, p, NormMethod::ExactMultiplier, opts);
    }
    if p == 2.0 && map.grid().len() <= DENSE_LIMIT {
        return opnorm(map, p, NormMethod::Svd, opts);
    }
    opnorm(map, p, NormMethod::PNormLowerBound, opts)
}

/// `|y|^{p-1} sgn(y) / ||y||_p^{p-1}`, the unit dual of `y` in `l^q`.
fn dual(y: &[C64], p: f64) -> Vec<C64> {
    let ny = norm_p(y, 1.0, p);
    if ny == 0.0 {
        return vec![C64::new(0.0, 0.0); y.len()];
    }
    y.iter()
        .map(|v| {
            let a = v.norm();
            if a == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                (v / a) * (a / ny).powf(p - 1.0)
            }
        })
        .collect()
}

/// Dual-pair power iteration with random restarts; returns a lower bound.
fn pnorm_lower_bound<M: LinearMap + ?Sized>(map: &M, p: f64, opts: &LowerBoundOptions) -> Result<NormEstimate> {
    let q = p / (p - 1.0);
    let n = map.grid().len();
    let mut stream = rng::stream(opts.seed, "p-norm-lower-bound");
    let mut best: f64 = 0.0;
    let mut history = Vec::with_capacity(opts.restarts.max(1));
    for restart in 0..opts.restarts.max(1) {
        let start = if restart == 0 {
            vec![C64::new(1.0, 0.0); n]
        } else {
            rng::complex_normal_vec(&mut stream, n)
        };
        let ns = norm_p(&start, 1.0, p);
        let mut x: Vec<C64> = start.iter().map(|v| v / ns).collect();
        for _ in 0..opts.max_iter.max(1) {
            let y = map.apply(&x)?;
            let est = norm_p(&y, 1.0, p);
            best = best.max(est);
            if est == 0.0 {
                break;
            }
            let z = map.apply_adjoint(&dual(&y, p))?;
            let zq = norm_p(&z, 1.0, q);
            let zx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zq <= zx * (1.0 + 1e-12) {
                break;
            }
            x = dual(&z, q);
        }
        history.push(best);
    }
    Ok(NormEstimate {
        value: best,
        method: NormMethod::PNormLowerBound,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn diagonal_and_identity() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut d = vec![C64::new(0.2, 0.0); 8];
        d[0] = C64::new(0.5, 0.0);
        d[1] = C64::new(1.0 / 3.0, 0.0);
        let m = DiagonalMap::new(&g, d, Space::Physical).unwrap();
        let o = LowerBoundOptions::default();
        assert_eq!(opnorm(&m, 2.0, NormMethod::ExactMultiplier, &o).unwrap().value, 0.5);
        for p in [1.5, 2.0, 4.0] {
            let id = DiagonalMap::identity(&g);
            assert_eq!(auto_norm(&id, p, &o).unwrap().value, 1.0);
            let lb = opnorm(&id, p, NormMethod::PNormLowerBound, &o).unwrap().value;
            assert!((lb - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_matches_singular_value() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = CMatrix::from_fn(16, 16, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        let sigma = linalg::singular_values(&a)[0];
        let m = DenseMap::new(&g, a).unwrap();
        let o = LowerBoundOptions::default();
        let s = opnorm(&m, 2.0, NormMethod::Svd, &o).unwrap().value;
        assert!((s - sigma).abs() <= 1e-10 * sigma);
        let lb = opnorm(&m, 2.0, NormMethod::PNormLowerBound, &o).unwrap();
        assert!(lb.value <= s * (1.0 + 1e-12));
        assert!(lb.value >= 0.9 * s);
        assert!(lb.history.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn capability_mismatch() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let m = DenseMap::new(&g, CMatrix::identity(8, 8)).unwrap();
        let o = LowerBoundOptions::default();
        assert!(matches!(opnorm(&m, 2.0, NormMethod::ExactMultiplier, &o), Err(Error::Capability(_))));
        assert!(matches!(opnorm(&m, 4.0, NormMethod::Svd, &o), Err(Error::Capability(_))));
        assert!(opnorm(&m, 1.0, NormMethod::Svd, &o).is_err());
    }

    #[test]
    fn resolvent_map_adjoint_consistent() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let l = OperatorHandle::varcoef(crate::operator::CoefficientSet::sine(&g), 1.0).unwrap();
        let r = ResolventMap::new(&l, C64::new(1.0, 2.0), C64::new(1.0, 2.0)).unwrap();
        let dense = r.to_dense(Exec::Sequential).unwrap();
        let mut s = rng::stream(3, "t");
        let v = rng::complex_normal_vec(&mut s, 16);
        let a = r.apply_adjoint(&v).unwrap();
        let b = dense.adjoint() * DVector::from_column_slice(&v);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-9);
        }
    }
}
