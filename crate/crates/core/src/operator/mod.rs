//! Discretized operators: the shifted bilaplacian `Delta^2 + omega1`, the
//! variable-coefficient `L + omega1`, multiplication by `V + omega2`, their
//! sums and explicit dense matrices.

mod coef;
pub mod krylov;

pub use coef::{
    verify_ellipticity, CoefficientPreset, CoefficientSet, EllipticityReport, EllipticitySamples,
    Pair, Smoothness,
};

use crate::grid::{Field, Grid, MultiIndex};
use crate::linalg::{self, CMatrix};
use crate::par::{self, Exec};
use crate::{Error, Result, C64};
use krylov::{gmres, GmresConfig};
use nalgebra::DVector;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

/// Largest problem size for dense materialization and factorization.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    BilaplacianShifted,
    VarcoefShifted,
    MultiplicationShifted,
    Sum,
    Dense,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::BilaplacianShifted => "bilaplacian",
            OperatorKind::VarcoefShifted => "varcoef",
            OperatorKind::MultiplicationShifted => "multiplication",
            OperatorKind::Sum => "sum",
            OperatorKind::Dense => "dense",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Capabilities {
    pub apply: bool,
    pub solve: bool,
    pub adjoint: bool,
    pub dense_materialize: bool,
}

/// Variable-coefficient operator with cached derivative symbols.
struct Varcoef {
    coeffs: CoefficientSet,
    omega1: f64,
    /// Distinct `beta` with their symbols.
    betas: Vec<(MultiIndex, Vec<C64>)>,
    /// Distinct `alpha` with their symbols.
    alphas: Vec<(MultiIndex, Vec<C64>)>,
    mean_symbol: Vec<C64>,
}

enum Repr {
    Bilaplacian { omega1: f64, symbol: Vec<C64> },
    Varcoef(Varcoef),
    Multiplication { potential: Field, omega2: f64, diag: Vec<C64> },
    Sum(OperatorHandle, OperatorHandle),
    Dense(CMatrix),
}

/// Immutable, cheaply clonable handle to a discretized operator.
#[derive(Clone)]
pub struct OperatorHandle {
    grid: Grid,
    repr: Arc<Repr>,
}

impl fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("kind", &self.kind())
            .field("grid", &self.grid)
            .finish()
    }
}

fn check_shift(name: &str, w: f64) -> Result<()> {
    if w > 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {w} must be positive")))
    }
}

impl OperatorHandle {
    /// `Delta^2 + omega1` as the Fourier multiplier `|k|^4 + omega1`.
    pub fn bilaplacian(grid: &Grid, omega1: f64) -> Result<Self> {
        check_shift("omega1", omega1)?;
        let symbol = grid.symbol(|k| {
            let k2 = k[0] * k[0] + k[1] * k[1];
            C64::new(k2 * k2 + omega1, 0.0)
        });
        Ok(Self::from_repr(grid, Repr::Bilaplacian { omega1, symbol }))
    }

    /// `sum D^alpha a_{alpha beta} D^beta + omega1`.
    pub fn varcoef(coeffs: CoefficientSet, omega1: f64) -> Result<Self> {
        check_shift("omega1", omega1)?;
        coeffs.validate()?;
        let grid = coeffs.grid().clone();
        let mut alphas: Vec<MultiIndex> = coeffs.iter().map(|((a, _), _)| *a).collect();
        let mut betas: Vec<MultiIndex> = coeffs.iter().map(|((_, b), _)| *b).collect();
        alphas.sort();
        alphas.dedup();
        betas.sort();
        betas.dedup();
        let sym = |ms: Vec<MultiIndex>| {
            ms.into_iter()
                .map(|m| (m, grid.derivative_symbol(m)))
                .collect::<Vec<_>>()
        };
        let mut mean_symbol = coeffs.mean_symbol();
        for s in &mut mean_symbol {
            *s += omega1;
        }
        let v = Varcoef {
            alphas: sym(alphas),
            betas: sym(betas),
            coeffs,
            omega1,
            mean_symbol,
        };
        Ok(Self::from_repr(&grid, Repr::Varcoef(v)))
    }

    /// Pointwise multiplication by `V + omega2` with `V >= 0` real.
    pub fn multiplication(potential: &Field, omega2: f64) -> Result<Self> {
        check_shift("omega2", omega2)?;
        if let Some((index, v)) = potential
            .values()
            .iter()
            .enumerate()
            .find(|(_, v)| v.re < 0.0 || v.im != 0.0)
        {
            return Err(Error::NegativePotential { index, value: v.re });
        }
        let diag = potential.values().iter().map(|v| v + omega2).collect();
        Ok(Self::from_repr(
            potential.grid(),
            Repr::Multiplication {
                potential: potential.clone(),
                omega2,
                diag,
            },
        ))
    }

    pub fn sum(a: &OperatorHandle, b: &OperatorHandle) -> Result<Self> {
        if a.grid != b.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_repr(&a.grid, Repr::Sum(a.clone(), b.clone())))
    }

    /// Explicit matrix acting on grid samples.
    pub fn dense(grid: &Grid, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "dense operator is {}x{}, grid has {} points",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        Ok(Self::from_repr(grid, Repr::Dense(matrix)))
    }

    fn from_repr(grid: &Grid, repr: Repr) -> Self {
        OperatorHandle {
            grid: grid.clone(),
            repr: Arc::new(repr),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        match &*self.repr {
            Repr::Bilaplacian { .. } => OperatorKind::BilaplacianShifted,
            Repr::Varcoef(_) => OperatorKind::VarcoefShifted,
            Repr::Multiplication { .. } => OperatorKind::MultiplicationShifted,
            Repr::Sum(..) => OperatorKind::Sum,
            Repr::Dense(_) => OperatorKind::Dense,
        }
    }

    pub fn capabilities(&self) -> Capabilities {
        Capabilities {
            apply: true,
            solve: true,
            adjoint: true,
            dense_materialize: self.grid.len() <= DENSE_LIMIT,
        }
    }

    /// Shift `omega1` of the fourth-order part, if any.
    pub fn omega1(&self) -> Option<f64> {
        match &*self.repr {
            Repr::Bilaplacian { omega1, .. } => Some(*omega1),
            Repr::Varcoef(v) => Some(v.omega1),
            Repr::Sum(a, b) => a.omega1().or_else(|| b.omega1()),
            _ => None,
        }
    }

    /// Shift `omega2` of the multiplication part, if any.
    pub fn omega2(&self) -> Option<f64> {
        match &*self.repr {
            Repr::Multiplication { omega2, .. } => Some(*omega2),
            Repr::Sum(a, b) => a.omega2().or_else(|| b.omega2()),
            _ => None,
        }
    }

    /// The potential `V` of a multiplication part.
    pub fn potential(&self) -> Option<&Field> {
        match &*self.repr {
            Repr::Multiplication { potential, .. } => Some(potential),
            Repr::Sum(a, b) => a.potential().or_else(|| b.potential()),
            _ => None,
        }
    }

    pub fn coefficients(&self) -> Option<&CoefficientSet> {
        match &*self.repr {
            Repr::Varcoef(v) => Some(&v.coeffs),
            Repr::Sum(a, b) => a.coefficients().or_else(|| b.coefficients()),
            _ => None,
        }
    }

    /// Summands of a sum operator.
    pub fn parts(&self) -> Option<(&OperatorHandle, &OperatorHandle)> {
        match &*self.repr {
            Repr::Sum(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// Fourier multiplier of a diagonal-in-frequency operator.
    pub fn fourier_symbol(&self) -> Option<&[C64]> {
        match &*self.repr {
            Repr::Bilaplacian { symbol, .. } => Some(symbol),
            _ => None,
        }
    }

    /// Pointwise multiplier of a diagonal-in-space operator.
    pub fn physical_diagonal(&self) -> Option<&[C64]> {
        match &*self.repr {
            Repr::Multiplication { diag, .. } => Some(diag),
            _ => None,
        }
    }

    pub fn dense_matrix(&self) -> Option<&CMatrix> {
        match &*self.repr {
            Repr::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// Whether the discrete operator is self-adjoint by construction.
    pub fn is_self_adjoint(&self) -> bool {
        match &*self.repr {
            Repr::Bilaplacian { .. } | Repr::Multiplication { .. } => true,
            Repr::Sum(a, b) => a.is_self_adjoint() && b.is_self_adjoint(),
            Repr::Varcoef(_) | Repr::Dense(_) => false,
        }
    }

    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Field::from_vec(&self.grid, self.apply_values(f.values())))
    }

    /// Apply to raw samples in grid order.
    pub fn apply_values(&self, v: &[C64]) -> Vec<C64> {
        match &*self.repr {
            Repr::Bilaplacian { symbol, .. } => self.grid.apply_symbol(v, symbol),
            Repr::Multiplication { diag, .. } => v.iter().zip(diag).map(|(a, b)| a * b).collect(),
            Repr::Varcoef(vc) => apply_varcoef(&self.grid, vc, v),
            Repr::Sum(a, b) => {
                let mut out = a.apply_values(v);
                for (o, w) in out.iter_mut().zip(b.apply_values(v)) {
                    *o += w;
                }
                out
            }
            Repr::Dense(m) => (m * DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }

    /// Formal adjoint. Diagonal kinds with real symbols are returned as is.
    pub fn adjoint(&self) -> OperatorHandle {
        match &*self.repr {
            Repr::Bilaplacian { .. } | Repr::Multiplication { .. } => self.clone(),
            Repr::Varcoef(v) => OperatorHandle::varcoef(v.coeffs.adjoint(), v.omega1)
                .expect("adjoint coefficients inherit validity"),
            Repr::Sum(a, b) => Self::from_repr(&self.grid, Repr::Sum(a.adjoint(), b.adjoint())),
            Repr::Dense(m) => Self::from_repr(&self.grid, Repr::Dense(m.adjoint())),
        }
    }

    /// Dense matrix in grid order, built column by column.
    pub fn to_dense(&self, exec: Exec) -> Result<CMatrix> {
        let n = self.grid.len();
        if n > DENSE_LIMIT {
            return Err(Error::Capability(format!(
                "dense materialization of {n} unknowns exceeds {DENSE_LIMIT}"
            )));
        }
        if let Repr::Dense(m) = &*self.repr {
            return Ok(m.clone());
        }
        let cols = par::map_range(exec, n, |j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            self.apply_values(&e)
        });
        Ok(CMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    /// Constant-coefficient approximation used as preconditioner symbol.
    fn mean_symbol(&self) -> Option<Vec<C64>> {
        match &*self.repr {
            Repr::Bilaplacian { symbol, .. } => Some(symbol.clone()),
            Repr::Varcoef(v) => Some(v.mean_symbol.clone()),
            Repr::Multiplication { diag, .. } => {
                let mean = diag.iter().sum::<C64>() / diag.len() as f64;
                Some(vec![mean; diag.len()])
            }
            Repr::Sum(a, b) => {
                let (mut sa, sb) = (a.mean_symbol()?, b.mean_symbol()?);
                for (x, y) in sa.iter_mut().zip(&sb) {
                    *x += y;
                }
                Some(sa)
            }
            Repr::Dense(_) => None,
        }
    }

    /// Prepare `(lambda + op)^{-1}`.
    pub fn resolvent(&self, lambda: C64) -> Result<Resolvent> {
        self.resolvent_with(lambda, SolveStrategy::Auto)
    }

    pub fn resolvent_with(&self, lambda: C64, strategy: SolveStrategy) -> Result<Resolvent> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda = {lambda}")));
        }
        let singular = |d: &[C64]| -> Result<Vec<C64>> {
            let scale = d.iter().fold(lambda.norm(), |m, v| m.max(v.norm()));
            d.iter()
                .map(|v| {
                    let s = lambda + v;
                    if s.norm() <= 1e3 * f64::EPSILON * scale {
                        Err(Error::SingularShift(format!("-lambda = {} is an eigenvalue", -lambda)))
                    } else {
                        Ok(1.0 / s)
                    }
                })
                .collect()
        };
        let kind = match (&*self.repr, strategy) {
            (Repr::Bilaplacian { symbol, .. }, _) => ResolventKind::Fourier(singular(symbol)?),
            (Repr::Multiplication { diag, .. }, _) => ResolventKind::Physical(singular(diag)?),
            (Repr::Dense(_), _) | (_, SolveStrategy::Dense) => ResolventKind::Dense(self.dense_lu(lambda)?),
            _ => {
                let mut pre = self.mean_symbol().expect("structured operator has a mean symbol");
                for p in &mut pre {
                    let s = lambda + *p;
                    // A singular constant-coefficient model only disables preconditioning there.
                    *p = if s.norm() > 0.0 { 1.0 / s } else { C64::new(1.0, 0.0) };
                }
                ResolventKind::Krylov {
                    precond: pre,
                    fallback: OnceLock::new(),
                }
            }
        };
        Ok(Resolvent {
            op: self.clone(),
            lambda,
            kind,
            config: GmresConfig::default(),
        })
    }

    fn dense_lu(&self, lambda: C64) -> Result<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>> {
        let mut m = self.to_dense(Exec::default())?;
        for i in 0..m.nrows() {
            m[(i, i)] += lambda;
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularShift(format!("-lambda = {} is an eigenvalue", -lambda)));
        }
        Ok(lu)
    }

    /// One-shot `(lambda + op)^{-1} f`.
    pub fn solve_resolvent(&self, lambda: C64, f: &Field) -> Result<Field> {
        self.resolvent(lambda)?.solve(f)
    }
}

fn apply_varcoef(grid: &Grid, vc: &Varcoef, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    let spec = grid.forward(v);
    let dbeta: BTreeMap<MultiIndex, Vec<C64>> = vc
        .betas
        .iter()
        .map(|(m, s)| {
            let mut c = spec.clone();
            for (ci, si) in c.iter_mut().zip(s) {
                *ci *= si;
            }
            (*m, grid.inverse(&c))
        })
        .collect();
    let mut total = vec![C64::new(0.0, 0.0); n];
    for (alpha, sym) in &vc.alphas {
        let mut acc = vec![C64::new(0.0, 0.0); n];
        for ((_, b), coef) in vc.coeffs.iter().filter(|((a, _), _)| a == alpha) {
            let db = &dbeta[b];
            for ((x, c), d) in acc.iter_mut().zip(coef.values()).zip(db) {
                *x += c * d;
            }
        }
        let ca = grid.forward(&acc);
        for ((t, c), s) in total.iter_mut().zip(&ca).zip(sym) {
            *t += c * s;
        }
    }
    let mut out = grid.inverse(&total);
    for (o, x) in out.iter_mut().zip(v) {
        *o += vc.omega1 * x;
    }
    out
}

/// How to realize a resolvent for structured non-diagonal operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolveStrategy {
    /// Exact division for diagonal kinds, preconditioned GMRES otherwise with
    /// a dense LU fallback below [`DENSE_LIMIT`].
    #[default]
    Auto,
    /// Dense LU factorization computed once.
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    ExactDiagonal,
    Krylov,
    DenseLu,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub field: Field,
    pub method: SolveMethod,
    pub iterations: usize,
    pub residual: f64,
}

enum ResolventKind {
    Fourier(Vec<C64>),
    Physical(Vec<C64>),
    Krylov {
        precond: Vec<C64>,
        fallback: OnceLock<Result<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>>>,
    },
    Dense(nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>),
}

/// `(lambda + op)^{-1}` with any factorization precomputed. Reentrant.
pub struct Resolvent {
    op: OperatorHandle,
    lambda: C64,
    kind: ResolventKind,
    config: GmresConfig,
}

impl Resolvent {
    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn operator(&self) -> &OperatorHandle {
        &self.op
    }

    pub fn solve(&self, f: &Field) -> Result<Field> {
        Ok(self.solve_report(f)?.field)
    }

    pub fn solve_values(&self, f: &[C64]) -> Result<Vec<C64>> {
        Ok(self.solve_raw(f)?.0)
    }

    pub fn solve_report(&self, f: &Field) -> Result<SolveReport> {
        if f.grid() != self.op.grid() {
            return Err(Error::GridMismatch);
        }
        let (x, method, iterations, residual) = self.solve_raw(f.values())?;
        Ok(SolveReport {
            field: Field::new(self.op.grid(), x)?,
            method,
            iterations,
            residual,
        })
    }

    fn residual(&self, x: &[C64], f: &[C64]) -> f64 {
        let ax = self.op.apply_values(x);
        let num: f64 = ax
            .iter()
            .zip(x)
            .zip(f)
            .map(|((a, xi), fi)| (a + self.lambda * xi - fi).norm_sqr())
            .sum();
        let den: f64 = f.iter().map(|v| v.norm_sqr()).sum();
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }

    fn solve_raw(&self, f: &[C64]) -> Result<(Vec<C64>, SolveMethod, usize, f64)> {
        let grid = self.op.grid();
        match &self.kind {
            ResolventKind::Fourier(inv) => {
                Ok((grid.apply_symbol(f, inv), SolveMethod::ExactDiagonal, 0, 0.0))
            }
            ResolventKind::Physical(inv) => Ok((
                f.iter().zip(inv).map(|(a, b)| a * b).collect(),
                SolveMethod::ExactDiagonal,
                0,
                0.0,
            )),
            ResolventKind::Dense(lu) => {
                let x = lu
                    .solve(&DVector::from_column_slice(f))
                    .ok_or_else(|| Error::SingularShift("dense LU solve failed".into()))?;
                let x = x.as_slice().to_vec();
                let r = self.residual(&x, f);
                Ok((x, SolveMethod::DenseLu, 0, r))
            }
            ResolventKind::Krylov { precond, fallback } => {
                let apply = |x: &[C64]| {
                    let mut y = self.op.apply_values(x);
                    for (yi, xi) in y.iter_mut().zip(x) {
                        *yi += self.lambda * xi;
                    }
                    y
                };
                let pre = |x: &[C64]| grid.apply_symbol(x, precond);
                let res = gmres(apply, pre, f, &self.config);
                if res.converged {
                    return Ok((res.x, SolveMethod::Krylov, res.iterations, res.residual));
                }
                if grid.len() > DENSE_LIMIT {
                    return Err(Error::NoConvergence {
                        iterations: res.iterations,
                        residual: res.residual,
                    });
                }
                let lu = fallback.get_or_init(|| self.op.dense_lu(self.lambda));
                let lu = lu.as_ref().map_err(|e| Error::SingularShift(e.to_string()))?;
                let x = lu
                    .solve(&DVector::from_column_slice(f))
                    .ok_or_else(|| Error::SingularShift("dense LU solve failed".into()))?;
                let x = x.as_slice().to_vec();
                let r = self.residual(&x, f);
                Ok((x, SolveMethod::DenseLu, res.iterations, r))
            }
        }
    }
}

/// Dense matrix of `(lambda + op)^{-1}` (small grids only).
pub fn dense_resolvent(op: &OperatorHandle, lambda: C64, exec: Exec) -> Result<CMatrix> {
    let n = op.grid().len();
    let res = op.resolvent(lambda)?;
    let cols = par::try_map(exec, &(0..n).collect::<Vec<_>>(), |&j| {
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[j] = C64::new(1.0, 0.0);
        res.solve_values(&e)
    })?;
    Ok(CMatrix::from_fn(n, n, |i, j| cols[j][i]))
}

/// Convenience: `||op||` in the spectral norm of the dense matrix.
pub fn dense_norm2(op: &OperatorHandle) -> Result<f64> {
    Ok(linalg::norm2(&op.to_dense(Exec::default())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::PI;

    fn grid1(n: usize) -> Grid {
        Grid::new(1, n, PI).unwrap()
    }

    fn random_field(g: &Grid, seed: u64) -> Field {
        let mut s = rng::stream(seed, "operator-test");
        Field::new(g, rng::complex_normal_vec(&mut s, g.len())).unwrap()
    }

    fn rel(a: &Field, b: &Field) -> f64 {
        (a - b).norm_p(2.0) / b.norm_p(2.0).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn bilaplacian_on_exponential() {
        let g = grid1(32);
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let f = Field::from_fn(&g, |x| C64::new(0.0, 2.0 * x[0]).exp());
        let af = a.apply(&f).unwrap();
        assert!(rel(&af, &f.scale(C64::new(17.0, 0.0))) < 1e-12);
        let u = a.solve_resolvent(C64::new(1.0, 0.0), &Field::from_fn(&g, |x| C64::new(0.0, x[0]).exp()))
            .unwrap();
        let expected = Field::from_fn(&g, |x| C64::new(0.0, x[0]).exp() / 3.0);
        assert!(rel(&u, &expected) < 1e-13);
    }

    #[test]
    fn multiplication_examples() {
        let g = grid1(16);
        let v = Field::constant(&g, C64::new(1.0, 0.0));
        let b = OperatorHandle::multiplication(&v, 1.0).unwrap();
        let f = random_field(&g, 1);
        assert!(rel(&b.apply(&f).unwrap(), &f.scale(C64::new(2.0, 0.0))) < 1e-15);
        let u = b.solve_resolvent(C64::new(2.0, 0.0), &f).unwrap();
        assert!(rel(&u, &f.scale(C64::new(0.25, 0.0))) < 1e-15);
    }

    #[test]
    fn varcoef_constant_equals_bilaplacian() {
        for g in [grid1(32), Grid::new(2, 16, 2.0).unwrap()] {
            let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
            let l = OperatorHandle::varcoef(CoefficientSet::bilaplacian(&g), 1.0).unwrap();
            let f = random_field(&g, 2);
            assert!(rel(&l.apply(&f).unwrap(), &a.apply(&f).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn varcoef_solve_reaches_tolerance() {
        let g = Grid::new(1, 64, 3.0 * PI).unwrap();
        let l = OperatorHandle::varcoef(CoefficientSet::sine(&g), 1.0).unwrap();
        let f = random_field(&g, 3);
        let res = l.resolvent(C64::new(0.5, 2.0)).unwrap();
        let rep = res.solve_report(&f).unwrap();
        assert_eq!(rep.method, SolveMethod::Krylov);
        assert!(rep.residual <= 1e-10);
        let back = l.apply(&rep.field).unwrap();
        let lhs = &back + &rep.field.scale(C64::new(0.5, 2.0));
        assert!(rel(&lhs, &f) <= 1e-10);
    }

    #[test]
    fn adjoint_is_conjugate_transpose() {
        let g = grid1(16);
        let l = OperatorHandle::varcoef(CoefficientSet::sine(&g), 1.0).unwrap();
        let m = l.to_dense(Exec::Sequential).unwrap();
        let ma = l.adjoint().to_dense(Exec::Sequential).unwrap();
        let diff = (&ma - m.adjoint()).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        assert!(diff <= 1e-10 * m.iter().fold(0.0f64, |a, v| a.max(v.norm())), "{diff}");
    }

    #[test]
    fn singular_shift_rejected() {
        let g = grid1(8);
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        assert!(matches!(a.resolvent(C64::new(-2.0, 0.0)), Err(Error::SingularShift(_))));
    }

    #[test]
    fn grid_mismatch() {
        let a = OperatorHandle::bilaplacian(&grid1(8), 1.0).unwrap();
        assert!(matches!(a.apply(&Field::zeros(&grid1(16))), Err(Error::GridMismatch)));
    }

    #[test]
    fn sum_matches_dense_lu() {
        let g = Grid::new(1, 64, 3.0 * PI).unwrap();
        let v = Field::from_real_fn(&g, |x| 1.0 + x[0].sin().powi(2));
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let b = OperatorHandle::multiplication(&v, 1.0).unwrap();
        let s = OperatorHandle::sum(&a, &b).unwrap();
        let f = random_field(&g, 4);
        let lambda = C64::new(1.0, 0.3);
        let rep = s.resolvent(lambda).unwrap().solve_report(&f).unwrap();
        assert!(rep.residual <= 1e-10);
        let dense = s.resolvent_with(lambda, SolveStrategy::Dense).unwrap().solve(&f).unwrap();
        assert!(rel(&rep.field, &dense) <= 1e-8);
    }
}
