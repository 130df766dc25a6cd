//! The semigroup `e^{-t(A+B)}`, analyticity, a-priori estimates and the
//! domain norm equivalence on `D(A) ∩ D(B)`.
//!
//! Evolution keeps the shifts inside the generator: the propagated field is
//! `e^{-t(Delta^2 + V + omega1 + omega2)} f`.

use crate::csv::{fmt_f64, Table};
use crate::grid::{Field, Grid, MultiIndex};
use crate::linalg::{self, CMatrix, MatFn};
use crate::operator::{OperatorHandle, DENSE_LIMIT};
use crate::par::{self, Exec};
use crate::spectral::fit::{decades, envelope_slope, require_decades, FitResult};
use crate::spectral::{auto_norm, DiagonalMap, LinearMap, LowerBoundOptions, NormMethod, Product, ResolventMap};
use crate::spectral::SectorPoint;
use crate::{rng, Error, Result, C64};
use nalgebra::DVector;
use rand::Rng;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvolveMethod {
    Eigendecomposition,
    StrangSplitting,
}

impl EvolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            EvolveMethod::Eigendecomposition => "eigendecomposition",
            EvolveMethod::StrangSplitting => "strang_splitting",
        }
    }
}

impl fmt::Display for EvolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EvolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eigendecomposition" | "eigen" => Ok(EvolveMethod::Eigendecomposition),
            "strang_splitting" | "strang" => Ok(EvolveMethod::StrangSplitting),
            other => Err(Error::InvalidArgument(format!("unknown evolution method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub t: f64,
    pub field: Field,
    pub method: EvolveMethod,
    /// Splitting steps, 1 for the eigendecomposition.
    pub steps: usize,
    /// Relative L2 distance to the eigendecomposition oracle.
    pub error_vs_oracle: Option<f64>,
    /// `omega1 + omega2` kept inside the generator.
    pub shift: f64,
}

impl EvolutionResult {
    /// `e^{-t(Delta^2 + V)} f`.
    pub fn unshifted(&self) -> Field {
        self.field.scale(C64::new((self.t * self.shift).exp(), 0.0))
    }
}

fn shift_of(op: &OperatorHandle) -> f64 {
    op.omega1().unwrap_or(0.0) + op.omega2().unwrap_or(0.0)
}

enum Spectral {
    Hermitian { values: Vec<f64>, vectors: CMatrix },
    General(CMatrix),
}

/// Dense spectral calculus of one operator, computed once and shared.
pub struct Propagator {
    grid: Grid,
    shift: f64,
    spectral: Spectral,
}

impl Propagator {
    pub fn new(op: &OperatorHandle, exec: Exec) -> Result<Self> {
        if op.grid().len() > DENSE_LIMIT {
            return Err(Error::Capability(format!(
                "eigendecomposition of {} unknowns exceeds {DENSE_LIMIT}",
                op.grid().len()
            )));
        }
        let dense = op.to_dense(exec)?;
        let spectral = if op.is_self_adjoint() {
            let h = (&dense + dense.adjoint()) * C64::new(0.5, 0.0);
            let eig = h.symmetric_eigen();
            Spectral::Hermitian {
                values: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors,
            }
        } else {
            Spectral::General(dense)
        };
        Ok(Propagator {
            grid: op.grid().clone(),
            shift: shift_of(op),
            spectral,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues of a self-adjoint generator, ascending.
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        match &self.spectral {
            Spectral::Hermitian { values, .. } => Some(values),
            Spectral::General(_) => None,
        }
    }

    /// `e^{-t(A+B)}` as a dense matrix.
    pub fn matrix(&self, t: f64) -> Result<CMatrix> {
        match &self.spectral {
            Spectral::Hermitian { values, vectors } => {
                let mut scaled = vectors.clone();
                for (j, s) in values.iter().enumerate() {
                    let e = (-t * s).exp();
                    scaled.column_mut(j).scale_mut(e);
                }
                Ok(scaled * vectors.adjoint())
            }
            Spectral::General(a) => linalg::matfun(a, MatFn::Decay(t)),
        }
    }

    pub fn evolve(&self, t: f64, f: &Field) -> Result<EvolutionResult> {
        check_time(t)?;
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let out = match &self.spectral {
            Spectral::Hermitian { values, vectors } => {
                let mut c = vectors.adjoint() * DVector::from_column_slice(f.values());
                for (ci, s) in c.iter_mut().zip(values) {
                    *ci *= (-t * s).exp();
                }
                vectors * c
            }
            Spectral::General(_) => self.matrix(t)? * DVector::from_column_slice(f.values()),
        };
        Ok(EvolutionResult {
            t,
            field: Field::new(&self.grid, out.iter().copied().collect())?,
            method: EvolveMethod::Eigendecomposition,
            steps: 1,
            error_vs_oracle: None,
            shift: self.shift,
        })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("evolution time must be positive, got {t}")))
    }
}

/// Strang splitting: half steps `e^{-(h/2)(V+omega2)}` around `e^{-h(Delta^2+omega1)}`.
pub fn strang(op: &OperatorHandle, t: f64, f: &Field, steps: usize) -> Result<EvolutionResult> {
    check_time(t)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("splitting needs at least one step".into()));
    }
    if f.grid() != op.grid() {
        return Err(Error::GridMismatch);
    }
    let (a, b) = op
        .parts()
        .ok_or_else(|| Error::Capability("splitting needs a sum A + B".into()))?;
    let (sym, diag) = match (a.fourier_symbol(), b.physical_diagonal(), b.fourier_symbol(), a.physical_diagonal()) {
        (Some(s), Some(d), _, _) | (_, _, Some(s), Some(d)) => (s, d),
        _ => {
            return Err(Error::Capability(
                "splitting needs a Fourier-diagonal and a pointwise summand".into(),
            ))
        }
    };
    let h = t / steps as f64;
    let half: Vec<C64> = diag.iter().map(|d| (-0.5 * h * d).exp()).collect();
    let full: Vec<C64> = sym.iter().map(|s| (-h * s).exp()).collect();
    let grid = op.grid();
    let mut u = f.values().to_vec();
    for _ in 0..steps {
        u.iter_mut().zip(&half).for_each(|(x, e)| *x *= e);
        u = grid.apply_symbol(&u, &full);
        u.iter_mut().zip(&half).for_each(|(x, e)| *x *= e);
    }
    Ok(EvolutionResult {
        t,
        field: Field::new(grid, u)?,
        method: EvolveMethod::StrangSplitting,
        steps,
        error_vs_oracle: None,
        shift: shift_of(op),
    })
}

/// `e^{-t(A+B)} f` by the requested method.
pub fn evolve(op: &OperatorHandle, t: f64, f: &Field, method: EvolveMethod, steps: usize) -> Result<EvolutionResult> {
    match method {
        EvolveMethod::Eigendecomposition => Propagator::new(op, Exec::default())?.evolve(t, f),
        EvolveMethod::StrangSplitting => strang(op, t, f, steps),
    }
}

fn rel_error(a: &Field, b: &Field) -> f64 {
    (a - b).norm_p(2.0) / b.norm_p(2.0).max(f64::MIN_POSITIVE)
}

/// Splitting run with its distance to the oracle filled in.
pub fn strang_against(prop: &Propagator, op: &OperatorHandle, t: f64, f: &Field, steps: usize) -> Result<EvolutionResult> {
    let oracle = prop.evolve(t, f)?;
    let mut r = strang(op, t, f, steps)?;
    r.error_vs_oracle = Some(rel_error(&r.field, &oracle.field));
    Ok(r)
}

#[derive(Clone, Debug)]
pub struct SplittingOrder {
    pub steps: Vec<usize>,
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})` between consecutive doublings.
    pub ratios: Vec<f64>,
    /// Slope of `-log error` against `log steps`.
    pub order: FitResult,
}

/// Convergence order of the splitting against the oracle.
pub fn splitting_order(
    prop: &Propagator,
    op: &OperatorHandle,
    t: f64,
    f: &Field,
    steps: &[usize],
    exec: Exec,
) -> Result<SplittingOrder> {
    let oracle = prop.evolve(t, f)?;
    let errors = par::try_map(exec, steps, |&s| Ok::<_, Error>(rel_error(&strang(op, t, f, s)?.field, &oracle.field)))?;
    let ratios = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let x: Vec<f64> = steps.iter().map(|&s| s as f64).collect();
    let mut order = crate::spectral::loglog_fit(&x, &errors, 0.0, f64::INFINITY)?;
    order.slope = -order.slope;
    Ok(SplittingOrder {
        steps: steps.to_vec(),
        errors,
        ratios,
        order,
    })
}

pub const SNAPSHOT_HEADER_1D: [&str; 4] = ["t", "x", "re", "im"];
pub const SNAPSHOT_HEADER_2D: [&str; 5] = ["t", "x", "y", "re", "im"];

/// Time series of evolved fields, one row per grid point and time.
pub fn snapshot_table(results: &[EvolutionResult]) -> Table {
    let dim = results.first().map_or(1, |r| r.field.grid().dim());
    let mut t = if dim == 1 {
        Table::new(SNAPSHOT_HEADER_1D)
    } else {
        Table::new(SNAPSHOT_HEADER_2D)
    };
    for r in results {
        let g = r.field.grid();
        for (i, v) in r.field.values().iter().enumerate() {
            let x = g.point(i);
            let mut row = vec![fmt_f64(r.t), fmt_f64(x[0])];
            if dim == 2 {
                row.push(fmt_f64(x[1]));
            }
            row.push(fmt_f64(v.re));
            row.push(fmt_f64(v.im));
            t.push(row);
        }
    }
    t
}

/// `max_sigma sigma e^{-t sigma}` over a nonnegative spectrum.
pub fn generator_norm(eigenvalues: &[f64], t: f64) -> f64 {
    eigenvalues
        .iter()
        .map(|&s| s.abs() * (-t * s).exp())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct AnalyticityReport {
    /// `(t, ||(A+B) e^{-t(A+B)}||_2)`.
    pub points: Vec<(f64, f64)>,
    /// `sup_t t ||(A+B) e^{-t(A+B)}||_2`.
    pub sup: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `1/e` plus roundoff slack.
pub const ANALYTIC_BOUND: f64 = 1.0 / std::f64::consts::E + 1e-8;

/// `t ||(A+B) e^{-t(A+B)}||_2 <= 1/e` through the spectral calculus.
pub fn analyticity_check(prop: &Propagator, ts: &[f64]) -> Result<AnalyticityReport> {
    let eig = prop.eigenvalues().ok_or_else(|| {
        Error::Capability("analyticity is checked exactly only for self-adjoint generators".into())
    })?;
    for &t in ts {
        check_time(t)?;
    }
    let points: Vec<(f64, f64)> = ts.iter().map(|&t| (t, generator_norm(eig, t))).collect();
    let sup = points.iter().map(|(t, n)| t * n).fold(0.0, f64::max);
    Ok(AnalyticityReport {
        points,
        sup,
        bound: ANALYTIC_BOUND,
        pass: sup <= ANALYTIC_BOUND,
    })
}

/// Largest allowed spread `max C / min C` of the a-priori constant.
pub const A_PRIORI_SPREAD: f64 = 2.0;

/// Exact `L^2` constant of
/// `|l|^{3/4}||Du|| + |l|^{1/2}||D^2u|| + |l|^{1/4}||D^3u|| + |l|||u|| <= C ||(l + Delta^2)u||`.
pub fn a_priori_constant(grid: &Grid, lambda: C64) -> Result<f64> {
    if !crate::potential::in_open_sector(lambda) {
        return Err(Error::OutsideSector(format!("lambda = {lambda}")));
    }
    let m = lambda.norm();
    let mut best: f64 = 0.0;
    for idx in 0..grid.len() {
        let k = grid.wavevector(idx);
        let k2 = k[0] * k[0] + k[1] * k[1];
        let kk = k2.sqrt();
        // Odd derivatives drop the Nyquist mode.
        let odd = if (0..grid.dim()).any(|a| grid.is_nyquist(idx, a)) { 0.0 } else { 1.0 };
        let num = m.powf(0.75) * kk * odd + m.sqrt() * k2 + m.powf(0.25) * kk * k2 * odd + m;
        best = best.max(num / (lambda + k2 * k2).norm());
    }
    Ok(best)
}

/// Pointwise Euclidean norm of all order-`j` derivatives, `|k|^j` on plane waves.
fn derivative_magnitude(u: &Field, j: u32) -> Vec<f64> {
    let grid = u.grid();
    let mut acc = vec![0.0; grid.len()];
    for m in MultiIndex::all(grid.dim(), j, j) {
        let w = MultiIndex::new(j, 0).binomial(MultiIndex::new(m.0[0], 0));
        let d = u.derivative_unchecked(m);
        for (a, v) in acc.iter_mut().zip(d.values()) {
            *a += w * v.norm_sqr();
        }
    }
    acc.into_iter().map(f64::sqrt).collect()
}

fn real_norm(values: &[f64], weight: f64, p: f64) -> f64 {
    let c: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    crate::grid::norm_p(&c, weight, p)
}

/// Random field with Fourier support in half the bandwidth and a random decay rate.
pub fn band_limited(grid: &Grid, stream: &mut rng::Stream) -> Field {
    let nyq = grid.nyquist_index() as f64;
    let cutoff = stream.random_range(1.0..=nyq / 2.0);
    let decay = stream.random_range(0.0..4.0);
    let kmax_unit = std::f64::consts::PI / grid.half_width();
    let coeffs = rng::complex_normal_vec(stream, grid.len());
    let shaped: Vec<C64> = coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let k = grid.wavevector(idx);
            let j = (k[0].abs().max(k[1].abs())) / kmax_unit;
            if j > cutoff {
                C64::new(0.0, 0.0)
            } else {
                c * (1.0 + j).powf(-decay)
            }
        })
        .collect();
    Field::from_spectral(grid, &shaped)
}

/// Lower bound of the a-priori constant at `L^p` from random probes.
pub fn a_priori_lower_bound(grid: &Grid, lambda: C64, p: f64, trials: usize, seed: u64) -> Result<f64> {
    if !crate::potential::in_open_sector(lambda) {
        return Err(Error::OutsideSector(format!("lambda = {lambda}")));
    }
    let m = lambda.norm();
    let w = grid.cell_volume();
    let bilap = grid.symbol(|k| C64::new((k[0] * k[0] + k[1] * k[1]).powi(2), 0.0));
    let mut stream = rng::stream(seed, &format!("a-priori:{}:{lambda}:{p}", grid.n()));
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let u = band_limited(grid, &mut stream);
        let lhs = m.powf(0.75) * real_norm(&derivative_magnitude(&u, 1), w, p)
            + m.sqrt() * real_norm(&derivative_magnitude(&u, 2), w, p)
            + m.powf(0.25) * real_norm(&derivative_magnitude(&u, 3), w, p)
            + m * u.norm_p(p);
        let au = Field::new(grid, grid.apply_symbol(u.values(), &bilap))?;
        let rhs = (&au + &u.scale(lambda)).norm_p(p);
        if rhs > 0.0 {
            best = best.max(lhs / rhs);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct APrioriEntry {
    pub n: usize,
    pub lambda: SectorPoint,
    pub p: f64,
    pub constant: f64,
    pub method: NormMethod,
}

#[derive(Clone, Debug)]
pub struct APrioriReport {
    pub entries: Vec<APrioriEntry>,
    /// Extremes over the exact `p = 2` entries.
    pub max: f64,
    pub min: f64,
    pub spread: f64,
    pub pass: bool,
}

/// A-priori constants over grids, spectral parameters and exponents.
pub fn a_priori_check(grids: &[Grid], lambdas: &[SectorPoint], ps: &[f64], trials: usize, seed: u64) -> Result<APrioriReport> {
    let mut entries = Vec::new();
    for g in grids {
        for l in lambdas {
            for &p in ps {
                let (constant, method) = if p == 2.0 {
                    (a_priori_constant(g, l.value())?, NormMethod::ExactMultiplier)
                } else {
                    (a_priori_lower_bound(g, l.value(), p, trials, seed)?, NormMethod::PNormLowerBound)
                };
                entries.push(APrioriEntry {
                    n: g.n(),
                    lambda: *l,
                    p,
                    constant,
                    method,
                });
            }
        }
    }
    let exact: Vec<f64> = entries
        .iter()
        .filter(|e| e.method == NormMethod::ExactMultiplier)
        .map(|e| e.constant)
        .collect();
    let max = exact.iter().copied().fold(0.0, f64::max);
    let min = exact.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if exact.is_empty() { 1.0 } else { max / min };
    let finite = entries.iter().all(|e| e.constant.is_finite());
    Ok(APrioriReport {
        pass: finite && spread <= A_PRIORI_SPREAD,
        entries,
        max,
        min,
        spread,
    })
}

pub const A_PRIORI_HEADER: [&str; 6] = ["n", "arg_l", "mod_l", "p", "constant", "method"];

pub fn a_priori_table(entries: &[APrioriEntry]) -> Table {
    let mut t = Table::new(A_PRIORI_HEADER);
    for e in entries {
        t.push(vec![
            e.n.to_string(),
            fmt_f64(e.lambda.argument),
            fmt_f64(e.lambda.modulus),
            fmt_f64(e.p),
            fmt_f64(e.constant),
            e.method.to_string(),
        ]);
    }
    t
}

/// Slack on the relative gap between the two sides of the duality check.
pub fn duality_tolerance(method: NormMethod) -> f64 {
    match method {
        NormMethod::PNormLowerBound => 0.1,
        _ => 1e-8,
    }
}

/// Largest allowed envelope slope of `||(l + A)^{-1} D_i|| |l|^{3/4}`.
pub const GEN_SLOPE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct APrioriGenEntry {
    pub lambda: SectorPoint,
    pub axis: usize,
    pub estimate: f64,
    /// `estimate |lambda|^{3/4}`.
    pub scaled: f64,
    /// Norm of `D_i (conj(lambda) + A*)^{-1}`.
    pub dual: f64,
    pub method: NormMethod,
}

#[derive(Clone, Debug)]
pub struct APrioriGenReport {
    pub entries: Vec<APrioriGenEntry>,
    pub envelope: FitResult,
    /// Largest relative gap between an estimate and its dual.
    pub duality_gap: f64,
    pub duality_ok: bool,
    pub pass: bool,
}

/// `||(lambda + A)^{-1} D_i||_p` and its dual for every axis.
pub fn resolvent_derivative_norms(
    a: &OperatorHandle,
    lambda: C64,
    p: f64,
    opts: &LowerBoundOptions,
    dense: Option<Arc<CMatrix>>,
) -> Result<Vec<(usize, f64, f64, NormMethod)>> {
    let grid = a.grid();
    let adj = a.adjoint();
    let one = C64::new(1.0, 0.0);
    let use_svd = p == 2.0 && grid.dim() == 1 && grid.n() <= crate::commutator::SVD_LIMIT;
    (0..grid.dim())
        .map(|axis| {
            let (r, ra) = match &dense {
                Some(d) => (
                    ResolventMap::with_dense(a, lambda, one, d.clone())?,
                    ResolventMap::with_dense(&adj, lambda.conj(), one, Arc::new(d.adjoint()))?,
                ),
                None => (ResolventMap::new(a, lambda, one)?, ResolventMap::new(&adj, lambda.conj(), one)?),
            };
            let fwd = Product {
                outer: r,
                inner: DiagonalMap::derivative(grid, axis),
            };
            let back = Product {
                outer: DiagonalMap::derivative(grid, axis),
                inner: ra,
            };
            if use_svd && fwd.fourier_diagonal().is_none() {
                let x = linalg::norm2(&fwd.to_dense(Exec::Sequential)?);
                let y = linalg::norm2(&back.to_dense(Exec::Sequential)?);
                return Ok((axis, x, y, NormMethod::Svd));
            }
            let x = auto_norm(&fwd, p, opts)?;
            let q = if p.is_finite() { p / (p - 1.0) } else { 1.0 };
            let y = auto_norm(&back, q, opts)?;
            Ok((axis, x.value, y.value, x.method))
        })
        .collect()
}

/// `||(lambda + A)^{-1} D_i|| |lambda|^{3/4}` stays bounded in `|lambda|`.
pub fn a_priori_gen_check(
    a: &OperatorHandle,
    lambdas: &[SectorPoint],
    p: f64,
    opts: &LowerBoundOptions,
    exec: Exec,
) -> Result<APrioriGenReport> {
    let moduli: Vec<f64> = lambdas.iter().map(|l| l.modulus).collect();
    require_decades(&moduli, 2.0, "a-priori lambda grid")?;
    let dense = if a.fourier_symbol().is_none() && a.physical_diagonal().is_none() && a.grid().len() <= DENSE_LIMIT {
        Some(Arc::new(a.to_dense(exec)?))
    } else {
        None
    };
    let per = par::try_map(exec, lambdas, |l| {
        resolvent_derivative_norms(a, l.value(), p, opts, dense.clone()).map(|v| (*l, v))
    })?;
    let mut entries = Vec::new();
    for (l, v) in per {
        for (axis, estimate, dual, method) in v {
            entries.push(APrioriGenEntry {
                lambda: l,
                axis,
                estimate,
                scaled: estimate * l.modulus.powf(0.75),
                dual,
                method,
            });
        }
    }
    let x: Vec<f64> = entries.iter().map(|e| e.lambda.modulus).collect();
    let y: Vec<f64> = entries.iter().map(|e| e.scaled).collect();
    let envelope = envelope_slope(&x, &y, decades(&x))?;
    let mut duality_ok = true;
    let mut duality_gap: f64 = 0.0;
    for e in &entries {
        let gap = (e.estimate - e.dual).abs() / e.estimate.max(e.dual).max(f64::MIN_POSITIVE);
        duality_gap = duality_gap.max(gap);
        duality_ok &= gap <= duality_tolerance(e.method);
    }
    Ok(APrioriGenReport {
        pass: duality_ok && envelope.slope <= GEN_SLOPE,
        entries,
        envelope,
        duality_gap,
        duality_ok,
    })
}

pub const A_PRIORI_GEN_HEADER: [&str; 7] = ["arg_l", "mod_l", "axis", "estimate", "scaled", "dual", "method"];

pub fn a_priori_gen_table(entries: &[APrioriGenEntry]) -> Table {
    let mut t = Table::new(A_PRIORI_GEN_HEADER);
    for e in entries {
        t.push(vec![
            fmt_f64(e.lambda.argument),
            fmt_f64(e.lambda.modulus),
            e.axis.to_string(),
            fmt_f64(e.estimate),
            fmt_f64(e.scaled),
            fmt_f64(e.dual),
            e.method.to_string(),
        ]);
    }
    t
}

/// Largest allowed relative drift of the domain ratio across grids.
pub const DOMAIN_DRIFT: f64 = 0.2;
pub const MIN_TRIALS: usize = 100;

/// `(||Delta^2 u||_p + ||V u||_p) / (||(Delta^2 + V) u||_p + ||u||_p)`.
pub fn domain_ratio(a: &OperatorHandle, b: &OperatorHandle, u: &Field, p: f64) -> Result<f64> {
    let w1 = a.omega1().unwrap_or(0.0);
    let w2 = b.omega2().unwrap_or(0.0);
    let au = &a.apply(u)? - &u.scale(C64::new(w1, 0.0));
    let bu = &b.apply(u)? - &u.scale(C64::new(w2, 0.0));
    let num = au.norm_p(p) + bu.norm_p(p);
    let den = (&au + &bu).norm_p(p) + u.norm_p(p);
    if den == 0.0 {
        return Err(Error::InvalidArgument("domain ratio of the zero field".into()));
    }
    Ok(num / den)
}

/// Max domain ratio over random band-limited trials.
pub fn domain_ratio_max(a: &OperatorHandle, b: &OperatorHandle, p: f64, trials: usize, seed: u64) -> Result<f64> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!("{trials} trials, need at least {MIN_TRIALS}")));
    }
    let grid = a.grid();
    let mut stream = rng::stream(seed, &format!("domain:{}:{}", grid.n(), p));
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let u = band_limited(grid, &mut stream);
        best = best.max(domain_ratio(a, b, &u, p)?);
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct DomainReport {
    /// `(n, p, max ratio)`.
    pub per_grid: Vec<(usize, f64, f64)>,
    /// Worst `max / min - 1` over grids at one `p`.
    pub drift: f64,
    pub pass: bool,
}

/// Uniform domain norm equivalence across grid refinements.
pub fn domain_characterization_check(
    models: &[(OperatorHandle, OperatorHandle)],
    ps: &[f64],
    trials: usize,
    seed: u64,
    exec: Exec,
) -> Result<DomainReport> {
    let jobs: Vec<(usize, f64)> = (0..models.len()).flat_map(|i| ps.iter().map(move |&p| (i, p))).collect();
    let maxima = par::try_map(exec, &jobs, |&(i, p)| {
        let (a, b) = &models[i];
        domain_ratio_max(a, b, p, trials, seed).map(|r| (a.grid().n(), p, r))
    })?;
    let mut drift: f64 = 0.0;
    for &p in ps {
        let r: Vec<f64> = maxima.iter().filter(|m| m.1 == p).map(|m| m.2).collect();
        let hi = r.iter().copied().fold(0.0, f64::max);
        let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
        if !r.is_empty() {
            drift = drift.max(hi / lo - 1.0);
        }
    }
    Ok(DomainReport {
        pass: drift < DOMAIN_DRIFT && maxima.iter().all(|m| m.2.is_finite()),
        per_grid: maxima,
        drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{eval_potential, PotentialFamily, PotentialSpec};
    use std::f64::consts::PI;

    fn model(n: usize) -> (OperatorHandle, OperatorHandle, OperatorHandle) {
        let g = Grid::new(1, n, 3.0 * PI).unwrap();
        let spec = PotentialSpec::new(PotentialFamily::PeriodicSurrogate { r: 2.0 }, 0.6, 2.0).unwrap();
        let pot = eval_potential(&spec, &g).unwrap();
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let b = OperatorHandle::multiplication(pot.value(), 1.0).unwrap();
        let s = OperatorHandle::sum(&a, &b).unwrap();
        (a, b, s)
    }

    #[test]
    fn free_plane_wave_decays_exactly() {
        let g = Grid::new(1, 32, PI).unwrap();
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let b = OperatorHandle::multiplication(&Field::zeros(&g), 1.0).unwrap();
        let s = OperatorHandle::sum(&a, &b).unwrap();
        let f = Field::from_fn(&g, |x| C64::new(0.0, 3.0 * x[0]).exp());
        let t = 0.01;
        let want = f.scale(C64::new((-t * 83.0f64).exp(), 0.0));
        for m in [EvolveMethod::Eigendecomposition, EvolveMethod::StrangSplitting] {
            let r = evolve(&s, t, &f, m, 4).unwrap();
            assert!(rel_error(&r.field, &want) < 1e-12, "{m}");
        }
    }

    #[test]
    fn small_time_is_identity() {
        let (_, _, s) = model(64);
        let f = Field::from_real_fn(s.grid(), |x| (-x[0] * x[0]).exp());
        let r = evolve(&s, 1e-8, &f, EvolveMethod::Eigendecomposition, 1).unwrap();
        assert!(rel_error(&r.field, &f) <= 1e-6);
        assert!(evolve(&s, 0.0, &f, EvolveMethod::Eigendecomposition, 1).is_err());
    }

    #[test]
    fn unshifted_undoes_the_shift() {
        let g = Grid::new(1, 16, PI).unwrap();
        let a = OperatorHandle::bilaplacian(&g, 1.5).unwrap();
        let b = OperatorHandle::multiplication(&Field::zeros(&g), 0.5).unwrap();
        let s = OperatorHandle::sum(&a, &b).unwrap();
        let f = Field::constant(&g, C64::new(1.0, 0.0));
        let r = strang(&s, 0.3, &f, 3).unwrap();
        assert!(rel_error(&r.unshifted(), &f) < 1e-14);
    }

    #[test]
    fn scalar_generator_bound() {
        assert!((generator_norm(&[1.0], 1.0) - 1.0 / std::f64::consts::E).abs() < 1e-16);
        assert!(generator_norm(&[2.0, 5.0], 1e3) < 1e-300);
    }

    #[test]
    fn a_priori_zero_mode() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        for l in [1.0, 10.0, 1e4] {
            assert!(a_priori_constant(&g, C64::new(l, 0.0)).unwrap() >= 1.0);
        }
        assert!(a_priori_constant(&g, C64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn domain_ratio_trivial_cases() {
        let (a, b, _) = model(64);
        let g = a.grid().clone();
        let zero_v = OperatorHandle::multiplication(&Field::zeros(&g), 1.0).unwrap();
        let mut st = rng::stream(1, "t");
        for _ in 0..10 {
            let u = band_limited(&g, &mut st);
            assert!(domain_ratio(&a, &zero_v, &u, 2.0).unwrap() < 1.0);
        }
        let u = Field::constant(&g, C64::new(1.0, 0.0));
        let r = domain_ratio(&a, &b, &u, 2.0).unwrap();
        let vu = (&b.apply(&u).unwrap() - &u).norm_p(2.0);
        assert!((r - vu / (vu + u.norm_p(2.0))).abs() < 1e-12);
    }

    #[test]
    fn strang_needs_a_splittable_sum() {
        let (a, _, _) = model(16);
        let f = Field::zeros(a.grid());
        assert!(strang(&a, 0.1, &f, 4).is_err());
    }

    #[test]
    fn method_names_parse() {
        for m in [EvolveMethod::Eigendecomposition, EvolveMethod::StrangSplitting] {
            assert_eq!(m.name().parse::<EvolveMethod>().unwrap(), m);
        }
    }
}
