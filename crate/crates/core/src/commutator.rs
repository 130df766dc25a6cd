//! The resolvent commutator
//!
//! ```text
//! C(lambda, mu) = A (lambda + A)^{-1} [A^{-1} M - M A^{-1}],   M = (mu + omega2 + V)^{-1}
//! ```
//!
//! built directly from solves, through the divergence-form decomposition for
//! `A = Delta^2 + omega1`, and through the general Leibniz splitting
//! `A(Mg) - M A g = div(P g) + Q g` for variable coefficients. With
//! `g = A^{-1} f` all three satisfy `-C f = (lambda + A)^{-1} [A(Mg) - M A g]`.

use crate::csv::{fmt_f64, Table};
use crate::grid::{Field, Grid, MultiIndex};
use crate::linalg::{self, CMatrix};
use crate::operator::{CoefficientSet, OperatorHandle, OperatorKind, Resolvent};
use crate::par::{self, Exec};
use crate::potential::{build_m, in_open_sector, MPack, PotentialFields};
use crate::spectral::fit::{envelope_slope, loglog_fit, require_decades, FitResult};
use crate::spectral::{auto_norm, LinearMap, LowerBoundOptions, NormMethod, SectorPoint};
use crate::{rng, Error, Result, C64};
use std::collections::BTreeMap;

/// `gamma = 1/4` in the commutator condition.
pub const GAMMA: f64 = 0.25;
/// Slack on the fitted exponents.
pub const SLOPE_SLACK: f64 = 0.15;
/// Largest allowed envelope slope of the bound ratio.
pub const RATIO_SLOPE: f64 = 0.05;
/// Largest grid for which the p = 2 norm uses a dense SVD.
pub const SVD_LIMIT: usize = 256;

fn check_points(lambda: C64, mu: C64) -> Result<()> {
    if !in_open_sector(lambda) {
        return Err(Error::OutsideSector(format!("lambda = {lambda}")));
    }
    if !in_open_sector(mu) {
        return Err(Error::OutsideSector(format!("mu = {mu}")));
    }
    Ok(())
}

/// `M = (mu + B)^{-1}` from the multiplication operator `B = V + omega2`.
fn m_values(b: &OperatorHandle, mu: C64) -> Result<Vec<C64>> {
    let diag = b
        .physical_diagonal()
        .ok_or_else(|| Error::Capability("B must be a multiplication operator".into()))?;
    Ok(diag.iter().map(|d| 1.0 / (mu + d)).collect())
}

fn pointwise(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `C(lambda, mu)` as a linear map with its adjoint.
pub struct CommutatorMap {
    grid: Grid,
    lambda: C64,
    m: Vec<C64>,
    r: Resolvent,
    r_adj: Resolvent,
    inv: Resolvent,
    inv_adj: Resolvent,
}

impl CommutatorMap {
    pub fn new(a: &OperatorHandle, b: &OperatorHandle, lambda: C64, mu: C64) -> Result<Self> {
        check_points(lambda, mu)?;
        if a.grid() != b.grid() {
            return Err(Error::GridMismatch);
        }
        let adj = a.adjoint();
        Ok(CommutatorMap {
            grid: a.grid().clone(),
            lambda,
            m: m_values(b, mu)?,
            r: a.resolvent(lambda)?,
            r_adj: adj.resolvent(lambda.conj())?,
            inv: a.resolvent(C64::new(0.0, 0.0))?,
            inv_adj: adj.resolvent(C64::new(0.0, 0.0))?,
        })
    }

    /// `A^{-1}(M f) - M A^{-1} f`.
    fn inner(&self, f: &[C64]) -> Result<Vec<C64>> {
        let a = self.inv.solve_values(&pointwise(&self.m, f))?;
        let b = pointwise(&self.m, &self.inv.solve_values(f)?);
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

impl LinearMap for CommutatorMap {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, f: &[C64]) -> Result<Vec<C64>> {
        // A (lambda + A)^{-1} d = d - lambda (lambda + A)^{-1} d.
        let d = self.inner(f)?;
        let rd = self.r.solve_values(&d)?;
        Ok(d.iter().zip(&rd).map(|(x, y)| x - self.lambda * y).collect())
    }

    fn apply_adjoint(&self, h: &[C64]) -> Result<Vec<C64>> {
        let rh = self.r_adj.solve_values(h)?;
        let u: Vec<C64> = h.iter().zip(&rh).map(|(x, y)| x - self.lambda.conj() * y).collect();
        let mc: Vec<C64> = self.m.iter().map(|v| v.conj()).collect();
        let a = pointwise(&mc, &self.inv_adj.solve_values(&u)?);
        let b = self.inv_adj.solve_values(&pointwise(&mc, &u))?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
}

/// `C(lambda, mu) f` composed from solves and pointwise products.
pub fn commutator_direct(a: &OperatorHandle, b: &OperatorHandle, lambda: C64, mu: C64, f: &Field) -> Result<Field> {
    if f.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let map = CommutatorMap::new(a, b, lambda, mu)?;
    Field::new(a.grid(), map.apply(f.values())?)
}

fn derivative(f: &Field, m: MultiIndex) -> Field {
    if m.is_zero() {
        f.clone()
    } else {
        f.derivative_unchecked(m)
    }
}

/// `C(lambda, mu) f` from the divergence-form identity for `Delta^2 + omega1`:
///
/// ```text
/// -C f = div (lambda + A)^{-1} grad(Delta M g)
///        + (lambda + A)^{-1} [2 grad Delta M . grad g + Delta M Delta g
///                             + 4 tr(D^2 M D^2 g) + 4 grad M . grad Delta g]
/// ```
pub fn commutator_decomposed(a: &OperatorHandle, pack: &MPack, lambda: C64, f: &Field) -> Result<Field> {
    if a.kind() != OperatorKind::BilaplacianShifted {
        return Err(Error::Capability("the divergence-form identity needs the constant-coefficient bilaplacian".into()));
    }
    if !in_open_sector(lambda) {
        return Err(Error::OutsideSector(format!("lambda = {lambda}")));
    }
    if f.grid() != a.grid() || pack.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = a.grid();
    let dim = grid.dim();
    let g = a.solve_resolvent(C64::new(0.0, 0.0), f)?;
    let r = a.resolvent(lambda)?;
    let lap_m = pack.laplacian();
    let lap_g = g.laplacian();
    let unit = MultiIndex::unit;

    let mut acc = &lap_m * &lap_g;
    for i in 0..dim {
        let gi = derivative(&g, unit(i));
        acc = &acc + &(&pack.grad_laplacian(i) * &gi).scale(C64::new(2.0, 0.0));
        let lap_gi = derivative(&lap_g, unit(i));
        acc = &acc + &(pack.derivative(unit(i)) * &lap_gi).scale(C64::new(4.0, 0.0));
        for j in 0..dim {
            let mij = pack.derivative(unit(i) + unit(j));
            let gji = derivative(&g, unit(j) + unit(i));
            acc = &acc + &(mij * &gji).scale(C64::new(4.0, 0.0));
        }
    }
    let mut neg_c = r.solve(&acc)?;
    let lm_g = &lap_m * &g;
    for i in 0..dim {
        let inner = r.solve(&derivative(&lm_g, unit(i)))?;
        neg_c = &neg_c + &derivative(&inner, unit(i));
    }
    Ok(-&neg_c)
}

/// One term `c(x) D^m M D^e g` of the lower-order part `Q`.
#[derive(Clone, Debug)]
pub struct QTerm {
    pub coef: Field,
    pub m_index: MultiIndex,
    pub g_index: MultiIndex,
}

/// Components `P_i = sum c(x) D^m M` of the divergence part.
#[derive(Clone, Debug)]
pub struct PTerm {
    pub axis: usize,
    pub coef: Field,
    pub m_index: MultiIndex,
}

/// `A(Mg) - M A g = div(P g) + Q g` with every `M` derivative of order `<= 3`.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub p: Vec<PTerm>,
    pub q: Vec<QTerm>,
}

fn decompositions(m: MultiIndex) -> Vec<(MultiIndex, MultiIndex)> {
    m.sub_indices()
        .into_iter()
        .map(|a| (a, m.checked_sub(a).expect("sub-index")))
        .collect()
}

/// Leibniz expansion of `sum D^alpha (a D^beta (M g)) - M D^alpha (a D^beta g)`.
///
/// Terms `a D^{alpha+beta} M g` with four derivatives on `M` are rewritten as
/// `D_i(a D^{gamma} M g) - D_i a D^{gamma} M g - a D^{gamma} M D_i g` with
/// `gamma = alpha + beta - e_i`; the first piece goes into `P`.
pub fn splitting(coeffs: &CoefficientSet) -> Splitting {
    let mut q: BTreeMap<(MultiIndex, MultiIndex), Field> = BTreeMap::new();
    let mut p: BTreeMap<(usize, MultiIndex), Field> = BTreeMap::new();
    let mut add_q = |m: MultiIndex, e: MultiIndex, c: Field| {
        q.entry((m, e))
            .and_modify(|acc| *acc = &*acc + &c)
            .or_insert(c);
    };
    for (&(alpha, beta), a) in coeffs.iter() {
        for (a1, rest) in decompositions(alpha) {
            let da = derivative(a, a1);
            for (a2, a3) in decompositions(rest) {
                for (b1, b2) in decompositions(beta) {
                    let dm = a2 + b1;
                    if dm.is_zero() {
                        continue;
                    }
                    let weight = alpha.binomial(a1) * rest.binomial(a2) * beta.binomial(b1);
                    let c = da.scale(C64::new(weight, 0.0));
                    let dg = a3 + b2;
                    if dm.order() <= 3 {
                        add_q(dm, dg, c);
                        continue;
                    }
                    let axis = if dm.0[0] > 0 { 0 } else { 1 };
                    let e = MultiIndex::unit(axis);
                    let gamma = dm.checked_sub(e).expect("axis carries an order");
                    add_q(gamma, dg, -&derivative(&c, e));
                    add_q(gamma, dg + e, -&c);
                    p.entry((axis, gamma))
                        .and_modify(|acc| *acc = &*acc + &c)
                        .or_insert(c);
                }
            }
        }
    }
    Splitting {
        p: p.into_iter()
            .map(|((axis, m_index), coef)| PTerm { axis, coef, m_index })
            .collect(),
        q: q.into_iter()
            .map(|((m_index, g_index), coef)| QTerm { coef, m_index, g_index })
            .collect(),
    }
}

impl Splitting {
    /// `div(P g) + Q g`.
    pub fn apply(&self, pack: &MPack, g: &Field) -> Field {
        let grid = g.grid();
        let mut out = Field::zeros(grid);
        let mut g_derivs: BTreeMap<MultiIndex, Field> = BTreeMap::new();
        for t in &self.q {
            let dg = g_derivs
                .entry(t.g_index)
                .or_insert_with(|| derivative(g, t.g_index));
            let term = &(&t.coef * pack.derivative(t.m_index)) * &*dg;
            out = &out + &term;
        }
        let mut p_axes: BTreeMap<usize, Field> = BTreeMap::new();
        for t in &self.p {
            let c = &t.coef * pack.derivative(t.m_index);
            p_axes
                .entry(t.axis)
                .and_modify(|acc| *acc = &*acc + &c)
                .or_insert(c);
        }
        for (axis, pi) in p_axes {
            out = &out + &derivative(&(&pi * g), MultiIndex::unit(axis));
        }
        out
    }
}

/// `C(lambda, mu) f` through `-C f = (lambda + A)^{-1} [div(P g) + Q g]`.
pub fn commutator_decomposed_varcoef(a: &OperatorHandle, pack: &MPack, lambda: C64, f: &Field) -> Result<Field> {
    let coeffs = a
        .coefficients()
        .filter(|_| a.kind() == OperatorKind::VarcoefShifted)
        .ok_or_else(|| Error::Capability("P/Q splitting needs a variable-coefficient operator".into()))?;
    if !in_open_sector(lambda) {
        return Err(Error::OutsideSector(format!("lambda = {lambda}")));
    }
    if f.grid() != a.grid() || pack.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let g = a.solve_resolvent(C64::new(0.0, 0.0), f)?;
    let rhs = splitting(coeffs).apply(pack, &g);
    Ok(-&a.solve_resolvent(lambda, &rhs)?)
}

/// Decomposed commutator for either operator kind.
pub fn commutator_decomposed_any(a: &OperatorHandle, pack: &MPack, lambda: C64, f: &Field) -> Result<Field> {
    match a.kind() {
        OperatorKind::BilaplacianShifted => commutator_decomposed(a, pack, lambda, f),
        _ => commutator_decomposed_varcoef(a, pack, lambda, f),
    }
}

/// Largest relative mismatch `||direct - decomposed|| / ||f||` over `probes` random fields.
pub fn identity_residual(
    a: &OperatorHandle,
    b: &OperatorHandle,
    potential: &PotentialFields,
    lambda: C64,
    mu: C64,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    let omega2 = b
        .omega2()
        .ok_or_else(|| Error::Capability("B must be a multiplication operator".into()))?;
    let pack = build_m(potential, mu, omega2)?;
    let map = CommutatorMap::new(a, b, lambda, mu)?;
    let mut stream = rng::stream(seed, &format!("commutator-probe:{lambda}:{mu}"));
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let f = Field::new(a.grid(), rng::complex_normal_vec(&mut stream, a.grid().len()))?;
        let direct = Field::new(a.grid(), map.apply(f.values())?)?;
        let dec = commutator_decomposed_any(a, &pack, lambda, &f)?;
        worst = worst.max((&direct - &dec).norm_p(2.0) / f.norm_p(2.0));
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommutatorRecord {
    pub lambda: SectorPoint,
    pub mu: SectorPoint,
    pub p: f64,
    pub norm_estimate: f64,
    pub estimator: NormMethod,
    /// `norm * (1 + |lambda|^{3/4}) * |mu|^{2 - alpha}`.
    pub bound_ratio: f64,
    pub alpha: f64,
    pub identity_residual: f64,
    pub grid_n: usize,
}

pub const RECORD_HEADER: [&str; 9] = ["arg_l", "mod_l", "arg_m", "mod_m", "p", "norm", "ratio", "residual", "grid_n"];

pub fn records_table(records: &[CommutatorRecord]) -> Table {
    let mut t = Table::new(RECORD_HEADER);
    for r in records {
        t.push(vec![
            fmt_f64(r.lambda.argument),
            fmt_f64(r.lambda.modulus),
            fmt_f64(r.mu.argument),
            fmt_f64(r.mu.modulus),
            fmt_f64(r.p),
            fmt_f64(r.norm_estimate),
            fmt_f64(r.bound_ratio),
            fmt_f64(r.identity_residual),
            r.grid_n.to_string(),
        ]);
    }
    t
}

pub fn bound_ratio(norm: f64, lambda: f64, mu: f64, alpha: f64) -> f64 {
    norm * (1.0 + lambda.powf(1.0 - GAMMA)) * mu.powf(2.0 - alpha)
}

/// Norm of `C(lambda, mu)` on `L^p`.
pub fn commutator_norm(
    a: &OperatorHandle,
    b: &OperatorHandle,
    lambda: C64,
    mu: C64,
    p: f64,
    opts: &LowerBoundOptions,
) -> Result<(f64, NormMethod)> {
    let map = CommutatorMap::new(a, b, lambda, mu)?;
    let g = a.grid();
    if p == 2.0 && g.dim() == 1 && g.n() <= SVD_LIMIT {
        let dense: CMatrix = map.to_dense(Exec::Sequential)?;
        return Ok((linalg::norm2(&dense), NormMethod::Svd));
    }
    let est = if p == 2.0 {
        crate::spectral::opnorm(&map, p, NormMethod::PNormLowerBound, opts)?
    } else {
        auto_norm(&map, p, opts)?
    };
    Ok((est.value, est.method))
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub p: f64,
    pub alpha: f64,
    pub probes: usize,
    pub seed: u64,
    /// Window in `|lambda|` for the lambda exponent.
    pub lambda_window: (f64, f64),
    pub lower_bound: LowerBoundOptions,
    pub exec: Exec,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            p: 2.0,
            alpha: 0.6,
            probes: 2,
            seed: 0,
            lambda_window: (1e2, 1e4),
            lower_bound: LowerBoundOptions::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub records: Vec<CommutatorRecord>,
    /// Exponent in `|mu|` at the largest `|lambda|`.
    pub mu_fit: Option<FitResult>,
    /// Exponent in `|lambda|` at the smallest `|mu|`.
    pub lambda_fit: Option<FitResult>,
    pub ratio_mu_fit: Option<FitResult>,
    pub ratio_lambda_fit: Option<FitResult>,
    /// Largest bound ratio, the empirical constant of the bound.
    pub max_ratio: f64,
    pub max_residual: f64,
    /// Every sampled norm vanished (constant potential).
    pub degenerate: bool,
    pub mu_ok: bool,
    pub lambda_ok: bool,
    pub ratio_ok: bool,
    pub pass: bool,
}

impl SweepReport {
    pub fn fits(&self) -> Vec<(&'static str, &FitResult)> {
        [
            ("mu", &self.mu_fit),
            ("lambda", &self.lambda_fit),
            ("ratio_mu", &self.ratio_mu_fit),
            ("ratio_lambda", &self.ratio_lambda_fit),
        ]
        .into_iter()
        .filter_map(|(d, f)| f.as_ref().map(|f| (d, f)))
        .collect()
    }
}

/// Sup over sampled arguments at each modulus, sorted by modulus.
fn sup_by_modulus(pairs: impl Iterator<Item = (f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let mut m: Vec<(f64, f64)> = Vec::new();
    for (x, y) in pairs {
        match m.iter_mut().find(|(a, _)| (*a - x).abs() <= 1e-12 * x) {
            Some(e) => e.1 = e.1.max(y),
            None => m.push((x, y)),
        }
    }
    m.sort_by(|a, b| a.0.total_cmp(&b.0));
    m.into_iter().unzip()
}

/// Sweep `C(lambda, mu)` over a grid of sector points and fit its decay.
pub fn bound_sweep(
    a: &OperatorHandle,
    b: &OperatorHandle,
    potential: &PotentialFields,
    lambdas: &[SectorPoint],
    mus: &[SectorPoint],
    opts: &SweepOptions,
) -> Result<SweepReport> {
    let lm: Vec<f64> = lambdas.iter().map(|l| l.modulus).collect();
    let mm: Vec<f64> = mus.iter().map(|m| m.modulus).collect();
    require_decades(&lm, 3.0, "lambda grid")?;
    require_decades(&mm, 3.0, "mu grid")?;
    if !(0.0..0.75).contains(&opts.alpha) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {} violates 1/4 < 1 - alpha",
            opts.alpha
        )));
    }
    let pairs: Vec<(SectorPoint, SectorPoint)> = lambdas
        .iter()
        .flat_map(|l| mus.iter().map(move |m| (*l, *m)))
        .collect();
    let degenerate_v = potential.is_constant();
    let records = par::try_map(opts.exec, &pairs, |(l, m)| {
        let (norm, estimator) = commutator_norm(a, b, l.value(), m.value(), opts.p, &opts.lower_bound)?;
        let residual = if opts.probes == 0 {
            0.0
        } else {
            identity_residual(a, b, potential, l.value(), m.value(), opts.probes, opts.seed)?
        };
        Ok::<_, Error>(CommutatorRecord {
            lambda: *l,
            mu: *m,
            p: opts.p,
            norm_estimate: norm,
            estimator,
            bound_ratio: bound_ratio(norm, l.modulus, m.modulus, opts.alpha),
            alpha: opts.alpha,
            identity_residual: residual,
            grid_n: a.grid().n(),
        })
    })?;
    let max_norm = records.iter().fold(0.0f64, |x, r| x.max(r.norm_estimate));
    let max_ratio = records.iter().fold(0.0f64, |x, r| x.max(r.bound_ratio));
    let max_residual = records.iter().fold(0.0f64, |x, r| x.max(r.identity_residual));
    // Roundoff in A^{-1}(M f) - M A^{-1} f for constant M stays at machine level.
    let degenerate = degenerate_v || max_norm == 0.0;
    if degenerate {
        return Ok(SweepReport {
            records,
            mu_fit: None,
            lambda_fit: None,
            ratio_mu_fit: None,
            ratio_lambda_fit: None,
            max_ratio,
            max_residual,
            degenerate,
            mu_ok: true,
            lambda_ok: true,
            ratio_ok: true,
            pass: true,
        });
    }
    let l_max = lm.iter().copied().fold(0.0, f64::max);
    let m_min = mm.iter().copied().fold(f64::INFINITY, f64::min);
    let at = |v: f64, w: f64| (v - w).abs() <= 1e-12 * w;

    let (x, y) = sup_by_modulus(
        records
            .iter()
            .filter(|r| at(r.lambda.modulus, l_max))
            .map(|r| (r.mu.modulus, r.norm_estimate)),
    );
    let m_hi = x.last().copied().unwrap_or(1.0);
    let mu_fit = loglog_fit(&x, &y, m_hi / 1e3, m_hi)?;

    let (x, y) = sup_by_modulus(
        records
            .iter()
            .filter(|r| at(r.mu.modulus, m_min))
            .map(|r| (r.lambda.modulus, r.norm_estimate)),
    );
    let lambda_fit = loglog_fit(&x, &y, opts.lambda_window.0, opts.lambda_window.1)?;

    let (x, y) = sup_by_modulus(records.iter().map(|r| (r.mu.modulus, r.bound_ratio)));
    let ratio_mu_fit = envelope_slope(&x, &y, 3.0)?;
    let (x, y) = sup_by_modulus(records.iter().map(|r| (r.lambda.modulus, r.bound_ratio)));
    let ratio_lambda_fit = envelope_slope(&x, &y, 3.0)?;

    let mu_ok = mu_fit.slope <= -(2.0 - opts.alpha) + SLOPE_SLACK;
    let lambda_ok = lambda_fit.slope <= -(1.0 - GAMMA) + SLOPE_SLACK;
    let ratio_ok = ratio_mu_fit.slope.abs() <= RATIO_SLOPE && ratio_lambda_fit.slope.abs() <= RATIO_SLOPE;
    Ok(SweepReport {
        records,
        mu_fit: Some(mu_fit),
        lambda_fit: Some(lambda_fit),
        ratio_mu_fit: Some(ratio_mu_fit),
        ratio_lambda_fit: Some(ratio_lambda_fit),
        max_ratio,
        max_residual,
        degenerate,
        mu_ok,
        lambda_ok,
        ratio_ok,
        pass: mu_ok && lambda_ok && ratio_ok,
    })
}
