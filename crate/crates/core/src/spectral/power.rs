//! Imaginary powers `A^{is}` and power-angle fits.

use super::fit::{linear_fit, upper_envelope, FitResult};
use super::norm::{auto_norm, DenseMap, DiagonalMap, LinearMap, LowerBoundOptions, NormMethod, Space};
use crate::grid::Grid;
use crate::linalg::{self, CMatrix, MatFn};
use crate::operator::OperatorHandle;
use crate::par::{self, Exec};
use crate::{Error, Result, C64};

/// Smallest admissible `max |s|` for a power-angle fit.
pub const MIN_SPAN: f64 = 20.0;
/// Smallest admissible number of `s` samples.
pub const MIN_SAMPLES: usize = 8;

fn principal_power(z: C64, s: f64) -> Result<C64> {
    MatFn::ImagPower(s).eval(z)
}

/// `A^{is}` realized as a diagonal or dense map.
pub enum ImaginaryPower {
    Diagonal(DiagonalMap),
    Dense(DenseMap),
}

impl ImaginaryPower {
    pub fn as_map(&self) -> &dyn LinearMap {
        match self {
            ImaginaryPower::Diagonal(d) => d,
            ImaginaryPower::Dense(d) => d,
        }
    }
}

impl LinearMap for ImaginaryPower {
    fn grid(&self) -> &Grid {
        self.as_map().grid()
    }

    fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.as_map().apply(v)
    }

    fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.as_map().apply_adjoint(v)
    }

    fn physical_diagonal(&self) -> Option<Vec<C64>> {
        self.as_map().physical_diagonal()
    }

    fn fourier_diagonal(&self) -> Option<Vec<C64>> {
        self.as_map().fourier_diagonal()
    }

    fn to_dense(&self, exec: Exec) -> Result<CMatrix> {
        self.as_map().to_dense(exec)
    }
}

/// `op^{is}` with the principal branch.
///
/// Multiplication and bilaplacian kinds map to unimodular diagonal symbols;
/// every other kind goes through the dense Schur-Parlett matrix function.
pub fn imaginary_power(op: &OperatorHandle, s: f64) -> Result<ImaginaryPower> {
    imaginary_power_with(op, s, None)
}

/// As [`imaginary_power`], reusing a materialized dense `op`.
pub fn imaginary_power_with(op: &OperatorHandle, s: f64, dense: Option<&CMatrix>) -> Result<ImaginaryPower> {
    let grid = op.grid();
    let pow = |d: &[C64]| d.iter().map(|&z| principal_power(z, s)).collect::<Result<Vec<_>>>();
    if let Some(d) = op.physical_diagonal() {
        return Ok(ImaginaryPower::Diagonal(DiagonalMap::new(grid, pow(d)?, Space::Physical)?));
    }
    if let Some(d) = op.fourier_symbol() {
        return Ok(ImaginaryPower::Diagonal(DiagonalMap::new(grid, pow(d)?, Space::Fourier)?));
    }
    let owned;
    let m = match dense {
        Some(m) => m,
        None => {
            owned = op.to_dense(Exec::default())?;
            &owned
        }
    };
    let f = linalg::matfun(m, MatFn::ImagPower(s))?;
    Ok(ImaginaryPower::Dense(DenseMap::new(grid, f)?))
}

/// One sampled norm of `op^{is}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerSample {
    pub s: f64,
    pub norm: f64,
    pub estimator: NormMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerAngleFit {
    pub fit: FitResult,
    pub samples: Vec<PowerSample>,
}

/// `count` values uniformly spaced in `[-span, span]`.
pub fn s_samples(span: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| -span + 2.0 * span * i as f64 / (count.max(2) - 1) as f64)
        .collect()
}

/// Fit `log ||op^{is}||_p` against `|s|` on the upper envelope.
pub fn fit_power_angle(
    op: &OperatorHandle,
    s: &[f64],
    p: f64,
    opts: &LowerBoundOptions,
    exec: Exec,
) -> Result<PowerAngleFit> {
    if s.len() < MIN_SAMPLES {
        return Err(Error::InsufficientCoverage(format!(
            "{} imaginary-power samples, need {MIN_SAMPLES}",
            s.len()
        )));
    }
    let span = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if span < MIN_SPAN {
        return Err(Error::InsufficientCoverage(format!(
            "samples span |s| <= {span}, need {MIN_SPAN}"
        )));
    }
    let dense = if op.physical_diagonal().is_none() && op.fourier_symbol().is_none() {
        Some(op.to_dense(exec)?)
    } else {
        None
    };
    let samples = par::try_map(exec, s, |&si| {
        let map = imaginary_power_with(op, si, dense.as_ref())?;
        let est = auto_norm(&map, p, opts)?;
        Ok::<_, Error>(PowerSample {
            s: si,
            norm: est.value,
            estimator: est.method,
        })
    })?;
    let abs_s: Vec<f64> = samples.iter().map(|x| x.s.abs()).collect();
    let logs: Vec<f64> = samples.iter().map(|x| x.norm.ln()).collect();
    let (xs, env) = upper_envelope(&abs_s, &logs);
    let fit = linear_fit(&xs, &env)?;
    Ok(PowerAngleFit { fit, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use crate::rng;

    #[test]
    fn zero_power_is_identity() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let l = OperatorHandle::varcoef(crate::operator::CoefficientSet::sine(&g), 1.0).unwrap();
        let id = imaginary_power(&l, 0.0).unwrap().to_dense(Exec::Sequential).unwrap();
        let diff = (&id - CMatrix::identity(16, 16)).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn multiplication_power_is_unimodular() {
        let g = Grid::new(1, 32, 3.0).unwrap();
        let v = Field::from_real_fn(&g, |x| x[0] * x[0]);
        let b = OperatorHandle::multiplication(&v, 1.0).unwrap();
        let o = LowerBoundOptions::default();
        for p in [1.5, 2.0, 4.0] {
            let n = auto_norm(&imaginary_power(&b, 7.0).unwrap(), p, &o).unwrap();
            assert!((n.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn group_law_dense() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let l = OperatorHandle::varcoef(crate::operator::CoefficientSet::sine(&g), 1.0).unwrap();
        let a = imaginary_power(&l, 0.3).unwrap();
        let b = imaginary_power(&l, -1.1).unwrap();
        let ab = imaginary_power(&l, -0.8).unwrap();
        let mut st = rng::stream(1, "group");
        let f = rng::complex_normal_vec(&mut st, 16);
        let x = a.apply(&b.apply(&f).unwrap()).unwrap();
        let y = ab.apply(&f).unwrap();
        let err: f64 = x.iter().zip(&y).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let nf: f64 = f.iter().map(|u| u.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / nf < 1e-8, "{}", err / nf);
    }

    #[test]
    fn fit_requires_samples_and_span() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let o = LowerBoundOptions::default();
        assert!(fit_power_angle(&a, &s_samples(20.0, 7), 2.0, &o, Exec::Sequential).is_err());
        assert!(fit_power_angle(&a, &s_samples(10.0, 41), 2.0, &o, Exec::Sequential).is_err());
        let f = fit_power_angle(&a, &s_samples(20.0, 41), 2.0, &o, Exec::Sequential).unwrap();
        assert!(f.fit.slope.abs() < 1e-12);
    }
}
