//! Sector scans of `||lambda (lambda + A)^{-1}||_p` and sector-angle estimation.

use super::fit::{envelope_slope, require_decades};
use super::norm::{auto_norm, LowerBoundOptions, NormMethod, ResolventMap};
use crate::csv::{fmt_f64, Table};
use crate::operator::{OperatorHandle, DENSE_LIMIT};
use crate::par::{self, Exec};
use crate::{Error, Result, C64};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Rays per fan.
pub const RAYS_PER_FAN: usize = 9;
/// Maximum per-ray envelope slope for a flat fan.
pub const FLAT_SLOPE: f64 = 0.02;
/// Decades fitted at the top of the modulus range.
pub const FIT_DECADES: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectorPoint {
    pub modulus: f64,
    /// In `(-pi, pi]`.
    pub argument: f64,
}

impl SectorPoint {
    pub fn new(modulus: f64, argument: f64) -> Result<Self> {
        if !(modulus > 0.0 && modulus.is_finite()) || !(argument > -PI && argument <= PI) {
            return Err(Error::InvalidArgument(format!(
                "sector point ({modulus}, {argument}) outside (0, inf) x (-pi, pi]"
            )));
        }
        Ok(SectorPoint { modulus, argument })
    }

    pub fn from_complex(z: C64) -> Result<Self> {
        Self::new(z.norm(), z.arg())
    }

    pub fn value(&self) -> C64 {
        C64::from_polar(self.modulus, self.argument)
    }

    /// `lambda` in `Sigma_phi`, i.e. `|arg lambda| < phi`.
    pub fn in_sector(&self, phi: f64) -> bool {
        self.argument.abs() < phi
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    ResolventNorm,
    ScaledResolventNorm,
    ImagPowerNorm,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::ResolventNorm => "resolvent_norm",
            Quantity::ScaledResolventNorm => "scaled_resolvent_norm",
            Quantity::ImagPowerNorm => "imag_power_norm",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord {
    pub kind: String,
    pub point: SectorPoint,
    pub quantity: Quantity,
    pub p: f64,
    pub estimate: f64,
    pub estimator: NormMethod,
    pub grid_n: usize,
    pub grid_l: f64,
}

pub const SCAN_HEADER: [&str; 8] = ["kind", "p", "arg", "modulus", "estimate", "estimator", "grid_n", "grid_L"];

pub fn records_table(records: &[ScanRecord]) -> Table {
    let mut t = Table::new(SCAN_HEADER);
    for r in records {
        t.push(vec![
            r.kind.clone(),
            fmt_f64(r.p),
            fmt_f64(r.point.argument),
            fmt_f64(r.point.modulus),
            fmt_f64(r.estimate),
            r.estimator.to_string(),
            r.grid_n.to_string(),
            fmt_f64(r.grid_l),
        ]);
    }
    t
}

/// `count` values uniformly spaced in `[-(pi - theta), pi - theta]`.
pub fn ray_arguments(theta: f64, count: usize) -> Vec<f64> {
    let a = PI - theta;
    if count == 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|i| -a + 2.0 * a * i as f64 / (count - 1) as f64)
        .collect()
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// 13 moduli from `1e-2` to `1e4`.
pub fn default_moduli() -> Vec<f64> {
    log_space(1e-2, 1e4, 13)
}

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub p: f64,
    pub quantity: Quantity,
    pub rays: usize,
    pub lower_bound: LowerBoundOptions,
    pub exec: Exec,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            p: 2.0,
            quantity: Quantity::ScaledResolventNorm,
            rays: RAYS_PER_FAN,
            lower_bound: LowerBoundOptions::default(),
            exec: Exec::default(),
        }
    }
}

/// Records plus points skipped because `-lambda` hit the discrete spectrum.
#[derive(Clone, Debug, Default)]
pub struct SectorScan {
    pub records: Vec<ScanRecord>,
    pub skipped: Vec<(SectorPoint, String)>,
}

impl SectorScan {
    pub fn merge(mut self, other: SectorScan) -> SectorScan {
        self.records.extend(other.records);
        self.skipped.extend(other.skipped);
        self
    }
}

/// Scan `||lambda (lambda + op)^{-1}||_p` over one fan.
pub fn sector_scan(op: &OperatorHandle, theta: f64, moduli: &[f64], opts: &ScanOptions) -> Result<SectorScan> {
    sector_scan_fans(op, &[theta], moduli, opts)
}

/// Scan the union of the fans for every `theta`.
pub fn sector_scan_fans(
    op: &OperatorHandle,
    thetas: &[f64],
    moduli: &[f64],
    opts: &ScanOptions,
) -> Result<SectorScan> {
    if opts.quantity == Quantity::ImagPowerNorm {
        return Err(Error::InvalidArgument("sector scans sample resolvent quantities".into()));
    }
    let mut args: Vec<f64> = Vec::new();
    for &theta in thetas {
        if !(theta > 0.0 && theta < PI) {
            return Err(Error::InvalidArgument(format!("theta = {theta} outside (0, pi)")));
        }
        for a in ray_arguments(theta, opts.rays) {
            if !args.iter().any(|b| (a - b).abs() < 1e-12) {
                args.push(a);
            }
        }
    }
    if let Some(m) = moduli.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidArgument(format!("modulus {m} must be positive")));
    }
    let diagonal = op.fourier_symbol().is_some() || op.physical_diagonal().is_some();
    let dense = if !diagonal && opts.p == 2.0 && op.grid().len() <= DENSE_LIMIT {
        Some(Arc::new(op.to_dense(opts.exec)?))
    } else {
        None
    };
    let points: Vec<SectorPoint> = args
        .iter()
        .flat_map(|&a| moduli.iter().map(move |&m| SectorPoint { modulus: m, argument: a }))
        .collect();
    let lb = &opts.lower_bound;
    let outcomes = par::map(opts.exec, &points, |pt| -> Result<std::result::Result<ScanRecord, String>> {
        let lambda = pt.value();
        let scale = match opts.quantity {
            Quantity::ScaledResolventNorm => lambda,
            _ => C64::new(1.0, 0.0),
        };
        let map = match &dense {
            Some(d) => ResolventMap::with_dense(op, lambda, scale, d.clone()),
            None => ResolventMap::new(op, lambda, scale),
        };
        let est = match map.and_then(|m| auto_norm(&m, opts.p, lb)) {
            Ok(e) => e,
            Err(Error::SingularShift(msg)) => return Ok(Err(msg)),
            Err(e) => return Err(e),
        };
        Ok(Ok(ScanRecord {
            kind: op.kind().to_string(),
            point: *pt,
            quantity: opts.quantity,
            p: opts.p,
            estimate: est.value,
            estimator: est.method,
            grid_n: op.grid().n(),
            grid_l: op.grid().half_width(),
        }))
    });
    let mut scan = SectorScan::default();
    for (pt, o) in points.iter().zip(outcomes) {
        match o? {
            Ok(r) => scan.records.push(r),
            Err(msg) => scan.skipped.push((*pt, msg)),
        }
    }
    Ok(scan)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaDiagnostic {
    pub theta: f64,
    /// Largest sampled estimate over the fan.
    pub fan_sup: f64,
    /// Spectral angle implied by `fan_sup` (normal-operator geometry).
    pub implied_angle: f64,
    /// Largest per-ray envelope slope over the top decades.
    pub max_ray_slope: f64,
    pub flat: bool,
    pub singular_hits: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorAngleEstimate {
    pub angle: f64,
    pub smallest_flat_theta: Option<f64>,
    pub per_theta: Vec<ThetaDiagnostic>,
}

/// Estimate the spectral angle from a union of fan scans.
///
/// For each candidate `theta` the fan `|arg lambda| <= pi - theta` gives a
/// sampled sup `M(theta)` of `||lambda (lambda + A)^{-1}||`. For a normal
/// operator with spectrum on the rays `+-psi` one has
/// `M(theta) = 1 / sin(theta - psi)`, so `theta - asin(1 / M(theta))` recovers
/// `psi`; the estimate is the largest such value over `theta <= pi/2`. A
/// singular sample at argument `a` means spectrum on the ray `pi - |a|`. Each
/// fan is also tested for growth along rays (envelope slope at most
/// [`FLAT_SLOPE`]).
pub fn estimate_sector_angle(scan: &SectorScan, thetas: &[f64]) -> Result<SectorAngleEstimate> {
    let moduli: Vec<f64> = scan.records.iter().map(|r| r.point.modulus).collect();
    require_decades(&moduli, FIT_DECADES, "sector scan moduli")?;
    let tol = 1e-9;
    let mut per_theta = Vec::new();
    for &theta in thetas {
        let limit = PI - theta + tol;
        let fan: Vec<&ScanRecord> = scan
            .records
            .iter()
            .filter(|r| r.point.argument.abs() <= limit)
            .collect();
        let singular: Vec<f64> = scan
            .skipped
            .iter()
            .filter(|(p, _)| p.argument.abs() <= limit)
            .map(|(p, _)| p.argument)
            .collect();
        let fan_sup = fan.iter().fold(0.0f64, |m, r| m.max(r.estimate));
        let mut args: Vec<f64> = fan.iter().map(|r| r.point.argument).collect();
        args.sort_by(f64::total_cmp);
        args.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut max_ray_slope = f64::NEG_INFINITY;
        for a in &args {
            let (x, y): (Vec<f64>, Vec<f64>) = fan
                .iter()
                .filter(|r| (r.point.argument - a).abs() < 1e-12)
                .map(|r| (r.point.modulus, r.estimate))
                .unzip();
            let slope = match envelope_slope(&x, &y, FIT_DECADES) {
                Ok(f) => f.slope,
                // All-zero rays carry no trend.
                Err(Error::InsufficientCoverage(_)) if y.iter().all(|v| *v == 0.0) => 0.0,
                Err(e) => return Err(e),
            };
            max_ray_slope = max_ray_slope.max(slope);
        }
        let mut implied = if theta <= PI / 2.0 + tol && fan_sup > 0.0 {
            (theta - (1.0 / fan_sup).min(1.0).asin()).max(0.0)
        } else {
            0.0
        };
        for a in &singular {
            implied = implied.max(PI - a.abs());
        }
        let flat = singular.is_empty() && max_ray_slope <= FLAT_SLOPE;
        per_theta.push(ThetaDiagnostic {
            theta,
            fan_sup,
            implied_angle: implied,
            max_ray_slope,
            flat,
            singular_hits: singular.len(),
        });
    }
    let angle = per_theta.iter().fold(0.0f64, |m, d| m.max(d.implied_angle));
    let smallest_flat_theta = per_theta
        .iter()
        .filter(|d| d.flat)
        .map(|d| d.theta)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |v| v.min(t))));
    Ok(SectorAngleEstimate {
        angle,
        smallest_flat_theta,
        per_theta,
    })
}

impl fmt::Display for SectorAngleEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "angle {:.4}", self.angle)?;
        if let Some(t) = self.smallest_flat_theta {
            write!(f, ", flat from theta = {t:.4}")?;
        }
        Ok(())
    }
}

/// Candidate half-angles used by the scanners: `0.05, 0.1, ..., 1.5, pi/2`.
pub fn default_thetas() -> Vec<f64> {
    let mut t = vec![0.05];
    t.extend((1..=15).map(|i| 0.1 * i as f64));
    t.push(PI / 2.0);
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn rays_cover_the_fan() {
        let r = ray_arguments(0.1, 9);
        assert_eq!(r.len(), 9);
        assert!((r[0] + PI - 0.1).abs() < 1e-15);
        assert!((r[8] - PI + 0.1).abs() < 1e-15);
        assert_eq!(r[4], 0.0);
    }

    #[test]
    fn sector_point_membership() {
        let p = SectorPoint::new(1.0, 0.5).unwrap();
        assert!(p.in_sector(0.6));
        assert!(!p.in_sector(0.5));
        assert!(SectorPoint::new(0.0, 0.0).is_err());
        assert!(SectorPoint::new(1.0, -PI).is_err());
    }

    #[test]
    fn bilaplacian_real_lambda_one() {
        let g = Grid::new(1, 32, PI).unwrap();
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let scan = sector_scan(&a, 0.1, &[1.0], &ScanOptions { rays: 9, ..Default::default() }).unwrap();
        let rec = scan.records.iter().find(|r| r.point.argument == 0.0).unwrap();
        assert!((rec.estimate - 0.5).abs() < 1e-15);
        assert_eq!(rec.estimator, NormMethod::ExactMultiplier);
    }

    #[test]
    fn small_modulus_vanishes() {
        let g = Grid::new(1, 16, PI).unwrap();
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let scan = sector_scan(&a, 0.5, &[1e-8], &ScanOptions::default()).unwrap();
        assert!(scan.records.iter().all(|r| r.estimate < 1e-7));
    }

    #[test]
    fn coverage_is_required() {
        let g = Grid::new(1, 16, PI).unwrap();
        let a = OperatorHandle::bilaplacian(&g, 1.0).unwrap();
        let scan = sector_scan(&a, 0.5, &[1.0, 10.0], &ScanOptions::default()).unwrap();
        assert!(matches!(
            estimate_sector_angle(&scan, &[0.5]),
            Err(Error::InsufficientCoverage(_))
        ));
    }
}
