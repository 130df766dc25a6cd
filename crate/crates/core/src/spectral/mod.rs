//! Operator norms, sector scans, imaginary powers and exponent fitting.

pub mod fit;
pub mod norm;
pub mod power;
pub mod scan;

pub use fit::{envelope_slope, linear_fit, loglog_fit, FitResult};
pub use norm::{
    auto_norm, opnorm, DenseMap, DiagonalMap, LinearMap, LowerBoundOptions, NormEstimate, NormMethod, Product,
    ResolventMap, Space,
};
pub use power::{fit_power_angle, imaginary_power, ImaginaryPower, PowerAngleFit, PowerSample};
pub use scan::{
    estimate_sector_angle, sector_scan, sector_scan_fans, Quantity, ScanOptions, ScanRecord, SectorAngleEstimate,
    SectorPoint, SectorScan,
};

use crate::Result;

/// Bound `||(lambda + A)^{-1}|| <= c / (1 + |lambda|)` extracted from a scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventBound {
    /// `max estimate * (1 + |lambda|)` over the records.
    pub constant: f64,
    /// Envelope slope of `estimate * (1 + |lambda|)` in `|lambda|`.
    pub trend: FitResult,
}

/// Fit the resolvent bound from records of the unscaled resolvent norm.
pub fn resolvent_bound(records: &[ScanRecord]) -> Result<ResolventBound> {
    let x: Vec<f64> = records.iter().map(|r| r.point.modulus).collect();
    let y: Vec<f64> = records
        .iter()
        .map(|r| r.estimate * (1.0 + r.point.modulus))
        .collect();
    fit::require_decades(&x, 3.0, "resolvent bound moduli")?;
    let constant = y.iter().fold(0.0f64, |m, v| m.max(*v));
    let trend = envelope_slope(&x, &y, 3.0)?;
    Ok(ResolventBound { constant, trend })
}
