//! Experiment orchestration behind each subcommand.

use crate::config::{OperatorChoice, RunConfig};
use crate::output::Output;
use hoslab_core::commutator::{self, bound_sweep, identity_residual, SweepOptions};
use hoslab_core::csv::{fmt_f64, Table};
use hoslab_core::linalg::CMatrix;
use hoslab_core::operator::OperatorHandle;
use hoslab_core::potential::{eval_potential, mollify, verify_growth_condition, PotentialFamily, PotentialFields, PotentialSpec};
use hoslab_core::semigroup::{
    analyticity_check, snapshot_table, splitting_order, strang_against, EvolveMethod, Propagator,
};
use hoslab_core::spectral::fit::fits_table;
use hoslab_core::spectral::power::s_samples;
use hoslab_core::spectral::scan::{log_space, records_table};
use hoslab_core::spectral::{
    estimate_sector_angle, fit_power_angle, sector_scan_fans, LowerBoundOptions, ScanOptions, SectorAngleEstimate,
};
use hoslab_core::{rng, Error, Exec, Field, Grid, C64};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckPotential,
    ScanSector,
    Bip,
    Commutator,
    Evolve,
    Full,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckPotential => "check-potential",
            Command::ScanSector => "scan-sector",
            Command::Bip => "bip",
            Command::Commutator => "commutator",
            Command::Evolve => "evolve",
            Command::Full => "full",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [
            Command::CheckPotential,
            Command::ScanSector,
            Command::Bip,
            Command::Commutator,
            Command::Evolve,
            Command::Full,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

/// Why a run stopped before producing a verdict.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration, unmet precondition or unusable output directory.
    Usage(String),
    /// A numerical step broke down.
    Numerical(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularShift(_) | Error::NoConvergence { .. } | Error::BranchCut(_) => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Run<T> = Result<T, Failure>;

pub struct Model {
    pub grid: Grid,
    pub potential: PotentialFields,
    pub a: OperatorHandle,
    pub b: OperatorHandle,
}

/// Dense normal matrix with eigenvalues on the rays `+-psi`, moduli `1e-1..1e3`.
pub fn synthetic_ray(grid: &Grid, psi: f64, seed: u64) -> Run<OperatorHandle> {
    let n = grid.len();
    let mut s = rng::stream(seed, "synthetic-ray");
    let z = CMatrix::from_vec(n, n, rng::complex_normal_vec(&mut s, n * n));
    let q = z.qr().q();
    let half = (n / 2).max(2);
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i != j {
            return C64::new(0.0, 0.0);
        }
        let r = 10f64.powf(-1.0 + 4.0 * (i / 2) as f64 / (half - 1) as f64);
        C64::from_polar(r, if i % 2 == 0 { psi } else { -psi })
    });
    Ok(OperatorHandle::dense(grid, &q * d * q.adjoint())?)
}

pub fn build_model(cfg: &RunConfig) -> Run<Model> {
    let grid = cfg.grid();
    let potential = eval_potential(&cfg.potential, &grid)?;
    let a = match cfg.operator {
        OperatorChoice::Bilaplacian => OperatorHandle::bilaplacian(&grid, cfg.omega1)?,
        OperatorChoice::Varcoef => OperatorHandle::varcoef(cfg.coefficient_preset.build(&grid), cfg.omega1)?,
        OperatorChoice::SyntheticRay => synthetic_ray(&grid, cfg.ray_angle, cfg.seed)?,
    };
    let b = OperatorHandle::multiplication(potential.value(), cfg.omega2)?;
    Ok(Model { grid, potential, a, b })
}

fn lower_bound(cfg: &RunConfig) -> LowerBoundOptions {
    LowerBoundOptions {
        seed: cfg.seed,
        ..LowerBoundOptions::default()
    }
}

fn row(section: &str, key: impl fmt::Display, value: impl Into<String>) -> Vec<String> {
    vec![section.to_string(), key.to_string(), value.into()]
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

/// Growth certificate on the raw family plus mollifier consistency.
pub fn check_potential(cfg: &RunConfig, out: &mut Output) -> Run<()> {
    let grid = cfg.grid();
    let family = match &cfg.potential.family {
        PotentialFamily::PeriodicSurrogate { r } => PotentialFamily::PowerLaw { r: *r },
        f => f.clone(),
    };
    let spec = PotentialSpec {
        family,
        ..cfg.potential.clone()
    };
    let rep = verify_growth_condition(&spec, &grid)?;
    let mut t = Table::new(["section", "key", "value"]);
    t.push(row("growth", "family", spec.family.name()));
    t.push(row("growth", "alpha", fmt_f64(rep.alpha)));
    t.push(row("growth", "c_claimed", fmt_f64(spec.c)));
    t.push(row("growth", "c_measured", fmt_f64(rep.c_measured)));
    t.push(row("growth", "growth_factor", fmt_f64(rep.growth_factor)));
    t.push(row("growth", "stable", flag(rep.stable)));
    t.push(row(
        "growth",
        "alpha_min_measured",
        rep.alpha_min_measured.map_or("nan".into(), fmt_f64),
    ));
    t.push(row("growth", "certificate_holds", flag(rep.certificate_holds)));
    t.push(row("growth", "pass", flag(rep.pass)));
    for (hw, sup) in &rep.box_sups {
        t.push(row("box_sup", fmt_f64(*hw), fmt_f64(*sup)));
    }

    let v = eval_potential(&spec, &grid)?;
    let radius = grid.half_width() / 2.0;
    let mut dists = Vec::new();
    for level in [4u32, 8, 16, 32] {
        let vn = mollify(&spec, &grid, level)?;
        let d = (0..grid.len())
            .filter(|&i| grid.point(i).iter().take(grid.dim()).all(|x| x.abs() <= radius))
            .map(|i| (vn.value().values()[i] - v.value().values()[i]).norm())
            .fold(0.0, f64::max);
        t.push(row("mollify", level, fmt_f64(d)));
        dists.push(d);
    }
    let scale = v.max().abs().max(1.0);
    let mollify_ok = dists.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale);
    out.table("potential_report.csv", &t)?;
    out.metric("growth.c_measured", rep.c_measured);
    out.metric("growth.growth_factor", rep.growth_factor);
    out.check("growth_condition", rep.pass);
    out.check("mollify_consistency", mollify_ok);
    Ok(())
}

pub const ANGLE_HEADER: [&str; 8] = [
    "operator",
    "p",
    "theta",
    "fan_sup",
    "implied_angle",
    "max_ray_slope",
    "flat",
    "singular_hits",
];

/// Sector scans of the named operators; returns one estimate per `(name, p)`.
pub fn scan_sector(
    cfg: &RunConfig,
    ops: &[(&str, &OperatorHandle)],
    exec: Exec,
    out: &mut Output,
) -> Run<Vec<(String, f64, SectorAngleEstimate)>> {
    let mut records = Vec::new();
    let mut angles = Table::new(ANGLE_HEADER);
    let mut ests = Vec::new();
    for (name, op) in ops {
        for &p in &cfg.ps {
            let opts = ScanOptions {
                p,
                lower_bound: lower_bound(cfg),
                exec,
                ..ScanOptions::default()
            };
            let scan = sector_scan_fans(op, &cfg.thetas, &cfg.moduli, &opts)?;
            let est = estimate_sector_angle(&scan, &cfg.thetas)?;
            for d in &est.per_theta {
                angles.push(vec![
                    name.to_string(),
                    fmt_f64(p),
                    fmt_f64(d.theta),
                    fmt_f64(d.fan_sup),
                    fmt_f64(d.implied_angle),
                    fmt_f64(d.max_ray_slope),
                    flag(d.flat),
                    d.singular_hits.to_string(),
                ]);
            }
            out.metric(&format!("angle.{name}.p{p}"), est.angle);
            if let Some(t) = est.smallest_flat_theta {
                out.metric(&format!("flat_theta.{name}.p{p}"), t);
            }
            records.extend(scan.records);
            ests.push((name.to_string(), p, est));
        }
    }
    out.table("scan.csv", &records_table(&records))?;
    out.table("sector_angle.csv", &angles)?;
    Ok(ests)
}

pub const BIP_HEADER: [&str; 5] = ["operator", "p", "s", "norm", "estimator"];
/// Largest admissible power-angle slope when the angle is claimed to be 0.
pub const BIP_SLOPE: f64 = 0.05;
pub const UNIMODULAR_TOL: f64 = 1e-12;

/// Imaginary-power fits of `A` and `B` at every configured `p`.
pub fn bip(cfg: &RunConfig, model: &Model, exec: Exec, out: &mut Output) -> Run<()> {
    let s = s_samples(20.0, 41);
    let mut t = Table::new(BIP_HEADER);
    let mut fits = Vec::new();
    let mut ok_a = true;
    let mut ok_b = true;
    for (name, op) in [("A", &model.a), ("B", &model.b)] {
        for &p in &cfg.ps {
            let fit = fit_power_angle(op, &s, p, &lower_bound(cfg), exec)?;
            for smp in &fit.samples {
                t.push(vec![
                    name.into(),
                    fmt_f64(p),
                    fmt_f64(smp.s),
                    fmt_f64(smp.norm),
                    smp.estimator.to_string(),
                ]);
            }
            let slope = fit.fit.slope;
            if name == "B" {
                let unimodular = fit.samples.iter().all(|x| (x.norm - 1.0).abs() <= UNIMODULAR_TOL);
                ok_b &= unimodular && slope <= BIP_SLOPE;
            } else if cfg.operator == OperatorChoice::Bilaplacian {
                ok_a &= slope <= BIP_SLOPE;
            } else {
                ok_a &= slope < FRAC_PI_2;
            }
            out.metric(&format!("power_slope.{name}.p{p}"), slope);
            fits.push((format!("{name}:p={p}"), fit.fit));
        }
    }
    out.table("bip.csv", &t)?;
    out.table("bip_fits.csv", &fits_table(fits.iter().map(|(d, f)| (d.as_str(), f))))?;
    out.check("bip_A", ok_a);
    out.check("bip_B", ok_b);
    Ok(())
}

/// Identity residual accepted for the commutator decomposition.
pub const IDENTITY_TOL: f64 = 1e-5;

pub fn commutator(cfg: &RunConfig, model: &Model, exec: Exec, out: &mut Output) -> Run<()> {
    let one = C64::new(1.0, 0.0);
    let residual = identity_residual(&model.a, &model.b, &model.potential, one, one, cfg.probes, cfg.seed)?;
    let opts = SweepOptions {
        alpha: cfg.potential.alpha,
        probes: cfg.probes,
        seed: cfg.seed,
        lower_bound: lower_bound(cfg),
        exec,
        ..SweepOptions::default()
    };
    let rep = bound_sweep(&model.a, &model.b, &model.potential, &cfg.lambda_grid, &cfg.mu_grid, &opts)?;
    out.table("commutator.csv", &commutator::records_table(&rep.records))?;
    out.table("commutator_fits.csv", &fits_table(rep.fits()))?;
    out.metric("commutator.identity_residual", residual);
    out.metric("commutator.max_ratio", rep.max_ratio);
    for (d, f) in rep.fits() {
        out.metric(&format!("commutator.slope.{d}"), f.slope);
    }
    out.check("commutator_identity", residual <= IDENTITY_TOL);
    out.check("commutator_decay", rep.pass);
    Ok(())
}

/// Accepted distance of the measured splitting order from 2.
pub const ORDER_TOL: f64 = 0.2;

fn initial_field(grid: &Grid) -> Field {
    Field::from_real_fn(grid, |x| (-(x[0] * x[0] + x[1] * x[1])).exp())
}

pub fn evolve(cfg: &RunConfig, model: &Model, exec: Exec, out: &mut Output) -> Run<()> {
    let op = OperatorHandle::sum(&model.a, &model.b)?;
    let prop = Propagator::new(&op, exec)?;
    let f = initial_field(&model.grid);
    let splittable = model.a.fourier_symbol().is_some();
    if cfg.method == EvolveMethod::StrangSplitting && !splittable {
        return Err(Failure::Usage("strang splitting needs a Fourier-diagonal A".into()));
    }
    let mut results = Vec::new();
    for &t in &cfg.t_list {
        let r = match cfg.method {
            EvolveMethod::Eigendecomposition => prop.evolve(t, &f)?,
            EvolveMethod::StrangSplitting => strang_against(&prop, &op, t, &f, cfg.steps)?,
        };
        if let Some(e) = r.error_vs_oracle {
            out.metric(&format!("evolve.error.t{t}"), e);
        }
        results.push(r);
    }
    out.table("evolve_snapshots.csv", &snapshot_table(&results))?;

    if splittable {
        let steps = [cfg.steps / 4, cfg.steps / 2, cfg.steps];
        let mut t_order = Table::new(["t", "steps", "error", "ratio"]);
        let mut ok = true;
        for &t in &cfg.t_list {
            let so = splitting_order(&prop, &op, t, &f, &steps, exec)?;
            for (k, (&s, &e)) in so.steps.iter().zip(&so.errors).enumerate() {
                let ratio = if k == 0 { f64::NAN } else { so.errors[k - 1] / e };
                t_order.push(vec![fmt_f64(t), s.to_string(), fmt_f64(e), fmt_f64(ratio)]);
                if k > 0 {
                    out.metric(&format!("evolve.ratio.t{t}.{}to{s}", so.steps[k - 1]), ratio);
                }
            }
            out.metric(&format!("evolve.order.t{t}"), so.order.slope);
            ok &= (so.order.slope - 2.0).abs() <= ORDER_TOL;
        }
        out.table("evolve_order.csv", &t_order)?;
        out.check("splitting_order", ok);
    }

    if prop.eigenvalues().is_some() {
        let ts = log_space(1e-3, 1.0, 31);
        let rep = analyticity_check(&prop, &ts)?;
        let mut t = Table::new(["t", "norm", "scaled"]);
        for (ti, n) in &rep.points {
            t.push(vec![fmt_f64(*ti), fmt_f64(*n), fmt_f64(ti * n)]);
        }
        out.table("analyticity.csv", &t)?;
        out.metric("analyticity.sup", rep.sup);
        out.check("analyticity", rep.pass);
    }
    Ok(())
}

/// Run one subcommand; `Ok(verdict)` once the manifest is written.
pub fn run(cmd: Command, cfg: &RunConfig, exec: Exec) -> Run<bool> {
    let mut out = Output::new(&cfg.output_dir)?;
    match cmd {
        Command::CheckPotential => out.timed("check_potential", |o| check_potential(cfg, o))?,
        Command::ScanSector => {
            let model = build_model(cfg)?;
            let ests = out.timed("scan_sector", |o| scan_sector(cfg, &[("A", &model.a)], exec, o))?;
            let ok = ests
                .iter()
                .all(|(_, _, e)| e.angle < FRAC_PI_2 && e.smallest_flat_theta.is_some());
            out.check("sectoriality_A", ok);
        }
        Command::Bip => {
            let model = build_model(cfg)?;
            out.timed("bip", |o| bip(cfg, &model, exec, o))?;
        }
        Command::Commutator => {
            let model = build_model(cfg)?;
            out.timed("commutator", |o| commutator(cfg, &model, exec, o))?;
        }
        Command::Evolve => {
            let model = build_model(cfg)?;
            out.timed("evolve", |o| evolve(cfg, &model, exec, o))?;
        }
        Command::Full => {
            out.timed("check_potential", |o| check_potential(cfg, o))?;
            let model = build_model(cfg)?;
            let ests = out.timed("scan_sector", |o| {
                scan_sector(cfg, &[("A", &model.a), ("B", &model.b)], exec, o)
            })?;
            let worst = |name: &str| {
                ests.iter()
                    .filter(|(n, _, _)| n == name)
                    .fold(0.0f64, |m, (_, _, e)| m.max(e.angle))
            };
            let flat_a = ests
                .iter()
                .filter(|(n, _, _)| n == "A")
                .all(|(_, _, e)| e.smallest_flat_theta.is_some());
            out.check("sectoriality_A", worst("A") < FRAC_PI_2 && flat_a);
            out.check("sectoriality_B", worst("B") < FRAC_PI_2);
            out.check("angle_sum", worst("A") + worst("B") < PI);
            out.timed("bip", |o| bip(cfg, &model, exec, o))?;
            out.timed("commutator", |o| commutator(cfg, &model, exec, o))?;
            let verdict = out.passed();
            out.check("monniaux_pruss", verdict);
        }
    }
    Ok(out.finish(cmd.name(), &cfg.entries)?)
}
