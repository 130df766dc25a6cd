//! Flat `key = value` run configuration.
//!
//! Keys are dotted (`grid.n`, `potential.alpha`, ...), one per line, `#`
//! starts a comment. Values are resolved in the order defaults, config file,
//! environment (`HOSLAB_GRID__N` sets `grid.n`), command line flags.

use hoslab_core::operator::CoefficientPreset;
use hoslab_core::potential::{PotentialFamily, PotentialSpec};
use hoslab_core::semigroup::EvolveMethod;
use hoslab_core::spectral::scan::{default_thetas, log_space};
use hoslab_core::spectral::SectorPoint;
use hoslab_core::Grid;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

pub const ENV_PREFIX: &str = "HOSLAB_";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Parsed<T> = Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Parsed<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorChoice {
    Bilaplacian,
    Varcoef,
    /// Dense normal matrix with spectrum on the rays `+-ray_angle`.
    SyntheticRay,
}

impl OperatorChoice {
    pub fn name(self) -> &'static str {
        match self {
            OperatorChoice::Bilaplacian => "bilaplacian",
            OperatorChoice::Varcoef => "varcoef",
            OperatorChoice::SyntheticRay => "synthetic_ray",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
    pub potential: PotentialSpec,
    pub omega1: f64,
    pub omega2: f64,
    pub operator: OperatorChoice,
    pub coefficient_preset: CoefficientPreset,
    pub ray_angle: f64,
    pub thetas: Vec<f64>,
    pub moduli: Vec<f64>,
    pub ps: Vec<f64>,
    pub lambda_grid: Vec<SectorPoint>,
    pub mu_grid: Vec<SectorPoint>,
    pub probes: usize,
    pub t_list: Vec<f64>,
    pub method: EvolveMethod,
    pub steps: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Effective key/value pairs, echoed into the manifest.
    pub entries: BTreeMap<String, String>,
}

pub fn defaults() -> BTreeMap<String, String> {
    let thetas: Vec<String> = default_thetas().iter().map(|t| format!("{t}")).collect();
    [
        ("grid.dim", "1".to_string()),
        ("grid.n", "128".into()),
        ("grid.half_width", format!("{}", 3.0 * PI)),
        ("potential.family", "periodic_surrogate".into()),
        ("potential.r", "2".into()),
        ("potential.alpha", "0.6".into()),
        ("potential.c", "2".into()),
        ("potential.v0", "1".into()),
        ("shifts.omega1", "1".into()),
        ("shifts.omega2", "1".into()),
        ("operator.kind", "bilaplacian".into()),
        ("operator.coefficient_preset", "bilaplacian".into()),
        ("operator.ray_angle", format!("{}", PI / 4.0)),
        ("scan.thetas", thetas.join(",")),
        ("scan.moduli", "1e-2:1e4:13".into()),
        ("scan.ps", "2".into()),
        ("commutator.lambda_grid", "1:1e4:13".into()),
        ("commutator.mu_grid", "1:1e4:13".into()),
        ("commutator.arguments", format!("0,{}", PI / 2.0)),
        ("commutator.probes", "5".into()),
        ("evolve.t_list", "0.1".into()),
        ("evolve.method", "strang_splitting".into()),
        ("evolve.steps", "256".into()),
        ("seed", "0".into()),
        ("output_dir", "hoslab-out".into()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Parse `key = value` lines into `map`, rejecting unknown keys.
pub fn merge_text(map: &mut BTreeMap<String, String>, text: &str) -> Parsed<()> {
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value, got {raw:?}", no + 1));
        };
        set(map, k.trim(), v.trim())?;
    }
    Ok(())
}

/// Apply `HOSLAB_*` variables; `__` separates key segments.
pub fn merge_env(map: &mut BTreeMap<String, String>, vars: impl IntoIterator<Item = (String, String)>) -> Parsed<()> {
    for (k, v) in vars {
        if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
            let key = rest.to_ascii_lowercase().replace("__", ".");
            set(map, &key, v.trim())?;
        }
    }
    Ok(())
}

pub fn set(map: &mut BTreeMap<String, String>, key: &str, value: &str) -> Parsed<()> {
    match map.get_mut(key) {
        Some(slot) => {
            *slot = value.to_string();
            Ok(())
        }
        None => err(format!("unknown configuration key {key:?}")),
    }
}

/// Defaults, then the optional file, then the environment.
pub fn load(path: Option<&Path>, vars: impl IntoIterator<Item = (String, String)>) -> Parsed<BTreeMap<String, String>> {
    let mut map = defaults();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
        merge_text(&mut map, &text)?;
    }
    merge_env(&mut map, vars)?;
    Ok(map)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Parsed<T> {
    v.parse().map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}")))
}

/// Comma list, or `lo:hi:count` for log-spaced values.
fn list(key: &str, v: &str) -> Parsed<Vec<f64>> {
    let out: Vec<f64> = if let [lo, hi, count] = v.split(':').collect::<Vec<_>>()[..] {
        let (lo, hi): (f64, f64) = (num(key, lo.trim())?, num(key, hi.trim())?);
        let count: usize = num(key, count.trim())?;
        if !(lo > 0.0 && hi > lo && count >= 2) {
            return err(format!("{key}: log range needs 0 < lo < hi and count >= 2"));
        }
        log_space(lo, hi, count)
    } else {
        v.split(',').map(|s| num(key, s.trim())).collect::<Parsed<_>>()?
    };
    if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
        return err(format!("{key}: expected finite values"));
    }
    Ok(out)
}

fn points(key: &str, moduli: &[f64], args: &[f64]) -> Parsed<Vec<SectorPoint>> {
    let mut pts = Vec::new();
    for &a in args {
        for &m in moduli {
            pts.push(SectorPoint::new(m, a).map_err(|e| ConfigError(format!("{key}: {e}")))?);
        }
    }
    Ok(pts)
}

impl RunConfig {
    pub fn from_map(map: BTreeMap<String, String>) -> Parsed<Self> {
        let g = |k: &str| map[k].as_str();
        let dim: usize = num("grid.dim", g("grid.dim"))?;
        let n: usize = num("grid.n", g("grid.n"))?;
        let half_width: f64 = num("grid.half_width", g("grid.half_width"))?;
        Grid::new(dim, n, half_width).map_err(|e| ConfigError(e.to_string()))?;

        let r: f64 = num("potential.r", g("potential.r"))?;
        let alpha: f64 = num("potential.alpha", g("potential.alpha"))?;
        let c: f64 = num("potential.c", g("potential.c"))?;
        let family = match g("potential.family") {
            "power_law" => PotentialFamily::PowerLaw { r },
            "periodic_surrogate" => PotentialFamily::PeriodicSurrogate { r },
            "constant" => PotentialFamily::Constant {
                v0: num("potential.v0", g("potential.v0"))?,
            },
            other => return err(format!("potential.family: unknown family {other:?}")),
        };
        let potential = PotentialSpec::new(family, alpha, c).map_err(|e| ConfigError(e.to_string()))?;

        let omega1: f64 = num("shifts.omega1", g("shifts.omega1"))?;
        let omega2: f64 = num("shifts.omega2", g("shifts.omega2"))?;
        if !(omega1 > 0.0 && omega2 > 0.0) {
            return err("shifts must be positive");
        }

        let operator = match g("operator.kind") {
            "bilaplacian" => OperatorChoice::Bilaplacian,
            "varcoef" => OperatorChoice::Varcoef,
            "synthetic_ray" => OperatorChoice::SyntheticRay,
            other => return err(format!("operator.kind: unknown kind {other:?}")),
        };
        let coefficient_preset: CoefficientPreset = g("operator.coefficient_preset")
            .parse()
            .map_err(|e: hoslab_core::Error| ConfigError(e.to_string()))?;
        let ray_angle: f64 = num("operator.ray_angle", g("operator.ray_angle"))?;
        if !(0.0..PI / 2.0).contains(&ray_angle) {
            return err("operator.ray_angle must lie in [0, pi/2)");
        }
        if operator == OperatorChoice::SyntheticRay && (dim != 1 || n > 64) {
            return err("synthetic_ray needs grid.dim = 1 and grid.n <= 64");
        }

        let thetas = list("scan.thetas", g("scan.thetas"))?;
        if thetas.iter().any(|t| !(*t > 0.0 && *t < PI)) {
            return err("scan.thetas must lie in (0, pi)");
        }
        let moduli = list("scan.moduli", g("scan.moduli"))?;
        if moduli.iter().any(|m| *m <= 0.0) {
            return err("scan.moduli must be positive");
        }
        let ps = list("scan.ps", g("scan.ps"))?;
        if ps.iter().any(|p| !(*p > 1.0)) {
            return err("scan.ps must exceed 1");
        }

        let args = list("commutator.arguments", g("commutator.arguments"))?;
        let lambda_grid = points(
            "commutator.lambda_grid",
            &list("commutator.lambda_grid", g("commutator.lambda_grid"))?,
            &args,
        )?;
        let mu_grid = points("commutator.mu_grid", &list("commutator.mu_grid", g("commutator.mu_grid"))?, &args)?;
        let probes: usize = num("commutator.probes", g("commutator.probes"))?;
        if probes == 0 {
            return err("commutator.probes must be >= 1");
        }

        let t_list = list("evolve.t_list", g("evolve.t_list"))?;
        if t_list.iter().any(|t| *t <= 0.0) {
            return err("evolve.t_list must be positive");
        }
        let method: EvolveMethod = g("evolve.method")
            .parse()
            .map_err(|e: hoslab_core::Error| ConfigError(e.to_string()))?;
        let steps: usize = num("evolve.steps", g("evolve.steps"))?;
        if steps < 4 {
            return err("evolve.steps must be >= 4");
        }

        let seed: u64 = num("seed", g("seed"))?;
        let output_dir = PathBuf::from(g("output_dir"));
        Ok(RunConfig {
            dim,
            n,
            half_width,
            potential,
            omega1,
            omega2,
            operator,
            coefficient_preset,
            ray_angle,
            thetas,
            moduli,
            ps,
            lambda_grid,
            mu_grid,
            probes,
            t_list,
            method,
            steps,
            seed,
            output_dir,
            entries: map,
        })
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.dim, self.n, self.half_width).expect("validated at parse time")
    }
}
