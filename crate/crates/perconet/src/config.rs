//! Experiment configuration: a TOML file with dotted sections.
//!
//! Values are layered: file, then the `PERCONET_SEED` / `PERCONET_WORKERS`
//! environment variables, then `--set section.key=value` overrides.

use std::path::Path;

use perconet_core::geometry::Domain;
use perconet_core::limit::Mode;
use perconet_core::mobility::{VelocityKind, VelocityLaw, WaypointLaw};
use perconet_core::Point;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiskSection {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Default for DiskSection {
    fn default() -> Self {
        DiskSection { center: vec![0.0, 0.0], radius: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RectSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for RectSection {
    fn default() -> Self {
        RectSection { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedLaw {
    Uniform,
    Constant,
    Power,
}

/// Speeds default to `[0.5, 1.5] * diam(D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocitySection {
    pub law: SpeedLaw,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_minus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_plus: Option<f64>,
    /// Density exponent for `law = "power"`.
    pub exponent: f64,
}

impl Default for VelocitySection {
    fn default() -> Self {
        VelocitySection { law: SpeedLaw::Uniform, v_minus: None, v_plus: None, exponent: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaSection {
    pub dim: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    /// Explicit grid; replaces the min/max/step range when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    /// Box side lengths `L`.
    pub box_sizes: Vec<f64>,
    pub trials: usize,
    /// Critical constant used for level-set thresholds.
    pub lambda_cr: f64,
    /// Previously written table (CSV with JSON sidecar) to load instead of
    /// simulating one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

impl Default for ThetaSection {
    fn default() -> Self {
        ThetaSection {
            dim: 2,
            lambda_min: 0.3,
            lambda_max: 2.0,
            lambda_step: 0.1,
            lambda_grid: None,
            box_sizes: vec![40.0],
            trials: 2000,
            lambda_cr: perconet_core::percolation::LAMBDA_CR_REFERENCE,
            table: None,
        }
    }
}

impl ThetaSection {
    pub fn grid(&self) -> Vec<f64> {
        if let Some(g) = &self.lambda_grid {
            return g.clone();
        }
        let n = ((self.lambda_max - self.lambda_min) / self.lambda_step + 1e-9).floor() as usize;
        (0..=n).map(|k| round12(self.lambda_min + k as f64 * self.lambda_step)).collect()
    }
}

/// Rounds away accumulated float noise in generated grids.
fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Source of the stationary field used by the limit experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Closed form on the unit disk, Monte Carlo elsewhere.
    Auto,
    ClosedForm,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensitySection {
    pub stationary: DensityMode,
    pub resolution: usize,
    pub samples: usize,
    /// Transient fields per horizon for time-dependent landscapes.
    pub transient_fields: usize,
    pub transient_samples: usize,
}

impl Default for DensitySection {
    fn default() -> Self {
        DensitySection { stationary: DensityMode::Auto, resolution: 128, samples: 1_000_000, transient_fields: 32, transient_samples: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    Stationary,
    Waypoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FleetSection {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    /// Horizon in mean trip durations.
    pub trips: f64,
    /// Time step; defaults to `0.01 diam(D) / v_plus`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub trials: usize,
    pub condition_pair: bool,
    pub init: StartKind,
    /// Give walker 2 the same path as walker 1.
    pub identical_pair: bool,
    /// Also write the per-step connectivity series of trial 0.
    pub dump_series: bool,
}

impl Default for FleetSection {
    fn default() -> Self {
        FleetSection {
            r: 4.0,
            n: vec![250],
            trips: 10.0,
            dt: None,
            trials: 20,
            condition_pair: true,
            init: StartKind::Stationary,
            identical_pair: false,
            dump_series: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    Strict,
    Weak,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Mode {
        match m {
            ModeSpec::Strict => Mode::Strict,
            ModeSpec::Weak => Mode::Weak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitSection {
    pub mode: ModeSpec,
    pub mc_samples: usize,
    /// Random pairs used for the resolution-doubling report.
    pub refinement_pairs: usize,
}

impl Default for LimitSection {
    fn default() -> Self {
        LimitSection { mode: ModeSpec::Strict, mc_samples: 100_000, refinement_pairs: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSection {
    pub quad_n: usize,
    pub pairs: usize,
    /// Horizons, in mean trip durations, for the ergodic experiment.
    pub trips: Vec<f64>,
    pub bins: [usize; 5],
    /// Length of the reference run for the chi bound, in mean trips.
    pub reference_trips: f64,
    pub reference_pairs: usize,
    /// Horizon integration step for the direct time integral.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            quad_n: 32,
            pairs: 20,
            trips: vec![50.0, 100.0, 200.0],
            bins: [6, 6, 6, 3, 3],
            reference_trips: 2000.0,
            reference_pairs: 50,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviationSection {
    /// Thresholds as fractions of the estimated ergodic constant.
    pub p_fractions: Vec<f64>,
    pub trips: Vec<f64>,
    pub trials: usize,
}

impl Default for DeviationSection {
    fn default() -> Self {
        DeviationSection { p_fractions: vec![0.5, 0.8], trips: vec![30.0, 60.0, 120.0], trials: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChiSection {
    pub p_fractions: Vec<f64>,
}

impl Default for ChiSection {
    fn default() -> Self {
        ChiSection { p_fractions: vec![0.3, 0.5, 0.7] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeSection {
    pub seed: u64,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub output_dir: String,
}

impl Default for RuntimeSection {
    fn default() -> Self {
        RuntimeSection { seed: 1, workers: 0, output_dir: "perconet-out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub domain: DomainKind,
    pub disk: DiskSection,
    pub rect: RectSection,
    pub velocity: VelocitySection,
    pub theta: ThetaSection,
    pub density: DensitySection,
    pub fleet: FleetSection,
    pub limit: LimitSection,
    pub chain: ChainSection,
    pub deviations: DeviationSection,
    pub chi: ChiSection,
    pub runtime: RuntimeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainKind::Disk,
            disk: DiskSection::default(),
            rect: RectSection::default(),
            velocity: VelocitySection::default(),
            theta: ThetaSection::default(),
            density: DensitySection::default(),
            fleet: FleetSection::default(),
            limit: LimitSection::default(),
            chain: ChainSection::default(),
            deviations: DeviationSection::default(),
            chi: ChiSection::default(),
            runtime: RuntimeSection::default(),
        }
    }
}

/// Environment variables consulted by [`load`].
#[derive(Debug, Clone, Default)]
pub struct EnvOverrides {
    pub seed: Option<String>,
    pub workers: Option<String>,
}

impl EnvOverrides {
    pub fn from_env() -> EnvOverrides {
        EnvOverrides { seed: std::env::var("PERCONET_SEED").ok(), workers: std::env::var("PERCONET_WORKERS").ok() }
    }
}

/// Reads, layers and validates a configuration.
pub fn load(path: Option<&Path>, env: &EnvOverrides, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError::Io(p.display().to_string(), e))?,
        None => String::new(),
    };
    parse_layered(&text, env, overrides)
}

pub fn parse_layered(text: &str, env: &EnvOverrides, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    if let Some(s) = &env.seed {
        set_path(&mut table, "runtime.seed", parse_scalar("PERCONET_SEED", s)?)?;
    }
    if let Some(w) = &env.workers {
        set_path(&mut table, "runtime.workers", parse_scalar("PERCONET_WORKERS", w)?)?;
    }
    for o in overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid { path: o.clone(), reason: "override must look like key=value".into() })?;
        set_path(&mut table, key.trim(), parse_scalar(key.trim(), value.trim())?)?;
    }
    let cfg: ExperimentConfig =
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_scalar(key: &str, raw: &str) -> Result<toml::Value, ConfigError> {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => Ok(t.remove("v").expect("parsed key")),
        // bare words are taken as strings
        Err(_) if !raw.is_empty() && raw.chars().all(|c| c.is_ascii_alphanumeric() || "-_./".contains(c)) => {
            Ok(toml::Value::String(raw.to_string()))
        }
        Err(_) => Err(ConfigError::Invalid { path: key.to_string(), reason: format!("cannot parse value `{raw}`") }),
    }
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').collect();
    let (last, head) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in head {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid { path: path.to_string(), reason: format!("`{p}` is not a section") })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn bad(path: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), reason: reason.into() }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(path, format!("must be positive and finite, got {v}")))
    }
}

fn fractions(path: &str, ps: &[f64]) -> Result<(), ConfigError> {
    if ps.is_empty() {
        return Err(bad(path, "must be nonempty"));
    }
    for p in ps {
        positive(path, *p)?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn domain(&self) -> Result<Domain, ConfigError> {
        let point = |path: &str, v: &[f64]| Point::new(v).map_err(|e| bad(path, e.to_string()));
        match self.domain {
            DomainKind::Disk => {
                Domain::disk(point("disk.center", &self.disk.center)?, self.disk.radius).map_err(|e| bad("disk.radius", e.to_string()))
            }
            DomainKind::Rect => Domain::rect(point("rect.lower", &self.rect.lower)?, point("rect.upper", &self.rect.upper)?)
                .map_err(|e| bad("rect", e.to_string())),
        }
    }

    pub fn waypoints(&self) -> Result<WaypointLaw, ConfigError> {
        Ok(WaypointLaw::uniform(self.domain()?))
    }

    pub fn velocities(&self) -> Result<VelocityLaw, ConfigError> {
        let d = VelocityLaw::default_for(&self.domain()?);
        let lo = self.velocity.v_minus.unwrap_or(d.v_minus);
        let hi = self.velocity.v_plus.unwrap_or(d.v_plus);
        let err = |e: perconet_core::Error| bad("velocity", e.to_string());
        match self.velocity.law {
            SpeedLaw::Uniform => VelocityLaw::uniform(lo, hi).map_err(err),
            SpeedLaw::Constant => VelocityLaw::constant(self.velocity.v_minus.or(self.velocity.v_plus).unwrap_or(1.0)).map_err(err),
            SpeedLaw::Power => {
                VelocityLaw::new(lo, hi, VelocityKind::TruncatedPower { exponent: self.velocity.exponent }).map_err(err)
            }
        }
    }

    /// Checks every numeric parameter against the preconditions of the module
    /// that consumes it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let domain = self.domain()?;
        self.velocities()?;
        if domain.dim() != self.theta.dim {
            return Err(bad("theta.dim", format!("must match the domain dimension {}", domain.dim())));
        }
        let t = &self.theta;
        if !(2..=3).contains(&t.dim) {
            return Err(bad("theta.dim", "must be 2 or 3"));
        }
        if t.lambda_grid.is_none() {
            if !(t.lambda_min >= 0.0) {
                return Err(bad("theta.lambda_min", "must be >= 0"));
            }
            positive("theta.lambda_step", t.lambda_step)?;
            if !(t.lambda_max > t.lambda_min) {
                return Err(bad("theta.lambda_max", "must exceed theta.lambda_min"));
            }
        }
        let grid = t.grid();
        if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|v| !(*v >= 0.0)) {
            return Err(bad("theta.lambda_grid", "must be nonempty, >= 0 and strictly increasing"));
        }
        if t.box_sizes.is_empty() {
            return Err(bad("theta.box_sizes", "must be nonempty"));
        }
        for l in &t.box_sizes {
            if !(*l > 8.0) {
                return Err(bad("theta.box_sizes", format!("box side must exceed 8 (ball diameter 2), got {l}")));
            }
        }
        if t.trials == 0 {
            return Err(bad("theta.trials", "must be >= 1"));
        }
        positive("theta.lambda_cr", t.lambda_cr)?;
        let d = &self.density;
        if d.resolution < 2 {
            return Err(bad("density.resolution", "must be >= 2"));
        }
        if d.samples < 10_000 {
            return Err(bad("density.samples", "must be >= 10000"));
        }
        if d.transient_fields == 0 {
            return Err(bad("density.transient_fields", "must be >= 1"));
        }
        if d.transient_samples < 10_000 {
            return Err(bad("density.transient_samples", "must be >= 10000"));
        }
        let f = &self.fleet;
        positive("fleet.R", f.r)?;
        if f.n.is_empty() || f.n.iter().any(|n| *n < 2) {
            return Err(bad("fleet.N", "every fleet size must be >= 2"));
        }
        positive("fleet.trips", f.trips)?;
        if let Some(dt) = f.dt {
            positive("fleet.dt", dt)?;
        }
        if f.trials == 0 {
            return Err(bad("fleet.trials", "must be >= 1"));
        }
        if self.limit.mc_samples < 10_000 {
            return Err(bad("limit.mc_samples", "must be >= 10000"));
        }
        let c = &self.chain;
        if c.quad_n < 16 {
            return Err(bad("chain.quad_n", "must be >= 16"));
        }
        if c.pairs == 0 {
            return Err(bad("chain.pairs", "must be >= 1"));
        }
        fractions("chain.trips", &c.trips)?;
        if c.bins.contains(&0) {
            return Err(bad("chain.bins", "every feature needs at least one bin"));
        }
        positive("chain.reference_trips", c.reference_trips)?;
        if c.reference_pairs == 0 {
            return Err(bad("chain.reference_pairs", "must be >= 1"));
        }
        if let Some(dt) = c.dt {
            positive("chain.dt", dt)?;
        }
        fractions("deviations.p_fractions", &self.deviations.p_fractions)?;
        fractions("deviations.trips", &self.deviations.trips)?;
        if self.deviations.trials < 1000 {
            return Err(bad("deviations.trials", "must be >= 1000"));
        }
        fractions("chi.p_fractions", &self.chi.p_fractions)?;
        if self.runtime.output_dir.is_empty() {
            return Err(bad("runtime.output_dir", "must be nonempty"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = parse_layered(&c.to_toml(), &EnvOverrides::default(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn layering_order() {
        let env = EnvOverrides { seed: Some("7".into()), workers: Some("3".into()) };
        let c = parse_layered("[runtime]\nseed = 2\nworkers = 1\n", &env, &["runtime.seed=11".into()]).unwrap();
        assert_eq!(c.runtime.seed, 11);
        assert_eq!(c.runtime.workers, 3);
        let c = parse_layered("domain = \"rect\"", &EnvOverrides::default(), &["limit.mode=weak".into()]).unwrap();
        assert_eq!(c.domain, DomainKind::Rect);
        assert_eq!(c.limit.mode, ModeSpec::Weak);
    }

    #[test]
    fn errors_name_the_field() {
        let e = parse_layered("[fleet]\nR = -1.0\n", &EnvOverrides::default(), &[]).unwrap_err();
        assert!(e.to_string().contains("fleet.R"), "{e}");
        let e = parse_layered("", &EnvOverrides::default(), &["theta.box_sizes=[4.0]".into()]).unwrap_err();
        assert!(e.to_string().contains("theta.box_sizes"), "{e}");
        let e = parse_layered("[fleet]\nbogus = 1\n", &EnvOverrides::default(), &[]).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn generated_grid() {
        let t = ThetaSection { lambda_min: 0.2, lambda_max: 1.0, lambda_step: 0.02, ..ThetaSection::default() };
        let g = t.grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[20], 0.6);
        assert_eq!(*g.last().unwrap(), 1.0);
    }
}
