//! One function per CLI subcommand. Each writes its data files into the
//! output directory and returns their names; the caller adds the manifest.

use std::path::{Path, PathBuf};

use perconet_core::chain::{
    build_arrival_chain, chi_p_bound, deviation_rate_estimate, empirical_pair_measure, ergodic_ratio,
    pair_functionals, relative_entropy_rate, verify_chi_solution, ArrivalChain, ChiOptions, FeatureBins, PairHistogram,
    PairSpec,
};
use perconet_core::connectivity::{connection_time, connection_times_given, FleetSpec};
use perconet_core::geometry::{CellGrid, Domain};
use perconet_core::limit::{
    level_set_components, level_set_disagreement, p_star, tau_limit, Landscape, LandscapeSeries, LimitIntegral, Mode,
};
use perconet_core::mobility::{
    disk_density_approx, disk_density_closed_form, mean_trip_duration, simulate_trajectory, stationary_density,
    transient_density, DensityField, DensityLabel, InitialState, Trajectory, VelocityLaw, WaypointLaw,
};
use perconet_core::percolation::{
    build_theta_table, estimate_lambda_cr, exp_bound_diagnostic, ThetaTable, LAMBDA_CR_REFERENCE, LAMBDA_CR_RIGOROUS,
};
use perconet_core::rng::tags;
use perconet_core::stats::{combined, Summary};
use perconet_core::{Point, StreamKey, TrialRunner};
use serde::Serialize;
use serde_json::json;

use crate::config::{DensityMode, ExperimentConfig, StartKind};
use crate::error::RunError;
use crate::io;
use crate::pool::PoolRunner;

/// Samples used for the Monte Carlo mean trip duration.
const TRIP_MEAN_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    ThetaTable,
    LambdaCr,
    RwpDensity,
    ConnectTime,
    LimitCompare,
    Ergodic,
    Deviations,
    ChiBound,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::ThetaTable,
        Subcommand::LambdaCr,
        Subcommand::RwpDensity,
        Subcommand::ConnectTime,
        Subcommand::LimitCompare,
        Subcommand::Ergodic,
        Subcommand::Deviations,
        Subcommand::ChiBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::ThetaTable => "theta-table",
            Subcommand::LambdaCr => "lambda-cr",
            Subcommand::RwpDensity => "rwp-density",
            Subcommand::ConnectTime => "connect-time",
            Subcommand::LimitCompare => "limit-compare",
            Subcommand::Ergodic => "ergodic",
            Subcommand::Deviations => "deviations",
            Subcommand::ChiBound => "chi-bound",
        }
    }

    pub fn parse(name: &str) -> Option<Subcommand> {
        Subcommand::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Shared state for one run.
pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub runner: &'a PoolRunner,
    pub out_dir: PathBuf,
    /// Precomputed theta table; overrides `theta.table` and simulation.
    pub theta: Option<ThetaTable>,
}

impl Context<'_> {
    fn key(&self) -> StreamKey {
        StreamKey::new(self.config.runtime.seed)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn seed(&self) -> u64 {
        self.config.runtime.seed
    }
}

pub fn run(cmd: Subcommand, ctx: &Context<'_>) -> Result<Vec<String>, RunError> {
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| RunError::io(&ctx.out_dir, e))?;
    let files = match cmd {
        Subcommand::ThetaTable => theta_tables(ctx)?,
        Subcommand::LambdaCr => lambda_cr(ctx)?,
        Subcommand::RwpDensity => rwp_density(ctx)?,
        Subcommand::ConnectTime => connect_time(ctx)?,
        Subcommand::LimitCompare => limit_compare(ctx)?,
        Subcommand::Ergodic => ergodic(ctx)?,
        Subcommand::Deviations => deviations(ctx)?,
        Subcommand::ChiBound => chi_bound(ctx)?,
    };
    Ok(files.into_iter().map(|p| file_name(&p)).collect())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn box_label(l: f64) -> String {
    format!("{l}").replace('.', "p")
}

// ---- shared pieces -------------------------------------------------------

/// Domain and mobility laws resolved from a configuration.
pub struct Laws {
    pub domain: Domain,
    pub waypoints: WaypointLaw,
    pub velocities: VelocityLaw,
}

pub fn laws(cfg: &ExperimentConfig) -> Result<Laws, RunError> {
    Ok(Laws { domain: cfg.domain()?, waypoints: cfg.waypoints()?, velocities: cfg.velocities()? })
}

/// Monte Carlo mean trip duration, the time unit for horizons given in trips.
pub fn mean_trip(ctx: &Context<'_>, l: &Laws) -> f64 {
    let mut rng = ctx.key().child(tags::TRIP_MEAN).rng();
    mean_trip_duration(&l.waypoints, &l.velocities, TRIP_MEAN_SAMPLES, &mut rng)
}

fn init_state(cfg: &ExperimentConfig, l: &Laws) -> InitialState {
    match cfg.fleet.init {
        StartKind::Stationary => InitialState::stationary_default(&l.waypoints, &l.velocities),
        StartKind::Waypoint => InitialState::WaypointStart,
    }
}

/// Default time step `0.01 diam(D) / v_plus`.
pub fn default_dt(l: &Laws) -> f64 {
    0.01 * l.domain.diameter() / l.velocities.v_plus
}

fn build_table(ctx: &Context<'_>, index: usize) -> Result<ThetaTable, RunError> {
    let t = &ctx.config.theta;
    let key = ctx.key().child(tags::THETA).child(index as u64);
    let table = build_theta_table(&t.grid(), t.trials, t.box_sizes[index] / 2.0, t.dim, key, ctx.runner)?;
    Ok(table.with_lambda_cr(t.lambda_cr))
}

/// Theta table for the limit experiments: the context's, a file, or a fresh
/// simulation at the first box size.
fn theta_table(ctx: &Context<'_>) -> Result<ThetaTable, RunError> {
    if let Some(t) = &ctx.theta {
        return Ok(t.clone());
    }
    if let Some(path) = &ctx.config.theta.table {
        return Ok(io::read_theta_table(Path::new(path))?.with_lambda_cr(ctx.config.theta.lambda_cr));
    }
    build_table(ctx, 0)
}

fn is_unit_disk(d: &Domain) -> bool {
    matches!(d, Domain::Disk { center, radius } if *radius == 1.0 && center.dim() == 2 && center.norm() == 0.0)
}

/// Stationary field: the closed form on the unit disk (uniform waypoints)
/// unless Monte Carlo is requested.
fn stationary_field(ctx: &Context<'_>, l: &Laws, grid: &CellGrid) -> Result<DensityField, RunError> {
    let mode = ctx.config.density.stationary;
    if mode == DensityMode::ClosedForm || (mode == DensityMode::Auto && is_unit_disk(&l.domain)) {
        if !is_unit_disk(&l.domain) {
            return Err(RunError::Format("density.stationary = \"closed_form\" needs the unit disk".into()));
        }
        return Ok(DensityField::from_fn(grid.clone(), DensityLabel::Stationary, |p| {
            disk_density_closed_form(p).unwrap_or(0.0)
        })?);
    }
    let key = ctx.key().child(tags::DENSITY);
    Ok(stationary_density(&l.waypoints, &l.velocities, grid, ctx.config.density.samples, key, ctx.runner)?)
}

fn grid(ctx: &Context<'_>, l: &Laws) -> Result<CellGrid, RunError> {
    Ok(CellGrid::new(l.domain, ctx.config.density.resolution)?)
}

/// Landscapes along `[0, horizon]`: one stationary landscape, or transient
/// fields at the midpoints of `density.transient_fields` equal time slots.
fn landscapes<'t>(
    ctx: &Context<'_>,
    l: &Laws,
    theta: &'t ThetaTable,
    mode: Mode,
    horizon: f64,
) -> Result<LandscapeSeries<'t>, RunError> {
    let cfg = ctx.config;
    let g = grid(ctx, l)?;
    let r = cfg.fleet.r;
    match cfg.fleet.init {
        StartKind::Stationary => {
            let f = stationary_field(ctx, l, &g)?;
            Ok(LandscapeSeries::stationary(Landscape::new(&f, theta, r, mode)?))
        }
        StartKind::Waypoint => {
            let m = cfg.density.transient_fields;
            let mut entries = Vec::with_capacity(m);
            for k in 0..m {
                let s = (k as f64 + 0.5) * horizon / m as f64;
                let key = ctx.key().child(tags::DENSITY).child(1 + k as u64);
                let f = transient_density(
                    &l.waypoints,
                    &l.velocities,
                    s,
                    InitialState::WaypointStart,
                    &g,
                    cfg.density.transient_samples,
                    key,
                    ctx.runner,
                )?;
                entries.push((s, Landscape::new(&f, theta, r, mode)?));
            }
            Ok(LandscapeSeries::transient(entries)?)
        }
    }
}

#[derive(Serialize)]
struct LimitJson<'a> {
    value: f64,
    value_over_t: Option<f64>,
    stderr: Option<f64>,
    mode: &'static str,
    resolution: usize,
    theta_table: &'a str,
    lambda_cr: f64,
    #[serde(rename = "R")]
    r: f64,
    seed: u64,
    steps: usize,
    connected_steps: usize,
}

fn limit_json<'a>(ctx: &Context<'_>, li: &LimitIntegral, horizon: Option<f64>, theta_ref: &'a str, lcr: f64) -> LimitJson<'a> {
    LimitJson {
        value: li.value,
        value_over_t: horizon.map(|t| li.value / t),
        stderr: li.std_error,
        mode: li.mode.name(),
        resolution: ctx.config.density.resolution,
        theta_table: theta_ref,
        lambda_cr: lcr,
        r: ctx.config.fleet.r,
        seed: ctx.seed(),
        steps: li.records.len(),
        connected_steps: li.records.iter().filter(|r| r.connected).count(),
    }
}

fn theta_reference(ctx: &Context<'_>) -> String {
    if ctx.theta.is_some() {
        "provided".into()
    } else if let Some(p) = &ctx.config.theta.table {
        p.clone()
    } else {
        format!("simulated:L={}", ctx.config.theta.box_sizes[0])
    }
}

/// Stationary-start pair `index` of batch `batch`.
fn stationary_pair(l: &Laws, horizon: f64, key: StreamKey) -> Result<[Trajectory; 2], RunError> {
    let init = InitialState::stationary_default(&l.waypoints, &l.velocities);
    let mut rng = key.rng();
    let a = simulate_trajectory(&l.waypoints, &l.velocities, horizon, init, &mut rng)?;
    let b = simulate_trajectory(&l.waypoints, &l.velocities, horizon, init, &mut rng)?;
    Ok([a, b])
}

// ---- subcommands ---------------------------------------------------------

fn theta_tables(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let mut files = Vec::new();
    for (i, l) in ctx.config.theta.box_sizes.iter().enumerate() {
        let table = build_table(ctx, i)?;
        files.extend(io::write_theta_table(&ctx.path(&format!("theta_L{}.csv", box_label(*l))), &table, ctx.seed())?);
    }
    Ok(files)
}

#[derive(Serialize)]
struct CriticalJson {
    lo: f64,
    hi: f64,
    width: f64,
    exponent: f64,
    crossings: Vec<serde_json::Value>,
    reference: f64,
    contains_reference: bool,
    rigorous: (f64, f64),
    within_rigorous: bool,
}

fn lambda_cr(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let mut files = Vec::new();
    let mut tables = Vec::new();
    for (i, l) in ctx.config.theta.box_sizes.iter().enumerate() {
        let table = build_table(ctx, i)?;
        let name = box_label(*l);
        files.extend(io::write_theta_table(&ctx.path(&format!("theta_L{name}.csv")), &table, ctx.seed())?);
        let diag = exp_bound_diagnostic(&table, ctx.config.theta.dim);
        let path = ctx.path(&format!("expbound_L{name}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["lambda", "ratio", "below_resolution"])?;
        for p in diag {
            w.write_record([
                format!("{}", p.lambda),
                p.ratio.map(|r| format!("{r}")).unwrap_or_default(),
                (p.below_resolution as u8).to_string(),
            ])?;
        }
        w.flush().map_err(|e| RunError::io(&path, e))?;
        files.push(path);
        tables.push(table);
    }
    let b = estimate_lambda_cr(&tables)?;
    let out = CriticalJson {
        lo: b.lo,
        hi: b.hi,
        width: b.width(),
        exponent: b.exponent,
        crossings: b
            .crossings
            .iter()
            .map(|c| json!({"L_small": c.small_side, "L_large": c.large_side, "crossing": c.crossing, "lo": c.lo, "hi": c.hi}))
            .collect(),
        reference: LAMBDA_CR_REFERENCE,
        contains_reference: b.contains(LAMBDA_CR_REFERENCE),
        rigorous: LAMBDA_CR_RIGOROUS,
        within_rigorous: b.lo > LAMBDA_CR_RIGOROUS.0 && b.hi < LAMBDA_CR_RIGOROUS.1,
    };
    let path = ctx.path("lambda_cr.json");
    io::write_json(&path, &out)?;
    files.push(path);
    Ok(files)
}

/// Closed form against the `(2/pi)(1 - |x|^2)` approximation on an
/// `n x n` grid over the disk: (max abs difference, area-weighted MSE).
pub fn disk_approximation_error(n: usize) -> (f64, f64) {
    let (mut max, mut ss, mut cells) = (0.0f64, 0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            let p = Point::xy(-1.0 + (i as f64 + 0.5) * 2.0 / n as f64, -1.0 + (j as f64 + 0.5) * 2.0 / n as f64);
            if let (Ok(a), Ok(b)) = (disk_density_closed_form(&p), disk_density_approx(&p)) {
                max = max.max((a - b).abs());
                ss += (a - b) * (a - b);
                cells += 1;
            }
        }
    }
    (max, ss / cells as f64)
}

/// Mean of the field over the cells whose centres lie within `r` of the
/// origin; a less noisy centre value than a single cell.
pub fn central_mean(field: &DensityField, r: f64) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (c, v) in field.grid.centers().iter().zip(&field.values) {
        if c.coords().iter().map(|x| x * x).sum::<f64>() <= r * r {
            sum += v;
            n += 1;
        }
    }
    sum / n.max(1) as f64
}

fn rwp_density(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let l = laws(ctx.config)?;
    let g = grid(ctx, &l)?;
    let key = ctx.key().child(tags::DENSITY);
    let field = stationary_density(&l.waypoints, &l.velocities, &g, ctx.config.density.samples, key, ctx.runner)?;
    let mut files = io::write_density_field(&ctx.path("density_stationary.csv"), &field, ctx.seed())?;
    let mut check = json!({"samples": field.sample_count, "resolution": g.resolution(), "mass": field.mass()});
    if is_unit_disk(&l.domain) {
        let exact = DensityField::from_fn(g.clone(), DensityLabel::Stationary, |p| disk_density_closed_form(p).unwrap_or(0.0))?;
        let (max_abs, mse) = disk_approximation_error(100);
        check["tv_vs_closed_form"] = json!(field.total_variation(&exact)?);
        check["f0_mc"] = json!(central_mean(&field, 0.1));
        check["f0_closed_form"] = json!(45.0 / 64.0);
        check["approx_max_abs"] = json!(max_abs);
        check["approx_mse"] = json!(mse);
    }
    let path = ctx.path("density_check.json");
    io::write_json(&path, &check)?;
    files.push(path);
    Ok(files)
}

fn connect_time(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let cfg = ctx.config;
    let l = laws(cfg)?;
    let horizon = cfg.fleet.trips * mean_trip(ctx, &l);
    let dt = cfg.fleet.dt.unwrap_or_else(|| default_dt(&l)).min(horizon / 10.0);
    let mut rows = Vec::new();
    let mut files = Vec::new();
    for &n in &cfg.fleet.n {
        let spec = FleetSpec {
            waypoints: l.waypoints.clone(),
            velocities: l.velocities,
            walkers: n,
            comm_scale: cfg.fleet.r,
            horizon,
            init: init_state(cfg, &l),
        };
        let pair = if cfg.fleet.identical_pair {
            let [a, _] = spec.tagged_pair(ctx.key())?;
            Some([a.clone(), a])
        } else if cfg.fleet.condition_pair {
            Some(spec.tagged_pair(ctx.key())?)
        } else {
            None
        };
        let key = ctx.key().child(n as u64);
        let fr = connection_times_given(&spec, dt, cfg.fleet.trials, pair.as_ref(), key, ctx.runner)?;
        let effective = horizon / (horizon / dt - 1e-9).ceil().max(1.0);
        for (t, f) in fr.iter().enumerate() {
            rows.push(io::ConnectRow { trial: t, n, r: cfg.fleet.r, dt: effective, tau: f * horizon, tau_over_t: *f });
        }
        if cfg.fleet.dump_series {
            let fleet = spec.fleet(0, pair.as_ref(), key)?;
            let s = connection_time(&fleet, dt)?;
            let path = ctx.path(&format!("series_N{n}_trial0.csv"));
            io::write_series(&path, &s)?;
            files.push(path);
        }
    }
    let path = ctx.path("connect_time.csv");
    io::write_connect_times(&path, &rows)?;
    files.insert(0, path);
    Ok(files)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub tau_strict_over_t: f64,
    pub tau_weak_over_t: f64,
    pub eps: f64,
    pub within: bool,
    pub deviation: f64,
}

fn limit_compare(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let cfg = ctx.config;
    let l = laws(cfg)?;
    let horizon = cfg.fleet.trips * mean_trip(ctx, &l);
    let dt = cfg.fleet.dt.unwrap_or_else(|| default_dt(&l)).min(horizon / 10.0);
    let theta = theta_table(ctx)?;
    let theta_ref = theta_reference(ctx);
    let base = FleetSpec {
        waypoints: l.waypoints.clone(),
        velocities: l.velocities,
        walkers: 2,
        comm_scale: cfg.fleet.r,
        horizon,
        init: init_state(cfg, &l),
    };
    let pair = base.tagged_pair(ctx.key())?;
    let mut files = Vec::new();
    let mut limits = Vec::new();
    for mode in [Mode::Strict, Mode::Weak] {
        let series = landscapes(ctx, &l, &theta, mode, horizon)?;
        let li = tau_limit(&pair[0], &pair[1], &series, horizon, dt)?;
        let path = ctx.path(&format!("limit_{}.json", mode.name()));
        io::write_json(&path, &limit_json(ctx, &li, Some(horizon), &theta_ref, theta.lambda_cr(cfg.fleet.r)))?;
        files.push(path);
        limits.push(li.value / horizon);
    }
    let (strict, weak) = (limits[0], limits[1]);
    let mid = 0.5 * (strict + weak);
    let mut rows = Vec::new();
    for &n in &cfg.fleet.n {
        let spec = FleetSpec { walkers: n, ..base.clone() };
        let fr = connection_times_given(&spec, dt, cfg.fleet.trials, Some(&pair), ctx.key().child(n as u64), ctx.runner)?;
        let s = Summary::of(&fr);
        let eps = 3.0 * s.std_error() + 0.02;
        rows.push(CompareRow {
            n,
            trials: fr.len(),
            mean: s.mean,
            sd: s.sd,
            stderr: s.std_error(),
            tau_strict_over_t: strict,
            tau_weak_over_t: weak,
            eps,
            within: s.mean >= strict - eps && s.mean <= weak + eps,
            deviation: (s.mean - mid).abs(),
        });
    }
    let path = ctx.path("limit_compare.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| RunError::io(&path, e))?;
    files.insert(0, path);
    files.push(refinement_report(ctx, &l, &theta)?);
    Ok(files)
}

/// Disagreement of level-set connectivity between resolution `r` and `2r`.
fn refinement_report(ctx: &Context<'_>, l: &Laws, theta: &ThetaTable) -> Result<PathBuf, RunError> {
    let cfg = ctx.config;
    let res = cfg.density.resolution;
    let threshold = theta.lambda_cr(cfg.fleet.r);
    let mut out = json!({"resolution": res, "threshold": threshold});
    if cfg.fleet.init == StartKind::Stationary {
        let coarse = stationary_field(ctx, l, &CellGrid::new(l.domain, res)?)?;
        let fine = stationary_field(ctx, l, &CellGrid::new(l.domain, 2 * res)?)?;
        let mut rng = ctx.key().child(tags::P_STAR).child(99).rng();
        for mode in [Mode::Strict, Mode::Weak] {
            let a = level_set_components(&coarse, threshold, mode);
            let b = level_set_components(&fine, threshold, mode);
            out[mode.name()] = json!(level_set_disagreement(&a, &b, cfg.limit.refinement_pairs, &mut rng));
        }
    } else {
        out["note"] = json!("refinement report covers stationary fields only");
    }
    let path = ctx.path("refinement.json");
    io::write_json(&path, &out)?;
    Ok(path)
}

fn stationary_landscape<'t>(ctx: &Context<'_>, l: &Laws, theta: &'t ThetaTable) -> Result<Landscape<'t>, RunError> {
    let f = stationary_field(ctx, l, &grid(ctx, l)?)?;
    Ok(Landscape::new(&f, theta, ctx.config.fleet.r, ctx.config.limit.mode.into())?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicRow {
    pub trips: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub pairs: usize,
    pub tau_over_t: f64,
    pub stderr: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub p_star: f64,
    pub p_star_stderr: f64,
    pub z: f64,
}

fn ergodic(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let cfg = ctx.config;
    let l = laws(cfg)?;
    let unit = mean_trip(ctx, &l);
    let theta = theta_table(ctx)?;
    let land = stationary_landscape(ctx, &l, &theta)?;
    let series = LandscapeSeries::stationary(land.clone());
    let ps = p_star(&land, cfg.limit.mc_samples, ctx.key().child(tags::P_STAR), ctx.runner)?;
    let ps_se = ps.std_error.unwrap_or(0.0);
    let mut files = Vec::new();
    let path = ctx.path("p_star.json");
    io::write_json(&path, &limit_json(ctx, &ps, None, &theta_reference(ctx), theta.lambda_cr(cfg.fleet.r)))?;
    files.push(path);
    let dt = cfg.chain.dt.unwrap_or_else(|| default_dt(&l));
    let mut rows = Vec::new();
    for (ti, &trips) in cfg.chain.trips.iter().enumerate() {
        let horizon = trips * unit;
        let key = ctx.key().child(tags::CHAIN).child(ti as u64);
        let results: Vec<Result<(f64, ArrivalChain), RunError>> = ctx.runner.run(cfg.chain.pairs, |k| {
            let [a, b] = stationary_pair(&l, horizon, key.child(k as u64))?;
            let li = tau_limit(&a, &b, &series, horizon, dt)?;
            Ok((li.value / horizon, build_arrival_chain(&a, &b, horizon)?))
        });
        let mut fracs = Vec::new();
        let mut chains = Vec::new();
        for r in results {
            let (f, c) = r?;
            fracs.push(f);
            chains.push(c);
        }
        if ti == 0 {
            let path = ctx.path("chain_pair0.csv");
            io::write_chain(&path, &chains[0])?;
            files.push(path);
        }
        let s = Summary::of(&fracs);
        let e = ergodic_ratio(&chains, &land, cfg.chain.quad_n)?;
        rows.push(ErgodicRow {
            trips,
            horizon,
            pairs: fracs.len(),
            tau_over_t: s.mean,
            stderr: s.std_error(),
            ratio: e.value,
            ratio_stderr: e.std_error,
            p_star: ps.value,
            p_star_stderr: ps_se,
            z: (s.mean - ps.value) / combined(s.std_error(), ps_se).max(f64::MIN_POSITIVE),
        });
    }
    let path = ctx.path("ergodic.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| RunError::io(&path, e))?;
    files.insert(0, path);
    Ok(files)
}

fn deviations(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let cfg = ctx.config;
    let l = laws(cfg)?;
    let unit = mean_trip(ctx, &l);
    let theta = theta_table(ctx)?;
    let land = Landscape::new(&stationary_field(ctx, &l, &grid(ctx, &l)?)?, &theta, cfg.fleet.r, Mode::Strict)?;
    let ps = p_star(&land, cfg.limit.mc_samples, ctx.key().child(tags::P_STAR), ctx.runner)?;
    let p_values: Vec<f64> = cfg.deviations.p_fractions.iter().map(|f| f * ps.value).collect();
    let spec = PairSpec {
        waypoints: l.waypoints.clone(),
        velocities: l.velocities,
        init: InitialState::stationary_default(&l.waypoints, &l.velocities),
    };
    let rows = deviation_rate_estimate(
        &p_values,
        &cfg.deviations.trips,
        unit,
        cfg.deviations.trials,
        &spec,
        &land,
        cfg.chain.quad_n,
        ctx.key().child(tags::DEVIATION),
        ctx.runner,
    )?;
    let path = ctx.path("deviations.csv");
    io::write_deviations(&path, &rows)?;
    let meta = ctx.path("deviations.json");
    io::write_json(
        &meta,
        &json!({
            "p_star": ps.value,
            "p_star_stderr": ps.std_error,
            "p_fractions": cfg.deviations.p_fractions,
            "trips": cfg.deviations.trips,
            "mean_trip": unit,
            "mode": "strict",
        }),
    )?;
    Ok(vec![path, meta])
}

/// Reference chains for the chi bound and entropy outputs.
fn reference_chains(ctx: &Context<'_>, l: &Laws, trips: f64, count: usize, tag: u64) -> Result<Vec<ArrivalChain>, RunError> {
    let horizon = trips * mean_trip(ctx, l);
    let key = ctx.key().child(tags::CHAIN).child(tag);
    ctx.runner
        .run(count, |k| {
            let [a, b] = stationary_pair(l, horizon, key.child(k as u64))?;
            Ok(build_arrival_chain(&a, &b, horizon)?)
        })
        .into_iter()
        .collect()
}

fn chi_bound(ctx: &Context<'_>) -> Result<Vec<PathBuf>, RunError> {
    let cfg = ctx.config;
    let l = laws(cfg)?;
    let theta = theta_table(ctx)?;
    let land = Landscape::new(&stationary_field(ctx, &l, &grid(ctx, &l)?)?, &theta, cfg.fleet.r, Mode::Strict)?;
    let bins = FeatureBins::for_domain(&l.domain, &l.velocities, cfg.chain.bins)?;
    let chains = reference_chains(ctx, &l, cfg.chain.reference_trips, cfg.chain.reference_pairs, 1000)?;
    let mut p_ref = PairHistogram::new(bins);
    for c in &chains {
        p_ref.merge(&empirical_pair_measure(c, &bins)?);
    }
    let fun = pair_functionals(&chains, &bins, &land, cfg.chain.quad_n)?;
    let opts = ChiOptions::default();
    let reference = chi_p_bound(1.0, &p_ref, &fun, opts)?.reference_ratio;
    let mut rows = Vec::new();
    for &f in &cfg.chi.p_fractions {
        let p = f * reference;
        let row = match chi_p_bound(p, &p_ref, &fun, opts) {
            Ok(s) => {
                let verified = verify_chi_solution(&s, p, &p_ref, &fun, 1e-9).is_ok();
                json!({"fraction": f, "p": p, "feasible": true, "value": s.value, "beta": s.beta,
                       "ratio": s.ratio, "entropy": s.entropy, "mean_m": s.mean_m,
                       "marginal_gap": s.marginal_gap, "verified": verified})
            }
            Err(perconet_core::Error::Infeasible) => json!({"fraction": f, "p": p, "feasible": false}),
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    // a chain ten times shorter than the reference, scored against it
    let short = reference_chains(ctx, &l, cfg.chain.reference_trips / 10.0, 1, 2000)?;
    let q = empirical_pair_measure(&short[0], &bins)?;
    let rate = relative_entropy_rate(&q, &p_ref)?;
    let mut files = Vec::new();
    let path = ctx.path("chi.json");
    io::write_json(
        &path,
        &json!({"rate_label": "reduced-feature rate", "reference_ratio": reference, "rows": rows,
                "states": p_ref.marginal_left().len(), "transitions": p_ref.total}),
    )?;
    files.push(path);
    let path = ctx.path("histogram.json");
    io::write_json(&path, &io::HistogramJson::from(&p_ref))?;
    files.push(path);
    let path = ctx.path("entropy.json");
    io::write_json(
        &path,
        &json!({"rate_label": "reduced-feature rate", "value": if rate.infinite { None } else { Some(rate.value) },
                "infinite": rate.infinite, "excluded_rows": rate.excluded_rows, "excluded_mass": rate.excluded_mass,
                "q_transitions": q.total, "reference_transitions": p_ref.total}),
    )?;
    files.push(path);
    Ok(files)
}
