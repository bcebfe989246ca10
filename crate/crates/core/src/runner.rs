//! Experiment orchestration: configuration, simulation of every
//! (algorithm, seed) pair, benchmark solves, metrics over horizon prefixes,
//! bound replays and the result files.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json              resolved config, sigma, constants
//! {alg}_fit.csv              T, algorithm, metric, mean, std, n
//! {alg}_regret.csv           same columns, static and dynamic regret per slot
//! cost_gap.csv               same columns, algorithm = "benchmark"
//! demands.csv                seed, t, d0, d1, ...
//! bounds.csv                 per (seed, algorithm, T) replay with eta(T)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::agents::{HyperParams, InitialAction};
use crate::baselines::{simulate, Algorithm};
use crate::bounds::{self, BoundConstants, GuaranteeBounds};
use crate::environment::{DemandSource, EnvConfig, EnvSample, Environment};
use crate::error::{Error, Result};
use crate::metrics::{self, RunRecord};
use crate::model::{ActionSpace, BoxBounds, CostParams, Problem};
use crate::oracle::{self, SolveReport, SolverOptions};
use crate::topology::Topology;

/// Overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "EDGEALLOC_OUTPUT_DIR";

/// Multiple of `3 K G^2` used for `sigma = "auto"`.
pub const AUTO_SIGMA_FACTOR: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma {
    Auto,
    Value(f64),
}

impl Serialize for Sigma {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma::Auto => s.serialize_str("auto"),
            Sigma::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Sigma::Value(v)),
            Raw::Str(s) if s == "auto" => Ok(Sigma::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "sigma must be a number or \"auto\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub devices: usize,
    pub base_stations: usize,
    pub servers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    /// `eta = eta0 / sqrt(T)`.
    pub eta0: f64,
    pub sigma: Sigma,
    #[serde(default)]
    pub init: InitialAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "ExperimentConfig::default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "ExperimentConfig::default_output_dir")]
    pub output_dir: PathBuf,
    /// Prefix spacing of the curves.
    #[serde(default = "ExperimentConfig::default_curve_step")]
    pub curve_step: usize,
    /// Horizons of the bound replays; those above `horizon` are skipped.
    #[serde(default = "ExperimentConfig::default_bound_horizons")]
    pub bound_horizons: Vec<usize>,
    pub topology: TopologyConfig,
    pub step: StepConfig,
    #[serde(default)]
    pub bounds: BoxBounds,
    /// Defaults follow from `bounds` when absent.
    #[serde(default)]
    pub cost: Option<CostParams<f64>>,
    #[serde(default)]
    pub environment: EnvConfig,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ExperimentConfig {
    fn default_algorithms() -> Vec<Algorithm> {
        Algorithm::ALL.to_vec()
    }

    fn default_output_dir() -> PathBuf {
        PathBuf::from("results")
    }

    fn default_curve_step() -> usize {
        10
    }

    fn default_bound_horizons() -> Vec<usize> {
        vec![75, 150, 300]
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a TOML config or the `config` entry of a run manifest (`.json`).
    /// Relative trace paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str::<Manifest>(&text)?.config
        } else {
            Self::from_toml(&text)?
        };
        if let DemandSource::Trace { path: trace, .. } = &mut cfg.environment.demand {
            if trace.is_relative() {
                if let Some(dir) = path.parent() {
                    *trace = dir.join(&*trace);
                }
            }
        }
        Ok(cfg)
    }

    pub fn topology(&self) -> Result<Topology> {
        let t = &self.topology;
        Topology::full(t.devices, t.base_stations, t.servers)
    }

    pub fn problem(&self) -> Result<Problem<f64>> {
        let topology = self.topology()?;
        let space = ActionSpace::from_bounds(&topology, &self.bounds)?;
        let params = self
            .cost
            .unwrap_or_else(|| CostParams::defaults_for(&self.bounds));
        params.validate(&self.bounds)?;
        Problem::new(topology, space, params)
    }

    /// Checks every field that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if self.curve_step == 0 {
            return bad("curve_step must be positive");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required");
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return bad("algorithms must be distinct");
            }
        }
        if !(self.step.eta0 > 0.0 && self.step.eta0.is_finite()) {
            return bad("eta0 must be positive");
        }
        if let Sigma::Value(s) = self.step.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma must be positive");
            }
        }
        if self.bound_horizons.contains(&0) {
            return bad("bound horizons must be positive");
        }
        self.environment.validate()?;
        self.problem()?;
        Ok(())
    }

    /// `T = curve_step, 2 curve_step, ... <= horizon`.
    pub fn prefixes(&self) -> Vec<usize> {
        (1..=self.horizon / self.curve_step)
            .map(|k| k * self.curve_step)
            .collect()
    }

    pub fn replay_horizons(&self) -> Vec<usize> {
        let mut h: Vec<usize> = self
            .bound_horizons
            .iter()
            .copied()
            .filter(|&t| t <= self.horizon)
            .collect();
        h.sort_unstable();
        h.dedup();
        h
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub sigma: f64,
    pub sigma_floor: f64,
    pub beta: f64,
    /// Step size of the curve runs, `eta0 / sqrt(horizon)`.
    pub eta: f64,
    pub constants: BoundConstants,
    pub dimension: usize,
    /// `(seed, T)` prefixes whose static benchmark did not converge.
    pub infeasible_static: Vec<(u64, usize)>,
}

/// One row of a curve file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    #[serde(rename = "T")]
    pub t: usize,
    pub algorithm: String,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

/// One bound replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub seed: u64,
    pub algorithm: Algorithm,
    #[serde(rename = "T")]
    pub t: usize,
    pub eta: f64,
    pub static_regret: Option<f64>,
    pub dynamic_regret: f64,
    pub fit: f64,
    pub path_length: f64,
    pub u_sr: Option<f64>,
    pub u_dr: Option<f64>,
    pub u_f: Option<f64>,
    pub sr_ok: Option<bool>,
    pub dr_ok: Option<bool>,
    pub fit_ok: Option<bool>,
}

impl BoundRow {
    /// `false` if any evaluated inequality fails.
    pub fn satisfied(&self) -> bool {
        [self.sr_ok, self.dr_ok, self.fit_ok]
            .iter()
            .all(|v| v.unwrap_or(true))
    }
}

/// Per-slot raw values of one (algorithm, seed) curve run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedCurves {
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Indexed like [`ExperimentConfig::prefixes`].
    pub fit: Vec<f64>,
    pub static_regret: Vec<Option<f64>>,
    pub dynamic_regret: Vec<f64>,
}

/// Benchmark solver statistics over every solve of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub solves: usize,
    pub unconverged: usize,
    pub max_violation: f64,
}

impl SolverStats {
    fn add(&mut self, r: &SolveReport) {
        self.solves += 1;
        if !r.converged {
            self.unconverged += 1;
        }
        self.max_violation = self.max_violation.max(r.max_violation);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub manifest: Manifest,
    pub curves: BTreeMap<Algorithm, Vec<CurveRow>>,
    pub per_seed: Vec<SeedCurves>,
    pub cost_gap: Vec<CurveRow>,
    pub bounds: Vec<BoundRow>,
    /// `(seed, requests per slot)`.
    pub demands: Vec<(u64, Vec<Vec<f64>>)>,
    pub solver: SolverStats,
}

fn per_slot(value: f64, t: usize) -> f64 {
    value / t as f64
}

fn aggregate(t: usize, algorithm: &str, metric: &str, values: &[f64]) -> CurveRow {
    let stats = metrics::mean_std(values);
    CurveRow {
        t,
        algorithm: algorithm.into(),
        metric: metric.into(),
        mean: stats.map(|s| s.0),
        std: stats.map(|s| s.1),
        n: values.len(),
    }
}

/// Benchmarks of one seed.
struct Benchmarks {
    envs: Vec<EnvSample<f64>>,
    dynamic: Vec<Vec<f64>>,
    /// Static solutions by prefix horizon; `None` if not converged.
    fixed: BTreeMap<usize, Option<Vec<f64>>>,
}

impl Benchmarks {
    fn solve(
        problem: &Problem<f64>,
        envs: Vec<EnvSample<f64>>,
        horizons: &[usize],
        opts: &SolverOptions,
        stats: &mut SolverStats,
    ) -> Self {
        let dynamic = oracle::solve_dynamic_all(problem, &envs, opts)
            .into_iter()
            .map(|r| {
                stats.add(&r);
                r.solution
            })
            .collect();
        let mut fixed = BTreeMap::new();
        for &h in horizons {
            fixed.entry(h).or_insert_with(|| {
                let r = oracle::solve_static(problem, &envs[..h], opts);
                stats.add(&r);
                r.converged.then_some(r.solution)
            });
        }
        Benchmarks {
            envs,
            dynamic,
            fixed,
        }
    }

    fn static_regret(&self, problem: &Problem<f64>, rec: &RunRecord<f64>, h: usize) -> Option<f64> {
        let x = self.fixed.get(&h)?.as_ref()?;
        Some(metrics::static_regret(
            problem,
            rec.prefix(h),
            x,
            &self.envs[..h],
        ))
    }

    fn dynamic_regret(&self, problem: &Problem<f64>, rec: &RunRecord<f64>, h: usize) -> f64 {
        metrics::dynamic_regret(problem, rec.prefix(h), &self.dynamic[..h], &self.envs[..h])
    }
}

/// Resolved `sigma` and the bound constants.
pub fn resolve_sigma(
    config: &ExperimentConfig,
    problem: &Problem<f64>,
    env: &Environment,
) -> (f64, BoundConstants) {
    let constants = bounds::estimate_constants(problem, &env.ranges());
    let sigma = match config.step.sigma {
        Sigma::Auto => bounds::auto_sigma(&constants, AUTO_SIGMA_FACTOR),
        Sigma::Value(v) => v,
    };
    (sigma, constants)
}

/// Runs the whole experiment in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let problem = config.problem()?;
    let base_env = Environment::new(&config.environment, &problem.topology)?;
    let (sigma, constants) = resolve_sigma(config, &problem, &base_env);
    let prefixes = config.prefixes();
    let replays = config.replay_horizons();
    let mut static_horizons = prefixes.clone();
    static_horizons.extend(&replays);

    let hp = HyperParams::for_horizon(config.step.eta0, config.horizon, sigma);
    let init = config.step.init;
    let mut stats = SolverStats::default();
    let mut per_seed = Vec::new();
    let mut bound_rows = Vec::new();
    let mut demands = Vec::new();
    let mut gaps: Vec<Vec<f64>> = vec![Vec::new(); prefixes.len()];
    let mut infeasible_static = Vec::new();

    for &seed in &config.seeds {
        let env = base_env.clone().with_seed(seed);
        let envs = env.sequence::<f64>(config.horizon)?;
        demands.push((seed, envs.iter().map(|e| e.requests.clone()).collect()));
        let bench = Benchmarks::solve(&problem, envs, &static_horizons, &config.solver, &mut stats);
        for (&h, x) in &bench.fixed {
            if x.is_none() {
                log::warn!("seed {seed}: static benchmark infeasible for T = {h}");
                infeasible_static.push((seed, h));
            }
        }
        for (i, &h) in prefixes.iter().enumerate() {
            if let Some(Some(x)) = bench.fixed.get(&h) {
                gaps[i].push(metrics::cost_gap(
                    &problem,
                    x,
                    &bench.dynamic[..h],
                    &bench.envs[..h],
                ));
            }
        }

        for &alg in &config.algorithms {
            let rec = simulate(alg, &problem, &bench.envs, &hp, init);
            let fit_sums = metrics::prefix_sums(rec.slots.iter().map(|s| s.violation()));
            per_seed.push(SeedCurves {
                seed,
                algorithm: alg,
                fit: prefixes.iter().map(|&h| fit_sums[h - 1]).collect(),
                static_regret: prefixes
                    .iter()
                    .map(|&h| bench.static_regret(&problem, &rec, h))
                    .collect(),
                dynamic_regret: prefixes
                    .iter()
                    .map(|&h| bench.dynamic_regret(&problem, &rec, h))
                    .collect(),
            });

            for &h in &replays {
                let hp_h = HyperParams::for_horizon(config.step.eta0, h, sigma);
                let rec = simulate(alg, &problem, &bench.envs[..h], &hp_h, init);
                let path = oracle::path_length(&bench.dynamic[..h]);
                let static_regret = bench.static_regret(&problem, &rec, h);
                let dynamic_regret = bench.dynamic_regret(&problem, &rec, h);
                let fit = metrics::fit(&rec.slots);
                let u: Option<GuaranteeBounds> =
                    bounds::guarantee_bounds(&constants, &hp_h, h, path).ok();
                // the dynamic bound is asserted only alongside a feasible static benchmark
                let dr_ok = u
                    .filter(|_| static_regret.is_some())
                    .map(|u| dynamic_regret <= u.dynamic_regret);
                bound_rows.push(BoundRow {
                    seed,
                    algorithm: alg,
                    t: h,
                    eta: hp_h.step,
                    static_regret,
                    dynamic_regret,
                    fit,
                    path_length: path,
                    u_sr: u.map(|u| u.static_regret),
                    u_dr: u.map(|u| u.dynamic_regret),
                    u_f: u.map(|u| u.fit),
                    sr_ok: u.zip(static_regret).map(|(u, r)| r <= u.static_regret),
                    dr_ok,
                    fit_ok: u.map(|u| fit <= u.fit),
                });
            }
        }
    }

    let mut curves = BTreeMap::new();
    for &alg in &config.algorithms {
        let runs: Vec<&SeedCurves> = per_seed.iter().filter(|c| c.algorithm == alg).collect();
        let mut rows = Vec::new();
        for (i, &h) in prefixes.iter().enumerate() {
            let fit: Vec<f64> = runs.iter().map(|c| per_slot(c.fit[i], h)).collect();
            rows.push(aggregate(h, alg.name(), "fit_per_slot", &fit));
        }
        let mut regret_rows = Vec::new();
        for (i, &h) in prefixes.iter().enumerate() {
            let sr: Vec<f64> = runs
                .iter()
                .filter_map(|c| c.static_regret[i].map(|v| per_slot(v, h)))
                .collect();
            let dr: Vec<f64> = runs
                .iter()
                .map(|c| per_slot(c.dynamic_regret[i], h))
                .collect();
            regret_rows.push(aggregate(h, alg.name(), "static_regret_per_slot", &sr));
            regret_rows.push(aggregate(h, alg.name(), "dynamic_regret_per_slot", &dr));
        }
        rows.extend(regret_rows);
        curves.insert(alg, rows);
    }
    let cost_gap = prefixes
        .iter()
        .zip(&gaps)
        .map(|(&h, g)| aggregate(h, "benchmark", "cost_gap", g))
        .collect();

    let manifest = Manifest {
        config: config.clone(),
        sigma,
        sigma_floor: bounds::sigma_floor(&constants),
        beta: bounds::beta(&constants, sigma),
        eta: hp.step,
        constants,
        dimension: problem.dim(),
        infeasible_static,
    };
    Ok(ExperimentResults {
        manifest,
        curves,
        per_seed,
        cost_gap,
        bounds: bound_rows,
        demands,
        solver: stats,
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// The output directory: `override_dir`, else the environment variable, else
/// the configured one.
pub fn output_dir(config: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| config.output_dir.clone())
}

/// Writes every result file into `dir`, creating it if needed.
pub fn emit_results(results: &ExperimentResults, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (alg, rows) in &results.curves {
        let (fit, regret): (Vec<&CurveRow>, Vec<&CurveRow>) =
            rows.iter().partition(|r| r.metric == "fit_per_slot");
        write_rows(&dir.join(format!("{}_fit.csv", alg.name())), &fit)?;
        write_rows(&dir.join(format!("{}_regret.csv", alg.name())), &regret)?;
    }
    write_rows(&dir.join("cost_gap.csv"), &results.cost_gap)?;
    write_rows(&dir.join("bounds.csv"), &results.bounds)?;

    let path = dir.join("demands.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let devices = results.manifest.config.topology.devices;
    let mut header = vec!["seed".to_string(), "t".to_string()];
    header.extend((0..devices).map(|d| format!("d{d}")));
    w.write_record(&header)?;
    for (seed, rows) in &results.demands {
        for (t, r) in rows.iter().enumerate() {
            let mut rec = vec![seed.to_string(), (t + 1).to_string()];
            rec.extend(r.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&results.manifest)?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Outcome of re-checking a run directory's bound rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsCheck {
    pub checked: usize,
    pub skipped: usize,
    pub failures: Vec<BoundRow>,
}

impl BoundsCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }
}

/// Re-evaluates the guarantee inequalities on the cooperative rows of
/// `bounds.csv` in `dir`. Rows without bound values (invalid sigma) are
/// counted as skipped.
pub fn check_bounds(dir: &Path) -> Result<BoundsCheck> {
    let path = dir.join("bounds.csv");
    let mut r = csv::Reader::from_path(&path)?;
    let mut out = BoundsCheck {
        checked: 0,
        skipped: 0,
        failures: Vec::new(),
    };
    for row in r.deserialize() {
        let row: BoundRow = row?;
        if row.algorithm != Algorithm::Cooperative {
            continue;
        }
        let (Some(u_sr), Some(u_dr), Some(u_f)) = (row.u_sr, row.u_dr, row.u_f) else {
            out.skipped += 1;
            continue;
        };
        out.checked += 1;
        let sr = row.static_regret.is_none_or(|v| v <= u_sr);
        let dr = row.static_regret.is_none() || row.dynamic_regret <= u_dr;
        if !(sr && dr && row.fit <= u_f) {
            out.failures.push(row);
        }
    }
    Ok(out)
}

/// One benchmark solve in the `solve-bench` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub kind: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves the static benchmark over the full horizon and every per-slot
/// benchmark for each seed. Writes `benchmarks.csv` and
/// `benchmark_solutions.json` into `dir`.
pub fn solve_bench(config: &ExperimentConfig, dir: &Path) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let problem = config.problem()?;
    let base_env = Environment::new(&config.environment, &problem.topology)?;
    let mut rows = Vec::new();
    let mut solutions: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for &seed in &config.seeds {
        let envs = base_env
            .clone()
            .with_seed(seed)
            .sequence::<f64>(config.horizon)?;
        let s = oracle::solve_static(&problem, &envs, &config.solver);
        rows.push(BenchRow {
            seed,
            kind: "static".into(),
            t: config.horizon,
            objective: s.objective,
            max_violation: s.max_violation,
            iterations: s.iterations,
            converged: s.converged,
        });
        let mut dyn_solutions = Vec::new();
        for (i, r) in oracle::solve_dynamic_all(&problem, &envs, &config.solver)
            .into_iter()
            .enumerate()
        {
            rows.push(BenchRow {
                seed,
                kind: "dynamic".into(),
                t: i + 1,
                objective: r.objective,
                max_violation: r.max_violation,
                iterations: r.iterations,
                converged: r.converged,
            });
            dyn_solutions.push(r.solution);
        }
        solutions.insert(format!("{seed}/static"), vec![s.solution]);
        solutions.insert(format!("{seed}/dynamic"), dyn_solutions);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(&dir.join("benchmarks.csv"), &rows)?;
    let path = dir.join("benchmark_solutions.json");
    fs::write(&path, serde_json::to_string(&solutions)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"
horizon = 20
seeds = [1]
algorithms = ["cooperative"]
bound_horizons = [10]

[topology]
devices = 1
base_stations = 1
servers = 1

[step]
eta0 = 0.5
sigma = "auto"
"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_toml(SMOKE).unwrap();
        assert_eq!(c.step.sigma, Sigma::Auto);
        assert_eq!(c.prefixes(), vec![10, 20]);
        assert_eq!(c.replay_horizons(), vec![10]);
        assert_eq!(c.environment, EnvConfig::default());
        c.validate().unwrap();
        let numeric = SMOKE.replace("\"auto\"", "5");
        let c = ExperimentConfig::from_toml(&numeric).unwrap();
        assert_eq!(c.step.sigma, Sigma::Value(5.0));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml(&SMOKE.replace("\"auto\"", "\"big\"")).is_err());
        assert!(ExperimentConfig::from_toml(&SMOKE.replace("horizon", "horizn")).is_err());
        let c = ExperimentConfig::from_toml(&SMOKE.replace("seeds = [1]", "seeds = []")).unwrap();
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let c = ExperimentConfig::from_toml(&SMOKE.replace("eta0 = 0.5", "eta0 = -1")).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn sigma_serializes_both_ways() {
        assert_eq!(serde_json::to_string(&Sigma::Auto).unwrap(), "\"auto\"");
        assert_eq!(serde_json::to_string(&Sigma::Value(2.5)).unwrap(), "2.5");
        let v: Sigma = serde_json::from_str("2.5").unwrap();
        assert_eq!(v, Sigma::Value(2.5));
    }
}
