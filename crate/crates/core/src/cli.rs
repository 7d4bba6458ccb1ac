//! Configuration-driven experiment runner.
//!
//! A run is described by one TOML file; the binary maps each subcommand to a
//! mode, loads the file, and dispatches here. Every run writes its outputs
//! under `output_dir` and returns a [`RunSummary`] the binary prints as a
//! provenance block on stdout.
//!
//! Determinism contract: the bytes of every output file are a function of
//! the config file alone. Anything that varies between runs of the same
//! config (wall-clock time) appears only in the stdout provenance block,
//! never in a file, and the thread count never influences either paths or
//! estimates.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    moment_sweep_bm, moment_sweep_jump, moments_to_csv, strong_error_bm, strong_error_bm_exact,
    strong_error_jump, ExactPathMap, SweepSpec,
};
use crate::driver::{gen_brownian_indexed, gen_jumps_indexed};
use crate::error::{Error, Result};
use crate::model::{
    build_grid, parse_rational, DiffusionSystem, GridSpec, History, JumpSystem, PathRecord,
    Rational,
};
use crate::problems::{
    audit_diffusion, audit_jump, catalog, make_cubic_neutral, make_gbm, make_jump_cubic_neutral,
    make_jump_linear, CatalogSystem,
};
use crate::scheme::{simulate_bm, simulate_jump, simulate_untamed};

/// What a run is asked to do; must agree with the subcommand used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Converge,
    Moments,
    Check,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Converge => "converge",
            Mode::Moments => "moments",
            Mode::Check => "check",
        }
    }
}

/// Noise family driving the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    Brownian,
    Jump,
}

/// The `problem` field: either a bare catalog id (default parameters) or a
/// table with the id and parameter overrides for that family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Id(String),
    Inline(ProblemParams),
}

/// Inline catalog parameters. Fields not used by the named family are
/// rejected, so a typo cannot silently fall back to a default.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub id: String,
    /// GBM drift coefficient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// GBM diffusion coefficient.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_hat: Option<f64>,
    /// Constant initial level (all families).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Neutral contraction constant (cubic families).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Total jump intensity (jump families).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_tot: Option<f64>,
    /// Mean mark size (jump families).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_mark: Option<f64>,
}

/// One experiment, as parsed from the TOML config file.
///
/// Which fields are required depends on the mode; each runner validates its
/// own needs and names the missing field in the error. Step sizes are
/// strings parsed as exact rationals (`"1/16"`, `"0.0625"`).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub driver: DriverKind,
    pub problem: ProblemSpec,
    /// Time horizon T.
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<String>,
    /// Delay tau.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    /// Step size for simulate mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<String>,
    /// Step sizes for converge/moments mode, strictly decreasing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<String>>,
    /// Reference step for self-convergence; omit on GBM to compare against
    /// the closed-form solution instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_ref: Option<String>,
    /// Taming exponent override; defaults to the catalog system's value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Moment order; defaults to 2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Norm threshold that cuts an untamed path short; requires `untamed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explosion_threshold: Option<f64>,
    /// Run the raw-drift scheme instead of the tamed one (brownian only).
    #[serde(default)]
    pub untamed: bool,
    /// How many leading path indices simulate mode writes to CSV files;
    /// defaults to all of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_paths: Option<usize>,
    /// Sample count for check mode; defaults to 10^4.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    /// Ball radius for check mode; defaults to 10.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// What a run produced: the files written plus mode-specific headline
/// numbers for the provenance block.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub details: serde_json::Value,
}

/// Parses a config file.
///
/// # Errors
///
/// [`Error::Config`] carrying the TOML diagnostic (with line/field info) on
/// parse failure.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Dispatches a parsed config to its runner.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    match cfg.mode {
        Mode::Simulate => run_simulate(cfg),
        Mode::Converge => run_converge(cfg),
        Mode::Moments => run_moments(cfg),
        Mode::Check => run_check(cfg),
    }
}

fn missing(field: &str, mode: Mode) -> Error {
    Error::Config(format!("field {field:?} is required in {} mode", mode.as_str()))
}

fn parse_field(value: &str, field: &str) -> Result<Rational> {
    parse_rational(value)
        .map_err(|e| Error::Config(format!("field {field:?}: {e}")))
}

struct ResolvedProblem {
    diffusion: Option<(DiffusionSystem, History)>,
    jump: Option<(JumpSystem, History)>,
    /// Closed-form solution map when the family has one (GBM).
    exact_path: Option<ExactPathMap>,
}

/// Builds the configured system, applying inline parameter overrides and the
/// top-level alpha override, and checks it matches the configured driver.
fn resolve_problem(cfg: &RunConfig) -> Result<ResolvedProblem> {
    let (id, params) = match &cfg.problem {
        ProblemSpec::Id(id) => (id.as_str(), None),
        ProblemSpec::Inline(p) => (p.id.as_str(), Some(p)),
    };
    let reject_params = |allowed: &[&str]| -> Result<()> {
        if let Some(p) = params {
            let given = [
                ("mu", p.mu.is_some()),
                ("sigma_hat", p.sigma_hat.is_some()),
                ("x0", p.x0.is_some()),
                ("kappa", p.kappa.is_some()),
                ("lambda_tot", p.lambda_tot.is_some()),
                ("mean_mark", p.mean_mark.is_some()),
            ];
            for (name, set) in given {
                if set && !allowed.contains(&name) {
                    return Err(Error::Config(format!(
                        "problem {id:?} does not take parameter {name:?}"
                    )));
                }
            }
        }
        Ok(())
    };
    let x0 = params.and_then(|p| p.x0);
    let mut resolved = match id {
        "gbm" => {
            reject_params(&["mu", "sigma_hat", "x0"])?;
            let mu = params.and_then(|p| p.mu).unwrap_or(0.05);
            let sigma_hat = params.and_then(|p| p.sigma_hat).unwrap_or(0.2);
            let problem = make_gbm(mu, sigma_hat, x0.unwrap_or(1.0))?;
            ResolvedProblem {
                diffusion: Some((problem.system, problem.history)),
                jump: None,
                exact_path: Some(problem.exact_path),
            }
        }
        "cubic_neutral" => {
            reject_params(&["kappa", "x0"])?;
            let kappa = params.and_then(|p| p.kappa).unwrap_or(0.25);
            let system = make_cubic_neutral(kappa)?;
            let history = History::constant(vec![x0.unwrap_or(1.0)]);
            ResolvedProblem { diffusion: Some((system, history)), jump: None, exact_path: None }
        }
        "jump_linear" => {
            reject_params(&["lambda_tot", "mean_mark", "x0"])?;
            let lambda = params.and_then(|p| p.lambda_tot).unwrap_or(2.0);
            let mean_mark = params.and_then(|p| p.mean_mark).unwrap_or(0.5);
            let system = make_jump_linear(lambda, mean_mark)?;
            let history = History::constant(vec![x0.unwrap_or(1.0)]);
            ResolvedProblem { diffusion: None, jump: Some((system, history)), exact_path: None }
        }
        "jump_cubic_neutral" => {
            reject_params(&["kappa", "lambda_tot", "mean_mark", "x0"])?;
            let kappa = params.and_then(|p| p.kappa).unwrap_or(0.25);
            let lambda = params.and_then(|p| p.lambda_tot).unwrap_or(2.0);
            let mean_mark = params.and_then(|p| p.mean_mark).unwrap_or(0.5);
            let system = make_jump_cubic_neutral(kappa, lambda, mean_mark)?;
            let history = History::constant(vec![x0.unwrap_or(1.0)]);
            ResolvedProblem { diffusion: None, jump: Some((system, history)), exact_path: None }
        }
        other => {
            reject_params(&["x0"])?;
            match catalog(other)? {
                CatalogSystem::Diffusion { system, history } => ResolvedProblem {
                    diffusion: Some((
                        system,
                        x0.map(|v| History::constant(vec![v])).unwrap_or(history),
                    )),
                    jump: None,
                    exact_path: None,
                },
                CatalogSystem::Jump { system, history } => ResolvedProblem {
                    diffusion: None,
                    jump: Some((
                        system,
                        x0.map(|v| History::constant(vec![v])).unwrap_or(history),
                    )),
                    exact_path: None,
                },
            }
        }
    };
    if let Some(alpha) = cfg.alpha {
        if let Some((sys, h)) = resolved.diffusion.take() {
            let mut sys = sys;
            sys.alpha = alpha;
            resolved.diffusion = Some((sys.validated()?, h));
        }
        if let Some((sys, h)) = resolved.jump.take() {
            let mut sys = sys;
            sys.alpha = alpha;
            resolved.jump = Some((sys.validated()?, h));
        }
    }
    match cfg.driver {
        DriverKind::Brownian if resolved.diffusion.is_none() => Err(Error::Config(format!(
            "problem {id:?} is jump-driven but the config says driver = \"brownian\""
        ))),
        DriverKind::Jump if resolved.jump.is_none() => Err(Error::Config(format!(
            "problem {id:?} is Brownian-driven but the config says driver = \"jump\""
        ))),
        _ => Ok(resolved),
    }
}

fn grid_from(cfg: &RunConfig, step_field: &str, step: &str) -> Result<GridSpec> {
    let horizon = cfg.horizon.as_deref().ok_or_else(|| missing("T", cfg.mode))?;
    let tau = cfg.tau.as_deref().ok_or_else(|| missing("tau", cfg.mode))?;
    build_grid(
        parse_field(horizon, "T")?,
        parse_field(tau, "tau")?,
        parse_field(step, step_field)?,
    )
}

fn sweep_from(cfg: &RunConfig) -> Result<SweepSpec> {
    let horizon = cfg.horizon.as_deref().ok_or_else(|| missing("T", cfg.mode))?;
    let tau = cfg.tau.as_deref().ok_or_else(|| missing("tau", cfg.mode))?;
    let h_list = cfg.h_list.as_ref().ok_or_else(|| missing("h_list", cfg.mode))?;
    Ok(SweepSpec {
        horizon: parse_field(horizon, "T")?,
        delay: parse_field(tau, "tau")?,
        h_list: h_list
            .iter()
            .map(|s| parse_field(s, "h_list"))
            .collect::<Result<_>>()?,
        p: cfg.p.unwrap_or(2.0),
        n_paths: cfg.n_paths.ok_or_else(|| missing("n_paths", cfg.mode))?,
        base_seed: cfg.base_seed,
    })
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    cfg.output_dir.as_deref().ok_or_else(|| missing("output_dir", cfg.mode))
}

/// Writes a path record as CSV: grid index, time, then one column per state
/// component. History rows (negative indices) are included; an exploded
/// record simply stops at its last finite row.
fn record_to_csv(rec: &PathRecord) -> String {
    let mut out = String::from("n,t");
    for i in 0..rec.dim() {
        out.push_str(&format!(",x_{i}"));
    }
    out.push('\n');
    for (n, state) in rec.entries() {
        out.push_str(&format!("{n},{:.16e}", rec.grid().time_f64(n)));
        for v in state {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// JSON report wrapper: every file-backed JSON report carries the config
/// echo and the library version alongside its payload, and nothing
/// run-dependent, so reruns are byte-identical.
fn report_json<T: Serialize>(cfg: &RunConfig, key: &str, payload: &T) -> Result<String> {
    let mut root = serde_json::Map::new();
    root.insert("config".into(), serde_json::to_value(cfg).map_err(json_err)?);
    root.insert("base_seed".into(), cfg.base_seed.into());
    root.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    root.insert(key.into(), serde_json::to_value(payload).map_err(json_err)?);
    let mut text =
        serde_json::to_string_pretty(&serde_json::Value::Object(root)).map_err(json_err)?;
    text.push('\n');
    Ok(text)
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Config(format!("serialization: {e}"))
}

/// Simulates `n_paths` paths and writes the first `dump_paths` of them as
/// one CSV each, named `path_00000.csv` onward.
pub fn run_simulate(cfg: &RunConfig) -> Result<RunSummary> {
    let resolved = resolve_problem(cfg)?;
    let h = cfg.h.as_deref().ok_or_else(|| missing("h", cfg.mode))?;
    let grid = grid_from(cfg, "h", h)?;
    let n_paths = cfg.n_paths.ok_or_else(|| missing("n_paths", cfg.mode))?;
    let dir = output_dir(cfg)?;
    let n_dump = cfg.dump_paths.unwrap_or(n_paths).min(n_paths);
    if cfg.untamed && cfg.explosion_threshold.is_none() {
        return Err(Error::Config(
            "untamed = true requires explosion_threshold (the raw scheme may diverge)".into(),
        ));
    }
    if !cfg.untamed && cfg.explosion_threshold.is_some() {
        return Err(Error::Config(
            "explosion_threshold only applies when untamed = true".into(),
        ));
    }

    let simulate_one = |j: u64| -> Result<PathRecord> {
        match (&resolved.diffusion, &resolved.jump) {
            (Some((sys, history)), None) => {
                let seg = crate::model::sample_segment(&grid, history)?;
                let drv = gen_brownian_indexed(&grid, sys.dim_noise, cfg.base_seed, j);
                if cfg.untamed {
                    let threshold = cfg.explosion_threshold.expect("checked above");
                    simulate_untamed(sys, &seg, &drv, threshold)
                } else {
                    simulate_bm(sys, &seg, &drv)
                }
            }
            (None, Some((sys, history))) => {
                let seg = crate::model::sample_segment(&grid, history)?;
                let jr = gen_jumps_indexed(
                    &grid,
                    sys.total_intensity,
                    &sys.mark_sampler,
                    cfg.base_seed,
                    j,
                )?;
                simulate_jump(sys, &seg, &grid, &jr)
            }
            _ => unreachable!("resolve_problem matched driver"),
        }
    };

    use rayon::prelude::*;
    // Records are kept only for the dumped prefix; the rest contribute to
    // the explosion count and are dropped. Path j's noise depends only on
    // (base_seed, j), so the two halves never share state.
    let dumped: Vec<Result<PathRecord>> =
        (0..n_dump as u64).into_par_iter().map(simulate_one).collect();
    let tail_exploded: Vec<Result<bool>> = (n_dump as u64..n_paths as u64)
        .into_par_iter()
        .map(|j| simulate_one(j).map(|rec| rec.exploded_from().is_some()))
        .collect();

    let mut files = Vec::with_capacity(n_dump);
    let mut n_exploded = 0usize;
    for (j, res) in dumped.into_iter().enumerate() {
        let rec = res?;
        if rec.exploded_from().is_some() {
            n_exploded += 1;
        }
        files.push(write_file(dir, &format!("path_{j:05}.csv"), &record_to_csv(&rec))?);
    }
    for res in tail_exploded {
        if res? {
            n_exploded += 1;
        }
    }
    Ok(RunSummary {
        files,
        details: serde_json::json!({
            "n_paths": n_paths,
            "n_dumped": n_dump,
            "n_exploded": n_exploded,
        }),
    })
}

/// Runs a strong-error sweep and writes `error_report.csv` and
/// `error_report.json`.
///
/// Reference selection: with `h_ref` the study couples every resolution to a
/// simulated reference at that step; without it the problem must provide a
/// closed-form solution (GBM), which is then evaluated on each grid's own
/// noise.
pub fn run_converge(cfg: &RunConfig) -> Result<RunSummary> {
    let resolved = resolve_problem(cfg)?;
    let sweep = sweep_from(cfg)?;
    let dir = output_dir(cfg)?;
    let report = match (&resolved.diffusion, &resolved.jump) {
        (Some((sys, history)), None) => match &cfg.h_ref {
            Some(h_ref) => strong_error_bm(sys, history, &sweep, parse_field(h_ref, "h_ref")?)?,
            None => {
                let exact = resolved.exact_path.as_ref().ok_or_else(|| {
                    Error::Config(
                        "h_ref is required unless the problem has a closed-form solution (gbm)"
                            .into(),
                    )
                })?;
                strong_error_bm_exact(sys, history, exact, &sweep)?
            }
        },
        (None, Some((sys, history))) => {
            let h_ref = cfg.h_ref.as_deref().ok_or_else(|| missing("h_ref", cfg.mode))?;
            strong_error_jump(sys, history, &sweep, parse_field(h_ref, "h_ref")?)?
        }
        _ => unreachable!("resolve_problem matched driver"),
    };
    let csv = write_file(dir, "error_report.csv", &report.to_csv())?;
    let json = write_file(dir, "error_report.json", &report_json(cfg, "report", &report)?)?;
    Ok(RunSummary {
        files: vec![csv, json],
        details: serde_json::json!({ "fit": report.fit, "n_rows": report.rows.len() }),
    })
}

/// Runs a moment sweep and writes `moments.csv` and `moments.json`.
pub fn run_moments(cfg: &RunConfig) -> Result<RunSummary> {
    let resolved = resolve_problem(cfg)?;
    let sweep = sweep_from(cfg)?;
    let dir = output_dir(cfg)?;
    let rows = match (&resolved.diffusion, &resolved.jump) {
        (Some((sys, history)), None) => moment_sweep_bm(sys, history, &sweep)?,
        (None, Some((sys, history))) => moment_sweep_jump(sys, history, &sweep)?,
        _ => unreachable!("resolve_problem matched driver"),
    };
    let csv = write_file(dir, "moments.csv", &moments_to_csv(&rows))?;
    let json = write_file(dir, "moments.json", &report_json(cfg, "rows", &rows)?)?;
    let max = rows.iter().map(|r| r.moment_p).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.moment_p).fold(f64::INFINITY, f64::min);
    Ok(RunSummary {
        files: vec![csv, json],
        details: serde_json::json!({ "moment_p_min": min, "moment_p_max": max }),
    })
}

/// Audits the configured problem's declared constants and writes
/// `audit.json`. Violations are findings, not failures: the run exits 0
/// either way and the report carries the verdict.
pub fn run_check(cfg: &RunConfig) -> Result<RunSummary> {
    let resolved = resolve_problem(cfg)?;
    let n_samples = cfg.n_samples.unwrap_or(10_000);
    let radius = cfg.radius.unwrap_or(10.0);
    let dir = output_dir(cfg)?;
    let report = match (&resolved.diffusion, &resolved.jump) {
        (Some((sys, _)), None) => audit_diffusion(sys, n_samples, radius, cfg.base_seed),
        (None, Some((sys, _))) => {
            audit_jump(sys, n_samples, radius, cfg.p.unwrap_or(2.0), cfg.base_seed)
        }
        _ => unreachable!("resolve_problem matched driver"),
    };
    let json = write_file(dir, "audit.json", &report_json(cfg, "report", &report)?)?;
    Ok(RunSummary {
        files: vec![json],
        details: serde_json::json!({
            "clean": report.is_clean(),
            "max_violation": report.max_violation(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("run.toml");
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn config_round_trips_through_toml() {
        let text = r#"
            mode = "converge"
            driver = "brownian"
            problem = "gbm"
            T = "1"
            tau = "1/4"
            h_list = ["1/16", "1/32"]
            p = 2.0
            n_paths = 100
            base_seed = 7
            output_dir = "out"
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.mode, Mode::Converge);
        assert_eq!(cfg.driver, DriverKind::Brownian);
        assert!(matches!(&cfg.problem, ProblemSpec::Id(id) if id == "gbm"));
        assert_eq!(cfg.base_seed, 7);
        // echo serializes without the unset optional fields
        let echo = serde_json::to_value(&cfg).unwrap();
        assert_eq!(echo["T"], "1");
        assert!(echo.get("h").is_none());
    }

    #[test]
    fn inline_problem_parameters_parse() {
        let text = r#"
            mode = "check"
            driver = "brownian"
            problem = { id = "cubic_neutral", kappa = 0.3 }
            output_dir = "out"
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        match &cfg.problem {
            ProblemSpec::Inline(p) => {
                assert_eq!(p.id, "cubic_neutral");
                assert_eq!(p.kappa, Some(0.3));
            }
            other => panic!("expected inline problem, got {other:?}"),
        }
    }

    #[test]
    fn unknown_config_field_is_rejected_with_diagnostic() {
        let dir = TempDir::new().unwrap();
        let path = write_config(
            dir.path(),
            "mode = \"simulate\"\ndriver = \"brownian\"\nproblem = \"gbm\"\nh_lst = [\"1/4\"]\n",
        );
        let err = load_config(&path).unwrap_err();
        assert_eq!(err.id(), "Config");
        assert!(err.to_string().contains("h_lst"), "diagnostic names the field: {err}");
    }

    #[test]
    fn simulate_zero_coefficients_gives_constant_rows() {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("out");
        let cfg: RunConfig = toml::from_str(&format!(
            r#"
            mode = "simulate"
            driver = "brownian"
            problem = {{ id = "gbm", mu = 0.0, sigma_hat = 0.0, x0 = 2.5 }}
            T = "1"
            tau = "1/4"
            h = "1/4"
            n_paths = 2
            output_dir = "{}"
            "#,
            out.display()
        ))
        .unwrap();
        let summary = run(&cfg).unwrap();
        assert_eq!(summary.files.len(), 2);
        let text = fs::read_to_string(&summary.files[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,t,x_0"));
        // one row per grid index from -delay_steps to steps, all at 2.5
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 6);
        for row in rows {
            assert!(row.ends_with(&format!(",{:.16e}", 2.5)), "row {row}");
        }
    }

    #[test]
    fn simulate_runs_are_byte_identical() {
        let make = |out: &Path| -> Vec<u8> {
            let cfg: RunConfig = toml::from_str(&format!(
                r#"
                mode = "simulate"
                driver = "jump"
                problem = "jump_linear"
                T = "1"
                tau = "1/4"
                h = "1/8"
                n_paths = 3
                base_seed = 99
                output_dir = "{}"
                "#,
                out.display()
            ))
            .unwrap();
            let summary = run(&cfg).unwrap();
            summary
                .files
                .iter()
                .flat_map(|f| fs::read(f).unwrap())
                .collect()
        };
        let d1 = TempDir::new().unwrap();
        let d2 = TempDir::new().unwrap();
        assert_eq!(make(&d1.path().join("a")), make(&d2.path().join("b")));
    }

    #[test]
    fn non_commensurate_grid_surfaces_verbatim() {
        let cfg: RunConfig = toml::from_str(
            r#"
            mode = "simulate"
            driver = "brownian"
            problem = "gbm"
            T = "1"
            tau = "0.3"
            h = "0.125"
            n_paths = 1
            output_dir = "out"
            "#,
        )
        .unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.id(), "NotCommensurate");
    }

    #[test]
    fn converge_non_dyadic_h_list_fails_with_not_divisible() {
        let dir = TempDir::new().unwrap();
        let cfg: RunConfig = toml::from_str(&format!(
            r#"
            mode = "converge"
            driver = "brownian"
            problem = "cubic_neutral"
            T = "1"
            tau = "1/4"
            h_list = ["1/12"]
            h_ref = "1/8"
            n_paths = 4
            output_dir = "{}"
            "#,
            dir.path().display()
        ))
        .unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.id(), "NotDivisible");
    }

    #[test]
    fn converge_single_reference_row_has_zero_error() {
        let dir = TempDir::new().unwrap();
        let cfg: RunConfig = toml::from_str(&format!(
            r#"
            mode = "converge"
            driver = "brownian"
            problem = "cubic_neutral"
            T = "1/2"
            tau = "1/4"
            h_list = ["1/8"]
            h_ref = "1/8"
            n_paths = 8
            base_seed = 3
            output_dir = "{}"
            "#,
            dir.path().display()
        ))
        .unwrap();
        let summary = run(&cfg).unwrap();
        let csv = fs::read_to_string(&summary.files[0]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("h,n_paths,p,err_p,err_root,stderr,moment_p"));
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[3].parse::<f64>().unwrap(), 0.0);
        // no fit from a single row: JSON carries null
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&summary.files[1]).unwrap()).unwrap();
        assert!(json["report"]["fit"].is_null());
        assert_eq!(json["config"]["problem"], "cubic_neutral");
    }

    #[test]
    fn driver_problem_mismatch_is_a_config_error() {
        let cfg: RunConfig = toml::from_str(
            r#"
            mode = "simulate"
            driver = "jump"
            problem = "gbm"
            T = "1"
            tau = "1/4"
            h = "1/8"
            n_paths = 1
            output_dir = "out"
            "#,
        )
        .unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.id(), "Config");
        assert!(err.to_string().contains("gbm"));
    }

    #[test]
    fn check_mode_writes_audit_report() {
        let dir = TempDir::new().unwrap();
        let cfg: RunConfig = toml::from_str(&format!(
            r#"
            mode = "check"
            driver = "brownian"
            problem = "broken_cubic"
            n_samples = 500
            radius = 10.0
            output_dir = "{}"
            "#,
            dir.path().display()
        ))
        .unwrap();
        let summary = run(&cfg).unwrap();
        assert_eq!(summary.details["clean"], serde_json::Value::Bool(false));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&summary.files[0]).unwrap()).unwrap();
        let entries = json["report"]["entries"].as_array().unwrap();
        assert!(entries.iter().any(|e| e["assumption"] == "A1"
            && e["max_violation"].as_f64().unwrap() > 0.0));
    }

    #[test]
    fn unknown_problem_id_fails_check() {
        let cfg: RunConfig = toml::from_str(
            r#"
            mode = "check"
            driver = "brownian"
            problem = "heston"
            output_dir = "out"
            "#,
        )
        .unwrap();
        assert_eq!(run(&cfg).unwrap_err().id(), "UnknownProblem");
    }

    #[test]
    fn untamed_without_threshold_is_rejected() {
        let cfg: RunConfig = toml::from_str(
            r#"
            mode = "simulate"
            driver = "brownian"
            problem = "cubic_neutral"
            T = "1"
            tau = "1/4"
            h = "1/4"
            n_paths = 1
            untamed = true
            output_dir = "out"
            "#,
        )
        .unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.id(), "Config");
        assert!(err.to_string().contains("explosion_threshold"));
    }

    #[test]
    fn moments_mode_writes_rows_for_every_step() {
        let dir = TempDir::new().unwrap();
        let cfg: RunConfig = toml::from_str(&format!(
            r#"
            mode = "moments"
            driver = "brownian"
            problem = "cubic_neutral"
            T = "1/2"
            tau = "1/4"
            h_list = ["1/4", "1/8"]
            n_paths = 16
            base_seed = 5
            output_dir = "{}"
            "#,
            dir.path().display()
        ))
        .unwrap();
        let summary = run(&cfg).unwrap();
        let csv = fs::read_to_string(&summary.files[0]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("h,n_paths,p,moment_p"));
        assert_eq!(lines.count(), 2);
    }
}
