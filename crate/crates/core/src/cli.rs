//! Flat `key=value` configuration and the command runner behind the
//! `hjchar` binary.
//!
//! A run reads an optional config file, applies `key=value` overrides from
//! the command line on top, validates everything at once and dispatches on
//! `command`. All artifacts go under `out_dir`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use crate::analysis::properties::property_suite;
use crate::analysis::{bound_monitor, truncation_experiment, TruncationConfig};
use crate::charflow::{flow_roundtrip_error, flow_uniform, PhasePoint};
use crate::error::{ConfigIssue, Error, Result};
use crate::field::{solve_forward_flood, solve_via_shooting, GridSpec, InitialData, SeedSpec, SolutionField, ViaShootingConfig, MIN_NX};
use crate::fundamental::{fundamental_solution, verify_calibration, ShootingConfig, MIN_TIME};
use crate::models::{check_assumptions, osgood_pointwise_check, CompactBox, Hamiltonian, HamiltonianModel, ModelKind};
use crate::oracle::{compare_fields, hopf_lax_field, lf_self_convergence, solve_lf, ErrorReport, ErrorRow, LFConfig};
use crate::output::{field_csv, json_string, trajectory_csv, truncation_csv, write_artifact};

/// Documented configuration keys: `(key, default, meaning)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("command", "(required)", "flow | fundamental | solve | oracle | compare | osgood | truncation | props"),
    ("model", "free", "catalog name, see --list-models"),
    ("lambda", "1", "u-coefficient of discounted / antidiscounted"),
    ("potential", "1 (0 for free)", "amplitude a of a cos(2 pi x); 0 gives the V=0 variant"),
    ("phi", "const:0", "const:c | cos:a:m:b | sin:a:m:b | table:path"),
    ("T", "1.0", "horizon, > 0"),
    ("times", "T", "comma-separated output times in (0, T], increasing"),
    ("nx", "200", "grid nodes on the circle, >= 16"),
    ("ny", "400", "flooding seed positions"),
    ("np", "401", "flooding seed momenta"),
    ("p_max", "8", "momentum range for flooding and shooting scans"),
    ("scan_np", "801", "shooting scan nodes"),
    ("k_max", "2", "largest winding searched, 0..=20"),
    ("tol", "1e-10", "integrator tolerance, in (0, 1e-3]"),
    ("root_tol", "1e-10", "landing tolerance of shooting roots"),
    ("refine_depth", "16", "flooding momentum bisection depth, 0..=30"),
    ("polish", "true", "shoot exactly onto each node after flooding"),
    ("via_ny", "32", "y lattice of the per-query shooting solver"),
    ("cfl", "0.45", "Lax-Friedrichs Courant number, in (0, 1]"),
    ("alpha", "auto", "Lax-Friedrichs viscosity speed, > 0"),
    ("reference", "lf", "compare/oracle reference: lf | hopf_lax | shooting"),
    ("threshold", "5e-2 (lf), 5e-3 otherwise", "compare passes when sup error <= threshold"),
    ("n_queries", "20", "grid nodes compared against the shooting reference"),
    ("hopf_lax_ny", "4000", "lattice of the Hopf-Lax evaluator"),
    ("convergence", "(none)", "oracle: comma-separated coarse nx for LF self-convergence"),
    ("x0", "0", "start point for flow, fundamental and truncation"),
    ("u0", "phi(x0)", "start value for flow and fundamental"),
    ("p0", "0", "start momentum for flow"),
    ("x", "0.5", "target point for fundamental"),
    ("trajectory_nodes", "1000", "uniform nodes in trajectory CSVs, >= 2"),
    ("radii", "2,4,8,16", "truncation radii, increasing, at least three"),
    ("queries", "0.25:0.5,0.5:1.0", "truncation queries x:t"),
    ("osgood_u", "5", "osgood: half-width of the u-range of the box"),
    ("osgood_p", "10", "osgood: half-width of the p-range of the box"),
    ("out_dir", "out", "artifact directory"),
    ("deterministic", "true", "seed lattices are always deterministic; only true is accepted"),
];

/// Action identity tolerance checked by `flow`.
pub const ACTION_TOL: f64 = 1e-6;
/// Calibration defect tolerance checked by `fundamental`.
pub const CALIBRATION_TOL: f64 = 1e-6;
/// Accepted range of LF self-convergence orders.
pub const ORDER_RANGE: (f64, f64) = (0.8, 2.6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Flow,
    Fundamental,
    Solve,
    Oracle,
    Compare,
    Osgood,
    Truncation,
    Props,
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "flow" => Command::Flow,
            "fundamental" => Command::Fundamental,
            "solve" => Command::Solve,
            "oracle" => Command::Oracle,
            "compare" => Command::Compare,
            "osgood" => Command::Osgood,
            "truncation" => Command::Truncation,
            "props" => Command::Props,
            _ => return Err(format!("unknown command `{s}`")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Lf,
    HopfLax,
    Shooting,
}

impl FromStr for Reference {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lf" => Ok(Reference::Lf),
            "hopf_lax" => Ok(Reference::HopfLax),
            "shooting" => Ok(Reference::Shooting),
            _ => Err(format!("unknown reference `{s}` (lf | hopf_lax | shooting)")),
        }
    }
}

impl fmt::Display for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reference::Lf => "lf",
            Reference::HopfLax => "hopf_lax",
            Reference::Shooting => "shooting",
        })
    }
}

/// A validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub model: HamiltonianModel,
    pub phi: InitialData,
    pub phi_spec: String,
    pub horizon: f64,
    pub grid: GridSpec,
    pub seeds: SeedSpec,
    pub shooting: ShootingConfig,
    pub via_ny: usize,
    pub cfl: f64,
    pub alpha: Option<f64>,
    pub reference: Reference,
    pub threshold: f64,
    pub n_queries: usize,
    pub hopf_lax_ny: usize,
    pub convergence: Vec<usize>,
    pub x0: f64,
    pub u0: f64,
    pub p0: f64,
    pub x_target: f64,
    pub radii: Vec<f64>,
    pub queries: Vec<(f64, f64)>,
    pub osgood_u: f64,
    pub osgood_p: f64,
    pub out_dir: PathBuf,
}

struct Entry {
    value: String,
    origin: String,
}

struct Entries {
    map: BTreeMap<String, Entry>,
    issues: Vec<ConfigIssue>,
}

impl Entries {
    fn issue(&mut self, key: &str, message: String) {
        let origin = self.map.get(key).map_or_else(|| "config".to_string(), |e| e.origin.clone());
        self.issues.push(ConfigIssue { origin, key: key.to_string(), message });
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.value.as_str())
    }

    /// Parses `key` with `parse`, falling back to `default` when absent and
    /// recording an issue (and returning the default) when invalid.
    fn get<T: Clone>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> std::result::Result<T, String>) -> T {
        let Some(raw) = self.raw(key).map(str::to_string) else {
            return default;
        };
        match parse(&raw) {
            Ok(v) => v,
            Err(msg) => {
                self.issue(key, msg);
                default
            }
        }
    }

    fn real(&mut self, key: &str, default: f64, check: impl Fn(f64) -> bool, range: &str) -> f64 {
        self.get(key, default, |s| {
            let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
            if v.is_finite() && check(v) {
                Ok(v)
            } else {
                Err(format!("{v} is outside {range}"))
            }
        })
    }

    fn count(&mut self, key: &str, default: usize, min: usize, max: usize) -> usize {
        self.get(key, default, |s| {
            let v: usize = s.trim().parse().map_err(|_| format!("`{s}` is not a non-negative integer"))?;
            if (min..=max).contains(&v) {
                Ok(v)
            } else {
                Err(format!("{v} is outside [{min}, {max}]"))
            }
        })
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        self.get(key, default, |s| match s.trim() {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("`{s}` is not true or false")),
        })
    }
}

fn parse_reals(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|_| format!("`{}` is not a number", t.trim()))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("`{}` is not finite", t.trim()))
            }
        })
        .collect()
}

fn increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn collect_entries(text: &str, flags: &[String]) -> Entries {
    let known = |k: &str| KEYS.iter().any(|(key, _, _)| *key == k);
    let mut entries = Entries { map: BTreeMap::new(), issues: Vec::new() };
    let add = |entries: &mut Entries, raw: &str, origin: String, from_file: bool| {
        let Some((key, value)) = raw.split_once('=') else {
            entries.issues.push(ConfigIssue { origin, key: raw.to_string(), message: "expected key=value".into() });
            return;
        };
        let key = key.trim();
        if !known(key) {
            entries.issues.push(ConfigIssue { origin, key: key.to_string(), message: "unknown key".into() });
            return;
        }
        if from_file && entries.map.contains_key(key) {
            entries.issues.push(ConfigIssue { origin, key: key.to_string(), message: "duplicate key".into() });
            return;
        }
        entries.map.insert(key.to_string(), Entry { value: value.trim().to_string(), origin });
    };
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        add(&mut entries, line, format!("line {}", n + 1), true);
    }
    for f in flags {
        add(&mut entries, f, "flag".to_string(), false);
    }
    entries
}

/// Validates `text` (config file contents) with `flags` (`key=value`
/// overrides) on top. All violations are reported together.
pub fn parse_config(text: &str, flags: &[String]) -> Result<RunConfig> {
    let mut e = collect_entries(text, flags);

    let command = match e.raw("command").map(str::to_string) {
        None => {
            e.issue("command", "missing".into());
            Command::Solve
        }
        Some(s) => e.get("command", Command::Solve, |_| s.parse()),
    };
    let kind = e.get("model", ModelKind::Free, |s| s.parse::<ModelKind>().map_err(|_| format!("unknown model `{s}`")));
    let mut model = HamiltonianModel::new(kind);
    model.lambda = e.real("lambda", 1.0, |v| v >= 0.0, "[0, inf)");
    model.potential = e.real("potential", model.potential, |_| true, "the reals");
    let phi_spec = e.raw("phi").unwrap_or("const:0").to_string();
    let phi = e.get("phi", InitialData::constant(0.0), |s| InitialData::from_spec(s).map_err(|err| err.to_string()));

    let horizon = e.real("T", 1.0, |v| v > 0.0, "(0, inf)");
    let times = e.get("times", vec![horizon], |s| {
        let v = parse_reals(s)?;
        if v.is_empty() || !increasing(&v) {
            return Err("times must be increasing".into());
        }
        if v.iter().any(|&t| t <= 0.0 || t > horizon) {
            return Err(format!("times must lie in (0, T = {horizon}]"));
        }
        Ok(v)
    });
    let nx = e.count("nx", 200, MIN_NX, 1 << 20);
    let ny = e.count("ny", 400, 2, 1 << 20);
    let np = e.count("np", 401, 2, 1 << 20);
    let p_max = e.real("p_max", 8.0, |v| v > 0.0, "(0, inf)");
    let scan_np = e.count("scan_np", 801, 3, 1 << 20);
    let k_max = e.count("k_max", 2, 0, 20);
    let tol = e.real("tol", 1e-10, |v| v > 0.0 && v <= 1e-3, "(0, 1e-3]");
    let root_tol = e.real("root_tol", 1e-10, |v| v > 0.0 && v <= 1e-3, "(0, 1e-3]");
    let refine_depth = e.count("refine_depth", 16, 0, 30);
    let polish = e.flag("polish", true);
    let via_ny = e.count("via_ny", 32, 2, 1 << 16);
    let cfl = e.real("cfl", 0.45, |v| v > 0.0 && v <= 1.0, "(0, 1]");
    let alpha = match e.raw("alpha") {
        None | Some("auto") => None,
        Some(_) => Some(e.real("alpha", 1.0, |v| v > 0.0, "(0, inf)")),
    };
    let reference = e.get("reference", Reference::Lf, |s| s.parse());
    let default_threshold = if reference == Reference::Lf { 5e-2 } else { 5e-3 };
    let threshold = e.real("threshold", default_threshold, |v| v > 0.0, "(0, inf)");
    let n_queries = e.count("n_queries", 20, 1, 1 << 16);
    let hopf_lax_ny = e.count("hopf_lax_ny", 4000, 16, 1 << 24);
    let convergence = e.get("convergence", Vec::new(), |s| {
        let v: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| format!("`{}` is not a grid size", t.trim())))
            .collect::<std::result::Result<_, _>>()?;
        if v.len() < 2 || v.windows(2).any(|w| w[1] <= w[0]) || v[0] < MIN_NX {
            return Err(format!("need at least two increasing grid sizes >= {MIN_NX}"));
        }
        Ok(v)
    });
    let x0 = e.real("x0", 0.0, |_| true, "the reals");
    let u0 = e.real("u0", phi.eval(x0), |_| true, "the reals");
    let p0 = e.real("p0", 0.0, |_| true, "the reals");
    let x_target = e.real("x", 0.5, |_| true, "the reals");
    let trajectory_nodes = e.count("trajectory_nodes", 1000, 2, 1 << 24);
    let radii = e.get("radii", vec![2.0, 4.0, 8.0, 16.0], |s| {
        let v = parse_reals(s)?;
        if v.len() < 3 || !increasing(&v) || v[0] <= 0.0 {
            return Err("need at least three positive increasing radii".into());
        }
        Ok(v)
    });
    let queries = e.get("queries", vec![(0.25, 0.5), (0.5, 1.0)], |s| {
        s.split(',')
            .map(|q| {
                let (x, t) = q.trim().split_once(':').ok_or_else(|| format!("`{q}` is not x:t"))?;
                let (x, t): (f64, f64) = (
                    x.parse().map_err(|_| format!("`{x}` is not a number"))?,
                    t.parse().map_err(|_| format!("`{t}` is not a number"))?,
                );
                if !x.is_finite() || !(t >= MIN_TIME) || t > horizon {
                    return Err(format!("query {x}:{t} needs t in [{MIN_TIME}, T = {horizon}]"));
                }
                Ok((x, t))
            })
            .collect()
    });
    let osgood_u = e.real("osgood_u", 5.0, |v| v >= 0.0, "[0, inf)");
    let osgood_p = e.real("osgood_p", 10.0, |v| v >= 0.0, "[0, inf)");
    let out_dir = PathBuf::from(e.raw("out_dir").unwrap_or("out"));
    if !e.flag("deterministic", true) {
        e.issue("deterministic", "only deterministic lattices are supported".into());
    }
    if reference == Reference::HopfLax && !(kind == ModelKind::Free && model.potential == 0.0) {
        e.issue("reference", "hopf_lax applies only to the free model without potential".into());
    }

    let grid = GridSpec { nx, t_nodes: times };
    let seeds = SeedSpec { ny, np, p_max, tol, root_tol, polish, refine_depth: refine_depth as u32 };
    let shooting = ShootingConfig {
        p_max,
        n_p: scan_np,
        k_max: k_max as i64,
        root_tol,
        tol,
        trajectory_nodes,
        ..Default::default()
    };
    if !e.issues.is_empty() {
        return Err(Error::Config(e.issues));
    }
    Ok(RunConfig {
        command,
        model,
        phi,
        phi_spec,
        horizon,
        grid,
        seeds,
        shooting,
        via_ny,
        cfl,
        alpha,
        reference,
        threshold,
        n_queries,
        hopf_lax_ny,
        convergence,
        x0,
        u0,
        p0,
        x_target,
        radii,
        queries,
        osgood_u,
        osgood_p,
        out_dir,
    })
}

/// Result of a run: whether every internal assertion held, and the files
/// written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

#[derive(Serialize)]
struct ModelRecord {
    name: String,
    lambda: f64,
    potential: f64,
}

impl ModelRecord {
    fn of(m: &HamiltonianModel) -> Self {
        ModelRecord { name: m.name(), lambda: m.lambda, potential: m.potential }
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    model: ModelRecord,
    phi: &'a str,
    grid: &'a GridSpec,
    seeds: &'a SeedSpec,
    fill_fraction: f64,
    fallback_cells: &'a [(usize, usize)],
    runtime_ms: u64,
}

#[derive(Serialize)]
struct FlowRecord {
    model: ModelRecord,
    start: PhasePoint,
    terminal: PhasePoint,
    t: f64,
    max_abs_u: f64,
    max_abs_velocity: f64,
    action_defect: f64,
    roundtrip_error: f64,
    pass: bool,
}

#[derive(Serialize)]
struct CandidateRecord {
    p0: f64,
    winding: i64,
    terminal: PhasePoint,
    residual: f64,
}

#[derive(Serialize)]
struct FundamentalRecord {
    model: ModelRecord,
    x0: f64,
    u0: f64,
    x: f64,
    t: f64,
    value: f64,
    p0: f64,
    winding: i64,
    residual: f64,
    calibration_defect: f64,
    candidates: Vec<CandidateRecord>,
    pass: bool,
}

#[derive(Serialize)]
struct CompareRecord<'a> {
    model: ModelRecord,
    phi: &'a str,
    reference: String,
    threshold: f64,
    sup: f64,
    l1: f64,
    rows: &'a [ErrorRow],
    pass: bool,
}

#[derive(Serialize)]
struct ConvergenceRecord {
    model: ModelRecord,
    t: f64,
    nx_ref: usize,
    nx: Vec<usize>,
    sup: Vec<f64>,
    mean: Vec<f64>,
    orders: Vec<f64>,
    masked_fraction: f64,
    order_range: (f64, f64),
    pass: bool,
}

#[derive(Serialize)]
struct OsgoodRecord {
    model: ModelRecord,
    min_curvature: f64,
    periodicity_residual: f64,
    derivative_residual: f64,
    assumptions_pass: bool,
    worst_margin: f64,
    worst_at: (f64, f64, f64),
    probe_integrals: Vec<(f64, f64)>,
    divergence_note: String,
    osgood_pass: bool,
    pass: bool,
}

#[derive(Serialize)]
struct TruncationRecord {
    model: ModelRecord,
    x0: f64,
    u0: f64,
    queries: Vec<(f64, f64)>,
    base_values: Vec<f64>,
    a_star: f64,
    k_star: f64,
    r_hat: f64,
    stable_radii: Vec<f64>,
    max_stable_diff: f64,
    bound_a_spread: f64,
    bound_k_spread: f64,
    per_r: Vec<(f64, f64, f64)>,
    truncation_pass: bool,
    bounds_pass: bool,
    pass: bool,
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        write_artifact(self.dir, name, contents)?;
        self.written.push(self.dir.join(name));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, record: &T) -> Result<()> {
        let s = json_string(name, record)?;
        self.put(name, &s)
    }
}

/// Executes a validated run.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let mut w = Writer { dir: &cfg.out_dir, written: Vec::new() };
    let (passed, summary) = match cfg.command {
        Command::Flow => run_flow(cfg, &mut w)?,
        Command::Fundamental => run_fundamental(cfg, &mut w)?,
        Command::Solve => run_solve(cfg, &mut w)?,
        Command::Oracle => run_oracle(cfg, &mut w)?,
        Command::Compare => run_compare(cfg, &mut w)?,
        Command::Osgood => run_osgood(cfg, &mut w)?,
        Command::Truncation => run_truncation(cfg, &mut w)?,
        Command::Props => run_props(&mut w)?,
    };
    Ok(Outcome { passed, artifacts: w.written, summary })
}

fn run_flow(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String)> {
    let m = &cfg.model;
    let start = PhasePoint::new(cfg.x0, cfg.u0, cfg.p0);
    let t = cfg.horizon;
    let tr = flow_uniform(m, start, t, cfg.shooting.tol, cfg.shooting.trajectory_nodes)?;
    let action_defect = ((tr.end().u - tr.start().u) - tr.action(m)?).abs();
    let roundtrip_error = flow_roundtrip_error(m, start, t, cfg.shooting.tol)?;
    let pass = action_defect <= ACTION_TOL;
    w.put("trajectory.csv", &trajectory_csv(&tr)?)?;
    w.json(
        "flow.json",
        &FlowRecord {
            model: ModelRecord::of(m),
            start,
            terminal: *tr.end(),
            t,
            max_abs_u: tr.max_abs_u,
            max_abs_velocity: tr.max_abs_velocity,
            action_defect,
            roundtrip_error,
            pass,
        },
    )?;
    Ok((pass, format!("terminal {:?}, action defect {action_defect:.3e}", tr.end())))
}

fn run_fundamental(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String)> {
    let m = &cfg.model;
    let shooting = ShootingConfig { retain_trajectory: true, ..cfg.shooting.clone() };
    let fv = fundamental_solution(m, cfg.x0, cfg.u0, cfg.x_target, cfg.horizon, &shooting)?;
    let calibration_defect = verify_calibration(m, &fv)?;
    let pass = calibration_defect <= CALIBRATION_TOL;
    if let Some(tr) = &fv.minimizer.trajectory {
        w.put("trajectory.csv", &trajectory_csv(tr)?)?;
    }
    let candidates = fv
        .candidates
        .iter()
        .map(|c| CandidateRecord { p0: c.p0, winding: c.winding, terminal: c.terminal, residual: c.residual })
        .collect();
    w.json(
        "fundamental.json",
        &FundamentalRecord {
            model: ModelRecord::of(m),
            x0: fv.x0,
            u0: fv.u0,
            x: fv.x_target,
            t: fv.t,
            value: fv.value,
            p0: fv.minimizer.p0,
            winding: fv.minimizer.winding,
            residual: fv.minimizer.residual,
            calibration_defect,
            candidates,
            pass,
        },
    )?;
    Ok((pass, format!("h = {:.12}, calibration defect {calibration_defect:.3e}", fv.value)))
}

fn write_solve_summary(cfg: &RunConfig, w: &mut Writer, field: &SolutionField, name: &str, started: Instant) -> Result<()> {
    w.json(
        name,
        &SolveSummary {
            model: ModelRecord::of(&cfg.model),
            phi: &cfg.phi_spec,
            grid: &cfg.grid,
            seeds: &cfg.seeds,
            fill_fraction: field.fill_fraction,
            fallback_cells: &field.fallback_cells,
            runtime_ms: started.elapsed().as_millis() as u64,
        },
    )
}

fn run_solve(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String)> {
    let started = Instant::now();
    let field = solve_forward_flood(&cfg.model, &cfg.phi, &cfg.grid, &cfg.seeds)?;
    w.put("field.csv", &field_csv(&field)?)?;
    write_solve_summary(cfg, w, &field, "summary.json", started)?;
    Ok((true, format!("fill fraction {:.4}, {} fallback cells", field.fill_fraction, field.fallback_cells.len())))
}

fn lf_config(cfg: &RunConfig) -> LFConfig {
    LFConfig { nx: cfg.grid.nx, cfl: cfg.cfl, alpha: cfg.alpha, t_nodes: cfg.grid.t_nodes.clone() }
}

fn reference_field(cfg: &RunConfig) -> Result<SolutionField> {
    match cfg.reference {
        Reference::Lf => solve_lf(&cfg.model, &cfg.phi, &lf_config(cfg)),
        Reference::HopfLax => hopf_lax_field(&cfg.phi, &cfg.grid, cfg.hopf_lax_ny, cfg.shooting.k_max.max(2)),
        Reference::Shooting => Err(Error::InvalidInput("the shooting reference has no field form".into())),
    }
}

fn run_oracle(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String)> {
    let field = reference_field(cfg)?;
    w.put("field.csv", &field_csv(&field)?)?;
    if cfg.convergence.is_empty() {
        return Ok((true, format!("{} field written", cfg.reference)));
    }
    let t = *cfg.grid.t_nodes.last().expect("validated times");
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => crate::oracle::auto_alpha(&cfg.model, &cfg.phi, &lf_config(cfg))?,
    };
    let nx_ref = 4 * cfg.convergence.last().expect("validated list");
    let study = lf_self_convergence(&cfg.model, &cfg.phi, t, &cfg.convergence, nx_ref, alpha, 10.0 / t)?;
    let pass = !study.orders.is_empty() && study.orders.iter().all(|o| (ORDER_RANGE.0..=ORDER_RANGE.1).contains(o));
    w.json(
        "convergence.json",
        &ConvergenceRecord {
            model: ModelRecord::of(&cfg.model),
            t,
            nx_ref,
            nx: study.rows.iter().map(|r| r.0).collect(),
            sup: study.rows.iter().map(|r| r.1).collect(),
            mean: study.rows.iter().map(|r| r.2).collect(),
            orders: study.orders.clone(),
            masked_fraction: study.masked_fraction,
            order_range: ORDER_RANGE,
            pass,
        },
    )?;
    Ok((pass, format!("LF orders {:?}", study.orders)))
}

/// Grid nodes `(i, j)` spread over the grid for shooting comparisons.
pub fn comparison_nodes(nx: usize, nt: usize, n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|q| (((2 * q + 1) * nx) / (2 * n) % nx, q % nt)).collect()
}

fn shooting_report(cfg: &RunConfig, flood: &SolutionField) -> Result<ErrorReport> {
    let nodes = comparison_nodes(flood.nx(), flood.t_nodes.len(), cfg.n_queries);
    let queries: Vec<(f64, f64)> = nodes.iter().map(|&(i, j)| (flood.x_nodes[i], flood.t_nodes[j])).collect();
    let via = ViaShootingConfig {
        ny: cfg.via_ny,
        bvp: ShootingConfig { retain_trajectory: false, ..cfg.shooting.clone() },
        ..Default::default()
    };
    let values = solve_via_shooting(&cfg.model, &cfg.phi, &queries, &via)?;
    let mut rows = Vec::new();
    for (j, &t) in flood.t_nodes.iter().enumerate() {
        let errs: Vec<f64> = nodes
            .iter()
            .zip(&values)
            .filter(|((_, jj), _)| *jj == j)
            .map(|(&(i, _), v)| (flood.value(i, j) - v).abs())
            .collect();
        if errs.is_empty() {
            continue;
        }
        let sup = errs.iter().copied().fold(0.0, f64::max);
        rows.push(ErrorRow { t, sup, l1: errs.iter().sum::<f64>() / errs.len() as f64 });
    }
    let n = values.len() as f64;
    let sup = rows.iter().map(|r| r.sup).fold(0.0, f64::max);
    let l1 = nodes.iter().zip(&values).map(|(&(i, j), v)| (flood.value(i, j) - v).abs()).sum::<f64>() / n;
    Ok(ErrorReport { sup, l1, rows })
}

fn run_compare(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String)> {
    let started = Instant::now();
    let flood = solve_forward_flood(&cfg.model, &cfg.phi, &cfg.grid, &cfg.seeds)?;
    w.put("field.csv", &field_csv(&flood)?)?;
    write_solve_summary(cfg, w, &flood, "summary.json", started)?;
    let report = match cfg.reference {
        Reference::Shooting => shooting_report(cfg, &flood)?,
        _ => {
            let reference = reference_field(cfg)?;
            w.put("reference.csv", &field_csv(&reference)?)?;
            compare_fields(&flood, &reference)?
        }
    };
    let pass = report.sup <= cfg.threshold;
    w.json(
        "error_report.json",
        &CompareRecord {
            model: ModelRecord::of(&cfg.model),
            phi: &cfg.phi_spec,
            reference: cfg.reference.to_string(),
            threshold: cfg.threshold,
            sup: report.sup,
            l1: report.l1,
            rows: &report.rows,
            pass,
        },
    )?;
    Ok((pass, format!("sup |flooding - {}| = {:.3e} (threshold {:.1e})", cfg.reference, report.sup, cfg.threshold)))
}

fn run_osgood(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String)> {
    let m = &cfg.model;
    let bx = CompactBox::symmetric(cfg.osgood_u, cfg.osgood_p);
    let a = check_assumptions(m, &bx, 9);
    let o = osgood_pointwise_check(m, &bx, 4.0 * cfg.osgood_u.max(1.0), 21)?;
    let pass = a.pass && o.pass;
    w.json(
        "osgood.json",
        &OsgoodRecord {
            model: ModelRecord::of(m),
            min_curvature: a.min_curvature,
            periodicity_residual: a.periodicity_residual,
            derivative_residual: a.derivative_residual,
            assumptions_pass: a.pass,
            worst_margin: o.worst_margin,
            worst_at: o.worst_at,
            probe_integrals: o.probe_integrals.clone(),
            divergence_note: o.divergence_note.clone(),
            osgood_pass: o.pass,
            pass,
        },
    )?;
    Ok((pass, format!("worst Osgood margin {:.3e}", o.worst_margin)))
}

fn run_truncation(cfg: &RunConfig, w: &mut Writer) -> Result<(bool, String)> {
    let tcfg = TruncationConfig { x0: cfg.x0, shooting: cfg.shooting.clone() };
    let table = truncation_experiment(&cfg.model, &cfg.phi, &cfg.queries, &cfg.radii, &tcfg)?;
    let bounds = bound_monitor(&table);
    let pass = table.pass && bounds.pass;
    w.put("truncation.csv", &truncation_csv(&table)?)?;
    w.json(
        "truncation.json",
        &TruncationRecord {
            model: ModelRecord::of(&cfg.model),
            x0: table.x0,
            u0: table.u0,
            queries: cfg.queries.clone(),
            base_values: table.base_values.clone(),
            a_star: table.base_bounds.a_star,
            k_star: table.base_bounds.k_star,
            r_hat: table.r_hat,
            stable_radii: table.stable_radii.clone(),
            max_stable_diff: table.max_stable_diff,
            bound_a_spread: bounds.a_spread,
            bound_k_spread: bounds.k_spread,
            per_r: bounds.per_r.iter().map(|b| (b.r, b.a_star, b.k_star)).collect(),
            truncation_pass: table.pass,
            bounds_pass: bounds.pass,
            pass,
        },
    )?;
    Ok((pass, format!("R_hat = {:.4}, stable spread {:.3e}", table.r_hat, table.max_stable_diff)))
}

fn run_props(w: &mut Writer) -> Result<(bool, String)> {
    let report = property_suite()?;
    w.json("props.json", &report)?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let msg = if failed.is_empty() { "all properties hold".to_string() } else { format!("failed: {}", failed.join(", ")) };
    Ok((report.pass, msg))
}

fn key_table() -> String {
    let mut s = String::from("Configuration keys (key=value):\n");
    for (k, d, m) in KEYS {
        s.push_str(&format!("  {k:<17} {d:<26} {m}\n"));
    }
    s
}

#[derive(Parser, Debug)]
#[command(name = "hjchar", version, about = "Hamilton-Jacobi solutions on the circle by minimal characteristics")]
#[command(after_help = key_table())]
struct Args {
    /// Config file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the model catalog and exit.
    #[arg(long)]
    list_models: bool,
    /// key=value overrides, applied after the config file.
    overrides: Vec<String>,
}

/// Process entry: parses arguments, runs, and returns the exit code
/// (0 success, 1 error, 2 failed assertion).
pub fn main_entry() -> i32 {
    let args = Args::parse();
    if args.list_models {
        print!("{}", HamiltonianModel::catalog());
        return 0;
    }
    let text = match &args.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return 1;
            }
        },
        None => String::new(),
    };
    let cfg = match parse_config(&text, &args.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match run(&cfg) {
        Ok(out) => {
            println!("{}", out.summary);
            for a in &out.artifacts {
                println!("wrote {}", a.display());
            }
            if out.passed {
                0
            } else {
                eprintln!("assertion failed");
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(text: &str, flags: &[&str]) -> Vec<ConfigIssue> {
        let flags: Vec<String> = flags.iter().map(|s| s.to_string()).collect();
        match parse_config(text, &flags) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("model=free\nphi=const:0\ncommand=solve\nT=1.0", &[]).unwrap();
        assert_eq!(c.command, Command::Solve);
        assert_eq!(c.grid.nx, 200);
        assert_eq!(c.grid.t_nodes, vec![1.0]);
        assert_eq!(c.seeds, SeedSpec::default());
        assert_eq!(c.shooting.n_p, 801);
        assert_eq!(c.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn unknown_model_names_the_key() {
        let v = issues("command=solve\nmodel=unknown", &[]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "model");
        assert_eq!(v[0].origin, "line 2");
    }

    #[test]
    fn small_grid_rejected() {
        let v = issues("command=solve\nnx=8", &[]);
        assert_eq!(v[0].key, "nx");
    }

    #[test]
    fn all_violations_reported() {
        let v = issues("command=solve\nnx=8\nbogus=1\ntol=1\nphi=sin:1", &["cfl=2", "noequals"]);
        let keys: Vec<&str> = v.iter().map(|i| i.key.as_str()).collect();
        for k in ["nx", "bogus", "tol", "phi", "cfl", "noequals"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
        let cfl = v.iter().find(|i| i.key == "cfl").unwrap();
        assert_eq!(cfl.origin, "flag");
    }

    #[test]
    fn flags_override_file() {
        let c = parse_config("command=solve\nnx=32", &["nx=64".into()]).unwrap();
        assert_eq!(c.grid.nx, 64);
        assert!(!issues("command=solve\nnx=32\nnx=64", &[]).is_empty());
    }

    #[test]
    fn missing_command_and_bad_times() {
        let v = issues("T=0.5\ntimes=0.25,1.0", &[]);
        let keys: Vec<&str> = v.iter().map(|i| i.key.as_str()).collect();
        assert_eq!(keys, vec!["command", "times"]);
    }

    #[test]
    fn hopf_lax_needs_free_model() {
        let v = issues("command=compare\nmodel=mechanical\nreference=hopf_lax", &[]);
        assert_eq!(v[0].key, "reference");
        let c = parse_config("command=compare\nmodel=free\nreference=hopf_lax", &[]).unwrap();
        assert_eq!(c.threshold, 5e-3);
    }

    #[test]
    fn model_parameters() {
        let c = parse_config("command=solve\nmodel=discounted\nlambda=2\npotential=0", &[]).unwrap();
        assert_eq!(c.model, HamiltonianModel::discounted(2.0).without_potential());
        let c = parse_config("command=flow\nphi=cos:2:1:0\nx0=0", &[]).unwrap();
        assert_eq!(c.u0, 2.0);
    }

    #[test]
    fn comparison_nodes_spread() {
        let n = comparison_nodes(200, 4, 20);
        assert_eq!(n.len(), 20);
        assert_eq!(n[0], (5, 0));
        assert!(n.iter().all(|&(i, j)| i < 200 && j < 4));
    }
}
