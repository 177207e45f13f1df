//! Global solution `u(x, t) = inf_y h_{y, phi(y)}(x, t)` on a uniform grid.
//!
//! [`solve_forward_flood`] launches characteristics from a `(y, p0)` seed
//! lattice, bins every sample into its nearest grid cell, keeps the lowest
//! value per cell and finally polishes each cell by shooting exactly onto
//! its node. [`solve_via_shooting`] evaluates single points through
//! fundamental solutions instead, as an independent cross-check.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::charflow::{flow_sampled_until, PhasePoint};
use crate::error::{Error, Result};
use crate::fundamental::{minimizer_below, nearest_lift, shoot_local, shoot_near, ShootingConfig, MIN_TIME};
use crate::models::Hamiltonian;
use crate::numerics::{golden_section_min, wrap};

/// Smallest accepted number of grid cells.
pub const MIN_NX: usize = 16;
/// Seed coverage below which flooding is reported as under-resolved.
pub const MIN_FILL: f64 = 0.99;
/// Seeds between two recomputations of the per-time ceilings.
const CEILING_REFRESH: usize = 64;
const POLISH_RECENTERS: usize = 6;
/// Polish window half-width in units of the seed spacing in `y`.
const POLISH_HALF_WIDTH: f64 = 8.0;

/// Piecewise-linear data on the unit circle, interpolated periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PeriodicTable {
    /// Knots must be finite, strictly increasing and lie in `[0, 1)`.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidInput(
                "table needs at least two knots with one value each".into(),
            ));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table contains non-finite entries".into()));
        }
        if xs[0] < 0.0 || xs[xs.len() - 1] >= 1.0 {
            return Err(Error::InvalidInput("table knots must lie in [0, 1)".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("table knots must be strictly increasing".into()));
        }
        Ok(PeriodicTable { xs, ys })
    }

    /// Reads a CSV file with header `x,phi`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next().map(|h| h.replace(' ', "")) != Some("x,phi".into()) {
            return Err(Error::InvalidInput(format!(
                "{}: expected header `x,phi`",
                path.display()
            )));
        }
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let parsed = line
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            let Some((x, y)) = parsed else {
                return Err(Error::InvalidInput(format!(
                    "{}: malformed row {}: `{line}`",
                    path.display(),
                    n + 2
                )));
            };
            xs.push(x);
            ys.push(y);
        }
        Self::new(xs, ys)
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn eval(&self, x: f64) -> f64 {
        let x = wrap(x, 1.0);
        let n = self.xs.len();
        let k = self.xs.partition_point(|&k| k <= x);
        // segment between knot k-1 and knot k, wrapping at both ends
        let (x0, y0, x1, y1) = match k {
            0 => (self.xs[n - 1] - 1.0, self.ys[n - 1], self.xs[0], self.ys[0]),
            k if k == n => (self.xs[n - 1], self.ys[n - 1], self.xs[0] + 1.0, self.ys[0]),
            k => (self.xs[k - 1], self.ys[k - 1], self.xs[k], self.ys[k]),
        };
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Initial data `phi` on the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialData {
    Const { c: f64 },
    /// `a cos(2 pi m x) + b`
    Cosine { a: f64, m: f64, b: f64 },
    /// `a sin(2 pi m x) + b`
    Sine { a: f64, m: f64, b: f64 },
    Table(PeriodicTable),
}

impl InitialData {
    pub fn constant(c: f64) -> Self {
        InitialData::Const { c }
    }

    pub fn cosine(a: f64, m: f64, b: f64) -> Self {
        InitialData::Cosine { a, m, b }
    }

    pub fn sine(a: f64, m: f64, b: f64) -> Self {
        InitialData::Sine { a, m, b }
    }

    /// Parses `const:c`, `cos:a:m:b`, `sin:a:m:b` or `table:path`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad phi `{spec}`"));
        let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
        if kind == "table" {
            return Ok(InitialData::Table(PeriodicTable::from_csv(Path::new(rest))?));
        }
        let nums: Vec<f64> = rest
            .split(':')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?;
        let phi = match (kind, nums.as_slice()) {
            ("const", [c]) => Self::constant(*c),
            ("cos", [a, m, b]) => Self::cosine(*a, *m, *b),
            ("sin", [a, m, b]) => Self::sine(*a, *m, *b),
            _ => return Err(bad()),
        };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        let params: Vec<f64> = match self {
            InitialData::Const { c } => vec![*c],
            InitialData::Cosine { a, m, b } | InitialData::Sine { a, m, b } => {
                if m.fract() != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "phi frequency m = {m} must be an integer to be periodic"
                    )));
                }
                vec![*a, *m, *b]
            }
            InitialData::Table(_) => vec![],
        };
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("phi parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialData::Const { c } => *c,
            InitialData::Cosine { a, m, b } => a * (2.0 * PI * m * x).cos() + b,
            InitialData::Sine { a, m, b } => a * (2.0 * PI * m * x).sin() + b,
            InitialData::Table(t) => t.eval(x),
        }
    }

    /// `(min phi, max phi)`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            InitialData::Const { c } => (*c, *c),
            InitialData::Cosine { a, m, b } | InitialData::Sine { a, m, b } => {
                if *m == 0.0 {
                    let v = self.eval(0.0);
                    (v, v)
                } else {
                    (b - a.abs(), b + a.abs())
                }
            }
            InitialData::Table(t) => t.ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
                (lo.min(y), hi.max(y))
            }),
        }
    }

    /// Lipschitz constant of `phi`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            InitialData::Const { .. } => 0.0,
            InitialData::Cosine { a, m, .. } | InitialData::Sine { a, m, .. } => 2.0 * PI * (a * m).abs(),
            InitialData::Table(t) => {
                let n = t.xs.len();
                (0..n)
                    .map(|k| {
                        let (x1, y1) = if k + 1 == n { (t.xs[0] + 1.0, t.ys[0]) } else { (t.xs[k + 1], t.ys[k + 1]) };
                        ((y1 - t.ys[k]) / (x1 - t.xs[k])).abs()
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Const { c } => write!(f, "const:{c}"),
            InitialData::Cosine { a, m, b } => write!(f, "cos:{a}:{m}:{b}"),
            InitialData::Sine { a, m, b } => write!(f, "sin:{a}:{m}:{b}"),
            InitialData::Table(t) => write!(f, "table({} knots)", t.xs.len()),
        }
    }
}

/// Spatial resolution and output times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    /// Nonnegative, strictly increasing output times.
    pub t_nodes: Vec<f64>,
}

impl GridSpec {
    pub fn new(nx: usize, t_nodes: Vec<f64>) -> Result<Self> {
        let grid = GridSpec { nx, t_nodes };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < MIN_NX {
            return Err(Error::InvalidInput(format!("nx = {} is below {MIN_NX}", self.nx)));
        }
        if self.t_nodes.is_empty() {
            return Err(Error::InvalidInput("no output times".into()));
        }
        if self.t_nodes.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidInput("output times must be finite and nonnegative".into()));
        }
        if self.t_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("output times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn x_nodes(&self, period: f64) -> Vec<f64> {
        (0..self.nx).map(|i| i as f64 * period / self.nx as f64).collect()
    }
}

/// Seed lattice for flooding: `ny` uniform positions times `np` uniform
/// momenta in `[-p_max, p_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub ny: usize,
    pub np: usize,
    pub p_max: f64,
    /// Integrator tolerance.
    pub tol: f64,
    /// Landing tolerance of the polish shots.
    pub root_tol: f64,
    /// Shoot exactly onto each node after flooding.
    pub polish: bool,
    /// Bisection depth for momentum intervals whose landings jump across
    /// cells; 0 disables refinement.
    pub refine_depth: u32,
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec { ny: 400, np: 401, p_max: 8.0, tol: 1e-10, root_tol: 1e-10, polish: true, refine_depth: 16 }
    }
}

impl SeedSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ny == 0 || self.np < 2 {
            return Err(Error::InvalidInput("need ny >= 1 and np >= 2 seeds".into()));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidInput("p_max must be positive".into()));
        }
        if !(self.tol > 0.0 && self.root_tol > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// `(iy, ip)` lattice indices, slow characteristics first: they fill
    /// cells cheaply and set ceilings that let fast ones stop early.
    fn lattice_order(&self) -> Vec<(usize, usize)> {
        let mid = (self.np - 1) as f64 / 2.0;
        let mut order: Vec<(usize, usize)> =
            (0..self.np).flat_map(|ip| (0..self.ny).map(move |iy| (iy, ip))).collect();
        order.sort_by(|a, b| {
            let (da, db) = ((a.1 as f64 - mid).abs(), (b.1 as f64 - mid).abs());
            da.total_cmp(&db).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0))
        });
        order
    }
}

/// Which solver produced a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Characteristics,
    LaxFriedrichs,
    HopfLax,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Characteristics => "characteristics",
            Provenance::LaxFriedrichs => "lax_friedrichs",
            Provenance::HopfLax => "hopf_lax",
        }
    }
}

/// Values on `x_nodes` x `t_nodes`, stored time-major: entry `(i, j)` is at
/// `j * nx + i`. Unfilled entries are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionField {
    pub x_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub fill_fraction: f64,
    /// `(i, j)` cells filled by per-point shooting instead of flooding.
    pub fallback_cells: Vec<(usize, usize)>,
    /// Cells whose polish failed and kept the binned value.
    pub unpolished_cells: Vec<(usize, usize)>,
}

impl SolutionField {
    pub fn unfilled(grid: &GridSpec, period: f64, provenance: Provenance) -> Self {
        SolutionField {
            x_nodes: grid.x_nodes(period),
            t_nodes: grid.t_nodes.clone(),
            values: vec![f64::NAN; grid.nx * grid.t_nodes.len()],
            provenance,
            fill_fraction: 0.0,
            fallback_cells: Vec::new(),
            unpolished_cells: Vec::new(),
        }
    }

    pub fn nx(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx() + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let nx = self.nx();
        self.values[j * nx + i] = v;
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let nx = self.nx();
        &self.values[j * nx..(j + 1) * nx]
    }

    /// Recomputes `fill_fraction` from the stored values.
    pub fn refresh_fill(&mut self) {
        let filled = self.values.iter().filter(|v| !v.is_nan()).count();
        self.fill_fraction = filled as f64 / self.values.len().max(1) as f64;
    }

    pub fn is_filled(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Index of the output time equal to `t`, if any.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.t_nodes.iter().position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }
}

/// Rounds of re-landing each node from its neighbours' optima.
const NEIGHBOUR_SWEEPS: usize = 4;
/// Smallest improvement a neighbour's branch must offer.
const NEIGHBOUR_GAIN: f64 = 1e-9;

/// Candidates kept per cell, each from a different branch of seeds.
const BRANCHES: usize = 1;

/// A cell's best candidates, sorted by value.
type Branches = Vec<Candidate>;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    /// Binned value, first-order corrected to the node.
    value: f64,
    y: f64,
    p0: f64,
    /// The node's lift in the frame of the seed.
    target: f64,
}

fn prune_margin(ceiling: f64) -> f64 {
    (0.1 * ceiling.abs()).max(1.0)
}

/// Seeds whose landings at some output time are further apart than this
/// many times the free-flight spread `|dp0| t` are subdivided.
const STRETCH_LIMIT: f64 = 4.0;

struct Flood<'a, M: ?Sized> {
    model: &'a M,
    phi: &'a InitialData,
    times: &'a [f64],
    nx: usize,
    period: f64,
    tol: f64,
    best: Vec<Branches>,
    /// Two candidates closer than this in `y` and in `p0` share a branch.
    y_gap: f64,
    p_gap: f64,
    /// Per output time, the worst value over all cells; `+inf` while a
    /// cell is still empty.
    ceilings: Vec<f64>,
    launches: usize,
}

impl<M: Hamiltonian + ?Sized> Flood<'_, M> {
    /// Flows one seed, bins its samples and returns them.
    fn launch(&mut self, y: f64, p0: f64) -> Vec<PhasePoint> {
        let nx = self.nx;
        if self.launches % CEILING_REFRESH == 0 {
            for (a, c) in self.ceilings.iter_mut().enumerate() {
                *c = self.best[a * nx..(a + 1) * nx]
                    .iter()
                    .map(|b| b.first().map_or(f64::INFINITY, |b| b.value))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        self.launches += 1;
        let (model, times, ceilings) = (self.model, self.times, &self.ceilings);
        let start = PhasePoint::new(y, self.phi.eval(y), p0);
        // a blown-up flow still contributes the samples it reached
        let (samples, _) = flow_sampled_until(model, start, times, self.tol, |tau, s| {
            times.iter().zip(ceilings).all(|(&tj, &c)| {
                tj <= tau || model.value_lower_bound(s.u, tj - tau) > c + prune_margin(c)
            })
        });
        for (a, s) in samples.iter().enumerate() {
            let r = (s.x / self.period * nx as f64).round();
            let target = r * self.period / nx as f64;
            let value = s.u + s.p * (target - s.x);
            if !value.is_finite() {
                continue;
            }
            let i = r.rem_euclid(nx as f64) as usize % nx;
            let (y_gap, p_gap) = (self.y_gap, self.p_gap);
            let list = &mut self.best[a * nx + i];
            let c = Candidate { value, y, p0, target };
            match list.iter().position(|b| (b.y - y).abs() <= y_gap && (b.p0 - p0).abs() <= p_gap) {
                Some(k) if value < list[k].value => list[k] = c,
                Some(_) => continue,
                None => list.push(c),
            }
            list.sort_by(|u, v| u.value.total_cmp(&v.value));
            list.truncate(BRANCHES);
        }
        samples
    }

    /// Bisects `[pa, pb]` at fixed `y` while neighbouring landings leave
    /// cells between them unvisited and spread faster than free flight.
    fn refine(&mut self, y: f64, (pa, sa): (f64, &[PhasePoint]), (pb, sb): (f64, &[PhasePoint]), depth: u32) {
        let dx = self.period / self.nx as f64;
        let dp = (pb - pa).abs();
        let gap = sa.iter().zip(sb).zip(self.times).any(|((a, b), &t)| {
            let spread = (a.x - b.x).abs();
            spread > dx && spread > STRETCH_LIMIT * dp * t
        });
        if depth == 0 || !gap {
            return;
        }
        let pm = 0.5 * (pa + pb);
        let sm = self.launch(y, pm);
        self.refine(y, (pa, sa), (pm, &sm), depth - 1);
        self.refine(y, (pm, &sm), (pb, sb), depth - 1);
    }
}

/// Forward flooding with per-cell polish.
///
/// After polishing, every node is re-landed from the optima of its two
/// neighbours, so a node reached by the seed lattice only through a poor
/// branch picks up the branch that wins next to it.
///
/// Fails with `UnderResolved` when fewer than [`MIN_FILL`] of the cells
/// were hit by any seed; otherwise the missed cells are filled by
/// [`solve_via_shooting`] and listed in `fallback_cells`.
pub fn solve_forward_flood<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    grid: &GridSpec,
    seeds: &SeedSpec,
) -> Result<SolutionField> {
    grid.validate()?;
    seeds.validate()?;
    phi.validate()?;
    let period = model.period();
    let nx = grid.nx;
    let mut field = SolutionField::unfilled(grid, period, Provenance::Characteristics);
    let active: Vec<usize> = (0..grid.t_nodes.len()).filter(|&j| grid.t_nodes[j] > 0.0).collect();
    let times: Vec<f64> = active.iter().map(|&j| grid.t_nodes[j]).collect();
    for j in (0..grid.t_nodes.len()).filter(|j| !active.contains(j)) {
        for i in 0..nx {
            field.set(i, j, phi.eval(field.x_nodes[i]));
        }
    }

    let mut flood = Flood {
        model,
        phi,
        times: &times,
        nx,
        period,
        tol: seeds.tol,
        best: vec![Vec::new(); nx * times.len()],
        y_gap: 3.0 * period / seeds.ny as f64,
        p_gap: 6.0 * seeds.p_max / (seeds.np - 1) as f64,
        ceilings: vec![f64::INFINITY; times.len()],
        launches: 0,
    };
    let ps: Vec<f64> = (0..seeds.np)
        .map(|ip| -seeds.p_max + 2.0 * seeds.p_max * ip as f64 / (seeds.np - 1) as f64)
        .collect();
    let ys: Vec<f64> = (0..seeds.ny).map(|iy| iy as f64 * period / seeds.ny as f64).collect();
    let mut samples: Vec<Vec<PhasePoint>> = vec![Vec::new(); seeds.ny * seeds.np];
    for (iy, ip) in seeds.lattice_order() {
        samples[iy * seeds.np + ip] = flood.launch(ys[iy], ps[ip]);
    }
    if seeds.refine_depth > 0 {
        for iy in 0..seeds.ny {
            for ip in 0..seeds.np - 1 {
                let (a, b) = (&samples[iy * seeds.np + ip], &samples[iy * seeds.np + ip + 1]);
                flood.refine(ys[iy], (ps[ip], a), (ps[ip + 1], b), seeds.refine_depth);
            }
        }
    }
    let best = flood.best;

    let hit = best.iter().filter(|b| !b.is_empty()).count();
    let fill = hit as f64 / best.len().max(1) as f64;
    if fill < MIN_FILL {
        return Err(Error::UnderResolved { fill_fraction: fill });
    }

    let fallback_cfg = ViaShootingConfig::default();
    let dx = period / nx as f64;
    for (a, &j) in active.iter().enumerate() {
        let t = times[a];
        let mut optima: Vec<Option<Candidate>> = vec![None; nx];
        for i in 0..nx {
            let list = &best[a * nx + i];
            let value = if list.is_empty() {
                field.fallback_cells.push((i, j));
                let q = [(field.x_nodes[i], t)];
                solve_via_shooting(model, phi, &q, &fallback_cfg)?[0]
            } else if seeds.polish {
                let polished = list
                    .iter()
                    .filter_map(|c| polish_cell(model, phi, c, t, seeds, period))
                    .min_by(|u, v| u.value.total_cmp(&v.value));
                match polished {
                    Some(c) => {
                        optima[i] = Some(c);
                        c.value
                    }
                    None => {
                        field.unpolished_cells.push((i, j));
                        list[0].value
                    }
                }
            } else {
                list[0].value
            };
            field.set(i, j, value);
        }
        if seeds.polish {
            for _ in 0..NEIGHBOUR_SWEEPS {
                let mut changed = false;
                for (order, step) in [(0..nx).collect::<Vec<_>>(), (0..nx).rev().collect()].iter().zip([1.0, -1.0]) {
                    for &i in order {
                        let from = if step > 0.0 { (i + nx - 1) % nx } else { (i + 1) % nx };
                        let Some(src) = optima[from] else { continue };
                        let c = Candidate { value: f64::INFINITY, target: src.target + step * dx, ..src };
                        let Some(v) = land_once(model, phi, &c, t, seeds) else { continue };
                        if v >= field.value(i, j) - NEIGHBOUR_GAIN {
                            continue;
                        }
                        if let Some(p) = polish_cell(model, phi, &c, t, seeds, period) {
                            if p.value < field.value(i, j) - NEIGHBOUR_GAIN {
                                field.set(i, j, p.value);
                                optima[i] = Some(p);
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }
    }
    field.refresh_fill();
    Ok(field)
}

/// Lowest terminal value over characteristics from `y` near the seed's
/// position that land exactly on the cell's node.
///
/// The landing momentum is continued along the curve `p0(y)` of node-hitting
/// characteristics from the seed, so that golden-section steps in `y` stay
/// on the seed's branch.
fn polish_cell<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    c: &Candidate,
    t: f64,
    seeds: &SeedSpec,
    period: f64,
) -> Option<Candidate> {
    let cfg = polish_config(seeds);
    let dp = lattice_dp(seeds);
    let land = |y: f64, p: f64| shoot_near(model, y, phi.eval(y), c.target, t, p, dp, &cfg);
    let first = land(c.y, c.p0)?;
    let h = 1e-4 * period;
    let slope = land(c.y + h, first.p0).map_or(0.0, |r| (r.p0 - first.p0) / h);
    let mut curve = LandingCurve { y: c.y, p: first.p0, slope };
    let mut best = Candidate { value: first.terminal.u, y: c.y, p0: first.p0, target: c.target };
    let mut g = |y: f64| {
        let guess = curve.p + curve.slope * (y - curve.y);
        match land(y, guess) {
            Some(r) => {
                if y != curve.y {
                    curve.slope = (r.p0 - curve.p) / (y - curve.y);
                }
                curve.y = y;
                curve.p = r.p0;
                if r.terminal.u < best.value {
                    best = Candidate { value: r.terminal.u, y, p0: r.p0, target: c.target };
                }
                r.terminal.u
            }
            None => f64::INFINITY,
        }
    };
    let half = POLISH_HALF_WIDTH * period / seeds.ny as f64;
    let mut center = c.y;
    for _ in 0..=POLISH_RECENTERS {
        let (y, _) = golden_section_min(&mut g, center - half, center + half, 1e-9);
        if (y - center).abs() < 0.9 * half {
            break;
        }
        center = y;
    }
    best.value.is_finite().then_some(best)
}

fn polish_config(seeds: &SeedSpec) -> ShootingConfig {
    ShootingConfig { tol: seeds.tol, root_tol: seeds.root_tol, ..Default::default() }
}

fn lattice_dp(seeds: &SeedSpec) -> f64 {
    2.0 * seeds.p_max / (seeds.np - 1) as f64
}

/// Terminal value of the characteristic from `c.y` near `c.p0` that lands
/// on `c.target`.
fn land_once<M: Hamiltonian + ?Sized>(model: &M, phi: &InitialData, c: &Candidate, t: f64, seeds: &SeedSpec) -> Option<f64> {
    let r = shoot_near(model, c.y, phi.eval(c.y), c.target, t, c.p0, lattice_dp(seeds), &polish_config(seeds))?;
    Some(r.terminal.u)
}

/// Last point and slope of the node-hitting curve `p0(y)`.
struct LandingCurve {
    y: f64,
    p: f64,
    slope: f64,
}

/// Lattice positions of [`solve_via_shooting`] whose value exceeds the best
/// by more than this are not resolved.
const LATTICE_SLACK: f64 = 0.5;
/// Local minima of the `y` lattice that are polished.
const POLISHED_MINIMA: usize = 3;

/// Knobs for [`solve_via_shooting`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaShootingConfig {
    /// Uniform `y` lattice size before polishing.
    pub ny: usize,
    /// Golden-section tolerance in `y`.
    pub y_tol: f64,
    pub bvp: ShootingConfig,
}

impl Default for ViaShootingConfig {
    fn default() -> Self {
        ViaShootingConfig {
            ny: 32,
            y_tol: 1e-9,
            bvp: ShootingConfig { n_p: 401, retain_trajectory: false, ..Default::default() },
        }
    }
}

/// `u(x, t)` at each query as a minimum of fundamental solutions over the
/// starting point `y`.
pub fn solve_via_shooting<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    queries: &[(f64, f64)],
    cfg: &ViaShootingConfig,
) -> Result<Vec<f64>> {
    phi.validate()?;
    if cfg.ny == 0 {
        return Err(Error::InvalidInput("ny must be positive".into()));
    }
    queries.iter().map(|&(x, t)| shooting_value(model, phi, x, t, cfg)).collect()
}

fn shooting_value<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    x: f64,
    t: f64,
    cfg: &ViaShootingConfig,
) -> Result<f64> {
    if t < MIN_TIME {
        return Err(Error::DegenerateTime(t));
    }
    let period = model.period();
    let n = cfg.ny;
    // per lattice position: (value, p0, target lift); positions provably
    // above the running best plus a slack are left empty
    let mut lattice: Vec<Option<(f64, f64, f64)>> = vec![None; n];
    let mut best = f64::INFINITY;
    for (k, slot) in lattice.iter_mut().enumerate() {
        let y = k as f64 * period / n as f64;
        let ceiling = best.is_finite().then_some(best + LATTICE_SLACK);
        if let Some(r) = minimizer_below(model, y, phi.eval(y), x, t, &cfg.bvp, ceiling)? {
            let target = nearest_lift(y, x, period) + r.winding as f64 * period;
            *slot = Some((r.terminal.u, r.p0, target));
            best = best.min(r.terminal.u);
        }
    }
    let at = |k: usize| lattice[k % n].map_or(f64::INFINITY, |l| l.0);
    let mut minima: Vec<usize> = (0..n)
        .filter(|&k| at(k).is_finite() && at(k) <= at(k + n - 1) && at(k) <= at(k + 1))
        .collect();
    minima.sort_by(|a, b| at(*a).total_cmp(&at(*b)));
    minima.truncate(POLISHED_MINIMA);

    let mut value = best;
    for k in minima {
        let (_, p0, target) = lattice[k].expect("local minima are filled");
        let mut warm = p0;
        let mut g = |y: f64| {
            let u0 = phi.eval(y);
            if let Some(r) = shoot_local(model, y, u0, target, t, warm, &cfg.bvp) {
                warm = r.p0;
                return r.terminal.u;
            }
            match minimizer_below(model, y, u0, x, t, &cfg.bvp, None) {
                Ok(Some(r)) => r.terminal.u,
                _ => f64::INFINITY,
            }
        };
        let half = period / n as f64;
        let mut center = k as f64 * period / n as f64;
        for _ in 0..=POLISH_RECENTERS {
            let (y, v) = golden_section_min(&mut g, center - half, center + half, cfg.y_tol);
            value = value.min(v);
            if (y - center).abs() < 0.9 * half {
                break;
            }
            center = y;
        }
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HamiltonianModel;

    fn small_seeds() -> SeedSpec {
        SeedSpec { ny: 64, np: 65, ..Default::default() }
    }

    #[test]
    fn table_interpolates_periodically() {
        let t = PeriodicTable::new(vec![0.0, 0.5], vec![0.0, 1.0]).unwrap();
        let phi = InitialData::Table(t);
        assert!((phi.eval(0.25) - 0.5).abs() < 1e-15);
        assert!((phi.eval(0.75) - 0.5).abs() < 1e-15);
        assert!((phi.eval(1.25) - 0.5).abs() < 1e-15);
        assert!((phi.lipschitz() - 2.0).abs() < 1e-15);
        assert!(PeriodicTable::new(vec![0.5, 0.2], vec![0.0, 1.0]).is_err());
        assert!(PeriodicTable::new(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn phi_specs() {
        assert_eq!(InitialData::from_spec("const:2").unwrap(), InitialData::constant(2.0));
        let phi = InitialData::from_spec("cos:1:1:0").unwrap();
        assert!((phi.eval(0.5) + 1.0).abs() < 1e-15);
        assert_eq!(phi.to_string(), "cos:1:1:0");
        assert!(InitialData::from_spec("cos:1:0.5:0").is_err());
        assert!(InitialData::from_spec("exp:1").is_err());
        assert!(InitialData::from_spec("sin:1:1").is_err());
    }

    #[test]
    fn grid_rejects_coarse_and_unsorted() {
        assert!(GridSpec::new(8, vec![1.0]).is_err());
        assert!(GridSpec::new(16, vec![1.0, 0.5]).is_err());
        assert!(GridSpec::new(16, vec![0.0, 0.5]).is_ok());
    }

    #[test]
    fn free_zero_data_stays_zero() {
        let grid = GridSpec::new(32, vec![0.0, 0.5, 1.0]).unwrap();
        let f = solve_forward_flood(&HamiltonianModel::free(), &InitialData::constant(0.0), &grid, &small_seeds()).unwrap();
        assert_eq!(f.fill_fraction, 1.0);
        assert!(f.fallback_cells.is_empty());
        assert!(f.values.iter().all(|v| v.abs() < 1e-12), "{:?}", f.values);
    }

    #[test]
    fn stationary_discount() {
        let m = HamiltonianModel::discounted(1.0).without_potential();
        let grid = GridSpec::new(16, vec![1.0]).unwrap();
        let f = solve_forward_flood(&m, &InitialData::constant(1.0), &grid, &small_seeds()).unwrap();
        let e = (-1.0f64).exp();
        assert!(f.values.iter().all(|v| (v - e).abs() < 1e-9), "{:?}", f.values);
    }

    #[test]
    fn shooting_free_examples() {
        let free = HamiltonianModel::free();
        let v = solve_via_shooting(&free, &InitialData::constant(0.0), &[(0.3, 0.7)], &Default::default()).unwrap();
        assert!(v[0].abs() < 1e-12);

        let phi = InitialData::cosine(1.0, 1.0, 0.0);
        let got = solve_via_shooting(&free, &phi, &[(0.0, 0.5)], &Default::default()).unwrap()[0];
        let dense = (0..10_000)
            .map(|k| {
                let y = k as f64 / 1e4;
                let d = y.min(1.0 - y);
                phi.eval(y) + d * d / 1.0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((got - dense).abs() < 1e-6, "{got} vs {dense}");
    }

    #[test]
    fn degenerate_query_time() {
        let r = solve_via_shooting(&HamiltonianModel::free(), &InitialData::constant(0.0), &[(0.0, 1e-4)], &Default::default());
        assert!(matches!(r, Err(Error::DegenerateTime(_))));
    }
}
