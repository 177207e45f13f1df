//! Experiments on computed solutions: `u`-truncation independence, a-priori
//! bounds on minimizers, semiconcavity, the triangle inequality of the
//! minimal action and sensitivity to numerical knobs.

pub mod properties;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{solve_forward_flood, solve_via_shooting, GridSpec, InitialData, SeedSpec, SolutionField, ViaShootingConfig};
use crate::fundamental::{fundamental_solution, FundamentalValue, ShootingConfig};
use crate::models::{truncate_model, Hamiltonian, HamiltonianModel};

/// Values for truncation radii above the measured bound must agree to this.
pub const TRUNCATION_TOL: f64 = 1e-6;
/// Per-radius bound maxima above the measured bound must agree to this.
pub const BOUND_TOL: f64 = 1e-6;
pub const TRIANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    /// Common starting point; the starting value is `phi(x0)`.
    pub x0: f64,
    pub shooting: ShootingConfig,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { x0: 0.0, shooting: ShootingConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub query_x: f64,
    pub query_t: f64,
    pub r: f64,
    /// `None` when the solve failed below the measured bound.
    pub value: Option<f64>,
}

/// Largest `|U|` and `|X'|` along the minimizers of one truncation radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusBounds {
    pub r: f64,
    pub a_star: f64,
    pub k_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationTable {
    pub model: String,
    pub x0: f64,
    pub u0: f64,
    /// Untruncated value per query.
    pub base_values: Vec<f64>,
    /// Bounds measured on the untruncated minimizers.
    pub base_bounds: RadiusBounds,
    /// `max(A*, K*)` of the untruncated run.
    pub r_hat: f64,
    pub rows: Vec<TruncationRow>,
    pub per_r: Vec<RadiusBounds>,
    /// Radii at or above `r_hat`.
    pub stable_radii: Vec<f64>,
    /// Largest pairwise difference among the stable radii, over queries.
    pub max_stable_diff: f64,
    pub pass: bool,
}

fn minimizer_bounds(fv: &FundamentalValue) -> (f64, f64) {
    fv.minimizer
        .trajectory
        .as_ref()
        .map_or((fv.value.abs(), 0.0), |tr| (tr.max_abs_u, tr.max_abs_velocity))
}

/// Fundamental solutions from `(x0, phi(x0))` for each `u`-truncation
/// radius; values for radii above the measured `max(A*, K*)` must agree.
pub fn truncation_experiment(
    model: &HamiltonianModel,
    phi: &InitialData,
    queries: &[(f64, f64)],
    r_list: &[f64],
    cfg: &TruncationConfig,
) -> Result<TruncationTable> {
    if r_list.len() < 3 {
        return Err(Error::InvalidInput("truncation experiment needs at least three radii".into()));
    }
    if r_list.iter().any(|r| !(*r > 0.0)) || r_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("radii must be positive and strictly increasing".into()));
    }
    if queries.is_empty() {
        return Err(Error::InvalidInput("no queries".into()));
    }
    let shooting = ShootingConfig { retain_trajectory: true, ..cfg.shooting.clone() };
    let u0 = phi.eval(cfg.x0);

    let mut base_values = Vec::with_capacity(queries.len());
    let (mut a_base, mut k_base) = (0.0f64, 0.0f64);
    for &(x, t) in queries {
        let fv = fundamental_solution(model, cfg.x0, u0, x, t, &shooting)?;
        let (a, k) = minimizer_bounds(&fv);
        a_base = a_base.max(a);
        k_base = k_base.max(k);
        base_values.push(fv.value);
    }
    let r_hat = a_base.max(k_base);

    let mut rows = Vec::new();
    let mut per_r = Vec::new();
    for &r in r_list {
        let truncated = truncate_model(model, r);
        let (mut a_r, mut k_r) = (0.0f64, 0.0f64);
        for &(x, t) in queries {
            let value = match fundamental_solution(&truncated, cfg.x0, u0, x, t, &shooting) {
                Ok(fv) => {
                    let (a, k) = minimizer_bounds(&fv);
                    a_r = a_r.max(a);
                    k_r = k_r.max(k);
                    Some(fv.value)
                }
                Err(e) if r >= r_hat => return Err(e),
                Err(_) => None,
            };
            rows.push(TruncationRow { query_x: x, query_t: t, r, value });
        }
        per_r.push(RadiusBounds { r, a_star: a_r, k_star: k_r });
    }

    let stable_radii: Vec<f64> = r_list.iter().copied().filter(|&r| r >= r_hat).collect();
    let mut max_stable_diff = 0.0f64;
    for &(x, t) in queries {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|row| row.query_x == x && row.query_t == t && row.r >= r_hat)
            .filter_map(|row| row.value)
            .collect();
        let spread = vals.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
            - vals.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        if !vals.is_empty() {
            max_stable_diff = max_stable_diff.max(spread);
        }
    }
    Ok(TruncationTable {
        model: model.name(),
        x0: cfg.x0,
        u0,
        base_values,
        base_bounds: RadiusBounds { r: f64::INFINITY, a_star: a_base, k_star: k_base },
        r_hat,
        rows,
        per_r,
        pass: !stable_radii.is_empty() && max_stable_diff <= TRUNCATION_TOL,
        stable_radii,
        max_stable_diff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Largest `|U(s)|` over all minimizers of the experiment.
    pub a_star_observed: f64,
    /// Largest `|X'(s)|` likewise.
    pub k_star_observed: f64,
    pub per_r: Vec<RadiusBounds>,
    /// Spread of the per-radius maxima over the stable radii.
    pub a_spread: f64,
    pub k_spread: f64,
    pub pass: bool,
}

/// Per-radius minimizer bounds of a truncation run; above the measured
/// bound they must not change with the radius.
pub fn bound_monitor(table: &TruncationTable) -> BoundReport {
    let stable: Vec<&RadiusBounds> = table.per_r.iter().filter(|b| b.r >= table.r_hat).collect();
    let spread = |f: fn(&RadiusBounds) -> f64| {
        let vals: Vec<f64> = stable.iter().map(|b| f(b)).collect();
        if vals.is_empty() {
            return 0.0;
        }
        vals.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - vals.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    };
    let a_spread = spread(|b| b.a_star);
    let k_spread = spread(|b| b.k_star);
    let a_star_observed = table.per_r.iter().map(|b| b.a_star).fold(table.base_bounds.a_star, f64::max);
    let k_star_observed = table.per_r.iter().map(|b| b.k_star).fold(table.base_bounds.k_star, f64::max);
    BoundReport {
        a_star_observed,
        k_star_observed,
        per_r: table.per_r.clone(),
        a_spread,
        k_spread,
        pass: a_star_observed.is_finite()
            && k_star_observed.is_finite()
            && !stable.is_empty()
            && a_spread <= BOUND_TOL
            && k_spread <= BOUND_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconcavityRow {
    pub t: f64,
    /// Largest `(u(x+h) - 2u(x) + u(x-h)) / h^2`.
    pub max_second_diff: f64,
    /// Largest `|u(x+h) - u(x)| / h`.
    pub max_lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiconcavityReport {
    pub delta: f64,
    pub max_second_diff: f64,
    pub max_lipschitz: f64,
    pub rows: Vec<SemiconcavityRow>,
}

/// One-sided second-difference and Lipschitz estimates over all output
/// times `t >= delta`.
pub fn semiconcavity_probe(field: &SolutionField, delta: f64) -> Result<SemiconcavityReport> {
    if !field.is_filled() {
        return Err(Error::UnfilledField);
    }
    let t_min = field.t_nodes.iter().copied().fold(f64::INFINITY, f64::min);
    if delta < t_min {
        return Err(Error::InvalidInput(format!("delta = {delta} is below the first output time {t_min}")));
    }
    let nx = field.nx();
    let h = field.x_nodes.get(1).map_or(1.0, |x1| x1 - field.x_nodes[0]);
    let mut rows = Vec::new();
    for (j, &t) in field.t_nodes.iter().enumerate() {
        if t < delta {
            continue;
        }
        let u = field.column(j);
        let (mut sc, mut lip) = (f64::NEG_INFINITY, 0.0f64);
        for i in 0..nx {
            let (up, um) = (u[(i + 1) % nx], u[(i + nx - 1) % nx]);
            sc = sc.max((up - 2.0 * u[i] + um) / (h * h));
            lip = lip.max((up - u[i]).abs() / h);
        }
        rows.push(SemiconcavityRow { t, max_second_diff: sc, max_lipschitz: lip });
    }
    Ok(SemiconcavityReport {
        delta,
        max_second_diff: rows.iter().map(|r| r.max_second_diff).fold(f64::NEG_INFINITY, f64::max),
        max_lipschitz: rows.iter().map(|r| r.max_lipschitz).fold(0.0, f64::max),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub coarse: SemiconcavityReport,
    pub fine: SemiconcavityReport,
    /// Fine over coarse semiconcavity estimate.
    pub growth: f64,
    pub pass: bool,
}

/// [`semiconcavity_probe`] on flooded fields at `nx` and `2 nx`: both
/// estimates finite and the semiconcavity bound growing at most twofold.
pub fn semiconcavity_refinement<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    grid: &GridSpec,
    seeds: &SeedSpec,
    delta: f64,
) -> Result<RefinementReport> {
    let coarse = semiconcavity_probe(&solve_forward_flood(model, phi, grid, seeds)?, delta)?;
    let fine_grid = GridSpec { nx: 2 * grid.nx, ..grid.clone() };
    let fine = semiconcavity_probe(&solve_forward_flood(model, phi, &fine_grid, seeds)?, delta)?;
    // flat data gives second differences at roundoff level
    let floor = 1e-6;
    let growth = fine.max_second_diff.max(floor) / coarse.max_second_diff.max(floor);
    let finite = [coarse.max_second_diff, coarse.max_lipschitz, fine.max_second_diff, fine.max_lipschitz]
        .iter()
        .all(|v| v.is_finite());
    Ok(RefinementReport { pass: finite && growth <= 2.0, coarse, fine, growth })
}

/// One triangle: `h_{t+t2}(x, z) <= h_t(x, y) + h_t2(y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleQuery {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub t: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleSample {
    pub query: TriangleQuery,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleReport {
    pub worst_slack: f64,
    pub samples: Vec<TriangleSample>,
    pub pass: bool,
}

/// `n` triples uniform on the circle with times uniform in `t_range`, from
/// a fixed seed.
pub fn random_triangle_queries(n: usize, seed: u64, t_range: (f64, f64)) -> Vec<TriangleQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| TriangleQuery {
            x: rng.gen::<f64>(),
            y: rng.gen::<f64>(),
            z: rng.gen::<f64>(),
            t: rng.gen_range(t_range.0..=t_range.1),
            t2: rng.gen_range(t_range.0..=t_range.1),
        })
        .collect()
}

/// Triangle inequality of the minimal action (`u0 = 0`) for models without
/// `u`-dependence. Returns the smallest `rhs - lhs`.
pub fn triangle_check(
    model: &HamiltonianModel,
    queries: &[TriangleQuery],
    cfg: &ShootingConfig,
) -> Result<TriangleReport> {
    if model.kind.is_u_dependent() {
        return Err(Error::InvalidInput(format!(
            "triangle check applies to u-independent models, not `{}`",
            model.kind
        )));
    }
    let cfg = ShootingConfig { retain_trajectory: false, ..cfg.clone() };
    let h = |a: f64, b: f64, t: f64| fundamental_solution(model, a, 0.0, b, t, &cfg).map(|fv| fv.value);
    let mut samples = Vec::with_capacity(queries.len());
    for q in queries {
        let lhs = h(q.x, q.z, q.t + q.t2)?;
        let rhs = h(q.x, q.y, q.t)? + h(q.y, q.z, q.t2)?;
        samples.push(TriangleSample { query: *q, lhs, rhs, slack: rhs - lhs });
    }
    let worst_slack = samples.iter().map(|s| s.slack).fold(f64::INFINITY, f64::min);
    Ok(TriangleReport { pass: worst_slack >= -TRIANGLE_TOL, worst_slack, samples })
}

/// Numerical knob varied by [`sensitivity_study`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    IntegratorTol,
    NP,
    Ny,
    KMax,
}

impl Knob {
    fn apply(self, base: &ViaShootingConfig, level: f64) -> ViaShootingConfig {
        let mut cfg = base.clone();
        match self {
            Knob::IntegratorTol => cfg.bvp.tol = level,
            Knob::NP => cfg.bvp.n_p = level as usize,
            Knob::Ny => cfg.ny = level as usize,
            Knob::KMax => cfg.bvp.k_max = level as i64,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub knob: Knob,
    pub levels: Vec<f64>,
    pub queries: Vec<(f64, f64)>,
    /// `values[level][query]`.
    pub values: Vec<Vec<f64>>,
    /// Largest spread over all levels, over queries.
    pub drift: f64,
    /// Largest change between the last two levels, over queries.
    pub tail_drift: f64,
}

/// `u` at each query by [`solve_via_shooting`] for every level of `knob`.
pub fn sensitivity_study<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    queries: &[(f64, f64)],
    knob: Knob,
    levels: &[f64],
    base: &ViaShootingConfig,
) -> Result<SensitivityTable> {
    if levels.len() < 3 {
        return Err(Error::InvalidInput("sensitivity study needs at least three levels".into()));
    }
    let values = levels
        .iter()
        .map(|&level| solve_via_shooting(model, phi, queries, &knob.apply(base, level)))
        .collect::<Result<Vec<_>>>()?;
    let mut drift = 0.0f64;
    let mut tail_drift = 0.0f64;
    for q in 0..queries.len() {
        let col: Vec<f64> = values.iter().map(|v| v[q]).collect();
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        drift = drift.max(hi - lo);
        tail_drift = tail_drift.max((col[col.len() - 1] - col[col.len() - 2]).abs());
    }
    Ok(SensitivityTable { knob, levels: levels.to_vec(), queries: queries.to_vec(), values, drift, tail_drift })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_is_identity_for_free() {
        let phi = InitialData::constant(0.3);
        let t = truncation_experiment(&HamiltonianModel::free(), &phi, &[(0.25, 0.5)], &[0.5, 1.0, 2.0], &Default::default())
            .unwrap();
        let vals: Vec<f64> = t.rows.iter().filter_map(|r| r.value).collect();
        assert!(vals.iter().all(|v| *v == vals[0]));
        assert!((t.base_values[0] - 0.3625).abs() < 1e-10);
        // A* = max(|u0|, |u0 + d^2 / 2t|) along the straight line
        assert!((t.base_bounds.a_star - 0.3625).abs() < 1e-8);
    }

    #[test]
    fn discount_bound_is_initial_value() {
        let m = HamiltonianModel::discounted(1.0).without_potential();
        let t = truncation_experiment(&m, &InitialData::constant(1.0), &[(0.0, 1.0)], &[2.0, 4.0, 8.0], &Default::default())
            .unwrap();
        assert!((t.base_bounds.a_star - 1.0).abs() < 1e-12);
        let b = bound_monitor(&t);
        assert!(b.pass, "{b:?}");
    }

    #[test]
    fn triangle_examples() {
        let free = HamiltonianModel::free();
        let q = |x, y, z, t, t2| TriangleQuery { x, y, z, t, t2 };
        let r = triangle_check(&free, &[q(0.0, 0.0, 0.0, 0.5, 0.5)], &Default::default()).unwrap();
        assert!(r.worst_slack.abs() < 1e-12);
        let r = triangle_check(&free, &[q(0.0, 0.5, 0.0, 0.5, 0.5)], &Default::default()).unwrap();
        assert!((r.worst_slack - 0.5).abs() < 1e-10);
        assert!(triangle_check(&HamiltonianModel::osgood(), &[], &Default::default()).is_err());
    }

    #[test]
    fn random_queries_are_reproducible() {
        let a = random_triangle_queries(5, 7, (0.2, 0.6));
        assert_eq!(a, random_triangle_queries(5, 7, (0.2, 0.6)));
        assert!(a.iter().all(|q| (0.0..1.0).contains(&q.x) && (0.2..=0.6).contains(&q.t)));
    }

    #[test]
    fn flat_field_has_no_curvature() {
        let grid = GridSpec::new(32, vec![0.5, 1.0]).unwrap();
        let seeds = SeedSpec { ny: 32, np: 33, ..Default::default() };
        let f = solve_forward_flood(&HamiltonianModel::free(), &InitialData::constant(2.0), &grid, &seeds).unwrap();
        let r = semiconcavity_probe(&f, 0.5).unwrap();
        assert!(r.max_second_diff.abs() <= 1e-8 && r.max_lipschitz <= 1e-8);
        assert!(semiconcavity_probe(&f, 0.1).is_err());
    }

    #[test]
    fn free_cosine_semiconcavity_bound() {
        let grid = GridSpec::new(128, vec![0.5]).unwrap();
        let seeds = SeedSpec { ny: 128, np: 129, ..Default::default() };
        let f = solve_forward_flood(&HamiltonianModel::free(), &InitialData::cosine(1.0, 1.0, 0.0), &grid, &seeds).unwrap();
        let r = semiconcavity_probe(&f, 0.5).unwrap();
        assert!(r.max_second_diff < 45.0, "{r:?}");
        assert!(r.max_lipschitz <= 2.0 * std::f64::consts::PI + 1e-6);
    }

    #[test]
    fn discounted_semiconcavity_stable_under_refinement() {
        let grid = GridSpec::new(32, vec![0.1, 0.5]).unwrap();
        let seeds = SeedSpec { ny: 64, np: 65, ..Default::default() };
        let phi = InitialData::sine(1.0, 1.0, 0.0);
        let r = semiconcavity_refinement(&HamiltonianModel::discounted(1.0), &phi, &grid, &seeds, 0.1).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn tolerance_sensitivity_on_free() {
        let phi = InitialData::cosine(1.0, 1.0, 0.0);
        let base = ViaShootingConfig { ny: 16, ..Default::default() };
        let s = sensitivity_study(&HamiltonianModel::free(), &phi, &[(0.1, 0.5)], Knob::IntegratorTol, &[1e-6, 1e-8, 1e-10], &base)
            .unwrap();
        assert!(s.drift <= 1e-6, "{s:?}");
    }
}
