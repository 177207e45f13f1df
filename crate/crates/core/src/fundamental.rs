//! Fundamental solution `h_{x0,u0}(x, t)`: the smallest terminal value
//! `U(t)` over all characteristics with `X(0) = x0`, `U(0) = u0` and
//! `X(t) = x` on the circle.
//!
//! Candidates are found by shooting on the initial momentum: a uniform scan
//! of `p0` brackets every sign change of the lift residual
//! `X(t; p0) - (x + k)` for each winding `k`, and each bracket is refined.

use serde::{Deserialize, Serialize};

use crate::charflow::{flow_endpoint, flow_endpoint_bounded, flow_uniform, PhasePoint, Trajectory};
use crate::error::{Error, Result};
use crate::models::Hamiltonian;
use crate::numerics::{refine_bracket, secant_root, wrap};

/// Queries below this horizon are rejected.
pub const MIN_TIME: f64 = 1e-3;
/// Roots closer than this in `p0` are merged.
pub const DEDUP_GAP: f64 = 1e-6;
/// Terminal values within this gap count as tied; the smaller `|p0|` wins.
pub const TIE_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// Momentum scan range `[-p_max, p_max]`.
    pub p_max: f64,
    /// Number of scan nodes.
    pub n_p: usize,
    /// Windings `|k| <= k_max` are searched.
    pub k_max: i64,
    /// Required `|X(t) - (x + k)|` for a converged root.
    pub root_tol: f64,
    /// Integrator tolerance.
    pub tol: f64,
    /// Automatic range doublings before `EmptyRootSet` is surfaced.
    pub max_doublings: u32,
    /// Keep a dense trajectory of the minimizer.
    pub retain_trajectory: bool,
    /// Uniform nodes in the retained trajectory.
    pub trajectory_nodes: usize,
    /// Let [`fundamental_solution`] abandon shots whose terminal value
    /// provably exceeds a known candidate. The value is unaffected; the
    /// candidate list then holds only the shots that were completed.
    pub prune: bool,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            p_max: 8.0,
            n_p: 801,
            k_max: 2,
            root_tol: 1e-10,
            tol: 1e-10,
            max_doublings: 3,
            retain_trajectory: true,
            trajectory_nodes: 1000,
            prune: true,
        }
    }
}

/// One characteristic leaving `(x0, u0)` with momentum `p0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingResult {
    pub p0: f64,
    /// Winding relative to the lift of the target nearest to `x0`.
    pub winding: i64,
    pub terminal: PhasePoint,
    /// `|X(t) - (x + k period)|`; NaN until compared against a target.
    pub residual: f64,
    pub converged: bool,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
}

impl ShootingResult {
    /// Fills residual and convergence against the lift `target`.
    pub fn against_target(mut self, target_lift: f64, winding: i64, root_tol: f64) -> Self {
        self.winding = winding;
        self.residual = (self.terminal.x - target_lift).abs();
        self.converged = self.residual <= root_tol;
        self
    }
}

/// Flows `(x0, u0, p0)` for time `t`; residual and winding are left for
/// the caller.
pub fn shoot<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    p0: f64,
    t: f64,
    tol: f64,
) -> Result<ShootingResult> {
    let terminal = flow_endpoint(model, PhasePoint::new(x0, u0, p0), t, tol)?;
    Ok(ShootingResult {
        p0,
        winding: 0,
        terminal,
        residual: f64::NAN,
        converged: false,
        trajectory: None,
    })
}

/// Lift of `x_target` closest to `x0`.
pub fn nearest_lift(x0: f64, x_target: f64, period: f64) -> f64 {
    let xt = wrap(x_target, period);
    xt + ((x0 - xt) / period).round() * period
}

/// All converged characteristics from `(x0, u0)` to `x_target` in time `t`,
/// sorted by `(winding, p0)`.
///
/// An empty scan is retried with `p_max`, `n_p` and `k_max` doubled, up to
/// `cfg.max_doublings` times.
pub fn solve_bvp<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    x_target: f64,
    t: f64,
    cfg: &ShootingConfig,
) -> Result<Vec<ShootingResult>> {
    solve_bvp_bounded(model, x0, u0, x_target, t, cfg, None)
}

/// [`solve_bvp`] restricted to characteristics that may end at or below
/// `ceiling`. Shots proven to end above it are dropped; if that leaves no
/// root the result is empty rather than an error.
pub(crate) fn solve_bvp_bounded<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    x_target: f64,
    t: f64,
    cfg: &ShootingConfig,
    ceiling: Option<f64>,
) -> Result<Vec<ShootingResult>> {
    if t < MIN_TIME {
        return Err(Error::DegenerateTime(t));
    }
    let mut p_max = cfg.p_max;
    let mut n_p = cfg.n_p.max(2);
    let mut k_max = cfg.k_max.max(0);
    for attempt in 0..=cfg.max_doublings {
        let scan = Scan { x0, u0, x_target, t, p_max, n_p, k_max, ceiling };
        let (roots, pruned) = scan.run(model, cfg);
        if !roots.is_empty() || pruned {
            return Ok(roots);
        }
        if attempt < cfg.max_doublings {
            p_max *= 2.0;
            n_p = 2 * n_p - 1;
            k_max = (2 * k_max).max(1);
        }
    }
    Err(Error::EmptyRootSet { p_max, k_max })
}

/// A cheap converged characteristic to serve as a pruning ceiling: the
/// secant root from the straight-line momentum, else the lowest root of a
/// coarse low-momentum scan.
fn first_candidate<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    x_target: f64,
    t: f64,
    cfg: &ShootingConfig,
) -> Option<ShootingResult> {
    let target = nearest_lift(x0, x_target, model.period());
    if let Some(r) = shoot_local(model, x0, u0, target, t, (target - x0) / t, cfg) {
        return Some(r);
    }
    let coarse = Scan {
        x0,
        u0,
        x_target,
        t,
        p_max: 0.25 * cfg.p_max,
        n_p: 17,
        k_max: cfg.k_max.max(0),
        ceiling: None,
    };
    let (roots, _) = coarse.run(model, cfg);
    roots.into_iter().min_by(|a, b| a.terminal.u.total_cmp(&b.terminal.u))
}

/// Root of `X(t; p0) = target_lift` within `[p_center - dp, p_center + dp]`,
/// refined from a sign change on either half; the lower terminal value wins
/// when both halves bracket a root.
#[allow(clippy::too_many_arguments)]
pub(crate) fn shoot_near<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    target_lift: f64,
    t: f64,
    p_center: f64,
    dp: f64,
    cfg: &ShootingConfig,
) -> Option<ShootingResult> {
    let eval = |p: f64| {
        flow_endpoint(model, PhasePoint::new(x0, u0, p), t, cfg.tol)
            .ok()
            .map(|s| (s.x - target_lift, s))
    };
    let (rc, sc) = eval(p_center)?;
    if rc.abs() <= cfg.root_tol {
        return Some(converged(p_center, 0, sc, rc));
    }
    let mut best: Option<ShootingResult> = None;
    for side in [-dp, dp] {
        let Some((rs, _)) = eval(p_center + side) else { continue };
        if rs.signum() == rc.signum() && rs.abs() > cfg.root_tol {
            continue;
        }
        let (a, fa, b, fb) = if side < 0.0 {
            (p_center + side, rs, p_center, rc)
        } else {
            (p_center, rc, p_center + side, rs)
        };
        let root = if rs.abs() <= cfg.root_tol {
            eval(p_center + side).map(|(r, s)| (p_center + side, r, s))
        } else {
            refine_bracket(eval, a, fa, b, fb, cfg.root_tol, 200).map(|r| (r.x, r.residual, r.payload))
        };
        if let Some((p, r, s)) = root {
            if best.as_ref().map_or(true, |b| s.u < b.terminal.u) {
                best = Some(converged(p, 0, s, r));
            }
        }
    }
    best
}

/// Root of `X(t; p0) = target_lift` near `p_guess`, by secant iteration.
pub(crate) fn shoot_local<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    target_lift: f64,
    t: f64,
    p_guess: f64,
    cfg: &ShootingConfig,
) -> Option<ShootingResult> {
    let root = secant_root(
        |p| {
            flow_endpoint(model, PhasePoint::new(x0, u0, p), t, cfg.tol)
                .ok()
                .map(|s| (s.x - target_lift, s))
        },
        p_guess,
        p_guess + 1e-3 * (1.0 + p_guess.abs()),
        cfg.root_tol,
        1.0 + 0.25 * p_guess.abs(),
        40,
    )?;
    Some(converged(root.x, 0, root.payload, root.residual))
}

enum Shot {
    Reached(PhasePoint),
    Pruned,
    Failed,
}

impl Shot {
    fn state(&self) -> Option<PhasePoint> {
        match self {
            Shot::Reached(s) => Some(*s),
            _ => None,
        }
    }
}

struct Scan {
    x0: f64,
    u0: f64,
    x_target: f64,
    t: f64,
    p_max: f64,
    n_p: usize,
    k_max: i64,
    ceiling: Option<f64>,
}

impl Scan {
    fn shot<M: Hamiltonian + ?Sized>(&self, model: &M, p: f64, tol: f64, bounded: bool) -> Shot {
        let start = PhasePoint::new(self.x0, self.u0, p);
        match self.ceiling.filter(|_| bounded) {
            Some(c) => match flow_endpoint_bounded(model, start, self.t, tol, c) {
                Ok(Some(s)) => Shot::Reached(s),
                Ok(None) => Shot::Pruned,
                Err(_) => Shot::Failed,
            },
            None => flow_endpoint(model, start, self.t, tol)
                .map_or(Shot::Failed, Shot::Reached),
        }
    }

    /// Converged roots sorted by `(winding, p0)`, and whether any shot was
    /// pruned.
    fn run<M: Hamiltonian + ?Sized>(&self, model: &M, cfg: &ShootingConfig) -> (Vec<ShootingResult>, bool) {
        let period = model.period();
        let base = nearest_lift(self.x0, self.x_target, period);
        let n_p = self.n_p;
        let lattice: Vec<f64> = (0..n_p)
            .map(|i| -self.p_max + 2.0 * self.p_max * i as f64 / (n_p - 1) as f64)
            .collect();
        let mut scan: Vec<Shot> = lattice.iter().map(|&p| self.shot(model, p, cfg.tol, true)).collect();
        // pruned shots bordering completed ones are finished so that no
        // bracket is lost at the edge of a pruned run
        let pruned_any = scan.iter().any(|s| matches!(s, Shot::Pruned));
        if pruned_any {
            let reached: Vec<bool> = scan.iter().map(|s| matches!(s, Shot::Reached(_))).collect();
            for i in 0..n_p {
                let edge = (i > 0 && reached[i - 1]) || (i + 1 < n_p && reached[i + 1]);
                if edge && matches!(scan[i], Shot::Pruned) {
                    scan[i] = self.shot(model, lattice[i], cfg.tol, false);
                }
            }
        }

        let mut roots = Vec::new();
        for k in -self.k_max..=self.k_max {
            let target = base + k as f64 * period;
            let residual = |s: &Shot| s.state().map(|s| s.x - target);
            for i in 0..n_p {
                let Some(ri) = residual(&scan[i]) else { continue };
                if ri.abs() <= cfg.root_tol {
                    roots.push(converged(lattice[i], k, scan[i].state().unwrap(), ri));
                    continue;
                }
                if i + 1 == n_p {
                    continue;
                }
                let Some(rj) = residual(&scan[i + 1]) else { continue };
                if rj.abs() <= cfg.root_tol || ri.signum() == rj.signum() {
                    continue;
                }
                let refined = refine_bracket(
                    |p| {
                        flow_endpoint(model, PhasePoint::new(self.x0, self.u0, p), self.t, cfg.tol)
                            .ok()
                            .map(|s| (s.x - target, s))
                    },
                    lattice[i],
                    ri,
                    lattice[i + 1],
                    rj,
                    cfg.root_tol,
                    200,
                );
                if let Some(root) = refined {
                    roots.push(converged(root.x, k, root.payload, root.residual));
                }
            }
        }
        (merge_roots(roots), pruned_any)
    }
}

/// Merges roots closer than [`DEDUP_GAP`] (keeping the smaller terminal
/// value) and sorts by `(winding, p0)`.
fn merge_roots(mut roots: Vec<ShootingResult>) -> Vec<ShootingResult> {
    roots.sort_by(|a, b| a.p0.total_cmp(&b.p0));
    let mut merged: Vec<ShootingResult> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if (r.p0 - last.p0).abs() < DEDUP_GAP => {
                if r.terminal.u < last.terminal.u {
                    *last = r;
                }
            }
            _ => merged.push(r),
        }
    }
    merged.sort_by(|a, b| a.winding.cmp(&b.winding).then(a.p0.total_cmp(&b.p0)));
    merged
}

fn converged(p0: f64, winding: i64, terminal: PhasePoint, residual: f64) -> ShootingResult {
    ShootingResult {
        p0,
        winding,
        terminal,
        residual: residual.abs(),
        converged: true,
        trajectory: None,
    }
}

/// `h_{x0,u0}(x, t)` with the minimizing characteristic attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalValue {
    pub value: f64,
    pub x0: f64,
    pub u0: f64,
    pub x_target: f64,
    pub t: f64,
    pub minimizer: ShootingResult,
    pub candidates: Vec<ShootingResult>,
}

/// Index of the minimizing candidate: smallest terminal `u`, ties within
/// [`TIE_GAP`] broken by smaller `|p0|`, then smaller `p0`.
fn select_minimizer(candidates: &[ShootingResult]) -> usize {
    let min_u = candidates.iter().map(|c| c.terminal.u).fold(f64::INFINITY, f64::min);
    let mut best = None::<usize>;
    for (i, c) in candidates.iter().enumerate() {
        if c.terminal.u > min_u + TIE_GAP {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(j) => {
                let b = &candidates[j];
                let key = (c.p0.abs(), c.p0);
                if key.0 < b.p0.abs() || (key.0 == b.p0.abs() && key.1 < b.p0) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    best.expect("non-empty candidate list")
}

pub fn fundamental_solution<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    x_target: f64,
    t: f64,
    cfg: &ShootingConfig,
) -> Result<FundamentalValue> {
    let candidates = bounded_candidates(model, x0, u0, x_target, t, cfg, None)?;
    let idx = select_minimizer(&candidates);
    let mut minimizer = candidates[idx].clone();
    if cfg.retain_trajectory {
        let start = PhasePoint::new(x0, u0, minimizer.p0);
        minimizer.trajectory = Some(flow_uniform(model, start, t, cfg.tol, cfg.trajectory_nodes)?);
    }
    let value = candidates
        .iter()
        .map(|c| c.terminal.u)
        .fold(f64::INFINITY, f64::min);
    Ok(FundamentalValue {
        value,
        x0,
        u0,
        x_target,
        t,
        minimizer,
        candidates,
    })
}

/// Candidates that may end at or below `ceiling`, with the pruning
/// ceiling tightened by a cheap first root when `cfg.prune` is set. Empty
/// only if an external ceiling excluded everything.
fn bounded_candidates<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    x_target: f64,
    t: f64,
    cfg: &ShootingConfig,
    ceiling: Option<f64>,
) -> Result<Vec<ShootingResult>> {
    if t < MIN_TIME {
        return Err(Error::DegenerateTime(t));
    }
    let seed = if cfg.prune { first_candidate(model, x0, u0, x_target, t, cfg) } else { None };
    let bound = match (ceiling, seed.as_ref().map(|s| s.terminal.u)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let mut candidates = solve_bvp_bounded(model, x0, u0, x_target, t, cfg, bound)?;
    if let Some(seed) = seed {
        candidates.push(seed);
        candidates = merge_roots(candidates);
    }
    Ok(candidates)
}

/// The minimizing characteristic from `(x0, u0)` to `x_target`, or `None`
/// when it provably ends above `ceiling`.
pub(crate) fn minimizer_below<M: Hamiltonian + ?Sized>(
    model: &M,
    x0: f64,
    u0: f64,
    x_target: f64,
    t: f64,
    cfg: &ShootingConfig,
    ceiling: Option<f64>,
) -> Result<Option<ShootingResult>> {
    let candidates = bounded_candidates(model, x0, u0, x_target, t, cfg, ceiling)?;
    if candidates.is_empty() {
        return Ok(None);
    }
    Ok(Some(candidates[select_minimizer(&candidates)].clone()))
}

/// Calibration defect `|(U(t) - u0) - int_0^t L(X, U, X') dtau|` along the
/// retained minimizer.
pub fn verify_calibration<M: Hamiltonian + ?Sized>(model: &M, fv: &FundamentalValue) -> Result<f64> {
    let traj = fv.minimizer.trajectory.as_ref().ok_or_else(|| {
        Error::InvalidInput("fundamental value carries no minimizer trajectory".into())
    })?;
    let action = traj.action(model)?;
    Ok(((traj.end().u - traj.start().u) - action).abs())
}

/// Restriction check for the minimizer: at `s` in `{t/4, t/2, 3t/4}` the
/// characteristic value `U(s)` must equal a fresh `h_{x0,u0}(X(s), s)`.
/// Returns the worst `|U(s) - h|`.
pub fn interior_consistency<M: Hamiltonian + ?Sized>(
    model: &M,
    fv: &FundamentalValue,
    cfg: &ShootingConfig,
) -> Result<f64> {
    let sub = ShootingConfig { retain_trajectory: false, ..cfg.clone() };
    let start = PhasePoint::new(fv.x0, fv.u0, fv.minimizer.p0);
    let mut worst = 0.0f64;
    for frac in [0.25, 0.5, 0.75] {
        let s = fv.t * frac;
        let mid = flow_endpoint(model, start, s, cfg.tol)?;
        let h = fundamental_solution(model, fv.x0, fv.u0, mid.x, s, &sub)?.value;
        worst = worst.max((mid.u - h).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HamiltonianModel;

    #[test]
    fn shoot_free_examples() {
        let m = HamiltonianModel::free();
        let s = shoot(&m, 0.0, 0.0, 0.5, 1.0, 1e-10).unwrap();
        assert!((s.terminal.x - 0.5).abs() < 1e-13);
        assert!((s.terminal.u - 0.125).abs() < 1e-13);
        let s = shoot(&m, 0.0, 0.0, -1.5, 1.0, 1e-10).unwrap();
        assert!((s.terminal.x + 1.5).abs() < 1e-13);
        assert!((s.terminal.u - 1.125).abs() < 1e-13);
        assert!(!s.converged && s.residual.is_nan());
        let s = s.against_target(-1.5, -2, 1e-10);
        assert!(s.converged);
    }

    #[test]
    fn shoot_mechanical_equilibrium() {
        let s = shoot(&HamiltonianModel::mechanical(), 0.0, 0.0, 0.0, 1.0, 1e-10).unwrap();
        assert_eq!(s.terminal.x, 0.0);
        assert_eq!(s.terminal.p, 0.0);
        assert!((s.terminal.u + 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_three_windings() {
        let cfg = ShootingConfig { k_max: 1, ..Default::default() };
        let roots = solve_bvp(&HamiltonianModel::free(), 0.0, 0.0, 0.25, 0.5, &cfg).unwrap();
        let got: Vec<(i64, f64)> = roots.iter().map(|r| (r.winding, r.p0)).collect();
        assert_eq!(got.len(), 3);
        for ((k, p), (ek, ep)) in got.iter().zip([(-1, -1.5), (0, 0.5), (1, 2.5)]) {
            assert_eq!(*k, ek);
            assert!((p - ep).abs() < 1e-9);
        }
        assert!(roots.iter().all(|r| r.converged && r.residual <= 1e-10));
    }

    #[test]
    fn free_single_root() {
        let cfg = ShootingConfig { k_max: 0, ..Default::default() };
        let roots = solve_bvp(&HamiltonianModel::free(), 0.0, 0.0, 0.0, 1.0, &cfg).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0].p0.abs() < 1e-12);
    }

    #[test]
    fn empty_root_set_after_doublings() {
        // reaching x = 0.5 in t = 1e-2 needs |p0| = 50 > 8 * 2^2
        let cfg = ShootingConfig { k_max: 0, max_doublings: 2, ..Default::default() };
        let r = solve_bvp(&HamiltonianModel::free(), 0.0, 0.0, 0.5, 0.01, &cfg);
        assert!(matches!(r, Err(Error::EmptyRootSet { .. })), "{r:?}");
        let cfg = ShootingConfig { k_max: 0, max_doublings: 3, ..Default::default() };
        // 8 * 2^3 = 64 suffices
        assert!(solve_bvp(&HamiltonianModel::free(), 0.0, 0.0, 0.5, 0.01, &cfg).is_ok());
    }

    #[test]
    fn degenerate_time() {
        let r = fundamental_solution(&HamiltonianModel::free(), 0.0, 0.0, 0.1, 5e-4, &Default::default());
        assert!(matches!(r, Err(Error::DegenerateTime(_))));
    }

    #[test]
    fn free_closed_form() {
        let fv = fundamental_solution(&HamiltonianModel::free(), 0.0, 0.0, 0.25, 0.5, &Default::default()).unwrap();
        assert!((fv.value - 0.0625).abs() < 1e-10);
        assert_eq!(fv.minimizer.winding, 0);
        let fv = fundamental_solution(&HamiltonianModel::free(), 0.0, 5.0, 0.5, 1.0, &Default::default()).unwrap();
        assert!((fv.value - 5.125).abs() < 1e-10);
        // symmetric tie at distance 1/2: smaller |p0| then smaller p0
        assert!((fv.minimizer.p0 + 0.5).abs() < 1e-9);
    }

    #[test]
    fn pure_discount_stationary() {
        let m = HamiltonianModel::discounted(1.0).without_potential();
        let fv = fundamental_solution(&m, 0.0, 1.0, 0.0, 1.0, &Default::default()).unwrap();
        assert!((fv.value - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn minimality_and_calibration_free() {
        let m = HamiltonianModel::free();
        let fv = fundamental_solution(&m, 0.0, 0.0, 0.25, 0.5, &Default::default()).unwrap();
        assert!(fv.candidates.iter().all(|c| fv.value <= c.terminal.u));
        assert!(verify_calibration(&m, &fv).unwrap() <= 1e-8);
    }

    #[test]
    fn nearest_lift_wraps() {
        assert!((nearest_lift(0.9, 0.1, 1.0) - 1.1).abs() < 1e-15);
        assert!((nearest_lift(0.0, 0.75, 1.0) + 0.25).abs() < 1e-15);
    }
}
