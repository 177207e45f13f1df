//! Reference solvers: a monotone Lax-Friedrichs grid scheme for the full
//! equation, the exact Hopf-Lax formula for `H = p^2/2`, and field
//! comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, InitialData, Provenance, SolutionField};
use crate::models::Hamiltonian;
use crate::numerics::golden_section_min;

/// Time steps of the pilot run used to size the viscosity speed.
const PILOT_NX: usize = 100;
const ALPHA_SAFETY: f64 = 1.5;
/// `u`-margin around the range of `phi` in the sampled working box.
const BOX_U_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LFConfig {
    pub nx: usize,
    /// Courant number in `(0, 1]`.
    pub cfl: f64,
    /// Viscosity speed; chosen by a pilot run when `None`.
    pub alpha: Option<f64>,
    /// Output times; the last one is the horizon.
    pub t_nodes: Vec<f64>,
}

impl LFConfig {
    pub fn new(nx: usize, t_nodes: Vec<f64>) -> Self {
        LFConfig { nx, cfl: 0.45, alpha: None, t_nodes }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }
}

/// Samples of `H` partials over the circle x `[u_lo, u_hi]` x `[-p, p]`.
fn box_maxima<M: Hamiltonian + ?Sized>(model: &M, u_lo: f64, u_hi: f64, p: f64) -> (f64, f64) {
    let (mut hp, mut hu) = (0.0f64, 0.0f64);
    for ix in 0..64 {
        let x = ix as f64 * model.period() / 64.0;
        for iu in 0..=16 {
            let u = u_lo + (u_hi - u_lo) * iu as f64 / 16.0;
            for ip in 0..=32 {
                let q = -p + 2.0 * p * ip as f64 / 32.0;
                let d = model.partials(x, u, q);
                hp = hp.max(d.hp.abs());
                hu = hu.max(d.hu.abs());
            }
        }
    }
    (hp, hu)
}

/// Lax-Friedrichs solution sampled at `cfg.t_nodes`.
///
/// Fails with `CflViolation` as soon as `|H_p|` at a one-sided difference
/// exceeds `alpha`.
pub fn solve_lf<M: Hamiltonian + ?Sized>(model: &M, phi: &InitialData, cfg: &LFConfig) -> Result<SolutionField> {
    let alpha = match cfg.alpha {
        Some(a) => a,
        None => auto_alpha(model, phi, cfg)?,
    };
    run_lf(model, phi, cfg, alpha).map(|(field, _)| field)
}

/// Viscosity speed from a coarse pilot run: the sampled maximum of `|H_p|`
/// over the box spanned by the pilot's gradients, times a safety factor.
pub fn auto_alpha<M: Hamiltonian + ?Sized>(model: &M, phi: &InitialData, cfg: &LFConfig) -> Result<f64> {
    let (lo, hi) = phi.range();
    let (u_lo, u_hi) = (lo - BOX_U_MARGIN, hi + BOX_U_MARGIN);
    let mut p = phi.lipschitz().max(1.0);
    let pilot = LFConfig { nx: PILOT_NX.min(cfg.nx), ..cfg.clone() };
    for _ in 0..8 {
        let trial = ALPHA_SAFETY * box_maxima(model, u_lo, u_hi, p).0;
        match run_lf(model, phi, &pilot, trial) {
            Ok((_, max_grad)) => {
                let p_seen = max_grad.max(phi.lipschitz()).max(1.0);
                return Ok(ALPHA_SAFETY * box_maxima(model, u_lo, u_hi, p_seen).0);
            }
            Err(Error::CflViolation { .. }) => p *= 2.0,
            Err(e) => return Err(e),
        }
    }
    Err(Error::NoConvergence("pilot run could not bound |H_p|".into()))
}

/// The scheme proper; also returns the largest one-sided difference seen.
fn run_lf<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    cfg: &LFConfig,
    alpha: f64,
) -> Result<(SolutionField, f64)> {
    let grid = GridSpec::new(cfg.nx, cfg.t_nodes.clone())?;
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(Error::InvalidInput(format!("cfl = {} outside (0, 1]", cfg.cfl)));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be positive")));
    }
    let period = model.period();
    let nx = cfg.nx;
    let dx = period / nx as f64;
    let dt_max = cfg.cfl * dx / alpha;
    let (lo, hi) = phi.range();
    let hu_box = box_maxima(model, lo - BOX_U_MARGIN, hi + BOX_U_MARGIN, 0.0).1;
    if dt_max * (alpha / dx + hu_box) > 1.0 {
        return Err(Error::InvalidInput(format!(
            "time step {dt_max:e} breaks monotonicity (max |H_u| = {hu_box})"
        )));
    }

    let mut field = SolutionField::unfilled(&grid, period, Provenance::LaxFriedrichs);
    let xs = field.x_nodes.clone();
    let mut u: Vec<f64> = xs.iter().map(|&x| phi.eval(x)).collect();
    let mut next = vec![0.0; nx];
    let mut t = 0.0;
    let mut max_grad = 0.0f64;
    for (j, &t_out) in grid.t_nodes.iter().enumerate() {
        let span = t_out - t;
        let steps = (span / dt_max).ceil() as usize;
        let dt = if steps > 0 { span / steps as f64 } else { 0.0 };
        for _ in 0..steps {
            let mut observed = 0.0f64;
            for i in 0..nx {
                let up = u[(i + 1) % nx];
                let um = u[(i + nx - 1) % nx];
                let dp = (up - u[i]) / dx;
                let dm = (u[i] - um) / dx;
                observed = observed
                    .max(model.partials(xs[i], u[i], dp).hp.abs())
                    .max(model.partials(xs[i], u[i], dm).hp.abs());
                max_grad = max_grad.max(dp.abs());
                let h = model.value(xs[i], u[i], 0.5 * (dp + dm));
                next[i] = u[i] - dt * (h - 0.5 * alpha * (dp - dm));
            }
            if observed > alpha {
                return Err(Error::CflViolation { observed, alpha });
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("Lax-Friedrichs state at t = {t}")));
            }
            std::mem::swap(&mut u, &mut next);
            t += dt;
        }
        t = t_out;
        for (i, &v) in u.iter().enumerate() {
            field.set(i, j, v);
        }
    }
    field.refresh_fill();
    Ok((field, max_grad))
}

/// `min_y min_{|k| <= k_max} phi(y) + (x - y + k)^2 / (2t)` over a lattice of
/// `ny_dense` points in `y`, refined by golden-section search.
pub fn hopf_lax_exact(phi: &InitialData, x: f64, t: f64, ny_dense: usize, k_max: i64) -> f64 {
    let cost = |y: f64| {
        (-k_max..=k_max)
            .map(|k| {
                let d = x - y + k as f64;
                d * d / (2.0 * t)
            })
            .fold(f64::INFINITY, f64::min)
            + phi.eval(y)
    };
    let n = ny_dense.max(1);
    let (mut y_best, mut best) = (0.0, f64::INFINITY);
    for k in 0..n {
        let y = k as f64 / n as f64;
        let v = cost(y);
        if v < best {
            best = v;
            y_best = y;
        }
    }
    let h = 1.0 / n as f64;
    let (_, polished) = golden_section_min(cost, y_best - h, y_best + h, 1e-12);
    best.min(polished)
}

/// [`hopf_lax_exact`] on every grid node; `t = 0` columns hold `phi`.
pub fn hopf_lax_field(phi: &InitialData, grid: &GridSpec, ny_dense: usize, k_max: i64) -> Result<SolutionField> {
    grid.validate()?;
    let mut field = SolutionField::unfilled(grid, 1.0, Provenance::HopfLax);
    for (j, &t) in grid.t_nodes.iter().enumerate() {
        for i in 0..grid.nx {
            let x = field.x_nodes[i];
            let v = if t == 0.0 { phi.eval(x) } else { hopf_lax_exact(phi, x, t, ny_dense, k_max) };
            field.set(i, j, v);
        }
    }
    field.refresh_fill();
    Ok(field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub t: f64,
    pub sup: f64,
    /// Mean absolute difference.
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub sup: f64,
    pub l1: f64,
    pub rows: Vec<ErrorRow>,
}

pub fn compare_fields(a: &SolutionField, b: &SolutionField) -> Result<ErrorReport> {
    compare_fields_masked(a, b, None)
}

/// Like [`compare_fields`], counting only entries where `mask` is `true`.
pub fn compare_fields_masked(a: &SolutionField, b: &SolutionField, mask: Option<&[bool]>) -> Result<ErrorReport> {
    let same = |u: &[f64], v: &[f64]| {
        u.len() == v.len() && u.iter().zip(v).all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + p.abs()))
    };
    if !same(&a.x_nodes, &b.x_nodes) {
        return Err(Error::GridMismatch(format!("x grids differ ({} vs {} nodes)", a.nx(), b.nx())));
    }
    if !same(&a.t_nodes, &b.t_nodes) {
        return Err(Error::GridMismatch(format!("output times differ ({:?} vs {:?})", a.t_nodes, b.t_nodes)));
    }
    if let Some(m) = mask {
        if m.len() != a.values.len() {
            return Err(Error::GridMismatch("mask size differs from the fields".into()));
        }
    }
    if !a.is_filled() || !b.is_filled() {
        return Err(Error::UnfilledField);
    }
    let nx = a.nx();
    let mut rows = Vec::with_capacity(a.t_nodes.len());
    let (mut sup, mut total, mut count) = (0.0f64, 0.0, 0usize);
    for (j, &t) in a.t_nodes.iter().enumerate() {
        let (mut s, mut l, mut c) = (0.0f64, 0.0, 0usize);
        for i in 0..nx {
            if mask.is_some_and(|m| !m[j * nx + i]) {
                continue;
            }
            let d = (a.value(i, j) - b.value(i, j)).abs();
            s = s.max(d);
            l += d;
            c += 1;
        }
        sup = sup.max(s);
        total += l;
        count += c;
        rows.push(ErrorRow { t, sup: s, l1: if c > 0 { l / c as f64 } else { 0.0 } });
    }
    Ok(ErrorReport { sup, l1: if count > 0 { total / count as f64 } else { 0.0 }, rows })
}

/// `true` away from kinks: cells more than `band` nodes from any point
/// where the second difference of `field` exceeds `threshold`.
pub fn smooth_mask(field: &SolutionField, threshold: f64, band: usize) -> Vec<bool> {
    let nx = field.nx();
    let dx = 1.0 / nx as f64;
    let mut mask = vec![true; field.values.len()];
    for j in 0..field.t_nodes.len() {
        let col = field.column(j);
        for i in 0..nx {
            let d2 = (col[(i + 1) % nx] - 2.0 * col[i] + col[(i + nx - 1) % nx]) / (dx * dx);
            if d2.abs() > threshold {
                for o in 0..=2 * band {
                    mask[j * nx + (i + nx + o - band) % nx] = false;
                }
            }
        }
    }
    mask
}

/// Errors of Lax-Friedrichs runs against a fine reference on the reference
/// grid's smooth region, sampled at the coarse nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub nx_ref: usize,
    pub t: f64,
    /// `(nx, sup error, mean error)` on the smooth mask.
    pub rows: Vec<(usize, f64, f64)>,
    /// `err(nx) / err(2 nx)` in the mean norm.
    pub ratios: Vec<f64>,
    /// `log2` of the ratios.
    pub orders: Vec<f64>,
    pub masked_fraction: f64,
}

/// Self-convergence of [`solve_lf`] at a single time `t`.
///
/// Each `nxs` entry must divide `nx_ref`. Kinks are located on the reference
/// solution as second differences above `kink_threshold`, and excluded with
/// a band of three coarse cells.
pub fn lf_self_convergence<M: Hamiltonian + ?Sized>(
    model: &M,
    phi: &InitialData,
    t: f64,
    nxs: &[usize],
    nx_ref: usize,
    alpha: f64,
    kink_threshold: f64,
) -> Result<ConvergenceStudy> {
    let reference = solve_lf(model, phi, &LFConfig::new(nx_ref, vec![t]).with_alpha(alpha))?;
    let mut rows = Vec::new();
    let mut masked = 0usize;
    let mut total = 0usize;
    for &nx in nxs {
        if nx_ref % nx != 0 {
            return Err(Error::GridMismatch(format!("{nx} does not divide {nx_ref}")));
        }
        let stride = nx_ref / nx;
        let coarse = solve_lf(model, phi, &LFConfig::new(nx, vec![t]).with_alpha(alpha))?;
        let mut sampled = coarse.clone();
        for i in 0..nx {
            sampled.set(i, 0, reference.value(i * stride, 0));
        }
        let fine_mask = smooth_mask(&reference, kink_threshold, 3 * stride);
        let mask: Vec<bool> = (0..nx).map(|i| fine_mask[i * stride]).collect();
        masked += mask.iter().filter(|m| !**m).count();
        total += nx;
        let rep = compare_fields_masked(&coarse, &sampled, Some(&mask))?;
        rows.push((nx, rep.sup, rep.l1));
    }
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[0].2 / w[1].2).collect();
    let orders = ratios.iter().map(|r| r.log2()).collect();
    Ok(ConvergenceStudy {
        nx_ref,
        t,
        rows,
        ratios,
        orders,
        masked_fraction: masked as f64 / total.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HamiltonianModel;

    #[test]
    fn free_zero_is_exact() {
        let f = solve_lf(&HamiltonianModel::free(), &InitialData::constant(0.0), &LFConfig::new(64, vec![0.5, 1.0])).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
        assert_eq!(f.provenance, Provenance::LaxFriedrichs);
    }

    #[test]
    fn discount_decay() {
        let m = HamiltonianModel::discounted(1.0).without_potential();
        let f = solve_lf(&m, &InitialData::constant(1.0), &LFConfig::new(400, vec![1.0])).unwrap();
        let e = (-1.0f64).exp();
        assert!(f.values.iter().all(|v| (v - e).abs() <= 5e-3));
    }

    #[test]
    fn alpha_too_small_is_reported() {
        let phi = InitialData::sine(1.0, 1.0, 0.0);
        let r = solve_lf(&HamiltonianModel::free(), &phi, &LFConfig::new(64, vec![0.1]).with_alpha(1.0));
        assert!(matches!(r, Err(Error::CflViolation { .. })), "{r:?}");
    }

    #[test]
    fn discrete_comparison_on_discounted() {
        let m = HamiltonianModel::discounted(1.0);
        let cfg = LFConfig::new(128, vec![0.25, 0.5]).with_alpha(12.0);
        let lo = solve_lf(&m, &InitialData::sine(1.0, 1.0, 0.0), &cfg).unwrap();
        let hi = solve_lf(&m, &InitialData::sine(1.0, 1.0, 0.3), &cfg).unwrap();
        assert!(lo.values.iter().zip(&hi.values).all(|(a, b)| *a <= b + 1e-12));
    }

    #[test]
    fn hopf_lax_examples() {
        assert_eq!(hopf_lax_exact(&InitialData::constant(2.5), 0.3, 0.7, 101, 2), 2.5);
        let phi = InitialData::cosine(1.0, 1.0, 0.0);
        // the quadratic penalty at t = 100 still costs 1/(8t) = 1.25e-3
        let v = hopf_lax_exact(&phi, 0.0, 100.0, 1001, 2);
        assert!(v > -1.0 && v < -1.0 + 1.25e-3 && (v + 1.0 - 1.25e-3).abs() < 1e-6, "{v}");
        assert!((hopf_lax_exact(&phi, 0.0, 1000.0, 1001, 2) + 1.0).abs() < 1e-3);
        let a = hopf_lax_exact(&phi, 0.0, 0.5, 4001, 2);
        let b = hopf_lax_exact(&phi, 0.0, 0.5, 8002, 2);
        assert!((a - b).abs() <= 1e-9, "{a} {b}");
    }

    #[test]
    fn compare_identical_and_mismatched() {
        let g = GridSpec::new(16, vec![0.5]).unwrap();
        let phi = InitialData::cosine(1.0, 1.0, 0.0);
        let f = hopf_lax_field(&phi, &g, 401, 1).unwrap();
        let r = compare_fields(&f, &f).unwrap();
        assert_eq!((r.sup, r.l1), (0.0, 0.0));
        let g2 = GridSpec::new(32, vec![0.5]).unwrap();
        let f2 = hopf_lax_field(&phi, &g2, 401, 1).unwrap();
        assert!(matches!(compare_fields(&f, &f2), Err(Error::GridMismatch(_))));
    }
}
