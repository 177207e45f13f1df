//! The structural property suite: each check reduces a family of runs to
//! one number compared against a fixed threshold.

use serde::{Deserialize, Serialize};

use super::{random_triangle_queries, sensitivity_study, triangle_check, Knob};
use crate::charflow::{flow_roundtrip_error, flow_with_outputs, PhasePoint};
use crate::error::Result;
use crate::field::{solve_forward_flood, GridSpec, InitialData, SeedSpec, ViaShootingConfig};
use crate::fundamental::{fundamental_solution, interior_consistency, verify_calibration, ShootingConfig};
use crate::models::{hamiltonian_from_lagrangian, osgood_pointwise_check, CompactBox, Hamiltonian, HamiltonianModel, ModelKind};
use crate::oracle::compare_fields;

/// Seed of the random triangle triples.
pub const TRIANGLE_SEED: u64 = 20_240_611;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `value <= threshold`.
    AtMost,
    /// Passes when `value >= threshold`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl PropertyCheck {
    pub fn new(name: &str, value: f64, bound: Bound, threshold: f64) -> Self {
        let pass = match bound {
            Bound::AtMost => value <= threshold,
            Bound::AtLeast => value >= threshold,
        };
        PropertyCheck { name: name.to_string(), value, threshold, bound, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
    pub pass: bool,
}

fn catalog() -> Vec<HamiltonianModel> {
    ModelKind::ALL.into_iter().map(HamiltonianModel::new).collect()
}

/// Queries shared by the fundamental-solution checks, from `(0, 0.5)`.
const H_QUERIES: [(f64, f64); 3] = [(0.25, 0.5), (0.5, 1.0), (0.9, 0.3)];
const H_START: (f64, f64) = (0.0, 0.5);

/// Largest `|H - (L)^*|` over a lattice, for every catalog model.
pub fn legendre_involution() -> Result<f64> {
    let mut worst = 0.0f64;
    for m in catalog() {
        for x in [0.1, 0.37, 0.8] {
            for u in [-1.5, 0.0, 2.0] {
                for p in [-3.0, -0.5, 0.0, 1.2, 4.0] {
                    let h = hamiltonian_from_lagrangian(&m, x, u, p)?;
                    worst = worst.max((h - m.value(x, u, p)).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Largest drift of `H` along flows of the `u`-independent models over
/// `[0, 2]`.
pub fn energy_drift() -> Result<f64> {
    let outputs: Vec<f64> = (1..=200).map(|k| k as f64 * 0.01).collect();
    let mut worst = 0.0f64;
    for m in [HamiltonianModel::free(), HamiltonianModel::mechanical()] {
        for start in [PhasePoint::new(0.0, 0.0, 0.3), PhasePoint::new(0.2, 1.0, -1.5), PhasePoint::new(0.7, 0.0, 2.5)] {
            let tr = flow_with_outputs(&m, start, 2.0, 1e-10, &outputs)?;
            let e0 = m.value(start.x, start.u, start.p);
            for s in &tr.states {
                worst = worst.max((m.value(s.x, s.u, s.p) - e0).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest forward-backward roundtrip error over the catalog.
pub fn flow_roundtrip() -> Result<f64> {
    let mut worst = 0.0f64;
    for m in catalog() {
        for (start, t) in [(PhasePoint::new(0.0, 0.5, 0.2), 1.0), (PhasePoint::new(0.1, -0.3, 1.0), 1.0), (PhasePoint::new(0.0, 0.0, 0.3), 2.0)] {
            worst = worst.max(flow_roundtrip_error(&m, start, t, 1e-10)?);
        }
    }
    Ok(worst)
}

/// Worst calibration defect and worst interior consistency over the
/// catalog minimizers.
pub fn calibration() -> Result<(f64, f64)> {
    let cfg = ShootingConfig::default();
    let (mut defect, mut interior) = (0.0f64, 0.0f64);
    for m in catalog() {
        for &(x, t) in &H_QUERIES {
            let fv = fundamental_solution(&m, H_START.0, H_START.1, x, t, &cfg)?;
            defect = defect.max(verify_calibration(&m, &fv)?);
            interior = interior.max(interior_consistency(&m, &fv, &cfg)?);
        }
    }
    Ok((defect, interior))
}

/// Worst `|h_{x0,u0+c} - h_{x0,u0} - c|` on the `u`-independent models.
pub fn additive_shift() -> Result<f64> {
    let cfg = ShootingConfig { retain_trajectory: false, ..Default::default() };
    let mut worst = 0.0f64;
    for m in [HamiltonianModel::free(), HamiltonianModel::mechanical()] {
        for &(x, t) in &H_QUERIES {
            let base = fundamental_solution(&m, H_START.0, 0.0, x, t, &cfg)?.value;
            for c in [-1.0, 0.5, 3.0] {
                let shifted = fundamental_solution(&m, H_START.0, c, x, t, &cfg)?.value;
                worst = worst.max((shifted - base - c).abs());
            }
        }
    }
    Ok(worst)
}

/// Largest change of `h` over the catalog when `cfg` replaces the defaults.
pub fn fundamental_drift(cfg: &ShootingConfig) -> Result<f64> {
    let base = ShootingConfig { retain_trajectory: false, ..Default::default() };
    let cfg = ShootingConfig { retain_trajectory: false, ..cfg.clone() };
    let mut worst = 0.0f64;
    for m in catalog() {
        for &(x, t) in &H_QUERIES {
            let a = fundamental_solution(&m, H_START.0, H_START.1, x, t, &base)?.value;
            let b = fundamental_solution(&m, H_START.0, H_START.1, x, t, &cfg)?.value;
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Worst triangle slack on random triples for the mechanical model.
pub fn triangle_slack(n: usize) -> Result<f64> {
    let q = random_triangle_queries(n, TRIANGLE_SEED, (0.2, 0.6));
    let cfg = ShootingConfig { retain_trajectory: false, ..Default::default() };
    Ok(triangle_check(&HamiltonianModel::mechanical(), &q, &cfg)?.worst_slack)
}

/// `max(u1 - u2)` for ordered initial data on the discounted model.
pub fn comparison_violation(nx: usize, seeds: &SeedSpec) -> Result<f64> {
    let m = HamiltonianModel::discounted(1.0);
    let grid = GridSpec::new(nx, vec![0.25, 0.5, 1.0])?;
    let lo = solve_forward_flood(&m, &InitialData::cosine(0.5, 1.0, 0.0), &grid, seeds)?;
    let hi = solve_forward_flood(&m, &InitialData::constant(0.5), &grid, seeds)?;
    Ok(lo.values.iter().zip(&hi.values).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest Osgood margin over the catalog on the declared box.
pub fn osgood_margin() -> Result<f64> {
    let mut worst = f64::INFINITY;
    for m in catalog() {
        let r = osgood_pointwise_check(&m, &CompactBox::symmetric(5.0, 10.0), 20.0, 21)?;
        worst = worst.min(r.worst_margin);
    }
    Ok(worst)
}

/// `sup |u(., t) - phi|` at `t = 0.01` over the catalog, for data with
/// Lipschitz constant `0.4 pi`.
pub fn attachment_gap() -> Result<f64> {
    let phi = InitialData::cosine(0.2, 1.0, 0.0);
    let grid = GridSpec::new(64, vec![0.01])?;
    let seeds = SeedSpec { ny: 128, np: 129, ..Default::default() };
    let mut worst = 0.0f64;
    for m in catalog() {
        let f = solve_forward_flood(&m, &phi, &grid, &seeds)?;
        for (x, u) in f.x_nodes.iter().zip(f.column(0)) {
            worst = worst.max((u - phi.eval(*x)).abs());
        }
    }
    Ok(worst)
}

/// Sup change of the flooded field when `ny` and `np` are doubled.
pub fn seed_drift<M: Hamiltonian + ?Sized>(model: &M, phi: &InitialData, grid: &GridSpec, seeds: &SeedSpec) -> Result<f64> {
    let coarse = solve_forward_flood(model, phi, grid, seeds)?;
    let doubled = SeedSpec { ny: 2 * seeds.ny, np: 2 * seeds.np - 1, ..seeds.clone() };
    let fine = solve_forward_flood(model, phi, grid, &doubled)?;
    Ok(compare_fields(&coarse, &fine)?.sup)
}

/// Runs every check.
pub fn property_suite() -> Result<PropertyReport> {
    use Bound::*;
    let mut checks = Vec::new();
    checks.push(PropertyCheck::new("legendre_involution", legendre_involution()?, AtMost, 1e-8));
    checks.push(PropertyCheck::new("energy_conservation", energy_drift()?, AtMost, 1e-7));
    checks.push(PropertyCheck::new("flow_roundtrip", flow_roundtrip()?, AtMost, 1e-7));
    let (defect, interior) = calibration()?;
    checks.push(PropertyCheck::new("calibration_defect", defect, AtMost, 1e-6));
    checks.push(PropertyCheck::new("interior_consistency", interior, AtMost, 1e-5));
    checks.push(PropertyCheck::new("additive_shift", additive_shift()?, AtMost, 1e-8));
    checks.push(PropertyCheck::new("triangle_slack", triangle_slack(50)?, AtLeast, -1e-6));
    let seeds = SeedSpec { ny: 200, np: 201, ..Default::default() };
    checks.push(PropertyCheck::new("comparison_monotonicity", comparison_violation(64, &seeds)?, AtMost, 1e-6));
    checks.push(PropertyCheck::new("osgood_margin", osgood_margin()?, AtLeast, -1e-9));
    checks.push(PropertyCheck::new("initial_attachment", attachment_gap()?, AtMost, 0.05));

    let winding = ShootingConfig { k_max: 3, ..Default::default() };
    checks.push(PropertyCheck::new("winding_saturation", fundamental_drift(&winding)?, AtMost, 1e-10));
    let scan = ShootingConfig { n_p: 1601, p_max: 16.0, ..Default::default() };
    checks.push(PropertyCheck::new("scan_saturation", fundamental_drift(&scan)?, AtMost, 1e-8));

    let via = ViaShootingConfig::default();
    let cos = InitialData::cosine(1.0, 1.0, 0.0);
    let sin = InitialData::sine(1.0, 1.0, 0.0);
    let queries = [(0.1, 0.5), (0.6, 0.25), (0.35, 1.0)];
    let tol = sensitivity_study(&HamiltonianModel::free(), &cos, &queries, Knob::IntegratorTol, &[1e-6, 1e-8, 1e-10], &via)?;
    checks.push(PropertyCheck::new("tolerance_sensitivity", tol.drift, AtMost, 1e-6));
    let np = sensitivity_study(&HamiltonianModel::discounted(1.0), &sin, &queries, Knob::NP, &[201.0, 401.0, 801.0], &via)?;
    checks.push(PropertyCheck::new("scan_sensitivity", np.drift, AtMost, 1e-8));
    let k = sensitivity_study(&HamiltonianModel::mechanical(), &cos, &queries, Knob::KMax, &[1.0, 2.0, 3.0], &via)?;
    checks.push(PropertyCheck::new("winding_sensitivity", k.tail_drift, AtMost, 1e-10));

    let acceptance_seeds = SeedSpec::default();
    let free_grid = GridSpec::new(200, vec![0.1, 0.5, 1.0])?;
    let free_drift = seed_drift(&HamiltonianModel::free(), &cos, &free_grid, &acceptance_seeds)?;
    let disc_grid = GridSpec::new(200, vec![0.5])?;
    let disc_drift = seed_drift(&HamiltonianModel::discounted(1.0), &sin, &disc_grid, &acceptance_seeds)?;
    checks.push(PropertyCheck::new("seed_saturation", free_drift.max(disc_drift), AtMost, 1e-3));

    let pass = checks.iter().all(|c| c.pass);
    Ok(PropertyReport { checks, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_direction() {
        assert!(PropertyCheck::new("a", 1.0, Bound::AtMost, 1.0).pass);
        assert!(!PropertyCheck::new("a", 1.1, Bound::AtMost, 1.0).pass);
        assert!(PropertyCheck::new("a", -1e-7, Bound::AtLeast, -1e-6).pass);
        assert!(!PropertyCheck::new("a", f64::NAN, Bound::AtLeast, -1e-6).pass);
    }

    #[test]
    fn cheap_checks_hold() {
        assert!(energy_drift().unwrap() <= 1e-7);
        assert!(flow_roundtrip().unwrap() <= 1e-7);
        assert!(additive_shift().unwrap() <= 1e-8);
        assert!(osgood_margin().unwrap() >= -1e-9);
    }

    #[test]
    fn ordered_data_stay_ordered() {
        let seeds = SeedSpec { ny: 64, np: 65, ..Default::default() };
        assert!(comparison_violation(32, &seeds).unwrap() <= 1e-6);
    }
}
