use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::simpson;

use super::Hamiltonian;

/// Minimum accepted second difference of `H` in `p`.
pub const CURVATURE_THRESHOLD: f64 = 1e-8;
pub const PERIODICITY_THRESHOLD: f64 = 1e-9;
/// Relative central-difference mismatch allowed at step `1e-5`.
pub const DERIVATIVE_THRESHOLD: f64 = 1e-5;
/// Osgood margins may dip this far below zero.
pub const OSGOOD_MARGIN_FLOOR: f64 = -1e-9;

/// `x` ranges over the whole circle; `u` and `p` over the given intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompactBox {
    pub u_min: f64,
    pub u_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl CompactBox {
    pub fn new(u_min: f64, u_max: f64, p_min: f64, p_max: f64) -> Self {
        CompactBox { u_min, u_max, p_min, p_max }
    }

    pub fn symmetric(u: f64, p: f64) -> Self {
        CompactBox::new(-u, u, -p, p)
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn x_lattice(period: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n.max(1)).map(move |i| period * i as f64 / n.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub model: String,
    /// Smallest `(H(p+h) - 2H(p) + H(p-h)) / h^2` on the sample lattice.
    pub min_curvature: f64,
    /// `min_{x,u} H / |p|` at `p = P, 2P, 4P, ...` beyond the box edge.
    pub superlinearity_ratios: Vec<f64>,
    pub superlinear_increasing: bool,
    pub periodicity_residual: f64,
    pub derivative_residual: f64,
    pub curvature_ok: bool,
    pub periodicity_ok: bool,
    pub derivatives_ok: bool,
    pub pass: bool,
}

/// Samples strict convexity, superlinearity, periodicity and derivative
/// consistency on a fixed lattice of `samples` points per axis.
pub fn check_assumptions<M: Hamiltonian + ?Sized>(
    model: &M,
    bx: &CompactBox,
    samples: usize,
) -> AssumptionReport {
    let period = model.period();
    let step = 1e-3;
    let fd = 1e-5;
    let mut min_curvature = f64::INFINITY;
    let mut periodicity_residual = 0.0f64;
    let mut derivative_residual = 0.0f64;

    for x in x_lattice(period, samples) {
        for u in lattice(bx.u_min, bx.u_max, samples) {
            for p in lattice(bx.p_min, bx.p_max, samples) {
                let h = model.value(x, u, p);
                let second = (model.value(x, u, p + step) - 2.0 * h + model.value(x, u, p - step))
                    / (step * step);
                min_curvature = min_curvature.min(second);

                periodicity_residual =
                    periodicity_residual.max((model.value(x + period, u, p) - h).abs());

                let d = model.partials(x, u, p);
                let num = [
                    (model.value(x + fd, u, p) - model.value(x - fd, u, p)) / (2.0 * fd),
                    (model.value(x, u + fd, p) - model.value(x, u - fd, p)) / (2.0 * fd),
                    (model.value(x, u, p + fd) - model.value(x, u, p - fd)) / (2.0 * fd),
                ];
                for (a, b) in [d.hx, d.hu, d.hp].into_iter().zip(num) {
                    derivative_residual =
                        derivative_residual.max((a - b).abs() / a.abs().max(1.0));
                }
            }
        }
    }

    let edge = bx.p_min.abs().max(bx.p_max.abs()).max(1.0);
    let superlinearity_ratios: Vec<f64> = (0..7)
        .map(|j| {
            let p = edge * f64::powi(2.0, j);
            let mut worst = f64::INFINITY;
            for x in x_lattice(period, samples) {
                for u in lattice(bx.u_min, bx.u_max, samples) {
                    worst = worst.min(model.value(x, u, p) / p).min(model.value(x, u, -p) / p);
                }
            }
            worst
        })
        .collect();
    let superlinear_increasing = superlinearity_ratios.windows(2).all(|w| w[1] > w[0]);

    let curvature_ok = min_curvature >= CURVATURE_THRESHOLD;
    let periodicity_ok = periodicity_residual <= PERIODICITY_THRESHOLD;
    let derivatives_ok = derivative_residual <= DERIVATIVE_THRESHOLD;
    AssumptionReport {
        model: model.name(),
        min_curvature,
        superlinearity_ratios,
        superlinear_increasing,
        periodicity_residual,
        derivative_residual,
        curvature_ok,
        periodicity_ok,
        derivatives_ok,
        pass: curvature_ok && periodicity_ok && derivatives_ok && superlinear_increasing,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OsgoodReport {
    pub model: String,
    /// `min (H(x,u,p) - H_p p + f_K(u))` over the sampled box, `u` in `[0, u_max]`.
    pub worst_margin: f64,
    pub worst_at: (f64, f64, f64),
    /// `(U, int_0^U du / f_K(u))` for `U` in `{10, 1e2, 1e3, 1e4}`.
    pub probe_integrals: Vec<(f64, f64)>,
    pub divergence_note: String,
    pub pass: bool,
}

/// Checks `H(x, |u|, p) >= H_p p - f_K(|u|)` pointwise and tabulates the
/// Osgood probe integral as divergence evidence.
pub fn osgood_pointwise_check<M: Hamiltonian + ?Sized>(
    model: &M,
    bx: &CompactBox,
    u_max: f64,
    samples: usize,
) -> Result<OsgoodReport> {
    let env = model
        .osgood_envelope()
        .ok_or_else(|| Error::MissingEnvelope(model.name()))?;
    if bx.p_min < -env.p_max || bx.p_max > env.p_max {
        return Err(Error::InvalidInput(format!(
            "box p-range [{}, {}] exceeds the envelope range [-{p}, {p}]",
            bx.p_min,
            bx.p_max,
            p = env.p_max
        )));
    }
    let mut worst_margin = f64::INFINITY;
    let mut worst_at = (0.0, 0.0, 0.0);
    for x in x_lattice(model.period(), samples) {
        for u in lattice(0.0, u_max, samples) {
            let f = env.eval(u);
            for p in lattice(bx.p_min, bx.p_max, samples) {
                let hp = model.partials(x, u, p).hp;
                let margin = model.value(x, u, p) - (hp * p - f);
                if margin < worst_margin {
                    worst_margin = margin;
                    worst_at = (x, u, p);
                }
            }
        }
    }
    let probe_integrals = [10.0, 1e2, 1e3, 1e4]
        .into_iter()
        .map(|big_u| (big_u, probe_integral(|u| env.eval(u), big_u)))
        .collect();
    Ok(OsgoodReport {
        model: model.name(),
        worst_margin,
        worst_at,
        probe_integrals,
        divergence_note: env.divergence_note().to_string(),
        pass: worst_margin >= OSGOOD_MARGIN_FLOOR,
    })
}

/// `int_0^U du / f(u)`, Simpson on decades `[0,1], [1,10], ...`.
fn probe_integral<F: Fn(f64) -> f64>(f: F, big_u: f64) -> f64 {
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = 1.0f64.min(big_u);
    while a < big_u {
        total += simpson(|u| 1.0 / f(u), a, b, 2000);
        a = b;
        b = (b * 10.0).min(big_u);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{EnvelopeGrowth, HamiltonianModel, OsgoodEnvelope, Partials};

    #[test]
    fn free_passes_with_unit_curvature() {
        let r = check_assumptions(&HamiltonianModel::free(), &CompactBox::symmetric(5.0, 10.0), 9);
        assert!(r.pass, "{r:?}");
        assert!((r.min_curvature - 1.0).abs() < 1e-6);
    }

    struct AbsP;
    impl Hamiltonian for AbsP {
        fn name(&self) -> String {
            "abs".into()
        }
        fn value(&self, _x: f64, _u: f64, p: f64) -> f64 {
            p.abs()
        }
        fn partials(&self, _x: f64, _u: f64, p: f64) -> Partials {
            Partials { hx: 0.0, hu: 0.0, hp: p.signum() }
        }
    }

    #[test]
    fn abs_p_fails_curvature() {
        let r = check_assumptions(&AbsP, &CompactBox::symmetric(1.0, 2.0), 8);
        assert!(!r.curvature_ok);
        assert!(!r.superlinear_increasing);
        assert!(!r.pass);
    }

    #[test]
    fn discounted_passes() {
        let r = check_assumptions(
            &HamiltonianModel::discounted(1.0),
            &CompactBox::symmetric(5.0, 10.0),
            11,
        );
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn report_is_deterministic() {
        let m = HamiltonianModel::osgood();
        let b = CompactBox::symmetric(3.0, 4.0);
        assert_eq!(check_assumptions(&m, &b, 7), check_assumptions(&m, &b, 7));
    }

    #[test]
    fn affine_envelope_on_pure_discount() {
        let m = HamiltonianModel::discounted(1.0)
            .without_potential()
            .with_envelope(OsgoodEnvelope {
                c_k: 2.0,
                growth: EnvelopeGrowth::Affine { slope: 1.0 },
                p_max: 2.0,
            });
        let r = osgood_pointwise_check(&m, &CompactBox::symmetric(0.0, 2.0), 10.0, 21).unwrap();
        // margin = 2 + 2u - p^2/2, smallest at u = 0, |p| = 2
        assert!((r.worst_margin - 0.0).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn constant_envelope_for_free() {
        let m = HamiltonianModel::free().with_envelope(OsgoodEnvelope {
            c_k: 2.0,
            growth: EnvelopeGrowth::Constant,
            p_max: 2.0,
        });
        let r = osgood_pointwise_check(&m, &CompactBox::symmetric(0.0, 2.0), 5.0, 11).unwrap();
        assert!(r.pass);
        assert!((r.probe_integrals[0].1 - 5.0).abs() < 1e-10);
    }

    #[test]
    fn osgood_envelope_probe_grows_slowly() {
        let m = HamiltonianModel::osgood();
        let r = osgood_pointwise_check(&m, &CompactBox::symmetric(0.0, 10.0), 20.0, 15).unwrap();
        assert!(r.pass, "{r:?}");
        let vals: Vec<f64> = r.probe_integrals.iter().map(|&(_, v)| v).collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]));
        // increments shrink: log-log growth
        assert!(vals[3] - vals[2] < vals[2] - vals[1]);
    }

    #[test]
    fn missing_envelope() {
        let r = osgood_pointwise_check(&AbsP, &CompactBox::symmetric(0.0, 1.0), 1.0, 3);
        assert!(matches!(r, Err(Error::MissingEnvelope(_))));
    }
}
