use crate::error::Result;

use super::{Hamiltonian, HamiltonianModel, OsgoodEnvelope, Partials};

/// Quintic smoothstep cutoff: 1 on `|u| <= r`, 0 on `|u| >= r + 1`, `C^2`,
/// with `max |rho'| = 15/8` attained at `|u| = r + 1/2`.
pub fn truncation_cutoff(r: f64, u: f64) -> f64 {
    let s = u.abs() - r;
    if s <= 0.0 {
        1.0
    } else if s >= 1.0 {
        0.0
    } else {
        1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

pub fn truncation_cutoff_derivative(r: f64, u: f64) -> f64 {
    let s = u.abs() - r;
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        let t = s * (1.0 - s);
        -30.0 * t * t * u.signum()
    }
}

/// `H_R(x, u, p) = H(x, 0, p) + rho_R(u) (H(x, u, p) - H(x, 0, p))`.
///
/// Agrees bit-for-bit with the base model on `|u| <= R` and with
/// `H(x, 0, p)` on `|u| >= R + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedModel {
    pub base: HamiltonianModel,
    pub r: f64,
}

pub fn truncate_model(model: &HamiltonianModel, r: f64) -> TruncatedModel {
    assert!(r > 0.0, "truncation radius must be positive");
    TruncatedModel { base: *model, r }
}

impl TruncatedModel {
    pub fn rho(&self, u: f64) -> f64 {
        truncation_cutoff(self.r, u)
    }
}

impl Hamiltonian for TruncatedModel {
    fn name(&self) -> String {
        format!("{}@R={}", self.base.name(), self.r)
    }

    fn period(&self) -> f64 {
        self.base.period()
    }

    fn value(&self, x: f64, u: f64, p: f64) -> f64 {
        let s = u.abs() - self.r;
        if s <= 0.0 {
            self.base.value(x, u, p)
        } else if s >= 1.0 {
            self.base.value(x, 0.0, p)
        } else {
            let h0 = self.base.value(x, 0.0, p);
            h0 + self.rho(u) * (self.base.value(x, u, p) - h0)
        }
    }

    fn partials(&self, x: f64, u: f64, p: f64) -> Partials {
        let s = u.abs() - self.r;
        if s <= 0.0 {
            return self.base.partials(x, u, p);
        }
        let d0 = self.base.partials(x, 0.0, p);
        if s >= 1.0 {
            return Partials { hu: 0.0, ..d0 };
        }
        let d = self.base.partials(x, u, p);
        let rho = self.rho(u);
        let v = self.base.value(x, u, p) - self.base.value(x, 0.0, p);
        Partials {
            hx: d0.hx + rho * (d.hx - d0.hx),
            hu: truncation_cutoff_derivative(self.r, u) * v + rho * d.hu,
            hp: d0.hp + rho * (d.hp - d0.hp),
        }
    }

    fn curvature(&self, x: f64, u: f64, p: f64) -> f64 {
        let rho = self.rho(u);
        let c0 = self.base.curvature(x, 0.0, p);
        c0 + rho * (self.base.curvature(x, u, p) - c0)
    }

    fn lagrangian(&self, x: f64, u: f64, v: f64) -> Result<f64> {
        if u.abs() <= self.r {
            self.base.lagrangian(x, u, v)
        } else {
            super::legendre_transform(self, x, u, v).map(|lp| lp.value)
        }
    }

    fn osgood_envelope(&self) -> Option<OsgoodEnvelope> {
        self.base.osgood_envelope()
    }

    // U' >= -|a| - rho(U) c(U), and |c| on |u| <= R + 1 peaks at an end
    fn value_lower_bound(&self, u: f64, dt: f64) -> f64 {
        let edge = self.r + 1.0;
        let c_max = self.base.u_term(edge).0.abs().max(self.base.u_term(-edge).0.abs());
        u - (self.base.potential.abs() + c_max) * dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_bound_holds_along_flows() {
        use crate::charflow::{flow, PhasePoint};
        for base in [HamiltonianModel::osgood(), HamiltonianModel::discounted(1.0), HamiltonianModel::antidiscounted(2.0)] {
            let m = truncate_model(&base, 2.0);
            for (u0, p0) in [(-3.5, 0.0), (0.5, 1.0), (3.2, -2.0), (-1.0, 0.3)] {
                let tr = flow(&m, PhasePoint::new(0.1, u0, p0), 1.0, 1e-10).unwrap();
                for (t, s) in tr.times.iter().zip(&tr.states) {
                    assert!(m.value_lower_bound(u0, *t) <= s.u + 1e-9);
                }
            }
        }
    }

    #[test]
    fn cutoff_plateaus_and_midpoint() {
        assert_eq!(truncation_cutoff(5.0, 3.0), 1.0);
        assert_eq!(truncation_cutoff(5.0, -5.0), 1.0);
        assert_eq!(truncation_cutoff(5.0, 7.0), 0.0);
        assert_eq!(truncation_cutoff(5.0, -6.0), 0.0);
        assert!((truncation_cutoff(5.0, 5.5) - 0.5).abs() < 1e-15);
        assert!((truncation_cutoff(5.0, -5.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cutoff_slope_bound() {
        let mut max = 0.0f64;
        for i in 0..=10_000 {
            let u = 5.0 + i as f64 / 10_000.0;
            max = max.max(truncation_cutoff_derivative(5.0, u).abs());
        }
        assert!((max - 15.0 / 8.0).abs() < 1e-12);
        assert!(max < 2.0);
    }

    #[test]
    fn cutoff_derivative_matches_fd() {
        for &u in &[5.1, 5.37, 5.8, -5.3] {
            let h = 1e-6;
            let fd = (truncation_cutoff(5.0, u + h) - truncation_cutoff(5.0, u - h)) / (2.0 * h);
            assert!((fd - truncation_cutoff_derivative(5.0, u)).abs() < 1e-8);
        }
    }

    #[test]
    fn discounted_plateaus() {
        let m = HamiltonianModel::discounted(1.0);
        let t = truncate_model(&m, 5.0);
        assert_eq!(t.value(0.0, 3.0, 1.0), m.value(0.0, 3.0, 1.0));
        assert_eq!(t.value(0.0, 7.0, 1.0), m.value(0.0, 0.0, 1.0));
        let mid = t.value(0.0, 5.5, 1.0);
        let expect = m.value(0.0, 0.0, 1.0) + 0.5 * (m.value(0.0, 5.5, 1.0) - m.value(0.0, 0.0, 1.0));
        assert!((mid - expect).abs() < 1e-14);
        assert!(mid > m.value(0.0, 0.0, 1.0) && mid < m.value(0.0, 5.5, 1.0));
    }

    #[test]
    fn partials_match_finite_differences_in_transition() {
        let t = truncate_model(&HamiltonianModel::osgood(), 2.0);
        for &(x, u, p) in &[(0.2, 2.3, 0.4), (0.7, -2.6, -1.0)] {
            let d = t.partials(x, u, p);
            let h = 1e-6;
            let hu = (t.value(x, u + h, p) - t.value(x, u - h, p)) / (2.0 * h);
            let hx = (t.value(x + h, u, p) - t.value(x - h, u, p)) / (2.0 * h);
            assert!((d.hu - hu).abs() < 1e-6);
            assert!((d.hx - hx).abs() < 1e-6);
        }
    }
}
