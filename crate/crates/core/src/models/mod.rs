//! Hamiltonian catalog on the circle `R / Z`.
//!
//! Every catalog model has the form
//!
//! ```text
//! H(x, u, p) = p^2/2 + a cos(2 pi x) + c(u)
//! ```
//!
//! with `c(0) = 0`; the kind fixes `c` and `a` is the potential amplitude
//! (set it to zero for the "V = 0" variants). The flows of all of them are
//! complete.

mod assumptions;
mod legendre;
mod truncation;

pub use assumptions::{
    check_assumptions, osgood_pointwise_check, AssumptionReport, CompactBox, OsgoodReport,
};
pub use legendre::{hamiltonian_from_lagrangian, legendre_transform, LegendrePoint};
pub use truncation::{truncate_model, truncation_cutoff, truncation_cutoff_derivative, TruncatedModel};

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// First partial derivatives of a Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub hx: f64,
    pub hu: f64,
    pub hp: f64,
}

/// A `C^2` Hamiltonian on `T*S^1 x R`, strictly convex and superlinear in `p`.
pub trait Hamiltonian: Send + Sync {
    fn name(&self) -> String;

    /// Circumference of the base circle.
    fn period(&self) -> f64 {
        1.0
    }

    fn value(&self, x: f64, u: f64, p: f64) -> f64;

    fn partials(&self, x: f64, u: f64, p: f64) -> Partials;

    /// `d^2 H / dp^2`, by central differences of `H_p` unless overridden.
    fn curvature(&self, x: f64, u: f64, p: f64) -> f64 {
        let h = 1e-5 * (1.0 + p.abs());
        (self.partials(x, u, p + h).hp - self.partials(x, u, p - h).hp) / (2.0 * h)
    }

    /// The dual Lagrangian `L(x, u, v) = sup_p { v p - H(x, u, p) }`.
    fn lagrangian(&self, x: f64, u: f64, v: f64) -> Result<f64> {
        legendre_transform(self, x, u, v).map(|lp| lp.value)
    }

    fn osgood_envelope(&self) -> Option<OsgoodEnvelope> {
        None
    }

    /// A lower bound for `U(s + dt)` valid for every characteristic with
    /// `U(s) = u`, whatever `X` and `P` are. Used to abandon characteristics
    /// that provably cannot attain a minimum; `-inf` disables that.
    fn value_lower_bound(&self, _u: f64, _dt: f64) -> f64 {
        f64::NEG_INFINITY
    }
}

/// The `u`-dependence of a catalog Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `c(u) = 0`, zero potential.
    Free,
    /// `c(u) = 0`.
    Mechanical,
    /// `c(u) = lambda u`; nondecreasing in `u` (proper).
    Discounted,
    /// `c(u) = -lambda u`; not proper.
    Antidiscounted,
    /// `c(u) = -u log(1 + u^2)`; Osgood but not Lipschitz in `u`.
    Osgood,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Free,
        ModelKind::Mechanical,
        ModelKind::Discounted,
        ModelKind::Antidiscounted,
        ModelKind::Osgood,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Free => "free",
            ModelKind::Mechanical => "mechanical",
            ModelKind::Discounted => "discounted",
            ModelKind::Antidiscounted => "antidiscounted",
            ModelKind::Osgood => "osgood",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            ModelKind::Free => "H = p^2/2",
            ModelKind::Mechanical => "H = p^2/2 + a cos(2 pi x)",
            ModelKind::Discounted => "H = p^2/2 + a cos(2 pi x) + lambda u",
            ModelKind::Antidiscounted => "H = p^2/2 + a cos(2 pi x) - lambda u",
            ModelKind::Osgood => "H = p^2/2 + a cos(2 pi x) - u log(1 + u^2)",
        }
    }

    /// Whether `H` depends on `u` at all.
    pub fn is_u_dependent(self) -> bool {
        !matches!(self, ModelKind::Free | ModelKind::Mechanical)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model `{s}`")))
    }
}

/// Growth term of an Osgood envelope `f_K(u) = c_k + g(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeGrowth {
    /// `g = 0`: `int du / f_K = U / c_k`, divergent.
    Constant,
    /// `g = slope u`: `int du / f_K = log(1 + slope U / c_k) / slope`, divergent.
    Affine { slope: f64 },
    /// `g = u log(1 + u^2)`: behaves like `(1/2) log log U`, divergent.
    LogOsgood,
}

/// A declared Osgood envelope valid for `x` on the whole circle and
/// `|p| <= p_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OsgoodEnvelope {
    pub c_k: f64,
    pub growth: EnvelopeGrowth,
    pub p_max: f64,
}

impl OsgoodEnvelope {
    pub fn eval(&self, u: f64) -> f64 {
        let g = match self.growth {
            EnvelopeGrowth::Constant => 0.0,
            EnvelopeGrowth::Affine { slope } => slope * u,
            EnvelopeGrowth::LogOsgood => u * (1.0 + u * u).ln(),
        };
        self.c_k + g
    }

    /// Analytic reason the integral of `1 / f_K` diverges.
    pub fn divergence_note(&self) -> &'static str {
        match self.growth {
            EnvelopeGrowth::Constant => "f_K constant: integral grows linearly in U",
            EnvelopeGrowth::Affine { .. } => "f_K affine: integral grows like log U",
            EnvelopeGrowth::LogOsgood => "f_K = C + u log(1+u^2): integral grows like (1/2) log log U",
        }
    }
}

/// A catalog Hamiltonian with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianModel {
    pub kind: ModelKind,
    /// Coefficient of `u` for the (anti)discounted kinds.
    pub lambda: f64,
    /// Amplitude `a` of the potential `a cos(2 pi x)`.
    pub potential: f64,
    /// `p`-range of the declared Osgood envelope.
    pub envelope_p_max: f64,
    envelope_override: Option<OsgoodEnvelope>,
}

impl HamiltonianModel {
    pub fn new(kind: ModelKind) -> Self {
        let potential = match kind {
            ModelKind::Free => 0.0,
            _ => 1.0,
        };
        HamiltonianModel {
            kind,
            lambda: 1.0,
            potential,
            envelope_p_max: 10.0,
            envelope_override: None,
        }
    }

    pub fn free() -> Self {
        Self::new(ModelKind::Free)
    }
    pub fn mechanical() -> Self {
        Self::new(ModelKind::Mechanical)
    }
    pub fn discounted(lambda: f64) -> Self {
        Self::new(ModelKind::Discounted).with_lambda(lambda)
    }
    pub fn antidiscounted(lambda: f64) -> Self {
        Self::new(ModelKind::Antidiscounted).with_lambda(lambda)
    }
    pub fn osgood() -> Self {
        Self::new(ModelKind::Osgood)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_potential(mut self, amplitude: f64) -> Self {
        self.potential = amplitude;
        self
    }

    /// The `V = 0` variant: no `x`-dependence.
    pub fn without_potential(self) -> Self {
        self.with_potential(0.0)
    }

    pub fn with_envelope(mut self, envelope: OsgoodEnvelope) -> Self {
        self.envelope_override = Some(envelope);
        self
    }

    /// `c(u)` and `c'(u)`.
    #[inline]
    fn u_term(&self, u: f64) -> (f64, f64) {
        match self.kind {
            ModelKind::Free | ModelKind::Mechanical => (0.0, 0.0),
            ModelKind::Discounted => (self.lambda * u, self.lambda),
            ModelKind::Antidiscounted => (-self.lambda * u, -self.lambda),
            ModelKind::Osgood => {
                let s = 1.0 + u * u;
                (-u * s.ln(), -s.ln() - 2.0 * u * u / s)
            }
        }
    }

    /// Largest `|c'(u)|` for `|u| <= bound`.
    pub fn max_u_slope(&self, bound: f64) -> f64 {
        match self.kind {
            ModelKind::Free | ModelKind::Mechanical => 0.0,
            ModelKind::Discounted | ModelKind::Antidiscounted => self.lambda.abs(),
            ModelKind::Osgood => self.u_term(bound).1.abs(),
        }
    }

    /// Closed-form potential term `a cos(2 pi x)` and its `x`-derivative.
    #[inline]
    fn potential_term(&self, x: f64) -> (f64, f64) {
        if self.potential == 0.0 {
            return (0.0, 0.0);
        }
        let (s, c) = (TWO_PI * x).sin_cos();
        (self.potential * c, -TWO_PI * self.potential * s)
    }

    /// Human-readable catalog listing.
    pub fn catalog() -> String {
        let mut out = String::new();
        for kind in ModelKind::ALL {
            out.push_str(&format!("{:<15} {}\n", kind.as_str(), kind.formula()));
        }
        out.push_str(
            "\nparameters: lambda (default 1), potential = a (default 1, 0 for free)\n\
             the V=0 variant of any model is potential=0\n",
        );
        out
    }
}

impl Hamiltonian for HamiltonianModel {
    fn name(&self) -> String {
        self.kind.as_str().to_string()
    }

    #[inline]
    fn value(&self, x: f64, u: f64, p: f64) -> f64 {
        0.5 * p * p + self.potential_term(x).0 + self.u_term(u).0
    }

    #[inline]
    fn partials(&self, x: f64, u: f64, p: f64) -> Partials {
        Partials {
            hx: self.potential_term(x).1,
            hu: self.u_term(u).1,
            hp: p,
        }
    }

    fn curvature(&self, _x: f64, _u: f64, _p: f64) -> f64 {
        1.0
    }

    fn lagrangian(&self, x: f64, u: f64, v: f64) -> Result<f64> {
        Ok(0.5 * v * v - self.potential_term(x).0 - self.u_term(u).0)
    }

    fn osgood_envelope(&self) -> Option<OsgoodEnvelope> {
        if let Some(env) = self.envelope_override {
            return Some(env);
        }
        // H_p p - H = p^2/2 - a cos - c(u) <= P^2/2 + |a| + |c(u)| for u >= 0
        let p_max = self.envelope_p_max;
        let c_k = 0.5 * p_max * p_max + self.potential.abs() + 1.0;
        let growth = match self.kind {
            ModelKind::Free | ModelKind::Mechanical => EnvelopeGrowth::Constant,
            ModelKind::Discounted | ModelKind::Antidiscounted => EnvelopeGrowth::Affine {
                slope: self.lambda.abs(),
            },
            ModelKind::Osgood => EnvelopeGrowth::LogOsgood,
        };
        Some(OsgoodEnvelope { c_k, growth, p_max })
    }

    // U' = P^2/2 - a cos(2 pi X) - c(U) >= -|a| - c(U); integrate the bound.
    fn value_lower_bound(&self, u: f64, dt: f64) -> f64 {
        let a = self.potential.abs();
        let slope = match self.kind {
            ModelKind::Free | ModelKind::Mechanical => 0.0,
            ModelKind::Discounted => self.lambda,
            ModelKind::Antidiscounted => -self.lambda,
            ModelKind::Osgood => {
                // -c(w) = w log(1 + w^2) >= 0 while w >= 0, and >= a once large
                return if u * (1.0 + u * u).ln() >= a && u >= 0.0 {
                    u
                } else if u >= a * dt {
                    u - a * dt
                } else {
                    f64::NEG_INFINITY
                };
            }
        };
        if slope == 0.0 {
            u - a * dt
        } else {
            (u + a / slope) * (-slope * dt).exp() - a / slope
        }
    }
}

impl fmt::Display for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(lambda={}, potential={})", self.kind, self.lambda, self.potential)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charflow::{flow, PhasePoint};

    #[test]
    fn value_lower_bound_holds_along_flows() {
        let models = [
            HamiltonianModel::free(),
            HamiltonianModel::mechanical(),
            HamiltonianModel::discounted(1.0),
            HamiltonianModel::antidiscounted(1.0),
            HamiltonianModel::osgood(),
            HamiltonianModel::osgood().with_potential(3.0),
        ];
        for m in models {
            for (u0, p0) in [(-0.5, 0.0), (0.05, 0.2), (0.6, 1.0), (2.0, -3.0), (-2.0, 0.0)] {
                let tr = flow(&m, PhasePoint::new(0.0, u0, p0), 0.5, 1e-10).unwrap();
                for (t, s) in tr.times.iter().zip(&tr.states) {
                    let lb = m.value_lower_bound(u0, *t);
                    assert!(lb <= s.u + 1e-9, "{} from ({u0}, {p0}): {lb} > {} at {t}", m.name(), s.u);
                }
            }
        }
    }

    fn fd_partials(m: &dyn Hamiltonian, x: f64, u: f64, p: f64) -> Partials {
        let h = 1e-6;
        Partials {
            hx: (m.value(x + h, u, p) - m.value(x - h, u, p)) / (2.0 * h),
            hu: (m.value(x, u + h, p) - m.value(x, u - h, p)) / (2.0 * h),
            hp: (m.value(x, u, p + h) - m.value(x, u, p - h)) / (2.0 * h),
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        for kind in ModelKind::ALL {
            let m = HamiltonianModel::new(kind);
            for &(x, u, p) in &[(0.1, -1.3, 0.7), (0.37, 2.5, -3.0), (0.9, 0.0, 0.0)] {
                let a = m.partials(x, u, p);
                let b = fd_partials(&m, x, u, p);
                assert!((a.hx - b.hx).abs() < 1e-6, "{kind} hx");
                assert!((a.hu - b.hu).abs() < 1e-6, "{kind} hu");
                assert!((a.hp - b.hp).abs() < 1e-6, "{kind} hp");
            }
        }
    }

    #[test]
    fn closed_form_lagrangian_matches_numeric() {
        for kind in ModelKind::ALL {
            let m = HamiltonianModel::new(kind);
            for &(x, u, v) in &[(0.2, 1.5, -2.0), (0.75, -0.5, 3.0)] {
                let closed = m.lagrangian(x, u, v).unwrap();
                let numeric = legendre_transform(&m, x, u, v).unwrap().value;
                assert!((closed - numeric).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in ModelKind::ALL {
            assert_eq!(kind.as_str().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("unknown".parse::<ModelKind>().is_err());
    }

    #[test]
    fn discounted_spec_point() {
        let m = HamiltonianModel::discounted(1.0);
        assert!((m.value(0.25, 2.0, 1.0) - 2.5).abs() < 1e-15);
    }
}
