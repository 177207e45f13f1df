//! The characteristic system
//!
//! ```text
//! x' = H_p,    u' = H_p p - H,    p' = -H_x - H_u p
//! ```
//!
//! integrated on the universal cover of the circle (`x` is never reduced
//! modulo the period here, so winding numbers stay visible).

mod integrator;
mod tableau;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Hamiltonian;

use integrator::{step_factor, State, Stepper};

/// `|u|` or `|p|` beyond this aborts the integration with [`Error::BlowUp`].
pub const BLOWUP_THRESHOLD: f64 = 1e8;
pub const MAX_STEPS: usize = 1_000_000;

/// A state `(X, U, P)` of the characteristic system; `x` is a lift coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub u: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, u: f64, p: f64) -> Self {
        PhasePoint { x, u, p }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.u.is_finite() && self.p.is_finite()
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        ((self.x - other.x).powi(2) + (self.u - other.u).powi(2) + (self.p - other.p).powi(2)).sqrt()
    }

    fn to_state(self) -> State {
        [self.x, self.u, self.p]
    }

    fn from_state(s: State) -> Self {
        PhasePoint { x: s[0], u: s[1], p: s[2] }
    }
}

/// Time-stamped nodes of one characteristic.
///
/// `times` starts at 0 and is monotone in the direction of integration
/// (decreasing for backward flows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub model_name: String,
    pub tolerance_used: f64,
    /// Running maximum of `|U|` over the stored nodes.
    pub max_abs_u: f64,
    /// Running maximum of `|X'| = |H_p|` over the stored nodes.
    pub max_abs_velocity: f64,
}

impl Trajectory {
    pub fn start(&self) -> &PhasePoint {
        &self.states[0]
    }

    pub fn end(&self) -> &PhasePoint {
        self.states.last().expect("trajectory has at least one node")
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one node")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `int L(X, U, H_p(X, U, P)) dtau` over the stored nodes (Simpson).
    pub fn action<M: Hamiltonian + ?Sized>(&self, model: &M) -> Result<f64> {
        let mut integrand = Vec::with_capacity(self.len());
        for s in &self.states {
            let v = model.partials(s.x, s.u, s.p).hp;
            integrand.push(model.lagrangian(s.x, s.u, v)?);
        }
        Ok(crate::numerics::simpson_nodes(&self.times, &integrand))
    }
}

/// Right-hand side `(x', u', p')` of the characteristic system.
#[inline]
pub fn char_rhs<M: Hamiltonian + ?Sized>(model: &M, s: &PhasePoint) -> (f64, f64, f64) {
    let d = model.partials(s.x, s.u, s.p);
    let h = model.value(s.x, s.u, s.p);
    (d.hp, d.hp * s.p - h, -d.hx - d.hu * s.p)
}

/// Which nodes a flow reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Record {
    /// Every accepted step (requested outputs are always step ends).
    Steps,
    /// Only the requested output times.
    Outputs,
}

/// Core driver. Requested `outputs` must lie between `0` and `t_final` in
/// the direction of integration; each one becomes an accepted step end.
///
/// `stop` is consulted after every accepted step; returning `true` ends the
/// integration early with `Ok(None)`.
#[allow(clippy::too_many_arguments)]
fn integrate<M, G, S>(
    model: &M,
    start: PhasePoint,
    t_final: f64,
    tol: f64,
    outputs: &[f64],
    record: Record,
    mut on_node: G,
    mut stop: S,
) -> Result<Option<PhasePoint>>
where
    M: Hamiltonian + ?Sized,
    G: FnMut(f64, PhasePoint),
    S: FnMut(f64, &PhasePoint) -> bool,
{
    assert!(tol > 0.0, "integrator tolerance must be positive");
    if !start.is_finite() {
        return Err(Error::BlowUp { time: 0.0, state: start });
    }
    let emit_start = record == Record::Steps || outputs.first() == Some(&0.0);
    if emit_start {
        on_node(0.0, start);
    }
    if t_final == 0.0 {
        return Ok(Some(start));
    }
    let dir = t_final.signum();
    let mut stops: Vec<f64> = outputs
        .iter()
        .copied()
        .filter(|&t| t * dir > 0.0 && t * dir < t_final * dir)
        .collect();
    stops.push(t_final);
    let mut stop_idx = 0;

    let rhs = |y: &State| {
        let (dx, du, dp) = char_rhs(model, &PhasePoint::from_state(*y));
        [dx, du, dp]
    };
    let mut stepper = Stepper::new(rhs, tol, tol);
    let mut t = 0.0;
    let mut y = start.to_state();
    let mut f = stepper.eval(&y);
    let mut h_abs = t_final.abs() / 100.0;
    let min_step = 1e-14 * t_final.abs().max(1.0);

    for _ in 0..MAX_STEPS {
        let target = stops[stop_idx];
        let remaining = (target - t).abs();
        let mut landing = false;
        let mut h_try = h_abs;
        if h_try * 1.1 >= remaining {
            h_try = remaining;
            landing = true;
        } else if h_try * 2.0 > remaining {
            h_try = 0.5 * remaining;
        }

        let mut rejected = false;
        loop {
            if h_try < min_step {
                return Err(Error::BlowUp { time: t, state: PhasePoint::from_state(y) });
            }
            let step = stepper.attempt(&y, &f, dir * h_try);
            let finite = step.y.iter().all(|v| v.is_finite());
            if finite && step.error_norm < 1.0 {
                h_abs = h_try * step_factor(step.error_norm, rejected);
                if landing {
                    t = target;
                } else {
                    t += dir * h_try;
                }
                y = step.y;
                f = step.f;
                break;
            }
            let norm = if finite { step.error_norm } else { f64::INFINITY };
            h_try *= step_factor(norm, true);
            landing = false;
            rejected = true;
        }

        let state = PhasePoint::from_state(y);
        if !state.is_finite() || y[1].abs() > BLOWUP_THRESHOLD || y[2].abs() > BLOWUP_THRESHOLD {
            return Err(Error::BlowUp { time: t, state });
        }
        let at_stop = landing;
        if record == Record::Steps || at_stop {
            on_node(t, state);
        }
        if at_stop {
            stop_idx += 1;
            if stop_idx == stops.len() {
                return Ok(Some(state));
            }
        }
        if stop(t, &state) {
            return Ok(None);
        }
    }
    Err(Error::StepLimit(MAX_STEPS))
}

fn never(_: f64, _: &PhasePoint) -> bool {
    false
}

fn collect<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    t_final: f64,
    tol: f64,
    outputs: &[f64],
    record: Record,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut max_abs_u = 0.0f64;
    let mut max_abs_velocity = 0.0f64;
    integrate(model, start, t_final, tol, outputs, record, |t, s| {
        times.push(t);
        states.push(s);
        max_abs_u = max_abs_u.max(s.u.abs());
        max_abs_velocity = max_abs_velocity.max(model.partials(s.x, s.u, s.p).hp.abs());
    }, never)?;
    Ok(Trajectory {
        times,
        states,
        model_name: model.name(),
        tolerance_used: tol,
        max_abs_u,
        max_abs_velocity,
    })
}

/// Integrates from `start` for time `t_final` (negative for backward flow),
/// storing every accepted step.
pub fn flow<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    t_final: f64,
    tol: f64,
) -> Result<Trajectory> {
    collect(model, start, t_final, tol, &[], Record::Steps)
}

/// Like [`flow`], with each of `outputs` additionally landed on exactly.
pub fn flow_with_outputs<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    t_final: f64,
    tol: f64,
    outputs: &[f64],
) -> Result<Trajectory> {
    let mut sorted = outputs.to_vec();
    sorted.sort_by(|a, b| (a * t_final.signum()).total_cmp(&(b * t_final.signum())));
    collect(model, start, t_final, tol, &sorted, Record::Steps)
}

/// Stores only the `n + 1` uniformly spaced nodes `k t_final / n`.
pub fn flow_uniform<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    t_final: f64,
    tol: f64,
    n: usize,
) -> Result<Trajectory> {
    let n = n.max(1);
    let outputs: Vec<f64> = (0..=n).map(|k| t_final * k as f64 / n as f64).collect();
    collect(model, start, t_final, tol, &outputs, Record::Outputs)
}

/// Terminal state only.
pub fn flow_endpoint<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    t_final: f64,
    tol: f64,
) -> Result<PhasePoint> {
    integrate(model, start, t_final, tol, &[], Record::Outputs, |_, _| {}, never)
        .map(|s| s.expect("unstoppable flow"))
}

/// Terminal state, or `None` once the model's value lower bound proves
/// `U(t_final) > ceiling`.
pub fn flow_endpoint_bounded<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    t_final: f64,
    tol: f64,
    ceiling: f64,
) -> Result<Option<PhasePoint>> {
    let margin = 1e-8 * (1.0 + ceiling.abs());
    integrate(model, start, t_final, tol, &[], Record::Outputs, |_, _| {}, |t, s| {
        model.value_lower_bound(s.u, t_final - t) > ceiling + margin
    })
}

/// Like [`flow_sampled`] with an early-exit predicate `stop(t, state)`.
/// The samples reached are returned even when the flow fails; the status
/// is `Ok(true)` when all of `times` were reached and `Ok(false)` on an
/// early exit.
pub fn flow_sampled_until<M, S>(
    model: &M,
    start: PhasePoint,
    times: &[f64],
    tol: f64,
    stop: S,
) -> (Vec<PhasePoint>, Result<bool>)
where
    M: Hamiltonian + ?Sized,
    S: FnMut(f64, &PhasePoint) -> bool,
{
    let mut out = Vec::with_capacity(times.len());
    let Some(&t_final) = times.last() else {
        return (out, Ok(true));
    };
    let status = integrate(model, start, t_final, tol, times, Record::Outputs, |_, s| out.push(s), stop)
        .map(|end| end.is_some());
    (out, status)
}

/// States at the given nonnegative, increasing `times`.
pub fn flow_sampled<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    times: &[f64],
    tol: f64,
) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(times.len());
    let Some(&t_final) = times.last() else {
        return Ok(out);
    };
    integrate(model, start, t_final, tol, times, Record::Outputs, |_, s| out.push(s), never)?;
    Ok(out)
}

/// Distance between `start` and the result of flowing it forward by `t`
/// and back again.
pub fn flow_roundtrip_error<M: Hamiltonian + ?Sized>(
    model: &M,
    start: PhasePoint,
    t: f64,
    tol: f64,
) -> Result<f64> {
    let there = flow_endpoint(model, start, t, tol)?;
    let back = flow_endpoint(model, there, -t, tol)?;
    Ok(back.distance(&start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::HamiltonianModel;

    #[test]
    fn rhs_examples() {
        assert_eq!(char_rhs(&HamiltonianModel::free(), &PhasePoint::new(0.0, 0.0, 2.0)), (2.0, 2.0, 0.0));
        assert_eq!(
            char_rhs(&HamiltonianModel::mechanical(), &PhasePoint::new(0.0, 0.0, 0.0)),
            (0.0, -1.0, 0.0)
        );
        let (dx, du, dp) = char_rhs(&HamiltonianModel::discounted(1.0), &PhasePoint::new(0.25, 2.0, 1.0));
        assert!((dx - 1.0).abs() < 1e-15);
        assert!((du + 1.5).abs() < 1e-14);
        assert!((dp - (2.0 * std::f64::consts::PI - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn free_straight_line() {
        let tr = flow(&HamiltonianModel::free(), PhasePoint::new(0.0, 0.0, 1.0), 1.0, 1e-10).unwrap();
        let e = tr.end();
        assert!((e.x - 1.0).abs() < 1e-13 && (e.u - 0.5).abs() < 1e-13 && (e.p - 1.0).abs() < 1e-13);
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(tr.duration(), 1.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn pure_discount_decay() {
        let m = HamiltonianModel::discounted(1.0).without_potential();
        let e = flow_endpoint(&m, PhasePoint::new(0.0, 1.0, 0.0), 1.0, 1e-10).unwrap();
        assert!((e.u - (-1.0f64).exp()).abs() < 1e-9);
        assert_eq!((e.x, e.p), (0.0, 0.0));
    }

    #[test]
    fn backward_flow_times_decrease() {
        let tr = flow(&HamiltonianModel::mechanical(), PhasePoint::new(0.1, 0.0, 0.3), -1.0, 1e-9).unwrap();
        assert!(tr.times.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(tr.duration(), -1.0);
    }

    #[test]
    fn outputs_are_hit_exactly() {
        let outs = [0.25, 0.5, 0.75];
        let tr = flow_with_outputs(&HamiltonianModel::mechanical(), PhasePoint::new(0.0, 0.0, 0.3), 1.0, 1e-8, &outs)
            .unwrap();
        for o in outs {
            assert!(tr.times.contains(&o));
        }
        let sampled =
            flow_sampled(&HamiltonianModel::mechanical(), PhasePoint::new(0.0, 0.0, 0.3), &[0.0, 0.5, 1.0], 1e-8)
                .unwrap();
        assert_eq!(sampled.len(), 3);
        assert_eq!(sampled[0], PhasePoint::new(0.0, 0.0, 0.3));
    }

    #[test]
    fn blowup_is_reported() {
        // u' = u log(1+u^2) from a large value escapes quickly
        let m = HamiltonianModel::osgood().without_potential();
        let r = flow_endpoint(&m, PhasePoint::new(0.0, 1e6, 0.0), 10.0, 1e-8);
        assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
    }

    #[test]
    fn uniform_nodes() {
        let tr = flow_uniform(&HamiltonianModel::free(), PhasePoint::new(0.0, 0.0, 1.0), 1.0, 1e-10, 8).unwrap();
        assert_eq!(tr.len(), 9);
        assert_eq!(tr.times[4], 0.5);
    }
}
