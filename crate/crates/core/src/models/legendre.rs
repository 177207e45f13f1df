use crate::error::{Error, Result};

use super::Hamiltonian;

/// Largest `|p|` the bracket search may reach before giving up.
const BRACKET_LIMIT: f64 = 1e6;

/// `L(x, u, v)` together with the maximizing momentum `p*`, which solves
/// `v = H_p(x, u, p*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendrePoint {
    pub value: f64,
    pub p_star: f64,
    /// `|v - H_p(x, u, p*)|`.
    pub residual: f64,
}

/// Numerical Legendre transform `sup_p { v p - H(x, u, p) }`.
///
/// `H_p` is increasing in `p` for a strictly convex `H`, so the stationary
/// point is bracketed by growing `[-1, 1]` geometrically and then polished
/// by Newton steps that fall back to bisection whenever they leave the
/// bracket or stall.
pub fn legendre_transform<M: Hamiltonian + ?Sized>(
    model: &M,
    x: f64,
    u: f64,
    v: f64,
) -> Result<LegendrePoint> {
    let hp = |p: f64| model.partials(x, u, p).hp - v;

    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut f_lo = hp(lo);
    let mut f_hi = hp(hi);
    while f_lo > 0.0 {
        lo *= 2.0;
        if lo.abs() > BRACKET_LIMIT {
            return Err(no_bracket(v, x, u));
        }
        f_lo = hp(lo);
    }
    while f_hi < 0.0 {
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(no_bracket(v, x, u));
        }
        f_hi = hp(hi);
    }

    let tol = 1e-13 * (1.0 + v.abs());
    let mut p = if f_lo == 0.0 {
        lo
    } else if f_hi == 0.0 {
        hi
    } else {
        0.5 * (lo + hi)
    };
    let mut r = hp(p);
    for _ in 0..200 {
        if r.abs() <= tol {
            break;
        }
        if r < 0.0 {
            lo = p;
        } else {
            hi = p;
        }
        let k = model.curvature(x, u, p);
        let newton = p - r / k;
        let next = if k > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == p || hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
        p = next;
        r = hp(p);
    }
    if !(r.abs() <= 1e-10 * (1.0 + v.abs())) {
        return Err(Error::NoConvergence(format!(
            "Legendre root at (x={x}, u={u}, v={v}) stalled with residual {r:e}"
        )));
    }
    Ok(LegendrePoint {
        value: v * p - model.value(x, u, p),
        p_star: p,
        residual: r.abs(),
    })
}

fn no_bracket(v: f64, x: f64, u: f64) -> Error {
    Error::NoConvergence(format!(
        "H_p(x={x}, u={u}, .) = {v} not bracketed within |p| <= {BRACKET_LIMIT:e}"
    ))
}

/// Reverse direction of the involution: `sup_v { p v - L(x, u, v) }` with
/// `L` evaluated by [`legendre_transform`].
///
/// The supremum sits where `p*(v) = p`, and `p*` is increasing in `v`, so
/// the same bracket-and-refine strategy applies on the velocity axis.
pub fn hamiltonian_from_lagrangian<M: Hamiltonian + ?Sized>(
    model: &M,
    x: f64,
    u: f64,
    p: f64,
) -> Result<f64> {
    let dual = |v: f64| legendre_transform(model, x, u, v).map(|lp| lp.p_star - p);
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut f_lo = dual(lo)?;
    let mut f_hi = dual(hi)?;
    while f_lo > 0.0 {
        lo *= 2.0;
        if lo.abs() > BRACKET_LIMIT {
            return Err(no_bracket(p, x, u));
        }
        f_lo = dual(lo)?;
    }
    while f_hi < 0.0 {
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(no_bracket(p, x, u));
        }
        f_hi = dual(hi)?;
    }
    let mut failure = None;
    let root = crate::numerics::refine_bracket(
        |v| match dual(v) {
            Ok(r) => Some((r, ())),
            Err(e) => {
                failure = Some(e);
                None
            }
        },
        lo,
        f_lo,
        hi,
        f_hi,
        1e-13 * (1.0 + p.abs()),
        400,
    );
    let v = match (root, f_lo == 0.0, f_hi == 0.0) {
        (_, true, _) => lo,
        (_, _, true) => hi,
        (Some(r), _, _) => r.x,
        (None, _, _) => {
            return Err(failure.unwrap_or_else(|| {
                Error::NoConvergence(format!("inverse Legendre root at p={p} stalled"))
            }))
        }
    };
    let l = legendre_transform(model, x, u, v)?.value;
    Ok(p * v - l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{HamiltonianModel, Partials};

    #[test]
    fn quadratic_conjugate() {
        let lp = legendre_transform(&HamiltonianModel::free(), 0.0, 0.0, 1.0).unwrap();
        assert!((lp.value - 0.5).abs() < 1e-14);
        assert!((lp.p_star - 1.0).abs() < 1e-14);
    }

    #[test]
    fn u_shift_flips_sign() {
        let m = HamiltonianModel::discounted(1.0).without_potential();
        let lp = legendre_transform(&m, 0.0, 3.0, 0.0).unwrap();
        assert!((lp.value + 3.0).abs() < 1e-14);
        assert!(lp.p_star.abs() < 1e-14);
    }

    #[test]
    fn mechanical_against_grid_maximization() {
        let m = HamiltonianModel::mechanical();
        let (x, u, v) = (0.25, 0.0, 2.0);
        // brute force: maximize v p - H over a fine p-grid, then refine around the best node
        let obj = |p: f64| v * p - crate::models::Hamiltonian::value(&m, x, u, p);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=200_000 {
            let p = -10.0 + 20.0 * i as f64 / 200_000.0;
            let val = obj(p);
            if val > best.0 {
                best = (val, p);
            }
        }
        assert!((best.0 - 2.0).abs() < 1e-8);
        assert!((best.1 - 2.0).abs() < 1e-4);
        let lp = legendre_transform(&m, x, u, v).unwrap();
        assert!((lp.value - 2.0).abs() < 1e-12);
        assert!((lp.p_star - 2.0).abs() < 1e-12);
    }

    struct Linear;
    impl Hamiltonian for Linear {
        fn name(&self) -> String {
            "linear".into()
        }
        fn value(&self, _x: f64, _u: f64, p: f64) -> f64 {
            p
        }
        fn partials(&self, _x: f64, _u: f64, _p: f64) -> Partials {
            Partials { hx: 0.0, hu: 0.0, hp: 1.0 }
        }
    }

    #[test]
    fn non_superlinear_model_fails_to_bracket() {
        assert!(matches!(
            legendre_transform(&Linear, 0.0, 0.0, 2.0),
            Err(Error::NoConvergence(_))
        ));
    }

    #[test]
    fn involution_recovers_h() {
        let m = HamiltonianModel::osgood();
        let h = hamiltonian_from_lagrangian(&m, 0.3, 1.2, -2.5).unwrap();
        let exact = crate::models::Hamiltonian::value(&m, 0.3, 1.2, -2.5);
        assert!((h - exact).abs() < 1e-10);
    }
}
