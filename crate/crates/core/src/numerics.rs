//! Scalar numerical kernels shared by the solvers: bracketed root refinement,
//! golden-section minimization and Simpson quadrature.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed root refinement.
#[derive(Debug, Clone)]
pub struct Root<T> {
    pub x: f64,
    pub residual: f64,
    pub payload: T,
}

/// Refines a sign-changing bracket `[a, b]` of `f` until `|f| <= ftol`.
///
/// Illinois-modified false position, with a bisection step whenever the
/// bracket fails to shrink by half over two iterations. `f` returns the
/// residual together with an arbitrary payload (the terminal state of a
/// shot, for instance); `None` marks a failed evaluation and aborts.
pub fn refine_bracket<T, F>(
    mut f: F,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    ftol: f64,
    max_iter: usize,
) -> Option<Root<T>>
where
    F: FnMut(f64) -> Option<(f64, T)>,
{
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return None;
    }
    // which endpoint was retained on the previous step: -1 = a, 1 = b
    let mut side = 0i8;
    let mut width = (b - a).abs();
    for iter in 0..max_iter {
        let mut x = (a * fb - b * fa) / (fb - fa);
        let force_bisect = iter % 3 == 2 && (b - a).abs() > 0.5 * width;
        if !x.is_finite() || x <= a.min(b) || x >= a.max(b) || force_bisect {
            x = 0.5 * (a + b);
        }
        if iter % 3 == 2 {
            width = (b - a).abs();
        }
        let (fx, payload) = f(x)?;
        if fx.abs() <= ftol {
            return Some(Root { x, residual: fx, payload });
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = x;
            fb = fx;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= f64::EPSILON * (a.abs() + b.abs()) {
            return None;
        }
    }
    None
}

/// Unbracketed secant iteration from `x0` and `x1`, for warm-started
/// solves near a known root. Gives up after `max_iter` iterations, on a
/// failed evaluation, or when a step exceeds `max_step`.
pub fn secant_root<T, F>(
    mut f: F,
    x0: f64,
    x1: f64,
    ftol: f64,
    max_step: f64,
    max_iter: usize,
) -> Option<Root<T>>
where
    F: FnMut(f64) -> Option<(f64, T)>,
{
    let (mut xa, mut fa) = (x0, f(x0)?.0);
    let (mut xb, (mut fb, mut payload)) = (x1, f(x1)?);
    for _ in 0..max_iter {
        if fb.abs() <= ftol {
            return Some(Root { x: xb, residual: fb, payload });
        }
        if fb == fa {
            return None;
        }
        let step = -fb * (xb - xa) / (fb - fa);
        if !step.is_finite() || step.abs() > max_step {
            return None;
        }
        let xn = xb + step;
        let (fnew, pn) = f(xn)?;
        xa = xb;
        fa = fb;
        xb = xn;
        fb = fnew;
        payload = pn;
    }
    (fb.abs() <= ftol).then_some(Root { x: xb, residual: fb, payload })
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Returns the best point evaluated, which for a unimodal `f` is within
/// `xtol` of the minimizer. Non-finite values are treated as `+inf`.
pub fn golden_section_min<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    let (mut best_x, mut best_f) = if fc <= fd { (c, fc) } else { (d, fd) };
    while (b - a).abs() > xtol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
            if fc < best_f {
                best_x = c;
                best_f = fc;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
            if fd < best_f {
                best_x = d;
                best_f = fd;
            }
        }
    }
    (best_x, best_f)
}

/// Composite Simpson rule on `n` (rounded up to even) uniform panels.
pub fn simpson<F>(f: F, a: f64, b: f64, n: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// Simpson quadrature of tabulated samples on a possibly non-uniform,
/// strictly monotone abscissa.
///
/// Consecutive interval pairs are integrated with the three-point
/// quadratic rule; a trailing odd interval uses the quadratic through the
/// last three nodes.
pub fn simpson_nodes(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    match n {
        0 | 1 => return 0.0,
        2 => return 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]),
        _ => {}
    }
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < n {
        total += pair_rule(xs[i], xs[i + 1], xs[i + 2], ys[i], ys[i + 1], ys[i + 2]);
        i += 2;
    }
    if i + 1 == n - 1 {
        // last interval [x_{n-2}, x_{n-1}] from the quadratic through the last three nodes
        let (x0, x1, x2) = (xs[n - 3], xs[n - 2], xs[n - 1]);
        let (y0, y1, y2) = (ys[n - 3], ys[n - 2], ys[n - 1]);
        let h0 = x1 - x0;
        let h1 = x2 - x1;
        let w0 = -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
        let w1 = h1 * (h1 + 3.0 * h0) / (6.0 * h0);
        let w2 = h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
        total += w0 * y0 + w1 * y1 + w2 * y2;
    }
    total
}

fn pair_rule(x0: f64, x1: f64, x2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let h0 = x1 - x0;
    let h1 = x2 - x1;
    let s = h0 + h1;
    s / 6.0 * ((2.0 - h1 / h0) * y0 + s * s / (h0 * h1) * y1 + (2.0 - h0 / h1) * y2)
}

/// Maps `x` into `[0, period)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illinois_finds_cubic_root() {
        let f = |x: f64| Some((x * x * x - 2.0 * x - 5.0, ()));
        let r = refine_bracket(f, 2.0, -1.0, 3.0, 16.0, 1e-13, 100).unwrap();
        assert!((r.x - 2.094_551_481_542_326_5).abs() < 1e-12);
    }

    #[test]
    fn bracket_without_sign_change_is_rejected() {
        let f = |x: f64| Some((x * x + 1.0, ()));
        assert!(refine_bracket(f, -1.0, 2.0, 1.0, 2.0, 1e-12, 50).is_none());
    }

    #[test]
    fn secant_converges_from_nearby_start() {
        let r = secant_root(|x| Some((x.exp() - 2.0, ())), 0.5, 0.6, 1e-14, 1.0, 50).unwrap();
        assert!((r.x - 2f64.ln()).abs() < 1e-13);
        assert!(secant_root(|x| Some((x * x + 1.0, ())), 0.0, 1.0, 1e-12, 0.1, 50).is_none());
    }

    #[test]
    fn golden_section_quadratic() {
        let (x, fx) = golden_section_min(|x| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 4);
        assert!((v - 2.0).abs() < 1e-14);
        let xs = [0.0, 0.1, 0.35, 0.5, 0.9, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!((simpson_nodes(&xs, &ys) - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn wrap_into_unit_interval() {
        assert_eq!(wrap(1.25, 1.0), 0.25);
        assert_eq!(wrap(-0.25, 1.0), 0.75);
        assert_eq!(wrap(-1e-18, 1.0), 0.0);
    }
}
