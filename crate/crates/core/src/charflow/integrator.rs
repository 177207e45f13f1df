//! Adaptive Dormand-Prince 8(5,3) stepping for three-component autonomous
//! systems, with the error norm and step controller of Hairer-Norsett-Wanner.

use super::tableau::{A, B, E3, E5};

const STAGES: usize = 12;
const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

pub(crate) type State = [f64; 3];

pub(crate) struct Stepper<F> {
    rhs: F,
    atol: f64,
    rtol: f64,
    k: [State; STAGES + 1],
    pub(crate) evaluations: usize,
}

pub(crate) struct Step {
    pub y: State,
    pub f: State,
    pub error_norm: f64,
}

impl<F: Fn(&State) -> State> Stepper<F> {
    pub(crate) fn new(rhs: F, atol: f64, rtol: f64) -> Self {
        Stepper { rhs, atol, rtol, k: [[0.0; 3]; STAGES + 1], evaluations: 0 }
    }

    pub(crate) fn eval(&mut self, y: &State) -> State {
        self.evaluations += 1;
        (self.rhs)(y)
    }

    /// One trial step of size `h` from `y` with `f = rhs(y)`.
    pub(crate) fn attempt(&mut self, y: &State, f: &State, h: f64) -> Step {
        self.k[0] = *f;
        for s in 1..STAGES {
            let mut ys = *y;
            for j in 0..s {
                let a = A[s][j];
                if a != 0.0 {
                    for c in 0..3 {
                        ys[c] += h * a * self.k[j][c];
                    }
                }
            }
            self.k[s] = self.eval(&ys);
        }
        let mut y_new = *y;
        for (j, b) in B.iter().enumerate() {
            for c in 0..3 {
                y_new[c] += h * b * self.k[j][c];
            }
        }
        let f_new = self.eval(&y_new);
        self.k[STAGES] = f_new;

        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for c in 0..3 {
            let scale = self.atol + y[c].abs().max(y_new[c].abs()) * self.rtol;
            let mut e5 = 0.0;
            let mut e3 = 0.0;
            for j in 0..=STAGES {
                e5 += self.k[j][c] * E5[j];
                e3 += self.k[j][c] * E3[j];
            }
            err5 += (e5 / scale).powi(2);
            err3 += (e3 / scale).powi(2);
        }
        let error_norm = if err5 == 0.0 && err3 == 0.0 {
            0.0
        } else {
            h.abs() * err5 / ((err5 + 0.01 * err3) * 3.0).sqrt()
        };
        Step { y: y_new, f: f_new, error_norm }
    }
}

/// Step-size multiplier after an attempt with the given error norm.
pub(crate) fn step_factor(error_norm: f64, rejected_before: bool) -> f64 {
    if error_norm < 1.0 {
        let factor = if error_norm == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * error_norm.powf(ERROR_EXPONENT)).min(MAX_FACTOR)
        };
        if rejected_before {
            factor.min(1.0)
        } else {
            factor
        }
    } else {
        (SAFETY * error_norm.powf(ERROR_EXPONENT)).max(MIN_FACTOR)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_consistent() {
        let sum: f64 = B.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
        for (s, row) in A.iter().enumerate() {
            assert!(row[s..].iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn single_step_of_exponential_is_eighth_order() {
        // y' = y, exact e^h
        let mut st = Stepper::new(|y: &State| *y, 1e-12, 1e-12);
        let errs: Vec<f64> = [1.0, 0.5]
            .iter()
            .map(|&h| {
                let y0 = [1.0, 1.0, 1.0];
                let f0 = st.eval(&y0);
                (st.attempt(&y0, &f0, h).y[0] - f64::exp(h)).abs()
            })
            .collect();
        // local error O(h^9): halving h shrinks it by ~512
        assert!(errs[0] / errs[1] > 200.0, "{errs:?}");
    }
}
