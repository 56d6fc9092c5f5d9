//! Moving-asymptote update for box-bounded variables and one linear constraint.
//!
//! Each step replaces the objective by a separable convex approximation around the
//! current point and minimizes it subject to `v . x <= limit` exactly, by bisection on
//! the constraint multiplier. The per-variable minimizers are found by safeguarded
//! Newton iterations on a monotone derivative.
//!
//! [`Mma::conservative_step`] adds the inner loop of the globally convergent variant:
//! the candidate is evaluated and, while the approximation underestimates the true
//! objective there, its curvature term is raised and the subproblem solved again.
//! Accepted steps never increase the objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RAA_MIN: f64 = 1e-5;
const ALBEFA: f64 = 0.1;
const ASY_MIN: f64 = 0.01;
const ASY_MAX: f64 = 10.0;
const MAX_INNER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmaSettings {
    /// Initial asymptote distance as a fraction of the variable range.
    pub asymptote_init: f64,
    /// Expansion factor when successive steps agree in direction.
    pub asymptote_grow: f64,
    /// Contraction factor when successive steps oscillate.
    pub asymptote_shrink: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        MmaSettings {
            asymptote_init: 0.5,
            asymptote_grow: 1.2,
            asymptote_shrink: 0.7,
        }
    }
}

impl MmaSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.asymptote_init > 0.0
            && self.asymptote_init <= ASY_MAX
            && self.asymptote_grow >= 1.0
            && self.asymptote_shrink > 0.0
            && self.asymptote_shrink <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid asymptote settings {self:?}")))
        }
    }
}

/// Outcome of one accepted or rejected conservative step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// New point and its objective value.
    Accepted { x: Vec<f64>, value: f64, evaluations: usize },
    /// No candidate lowered the objective; the point is stationary to working precision.
    Stalled { evaluations: usize },
}

/// Optimizer state carried between steps.
#[derive(Debug, Clone)]
pub struct Mma {
    settings: MmaSettings,
    move_limit: f64,
    x_min: f64,
    x_max: f64,
    iter: usize,
    raa: f64,
    x1: Vec<f64>,
    x2: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
}

impl Mma {
    /// New state for `n` variables bounded to `[x_min, x_max]`.
    pub fn new(n: usize, x_min: f64, x_max: f64, move_limit: f64, settings: MmaSettings) -> Mma {
        Mma {
            settings,
            move_limit,
            x_min,
            x_max,
            iter: 0,
            raa: RAA_MIN,
            x1: vec![0.0; n],
            x2: vec![0.0; n],
            low: vec![0.0; n],
            upp: vec![0.0; n],
        }
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    fn update_asymptotes(&mut self, x: &[f64]) {
        let range = self.x_max - self.x_min;
        let s = &self.settings;
        for j in 0..x.len() {
            if self.iter < 2 {
                self.low[j] = x[j] - s.asymptote_init * range;
                self.upp[j] = x[j] + s.asymptote_init * range;
                continue;
            }
            let trend = (x[j] - self.x1[j]) * (self.x1[j] - self.x2[j]);
            let gamma = if trend < 0.0 {
                s.asymptote_shrink
            } else if trend > 0.0 {
                s.asymptote_grow
            } else {
                1.0
            };
            let low = x[j] - gamma * (self.x1[j] - self.low[j]);
            let upp = x[j] + gamma * (self.upp[j] - self.x1[j]);
            self.low[j] = low.clamp(x[j] - ASY_MAX * range, x[j] - ASY_MIN * range);
            self.upp[j] = upp.clamp(x[j] + ASY_MIN * range, x[j] + ASY_MAX * range);
        }
    }

    fn approximate(&mut self, x: &[f64], grad: &[f64], v: &[f64]) -> Result<Approximation> {
        let n = x.len();
        if grad.len() != n || v.len() != n || self.low.len() != n {
            return Err(Error::InvalidDensity(format!(
                "step sizes differ: x {n}, gradient {}, constraint {}, state {}",
                grad.len(),
                v.len(),
                self.low.len()
            )));
        }
        if let Some(j) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::InvalidDensity(format!("non-finite gradient at variable {j}")));
        }
        self.update_asymptotes(x);
        let range = self.x_max - self.x_min;
        let alpha = (0..n)
            .map(|j| {
                self.x_min
                    .max(self.low[j] + ALBEFA * (x[j] - self.low[j]))
                    .max(x[j] - self.move_limit * range)
            })
            .collect();
        let beta = (0..n)
            .map(|j| {
                self.x_max
                    .min(self.upp[j] - ALBEFA * (self.upp[j] - x[j]))
                    .min(x[j] + self.move_limit * range)
            })
            .collect();
        Ok(Approximation {
            x: x.to_vec(),
            grad: grad.to_vec(),
            low: self.low.clone(),
            upp: self.upp.clone(),
            alpha,
            beta,
            range,
        })
    }

    fn commit(&mut self, x: &[f64]) {
        self.x2 = std::mem::replace(&mut self.x1, x.to_vec());
        self.iter += 1;
    }

    /// One plain update from `x` given objective gradient `grad`, constraint
    /// coefficients `v` and right-hand side `limit`.
    pub fn step(&mut self, x: &[f64], grad: &[f64], v: &[f64], limit: f64) -> Result<Vec<f64>> {
        let approx = self.approximate(x, grad, v)?;
        let x_new = approx.solve(RAA_MIN, v, limit)?;
        self.commit(x);
        Ok(x_new)
    }

    /// Update that only accepts a candidate whose true objective (from `eval`) does not
    /// exceed `value` at `x` and is bounded by the approximation. `eval` is called once
    /// per candidate; the last call always corresponds to the accepted point.
    pub fn conservative_step<F>(
        &mut self,
        x: &[f64],
        value: f64,
        grad: &[f64],
        v: &[f64],
        limit: f64,
        mut eval: F,
    ) -> Result<StepOutcome>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let approx = self.approximate(x, grad, v)?;
        let mut raa = (0.1 * self.raa).max(RAA_MIN);
        let mut evaluations = 0;
        let outcome = loop {
            let candidate = approx.solve(raa, v, limit)?;
            let actual = eval(&candidate)?;
            evaluations += 1;
            let predicted = value + approx.predicted_change(raa, &candidate);
            let slack = 1e-12 * value.abs().max(1.0);
            if actual <= predicted + slack && actual <= value {
                break StepOutcome::Accepted {
                    x: candidate,
                    value: actual,
                    evaluations,
                };
            }
            if evaluations >= MAX_INNER {
                break StepOutcome::Stalled { evaluations };
            }
            let d = approx.distance(&candidate);
            let delta = if d > 0.0 { (actual - predicted).max(0.0) / d } else { 0.0 };
            raa = (1.1 * (raa + delta)).min(10.0 * raa).max(2.0 * raa);
        };
        self.raa = raa;
        self.commit(x);
        Ok(outcome)
    }
}

/// Separable convex model of the objective around `x`.
#[derive(Debug, Clone)]
struct Approximation {
    x: Vec<f64>,
    grad: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    range: f64,
}

impl Approximation {
    fn terms(&self, j: usize, raa: f64) -> Separable {
        let (l, u, x) = (self.low[j], self.upp[j], self.x[j]);
        let (ux, xl) = (u - x, x - l);
        let g = self.grad[j];
        let (gp, gm) = (g.max(0.0), (-g).max(0.0));
        Separable {
            p: (1.001 * gp + 0.001 * gm + raa / self.range) * ux * ux,
            q: (0.001 * gp + 1.001 * gm + raa / self.range) * xl * xl,
            l,
            u,
            alpha: self.alpha[j],
            beta: self.beta[j],
        }
    }

    /// Model value at `y` minus model value at the expansion point.
    fn predicted_change(&self, raa: f64, y: &[f64]) -> f64 {
        (0..y.len())
            .map(|j| {
                let s = self.terms(j, raa);
                let x = self.x[j];
                s.p / (s.u - y[j]) + s.q / (y[j] - s.l) - s.p / (s.u - x) - s.q / (x - s.l)
            })
            .sum()
    }

    /// Weighted squared distance multiplying the curvature parameter in the model.
    fn distance(&self, y: &[f64]) -> f64 {
        (0..y.len())
            .map(|j| {
                let (l, u) = (self.low[j], self.upp[j]);
                let dx = y[j] - self.x[j];
                (u - l) * dx * dx / ((u - y[j]) * (y[j] - l) * self.range)
            })
            .sum()
    }

    fn solve(&self, raa: f64, v: &[f64], limit: f64) -> Result<Vec<f64>> {
        let n = self.x.len();
        let sub: Vec<Separable> = (0..n).map(|j| self.terms(j, raa)).collect();
        let volume = |lam: f64, out: &mut Vec<f64>| -> f64 {
            out.clear();
            let mut total = 0.0;
            for (s, &vj) in sub.iter().zip(v) {
                let xj = s.argmin(lam * vj);
                total += vj * xj;
                out.push(xj);
            }
            total
        };

        let min_volume: f64 = sub
            .iter()
            .zip(v)
            .map(|(s, &vj)| vj * if vj >= 0.0 { s.alpha } else { s.beta })
            .sum();
        let tol = 1e-12 * limit.abs().max(1.0);
        if min_volume > limit + tol {
            return Err(Error::Infeasible(format!(
                "smallest reachable constraint value {min_volume:.9} exceeds limit {limit:.9} within the move limits"
            )));
        }

        let mut x_new = Vec::with_capacity(n);
        if volume(0.0, &mut x_new) > limit {
            let mut lo = 0.0;
            let mut hi = 1.0;
            let mut trial = Vec::with_capacity(n);
            while volume(hi, &mut trial) > limit {
                lo = hi;
                hi *= 4.0;
                if hi > 1e300 {
                    return Err(Error::Infeasible("multiplier bracket diverged".into()));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if volume(mid, &mut trial) > limit {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * hi {
                    break;
                }
            }
            // the upper end of the bracket is always feasible
            volume(hi, &mut x_new);
        }
        Ok(x_new)
    }
}

/// `p/(u - x) + q/(x - l) + c x` on `[alpha, beta]`.
#[derive(Debug, Clone, Copy)]
struct Separable {
    p: f64,
    q: f64,
    l: f64,
    u: f64,
    alpha: f64,
    beta: f64,
}

impl Separable {
    fn slope(&self, x: f64, c: f64) -> f64 {
        let a = self.u - x;
        let b = x - self.l;
        self.p / (a * a) - self.q / (b * b) + c
    }

    fn curvature(&self, x: f64) -> f64 {
        let a = self.u - x;
        let b = x - self.l;
        2.0 * self.p / (a * a * a) + 2.0 * self.q / (b * b * b)
    }

    fn argmin(&self, c: f64) -> f64 {
        if self.slope(self.alpha, c) >= 0.0 {
            return self.alpha;
        }
        if self.slope(self.beta, c) <= 0.0 {
            return self.beta;
        }
        let (mut lo, mut hi) = (self.alpha, self.beta);
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let d = self.slope(x, c);
            if d == 0.0 {
                break;
            }
            if d > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - d / self.curvature(x);
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let done = (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15;
            x = next;
            if done {
                break;
            }
        }
        x.clamp(self.alpha, self.beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_point() {
        let mut mma = Mma::new(4, 0.0, 1.0, 0.2, MmaSettings::default());
        let x = vec![0.2, 0.4, 0.6, 0.3];
        let v = vec![0.25; 4];
        let x1 = mma.step(&x, &[0.0; 4], &v, 0.5).unwrap();
        for (a, b) in x.iter().zip(&x1) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_negative_gradient_fills_budget() {
        let n = 10;
        let mut mma = Mma::new(n, 0.0, 1.0, 0.2, MmaSettings::default());
        let x = vec![0.3; n];
        let v = vec![1.0 / n as f64; n];
        let x1 = mma.step(&x, &vec![-1.0; n], &v, 0.4).unwrap();
        let vol: f64 = x1.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((vol - 0.4).abs() < 1e-6);
        for &xj in &x1 {
            assert!((xj - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn respects_move_limit() {
        let mut mma = Mma::new(3, 0.0, 1.0, 0.2, MmaSettings::default());
        let x = vec![0.5; 3];
        let x1 = mma.step(&x, &[-1e6, 1e6, 0.0], &[0.0; 3], 1.0).unwrap();
        assert!((x1[0] - 0.7).abs() < 1e-9 && (x1[1] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn infeasible_budget_is_reported() {
        let mut mma = Mma::new(2, 0.0, 1.0, 0.2, MmaSettings::default());
        let err = mma.step(&[0.9, 0.9], &[0.0, 0.0], &[0.5, 0.5], 0.1).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn conservative_steps_never_increase_a_nonconvex_objective() {
        // f = sum sin(6 x_j) + x_j^2, far from separable-convex
        let f = |x: &[f64]| x.iter().map(|&t| (6.0 * t).sin() + t * t).sum::<f64>();
        let df = |x: &[f64]| x.iter().map(|&t| 6.0 * (6.0 * t).cos() + 2.0 * t).collect::<Vec<_>>();
        let mut mma = Mma::new(5, 0.0, 1.0, 0.5, MmaSettings::default());
        let mut x = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let v = vec![0.2; 5];
        let mut fx = f(&x);
        for _ in 0..30 {
            match mma.conservative_step(&x, fx, &df(&x), &v, 0.6, |y| Ok(f(y))).unwrap() {
                StepOutcome::Accepted { x: y, value, .. } => {
                    assert!(value <= fx);
                    assert_eq!(value, f(&y));
                    x = y;
                    fx = value;
                }
                StepOutcome::Stalled { .. } => break,
            }
        }
        let vol: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!(vol <= 0.6 + 1e-12);
    }
}
