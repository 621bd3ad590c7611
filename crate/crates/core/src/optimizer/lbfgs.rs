//! Limited-memory BFGS with a strong-Wolfe line search (bracketing plus
//! cubic-interpolation zoom).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const MAX_LINE_EVALS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsSettings {
    /// Stop once `‖∇f‖₂` falls to this value.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub memory: usize,
    /// Stop as soon as `f` reaches this value.
    pub target: f64,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        LbfgsSettings {
            grad_tol: 1e-10,
            max_iters: 10_000,
            memory: 10,
            target: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    TargetReached,
    MaxIterations,
    /// No step along the steepest-descent direction lowers `f`: the iterate
    /// sits on the floating-point floor of the objective.
    LineSearchStalled,
}

impl StopReason {
    pub fn converged(self) -> bool {
        !matches!(self, StopReason::MaxIterations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
    x: Vec<f64>,
    g: Vec<f64>,
}

struct LineSearch<'a, F> {
    func: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    evaluations: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    fn eval(&mut self, alpha: f64) -> Result<Trial> {
        let x: Vec<f64> = self.x.iter().zip(self.d).map(|(x, d)| x + alpha * d).collect();
        let mut g = vec![0.0; x.len()];
        let f = (self.func)(&x, &mut g)?;
        self.evaluations += 1;
        if !f.is_finite() {
            return Err(Error::NonFinite("objective during line search".into()));
        }
        let slope = dot(&g, self.d);
        Ok(Trial { alpha, f, slope, x, g })
    }

    fn armijo(&self, t: &Trial) -> bool {
        t.f <= self.f0 + C1 * t.alpha * self.slope0
    }

    fn curvature(&self, t: &Trial) -> bool {
        t.slope.abs() <= -C2 * self.slope0
    }

    /// Returns an accepted trial, or the best sufficient-decrease point seen
    /// if the bracket collapses first, or `None` if no decrease was found.
    fn search(mut self, alpha0: f64) -> Result<(Option<Trial>, usize)> {
        let mut prev = Trial {
            alpha: 0.0,
            f: self.f0,
            slope: self.slope0,
            x: Vec::new(),
            g: Vec::new(),
        };
        let mut alpha = alpha0;
        let mut best: Option<Trial> = None;
        for i in 0..MAX_LINE_EVALS {
            let t = self.eval(alpha)?;
            if !self.armijo(&t) || (i > 0 && t.f >= prev.f) {
                return self.zoom(prev, t, best);
            }
            if self.curvature(&t) {
                return Ok((Some(t), self.evaluations));
            }
            if t.slope >= 0.0 {
                return self.zoom(t, prev, best);
            }
            alpha *= 2.0;
            best = Some(Trial {
                x: t.x.clone(),
                g: t.g.clone(),
                ..t
            });
            prev = t;
        }
        Ok((best, self.evaluations))
    }

    fn zoom(mut self, mut lo: Trial, mut hi: Trial, mut best: Option<Trial>) -> Result<(Option<Trial>, usize)> {
        if lo.alpha > 0.0 && best.as_ref().is_none_or(|b| lo.f < b.f) {
            best = Some(Trial {
                x: lo.x.clone(),
                g: lo.g.clone(),
                ..lo
            });
        }
        for _ in 0..MAX_LINE_EVALS {
            let width = (hi.alpha - lo.alpha).abs();
            if width <= 1e-16 * lo.alpha.abs().max(hi.alpha.abs()) {
                break;
            }
            let a = cubic_min(&lo, &hi);
            let (a_min, a_max) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let margin = 0.1 * width;
            let a = a.clamp(a_min + margin, a_max - margin);
            let t = self.eval(a)?;
            if !self.armijo(&t) || t.f >= lo.f {
                hi = t;
            } else {
                if self.curvature(&t) {
                    return Ok((Some(t), self.evaluations));
                }
                if t.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                if best.as_ref().is_none_or(|b| t.f < b.f) {
                    best = Some(Trial {
                        x: t.x.clone(),
                        g: t.g.clone(),
                        ..t
                    });
                }
                lo = t;
            }
        }
        Ok((best, self.evaluations))
    }
}

/// Minimiser of the cubic matching values and slopes at both ends, or the
/// midpoint when the cubic has no interior minimum.
fn cubic_min(a: &Trial, b: &Trial) -> f64 {
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return 0.5 * (a.alpha + b.alpha);
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return 0.5 * (a.alpha + b.alpha);
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    if t.is_finite() {
        t
    } else {
        0.5 * (a.alpha + b.alpha)
    }
}

/// Minimises `func`, which writes the gradient into its second argument and
/// returns the value.
pub fn minimize<F>(mut func: F, x0: &[f64], settings: &LbfgsSettings) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = func(&x, &mut g)?;
    if !f.is_finite() {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(settings.memory);
    let mut d = vec![0.0; n];
    let mut alpha_buf = vec![0.0; settings.memory];
    let mut iterations = 0;
    let stop = loop {
        let gn = norm(&g);
        if f <= settings.target {
            break StopReason::TargetReached;
        }
        if gn <= settings.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iterations >= settings.max_iters {
            break StopReason::MaxIterations;
        }

        // Two-loop recursion.
        d.iter_mut().zip(&g).for_each(|(d, g)| *d = -g);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &d);
            alpha_buf[k] = a;
            d.iter_mut().zip(y).for_each(|(d, y)| *d -= a * y);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|d| *d *= gamma);
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(d, s)| *d += (alpha_buf[k] - b) * s);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            history.clear();
            d.iter_mut().zip(&g).for_each(|(d, g)| *d = -g);
            slope = -gn * gn;
        }
        let alpha0 = if history.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };

        let ls = LineSearch {
            func: &mut func,
            x: &x,
            d: &d,
            f0: f,
            slope0: slope,
            evaluations: 0,
        };
        let (trial, used) = ls.search(alpha0)?;
        evaluations += used;
        let trial = match trial {
            Some(t) if t.f < f => t,
            _ => {
                if history.is_empty() {
                    break StopReason::LineSearchStalled;
                }
                // Retry from steepest descent before giving up.
                history.clear();
                iterations += 1;
                continue;
            }
        };

        let s: Vec<f64> = trial.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * norm(&s) * norm(&y) {
            if history.len() == settings.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        x = trial.x;
        g = trial.g;
        f = trial.f;
        iterations += 1;
    };
    Ok(LbfgsOutcome {
        grad_norm: norm(&g),
        x,
        f,
        iterations,
        evaluations,
        stop,
    })
}
