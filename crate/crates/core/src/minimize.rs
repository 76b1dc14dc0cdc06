// Copyright 2026 The ionpa Authors
// SPDX-License-Identifier: Apache-2.0

//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

/// A smooth objective with an analytic gradient.
pub(crate) trait Objective {
    /// Evaluates the objective at `x`, writing the gradient into `grad`.
    fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    /// Objective value after every accepted step, starting with the seed.
    pub trace: Vec<f64>,
}

pub(crate) struct LbfgsOptions {
    pub gradient_tol: f64,
    pub max_iterations: usize,
    pub memory: usize,
    /// Largest allowed displacement of a single coordinate per step.
    pub max_step: f64,
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs L-BFGS until the gradient norm drops below the tolerance, the
/// iteration budget is exhausted, or the line search stalls.
pub(crate) fn lbfgs<O: Objective>(obj: &O, x0: Vec<f64>, opts: &LbfgsOptions) -> LbfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = obj.eval(&x, &mut g);
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iterations && norm(&g) > opts.gradient_tol {
        iterations += 1;

        // Two-loop recursion for the search direction.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gn = norm(&g);
            d.iter_mut().for_each(|v| *v /= gn.max(1.0));
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }

        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // Lost descent; fall back to steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }

        let dmax = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut step = if dmax > opts.max_step { opts.max_step / dmax } else { 1.0 };
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let f_new = obj.eval(&x_new, &mut g_new);
            // Close to the minimum the Armijo decrease is below round-off;
            // a falling gradient norm within energy noise is then accepted.
            let noise = 4.0 * f64::EPSILON * f.abs().max(1.0);
            if f_new <= f + 1e-4 * step * slope || (f_new <= f + noise && norm(&g_new) < norm(&g)) {
                accepted = true;
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-16 * norm(&s) * norm(&y) && sy > 0.0 {
                    if history.len() == opts.memory {
                        history.pop_front();
                    }
                    history.push_back((s, y, 1.0 / sy));
                }
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                f = f_new;
                trace.push(f);
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if history.is_empty() {
                break;
            }
            history.clear();
        }
    }

    LbfgsOutcome {
        x,
        value: f,
        gradient: g,
        iterations,
        trace,
    }
}
