//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! The objective writes its gradient into the provided buffer and returns the
//! value; a non-finite value marks a point as infeasible and makes the line
//! search backtrack.

use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once `(f_prev - f) <= rel_tol * |f_prev|`.
    pub rel_tol: f64,
    pub grad_tol: f64,
    /// Upper bound on the length of the very first step.
    pub first_step: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 200,
            rel_tol: 1e-8,
            grad_tol: 1e-12,
            first_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn two_loop(g: &[f64], mem: &VecDeque<Pair>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for p in mem.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        for (qi, yi) in q.iter_mut().zip(&p.y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some(last) = mem.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (p, a) in mem.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &q);
        for (qi, si) in q.iter_mut().zip(&p.s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub fn minimize<F>(mut f: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> LbfgsResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return LbfgsResult {
            x,
            value: fx,
            iterations: 0,
            evaluations,
            converged: false,
        };
    }

    let mut mem: VecDeque<Pair> = VecDeque::with_capacity(cfg.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        if norm(&g) <= cfg.grad_tol {
            converged = true;
            break;
        }
        let mut dir = two_loop(&g, &mem);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            mem.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let mut step = if mem.is_empty() {
            (cfg.first_step / norm(&dir)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..50 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            let f_new = f(&x_new, &mut g_new);
            evaluations += 1;
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }

        let Some(f_new) = accepted else {
            if mem.is_empty() {
                converged = true;
                break;
            }
            mem.clear();
            continue;
        };
        iterations += 1;

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back(Pair { s, y, rho: 1.0 / sy });
        }

        let improvement = fx - f_new;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        fx = f_new;
        if improvement <= cfg.rel_tol * (fx + improvement).abs() {
            converged = true;
            break;
        }
    }

    LbfgsResult {
        x,
        value: fx,
        iterations,
        evaluations,
        converged,
    }
}
