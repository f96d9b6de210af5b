use std::collections::VecDeque;

use super::{
    wrap_in_place, Objective, OptimizationTrace, OptimizerConfig, StopReason, TraceBuilder,
};
use crate::error::Result;
use crate::pauli::ParameterVector;

/// Armijo sufficient-decrease constant.
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Curvature pairs with `sᵀy` below this are dropped.
const CURVATURE_EPS: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Two-loop recursion: returns `−H g` for the implicit inverse-Hessian `H`.
fn search_direction(grad: &[f64], history: &VecDeque<CurvaturePair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        q.iter_mut().zip(&pair.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let gamma = history
        .back()
        .map_or(1.0, |p| dot(&p.s, &p.y) / dot(&p.y, &p.y));
    q.iter_mut().for_each(|qi| *qi *= gamma);
    for (pair, a) in history.iter().zip(alphas.iter().rev()) {
        let b = pair.rho * dot(&pair.y, &q);
        q.iter_mut()
            .zip(&pair.s)
            .for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

/// Limited-memory BFGS with Armijo backtracking.
///
/// Stops when the cost drops to `cost_tolerance`, the gradient's max-norm
/// drops to `gradient_tolerance`, or after `max_iters` iterations. A failed
/// line search ends the run with `converged = false`.
pub fn lbfgs_minimize<O: Objective + ?Sized>(
    objective: &O,
    init: &ParameterVector,
    cfg: &OptimizerConfig,
) -> Result<OptimizationTrace> {
    let periodic = objective.is_periodic();
    let mut x = init.values().to_vec();
    if periodic {
        wrap_in_place(&mut x);
    }
    let mut evaluations = 1u64;
    let (mut f, mut g) = objective.value_and_gradient(&x)?;
    let mut trace = TraceBuilder::new();
    trace.push(0, f, inf_norm(&g), &x);

    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(cfg.history_size);
    let mut stop = StopReason::MaxIters;

    for iteration in 1..=cfg.max_iters {
        if f <= cfg.cost_tolerance {
            stop = StopReason::CostTolerance;
            break;
        }
        if inf_norm(&g) <= cfg.gradient_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }

        let mut direction = search_direction(&g, &history);
        let mut slope = dot(&g, &direction);
        if slope >= 0.0 {
            history.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        // Backtracking; on failure retry once along steepest descent.
        let mut accepted = None;
        for attempt in 0..2 {
            let mut step = 1.0;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(&direction)
                    .map(|(xi, di)| xi + step * di)
                    .collect();
                evaluations += 1;
                let (ft, gt) = objective.value_and_gradient(&trial)?;
                if ft.is_finite() && ft <= f + ARMIJO_C1 * step * slope {
                    accepted = Some((step, trial, ft, gt));
                    break;
                }
                step *= 0.5;
            }
            if accepted.is_some() || attempt == 1 || history.is_empty() {
                break;
            }
            history.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let Some((step, mut x_new, f_new, g_new)) = accepted else {
            stop = StopReason::LineSearchFailure;
            break;
        };

        let s: Vec<f64> = direction.iter().map(|d| step * d).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_EPS {
            if history.len() == cfg.history_size {
                history.pop_front();
            }
            history.push_back(CurvaturePair {
                s,
                y,
                rho: 1.0 / sy,
            });
        } else {
            // Armijo alone cannot guarantee positive curvature; a stale
            // history would keep proposing the same poor direction.
            history.clear();
        }

        if periodic {
            wrap_in_place(&mut x_new);
        }
        x = x_new;
        f = f_new;
        g = g_new;
        trace.push(iteration, f, inf_norm(&g), &x);
    }
    if stop == StopReason::MaxIters {
        if f <= cfg.cost_tolerance {
            stop = StopReason::CostTolerance;
        } else if inf_norm(&g) <= cfg.gradient_tolerance {
            stop = StopReason::GradientTolerance;
        }
    }
    Ok(trace.finish(init.values(), x, f, stop, evaluations))
}
