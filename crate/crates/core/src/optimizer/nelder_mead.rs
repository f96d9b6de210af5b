use super::{
    wrap_in_place, Objective, OptimizationTrace, OptimizerConfig, StopReason, TraceBuilder,
};
use crate::error::Result;
use crate::pauli::ParameterVector;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Evaluates at the wrapped point when the objective is periodic; the
/// simplex itself stays in unwrapped coordinates.
struct Evaluator<'a, O: ?Sized> {
    objective: &'a O,
    periodic: bool,
    count: u64,
}

impl<O: Objective + ?Sized> Evaluator<'_, O> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.count += 1;
        let f = if self.periodic {
            let mut w = x.to_vec();
            wrap_in_place(&mut w);
            self.objective.value(&w)?
        } else {
            self.objective.value(x)?
        };
        Ok(if f.is_nan() { f64::INFINITY } else { f })
    }
}

fn affine(base: &[f64], towards: &[f64], t: f64) -> Vec<f64> {
    base.iter()
        .zip(towards)
        .map(|(b, p)| b + t * (p - b))
        .collect()
}

/// Derivative-free simplex search with coefficients (1, 2, ½, ½).
///
/// The initial simplex is `init` plus `simplex_init_step` along each
/// coordinate. Stops when the spread of vertex costs falls below
/// `spread_tolerance` or after `max_iters` iterations, and always returns
/// the best vertex.
pub fn nelder_mead_minimize<O: Objective + ?Sized>(
    objective: &O,
    init: &ParameterVector,
    cfg: &OptimizerConfig,
) -> Result<OptimizationTrace> {
    let n = init.len();
    let mut ev = Evaluator {
        objective,
        periodic: objective.is_periodic(),
        count: 0,
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(init.values().to_vec());
    for i in 0..n {
        let mut v = init.values().to_vec();
        v[i] += cfg.simplex_init_step;
        simplex.push(v);
    }
    let mut costs = simplex
        .iter()
        .map(|v| ev.eval(v))
        .collect::<Result<Vec<_>>>()?;

    let mut trace = TraceBuilder::new();
    let mut order: Vec<usize> = (0..=n).collect();
    let sort = |order: &mut Vec<usize>, costs: &[f64]| {
        // Stable on ties so the run is reproducible.
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    };
    sort(&mut order, &costs);
    let spread = |order: &[usize], costs: &[f64]| costs[order[n]] - costs[order[0]];
    trace.push(
        0,
        costs[order[0]],
        spread(&order, &costs),
        &wrapped(&simplex[order[0]], ev.periodic),
    );

    let mut stop = StopReason::MaxIters;
    for iteration in 1..=cfg.max_iters {
        if spread(&order, &costs) < cfg.spread_tolerance {
            stop = StopReason::SimplexSpread;
            break;
        }
        let (best, worst, second_worst) = (order[0], order[n], order[n - 1]);
        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            centroid
                .iter_mut()
                .zip(&simplex[i])
                .for_each(|(c, v)| *c += v);
        }
        centroid.iter_mut().for_each(|c| *c /= n as f64);

        let reflected = affine(&centroid, &simplex[worst], -REFLECT);
        let f_reflected = ev.eval(&reflected)?;

        if f_reflected < costs[best] {
            let expanded = affine(&centroid, &reflected, EXPAND);
            let f_expanded = ev.eval(&expanded)?;
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                costs[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                costs[worst] = f_reflected;
            }
        } else if f_reflected < costs[second_worst] {
            simplex[worst] = reflected;
            costs[worst] = f_reflected;
        } else {
            let outside = f_reflected < costs[worst];
            let contracted = if outside {
                affine(&centroid, &reflected, CONTRACT)
            } else {
                affine(&centroid, &simplex[worst], CONTRACT)
            };
            let f_contracted = ev.eval(&contracted)?;
            let accept = if outside {
                f_contracted <= f_reflected
            } else {
                f_contracted < costs[worst]
            };
            if accept {
                simplex[worst] = contracted;
                costs[worst] = f_contracted;
            } else {
                let anchor = simplex[best].clone();
                for &i in &order[1..] {
                    simplex[i] = affine(&anchor, &simplex[i], SHRINK);
                    costs[i] = ev.eval(&simplex[i])?;
                }
            }
        }
        sort(&mut order, &costs);
        trace.push(
            iteration,
            costs[order[0]],
            spread(&order, &costs),
            &wrapped(&simplex[order[0]], ev.periodic),
        );
    }
    if stop == StopReason::MaxIters && spread(&order, &costs) < cfg.spread_tolerance {
        stop = StopReason::SimplexSpread;
    }
    let best = order[0];
    let final_theta = wrapped(&simplex[best], ev.periodic);
    Ok(trace.finish(init.values(), final_theta, costs[best], stop, ev.count))
}

fn wrapped(x: &[f64], periodic: bool) -> Vec<f64> {
    let mut v = x.to_vec();
    if periodic {
        wrap_in_place(&mut v);
    }
    v
}
