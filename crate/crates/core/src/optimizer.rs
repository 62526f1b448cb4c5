//! Augmented-Lagrangian minimization of the finite condition number.
//!
//! The optimizer descends the largest eigenvalue of the weighted Laplacian
//! while a penalized constraint keeps the second-smallest eigenvalue at or
//! above one, so the terminal weights minimize the ratio of the two. The
//! inner loop takes projected gradient steps at a fixed step size; the outer
//! loop updates a scalar multiplier from the constraint violation and stops
//! when the multiplier settles. Eigenpairs come from any [`EigEngine`], so
//! the same loop runs against the message-passing estimators or the dense
//! oracle solver.
//!
//! The multiplier is a single scalar: every agent would apply the same
//! update to it from the flooded connectivity estimate, so holding it once
//! here loses nothing and keeps it uniform by construction.

use crate::eig::Weighting;
use crate::estimators::{EigEngine, EigEval, EngineError};
use crate::gradient::{edge_weight_gradient, node_weight_gradient};
use crate::graph::{EdgeWeights, Graph, NodeWeights};
use thiserror::Error;

/// Weights below this are lifted to it for gradient evaluation only; the
/// stored weights keep their projected values. The gradient's square-root
/// ratio needs strictly positive entries even though the projection may
/// park a weight at exactly zero.
const WEIGHT_FLOOR: f64 = 1e-9;

/// Consecutive small weight steps required before the inner loop stops.
const STALL_STREAK: u32 = 4;

/// Errors from [`outer_solve`].
#[derive(Debug, Error)]
pub enum OptimError {
    /// The eigenpair engine failed.
    #[error(transparent)]
    Engine(#[from] EngineError),
    /// A parameter or starting point fails validation.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Which weight family the optimizer adjusts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// One weight per node, multiplying that node's row of the Laplacian.
    Node,
    /// One weight per edge of the graph, in edge insertion order.
    Edge,
}

/// Step sizes, penalty strength, tolerances, and budgets for [`outer_solve`].
///
/// `t_max` is a cumulative budget over all descent steps of the whole run,
/// not per subproblem; exhausting it ends the run with `converged = false`.
/// Estimation tolerances live with the estimators themselves and are not
/// duplicated here.
#[derive(Debug, Clone)]
pub struct AugLagParams {
    /// Gradient step size.
    pub gamma: f64,
    /// Penalty coefficient on the connectivity constraint.
    pub rho: f64,
    /// Initial multiplier value.
    pub sigma0: f64,
    /// Cumulative descent-step budget for the whole run.
    pub t_max: usize,
    /// Maximum number of multiplier updates.
    pub k_max: usize,
    /// Inner stop: scaled weight step `|dw|_inf / gamma` at or below this
    /// for four consecutive iterations.
    pub eps_w: f64,
    /// Outer stop: absolute multiplier change at or below this.
    pub eps_sigma: f64,
    /// Inner stop: absolute change of the largest eigenvalue between
    /// consecutive steps at or below this (a single hit suffices).
    pub eps_lambda_n: f64,
    /// Starting weights; `None` means all ones of the right dimension.
    pub w0: Option<Vec<f64>>,
}

impl Default for AugLagParams {
    fn default() -> Self {
        Self {
            gamma: 1e-3,
            rho: 20.0,
            sigma0: 0.0,
            t_max: 750,
            k_max: 40,
            eps_w: 5e-2,
            eps_sigma: 1e-1,
            eps_lambda_n: 1e-3,
            w0: None,
        }
    }
}

/// State recorded at one descent step (or at the terminal point).
#[derive(Debug, Clone)]
pub struct DescentStep {
    /// Descent-step index; the terminal record carries the total step count.
    pub t: usize,
    /// Weights before the step (or terminal weights on the last record).
    pub w: Vec<f64>,
    /// Largest eigenvalue at `w`.
    pub lambda_n: f64,
    /// Second-smallest eigenvalue at `w`.
    pub lambda_2: f64,
    /// Condition number `lambda_n / lambda_2` of the recorded pair.
    pub kappa: f64,
    /// Multiplier in force when the step was taken.
    pub sigma: f64,
    /// Protocol rounds consumed by this record's eigenpair evaluation.
    pub rounds: usize,
}

/// One multiplier update.
#[derive(Debug, Clone)]
pub struct MultiplierUpdate {
    /// Multiplier value after the update.
    pub sigma: f64,
    /// Cumulative descent steps taken when the update happened.
    pub t: usize,
}

/// Full history of one [`outer_solve`] run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    /// One record per descent step, plus a terminal record; `steps[i].t == i`.
    pub steps: Vec<DescentStep>,
    /// Multiplier updates in order.
    pub multiplier_updates: Vec<MultiplierUpdate>,
    /// Total descent steps taken.
    pub steps_used: usize,
    /// Whether the multiplier settled within the budgets.
    pub converged: bool,
    /// Engine protocol rounds over the whole run, including startup.
    pub total_rounds: usize,
}

impl RunTrace {
    /// The terminal record.
    pub fn terminal(&self) -> &DescentStep {
        self.steps.last().expect("trace always holds a terminal record")
    }
}

/// The penalized objective: the largest eigenvalue plus a quadratic penalty
/// on the amount by which connectivity falls short of one.
pub fn aug_lagrangian_value(lambda_n: f64, lambda_2: f64, sigma: f64, rho: f64) -> f64 {
    let h = (1.0 - lambda_2 + sigma / rho).max(0.0);
    lambda_n + 0.5 * rho * h * h
}

/// Multiplier update from the constraint violation, clamped at zero.
pub fn multiplier_update(sigma: f64, rho: f64, lambda_2: f64) -> f64 {
    (sigma + rho * (1.0 - lambda_2)).max(0.0)
}

/// One projected gradient step: move against the gradient, clamp at zero.
pub fn projected_step(w: &[f64], grad: &[f64], gamma: f64) -> Vec<f64> {
    w.iter()
        .zip(grad)
        .map(|(wi, gi)| (wi - gamma * gi).max(0.0))
        .collect()
}

/// Gradient of the penalized objective with respect to node weights.
///
/// `top` and `second` are unit eigenvectors of the largest and
/// second-smallest eigenvalues. At a repeated eigenvalue any member of the
/// eigenspace yields a valid subgradient, so callers may pass whatever
/// vector their engine converged to. Each entry uses only the weights and
/// eigenvector entries of the agent and its neighbors.
pub fn node_lagrangian_gradient(
    g: &Graph,
    w: &[f64],
    top: &[f64],
    second: &[f64],
    lambda_2: f64,
    sigma: f64,
    rho: f64,
) -> Vec<f64> {
    let wf: Vec<f64> = w.iter().map(|&x| x.max(WEIGHT_FLOOR)).collect();
    let h = (1.0 - lambda_2 + sigma / rho).max(0.0);
    let grad_top = node_weight_gradient(g, &wf, top);
    if h == 0.0 {
        return grad_top;
    }
    let grad_second = node_weight_gradient(g, &wf, second);
    grad_top
        .iter()
        .zip(&grad_second)
        .map(|(a, b)| a - rho * h * b)
        .collect()
}

/// Gradient of the penalized objective with respect to edge weights.
///
/// Both endpoints of an edge hold the same two eigenvector entries, so the
/// value each would compute is identical by construction.
pub fn edge_lagrangian_gradient(
    g: &Graph,
    top: &[f64],
    second: &[f64],
    lambda_2: f64,
    sigma: f64,
    rho: f64,
) -> Vec<f64> {
    let h = (1.0 - lambda_2 + sigma / rho).max(0.0);
    let grad_top = edge_weight_gradient(g, top);
    if h == 0.0 {
        return grad_top;
    }
    let grad_second = edge_weight_gradient(g, second);
    grad_top
        .iter()
        .zip(&grad_second)
        .map(|(a, b)| a - rho * h * b)
        .collect()
}

fn validate(g: &Graph, params: &AugLagParams, mode: WeightMode) -> Result<Vec<f64>, OptimError> {
    let bad = |msg: String| Err(OptimError::InvalidParams(msg));
    if !(params.gamma > 0.0) {
        return bad(format!("gamma must be positive, got {}", params.gamma));
    }
    if !(params.rho > 0.0) {
        return bad(format!("rho must be positive, got {}", params.rho));
    }
    if !(params.sigma0 >= 0.0) {
        return bad(format!("sigma0 must be nonnegative, got {}", params.sigma0));
    }
    if params.t_max == 0 || params.k_max == 0 {
        return bad("t_max and k_max must be at least 1".into());
    }
    if !(params.eps_w > 0.0 && params.eps_sigma > 0.0 && params.eps_lambda_n > 0.0) {
        return bad("tolerances must be positive".into());
    }
    let dim = match mode {
        WeightMode::Node => g.n(),
        WeightMode::Edge => g.edges().len(),
    };
    match &params.w0 {
        None => Ok(vec![1.0; dim]),
        Some(w0) => {
            if w0.len() != dim {
                return bad(format!(
                    "starting weights have {} entries but {:?} mode on this graph needs {}",
                    w0.len(),
                    mode,
                    dim
                ));
            }
            if let Some(x) = w0.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                return bad(format!("starting weight {x} is not a finite nonnegative number"));
            }
            Ok(w0.clone())
        }
    }
}

/// Run the full optimization: projected gradient descent on the weights
/// inside, multiplier updates outside, until the multiplier settles or a
/// budget runs out.
///
/// Budget exhaustion is a reported outcome (`converged = false` on the
/// returned trace), not an error; errors are reserved for invalid
/// parameters and engine failures.
pub fn outer_solve(
    g: &Graph,
    params: &AugLagParams,
    mode: WeightMode,
    engine: &mut dyn EigEngine,
) -> Result<RunTrace, OptimError> {
    let mut w = validate(g, params, mode)?;
    // Projection keeps every entry nonnegative, so wrapping cannot fail.
    let eval_at = |engine: &mut dyn EigEngine, w: &[f64]| -> Result<EigEval, EngineError> {
        match mode {
            WeightMode::Node => {
                let nw = NodeWeights::new(w.to_vec()).expect("projected weights are nonnegative");
                engine.eval(g, Weighting::Node(&nw))
            }
            WeightMode::Edge => {
                let ew = EdgeWeights::new(w.to_vec()).expect("projected weights are nonnegative");
                engine.eval(g, Weighting::Edge(&ew))
            }
        }
    };

    let mut sigma = params.sigma0;
    let mut trace = RunTrace {
        steps: Vec::new(),
        multiplier_updates: Vec::new(),
        steps_used: 0,
        converged: false,
        total_rounds: 0,
    };
    let mut eval = eval_at(engine, &w)?;
    let mut t_total = 0usize;

    'outer: loop {
        let mut streak_w = 0u32;
        let mut prev_lambda_n: Option<f64> = None;
        loop {
            let lambda_n = eval.top.value;
            let lambda_2 = eval.second.value;
            trace.steps.push(DescentStep {
                t: t_total,
                w: w.clone(),
                lambda_n,
                lambda_2,
                kappa: lambda_n / lambda_2,
                sigma,
                rounds: eval.rounds,
            });
            let grad = match mode {
                WeightMode::Node => node_lagrangian_gradient(
                    g,
                    &w,
                    &eval.top.vector,
                    &eval.second.vector,
                    lambda_2,
                    sigma,
                    params.rho,
                ),
                WeightMode::Edge => edge_lagrangian_gradient(
                    g,
                    &eval.top.vector,
                    &eval.second.vector,
                    lambda_2,
                    sigma,
                    params.rho,
                ),
            };
            let w_next = projected_step(&w, &grad, params.gamma);
            t_total += 1;
            let dw = w_next
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let dl = prev_lambda_n.map_or(f64::INFINITY, |p| (lambda_n - p).abs());
            prev_lambda_n = Some(lambda_n);
            w = w_next;
            eval = eval_at(engine, &w)?;
            streak_w = if dw / params.gamma <= params.eps_w {
                streak_w + 1
            } else {
                0
            };
            let lambda_settled = dl <= params.eps_lambda_n;
            if streak_w >= STALL_STREAK || lambda_settled || t_total >= params.t_max {
                break;
            }
        }
        let sigma_next = multiplier_update(sigma, params.rho, eval.second.value);
        trace.multiplier_updates.push(MultiplierUpdate {
            sigma: sigma_next,
            t: t_total,
        });
        let settled = (sigma_next - sigma).abs() <= params.eps_sigma;
        sigma = sigma_next;
        if settled {
            trace.converged = true;
            break 'outer;
        }
        if trace.multiplier_updates.len() >= params.k_max || t_total >= params.t_max {
            break 'outer;
        }
    }

    trace.steps.push(DescentStep {
        t: t_total,
        w: w.clone(),
        lambda_n: eval.top.value,
        lambda_2: eval.second.value,
        kappa: eval.top.value / eval.second.value,
        sigma,
        rounds: eval.rounds,
    });
    trace.steps_used = t_total;
    trace.total_rounds = engine.rounds_total();
    Ok(trace)
}
