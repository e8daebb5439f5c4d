use std::io::Write;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::dispatch::central::operator_storage;
use crate::dispatch::projection::project_box_sum;
use crate::dispatch::SolverConfig;
use crate::error::{Error, Result};
use crate::model::{Capacity, DispatchSolution, MicrogridSpec, UserSpec};
use crate::scalar::{norm2, Scalar};
use crate::scenarios::Scenario;

/// One projected-gradient update of a user's elastic load given the
/// broadcast prices.
pub fn user_best_response<F: Scalar>(user: &UserSpec<F>, prices: &[F], x_prev: &[F], step: F) -> Result<Vec<F>> {
    let t_len = user.horizon();
    if prices.len() != t_len || x_prev.len() != t_len {
        return Err(Error::invalid("price and load vectors must match the user horizon"));
    }
    let two = F::lit(2.0);
    let v: Vec<F> = (0..t_len)
        .map(|t| {
            let grad = two * user.discomfort * (x_prev[t] - user.preferred[t]) + prices[t];
            x_prev[t] - step * grad
        })
        .collect();
    project_box_sum(&v, &user.min_load, &user.max_load, user.total)
}

/// Aggregate quantities exchanged in one pricing round. Holds no per-user
/// data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry<F> {
    pub k: usize,
    /// Euclidean norm of the price change from the previous round.
    pub price_delta: F,
    /// Euclidean norm of the aggregate elastic load change.
    pub load_delta: F,
    pub objective: F,
    pub prices: Vec<F>,
    pub aggregate_load: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct DecentralizedRun<F> {
    pub solution: DispatchSolution<F>,
    pub trace: Vec<TraceEntry<F>>,
}

/// Simulates the price/response loop: the operator prices the aggregate
/// demand (scheduling storage as the cost minimizer for that demand) and
/// every user answers with a projected-gradient step.
///
/// Stops when both the price vector and the aggregate load have settled. A
/// run that hits `max_iterations` returns the best iterate with
/// `converged == false`.
pub fn run_decentralized<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    cfg: &SolverConfig<F>,
) -> Result<DecentralizedRun<F>> {
    spec.validate()?;
    capacity.validate()?;
    spec.check_scenario(scenario)?;
    if !(cfg.tolerance > F::zero()) || cfg.max_iterations == 0 || !(cfg.step_decay > F::zero()) {
        return Err(Error::invalid("solver tolerance, decay and iteration limit must be positive"));
    }
    let gamma0 = cfg.initial_step(spec);
    if !(gamma0 > F::zero()) || !gamma0.is_finite() {
        return Err(Error::invalid(format!("initial step {gamma0} must be positive")));
    }
    let t_len = spec.horizon();
    let load_tol = cfg.tolerance / (F::lit(2.0) * spec.operator_cost.max(F::epsilon()));

    let mut loads: Vec<Vec<F>> = spec.users.iter().map(|u| u.preferred.clone()).collect();
    let mut trace = Vec::new();
    let mut best: Option<DispatchSolution<F>> = None;
    let mut prev: Option<(Vec<F>, Vec<F>)> = None;

    for k in 0..cfg.max_iterations {
        let (charge, discharge) = operator_storage(spec, capacity, scenario, &loads, cfg)?;
        let mut sol = DispatchSolution::from_schedule(spec, capacity, scenario, loads.clone(), charge, discharge)?;
        sol.iterations = k + 1;
        let agg = sol.aggregate_load();
        let (price_delta, load_delta) = match &prev {
            Some((p, l)) => (
                norm2(&diff(&sol.prices, p)),
                norm2(&diff(&agg, l)),
            ),
            None => (F::infinity(), F::infinity()),
        };
        trace.push(TraceEntry {
            k,
            price_delta,
            load_delta,
            objective: sol.objective,
            prices: sol.prices.clone(),
            aggregate_load: agg.clone(),
        });
        debug!("round {k}: objective {} price delta {}", sol.objective, price_delta);

        if best.as_ref().map_or(true, |b| sol.objective <= b.objective) {
            best = Some(sol.clone());
        }
        if price_delta <= cfg.tolerance && load_delta <= load_tol {
            info!("decentralized dispatch converged after {} rounds", k + 1);
            return Ok(DecentralizedRun { solution: sol, trace });
        }

        let step = cfg.step(gamma0, k);
        for (x, u) in loads.iter_mut().zip(&spec.users) {
            *x = user_best_response(u, &sol.prices, x, step)?;
        }
        prev = Some((sol.prices, agg));
    }

    warn!("decentralized dispatch stopped at the iteration limit {}", cfg.max_iterations);
    let mut sol = best.expect("at least one round runs");
    sol.converged = false;
    debug_assert_eq!(sol.supply.len(), t_len);
    Ok(DecentralizedRun { solution: sol, trace })
}

fn diff<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Writes the `k,price_delta,objective` trace CSV. The first round has no
/// predecessor and reports an empty price delta.
pub fn write_trace_csv<F: Scalar, W: Write>(trace: &[TraceEntry<F>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "price_delta", "objective"])?;
    for e in trace {
        let delta = if e.price_delta.is_finite() {
            format!("{}", e.price_delta)
        } else {
            String::new()
        };
        w.write_record([e.k.to_string(), delta, format!("{}", e.objective)])?;
    }
    w.flush()?;
    Ok(())
}
