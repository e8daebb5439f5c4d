//! Period-1 capacity investment.
//!
//! The investment and every scenario's operation are optimized together as a
//! single convex QP: the capacities are shared variables and each scenario
//! contributes one block weighted by its probability. The objective is
//! divided by the number of operating days to keep both parts on the same
//! scale.

use std::io::Write;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispatch::{solve_central, solve_without_demand_response, SolverConfig};
use crate::error::{Error, Result};
use crate::formulation::{operation_block, CapacityMode, LoadMode, SOLAR, STORAGE, WIND};
use crate::model::{Capacity, DispatchSolution, MicrogridSpec, UnitCosts};
use crate::qp::BlockQp;
use crate::scalar::Scalar;
use crate::scenarios::ScenarioSet;

/// Whether users respond to prices or stay at their preferred profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandResponse {
    #[default]
    Enabled,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct InvestmentSolution<F> {
    pub capacity: Capacity<F>,
    pub costs: UnitCosts<F>,
    /// Infinite when unlimited, written as `null`.
    #[serde(with = "unlimited")]
    pub budget: F,
    pub days: usize,
    pub demand_response: DemandResponse,
    /// Capital cost of the capacities (HKD).
    pub capital_cost: F,
    /// Probability-weighted daily operating cost (HKD/day).
    pub expected_operating_cost: F,
    /// Capital cost plus `days` times the expected daily operating cost.
    pub overall_cost: F,
    pub dispatch: Vec<DispatchSolution<F>>,
    pub iterations: usize,
}

mod unlimited {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::scalar::Scalar;

    pub fn serialize<F: Scalar, S: Serializer>(v: &F, s: S) -> Result<S::Ok, S::Error> {
        v.is_finite().then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, F: Scalar, D: Deserializer<'de>>(d: D) -> Result<F, D::Error> {
        Ok(Option::<F>::deserialize(d)?.unwrap_or_else(F::infinity))
    }
}

impl<F: Scalar> InvestmentSolution<F> {
    /// Investment expense, i.e. the capital cost.
    pub fn investment_expense(&self) -> F {
        self.capital_cost
    }
}

fn dispatch_all<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    set: &ScenarioSet<F>,
    mode: DemandResponse,
    cfg: &SolverConfig<F>,
) -> Result<Vec<DispatchSolution<F>>> {
    set.scenarios()
        .par_iter()
        .map(|sc| match mode {
            DemandResponse::Enabled => solve_central(spec, capacity, sc, cfg),
            DemandResponse::Disabled => solve_without_demand_response(spec, capacity, sc, cfg),
        })
        .collect()
}

fn expectation<F: Scalar>(set: &ScenarioSet<F>, dispatch: &[DispatchSolution<F>]) -> F {
    set.scenarios()
        .iter()
        .zip(dispatch)
        .map(|(sc, d)| sc.pi * d.objective)
        .sum()
}

/// Expected daily operating cost of a fixed portfolio.
pub fn expected_operating_cost<F: Scalar>(
    capacity: &Capacity<F>,
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    cfg: &SolverConfig<F>,
) -> Result<F> {
    set.validate()?;
    let d = dispatch_all(spec, capacity, set, DemandResponse::Enabled, cfg)?;
    Ok(expectation(set, &d))
}

/// Evaluates a fixed portfolio: capital cost, expected operation and the
/// per-scenario schedules.
pub fn evaluate_portfolio<F: Scalar>(
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    capacity: Capacity<F>,
    costs: &UnitCosts<F>,
    budget: F,
    mode: DemandResponse,
    cfg: &SolverConfig<F>,
) -> Result<InvestmentSolution<F>> {
    set.validate()?;
    let dispatch = dispatch_all(spec, &capacity, set, mode, cfg)?;
    let expected = expectation(set, &dispatch);
    let capital = costs.investment(&capacity);
    Ok(InvestmentSolution {
        capacity,
        costs: *costs,
        budget,
        days: spec.days,
        demand_response: mode,
        capital_cost: capital,
        expected_operating_cost: expected,
        overall_cost: capital + F::from_usize_lossy(spec.days) * expected,
        dispatch,
        iterations: 0,
    })
}

/// Optimal capacities under a budget, with users responding to prices.
pub fn solve_ep1<F: Scalar>(
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    costs: &UnitCosts<F>,
    budget: F,
    cfg: &SolverConfig<F>,
) -> Result<InvestmentSolution<F>> {
    solve_investment(spec, set, costs, budget, DemandResponse::Enabled, cfg)
}

pub fn solve_investment<F: Scalar>(
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    costs: &UnitCosts<F>,
    budget: F,
    mode: DemandResponse,
    cfg: &SolverConfig<F>,
) -> Result<InvestmentSolution<F>> {
    spec.validate()?;
    set.validate()?;
    costs.validate()?;
    if !(budget >= F::zero()) {
        return Err(Error::infeasible("budget", format!("budget {budget} is negative")));
    }
    if spec.days == 0 {
        return Err(Error::invalid("the operating horizon must cover at least one day"));
    }
    if budget == F::zero() {
        return evaluate_portfolio(spec, set, Capacity::zero(), costs, budget, mode, cfg);
    }

    let days = F::from_usize_lossy(spec.days);
    let load_mode = match mode {
        DemandResponse::Enabled => LoadMode::Elastic,
        DemandResponse::Disabled => LoadMode::Preferred,
    };
    let blocks = set
        .scenarios()
        .iter()
        .map(|sc| operation_block(spec, sc, CapacityMode::Variable, load_mode, sc.pi).map(|(b, _)| b))
        .collect::<Result<Vec<_>>>()?;

    let mut unit = vec![F::zero(); 3];
    unit[SOLAR] = costs.solar;
    unit[WIND] = costs.wind;
    unit[STORAGE] = costs.storage;
    let mut global_ineq: Vec<(Vec<(usize, F)>, F)> = (0..3).map(|j| (vec![(j, -F::one())], F::zero())).collect();
    if budget.is_finite() {
        global_ineq.push(((0..3).map(|j| (j, unit[j])).collect(), budget));
    }
    let qp = BlockQp {
        n_global: 3,
        global_lin: unit.iter().map(|&c| c / days).collect(),
        global_ineq,
        blocks,
    };
    let sol = qp.solve(&cfg.ipm_settings())?;

    // interior-point iterates sit strictly inside the bounds; snap tiny
    // capacities to zero and scale back onto the budget if round-off crossed it
    let scale = sol.global.iter().fold(F::one(), |m, &v| m.max(v.abs()));
    let snap = |v: F| if v < F::lit(1e-9) * scale { F::zero() } else { v };
    let mut capacity = Capacity {
        solar: snap(sol.global[SOLAR]),
        wind: snap(sol.global[WIND]),
        storage: snap(sol.global[STORAGE]),
    };
    let spend = costs.investment(&capacity);
    if budget.is_finite() && spend > budget {
        let f = budget / spend;
        capacity.solar = capacity.solar * f;
        capacity.wind = capacity.wind * f;
        capacity.storage = capacity.storage * f;
    }
    let mut out = evaluate_portfolio(spec, set, capacity, costs, budget, mode, cfg)?;
    out.iterations = sol.iterations;
    info!(
        "investment solved in {} iterations: solar {} wind {} storage {} overall {}",
        sol.iterations, capacity.solar, capacity.wind, capacity.storage, out.overall_cost
    );
    Ok(out)
}

/// Optimal portfolio when users keep their preferred profile.
pub fn solve_ep1_without_demand_response<F: Scalar>(
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    costs: &UnitCosts<F>,
    budget: F,
    cfg: &SolverConfig<F>,
) -> Result<InvestmentSolution<F>> {
    solve_investment(spec, set, costs, budget, DemandResponse::Disabled, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPoint<F> {
    pub budget: F,
    pub capacity: Capacity<F>,
    pub overall_cost: F,
}

pub fn budget_sweep<F: Scalar>(
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    costs: &UnitCosts<F>,
    budgets: &[F],
    mode: DemandResponse,
    cfg: &SolverConfig<F>,
) -> Result<Vec<BudgetPoint<F>>> {
    budgets
        .iter()
        .map(|&b| {
            let s = solve_investment(spec, set, costs, b, mode, cfg)?;
            Ok(BudgetPoint {
                budget: b,
                capacity: s.capacity,
                overall_cost: s.overall_cost,
            })
        })
        .collect()
}

pub fn write_budget_sweep_csv<F: Scalar, W: Write>(points: &[BudgetPoint<F>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["B", "alpha_s", "alpha_w", "alpha_e", "overall_cost"])?;
    for p in points {
        w.write_record([
            p.budget.to_string(),
            p.capacity.solar.to_string(),
            p.capacity.wind.to_string(),
            p.capacity.storage.to_string(),
            p.overall_cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
