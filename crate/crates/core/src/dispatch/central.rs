use log::debug;

use crate::dispatch::projection::project_box_sum;
use crate::dispatch::SolverConfig;
use crate::error::Result;
use crate::formulation::{operation_block, CapacityMode, Layout, LoadMode, UserVars};
use crate::model::{operator_cost_gradient, Capacity, DispatchSolution, MicrogridSpec, StorageSpec};
use crate::qp::BlockQp;
use crate::scalar::Scalar;
use crate::scenarios::Scenario;

/// Solves the operating-cost problem for one scenario with full knowledge of
/// every user's constraints and preferences.
pub fn solve_central<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    cfg: &SolverConfig<F>,
) -> Result<DispatchSolution<F>> {
    solve_operation(spec, capacity, scenario, LoadMode::Elastic, cfg)
}

/// Same as [`solve_central`] with every user held at the preferred profile,
/// i.e. flat prices and no demand response.
pub fn solve_without_demand_response<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    cfg: &SolverConfig<F>,
) -> Result<DispatchSolution<F>> {
    solve_operation(spec, capacity, scenario, LoadMode::Preferred, cfg)
}

pub(crate) fn solve_operation<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    loads: LoadMode<'_, F>,
    cfg: &SolverConfig<F>,
) -> Result<DispatchSolution<F>> {
    spec.validate()?;
    capacity.validate()?;
    let (block, layout) = operation_block(spec, scenario, CapacityMode::Fixed(capacity), loads, F::one())?;
    let qp = BlockQp {
        blocks: vec![block],
        ..Default::default()
    };
    let sol = qp.solve(&cfg.ipm_settings())?;
    debug!(
        "central dispatch: {} interior-point iterations, objective {}",
        sol.iterations,
        sol.objective + layout.constant
    );
    let mut out = schedule_from_block(spec, capacity, scenario, &layout, &sol.blocks[0])?;
    out.iterations = sol.iterations;
    Ok(out)
}

/// Turns a block solution into a validated schedule, removing interior-point
/// round-off from the equality constraints.
pub(crate) fn schedule_from_block<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    layout: &Layout<F>,
    x: &[F],
) -> Result<DispatchSolution<F>> {
    let mut loads = layout.loads(x);
    for ((l, u), v) in loads.iter_mut().zip(&spec.users).zip(&layout.users) {
        if let UserVars::Var(_) = v {
            *l = project_box_sum(l, &u.min_load, &u.max_load, u.total)?;
        }
    }
    let (mut charge, mut discharge) = layout.storage_flows(x);
    polish_storage(&spec.storage, capacity.storage, &mut charge, &mut discharge);
    DispatchSolution::from_schedule(spec, capacity, scenario, loads, charge, discharge)
}

/// Clamps storage flows to their limits and restores the terminal
/// state-of-charge condition exactly.
pub(crate) fn polish_storage<F: Scalar>(st: &StorageSpec<F>, capacity: F, charge: &mut [F], discharge: &mut [F]) {
    if capacity <= F::zero() || !st.is_usable() {
        charge.iter_mut().for_each(|v| *v = F::zero());
        discharge.iter_mut().for_each(|v| *v = F::zero());
        return;
    }
    let cmax = capacity * st.max_charge_rate;
    let dmax = capacity * st.max_discharge_rate;
    for v in charge.iter_mut() {
        *v = v.max(F::zero()).min(cmax);
    }
    for v in discharge.iter_mut() {
        *v = v.max(F::zero()).min(dmax);
    }
    let excess = |c: &[F], d: &[F]| -> F { c.iter().zip(d).map(|(&a, &b)| st.net_energy(a, b)).sum() };
    let mut e = excess(charge, discharge);
    for t in (0..charge.len()).rev() {
        if e > F::zero() {
            let cut = charge[t].min(e / st.charge_efficiency);
            charge[t] = charge[t] - cut;
        } else if e < F::zero() {
            let cut = discharge[t].min(-e * st.discharge_efficiency);
            discharge[t] = discharge[t] - cut;
        } else {
            break;
        }
        e = excess(charge, discharge);
    }
}

/// Storage schedule minimizing the operator cost for a fixed aggregate
/// demand; returns zero flows when storage cannot lower the cost.
pub(crate) fn operator_storage<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    loads: &[Vec<F>],
    cfg: &SolverConfig<F>,
) -> Result<(Vec<F>, Vec<F>)> {
    let t_len = spec.horizon();
    let zeros = || (vec![F::zero(); t_len], vec![F::zero(); t_len]);
    if capacity.storage <= F::zero() || !spec.storage.is_usable() {
        return Ok(zeros());
    }
    let cap = scenario.renewable_cap(capacity.solar, capacity.wind);
    let demand: Vec<F> = (0..t_len)
        .map(|t| spec.inelastic_load[t] + loads.iter().map(|l| l[t]).sum::<F>())
        .collect();
    if operator_cost_gradient(&demand, &cap, spec.operator_cost)
        .iter()
        .all(|&p| p == F::zero())
    {
        return Ok(zeros());
    }
    let (block, layout) = operation_block(
        spec,
        scenario,
        CapacityMode::Fixed(capacity),
        LoadMode::Fixed(loads),
        F::one(),
    )?;
    let qp = BlockQp {
        blocks: vec![block],
        ..Default::default()
    };
    let sol = qp.solve(&cfg.ipm_settings())?;
    let (mut c, mut d) = layout.storage_flows(&sol.blocks[0]);
    polish_storage(&spec.storage, capacity.storage, &mut c, &mut d);
    Ok((c, d))
}
