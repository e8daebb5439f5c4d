//! Microgrid domain model: users, storage, capacities, cost primitives and
//! the constraint checker every emitted schedule is run through.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenarios::Scenario;

/// Operator cost coefficient used in the reference study (HKD per kW²).
pub const DEFAULT_OPERATOR_COST: f64 = 0.005;
/// Discomfort coefficient used in the reference study.
pub const DEFAULT_DISCOMFORT: f64 = 0.5;
pub const DEFAULT_SOLAR_COST: f64 = 12_480.0;
pub const DEFAULT_WIND_COST: f64 = 7_800.0;
pub const DEFAULT_STORAGE_COST: f64 = 1_950.0;
/// Ten years of daily operation.
pub const DEFAULT_DAYS: usize = 3650;

/// Relative slack used when checking model feasibility conditions.
const FEAS_TOL: f64 = 1e-9;

/// One user's elastic load: hourly bounds, daily total, preferred profile and
/// discomfort coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec<F> {
    pub min_load: Vec<F>,
    pub max_load: Vec<F>,
    pub total: F,
    pub preferred: Vec<F>,
    pub discomfort: F,
}

impl<F: Scalar> UserSpec<F> {
    pub fn horizon(&self) -> usize {
        self.min_load.len()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.min_load.len() != horizon
            || self.max_load.len() != horizon
            || self.preferred.len() != horizon
        {
            return Err(Error::invalid(format!(
                "user vectors must have length {horizon} (got {}/{}/{})",
                self.min_load.len(),
                self.max_load.len(),
                self.preferred.len()
            )));
        }
        if !(self.discomfort >= F::zero()) {
            return Err(Error::invalid("discomfort coefficient must be non-negative"));
        }
        for t in 0..horizon {
            let (lo, hi) = (self.min_load[t], self.max_load[t]);
            if !(lo >= F::zero()) || !(lo <= hi) || !hi.is_finite() {
                return Err(Error::infeasible(
                    "load bounds",
                    format!("hour {t}: need 0 <= min ({lo}) <= max ({hi})"),
                ));
            }
        }
        let slo: F = self.min_load.iter().copied().sum();
        let shi: F = self.max_load.iter().copied().sum();
        let tol = F::lit(FEAS_TOL) * (F::one() + self.total.abs());
        if self.total < slo - tol || self.total > shi + tol {
            return Err(Error::infeasible(
                "total elastic demand",
                format!("total {} outside [{slo}, {shi}]", self.total),
            ));
        }
        for t in 0..horizon {
            let y = self.preferred[t];
            if y < self.min_load[t] - tol || y > self.max_load[t] + tol {
                return Err(Error::invalid(format!(
                    "preferred load {y} at hour {t} outside its bounds"
                )));
            }
        }
        let sy: F = self.preferred.iter().copied().sum();
        if (sy - self.total).abs() > tol {
            return Err(Error::invalid(format!(
                "preferred loads sum to {sy}, expected the total elastic demand {}",
                self.total
            )));
        }
        Ok(())
    }
}

/// Battery physics per kWh of installed capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageSpec<F> {
    pub max_charge_rate: F,
    pub max_discharge_rate: F,
    pub charge_efficiency: F,
    pub discharge_efficiency: F,
    pub soc_min: F,
    pub soc_max: F,
    pub soc_initial: F,
}

impl<F: Scalar> Default for StorageSpec<F> {
    fn default() -> Self {
        StorageSpec {
            max_charge_rate: F::lit(0.25),
            max_discharge_rate: F::lit(0.25),
            charge_efficiency: F::lit(0.95),
            discharge_efficiency: F::lit(0.95),
            soc_min: F::lit(0.2),
            soc_max: F::one(),
            soc_initial: F::lit(0.5),
        }
    }
}

impl<F: Scalar> StorageSpec<F> {
    /// Sets `soc_min = 1 - dod`.
    pub fn with_max_depth_of_discharge(mut self, dod: F) -> Self {
        self.soc_min = F::one() - dod;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let z = F::zero();
        let o = F::one();
        if !(self.max_charge_rate > z && self.max_discharge_rate > z) {
            return Err(Error::invalid("storage charge/discharge rates must be positive"));
        }
        if !(self.charge_efficiency > z && self.charge_efficiency <= o)
            || !(self.discharge_efficiency > z && self.discharge_efficiency <= o)
        {
            return Err(Error::invalid("storage efficiencies must lie in (0, 1]"));
        }
        if !(z <= self.soc_min
            && self.soc_min <= self.soc_initial
            && self.soc_initial <= self.soc_max
            && self.soc_max <= o)
        {
            return Err(Error::invalid(format!(
                "need 0 <= soc_min ({}) <= soc_initial ({}) <= soc_max ({}) <= 1",
                self.soc_min, self.soc_initial, self.soc_max
            )));
        }
        Ok(())
    }

    /// True when the state-of-charge window leaves room to move energy.
    pub fn is_usable(&self) -> bool {
        self.soc_max - self.soc_min > F::lit(1e-12)
    }

    /// Net energy added to the battery by charging `rc` and discharging `rd`.
    pub fn net_energy(&self, rc: F, rd: F) -> F {
        self.charge_efficiency * rc - rd / self.discharge_efficiency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrogridSpec<F> {
    pub users: Vec<UserSpec<F>>,
    /// Aggregate inelastic load per hour (kW).
    pub inelastic_load: Vec<F>,
    pub operator_cost: F,
    pub days: usize,
    pub storage: StorageSpec<F>,
}

impl<F: Scalar> MicrogridSpec<F> {
    pub fn horizon(&self) -> usize {
        self.inelastic_load.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon();
        if t == 0 {
            return Err(Error::invalid("horizon must be at least one hour"));
        }
        if self.days == 0 {
            return Err(Error::invalid("day count must be at least one"));
        }
        if !(self.operator_cost > F::zero()) {
            return Err(Error::invalid("operator cost coefficient must be positive"));
        }
        if let Some(b) = self.inelastic_load.iter().find(|b| !(**b >= F::zero()) || !b.is_finite()) {
            return Err(Error::invalid(format!("inelastic load {b} must be non-negative")));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.validate(t).map_err(|e| match e {
                Error::Infeasible { constraint, detail } => Error::Infeasible {
                    constraint,
                    detail: format!("user {i}: {detail}"),
                },
                Error::Invalid(m) => Error::Invalid(format!("user {i}: {m}")),
                other => other,
            })?;
        }
        self.storage.validate()
    }

    pub fn check_scenario(&self, scenario: &Scenario<F>) -> Result<()> {
        scenario.validate()?;
        if scenario.horizon() != self.horizon() {
            return Err(Error::invalid(format!(
                "scenario horizon {} does not match model horizon {}",
                scenario.horizon(),
                self.horizon()
            )));
        }
        Ok(())
    }

    pub fn max_discomfort(&self) -> F {
        self.users
            .iter()
            .map(|u| u.discomfort)
            .fold(F::zero(), F::max)
    }
}

/// Installed capacities: solar and wind in kW, storage in kWh.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Capacity<F> {
    pub solar: F,
    pub wind: F,
    pub storage: F,
}

impl<F: Scalar> Capacity<F> {
    pub fn zero() -> Self {
        Capacity {
            solar: F::zero(),
            wind: F::zero(),
            storage: F::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("solar", self.solar), ("wind", self.wind), ("storage", self.storage)] {
            if !(v >= F::zero()) || !v.is_finite() {
                return Err(Error::infeasible(
                    "non-negative capacity",
                    format!("{name} capacity {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Capital cost per unit of capacity (HKD/kW, HKD/kWh).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCosts<F> {
    pub solar: F,
    pub wind: F,
    pub storage: F,
}

impl<F: Scalar> Default for UnitCosts<F> {
    fn default() -> Self {
        UnitCosts {
            solar: F::lit(DEFAULT_SOLAR_COST),
            wind: F::lit(DEFAULT_WIND_COST),
            storage: F::lit(DEFAULT_STORAGE_COST),
        }
    }
}

impl<F: Scalar> UnitCosts<F> {
    pub fn investment(&self, c: &Capacity<F>) -> F {
        self.solar * c.solar + self.wind * c.wind + self.storage * c.storage
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.solar > F::zero() && self.wind > F::zero() && self.storage > F::zero()) {
            return Err(Error::invalid("unit investment costs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Portfolio<F> {
    pub capacity: Capacity<F>,
    pub costs: UnitCosts<F>,
    pub budget: F,
}

impl<F: Scalar> Portfolio<F> {
    pub fn capital_cost(&self) -> F {
        self.costs.investment(&self.capacity)
    }

    pub fn validate(&self) -> Result<()> {
        self.capacity.validate()?;
        let spend = self.capital_cost();
        let tol = F::lit(1e-9) * (F::one() + self.budget.abs());
        if spend > self.budget + tol {
            return Err(Error::infeasible(
                "budget",
                format!("investment {spend} exceeds budget {}", self.budget),
            ));
        }
        Ok(())
    }
}

/// Grid-purchase cost `beta_o * sum ((Q - r_max)^+)^2`.
pub fn operator_cost<F: Scalar>(supply: &[F], renewable_cap: &[F], beta_o: F) -> F {
    beta_o
        * supply
            .iter()
            .zip(renewable_cap)
            .map(|(&q, &r)| {
                let d = (q - r).pos();
                d * d
            })
            .sum::<F>()
}

/// Gradient of [`operator_cost`] with respect to the supply vector.
pub fn operator_cost_gradient<F: Scalar>(supply: &[F], renewable_cap: &[F], beta_o: F) -> Vec<F> {
    supply
        .iter()
        .zip(renewable_cap)
        .map(|(&q, &r)| F::lit(2.0) * beta_o * (q - r).pos())
        .collect()
}

/// Operator cost evaluated for a portfolio and scenario.
pub fn scenario_operator_cost<F: Scalar>(
    supply: &[F],
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    spec: &MicrogridSpec<F>,
) -> F {
    let cap = scenario.renewable_cap(capacity.solar, capacity.wind);
    operator_cost(supply, &cap, spec.operator_cost)
}

pub fn discomfort_cost<F: Scalar>(load: &[F], user: &UserSpec<F>) -> F {
    user.discomfort
        * load
            .iter()
            .zip(&user.preferred)
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<F>()
}

/// Merit-order split of supply into renewable use and grid purchase.
pub fn split_supply<F: Scalar>(supply: &[F], renewable_cap: &[F]) -> Result<(Vec<F>, Vec<F>)> {
    if supply.len() != renewable_cap.len() {
        return Err(Error::invalid("supply and renewable vectors differ in length"));
    }
    if let Some(q) = supply.iter().find(|q| !(**q >= F::zero())) {
        return Err(Error::invalid(format!("aggregate supply {q} is negative")));
    }
    let r = supply
        .iter()
        .zip(renewable_cap)
        .map(|(&q, &cap)| q.min(cap.max(F::zero())))
        .collect::<Vec<_>>();
    let g = supply.iter().zip(&r).map(|(&q, &r)| q - r).collect();
    Ok((r, g))
}

/// State of charge after each hour, starting from `soc_initial`.
pub fn soc_trajectory<F: Scalar>(
    charge: &[F],
    discharge: &[F],
    capacity: F,
    storage: &StorageSpec<F>,
) -> Result<Vec<F>> {
    if charge.len() != discharge.len() {
        return Err(Error::invalid("charge and discharge vectors differ in length"));
    }
    if capacity <= F::zero() {
        if charge.iter().chain(discharge).any(|&v| v != F::zero()) {
            return Err(Error::Degenerate(
                "storage flows are non-zero but storage capacity is zero".into(),
            ));
        }
        return Ok(vec![storage.soc_initial; charge.len()]);
    }
    let mut soc = storage.soc_initial;
    Ok(charge
        .iter()
        .zip(discharge)
        .map(|(&c, &d)| {
            soc = soc + storage.net_energy(c, d) / capacity;
            soc
        })
        .collect())
}

/// Hourly schedule and prices for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution<F> {
    /// Aggregate supply `Q` (kW).
    pub supply: Vec<F>,
    /// Elastic load per user and hour.
    pub loads: Vec<Vec<F>>,
    pub charge: Vec<F>,
    pub discharge: Vec<F>,
    pub soc_initial: F,
    /// State of charge at the end of each hour.
    pub soc: Vec<F>,
    /// Day-ahead prices (HKD/kWh).
    pub prices: Vec<F>,
    pub renewable_cap: Vec<F>,
    /// Renewable power used.
    pub renewable: Vec<F>,
    /// Power bought from the main grid.
    pub grid: Vec<F>,
    pub operator_cost: F,
    pub discomfort_cost: F,
    pub objective: F,
    pub converged: bool,
    pub iterations: usize,
}

impl<F: Scalar> DispatchSolution<F> {
    /// Derives supply, prices, merit-order split and costs from a schedule.
    pub fn from_schedule(
        spec: &MicrogridSpec<F>,
        capacity: &Capacity<F>,
        scenario: &Scenario<F>,
        loads: Vec<Vec<F>>,
        charge: Vec<F>,
        discharge: Vec<F>,
    ) -> Result<Self> {
        let t_len = spec.horizon();
        let cap = scenario.renewable_cap(capacity.solar, capacity.wind);
        let supply: Vec<F> = (0..t_len)
            .map(|t| {
                let x: F = loads.iter().map(|l| l[t]).sum();
                let q = spec.inelastic_load[t] + x + charge[t] - discharge[t];
                // round-off below zero
                if q < F::zero() && q > -F::lit(1e-9) * (F::one() + x) {
                    F::zero()
                } else {
                    q
                }
            })
            .collect();
        let soc = soc_trajectory(&charge, &discharge, capacity.storage, &spec.storage)?;
        let prices = operator_cost_gradient(&supply, &cap, spec.operator_cost);
        let (renewable, grid) = split_supply(&supply, &cap)?;
        let operator_cost = operator_cost(&supply, &cap, spec.operator_cost);
        let discomfort_cost = loads
            .iter()
            .zip(&spec.users)
            .map(|(l, u)| discomfort_cost(l, u))
            .sum::<F>();
        Ok(DispatchSolution {
            supply,
            loads,
            charge,
            discharge,
            soc_initial: spec.storage.soc_initial,
            soc,
            prices,
            renewable_cap: cap,
            renewable,
            grid,
            operator_cost,
            discomfort_cost,
            objective: operator_cost + discomfort_cost,
            converged: true,
            iterations: 0,
        })
    }

    pub fn aggregate_load(&self) -> Vec<F> {
        (0..self.supply.len())
            .map(|t| self.loads.iter().map(|l| l[t]).sum())
            .collect()
    }
}

/// A constraint that a schedule fails to meet.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.constraint, self.detail)
    }
}

/// Re-checks a schedule against load, storage, balance and pricing
/// constraints. `tol` is absolute; the terminal state of charge is held to
/// `soc_tol`.
pub fn check_dispatch<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    sol: &DispatchSolution<F>,
    tol: F,
    soc_tol: F,
) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut push = |constraint: &'static str, detail: String| v.push(Violation { constraint, detail });
    let t_len = spec.horizon();
    let lens_ok = sol.supply.len() == t_len
        && sol.charge.len() == t_len
        && sol.discharge.len() == t_len
        && sol.soc.len() == t_len
        && sol.prices.len() == t_len
        && sol.loads.len() == spec.users.len()
        && sol.loads.iter().all(|l| l.len() == t_len);
    if !lens_ok {
        push("shape", "solution vectors do not match the model horizon".into());
        return v;
    }
    for (i, (u, l)) in spec.users.iter().zip(&sol.loads).enumerate() {
        for t in 0..t_len {
            if l[t] < u.min_load[t] - tol || l[t] > u.max_load[t] + tol {
                push(
                    "load bounds",
                    format!("user {i} hour {t}: {} outside [{}, {}]", l[t], u.min_load[t], u.max_load[t]),
                );
            }
        }
        let s: F = l.iter().copied().sum();
        if (s - u.total).abs() > tol {
            push("total elastic demand", format!("user {i}: {s} != {}", u.total));
        }
    }
    let st = &spec.storage;
    let a = capacity.storage;
    for t in 0..t_len {
        if sol.charge[t] < -tol || sol.charge[t] > a * st.max_charge_rate + tol {
            push("charge limit", format!("hour {t}: {}", sol.charge[t]));
        }
        if sol.discharge[t] < -tol || sol.discharge[t] > a * st.max_discharge_rate + tol {
            push("discharge limit", format!("hour {t}: {}", sol.discharge[t]));
        }
    }
    match soc_trajectory(&sol.charge, &sol.discharge, a, st) {
        Ok(soc) => {
            for t in 0..t_len {
                if (soc[t] - sol.soc[t]).abs() > tol {
                    push("storage dynamics", format!("hour {t}: {} vs {}", sol.soc[t], soc[t]));
                }
                if soc[t] < st.soc_min - tol || soc[t] > st.soc_max + tol {
                    push("state-of-charge bounds", format!("hour {t}: {}", soc[t]));
                }
            }
            let last = soc[t_len - 1];
            if (last - st.soc_initial).abs() > soc_tol || (sol.soc_initial - st.soc_initial).abs() > soc_tol {
                push(
                    "terminal state of charge",
                    format!("end {} vs initial {}", last, st.soc_initial),
                );
            }
        }
        Err(e) => push("storage dynamics", e.to_string()),
    }
    let cap = scenario.renewable_cap(capacity.solar, capacity.wind);
    let agg = sol.aggregate_load();
    for t in 0..t_len {
        let q = sol.supply[t];
        let balance = spec.inelastic_load[t] + agg[t] + sol.charge[t] - sol.discharge[t];
        if (q - balance).abs() > tol || q < -tol {
            push("power balance", format!("hour {t}: supply {q} vs demand {balance}"));
        }
        let r = sol.renewable[t];
        let g = sol.grid[t];
        if r < -tol || r > cap[t] + tol || g < -tol || (r + g - q).abs() > tol {
            push("supply split", format!("hour {t}: r={r} q={g} Q={q} r_max={}", cap[t]));
        }
        let p = F::lit(2.0) * spec.operator_cost * (q - cap[t]).pos();
        if (sol.prices[t] - p).abs() > tol {
            push("pricing rule", format!("hour {t}: price {} vs {p}", sol.prices[t]));
        }
    }
    v
}

pub fn check_investment<F: Scalar>(capacity: &Capacity<F>, costs: &UnitCosts<F>, budget: F, tol: F) -> Vec<Violation> {
    let mut v = Vec::new();
    for (name, c) in [("solar", capacity.solar), ("wind", capacity.wind), ("storage", capacity.storage)] {
        if c < -tol {
            v.push(Violation {
                constraint: "non-negative capacity",
                detail: format!("{name}: {c}"),
            });
        }
    }
    let spend = costs.investment(capacity);
    if spend > budget + tol * (F::one() + budget.abs()) {
        v.push(Violation {
            constraint: "budget",
            detail: format!("{spend} > {budget}"),
        });
    }
    v
}
