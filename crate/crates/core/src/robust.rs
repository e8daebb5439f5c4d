//! Worst-case operation and investment under bounded forecast errors.
//!
//! The operator cost only grows when less renewable power is available, so
//! the adversarial error sits at the lower bound of every hour regardless of
//! the schedule. The robust problems are therefore the nominal ones solved on
//! profiles shifted to their lower bounds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dispatch::{solve_central, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{operator_cost, Capacity, DispatchSolution, MicrogridSpec, UnitCosts};
use crate::portfolio::{solve_ep1, InvestmentSolution};
use crate::renewables::RenewableProfile;
use crate::scalar::Scalar;
use crate::scenarios::{Scenario, ScenarioSet};

/// Hourly per-unit error bounds for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounds<F> {
    pub solar_min: Vec<F>,
    pub solar_max: Vec<F>,
    pub wind_min: Vec<F>,
    pub wind_max: Vec<F>,
}

impl<F: Scalar> ErrorBounds<F> {
    pub fn zero(horizon: usize) -> Self {
        let z = vec![F::zero(); horizon];
        ErrorBounds {
            solar_min: z.clone(),
            solar_max: z.clone(),
            wind_min: z.clone(),
            wind_max: z,
        }
    }

    /// Symmetric bounds of `fraction` times the predicted output.
    pub fn relative(scenario: &Scenario<F>, fraction: F) -> Result<Self> {
        if !(fraction >= F::zero()) || !fraction.is_finite() {
            return Err(Error::invalid(format!("error fraction {fraction} must be non-negative")));
        }
        let lo = |p: &RenewableProfile<F>| p.values().iter().map(|&v| -fraction * v).collect::<Vec<_>>();
        let hi = |p: &RenewableProfile<F>| p.values().iter().map(|&v| fraction * v).collect::<Vec<_>>();
        Ok(ErrorBounds {
            solar_min: lo(&scenario.solar),
            solar_max: hi(&scenario.solar),
            wind_min: lo(&scenario.wind),
            wind_max: hi(&scenario.wind),
        })
    }

    pub fn horizon(&self) -> usize {
        self.solar_min.len()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let lens = [&self.solar_min, &self.solar_max, &self.wind_min, &self.wind_max];
        if lens.iter().any(|v| v.len() != horizon) {
            return Err(Error::invalid(format!("error bounds must cover {horizon} hours")));
        }
        for t in 0..horizon {
            let ok = |lo: F, hi: F| lo.is_finite() && hi.is_finite() && lo <= hi;
            if !ok(self.solar_min[t], self.solar_max[t]) || !ok(self.wind_min[t], self.wind_max[t]) {
                return Err(Error::invalid(format!("hour {t}: error lower bound above upper bound")));
            }
        }
        Ok(())
    }
}

/// Error bounds for every scenario of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySet<F> {
    pub scenarios: Vec<ErrorBounds<F>>,
}

impl<F: Scalar> UncertaintySet<F> {
    pub fn relative(set: &ScenarioSet<F>, fraction: F) -> Result<Self> {
        Ok(UncertaintySet {
            scenarios: set
                .scenarios()
                .iter()
                .map(|s| ErrorBounds::relative(s, fraction))
                .collect::<Result<_>>()?,
        })
    }

    pub fn validate(&self, set: &ScenarioSet<F>) -> Result<()> {
        if self.scenarios.len() != set.len() {
            return Err(Error::invalid(format!(
                "{} error bounds for {} scenarios",
                self.scenarios.len(),
                set.len()
            )));
        }
        self.scenarios.iter().try_for_each(|b| b.validate(set.horizon()))
    }
}

/// The adversary's choice: the lower bound in every hour.
pub fn worst_case_errors<F: Scalar>(set: &UncertaintySet<F>, scenario: usize) -> Result<(Vec<F>, Vec<F>)> {
    let b = set
        .scenarios
        .get(scenario)
        .ok_or_else(|| Error::invalid(format!("no error bounds for scenario {scenario}")))?;
    Ok((b.solar_min.clone(), b.wind_min.clone()))
}

fn shifted<F: Scalar>(p: &RenewableProfile<F>, e: &[F]) -> RenewableProfile<F> {
    p.map_clamped(|t, v| v + e[t])
}

/// Scenario with realized output `clamp(eta + e, 0, 1)`.
pub fn adjusted_scenario<F: Scalar>(scenario: &Scenario<F>, solar_error: &[F], wind_error: &[F]) -> Result<Scenario<F>> {
    let t = scenario.horizon();
    if solar_error.len() != t || wind_error.len() != t {
        return Err(Error::invalid("error vectors must match the scenario horizon"));
    }
    Ok(Scenario {
        pi: scenario.pi,
        solar: shifted(&scenario.solar, solar_error),
        wind: shifted(&scenario.wind, wind_error),
    })
}

/// Operator cost once the realized renewable output is known.
pub fn actual_operator_cost<F: Scalar>(
    supply: &[F],
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    solar_error: &[F],
    wind_error: &[F],
    operator_cost_coefficient: F,
) -> Result<F> {
    let actual = adjusted_scenario(scenario, solar_error, wind_error)?;
    let cap = actual.renewable_cap(capacity.solar, capacity.wind);
    Ok(operator_cost(supply, &cap, operator_cost_coefficient))
}

/// Worst-case dispatch for one scenario.
pub fn solve_rp2<F: Scalar>(
    spec: &MicrogridSpec<F>,
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    bounds: &ErrorBounds<F>,
    cfg: &SolverConfig<F>,
) -> Result<DispatchSolution<F>> {
    bounds.validate(scenario.horizon())?;
    let adjusted = adjusted_scenario(scenario, &bounds.solar_min, &bounds.wind_min)?;
    solve_central(spec, capacity, &adjusted, cfg)
}

/// The scenario set every robust solve works on.
pub fn worst_case_set<F: Scalar>(set: &ScenarioSet<F>, uncertainty: &UncertaintySet<F>) -> Result<ScenarioSet<F>> {
    uncertainty.validate(set)?;
    let scenarios = set
        .scenarios()
        .iter()
        .zip(&uncertainty.scenarios)
        .map(|(s, b)| adjusted_scenario(s, &b.solar_min, &b.wind_min))
        .collect::<Result<Vec<_>>>()?;
    ScenarioSet::new(scenarios)
}

/// Worst-case investment.
pub fn solve_rp1<F: Scalar>(
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    uncertainty: &UncertaintySet<F>,
    costs: &UnitCosts<F>,
    budget: F,
    cfg: &SolverConfig<F>,
) -> Result<InvestmentSolution<F>> {
    let worst = worst_case_set(set, uncertainty)?;
    solve_ep1(spec, &worst, costs, budget, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint<F> {
    /// Error bound in percent of the predicted output.
    pub pct: F,
    pub investment_expense: F,
    pub overall_cost: F,
    pub capacity: Capacity<F>,
}

/// Robust investment for each symmetric relative error level (percent).
pub fn error_sweep<F: Scalar>(
    spec: &MicrogridSpec<F>,
    set: &ScenarioSet<F>,
    costs: &UnitCosts<F>,
    budget: F,
    pcts: &[F],
    cfg: &SolverConfig<F>,
) -> Result<Vec<ErrorPoint<F>>> {
    pcts.iter()
        .map(|&pct| {
            let u = UncertaintySet::relative(set, pct / F::lit(100.0))?;
            let s = solve_rp1(spec, set, &u, costs, budget, cfg)?;
            Ok(ErrorPoint {
                pct,
                investment_expense: s.capital_cost,
                overall_cost: s.overall_cost,
                capacity: s.capacity,
            })
        })
        .collect()
}

pub fn write_error_sweep_csv<F: Scalar, W: Write>(points: &[ErrorPoint<F>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pct", "investment_expense", "overall_cost"])?;
    for p in points {
        w.write_record([p.pct.to_string(), p.investment_expense.to_string(), p.overall_cost.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
