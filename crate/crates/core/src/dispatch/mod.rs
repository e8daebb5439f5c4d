//! Period-2 operation: central solve, pricing rule and the decentralized
//! price/response iteration.

mod central;
mod decentralized;
mod projection;

use serde::{Deserialize, Serialize};

use crate::model::{operator_cost_gradient, Capacity, MicrogridSpec};
use crate::qp::IpmSettings;
use crate::scalar::Scalar;
use crate::scenarios::Scenario;

pub use central::{solve_central, solve_without_demand_response};
pub use decentralized::{run_decentralized, user_best_response, write_trace_csv, DecentralizedRun, TraceEntry};
pub use projection::project_box_sum;

/// Settings for the dispatch solvers.
///
/// The decentralized iteration uses the diminishing step
/// `step(k) = step_size / (1 + k / step_decay)`, which tends to zero with a
/// divergent sum for any positive `step_decay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig<F> {
    /// Initial step; `None` picks `1 / (2 max beta_i + 2 beta_o N)`.
    pub step_size: Option<F>,
    pub step_decay: F,
    /// Stopping tolerance on successive price vectors.
    pub tolerance: F,
    pub max_iterations: usize,
    /// Relative accuracy of the interior-point solves; `None` for the
    /// precision-dependent default.
    pub qp_tolerance: Option<F>,
}

impl<F: Scalar> Default for SolverConfig<F> {
    fn default() -> Self {
        SolverConfig {
            step_size: None,
            step_decay: F::lit(100.0),
            tolerance: F::lit(1e-5),
            max_iterations: 50_000,
            qp_tolerance: None,
        }
    }
}

impl<F: Scalar> SolverConfig<F> {
    pub fn initial_step(&self, spec: &MicrogridSpec<F>) -> F {
        self.step_size.unwrap_or_else(|| {
            let n = F::from_usize_lossy(spec.users.len());
            let two = F::lit(2.0);
            F::one() / (two * spec.max_discomfort() + two * spec.operator_cost * n)
        })
    }

    pub fn step(&self, initial: F, k: usize) -> F {
        initial / (F::one() + F::from_usize_lossy(k) / self.step_decay)
    }

    pub(crate) fn ipm_settings(&self) -> IpmSettings<F> {
        let mut s = IpmSettings::default();
        if let Some(t) = self.qp_tolerance {
            s.tol = t;
        }
        s
    }
}

/// Day-ahead prices implied by a supply schedule: the marginal grid cost
/// where supply exceeds renewables, zero elsewhere (including the kink).
pub fn price_from_supply<F: Scalar>(
    supply: &[F],
    capacity: &Capacity<F>,
    scenario: &Scenario<F>,
    operator_cost: F,
) -> Vec<F> {
    let cap = scenario.renewable_cap(capacity.solar, capacity.wind);
    operator_cost_gradient(supply, &cap, operator_cost)
}
