//! Builds the per-scenario operating problem as a QP block.
//!
//! Variables per block: elastic loads of every user that still has freedom,
//! charge and discharge flows when storage is usable, and the grid purchase
//! `q >= (Q - r_max)^+` which linearises the operator cost. Storage limits are
//! written in energy form (`alpha_e * SOC`) so that the capacity may itself be
//! a variable of the investment problem.

use crate::error::Result;
use crate::model::{Capacity, MicrogridSpec};
use crate::qp::{QpBlock, Row};
use crate::scalar::Scalar;
use crate::scenarios::Scenario;

pub(crate) const SOLAR: usize = 0;
pub(crate) const WIND: usize = 1;
pub(crate) const STORAGE: usize = 2;

#[derive(Debug, Clone, Copy)]
pub(crate) enum CapacityMode<'a, F> {
    Fixed(&'a Capacity<F>),
    /// Capacities are the global variables `[solar, wind, storage]`.
    Variable,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum LoadMode<'a, F> {
    Elastic,
    /// Loads pinned at the preferred profile (no demand response).
    Preferred,
    Fixed(&'a [Vec<F>]),
}

#[derive(Debug, Clone)]
pub(crate) enum UserVars<F> {
    Var(usize),
    Const(Vec<F>),
}

#[derive(Debug, Clone)]
pub(crate) struct Layout<F> {
    pub horizon: usize,
    pub users: Vec<UserVars<F>>,
    pub charge: Option<usize>,
    pub discharge: Option<usize>,
    /// Objective terms not carried by the QP variables (already weighted).
    pub constant: F,
}

impl<F: Scalar> Layout<F> {
    pub fn loads(&self, x: &[F]) -> Vec<Vec<F>> {
        let t = self.horizon;
        self.users
            .iter()
            .map(|u| match u {
                UserVars::Var(o) => x[*o..*o + t].to_vec(),
                UserVars::Const(v) => v.clone(),
            })
            .collect()
    }

    pub fn storage_flows(&self, x: &[F]) -> (Vec<F>, Vec<F>) {
        let t = self.horizon;
        let take = |o: Option<usize>| match o {
            Some(o) => x[o..o + t].iter().map(|v| v.max(F::zero())).collect(),
            None => vec![F::zero(); t],
        };
        (take(self.charge), take(self.discharge))
    }
}

/// Loads of a user whose feasible set is a single point, if it is one.
fn pinned_loads<F: Scalar>(min: &[F], max: &[F], total: F) -> Option<Vec<F>> {
    let slo: F = min.iter().copied().sum();
    let shi: F = max.iter().copied().sum();
    let tol = F::lit(1e-10) * (F::one() + total.abs());
    if total - slo <= tol {
        Some(min.to_vec())
    } else if shi - total <= tol {
        Some(max.to_vec())
    } else {
        None
    }
}

pub(crate) fn operation_block<F: Scalar>(
    spec: &MicrogridSpec<F>,
    scenario: &Scenario<F>,
    capacity: CapacityMode<'_, F>,
    loads: LoadMode<'_, F>,
    weight: F,
) -> Result<(QpBlock<F>, Layout<F>)> {
    spec.check_scenario(scenario)?;
    let t_len = spec.horizon();
    let two = F::lit(2.0);
    let fix_tol = F::lit(1e-12);

    let mut offset = 0;
    let mut users = Vec::with_capacity(spec.users.len());
    for (i, u) in spec.users.iter().enumerate() {
        let v = match loads {
            LoadMode::Fixed(l) => UserVars::Const(l[i].clone()),
            LoadMode::Preferred => UserVars::Const(u.preferred.clone()),
            LoadMode::Elastic => match pinned_loads(&u.min_load, &u.max_load, u.total) {
                Some(p) => UserVars::Const(p),
                None => {
                    let o = offset;
                    offset += t_len;
                    UserVars::Var(o)
                }
            },
        };
        users.push(v);
    }
    let storage_on = spec.storage.is_usable()
        && match capacity {
            CapacityMode::Fixed(c) => c.storage > F::zero(),
            CapacityMode::Variable => true,
        };
    let (charge, discharge) = if storage_on {
        let c = offset;
        offset += 2 * t_len;
        (Some(c), Some(c + t_len))
    } else {
        (None, None)
    };
    let grid = offset;
    offset += t_len;

    let mut block = QpBlock::new(offset);
    let mut constant = F::zero();
    // constant demand per hour: inelastic plus pinned elastic loads
    let mut base: Vec<F> = spec.inelastic_load.clone();

    for (u, v) in spec.users.iter().zip(&users) {
        match v {
            UserVars::Const(l) => {
                constant = constant
                    + weight
                        * u.discomfort
                        * l.iter()
                            .zip(&u.preferred)
                            .map(|(&x, &y)| (x - y) * (x - y))
                            .sum::<F>();
                for t in 0..t_len {
                    base[t] = base[t] + l[t];
                }
            }
            UserVars::Var(o) => {
                let mut sum_row = Vec::with_capacity(t_len);
                for t in 0..t_len {
                    let j = o + t;
                    block.quad[j] = two * weight * u.discomfort;
                    block.lin[j] = -two * weight * u.discomfort * u.preferred[t];
                    constant = constant + weight * u.discomfort * u.preferred[t] * u.preferred[t];
                    sum_row.push((j, F::one()));
                    let (lo, hi) = (u.min_load[t], u.max_load[t]);
                    if hi - lo <= fix_tol * (F::one() + hi.abs()) {
                        block.eq.push((Row::local(vec![(j, F::one())]), lo));
                    } else {
                        block.ineq.push((Row::local(vec![(j, -F::one())]), -lo));
                        block.ineq.push((Row::local(vec![(j, F::one())]), hi));
                    }
                }
                block.eq.push((Row::local(sum_row), u.total));
            }
        }
    }

    let st = &spec.storage;
    if let (Some(c), Some(d)) = (charge, discharge) {
        for t in 0..t_len {
            block.ineq.push((Row::local(vec![(c + t, -F::one())]), F::zero()));
            block.ineq.push((Row::local(vec![(d + t, -F::one())]), F::zero()));
            match capacity {
                CapacityMode::Fixed(cap) => {
                    block.ineq.push((Row::local(vec![(c + t, F::one())]), cap.storage * st.max_charge_rate));
                    block.ineq.push((Row::local(vec![(d + t, F::one())]), cap.storage * st.max_discharge_rate));
                }
                CapacityMode::Variable => {
                    block.ineq.push((
                        Row {
                            global: vec![(STORAGE, -st.max_charge_rate)],
                            local: vec![(c + t, F::one())],
                        },
                        F::zero(),
                    ));
                    block.ineq.push((
                        Row {
                            global: vec![(STORAGE, -st.max_discharge_rate)],
                            local: vec![(d + t, F::one())],
                        },
                        F::zero(),
                    ));
                }
            }
        }
        let energy = |upto: usize, sign: F| -> Vec<(usize, F)> {
            let mut e = Vec::with_capacity(2 * (upto + 1));
            for s in 0..=upto {
                e.push((c + s, sign * st.charge_efficiency));
                e.push((d + s, -sign / st.discharge_efficiency));
            }
            e
        };
        // state-of-charge window after hours 1..T-1; hour T is pinned by the
        // terminal condition
        for t in 0..t_len.saturating_sub(1) {
            let head = st.soc_max - st.soc_initial;
            let floor = st.soc_initial - st.soc_min;
            match capacity {
                CapacityMode::Fixed(cap) => {
                    block.ineq.push((Row::local(energy(t, F::one())), cap.storage * head));
                    block.ineq.push((Row::local(energy(t, -F::one())), cap.storage * floor));
                }
                CapacityMode::Variable => {
                    block.ineq.push((
                        Row {
                            global: vec![(STORAGE, -head)],
                            local: energy(t, F::one()),
                        },
                        F::zero(),
                    ));
                    block.ineq.push((
                        Row {
                            global: vec![(STORAGE, -floor)],
                            local: energy(t, -F::one()),
                        },
                        F::zero(),
                    ));
                }
            }
        }
        block.eq.push((Row::local(energy(t_len - 1, F::one())), F::zero()));
    }

    let cap_fixed = match capacity {
        CapacityMode::Fixed(cap) => Some(scenario.renewable_cap(cap.solar, cap.wind)),
        CapacityMode::Variable => None,
    };
    for t in 0..t_len {
        let q = grid + t;
        block.quad[q] = two * weight * spec.operator_cost;
        block.ineq.push((Row::local(vec![(q, -F::one())]), F::zero()));

        let mut supply: Vec<(usize, F)> = users
            .iter()
            .filter_map(|u| match u {
                UserVars::Var(o) => Some((o + t, F::one())),
                UserVars::Const(_) => None,
            })
            .collect();
        if let (Some(c), Some(d)) = (charge, discharge) {
            supply.push((c + t, F::one()));
            supply.push((d + t, -F::one()));
            // no export: Q >= 0
            let neg: Vec<(usize, F)> = supply.iter().map(|&(j, v)| (j, -v)).collect();
            block.ineq.push((Row::local(neg), base[t]));
        }
        let mut row = supply;
        row.push((q, -F::one()));
        match &cap_fixed {
            Some(cap) => block.ineq.push((Row::local(row), cap[t] - base[t])),
            None => block.ineq.push((
                Row {
                    global: vec![
                        (SOLAR, -scenario.solar.values()[t]),
                        (WIND, -scenario.wind.values()[t]),
                    ],
                    local: row,
                },
                -base[t],
            )),
        }
    }

    Ok((
        block,
        Layout {
            horizon: t_len,
            users,
            charge,
            discharge,
            constant,
        },
    ))
}
