use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Euclidean projection of `v` onto `{lo <= x <= hi, sum(x) = total}`.
///
/// The solution is `clamp(v - lambda, lo, hi)` for the scalar multiplier
/// `lambda` of the equality. `lambda` is bracketed by bisection and then
/// solved exactly on the set of coordinates left strictly inside their box.
pub fn project_box_sum<F: Scalar>(v: &[F], lo: &[F], hi: &[F], total: F) -> Result<Vec<F>> {
    let n = v.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::invalid("projection vectors differ in length"));
    }
    if n == 0 {
        return if total == F::zero() {
            Ok(Vec::new())
        } else {
            Err(Error::infeasible("total elastic demand", "no hours to place demand in"))
        };
    }
    if let Some(i) = (0..n).find(|&i| !(lo[i] <= hi[i])) {
        return Err(Error::infeasible(
            "load bounds",
            format!("coordinate {i}: lower {} above upper {}", lo[i], hi[i]),
        ));
    }
    let slo: F = lo.iter().copied().sum();
    let shi: F = hi.iter().copied().sum();
    let tol = F::lit(1e-9) * (F::one() + total.abs());
    if total < slo - tol || total > shi + tol {
        return Err(Error::infeasible(
            "total elastic demand",
            format!("total {total} outside [{slo}, {shi}]"),
        ));
    }
    if total <= slo {
        return Ok(lo.to_vec());
    }
    if total >= shi {
        return Ok(hi.to_vec());
    }

    let clamp = |lambda: F| -> Vec<F> {
        (0..n).map(|i| (v[i] - lambda).max(lo[i]).min(hi[i])).collect()
    };
    let sum_at = |lambda: F| -> F { clamp(lambda).into_iter().sum() };

    // sum_at is non-increasing in lambda
    let mut a = (0..n).map(|i| v[i] - hi[i]).fold(F::infinity(), F::min);
    let mut b = (0..n).map(|i| v[i] - lo[i]).fold(F::neg_infinity(), F::max);
    for _ in 0..200 {
        let mid = F::lit(0.5) * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if sum_at(mid) > total {
            a = mid;
        } else {
            b = mid;
        }
    }
    let lambda = F::lit(0.5) * (a + b);

    // exact multiplier on the active set identified by bisection
    let mut free_v = F::zero();
    let mut free_n = 0usize;
    let mut pinned = F::zero();
    for i in 0..n {
        let x = v[i] - lambda;
        if x <= lo[i] {
            pinned = pinned + lo[i];
        } else if x >= hi[i] {
            pinned = pinned + hi[i];
        } else {
            free_v = free_v + v[i];
            free_n += 1;
        }
    }
    let mut x = if free_n > 0 {
        let exact = (free_v - (total - pinned)) / F::from_usize_lossy(free_n);
        if exact >= a && exact <= b {
            clamp(exact)
        } else {
            clamp(lambda)
        }
    } else {
        clamp(lambda)
    };

    // spread any remaining round-off over coordinates with room
    let mut resid = total - x.iter().copied().sum::<F>();
    for i in 0..n {
        if resid == F::zero() {
            break;
        }
        let room = if resid > F::zero() { hi[i] - x[i] } else { lo[i] - x[i] };
        let d = if resid > F::zero() { resid.min(room) } else { resid.max(room) };
        x[i] = x[i] + d;
        resid = resid - d;
    }
    Ok(x)
}
