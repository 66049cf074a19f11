//! Integer-order Bessel functions of the first kind.
//!
//! Small arguments use the power series directly; larger ones use Miller's
//! backward recurrence normalized by `J_0 + 2 Σ J_{2k} = 1`.

use thiserror::Error;

pub const MAX_ORDER: i32 = 60;
pub const MAX_ARGUMENT: f64 = 30.0;
const SERIES_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BesselError {
    #[error("order {0} outside supported range |l| <= {MAX_ORDER}")]
    OrderOutOfRange(i32),
    #[error("argument {0} outside supported range [0, {MAX_ARGUMENT}]")]
    ArgumentOutOfRange(f64),
}

/// `J_l(x)` for `|l| <= 60`, `0 <= x <= 30`.
pub fn bessel_j(order: i32, x: f64) -> Result<f64, BesselError> {
    if order.abs() > MAX_ORDER {
        return Err(BesselError::OrderOutOfRange(order));
    }
    if !(0.0..=MAX_ARGUMENT).contains(&x) {
        return Err(BesselError::ArgumentOutOfRange(x));
    }
    let l = order.unsigned_abs() as usize;
    let value = if x <= SERIES_LIMIT {
        series(l, x)
    } else {
        bessel_table(l, x)[l]
    };
    Ok(if order < 0 && l % 2 == 1 { -value } else { value })
}

/// `J_m(x)` for integers `|m| <= max_order`, indexed so that `J_m = table[m]`
/// for `m >= 0`; use [`signed`] for negative orders. No range limits.
pub(crate) fn bessel_table(max_order: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut t = vec![0.0; max_order + 1];
        t[0] = 1.0;
        return t;
    }
    let x = x.abs();
    if x <= SERIES_LIMIT {
        return (0..=max_order).map(|l| series(l, x)).collect();
    }
    let top = max_order as f64 + x;
    let mut start = (top + 30.0 + (40.0 * top).sqrt()) as usize;
    start += start % 2;

    let mut table = vec![0.0; max_order + 1];
    let mut above = 0.0;
    let mut current = 1e-30;
    let mut even_sum = 0.0;
    for k in (0..=start).rev() {
        if k <= max_order {
            table[k] = current;
        }
        if k % 2 == 0 && k > 0 {
            even_sum += current;
        }
        if k == 0 {
            break;
        }
        let below = 2.0 * k as f64 / x * current - above;
        above = current;
        current = below;
        if current.abs() > 1e250 {
            const SHRINK: f64 = 1e-250;
            current *= SHRINK;
            above *= SHRINK;
            even_sum *= SHRINK;
            for v in table.iter_mut() {
                *v *= SHRINK;
            }
        }
    }
    let norm = table[0] + 2.0 * even_sum;
    table.iter().map(|v| v / norm).collect()
}

/// Looks up `J_m` with `J_{-m} = (-1)^m J_m`.
pub(crate) fn signed(table: &[f64], order: i64) -> f64 {
    let m = order.unsigned_abs() as usize;
    let v = table[m];
    if order < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

fn series(l: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for j in 1..=l {
        term *= h / j as f64;
    }
    let mut sum = term;
    let h2 = h * h;
    let mut m = 0usize;
    loop {
        m += 1;
        term *= -h2 / (m as f64 * (m + l) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) && m as f64 > h {
            break;
        }
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// First positive zero of `J_0`, found by bisection.
pub fn bessel_j0_first_zero() -> f64 {
    let j0 = |x: f64| bessel_table(0, x)[0];
    let (mut lo, mut hi) = (2.0, 3.0);
    while hi - lo > 4.0 * f64::EPSILON {
        let mid = 0.5 * (lo + hi);
        if j0(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
