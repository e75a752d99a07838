//! Small numeric helpers shared by the metric modules.

/// Nearest-rank percentile of an ascending slice: the value at rank
/// `ceil(p * n)` (1-based), clamped to `[1, n]`. `None` on empty input.
pub fn nearest_rank<T: Copy>(sorted: &[T], p: f64) -> Option<T> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    // Tolerance keeps products like 0.9 * 10 on the intended integer rank.
    let rank = libm::ceil(p * n as f64 - 1e-9).max(1.0) as usize;
    Some(sorted[rank.min(n) - 1])
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Correctly rounded sum (Shewchuk's exact partials). Unlike naive
/// summation the result does not depend on input order, and repeating every
/// input doubles the result exactly.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: alloc::vec::Vec<f64> = alloc::vec::Vec::new();
    for mut x in values {
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                core::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    // Round half-way cases using the sign of the next partial.
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Mean computed as `min + mean(v - min)`, clamped to `[min, max]`.
/// Constant inputs return their value exactly.
pub fn shifted_mean(values: impl IntoIterator<Item = f64> + Clone) -> Option<f64> {
    let (lo, hi) = values
        .clone()
        .into_iter()
        .fold(None, |acc: Option<(f64, f64)>, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })?;
    let offset = mean(values.into_iter().map(|v| v - lo))?;
    Some((lo + offset).clamp(lo, hi))
}

/// Median of an unsorted slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = alloc::vec::Vec::from(values);
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}
