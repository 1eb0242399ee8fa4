use std::cmp::Ordering;

use super::correlation::check_pair;
use super::StatsError;
use crate::scalar::Scalar;

fn tied_pairs(run: u64) -> u64 {
    run * (run.saturating_sub(1)) / 2
}

/// Counts pairs tied within runs of equal values of `key` over a sorted slice.
fn count_ties<T: Scalar>(sorted: &[T]) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += tied_pairs(run);
            run = 1;
        }
    }
    total + tied_pairs(run)
}

/// Stable merge sort on `values` returning the number of strict inversions.
fn sort_counting_swaps<T: Scalar>(values: &mut [T], scratch: &mut Vec<T>) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut values[..mid], scratch);
    swaps += sort_counting_swaps(&mut values[mid..], scratch);

    scratch.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if values[j] < values[i] {
            scratch.push(values[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            scratch.push(values[i]);
            i += 1;
        }
    }
    scratch.extend_from_slice(&values[i..mid]);
    scratch.extend_from_slice(&values[j..n]);
    values.copy_from_slice(scratch);
    swaps
}

/// Kendall's tau-b with tie correction, O(n log n) (Knight's algorithm).
pub fn kendall_tau<T: Scalar>(x: &[T], y: &[T]) -> Result<T, StatsError> {
    check_pair(x, y, 2)?;
    let n = x.len() as u64;
    let n0 = n * (n - 1) / 2;

    let mut pairs: Vec<(T, T)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
    });

    // ties in x, and joint ties in (x, y)
    let xs: Vec<T> = pairs.iter().map(|p| p.0).collect();
    let n1 = count_ties(&xs);
    let mut n3 = 0u64;
    let mut run = 1u64;
    for w in pairs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            n3 += tied_pairs(run);
            run = 1;
        }
    }
    n3 += tied_pairs(run);

    let mut ys: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let mut scratch = Vec::with_capacity(ys.len());
    let swaps = sort_counting_swaps(&mut ys, &mut scratch);
    let n2 = count_ties(&ys);

    let untied_x = n0 - n1;
    let untied_y = n0 - n2;
    if untied_x == 0 || untied_y == 0 {
        return Err(StatsError::AllTied);
    }
    // concordant - discordant = n0 - n1 - n2 + n3 - 2 * swaps
    let numerator = n0 as f64 - n1 as f64 - n2 as f64 + n3 as f64 - 2.0 * swaps as f64;
    let denominator = (untied_x as f64).sqrt() * (untied_y as f64).sqrt();
    let tau = (numerator / denominator).clamp(-1.0, 1.0);
    Ok(T::of(tau))
}
