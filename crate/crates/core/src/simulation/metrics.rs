use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grouping::Partition;

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index from the pair-counting contingency table. When the
/// chance-corrected denominator vanishes (both partitions trivial), returns 1
/// for identical groupings and 0 otherwise.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    if a.n_units() != b.n_units() {
        return Err(Error::DimensionMismatch {
            expected: a.n_units(),
            found: b.n_units(),
        });
    }
    let n = a.n_units();
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    for i in 0..n {
        *table.entry((a.label(i), b.label(i))).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = a.sizes().into_iter().map(choose2).sum();
    let sum_b: f64 = b.sizes().into_iter().map(choose2).sum();
    let total = choose2(n);
    let expected = if total > 0.0 {
        sum_a * sum_b / total
    } else {
        0.0
    };
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom.abs() < 1e-12 {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// Per coefficient `l`, `N^{-1} sum_i sqrt(T^{-1} sum_t (a_hat_il - a_il)^2)`
/// where unit `i` takes the path of its estimated group and the truth of its
/// true group. Paths are `T x p` matrices on a common grid.
pub fn rmse_paths(
    estimated: &[DMatrix<f64>],
    estimated_labels: &[usize],
    truth: &[DMatrix<f64>],
    true_labels: &[usize],
) -> Result<Vec<f64>> {
    if estimated_labels.len() != true_labels.len() {
        return Err(Error::DimensionMismatch {
            expected: true_labels.len(),
            found: estimated_labels.len(),
        });
    }
    let shape = truth.first().map(|m| m.shape()).unwrap_or((0, 0));
    for m in estimated.iter().chain(truth) {
        if m.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape.0,
                found: m.nrows(),
            });
        }
    }
    let (t, p) = shape;
    let n = true_labels.len();
    let mut out = vec![0.0; p];
    for (&e, &g) in estimated_labels.iter().zip(true_labels) {
        let est = &estimated[e];
        let tru = &truth[g];
        for (l, o) in out.iter_mut().enumerate() {
            let mse = (0..t)
                .map(|s| (est[(s, l)] - tru[(s, l)]).powi(2))
                .sum::<f64>()
                / t as f64;
            *o += mse.sqrt();
        }
    }
    out.iter_mut().for_each(|x| *x /= n as f64);
    Ok(out)
}
