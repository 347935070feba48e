use nalgebra::DMatrix;

use crate::error::{GuidanceError, Result};

/// Inverse-CDF selection: the first index `q` whose cumulative mass exceeds
/// `u`. If rounding leaves the total just below `u`, the last index carrying
/// mass is returned.
pub fn sample_transition(row: &[f64], u: f64) -> usize {
    sample_weighted(row.iter().copied().enumerate(), u)
}

/// [`sample_transition`] over a sparse row of `(index, probability)` pairs
/// given in ascending index order.
pub fn sample_weighted<I>(entries: I, u: f64) -> usize
where
    I: IntoIterator<Item = (usize, f64)>,
{
    let mut cumulative = 0.0;
    let mut last = 0;
    for (idx, p) in entries {
        if p <= 0.0 {
            continue;
        }
        cumulative += p;
        if u < cumulative {
            return idx;
        }
        last = idx;
    }
    last
}

/// One step of the distribution-level chain: `x · M`.
pub fn propagate_mean_field(x: &[f64], m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != x.len() || m.ncols() != x.len() {
        return Err(GuidanceError::DimensionMismatch {
            expected: x.len(),
            got: m.nrows().max(m.ncols()),
        });
    }
    let n = x.len();
    let mut out = vec![0.0; n];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (l, o) in out.iter_mut().enumerate() {
            *o += xi * m[(i, l)];
        }
    }
    Ok(out)
}

/// τ(M) = max_s max_{i,l} |M[i,s] − M[l,s]|: the largest spread of any
/// column.
pub fn ergodicity_coefficient(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|col| {
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Dobrushin coefficient τ₁(M) = ½·max_{i,l} Σ_s |M[i,s] − M[l,s]|.
/// Submultiplicative, and an upper bound on `ergodicity_coefficient`.
pub fn dobrushin_coefficient(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0_f64;
    for i in 0..n {
        for l in i + 1..n {
            let d: f64 = m.row(i).iter().zip(m.row(l).iter()).map(|(a, b)| (a - b).abs()).sum();
            best = best.max(0.5 * d);
        }
    }
    best
}
