//! Coordinate-wise trimmed mean of gradient vectors.
//!
//! For `f > 0` each coordinate is handled independently: the `n` values are
//! copied into a scratch buffer, two worst-case linear-time selections move
//! ranks `[f, n − f)` into the middle of the buffer, and the middle is summed
//! with a correctly rounded accumulator before dividing by `n − 2f`.
//!
//! Ties need no tie-breaking rule. Whichever of several equal values lands
//! in the middle block, the multiset of middle values is the same, so the sum
//! is too. Because the sum is correctly rounded it also does not depend on
//! the order selection leaves the middle block in, which makes the result
//! bit-identical to sorting the column and averaging the middle slice.
//!
//! `f = 0` is the plain arithmetic mean, accumulated left to right in input
//! order. This matches the batch gradient of the loss module bit for bit.

use crate::error::{invalid, Result};
use crate::numkit::{ExactSum, ParamVector};

/// Middle-block placement strategy. `Sort` exists for differential testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrimKernel {
    #[default]
    Select,
    Sort,
}

/// Coordinate-wise arithmetic mean, summed in input order.
pub fn mean(vectors: &[ParamVector]) -> Result<ParamVector> {
    trimmed_mean(vectors, 0)
}

/// Coordinate-wise mean of all but the `f` smallest and `f` largest values.
pub fn trimmed_mean(vectors: &[ParamVector], f: usize) -> Result<ParamVector> {
    trimmed_mean_with(vectors, f, TrimKernel::Select)
}

pub fn trimmed_mean_with(vectors: &[ParamVector], f: usize, kernel: TrimKernel) -> Result<ParamVector> {
    let n = vectors.len();
    if n == 0 {
        return invalid("cannot aggregate an empty list of vectors");
    }
    check_trim(n, f)?;
    let d = vectors[0].dim();
    if let Some(bad) = vectors.iter().position(|v| v.dim() != d) {
        return invalid(format!(
            "vector {bad} has dimension {}, expected {d}",
            vectors[bad].dim()
        ));
    }
    let mut columns = GradientColumns::new(n, d);
    for (i, v) in vectors.iter().enumerate() {
        columns.set_row(i, v.as_slice());
    }
    let mut out = vec![0.0; d];
    columns.trimmed_mean_into(f, kernel, &mut out);
    Ok(ParamVector::from_vec_unchecked(out))
}

/// `κ·variance` with `κ = 6f/(n−2f) · (1 + f/(n−2f))`.
///
/// Upper bound on `‖TM_f(g) − ḡ_I‖²` for every index set `I` with
/// `|I| ≥ n − f`, where `variance` is the mean squared deviation of `g_I`
/// around `ḡ_I`.
pub fn deviation_bound(n: usize, f: usize, empirical_variance: f64) -> Result<f64> {
    check_trim(n, f)?;
    if !(empirical_variance >= 0.0) {
        return invalid(format!("variance must be nonnegative, got {empirical_variance}"));
    }
    Ok(deviation_factor(n, f) * empirical_variance)
}

pub(crate) fn deviation_factor(n: usize, f: usize) -> f64 {
    let kept = (n - 2 * f) as f64;
    let f = f as f64;
    6.0 * f / kept * (1.0 + f / kept)
}

fn check_trim(n: usize, f: usize) -> Result<()> {
    if 2 * f >= n {
        return invalid(format!(
            "trimming {f} from each side needs more than {} inputs, got {n}",
            2 * f
        ));
    }
    Ok(())
}

/// Reusable `n × d` buffer stored column by column, so each coordinate's
/// `n` values are contiguous and can be selected in place.
#[derive(Debug, Clone)]
pub struct GradientColumns {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl GradientColumns {
    pub fn new(n: usize, d: usize) -> Self {
        GradientColumns {
            n,
            d,
            data: vec![0.0; n * d],
        }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn set_row(&mut self, i: usize, row: &[f64]) {
        debug_assert_eq!(row.len(), self.d);
        for (k, v) in row.iter().enumerate() {
            self.data[k * self.n + i] = *v;
        }
    }

    /// Aggregates the stored rows into `out`. Column contents are permuted.
    ///
    /// Panics if `2f ≥ n`; the public wrappers validate first.
    pub fn trimmed_mean_into(&mut self, f: usize, kernel: TrimKernel, out: &mut [f64]) {
        assert!(2 * f < self.n, "invalid trimming parameter");
        let n = self.n;
        let mut acc = ExactSum::new();
        for (k, o) in out.iter_mut().enumerate().take(self.d) {
            let col = &mut self.data[k * n..(k + 1) * n];
            *o = if f == 0 {
                col.iter().fold(0.0, |s, v| s + v) / n as f64
            } else {
                middle_block(col, f, kernel);
                acc.clear();
                acc.add_slice(&col[f..n - f]);
                acc.value() / (n - 2 * f) as f64
            };
        }
    }
}

/// Rearranges `col` so that `col[f..n-f]` holds the values of ranks
/// `f..n-f`.
fn middle_block(col: &mut [f64], f: usize, kernel: TrimKernel) {
    let n = col.len();
    match kernel {
        TrimKernel::Sort => col.sort_unstable_by(f64::total_cmp),
        TrimKernel::Select => {
            // std's selection falls back to median of medians, so both calls
            // are worst-case linear
            col.select_nth_unstable_by(f, f64::total_cmp);
            let upper = &mut col[f..];
            upper.select_nth_unstable_by(n - 2 * f - 1, f64::total_cmp);
        }
    }
}
