//! Adaptive drop-tolerance filtering.
//!
//! [`adaptive_filter`] removes small entries from a matrix so that the
//! removed part has 1-norm at most `eps_g * (1 + e_r)`. Instead of one fixed
//! threshold it starts at `eps_g` and lowers the threshold from the measured
//! norm of what is currently dropped, restoring entries until the budget is
//! met.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Default relative slack `e_r`.
pub const DEFAULT_RELATIVE_SLACK: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    /// The filtered matrix.
    pub kept: SparseMatrix,
    /// `||C - kept||_1`.
    pub dropped_norm: f64,
    /// Threshold used in each pass, in order.
    pub thresholds: Vec<f64>,
    pub iterations: usize,
    pub dropped_nnz: usize,
}

/// Largest norm of `C - kept` that [`adaptive_filter`] guarantees.
pub fn drop_budget(eps_g: f64, e_r: f64) -> f64 {
    eps_g * (1.0 + e_r)
}

/// Filters near-zero entries out of `c`.
///
/// The dropped set starts as every entry of `c`. Each pass uses threshold
/// `eps_g / m`, moves every dropped entry with magnitude above it back into
/// the kept matrix, then updates `m = ||dropped||_1 / threshold`. Passes
/// continue while `||dropped||_1 > eps_g * (1 + e_r)`; each threshold is
/// below the previous one divided by `1 + e_r`.
///
/// `eps_g = +inf` drops the whole matrix.
pub fn adaptive_filter(c: &SparseMatrix, eps_g: f64, e_r: f64) -> Result<FilterOutcome> {
    if !(eps_g > 0.0) {
        return Err(Error::invalid(format!("filter norm threshold must be positive, got {eps_g}")));
    }
    if !(e_r > 0.0 && e_r.is_finite()) {
        return Err(Error::invalid(format!("relative slack must be positive, got {e_r}")));
    }
    if !c.is_finite() {
        return Err(Error::NonFinite("matrix to filter"));
    }

    let limit = drop_budget(eps_g, e_r);
    let vals = c.values();
    let cols = c.col_indices();
    let mut dropped = vec![true; vals.len()];
    let mut residue_norm = c.one_norm();
    let mut m = 1.0;
    let mut thresholds = Vec::new();
    let mut col_sums = vec![0.0; c.dim()];

    while residue_norm > limit {
        let threshold = eps_g / m;
        thresholds.push(threshold);
        col_sums.iter_mut().for_each(|s| *s = 0.0);
        for (k, flag) in dropped.iter_mut().enumerate() {
            if !*flag {
                continue;
            }
            if vals[k].abs() > threshold {
                *flag = false;
            } else {
                col_sums[cols[k]] += vals[k].abs();
            }
        }
        residue_norm = col_sums.iter().copied().fold(0.0, f64::max);
        m = residue_norm / threshold;
    }

    let keep: Vec<bool> = dropped.iter().map(|d| !d).collect();
    let dropped_nnz = dropped.iter().filter(|&&d| d).count();
    Ok(FilterOutcome {
        kept: c.select(&keep),
        dropped_norm: residue_norm,
        iterations: thresholds.len(),
        thresholds,
        dropped_nnz,
    })
}

/// Upper bound on the number of passes of [`adaptive_filter`].
///
/// After pass `j` the threshold is at most `eps_g / (1 + e_r)^(j-1)` and every
/// dropped entry lies below it, so a column holding at most `p` nonzeros has
/// dropped norm at most `p` times the threshold. The loop therefore stops
/// once `(1 + e_r)^j >= p`.
pub fn pass_bound(c: &SparseMatrix, e_r: f64) -> usize {
    let mut per_col = vec![0usize; c.dim()];
    for &col in c.col_indices() {
        per_col[col] += 1;
    }
    let p = per_col.into_iter().max().unwrap_or(0).max(1) as f64;
    (p.ln() / e_r.ln_1p()).ceil() as usize + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residue(c: &SparseMatrix, out: &FilterOutcome) -> SparseMatrix {
        c.sub(&out.kept).unwrap()
    }

    #[test]
    fn large_entries_are_all_kept() {
        let c = SparseMatrix::from_triplets(3, [(0, 0, 1.0), (1, 2, -2.0), (2, 1, 0.5)]).unwrap();
        let out = adaptive_filter(&c, 0.1, 0.1).unwrap();
        assert_eq!(out.kept, c);
        assert_eq!(out.dropped_norm, 0.0);
        assert_eq!(out.dropped_nnz, 0);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn small_matrix_is_dropped_whole() {
        let c = SparseMatrix::from_triplets(3, [(0, 0, 0.01), (1, 0, 0.02), (2, 2, 0.04)]).unwrap();
        let out = adaptive_filter(&c, 0.05, 0.1).unwrap();
        assert!(out.kept.is_zero());
        assert_eq!(out.iterations, 0);
        assert!((out.dropped_norm - c.one_norm()).abs() < 1e-18);
        assert_eq!(out.dropped_nnz, 3);
    }

    #[test]
    fn hand_run_two_passes() {
        // One column with magnitudes {1.0, 0.3, 0.04, 0.03, 0.01}, no diagonal.
        let c = SparseMatrix::from_triplets(
            6,
            [(1, 0, 1.0), (2, 0, -0.3), (3, 0, 0.04), (4, 0, -0.03), (5, 0, 0.01)],
        )
        .unwrap();
        let out = adaptive_filter(&c, 0.05, 0.1).unwrap();
        assert_eq!(out.iterations, 2);
        assert_eq!(out.thresholds[0], 0.05);
        assert!((out.thresholds[1] - 0.03125).abs() < 1e-15);
        assert_eq!(out.kept.nnz(), 3);
        assert_eq!(out.kept.get(3, 0), 0.04);
        assert!((out.dropped_norm - 0.04).abs() < 1e-15);
    }

    #[test]
    fn infinite_threshold_drops_everything() {
        let c = SparseMatrix::from_triplets(2, [(0, 0, 1e6), (1, 0, 3.0)]).unwrap();
        let out = adaptive_filter(&c, f64::INFINITY, 0.1).unwrap();
        assert!(out.kept.is_zero());
        assert_eq!(out.dropped_norm, c.one_norm());
    }

    #[test]
    fn parameter_validation() {
        let c = SparseMatrix::identity(2).unwrap();
        assert!(adaptive_filter(&c, 0.0, 0.1).is_err());
        assert!(adaptive_filter(&c, -1.0, 0.1).is_err());
        assert!(adaptive_filter(&c, f64::NAN, 0.1).is_err());
        assert!(adaptive_filter(&c, 1.0, 0.0).is_err());
        let bad = SparseMatrix::from_triplets(2, [(0, 0, f64::NAN)]).unwrap();
        assert!(matches!(adaptive_filter(&bad, 1.0, 0.1), Err(Error::NonFinite(_))));
    }

    #[test]
    fn many_small_entries_need_more_passes_than_norm_ratio_suggests() {
        // Dropped norm barely above the budget with every entry below eps_g:
        // the threshold must fall below 0.6 at a rate of ||C||/eps_g = 1.2.
        let c = SparseMatrix::from_triplets(3, [(0, 0, 0.6), (1, 0, 0.6)]).unwrap();
        let out = adaptive_filter(&c, 1.0, 0.1).unwrap();
        assert_eq!(out.iterations, 4);
        let norm_ratio_bound = ((c.one_norm() / drop_budget(1.0, 0.1)).ln() / 0.1f64.ln_1p()).ceil() as usize + 1;
        assert_eq!(norm_ratio_bound, 2);
        assert!(out.iterations <= pass_bound(&c, 0.1));
    }

    fn arb_case() -> impl Strategy<Value = (SparseMatrix, f64, f64)> {
        (2usize..25, any::<u64>(), -12i32..=-1, prop_oneof![Just(0.01), Just(0.1), Just(1.0)], -3.0..3.0f64)
            .prop_map(|(n, seed, exp, e_r, log_scale)| {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let scale = 10f64.powf(log_scale);
                let mut trip = Vec::new();
                for r in 0..n {
                    for c in 0..n {
                        if rng.random::<f64>() < 0.4 {
                            let mag = 10f64.powf(rng.random_range(-14.0..0.0));
                            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                            trip.push((r, c, sign * mag * scale));
                        }
                    }
                }
                (SparseMatrix::from_triplets(n, trip).unwrap(), 10f64.powi(exp), e_r)
            })
    }

    proptest! {
        #[test]
        fn dropped_norm_within_budget((c, eps_g, e_r) in arb_case()) {
            let out = adaptive_filter(&c, eps_g, e_r).unwrap();
            let res = residue(&c, &out);
            prop_assert!(res.one_norm() <= drop_budget(eps_g, e_r));
            prop_assert_eq!(res.one_norm(), out.dropped_norm);
            prop_assert_eq!(out.kept.nnz() + out.dropped_nnz, c.nnz());
            for w in out.thresholds.windows(2) {
                prop_assert!(w[1] < w[0]);
                prop_assert!(w[1] / w[0] < 1.0 / (1.0 + e_r));
            }
            if let Some(&last) = out.thresholds.last() {
                prop_assert!(last <= eps_g);
                prop_assert!(res.values().iter().all(|v| v.abs() <= last));
            }
            prop_assert!(out.iterations <= pass_bound(&c, e_r));
        }

        #[test]
        fn refiltering_never_grows((c, eps_g, e_r) in arb_case()) {
            let first = adaptive_filter(&c, eps_g, e_r).unwrap();
            let second = adaptive_filter(&first.kept, eps_g, e_r).unwrap();
            prop_assert!(second.dropped_norm <= drop_budget(eps_g, e_r));
            prop_assert!(second.kept.nnz() <= first.kept.nnz());
        }
    }
}
