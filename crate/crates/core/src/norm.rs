//! Upper bounds on the 1-norms of matrix powers.
//!
//! Small powers are measured with the block 1-norm estimator of Higham and
//! Tisseur applied through repeated matrix-vector products (the power itself
//! is never formed). Larger powers are extrapolated as `alpha^i`, where
//! `alpha` is the largest `z_k^(1/k)` over the upper half of the measured
//! range; this dominates `||Z^i||` for every `i >= ceil((K + 1) / 2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Default number of estimator iterations.
pub const MAX_ESTIMATOR_ITERATIONS: usize = 5;

/// Relative upward rounding of [`power_growth_rate`], 16 units in the last place.
pub const GROWTH_RATE_ROUNDING: f64 = 16.0 * f64::EPSILON;

/// A square operator that can be applied to vectors and transposed.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64>;
}

/// `Z^power` applied as `power` successive sparse matrix-vector products.
#[derive(Debug, Clone, Copy)]
pub struct MatrixPower<'a> {
    matrix: &'a SparseMatrix,
    power: usize,
}

impl<'a> MatrixPower<'a> {
    pub fn new(matrix: &'a SparseMatrix, power: usize) -> Self {
        MatrixPower { matrix, power }
    }
}

impl LinearOperator for MatrixPower<'_> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for _ in 0..self.power {
            y = self.matrix.matvec(&y).expect("length checked by caller");
        }
        y
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for _ in 0..self.power {
            y = self.matrix.matvec_transpose(&y).expect("length checked by caller");
        }
        y
    }
}

fn vec_one_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

fn sign_vector(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect()
}

fn random_signs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Two ±1 vectors are parallel iff they are equal or opposite.
fn parallel(a: &[f64], b: &[f64]) -> bool {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.abs() == a.len() as f64
}

/// Block 1-norm estimate of `op`, using `t` columns and at most
/// [`MAX_ESTIMATOR_ITERATIONS`] iterations.
///
/// The returned value is always a realized ratio `||A x||_1 / ||x||_1` and so
/// never exceeds the true norm.
///
/// The result is the largest estimate over the block widths `1..=t` (same
/// seed), so a wider block never gives a smaller value.
pub fn estimate_one_norm(op: &impl LinearOperator, t: usize, seed: u64) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("estimator block width must be at least 1"));
    }
    Ok((1..=t).map(|w| block_estimate(op, w, seed)).fold(0.0, f64::max))
}

fn block_estimate(op: &impl LinearOperator, t: usize, seed: u64) -> f64 {
    let n = op.dim();
    if n <= t {
        // Every unit vector fits in one block: the estimate is exact.
        return (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                vec_one_norm(&op.apply(&e))
            })
            .fold(0.0, f64::max);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(t);
    x.push(vec![1.0; n]);
    while x.len() < t {
        let mut cand = random_signs(&mut rng, n);
        for _ in 0..16 {
            if !x.iter().any(|c| parallel(c, &cand)) {
                break;
            }
            cand = random_signs(&mut rng, n);
        }
        x.push(cand);
    }
    // Starting columns are +-1 vectors; their ratios are taken against n.
    let mut x_norm = vec![n as f64; t];

    let mut visited = vec![false; n];
    let mut est_old = 0.0;
    let mut est = 0.0;
    let mut ind_best: Option<usize> = None;
    let mut current_ind: Vec<Option<usize>> = vec![None; t];
    let mut s_old: Vec<Vec<f64>> = Vec::new();

    for k in 1.. {
        let y: Vec<Vec<f64>> = x.iter().map(|col| op.apply(col)).collect();
        let (jbest, best) = y
            .iter()
            .zip(&x_norm)
            .map(|(col, xn)| vec_one_norm(col) / xn)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
        est = best;
        if est > est_old || k == 2 {
            ind_best = current_ind[jbest].or(ind_best);
        }
        if k >= 2 && est <= est_old {
            est = est_old;
            break;
        }
        est_old = est;
        if k > MAX_ESTIMATOR_ITERATIONS {
            break;
        }

        let mut s: Vec<Vec<f64>> = y.iter().map(|col| sign_vector(col)).collect();
        if k >= 2 && s.iter().all(|c| s_old.iter().any(|o| parallel(c, o))) {
            break;
        }
        if t > 1 {
            for j in 0..s.len() {
                for _ in 0..16 {
                    let clash = s[..j].iter().any(|c| parallel(c, &s[j]))
                        || s_old.iter().any(|o| parallel(o, &s[j]));
                    if !clash {
                        break;
                    }
                    s[j] = random_signs(&mut rng, n);
                }
            }
        }

        let z: Vec<Vec<f64>> = s.iter().map(|col| op.apply_transpose(col)).collect();
        let h: Vec<f64> = (0..n)
            .map(|i| z.iter().map(|col| col[i].abs()).fold(0.0, f64::max))
            .collect();
        let hmax = h.iter().copied().fold(0.0, f64::max);
        if k >= 2 {
            if let Some(b) = ind_best {
                if hmax == h[b] {
                    break;
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| h[b].total_cmp(&h[a]));

        let chosen: Vec<usize> = if t > 1 {
            if order[..t].iter().all(|&i| visited[i]) {
                break;
            }
            order.iter().copied().filter(|&i| !visited[i]).take(t).collect()
        } else {
            order[..1].to_vec()
        };
        if chosen.is_empty() {
            break;
        }
        x = chosen
            .iter()
            .map(|&i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        current_ind = chosen.iter().map(|&i| Some(i)).collect();
        x_norm = vec![1.0; chosen.len()];
        for &i in &chosen {
            visited[i] = true;
        }
        s_old = s;
    }
    est
}

/// Estimate of `||Z^i||_1` without forming `Z^i`. `i = 0` gives 1.
pub fn estimate_power_one_norm(z: &SparseMatrix, i: usize, t: usize, seed: u64) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("estimator block width must be at least 1"));
    }
    if i == 0 {
        return Ok(1.0);
    }
    estimate_one_norm(&MatrixPower::new(z, i), t, seed)
}

/// `max_{k = K/2 ..= K} z_k^(1/k)`.
///
/// With `z_k >= ||Z^k||` for those `k`, `alpha^i >= ||Z^i||` holds for all
/// `i >= ceil((K + 1) / 2)`. The result is rounded up by
/// [`GROWTH_RATE_ROUNDING`] so that the powers `alpha^i` stay above norms
/// computed in floating point.
pub fn power_growth_rate(z: &[f64], cutoff: usize) -> Result<f64> {
    if cutoff < 2 || cutoff % 2 != 0 {
        return Err(Error::invalid(format!(
            "extrapolation cutoff must be an even integer >= 2, got {cutoff}"
        )));
    }
    if z.len() <= cutoff {
        return Err(Error::LengthMismatch {
            expected: cutoff + 1,
            found: z.len(),
        });
    }
    let alpha = (cutoff / 2..=cutoff)
        .map(|k| z[k].powf(1.0 / k as f64))
        .fold(0.0, f64::max);
    Ok(alpha * (1.0 + GROWTH_RATE_ROUNDING))
}

#[derive(Debug, Clone)]
pub struct NormConfig {
    /// Largest power measured directly (K). Must be even.
    pub cutoff: usize,
    /// Estimator block width.
    pub block_width: usize,
    pub seed: u64,
    /// Multiplier applied to measured `z_i`, `1 <= i <= K`.
    pub safety: f64,
    /// Matrices with `n` at most this size get exact norms of dense powers.
    pub exact_dim_limit: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            cutoff: 10,
            block_width: 2,
            seed: 0x5eed,
            safety: 1.0,
            exact_dim_limit: 64,
        }
    }
}

/// Bounds `z_i` on `||Z^i||_1`: measured for `i <= K`, `alpha^i` beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct NormProfile {
    measured: Vec<f64>,
    cutoff: usize,
    alpha: f64,
}

impl NormProfile {
    /// Measures `z_1..z_K` for `z` according to `cfg`.
    pub fn build(z: &SparseMatrix, cfg: &NormConfig) -> Result<Self> {
        if !(cfg.safety.is_finite() && cfg.safety >= 1.0) {
            return Err(Error::invalid("norm safety factor must be finite and >= 1"));
        }
        let k_max = cfg.cutoff;
        let mut measured = Vec::with_capacity(k_max + 1);
        measured.push(1.0);
        if z.dim() <= cfg.exact_dim_limit {
            measured.extend(exact_power_norms(z, k_max));
        } else {
            measured.push(z.one_norm());
            for i in 2..=k_max {
                let seed = cfg.seed.wrapping_add(i as u64);
                measured.push(estimate_power_one_norm(z, i, cfg.block_width, seed)?);
            }
        }
        for v in &mut measured[1..] {
            *v *= cfg.safety;
        }
        Self::from_measured(measured, k_max)
    }

    /// Profile from given bounds `z_0..=z_K`.
    pub fn from_measured(measured: Vec<f64>, cutoff: usize) -> Result<Self> {
        if measured.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("norm profile"));
        }
        let alpha = power_growth_rate(&measured, cutoff)?;
        let mut measured = measured;
        measured.truncate(cutoff + 1);
        Ok(NormProfile {
            measured,
            cutoff,
            alpha,
        })
    }

    /// The submultiplicative profile `z_i = norm^i`.
    pub fn submultiplicative(norm: f64, cutoff: usize) -> Result<Self> {
        Self::from_measured((0..=cutoff).map(|i| norm.powi(i as i32)).collect(), cutoff)
    }

    /// Bound on `||Z^i||_1`.
    pub fn get(&self, i: usize) -> f64 {
        if i <= self.cutoff {
            self.measured[i]
        } else {
            self.alpha.powi(i as i32)
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn measured(&self) -> &[f64] {
        &self.measured
    }
}

/// Exact `||Z^i||_1` for `i = 1..=k_max` from dense powers.
fn exact_power_norms(z: &SparseMatrix, k_max: usize) -> Vec<f64> {
    let n = z.dim();
    let base = z.to_dense();
    let mut power = base.clone();
    let mut out = Vec::with_capacity(k_max);
    for i in 1..=k_max {
        if i > 1 {
            let mut next = vec![0.0; n * n];
            for r in 0..n {
                for k in 0..n {
                    let a = power[r * n + k];
                    if a == 0.0 {
                        continue;
                    }
                    for c in 0..n {
                        next[r * n + c] += a * base[k * n + c];
                    }
                }
            }
            power = next;
        }
        let norm = (0..n)
            .map(|c| (0..n).map(|r| power[r * n + c].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        out.push(norm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn dense_power_norm(z: &SparseMatrix, i: usize) -> f64 {
        let mut p = SparseMatrix::identity(z.dim()).unwrap();
        for _ in 0..i {
            p = p.matmul(z).unwrap();
        }
        p.one_norm()
    }

    fn random_matrix(seed: u64, n: usize, fill: f64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if rng.random::<f64>() < fill {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    trip.push((r, c, v));
                }
            }
        }
        SparseMatrix::from_triplets(n, trip).unwrap()
    }

    #[test]
    fn identity_estimate_is_one() {
        let i = SparseMatrix::identity(50).unwrap();
        for p in 1..5 {
            assert_eq!(estimate_power_one_norm(&i, p, 2, 1).unwrap(), 1.0);
        }
        assert_eq!(estimate_power_one_norm(&i, 0, 2, 1).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_estimate_is_exact() {
        let d = SparseMatrix::diagonal(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(estimate_power_one_norm(&d, 2, 2, 7).unwrap(), 9.0);
        assert_eq!(estimate_power_one_norm(&d, 2, 1, 7).unwrap(), 9.0);
        let big: Vec<f64> = (0..40).map(|k| ((k * 7) % 13) as f64 - 6.0).collect();
        let d = SparseMatrix::diagonal(&big).unwrap();
        let exact = big.iter().map(|v| v.abs().powi(3)).fold(0.0, f64::max);
        assert_eq!(estimate_power_one_norm(&d, 3, 2, 7).unwrap(), exact);
    }

    #[test]
    fn width_zero_rejected() {
        let i = SparseMatrix::identity(3).unwrap();
        assert!(estimate_power_one_norm(&i, 1, 0, 0).is_err());
    }

    #[test]
    fn estimate_never_exceeds_true_norm() {
        for seed in 0..60 {
            let n = 5 + (seed as usize % 36);
            let z = random_matrix(seed, n, 0.3);
            for i in 1..=6 {
                let est = estimate_power_one_norm(&z, i, 2, seed).unwrap();
                let exact = dense_power_norm(&z, i);
                assert!(est <= exact * (1.0 + 1e-12), "seed {seed} i {i}: {est} > {exact}");
            }
        }
    }

    #[test]
    fn random_30_power_3_below_exact() {
        let z = random_matrix(99, 30, 0.5);
        let est = estimate_power_one_norm(&z, 3, 2, 4).unwrap();
        assert!(est <= dense_power_norm(&z, 3) * (1.0 + 1e-12));
        assert!(est > 0.0);
    }

    #[test]
    fn wider_blocks_do_not_lower_estimate() {
        for seed in 0..40 {
            let n = 20 + (seed as usize % 21);
            let z = random_matrix(1000 + seed, n, 0.2);
            for i in [1, 3, 5] {
                let mut prev = 0.0;
                for t in 1..=4 {
                    let est = estimate_power_one_norm(&z, i, t, seed).unwrap();
                    assert!(est >= prev, "seed {seed} i {i} t {t}: {est} < {prev}");
                    prev = est;
                }
            }
        }
    }

    #[test]
    fn alpha_cases() {
        // z_k = c^k
        let c: f64 = 0.75;
        let z: Vec<f64> = (0..=10).map(|k| c.powi(k)).collect();
        assert_eq!(power_growth_rate(&z, 10).unwrap(), c.powi(10).powf(0.1).max(c.powi(5).powf(0.2)).max(c.powi(7).powf(1.0 / 7.0)).max(c.powi(6).powf(1.0 / 6.0)).max(c.powi(8).powf(0.125)).max(c.powi(9).powf(1.0 / 9.0)) * (1.0 + GROWTH_RATE_ROUNDING));

        let mut nil = vec![0.0; 11];
        nil[0] = 1.0;
        nil[1] = 3.0;
        nil[2] = 2.0;
        assert_eq!(power_growth_rate(&nil, 10).unwrap(), 0.0);

        let mut z = vec![1.0; 11];
        z[5..=10].copy_from_slice(&[32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]);
        assert_eq!(power_growth_rate(&z, 10).unwrap(), 2.0 * (1.0 + GROWTH_RATE_ROUNDING));

        assert!(power_growth_rate(&z, 9).is_err());
        assert!(power_growth_rate(&z, 0).is_err());
        assert!(power_growth_rate(&z[..8], 10).is_err());
    }

    #[test]
    fn profile_of_scaled_identity() {
        let z = SparseMatrix::identity(5).unwrap().scale(0.5);
        let p = NormProfile::build(&z, &NormConfig::default()).unwrap();
        for i in 0..30 {
            let want = 0.5f64.powi(i as i32);
            let slack = if i > 10 { 20.0 * i as f64 } else { 4.0 };
            assert!(p.get(i) >= want * (1.0 - 4.0 * f64::EPSILON), "i = {i}");
            assert!(p.get(i) <= want * (1.0 + slack * f64::EPSILON), "i = {i}");
        }
        // Estimator path of the same matrix.
        let cfg = NormConfig {
            exact_dim_limit: 0,
            ..NormConfig::default()
        };
        let p = NormProfile::build(&SparseMatrix::identity(80).unwrap().scale(0.5), &cfg).unwrap();
        for i in 0..=10 {
            assert_eq!(p.get(i), 0.5f64.powi(i as i32));
        }
    }

    #[test]
    fn profile_of_zero() {
        let p = NormProfile::build(&SparseMatrix::zeros(4).unwrap(), &NormConfig::default()).unwrap();
        assert_eq!(p.get(0), 1.0);
        for i in 1..25 {
            assert_eq!(p.get(i), 0.0);
        }
    }

    #[test]
    fn safety_factor_scales_measured_powers() {
        let z = random_matrix(5, 10, 0.4);
        let base = NormProfile::build(&z, &NormConfig::default()).unwrap();
        let cfg = NormConfig {
            safety: 2.0,
            ..NormConfig::default()
        };
        let hard = NormProfile::build(&z, &cfg).unwrap();
        assert_eq!(hard.get(0), 1.0);
        for i in 1..=10 {
            assert_eq!(hard.get(i), 2.0 * base.get(i));
        }
        assert!(NormProfile::build(&z, &NormConfig { safety: 0.5, ..NormConfig::default() }).is_err());
    }

    #[test]
    fn banded_profile_bounds_high_powers() {
        let n: usize = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut trip = Vec::new();
        for r in 0..n {
            for c in r.saturating_sub(2)..=(r + 2).min(n - 1) {
                let v: f64 = StandardNormal.sample(&mut rng);
                trip.push((r, c, 0.3 * v));
            }
        }
        let z = SparseMatrix::from_triplets(n, trip).unwrap();
        let p = NormProfile::build(&z, &NormConfig::default()).unwrap();
        for i in 11..=20 {
            assert!(dense_power_norm(&z, i) <= p.get(i), "i = {i}");
        }
    }

    #[test]
    fn submultiplicative_profile() {
        let p = NormProfile::submultiplicative(2.0, 10).unwrap();
        assert_eq!(p.get(3), 8.0);
        assert_eq!(p.alpha(), 2.0 * (1.0 + GROWTH_RATE_ROUNDING));
        assert!((p.get(12) - 4096.0).abs() < 1e-9);
    }
}
