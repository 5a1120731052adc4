//! Test-matrix generators, a dense reference evaluator, and the benchmark
//! sweep comparing filtered evaluation against plain Paterson–Stockmeyer.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::engine::{theta_truncation, Psscf};
use crate::error::{Error, Result};
use crate::functions::{evaluate_function, FunctionKind, FunctionSpec};
use crate::norm::NormProfile;
use crate::ps::{eval_poly_horner, eval_poly_ps};
use crate::sparse::SparseMatrix;

/// Largest dimension [`dense_reference`] accepts.
pub const DENSE_REFERENCE_LIMIT: usize = 2000;

/// Random banded matrix with i.i.d. standard normal entries on the diagonals
/// `-bandwidth..=bandwidth`.
pub fn gen_banded(n: usize, bandwidth: usize, seed: u64) -> Result<SparseMatrix> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    if bandwidth >= n {
        return Err(Error::invalid(format!(
            "bandwidth {bandwidth} must be smaller than the dimension {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trip = Vec::with_capacity(n * (2 * bandwidth + 1));
    for r in 0..n {
        for c in r.saturating_sub(bandwidth)..=(r + bandwidth).min(n - 1) {
            let v: f64 = StandardNormal.sample(&mut rng);
            trip.push((r, c, v));
        }
    }
    SparseMatrix::from_triplets(n, trip)
}

/// Spectral radius estimate from power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    pub value: f64,
    pub iterations: usize,
    /// The iteration on `B` did not converge and `rho(|B|) >= rho(B)` was used.
    pub surrogate: bool,
}

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 1000;

/// Power iteration on `B^2`, so that dominant pairs `±rho` converge as well.
fn power_iteration(b: &SparseMatrix, seed: u64) -> (f64, usize, bool) {
    let n = b.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut prev = f64::NAN;
    for it in 1..=POWER_MAX_ITER {
        let y = b.matvec(&b.matvec(&x).expect("square")).expect("square");
        let ny = norm2(&y);
        if ny == 0.0 {
            return (0.0, it, true);
        }
        let rho = ny.sqrt();
        if (rho - prev).abs() <= POWER_TOL * rho {
            return (rho, it, true);
        }
        prev = rho;
        x = y.into_iter().map(|v| v / ny).collect();
    }
    (prev, POWER_MAX_ITER, false)
}

pub fn spectral_radius(b: &SparseMatrix, seed: u64) -> SpectralRadius {
    let (value, iterations, converged) = power_iteration(b, seed);
    if converged {
        return SpectralRadius { value, iterations, surrogate: false };
    }
    let (value, more, _) = power_iteration(&b.abs(), seed);
    SpectralRadius {
        value,
        iterations: iterations + more,
        surrogate: true,
    }
}

/// `I - 0.5 B / rho(B)`, the normalization applied to network adjacency matrices.
pub fn graph_normalize(b: &SparseMatrix) -> Result<SparseMatrix> {
    graph_normalize_with(b, 0x9e37).map(|(m, _)| m)
}

pub fn graph_normalize_with(b: &SparseMatrix, seed: u64) -> Result<(SparseMatrix, SpectralRadius)> {
    let rho = spectral_radius(b, seed);
    if !(rho.value > 0.0) {
        return Err(Error::ZeroSpectralRadius);
    }
    let id = SparseMatrix::identity(b.dim())?;
    Ok((id.add_scaled(1.0, b, -0.5 / rho.value)?, rho))
}

/// Densifies a sparse matrix.
pub fn to_array(m: &SparseMatrix) -> Array2<f64> {
    let n = m.dim();
    let mut out = Array2::zeros((n, n));
    for (r, c, v) in m.iter() {
        out[[r, c]] = v;
    }
    out
}

pub fn dense_one_norm(m: &Array2<f64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `||x - reference||_1` for a sparse `x`.
pub fn one_norm_distance(x: &SparseMatrix, reference: &Array2<f64>) -> f64 {
    dense_one_norm(&(to_array(x) - reference))
}

/// Dense Horner evaluation of the series of `spec` at `z`, truncated where
/// the submultiplicative tail bound `Σ |a_i| ||W||^i` drops below `eps_ref / 2`.
pub fn dense_reference(z: &SparseMatrix, spec: &FunctionSpec, eps_ref: f64) -> Result<Array2<f64>> {
    let n = z.dim();
    if n > DENSE_REFERENCE_LIMIT {
        return Err(Error::SizeCap { n, limit: DENSE_REFERENCE_LIMIT });
    }
    let w = spec.series_argument(z)?;
    let profile = NormProfile::submultiplicative(w.one_norm(), 10)?;
    let truncation = theta_truncation(eps_ref, &spec.stream, &profile)?;
    Ok(dense_horner(&to_array(&w), &spec.stream.take(truncation.terms)))
}

/// `Σ a_i W^i` by Horner's rule on dense matrices.
pub fn dense_horner(w: &Array2<f64>, coeffs: &[f64]) -> Array2<f64> {
    let n = w.nrows();
    let eye = Array2::<f64>::eye(n);
    let mut acc = &eye * coeffs.last().copied().unwrap_or(0.0);
    for &a in coeffs.iter().rev().skip(1) {
        acc = w.dot(&acc) + &eye * a;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchFunction {
    Exp,
    Cos,
    Poly,
}

impl std::str::FromStr for BenchFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(BenchFunction::Exp),
            "cos" => Ok(BenchFunction::Cos),
            "poly" => Ok(BenchFunction::Poly),
            other => Err(Error::invalid(format!("unknown function `{other}` (expected exp, cos or poly)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub function: BenchFunction,
    pub sizes: Vec<usize>,
    pub bandwidths: Vec<usize>,
    pub trials_per_bandwidth: usize,
    pub eps_tol: f64,
    pub seed: u64,
    /// Rescale each matrix to this 1-norm.
    pub scale_target: Option<f64>,
    /// Polynomial coefficients for [`BenchFunction::Poly`].
    pub poly_coeffs: Vec<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            function: BenchFunction::Exp,
            sizes: vec![200],
            bandwidths: (1..=8).collect(),
            trials_per_bandwidth: 10,
            eps_tol: 1e-10,
            seed: 1,
            scale_target: Some(2.0),
            poly_coeffs: vec![1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0, 1.0 / 720.0, 1.0 / 5040.0],
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_bandwidth < 1 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if !(self.eps_tol > 0.0) {
            return Err(Error::invalid("eps_tol must be positive"));
        }
        for &n in &self.sizes {
            if let Some(&bw) = self.bandwidths.iter().find(|&&bw| bw >= n) {
                return Err(Error::invalid(format!("bandwidth {bw} is not smaller than size {n}")));
            }
        }
        if let Some(t) = self.scale_target {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid("scale_target must be positive"));
            }
        }
        if self.function == BenchFunction::Poly && self.poly_coeffs.is_empty() {
            return Err(Error::invalid("poly benchmark needs coefficients"));
        }
        Ok(())
    }

    /// Tolerance used for the dense reference.
    pub fn eps_ref(&self) -> f64 {
        self.eps_tol / 100.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Psscf,
    Ps,
    Reference,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Psscf => "PSSCF",
            Method::Ps => "PS",
            Method::Reference => "reference",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub method: Method,
    pub n: usize,
    pub bandwidth: usize,
    pub trial: usize,
    pub time_seconds: f64,
    pub sparsity: f64,
    pub nnz: usize,
    pub rel_error: f64,
    pub abs_error: f64,
    pub certified_bound: f64,
    pub terms: usize,
    pub q: usize,
    pub b: usize,
    /// Set when the method failed on this case or needed a fallback.
    pub note: Option<String>,
}

impl BenchRow {
    fn failed(method: Method, n: usize, bandwidth: usize, trial: usize, err: &Error) -> Self {
        BenchRow {
            method,
            n,
            bandwidth,
            trial,
            time_seconds: f64::NAN,
            sparsity: f64::NAN,
            nnz: 0,
            rel_error: f64::NAN,
            abs_error: f64::NAN,
            certified_bound: f64::NAN,
            terms: 0,
            q: 0,
            b: 0,
            note: Some(format!("error: {err}")),
        }
    }

    pub fn is_failure(&self) -> bool {
        self.note.as_deref().is_some_and(|n| n.starts_with("error"))
    }
}

/// Case seed derived from the sweep seed and the case coordinates.
pub fn case_seed(seed: u64, n: usize, bandwidth: usize, trial: usize) -> u64 {
    let mut x = seed
        ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (bandwidth as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (trial as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// The test matrix of one case, rescaled if the config asks for it.
pub fn case_matrix(cfg: &BenchConfig, n: usize, bandwidth: usize, trial: usize) -> Result<SparseMatrix> {
    let z = gen_banded(n, bandwidth, case_seed(cfg.seed, n, bandwidth, trial))?;
    Ok(match cfg.scale_target {
        Some(target) if z.one_norm() > 0.0 => z.scale(target / z.one_norm()),
        _ => z,
    })
}

struct Outcome {
    result: SparseMatrix,
    bound: f64,
    terms: usize,
    q: usize,
    b: usize,
}

fn run_psscf(evaluator: &Psscf, cfg: &BenchConfig, z: &SparseMatrix) -> Result<Outcome> {
    let report = match cfg.function {
        BenchFunction::Exp => evaluate_function(evaluator, &FunctionSpec::exp(), z, cfg.eps_tol)?,
        BenchFunction::Cos => evaluate_function(evaluator, &FunctionSpec::cos(), z, cfg.eps_tol)?,
        BenchFunction::Poly => evaluator.evaluate_polynomial(z, &cfg.poly_coeffs, cfg.eps_tol)?,
    };
    Ok(Outcome {
        bound: report.certified_bound,
        terms: report.plan.terms,
        q: report.plan.block_size,
        b: report.plan.blocks,
        result: report.result,
    })
}

/// Plain Paterson–Stockmeyer with the same norm profile and truncation rule.
fn run_ps(evaluator: &Psscf, cfg: &BenchConfig, z: &SparseMatrix) -> Result<Outcome> {
    let (result, bound, coeffs_len) = match cfg.function {
        BenchFunction::Poly => (eval_poly_ps(z, &cfg.poly_coeffs)?, 0.0, cfg.poly_coeffs.len()),
        BenchFunction::Exp | BenchFunction::Cos => {
            let spec = FunctionSpec::of(if cfg.function == BenchFunction::Exp {
                FunctionKind::Exp
            } else {
                FunctionKind::Cos
            });
            let w = spec.series_argument(z)?;
            let setup = evaluator.prepare_series(&w, &spec.stream, cfg.eps_tol)?;
            (eval_poly_ps(&w, &setup.coeffs)?, setup.truncation.tail, setup.coeffs.len())
        }
    };
    let plan = crate::ps::plan(coeffs_len)?;
    Ok(Outcome {
        result,
        bound,
        terms: plan.terms,
        q: plan.block_size,
        b: plan.blocks,
    })
}

fn run_reference(cfg: &BenchConfig, z: &SparseMatrix) -> Result<Array2<f64>> {
    match cfg.function {
        BenchFunction::Exp => dense_reference(z, &FunctionSpec::exp(), cfg.eps_ref()),
        BenchFunction::Cos => dense_reference(z, &FunctionSpec::cos(), cfg.eps_ref()),
        BenchFunction::Poly => {
            if z.dim() > DENSE_REFERENCE_LIMIT {
                return Err(Error::SizeCap { n: z.dim(), limit: DENSE_REFERENCE_LIMIT });
            }
            Ok(dense_horner(&to_array(z), &cfg.poly_coeffs))
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs the sweep. Rows come out ordered by size, bandwidth, trial and then
/// method (PSSCF, PS, reference). A failing method yields a row with NaN
/// measurements and an error note; the sweep continues.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    run_benchmark_with(&Psscf::default(), cfg)
}

pub fn run_benchmark_with(evaluator: &Psscf, cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut warmed: HashSet<usize> = HashSet::new();
    for &n in &cfg.sizes {
        for &bw in &cfg.bandwidths {
            for trial in 0..cfg.trials_per_bandwidth {
                let z = case_matrix(cfg, n, bw, trial)?;
                if warmed.insert(n) {
                    let _ = run_psscf(evaluator, cfg, &z);
                    let _ = run_ps(evaluator, cfg, &z);
                }
                let (reference, ref_time) = timed(|| run_reference(cfg, &z));
                let reference = match reference {
                    Ok(r) => r,
                    Err(e) => {
                        for m in [Method::Psscf, Method::Ps, Method::Reference] {
                            rows.push(BenchRow::failed(m, n, bw, trial, &e));
                        }
                        continue;
                    }
                };
                let ref_norm = dense_one_norm(&reference);
                let mut measured = |method: Method, outcome: Result<Outcome>, time: f64| match outcome {
                    Ok(o) => {
                        let abs_error = one_norm_distance(&o.result, &reference);
                        rows.push(BenchRow {
                            method,
                            n,
                            bandwidth: bw,
                            trial,
                            time_seconds: time,
                            sparsity: o.result.sparsity(),
                            nnz: o.result.nnz(),
                            rel_error: abs_error / ref_norm,
                            abs_error,
                            certified_bound: o.bound,
                            terms: o.terms,
                            q: o.q,
                            b: o.b,
                            note: None,
                        });
                    }
                    Err(e) => rows.push(BenchRow::failed(method, n, bw, trial, &e)),
                };
                let (psscf, t) = timed(|| run_psscf(evaluator, cfg, &z));
                measured(Method::Psscf, psscf, t);
                let (ps, t) = timed(|| run_ps(evaluator, cfg, &z));
                measured(Method::Ps, ps, t);

                let ref_nnz = reference.iter().filter(|&&v| v != 0.0).count();
                rows.push(BenchRow {
                    method: Method::Reference,
                    n,
                    bandwidth: bw,
                    trial,
                    time_seconds: ref_time,
                    sparsity: ref_nnz as f64 / (n * n) as f64,
                    nnz: ref_nnz,
                    rel_error: 0.0,
                    abs_error: 0.0,
                    certified_bound: cfg.eps_ref(),
                    terms: 0,
                    q: 0,
                    b: 0,
                    note: None,
                });
            }
        }
    }
    Ok(rows)
}

/// Per-bandwidth aggregate of one method.
#[derive(Debug, Clone)]
pub struct BandwidthSummary {
    pub method: Method,
    pub bandwidth: usize,
    pub median_time: f64,
    pub mean_sparsity: f64,
    pub max_rel_error: f64,
}

pub fn summarize(rows: &[BenchRow]) -> Vec<BandwidthSummary> {
    let mut keys: Vec<(usize, Method)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.bandwidth, r.method)) {
            keys.push((r.bandwidth, r.method));
        }
    }
    keys.into_iter()
        .map(|(bandwidth, method)| {
            let sel: Vec<&BenchRow> = rows
                .iter()
                .filter(|r| r.bandwidth == bandwidth && r.method == method && !r.is_failure())
                .collect();
            let mut times: Vec<f64> = sel.iter().map(|r| r.time_seconds).collect();
            times.sort_by(f64::total_cmp);
            BandwidthSummary {
                method,
                bandwidth,
                median_time: median(&times),
                mean_sparsity: sel.iter().map(|r| r.sparsity).sum::<f64>() / sel.len().max(1) as f64,
                max_rel_error: sel.iter().map(|r| r.rel_error).fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Median of sorted values (NaN when empty).
pub fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        len if len % 2 == 1 => sorted[len / 2],
        len => 0.5 * (sorted[len / 2 - 1] + sorted[len / 2]),
    }
}

/// Horner oracle on a sparse polynomial, exported for the examples.
pub fn sparse_horner(z: &SparseMatrix, coeffs: &[f64]) -> Result<SparseMatrix> {
    eval_poly_horner(z, coeffs)
}
