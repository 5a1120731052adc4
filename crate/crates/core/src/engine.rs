//! Paterson–Stockmeyer evaluation combined with adaptive filtering.
//!
//! Every matrix product of the scheme (the powers `Z^2..Z^q` and the Horner
//! steps in `Z^q`) is filtered with [`adaptive_filter`], each against its own
//! filtering-norm-threshold (FNT). The thresholds are chosen so that every
//! filtering step contributes the same amount to a first-order bound on the
//! final error, and the contributions add up to the filtering budget:
//!
//! * polynomial mode: the whole tolerance `eps`;
//! * series mode: `eps_tol - tail`, where the truncation order `N` is the
//!   smallest with `tail = Σ_{i>=N} |a_i| z_i <= eps_tol / 2`.
//!
//! The error a power-step drop `ζ_k` can cause is weighted by `d_k`; a
//! Horner-step drop `Σ_i` by `z_{q(b-1-i)}`. Both weights come from the norm
//! profile `z` and the coefficient magnitudes only, so the whole budget is
//! known before the first product is formed.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::filter::{adaptive_filter, drop_budget, DEFAULT_RELATIVE_SLACK};
use crate::norm::{NormConfig, NormProfile};
use crate::ps::{coef, eval_poly_horner, PsPlan};
use crate::sparse::SparseMatrix;

/// Terms of the series are summed until this many consecutive terms are
/// negligible.
const NEGLIGIBLE_RUN: usize = 8;
const MAX_SERIES_TERMS: usize = 1_000_000;

enum Rule {
    Recurrence {
        first: f64,
        next: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
    },
    Closed(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
    Finite(Arc<[f64]>),
}

/// The coefficients `a_0, a_1, ...` of a power series.
#[derive(Clone)]
pub struct CoefficientStream {
    label: String,
    rule: Arc<Rule>,
}

impl std::fmt::Debug for CoefficientStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientStream").field("label", &self.label).finish()
    }
}

impl CoefficientStream {
    /// `a_0 = first`, `a_i = next(i, a_{i-1})`.
    pub fn recurrence<F>(label: impl Into<String>, first: f64, next: F) -> Self
    where
        F: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        CoefficientStream {
            label: label.into(),
            rule: Arc::new(Rule::Recurrence {
                first,
                next: Arc::new(next),
            }),
        }
    }

    /// `a_i = f(i)`.
    pub fn from_fn<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(usize) -> f64 + Send + Sync + 'static,
    {
        CoefficientStream {
            label: label.into(),
            rule: Arc::new(Rule::Closed(Arc::new(f))),
        }
    }

    /// A polynomial: the given coefficients followed by zeros.
    pub fn finite(label: impl Into<String>, coeffs: &[f64]) -> Self {
        CoefficientStream {
            label: label.into(),
            rule: Arc::new(Rule::Finite(coeffs.into())),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of nonzero-capable coefficients, if the stream is finite.
    pub fn finite_len(&self) -> Option<usize> {
        match &*self.rule {
            Rule::Finite(c) => Some(c.len()),
            _ => None,
        }
    }

    /// Endless iterator over the coefficients.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let mut prev = 0.0;
        (0..).map(move |i| {
            let a = match &*self.rule {
                Rule::Recurrence { first, next } => {
                    if i == 0 {
                        *first
                    } else {
                        next(i, prev)
                    }
                }
                Rule::Closed(f) => f(i),
                Rule::Finite(c) => c.get(i).copied().unwrap_or(0.0),
            };
            prev = a;
            a
        })
    }

    /// `a_0..a_{n-1}`.
    pub fn take(&self, n: usize) -> Vec<f64> {
        self.iter().take(n).collect()
    }
}

/// Truncation order and the bound on the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub terms: usize,
    pub tail: f64,
}

/// Smallest `N >= 1` with `Σ_{i>=N} |a_i| z_i <= eps_tol / 2`.
///
/// The infinite sum is accumulated until [`NEGLIGIBLE_RUN`] consecutive terms
/// are below `2^-52 * (partial sum + eps_tol)`. Tails are then summed from the
/// smallest term upward.
pub fn theta_truncation(
    eps_tol: f64,
    coeffs: &CoefficientStream,
    profile: &NormProfile,
) -> Result<Truncation> {
    if !(eps_tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {eps_tol}")));
    }
    let terms = series_terms(coeffs, profile, eps_tol)?;
    let half = 0.5 * eps_tol;
    let mut tails = vec![0.0; terms.len() + 1];
    for i in (0..terms.len()).rev() {
        tails[i] = tails[i + 1] + terms[i];
    }
    let m = tails
        .iter()
        .position(|&t| t <= half)
        .expect("the empty tail is zero");
    let n = m.max(1);
    Ok(Truncation {
        terms: n,
        tail: tails[n],
    })
}

fn series_terms(coeffs: &CoefficientStream, profile: &NormProfile, eps_tol: f64) -> Result<Vec<f64>> {
    if let Some(len) = coeffs.finite_len() {
        return coeffs
            .iter()
            .take(len)
            .enumerate()
            .map(|(i, a)| {
                let t = a.abs() * profile.get(i);
                if t.is_finite() { Ok(t) } else { Err(Error::Divergence { terms: i }) }
            })
            .collect();
    }
    let mut terms = Vec::new();
    let mut acc = 0.0;
    let mut run = 0;
    let mut prev_a = 0.0f64;
    for (i, a) in coeffs.iter().enumerate() {
        if i >= MAX_SERIES_TERMS {
            return Err(Error::Divergence { terms: i });
        }
        let z = profile.get(i);
        let t = if z == 0.0 { 0.0 } else { a.abs() * z };
        if !t.is_finite() {
            return Err(Error::Divergence { terms: i });
        }
        let negligible = |t: f64, acc: f64| t < f64::EPSILON * (acc + eps_tol);
        // A coefficient recurrence that underflowed while its terms still
        // mattered cannot certify the tail.
        if a == 0.0 && prev_a != 0.0 && prev_a.abs() < 1e-290 {
            if let Some(&last) = terms.last() {
                if !negligible(last, acc) {
                    return Err(Error::Divergence { terms: i });
                }
            }
        }
        acc += t;
        terms.push(t);
        if negligible(t, acc) {
            run += 1;
            if run >= NEGLIGIBLE_RUN {
                break;
            }
        } else {
            run = 0;
        }
        prev_a = a;
    }
    Ok(terms)
}

/// `β_{i,j} = Σ_{k=j}^{q-1} |a_{iq+k}| z_{k-j}`, zero for `j >= q`.
pub fn beta(i: usize, j: usize, coeffs: &[f64], profile: &NormProfile, q: usize) -> f64 {
    (j..q)
        .map(|k| coef(coeffs, i * q + k).abs() * profile.get(k - j))
        .sum()
}

/// Bounds on `||B_i||` and on the Horner partials `||S_i||`.
pub fn bound_blocks_and_partials(
    coeffs: &[f64],
    profile: &NormProfile,
    plan: &PsPlan,
) -> (Vec<f64>, Vec<f64>) {
    let q = plan.block_size;
    let b = plan.blocks;
    let blocks: Vec<f64> = (0..b)
        .map(|i| (0..q).map(|j| coef(coeffs, i * q + j).abs() * profile.get(j)).sum())
        .collect();
    let zq = profile.get(q);
    let mut partials = Vec::with_capacity(b);
    partials.push(blocks[b - 1]);
    for i in 1..b {
        let prev = partials[i - 1];
        partials.push(blocks[b - 1 - i] + zq * prev);
    }
    (blocks, partials)
}

/// `β_{i,j}` for `i < b`, `j <= q`.
pub fn beta_table(coeffs: &[f64], profile: &NormProfile, plan: &PsPlan) -> Vec<Vec<f64>> {
    let q = plan.block_size;
    (0..plan.blocks)
        .map(|i| (0..=q).map(|j| beta(i, j, coeffs, profile, q)).collect())
        .collect()
}

/// Weight `d_k` of the power-step drop `ζ_k`, `2 <= k <= q`:
/// `Σ_{j=0}^{b-1} z_{q(b-1-j)} (β_{b-1-j,k} + z_{q-k} ||S_{j-1}||)` with `||S_{-1}|| = 0`.
pub fn compute_dk(
    k: usize,
    beta: &[Vec<f64>],
    partials: &[f64],
    profile: &NormProfile,
    plan: &PsPlan,
) -> f64 {
    let q = plan.block_size;
    let b = plan.blocks;
    let zqk = profile.get(q - k);
    (0..b)
        .map(|j| {
            let s_prev = if j == 0 { 0.0 } else { partials[j - 1] };
            profile.get(q * (b - 1 - j)) * (beta[b - 1 - j][k] + zqk * s_prev)
        })
        .sum()
}

/// One filtering step: its position, error weight, and threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepThreshold {
    /// `k` for the power `Z^k`, `i` for the Horner partial `S_i`.
    pub step: usize,
    pub weight: f64,
    pub fnt: f64,
}

/// Equal-influence thresholds: `fnt = budget / (weight * steps)` for the
/// power steps `k = 2..=q` (weight `d_k`) and the Horner steps that contain a
/// product (weight `z_{q(b-1-i)}`). A zero weight gives an infinite threshold.
///
/// Returns `None` when the plan has no products to filter.
pub fn fnt_schedule(
    budget: f64,
    d: &[f64],
    profile: &NormProfile,
    plan: &PsPlan,
) -> Option<(Vec<StepThreshold>, Vec<StepThreshold>)> {
    let steps = plan.filtered_steps();
    if steps == 0 {
        return None;
    }
    let q = plan.block_size;
    let b = plan.blocks;
    let fnt = |weight: f64| {
        if weight == 0.0 {
            f64::INFINITY
        } else {
            budget / (weight * steps as f64)
        }
    };
    let power = (2..=q)
        .map(|k| {
            let weight = d[k - 2];
            StepThreshold { step: k, weight, fnt: fnt(weight) }
        })
        .collect();
    let qin = (1 + plan.scalar_last_block..b)
        .map(|i| {
            let weight = profile.get(q * (b - 1 - i));
            StepThreshold { step: i, weight, fnt: fnt(weight) }
        })
        .collect();
    Some((power, qin))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    Polynomial,
    Series,
}

/// The complete a-priori error budget of one evaluation.
#[derive(Debug, Clone)]
pub struct ErrorBudget {
    pub mode: BudgetMode,
    pub eps_tol: f64,
    pub terms: usize,
    /// Truncation bound (zero in polynomial mode).
    pub tail: f64,
    /// Share of the tolerance available to filtering.
    pub filter_budget: f64,
    pub steps: usize,
    pub power_fnt: Vec<StepThreshold>,
    pub qin_fnt: Vec<StepThreshold>,
    /// `d_k` for `k = 2..=q`.
    pub d: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub block_bounds: Vec<f64>,
    pub partial_bounds: Vec<f64>,
}

impl ErrorBudget {
    pub fn new(
        mode: BudgetMode,
        eps_tol: f64,
        tail: f64,
        coeffs: &[f64],
        profile: &NormProfile,
        plan: &PsPlan,
    ) -> Result<Self> {
        if !(eps_tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {eps_tol}")));
        }
        let filter_budget = match mode {
            BudgetMode::Polynomial => eps_tol,
            BudgetMode::Series => eps_tol - tail,
        };
        if !(filter_budget > 0.0) {
            return Err(Error::invalid("truncation tail leaves no filtering budget"));
        }
        let beta = beta_table(coeffs, profile, plan);
        let (block_bounds, partial_bounds) = bound_blocks_and_partials(coeffs, profile, plan);
        let d: Vec<f64> = (2..=plan.block_size)
            .map(|k| compute_dk(k, &beta, &partial_bounds, profile, plan))
            .collect();
        let (power_fnt, qin_fnt) =
            fnt_schedule(filter_budget, &d, profile, plan).unwrap_or_default();
        Ok(ErrorBudget {
            mode,
            eps_tol,
            terms: plan.terms,
            tail,
            filter_budget,
            steps: plan.filtered_steps(),
            power_fnt,
            qin_fnt,
            d,
            beta,
            block_bounds,
            partial_bounds,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Forming `Z^k`.
    Power,
    /// Forming the Horner partial `S_i`.
    Qin,
}

/// What happened at one product of the filtered scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub kind: StepKind,
    pub step: usize,
    pub weight: f64,
    /// Scheduled threshold.
    pub fnt: f64,
    /// Threshold actually handed to the filter; differs from `fnt` only where
    /// `fnt` is infinite.
    pub applied_fnt: f64,
    pub dropped_norm: f64,
    pub dropped_nnz: usize,
    pub filter_passes: usize,
    /// Nonzeros before and after filtering.
    pub nnz_before: usize,
    pub nnz_after: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub result: SparseMatrix,
    pub plan: PsPlan,
    pub budget: ErrorBudget,
    pub profile: NormProfile,
    pub steps: Vec<StepRecord>,
    /// `Σ weight * dropped_norm + tail` over the realized drops.
    pub certified_bound: f64,
    /// Unfiltered products formed before the scheme (e.g. `A^2` for cosine).
    pub extra_products: usize,
    pub elapsed: Duration,
}

impl EvalReport {
    pub fn dropped_power_norms(&self) -> Vec<f64> {
        self.steps_of(StepKind::Power).map(|s| s.dropped_norm).collect()
    }

    pub fn dropped_qin_norms(&self) -> Vec<f64> {
        self.steps_of(StepKind::Qin).map(|s| s.dropped_norm).collect()
    }

    /// Nonzeros of each filtered product, in evaluation order, then the result.
    pub fn nnz_history(&self) -> Vec<usize> {
        self.steps
            .iter()
            .map(|s| s.nnz_after)
            .chain(std::iter::once(self.result.nnz()))
            .collect()
    }

    /// Total matrix products, including any made before the scheme.
    pub fn products(&self) -> usize {
        self.plan.mult_count + self.extra_products
    }

    fn steps_of(&self, kind: StepKind) -> impl Iterator<Item = &StepRecord> {
        self.steps.iter().filter(move |s| s.kind == kind)
    }
}

/// Recomputes `Σ_k d_k ||ζ_k|| + Σ_i z_{q(b-1-i)} ||Σ_i|| + tail` from a report.
pub fn certified_bound(report: &EvalReport) -> f64 {
    realized_bound(&report.steps, report.budget.tail)
}

fn realized_bound(steps: &[StepRecord], tail: f64) -> f64 {
    steps
        .iter()
        .filter(|s| s.weight != 0.0)
        .map(|s| s.weight * s.dropped_norm)
        .sum::<f64>()
        + tail
}

#[derive(Debug, Clone)]
pub struct PsscfOptions {
    /// Slack `e_r` handed to the adaptive filter.
    pub relative_slack: f64,
    pub norms: NormConfig,
}

impl Default for PsscfOptions {
    fn default() -> Self {
        PsscfOptions {
            relative_slack: DEFAULT_RELATIVE_SLACK,
            norms: NormConfig::default(),
        }
    }
}

/// Norm profile and truncation order for a series evaluation.
#[derive(Debug, Clone)]
pub struct SeriesSetup {
    pub profile: NormProfile,
    pub truncation: Truncation,
    pub coeffs: Vec<f64>,
}

/// Filtered Paterson–Stockmeyer evaluator.
#[derive(Debug, Clone, Default)]
pub struct Psscf {
    options: PsscfOptions,
}

impl Psscf {
    pub fn new(options: PsscfOptions) -> Self {
        Psscf { options }
    }

    pub fn options(&self) -> &PsscfOptions {
        &self.options
    }

    /// Norm profile of `z` and the truncation order for `eps_tol`.
    pub fn prepare_series(
        &self,
        z: &SparseMatrix,
        coeffs: &CoefficientStream,
        eps_tol: f64,
    ) -> Result<SeriesSetup> {
        let profile = NormProfile::build(z, &self.options.norms)?;
        let truncation = theta_truncation(eps_tol, coeffs, &profile)?;
        Ok(SeriesSetup {
            coeffs: coeffs.take(truncation.terms),
            profile,
            truncation,
        })
    }

    /// `f(Z) = Σ a_i Z^i` to 1-norm accuracy `eps_tol`.
    pub fn evaluate_series(
        &self,
        z: &SparseMatrix,
        coeffs: &CoefficientStream,
        eps_tol: f64,
    ) -> Result<EvalReport> {
        let start = Instant::now();
        if !z.is_finite() {
            return Err(Error::NonFinite("input matrix"));
        }
        let setup = self.prepare_series(z, coeffs, eps_tol)?;
        let plan = PsPlan::new(setup.truncation.terms)?;
        let budget = ErrorBudget::new(
            BudgetMode::Series,
            eps_tol,
            setup.truncation.tail,
            &setup.coeffs,
            &setup.profile,
            &plan,
        )?;
        self.run(z, &setup.coeffs, plan, budget, setup.profile, start)
    }

    /// `P(Z) = Σ_{i<N} a_i Z^i` to 1-norm accuracy `eps` relative to exact
    /// evaluation. `eps = +inf` lets every filter drop freely.
    pub fn evaluate_polynomial(
        &self,
        z: &SparseMatrix,
        coeffs: &[f64],
        eps: f64,
    ) -> Result<EvalReport> {
        let start = Instant::now();
        if !z.is_finite() {
            return Err(Error::NonFinite("input matrix"));
        }
        let plan = PsPlan::new(coeffs.len())?;
        let profile = NormProfile::build(z, &self.options.norms)?;
        let budget = ErrorBudget::new(BudgetMode::Polynomial, eps, 0.0, coeffs, &profile, &plan)?;
        self.run(z, coeffs, plan, budget, profile, start)
    }

    fn run(
        &self,
        z: &SparseMatrix,
        coeffs: &[f64],
        plan: PsPlan,
        budget: ErrorBudget,
        profile: NormProfile,
        start: Instant,
    ) -> Result<EvalReport> {
        let (result, steps) = if plan.filtered_steps() == 0 {
            (eval_poly_horner(z, coeffs)?, Vec::new())
        } else {
            self.filtered_scheme(z, coeffs, &plan, &budget)?
        };
        let certified_bound = realized_bound(&steps, budget.tail);
        Ok(EvalReport {
            result,
            plan,
            budget,
            profile,
            steps,
            certified_bound,
            extra_products: 0,
            elapsed: start.elapsed(),
        })
    }

    fn filtered_scheme(
        &self,
        z: &SparseMatrix,
        coeffs: &[f64],
        plan: &PsPlan,
        budget: &ErrorBudget,
    ) -> Result<(SparseMatrix, Vec<StepRecord>)> {
        let n = z.dim();
        let q = plan.block_size;
        let b = plan.blocks;
        let e_r = self.options.relative_slack;
        // Steps whose drops cannot reach the result still filter, at the
        // loosest finite threshold of the schedule.
        let fallback = budget
            .power_fnt
            .iter()
            .chain(&budget.qin_fnt)
            .map(|s| s.fnt)
            .filter(|f| f.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let fallback = if fallback.is_finite() { fallback } else { f64::INFINITY };
        let mut records = Vec::with_capacity(plan.filtered_steps());

        let mut powers: Vec<SparseMatrix> = Vec::with_capacity(q + 1);
        powers.push(SparseMatrix::identity(n)?);
        powers.push(z.clone());
        for sched in &budget.power_fnt {
            let product = z.matmul(powers.last().expect("nonempty"))?;
            let (kept, record) = filter_step(StepKind::Power, sched, fallback, e_r, &product)?;
            records.push(record);
            powers.push(kept);
        }

        let block = |i: usize| -> Result<SparseMatrix> {
            let terms: Vec<(f64, &SparseMatrix)> =
                (1..q).map(|j| (coef(coeffs, i * q + j), &powers[j])).collect();
            SparseMatrix::linear_combination(n, coef(coeffs, i * q), &terms)
        };

        let zq = &powers[q];
        let mut qin = budget.qin_fnt.iter();
        let mut s = block(b - 1)?;
        for i in 1..b {
            let bi = block(b - 1 - i)?;
            if i == 1 && plan.scalar_last_block == 1 {
                s = bi.add_scaled(1.0, zq, coef(coeffs, (b - 1) * q))?;
                continue;
            }
            let sched = qin.next().expect("one threshold per Horner product");
            debug_assert_eq!(sched.step, i);
            let product = zq.matmul(&s)?;
            let partial = bi.add_scaled(1.0, &product, 1.0)?;
            let (kept, record) = filter_step(StepKind::Qin, sched, fallback, e_r, &partial)?;
            records.push(record);
            s = kept;
        }
        Ok((s, records))
    }
}

/// Largest `eps_g` whose filter guarantee `eps_g * (1 + e_r)` does not exceed `fnt`.
fn filter_norm_threshold(fnt: f64, e_r: f64) -> f64 {
    let mut eps_g = fnt / (1.0 + e_r);
    while eps_g > 0.0 && drop_budget(eps_g, e_r) > fnt {
        eps_g = eps_g.next_down();
    }
    eps_g
}

fn filter_step(
    kind: StepKind,
    sched: &StepThreshold,
    fallback: f64,
    e_r: f64,
    m: &SparseMatrix,
) -> Result<(SparseMatrix, StepRecord)> {
    let applied = if sched.fnt.is_finite() { sched.fnt } else { fallback };
    let eps_g = filter_norm_threshold(applied, e_r);
    let (kept, dropped_norm, dropped_nnz, passes) = if eps_g > 0.0 {
        let out = adaptive_filter(m, eps_g, e_r)?;
        (out.kept, out.dropped_norm, out.dropped_nnz, out.iterations)
    } else {
        (m.clone(), 0.0, 0, 0)
    };
    let record = StepRecord {
        kind,
        step: sched.step,
        weight: sched.weight,
        fnt: sched.fnt,
        applied_fnt: applied,
        dropped_norm,
        dropped_nnz,
        filter_passes: passes,
        nnz_before: m.nnz(),
        nnz_after: kept.nnz(),
    };
    Ok((kept, record))
}

/// [`Psscf::evaluate_series`] with default options.
pub fn evaluate_series(z: &SparseMatrix, coeffs: &CoefficientStream, eps_tol: f64) -> Result<EvalReport> {
    Psscf::default().evaluate_series(z, coeffs, eps_tol)
}

/// [`Psscf::evaluate_polynomial`] with default options.
pub fn evaluate_polynomial_filtered(z: &SparseMatrix, coeffs: &[f64], eps: f64) -> Result<EvalReport> {
    Psscf::default().evaluate_polynomial(z, coeffs, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{cos_stream, exp_stream};
    use crate::ps::{eval_poly_ps, plan};
    use crate::sparse::product_count;

    fn unit_profile() -> NormProfile {
        NormProfile::from_measured(vec![1.0; 11], 10).unwrap()
    }

    fn manual_plan(terms: usize, q: usize, b: usize) -> PsPlan {
        let g = usize::from(terms - q * (b - 1) == 1);
        PsPlan { terms, block_size: q, blocks: b, scalar_last_block: g, mult_count: q + b - 2 - g }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-15 * b.abs().max(1.0)
    }

    fn banded(n: usize, bw: usize, seed: u64, norm: f64) -> SparseMatrix {
        let z = crate::harness::gen_banded(n, bw, seed).unwrap();
        z.scale(norm / z.one_norm())
    }

    #[test]
    fn theta_exp_unit_profile() {
        let t = theta_truncation(1e-14, &exp_stream(), &unit_profile()).unwrap();
        assert_eq!(t.terms, 17);
        // Σ_{i>=17} 1/i! = 2.9760...e-15
        assert!((t.tail - 2.976e-15).abs() < 1e-18, "{}", t.tail);
    }

    #[test]
    fn theta_cos_unit_profile() {
        let t = theta_truncation(1e-14, &cos_stream(), &unit_profile()).unwrap();
        assert_eq!(t.terms, 9);
        // Σ_{j>=9} 1/(2j)! = 1.566...e-16
        assert!((t.tail - 1.566e-16).abs() < 1e-19, "{}", t.tail);
    }

    #[test]
    fn theta_zero_matrix() {
        let p = NormProfile::from_measured([1.0].into_iter().chain([0.0; 10]).collect(), 10).unwrap();
        let t = theta_truncation(1e-14, &exp_stream(), &p).unwrap();
        assert_eq!(t, Truncation { terms: 1, tail: 0.0 });
    }

    #[test]
    fn theta_rejects_growth_and_bad_tolerance() {
        let fact = CoefficientStream::recurrence("i!", 1.0, |i, prev| prev * i as f64);
        assert!(matches!(theta_truncation(1e-10, &fact, &unit_profile()), Err(Error::Divergence { .. })));
        assert!(theta_truncation(0.0, &exp_stream(), &unit_profile()).is_err());
        assert!(theta_truncation(-1.0, &exp_stream(), &unit_profile()).is_err());
    }

    #[test]
    fn theta_finite_stream() {
        let s = CoefficientStream::finite("p", &[1.0, 2.0, 1e-3, 1e-9]);
        let t = theta_truncation(1e-6, &s, &unit_profile()).unwrap();
        assert_eq!(t.terms, 3);
        assert_eq!(t.tail, 1e-9);
    }

    #[test]
    fn block_and_partial_bounds_q2_b2() {
        let coeffs = [1.0, 1.0, 0.5, 1.0 / 6.0];
        let plan = manual_plan(4, 2, 2);
        let (blocks, partials) = bound_blocks_and_partials(&coeffs, &unit_profile(), &plan);
        assert!(close(blocks[0], 2.0) && close(blocks[1], 2.0 / 3.0));
        assert!(close(partials[0], 2.0 / 3.0) && close(partials[1], 8.0 / 3.0));
        let beta = beta_table(&coeffs, &unit_profile(), &plan);
        let d2 = compute_dk(2, &beta, &partials, &unit_profile(), &plan);
        assert!(close(d2, 2.0 / 3.0));
    }

    #[test]
    fn dk_q3_b2_by_hand() {
        let coeffs = exp_stream().take(6);
        let plan = manual_plan(6, 3, 2);
        let p = unit_profile();
        let beta = beta_table(&coeffs, &p, &plan);
        assert!(close(beta[0][2], 0.5));
        assert!(close(beta[1][2], 1.0 / 120.0));
        assert_eq!(beta[0][3], 0.0);
        let (blocks, partials) = bound_blocks_and_partials(&coeffs, &p, &plan);
        assert!(close(blocks[0], 2.5) && close(blocks[1], 13.0 / 60.0));
        assert!(close(partials[1], 2.5 + 13.0 / 60.0));
        assert!(close(compute_dk(2, &beta, &partials, &p, &plan), 0.725));
        assert!(close(compute_dk(3, &beta, &partials, &p, &plan), 13.0 / 60.0));
    }

    #[test]
    fn dk_matches_direct_summation() {
        // Literal double sum over blocks and powers, no shared helpers.
        let z: Vec<f64> = (0..=10).map(|i| 0.9f64.powi(i) * (1.0 + 0.05 * i as f64)).collect();
        let p = NormProfile::from_measured(z, 10).unwrap();
        let coeffs: Vec<f64> = (0..23).map(|i| (-1f64).powi(i) / (1.0 + i as f64)).collect();
        let plan = plan(23).unwrap();
        let (q, b) = (plan.block_size, plan.blocks);
        let a = |idx: usize| coeffs.get(idx).copied().unwrap_or(0.0).abs();
        let mut s = vec![0.0; b];
        for i in 0..b {
            let blk: f64 = (0..q).map(|j| a((b - 1 - i) * q + j) * p.get(j)).sum();
            s[i] = blk + if i == 0 { 0.0 } else { p.get(q) * s[i - 1] };
        }
        let budget = ErrorBudget::new(BudgetMode::Polynomial, 1e-8, 0.0, &coeffs, &p, &plan).unwrap();
        for k in 2..=q {
            let mut want = 0.0;
            for j in 0..b {
                let bt: f64 = (k..q).map(|m| a((b - 1 - j) * q + m) * p.get(m - k)).sum();
                let sp = if j == 0 { 0.0 } else { s[j - 1] };
                want += p.get(q * (b - 1 - j)) * (bt + p.get(q - k) * sp);
            }
            assert!((budget.d[k - 2] - want).abs() <= 1e-13 * want, "k = {k}");
        }
    }

    #[test]
    fn fnt_shares_add_up_to_budget() {
        let z: Vec<f64> = (0..=10).map(|i| 2f64.powi(i)).collect();
        let p = NormProfile::from_measured(z, 10).unwrap();
        for terms in [5usize, 10, 17, 30, 61] {
            let coeffs = exp_stream().take(terms);
            let plan = plan(terms).unwrap();
            let b = ErrorBudget::new(BudgetMode::Series, 1e-10, 1e-11, &coeffs, &p, &plan).unwrap();
            assert_eq!(b.power_fnt.len() + b.qin_fnt.len(), plan.mult_count);
            let total: f64 = b.power_fnt.iter().chain(&b.qin_fnt).map(|s| s.weight * s.fnt).sum();
            assert!((total - 9e-11).abs() <= 1e-24, "N = {terms}: {total}");
        }
    }

    #[test]
    fn budget_needs_room_after_tail() {
        let plan = plan(5).unwrap();
        let coeffs = exp_stream().take(5);
        assert!(ErrorBudget::new(BudgetMode::Series, 1e-10, 1e-10, &coeffs, &unit_profile(), &plan).is_err());
    }

    #[test]
    fn series_error_within_tolerance_banded() {
        let z = banded(100, 3, 11, 2.0);
        for eps in [1e-6, 1e-10, 1e-14] {
            let r = evaluate_series(&z, &exp_stream(), eps).unwrap();
            let unfiltered = eval_poly_ps(&z, &exp_stream().take(r.plan.terms)).unwrap();
            let filter_err = r.result.sub(&unfiltered).unwrap().one_norm();
            assert!(filter_err <= eps - r.budget.tail, "eps {eps}: {filter_err}");
            assert!(r.certified_bound <= eps, "eps {eps}: bound {}", r.certified_bound);
            assert!(r.result.nnz() <= unfiltered.nnz());
            for s in &r.steps {
                assert!(s.dropped_norm <= s.applied_fnt);
            }
        }
    }

    #[test]
    fn products_counted() {
        let z = banded(60, 2, 4, 1.5);
        let before = product_count();
        let r = evaluate_series(&z, &exp_stream(), 1e-12).unwrap();
        assert_eq!((product_count() - before) as usize, r.plan.mult_count);
        assert_eq!(r.steps.len(), r.plan.mult_count);
    }

    #[test]
    fn short_polynomials_are_exact() {
        let z = banded(20, 2, 1, 1.0);
        for coeffs in [vec![3.0], vec![1.0, -2.0]] {
            let r = evaluate_polynomial_filtered(&z, &coeffs, 1e-3).unwrap();
            assert_eq!(r.result, eval_poly_horner(&z, &coeffs).unwrap());
            assert_eq!(r.certified_bound, 0.0);
        }
    }

    #[test]
    fn polynomial_diagonal() {
        let d = [0.5, -0.25, 1.0];
        let z = SparseMatrix::diagonal(&d).unwrap();
        let coeffs: Vec<f64> = (0..12).map(|i| 1.0 / (1 + i) as f64).collect();
        let r = evaluate_polynomial_filtered(&z, &coeffs, 1e-12).unwrap();
        for (k, &x) in d.iter().enumerate() {
            let want = coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a);
            assert!((r.result.get(k, k) - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn infinite_tolerance_drops_all_products() {
        let z = banded(40, 3, 2, 1.0);
        let coeffs = exp_stream().take(10);
        let r = evaluate_polynomial_filtered(&z, &coeffs, f64::INFINITY).unwrap();
        assert!(r.steps.iter().all(|s| s.nnz_after == 0));
        assert!(r.result.nnz() <= eval_poly_ps(&z, &coeffs).unwrap().nnz());
    }

    #[test]
    fn nilpotent_input_is_exact() {
        // Z^2 = 0, so the weights involving high powers vanish.
        let z = SparseMatrix::from_triplets(4, [(0, 1, 1.0), (2, 3, 0.5)]).unwrap();
        let r = evaluate_series(&z, &exp_stream(), 1e-12).unwrap();
        let want = SparseMatrix::identity(4).unwrap().add_scaled(1.0, &z, 1.0).unwrap();
        assert!(r.result.sub(&want).unwrap().one_norm() <= 1e-12);
    }

    #[test]
    fn rejects_non_finite_input() {
        let z = SparseMatrix::from_triplets(2, [(0, 0, f64::INFINITY)]).unwrap();
        assert!(matches!(evaluate_series(&z, &exp_stream(), 1e-8), Err(Error::NonFinite(_))));
    }

    #[test]
    fn certified_bound_recomputes() {
        let z = banded(80, 4, 9, 2.0);
        let r = evaluate_series(&z, &exp_stream(), 1e-9).unwrap();
        assert_eq!(certified_bound(&r), r.certified_bound);
        assert!(r.certified_bound >= r.budget.tail);
    }
}
