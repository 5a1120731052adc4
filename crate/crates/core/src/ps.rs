//! Unfiltered Paterson–Stockmeyer and Horner evaluation of matrix polynomials.
//!
//! A polynomial `P(Z) = Σ_{i<N} a_i Z^i` is split into `b` blocks of `q`
//! terms, `B_i = Σ_{j<q} a_{iq+j} Z^j`, and evaluated as a Horner recursion in
//! `Z^q`: `S_0 = B_{b-1}`, `S_i = B_{b-1-i} + Z^q S_{i-1}`, `P = S_{b-1}`.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Block layout and product count for an `N`-term polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsPlan {
    /// Number of coefficients `a_0..a_{N-1}`.
    pub terms: usize,
    /// Block size; the largest power formed is `Z^q`.
    pub block_size: usize,
    /// Number of blocks.
    pub blocks: usize,
    /// 1 when the last block is a multiple of the identity.
    pub scalar_last_block: usize,
    /// Matrix products needed.
    pub mult_count: usize,
}

impl PsPlan {
    pub fn new(terms: usize) -> Result<Self> {
        if terms == 0 {
            return Err(Error::invalid("a polynomial needs at least one coefficient"));
        }
        if terms <= 2 {
            return Ok(PsPlan {
                terms,
                block_size: 1,
                blocks: terms,
                scalar_last_block: 0,
                mult_count: 0,
            });
        }
        let q = (terms - 1).isqrt();
        let b = terms.div_ceil(q);
        let g = usize::from(terms - q * (b - 1) == 1);
        Ok(PsPlan {
            terms,
            block_size: q,
            blocks: b,
            scalar_last_block: g,
            mult_count: q + b - 2 - g,
        })
    }

    /// Number of filterable products, `q + b - 2 - g` (zero for `N <= 2`).
    pub fn filtered_steps(&self) -> usize {
        self.mult_count
    }
}

/// `plan(N)`.
pub fn plan(terms: usize) -> Result<PsPlan> {
    PsPlan::new(terms)
}

/// Coefficient `a_idx`, zero beyond the end.
pub(crate) fn coef(coeffs: &[f64], idx: usize) -> f64 {
    coeffs.get(idx).copied().unwrap_or(0.0)
}

/// Horner evaluation. The innermost step `a_{N-1} Z + a_{N-2} I` needs no
/// product, so `N - 2` products are formed for `N >= 2`.
pub fn eval_poly_horner(z: &SparseMatrix, coeffs: &[f64]) -> Result<SparseMatrix> {
    let n = z.dim();
    match coeffs.len() {
        0 => Err(Error::invalid("a polynomial needs at least one coefficient")),
        1 => Ok(SparseMatrix::identity(n)?.scale(coeffs[0])),
        len => {
            let mut acc =
                SparseMatrix::linear_combination(n, coeffs[len - 2], &[(coeffs[len - 1], z)])?;
            for &a in coeffs[..len - 2].iter().rev() {
                acc = z.matmul(&acc)?;
                acc = SparseMatrix::linear_combination(n, a, &[(1.0, &acc)])?;
            }
            Ok(acc)
        }
    }
}

/// Paterson–Stockmeyer evaluation using exactly `plan(N).mult_count` products.
/// Polynomials with at most four terms are evaluated by Horner's rule.
pub fn eval_poly_ps(z: &SparseMatrix, coeffs: &[f64]) -> Result<SparseMatrix> {
    let plan = PsPlan::new(coeffs.len())?;
    if coeffs.len() <= 4 {
        return eval_poly_horner(z, coeffs);
    }
    let n = z.dim();
    let q = plan.block_size;
    let b = plan.blocks;

    // powers[j] = Z^j for j = 1..=q (index 0 unused; the identity is implicit).
    let mut powers: Vec<SparseMatrix> = Vec::with_capacity(q + 1);
    powers.push(SparseMatrix::identity(n)?);
    powers.push(z.clone());
    for _ in 2..=q {
        let next = z.matmul(powers.last().expect("nonempty"))?;
        powers.push(next);
    }

    let block = |i: usize| -> Result<SparseMatrix> {
        let terms: Vec<(f64, &SparseMatrix)> =
            (1..q).map(|j| (coef(coeffs, i * q + j), &powers[j])).collect();
        SparseMatrix::linear_combination(n, coef(coeffs, i * q), &terms)
    };

    let zq = &powers[q];
    let mut s = block(b - 1)?;
    for i in 1..b {
        let bi = block(b - 1 - i)?;
        s = if i == 1 && plan.scalar_last_block == 1 {
            bi.add_scaled(1.0, zq, coef(coeffs, (b - 1) * q))?
        } else {
            let prod = zq.matmul(&s)?;
            bi.add_scaled(1.0, &prod, 1.0)?
        };
    }
    Ok(s)
}
