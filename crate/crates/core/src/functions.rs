//! Matrix exponential and cosine front-ends.
//!
//! The cosine is evaluated as a power series in `W = A^2`,
//! `cos A = Σ_j (-1)^j W^j / (2j)!`, so only half the degree is needed and
//! no odd powers with zero coefficients are formed. `W` is an exact product;
//! the tolerance therefore applies to `cos A` directly.

use std::time::Instant;

use crate::engine::{CoefficientStream, EvalReport, Psscf};
use crate::error::Result;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Exp,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgumentTransform {
    None,
    /// The series is in `A^2`.
    Square,
}

#[derive(Debug, Clone)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    pub stream: CoefficientStream,
    pub argument_transform: ArgumentTransform,
}

impl FunctionSpec {
    pub fn exp() -> Self {
        FunctionSpec {
            kind: FunctionKind::Exp,
            stream: exp_stream(),
            argument_transform: ArgumentTransform::None,
        }
    }

    pub fn cos() -> Self {
        FunctionSpec {
            kind: FunctionKind::Cos,
            stream: cos_stream(),
            argument_transform: ArgumentTransform::Square,
        }
    }

    pub fn of(kind: FunctionKind) -> Self {
        match kind {
            FunctionKind::Exp => Self::exp(),
            FunctionKind::Cos => Self::cos(),
        }
    }

    /// The matrix the series is taken in: `A` or `A^2`.
    pub fn series_argument(&self, a: &SparseMatrix) -> Result<SparseMatrix> {
        match self.argument_transform {
            ArgumentTransform::None => Ok(a.clone()),
            ArgumentTransform::Square => a.matmul(a),
        }
    }

    /// The scalar function, for diagonal checks.
    pub fn scalar(&self, x: f64) -> f64 {
        match self.kind {
            FunctionKind::Exp => x.exp(),
            FunctionKind::Cos => x.cos(),
        }
    }
}

/// `1/i!`.
pub fn exp_stream() -> CoefficientStream {
    CoefficientStream::recurrence("exp", 1.0, |i, prev| prev / i as f64)
}

/// `(-1)^j / (2j)!`, the cosine coefficients in `W = A^2`.
pub fn cos_stream() -> CoefficientStream {
    CoefficientStream::recurrence("cos(sqrt(w))", 1.0, |j, prev| {
        let j = j as f64;
        -prev / ((2.0 * j - 1.0) * (2.0 * j))
    })
}

/// Filtered evaluation of `spec` at `a`.
pub fn evaluate_function(
    evaluator: &Psscf,
    spec: &FunctionSpec,
    a: &SparseMatrix,
    eps_tol: f64,
) -> Result<EvalReport> {
    let start = Instant::now();
    let w = spec.series_argument(a)?;
    let mut report = evaluator.evaluate_series(&w, &spec.stream, eps_tol)?;
    if spec.argument_transform == ArgumentTransform::Square {
        report.extra_products = 1;
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// `e^A` to 1-norm accuracy `eps_tol`.
pub fn expm_filtered(a: &SparseMatrix, eps_tol: f64) -> Result<EvalReport> {
    evaluate_function(&Psscf::default(), &FunctionSpec::exp(), a, eps_tol)
}

/// `cos A` to 1-norm accuracy `eps_tol`.
pub fn cosm_filtered(a: &SparseMatrix, eps_tol: f64) -> Result<EvalReport> {
    evaluate_function(&Psscf::default(), &FunctionSpec::cos(), a, eps_tol)
}
