//! Sparse matrix polynomials and power series by Paterson–Stockmeyer
//! evaluation with adaptive filtering.
//!
//! Every intermediate product of the evaluation is passed through a filter
//! that drops small entries. The amount each filter may drop is fixed
//! beforehand from bounds on the propagated error, so the final result
//! satisfies `||F - f(Z)||_1 <= eps` for the requested tolerance while the
//! intermediates stay sparse.
//!
//! ```
//! use psscf::{expm_filtered, SparseMatrix};
//!
//! let z = SparseMatrix::from_triplets(3, [(0, 1, 0.5), (1, 2, 0.5)]).unwrap();
//! let report = expm_filtered(&z, 1e-12).unwrap();
//! assert!((report.result.get(0, 2) - 0.125).abs() < 1e-12);
//! assert!(report.certified_bound <= 1e-12);
//! ```
//!
//! ## Examples
//!
//! ```text
//! examples/
//! ├── matrix_exponential.rs   # e^A of a banded matrix, error report
//! ├── matrix_cosine.rs        # cos A through the series in A^2
//! ├── filtered_polynomial.rs  # explicit coefficients, finite tolerance
//! ├── custom_series.rs        # user coefficient stream (log(1+x)/x, ...)
//! ├── adaptive_filtering.rs   # the filter on its own
//! ├── norm_profile.rs         # power-norm estimates and extrapolation
//! ├── network_matrix.rs       # normalized adjacency of a ring graph
//! ├── benchmark_sweep.rs      # PSSCF vs PS vs dense reference, CSV out
//! └── matrix_market_io.rs     # reading and writing .mtx files
//! ```
//!
//! ```bash
//! cargo run --release -p psscf --example matrix_exponential
//! cargo run --release -p psscf --example benchmark_sweep -- 200
//! ```
//!
//! The `psscf` binary wraps the same functionality (`exp`, `cos`, `poly`,
//! `bench`, `gen`); see [`cli`].

pub mod cli;
pub mod engine;
pub mod error;
pub mod filter;
pub mod functions;
pub mod harness;
pub mod io;
pub mod norm;
pub mod ps;
pub mod sparse;

pub use engine::{
    certified_bound, evaluate_polynomial_filtered, evaluate_series, theta_truncation, CoefficientStream,
    ErrorBudget, EvalReport, Psscf, PsscfOptions, StepKind, StepRecord, Truncation,
};
pub use error::{Error, Result};
pub use filter::{adaptive_filter, FilterOutcome, DEFAULT_RELATIVE_SLACK};
pub use functions::{cosm_filtered, evaluate_function, expm_filtered, FunctionKind, FunctionSpec};
pub use norm::{NormConfig, NormProfile};
pub use ps::{eval_poly_horner, eval_poly_ps, plan, PsPlan};
pub use sparse::SparseMatrix;
