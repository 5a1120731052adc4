//! Any power series can be evaluated once its coefficients are given as a
//! stream. Here: log(I + Z) Z^{-1} = Σ (-1)^i Z^i / (i + 1), and the
//! resolvent (I - Z)^{-1} = Σ Z^i, both for ||Z|| < 1.

use psscf::harness::gen_banded;
use psscf::{CoefficientStream, Psscf};

fn main() -> psscf::Result<()> {
    let z = gen_banded(150, 2, 3)?;
    let z = z.scale(0.5 / z.one_norm());
    let evaluator = Psscf::default();

    let log_ratio = CoefficientStream::from_fn("log(1+x)/x", |i| if i % 2 == 0 { 1.0 } else { -1.0 } / (i + 1) as f64);
    let geometric = CoefficientStream::from_fn("1/(1-x)", |_| 1.0);

    for stream in [log_ratio, geometric] {
        let r = evaluator.evaluate_series(&z, &stream, 1e-10)?;
        println!(
            "{:<12} N = {:>2}, nnz {:>6}, certified {:.2e}",
            stream.label(),
            r.plan.terms,
            r.result.nnz(),
            r.certified_bound
        );
    }

    // The resolvent can be checked directly: (I - Z) X should be I.
    let r = evaluator.evaluate_series(&z, &CoefficientStream::from_fn("1/(1-x)", |_| 1.0), 1e-10)?;
    let id = psscf::SparseMatrix::identity(z.dim())?;
    let residual = id.sub(&z)?.matmul(&r.result)?.sub(&id)?.one_norm();
    println!("||(I - Z) X - I||_1 = {residual:.2e}");
    Ok(())
}
