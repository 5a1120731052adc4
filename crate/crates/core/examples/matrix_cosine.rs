//! cos A, evaluated as a series in A^2.

use psscf::harness::{dense_reference, gen_banded, one_norm_distance};
use psscf::{cosm_filtered, FunctionSpec, SparseMatrix};

fn main() -> psscf::Result<()> {
    // Diagonal check: cos(pi) = -1, cos(0) = 1.
    let d = SparseMatrix::diagonal(&[std::f64::consts::PI, 0.0, 1.0])?;
    let r = cosm_filtered(&d, 1e-14)?;
    println!("cos(diag(pi, 0, 1)) diagonal: {:.15} {:.15} {:.15}", r.result.get(0, 0), r.result.get(1, 1), r.result.get(2, 2));

    let a = gen_banded(200, 2, 7)?;
    let a = a.scale(2.0 / a.one_norm());
    let r = cosm_filtered(&a, 1e-12)?;
    let reference = dense_reference(&a, &FunctionSpec::cos(), 1e-14)?;
    println!(
        "banded 200x200: N = {} terms in A^2, {} products (one for A^2), nnz {}",
        r.plan.terms,
        r.products(),
        r.result.nnz()
    );
    println!("certified {:.2e}, actual {:.2e}", r.certified_bound, one_norm_distance(&r.result, &reference));
    Ok(())
}
