//! Exponential of a random banded matrix, with the error report.
//!
//! cargo run --release --example matrix_exponential -- [n] [bandwidth] [tol]

use psscf::harness::{dense_reference, gen_banded, one_norm_distance};
use psscf::{expm_filtered, FunctionSpec};

fn main() -> psscf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n = args.first().and_then(|s| s.parse().ok()).unwrap_or(300);
    let bw = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let tol: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-12);

    let z = gen_banded(n, bw, 42)?;
    let z = z.scale(2.0 / z.one_norm());
    let report = expm_filtered(&z, tol)?;

    println!("n = {n}, bandwidth = {bw}, nnz(Z) = {}", z.nnz());
    println!(
        "terms N = {}, q = {}, b = {}, products = {}",
        report.plan.terms, report.plan.block_size, report.plan.blocks, report.products()
    );
    println!("tail bound {:.3e}, filter budget {:.3e}", report.budget.tail, report.budget.filter_budget);
    for s in &report.steps {
        println!(
            "  {:?} {:>2}: nnz {:>6} -> {:>6}, dropped {:.2e} (threshold {:.2e})",
            s.kind, s.step, s.nnz_before, s.nnz_after, s.dropped_norm, s.applied_fnt
        );
    }
    println!("certified bound {:.3e}", report.certified_bound);
    println!("result sparsity {:.4}", report.result.sparsity());

    if n <= 1000 {
        let reference = dense_reference(&z, &FunctionSpec::exp(), tol / 100.0)?;
        println!("actual error vs dense reference {:.3e}", one_norm_distance(&report.result, &reference));
    }
    Ok(())
}
