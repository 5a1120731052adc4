//! A polynomial with explicit coefficients, filtered to a loose tolerance,
//! against unfiltered Paterson-Stockmeyer.

use psscf::harness::gen_banded;
use psscf::{eval_poly_ps, plan, Psscf};

fn main() -> psscf::Result<()> {
    let z = gen_banded(400, 4, 1)?;
    let z = z.scale(1.0 / z.one_norm());
    // Chebyshev-like alternating coefficients.
    let coeffs: Vec<f64> = (0..25).map(|i| (-0.5f64).powi(i) / (1 + i) as f64).collect();
    let p = plan(coeffs.len())?;
    println!("N = {}: q = {}, b = {}, {} products", p.terms, p.block_size, p.blocks, p.mult_count);

    let exact = eval_poly_ps(&z, &coeffs)?;
    let evaluator = Psscf::default();
    for eps in [1e-4, 1e-8, 1e-12] {
        let r = evaluator.evaluate_polynomial(&z, &coeffs, eps)?;
        let err = r.result.sub(&exact)?.one_norm();
        println!(
            "eps {eps:.0e}: nnz {} vs {} unfiltered, error {err:.2e}, certified {:.2e}",
            r.result.nnz(),
            exact.nnz(),
            r.certified_bound
        );
    }
    Ok(())
}
