use psscf::filter::{adaptive_filter, drop_budget};
use psscf::SparseMatrix;

fn main() -> psscf::Result<()> {
    // A matrix with entries decaying away from the diagonal.
    let n: usize = 200;
    let mut trip = Vec::new();
    for r in 0..n {
        for c in 0..n {
            trip.push((r, c, 0.5f64.powi(r.abs_diff(c) as i32)));
        }
    }
    let c = SparseMatrix::from_triplets(n, trip)?;
    println!("input nnz {} (dense)", c.nnz());

    for eps_g in [1e-2, 1e-6, 1e-10] {
        let out = adaptive_filter(&c, eps_g, 0.1)?;
        println!(
            "eps_g {eps_g:.0e}: kept {:>6}, dropped norm {:.3e} <= {:.3e}, passes {}, thresholds {:?}",
            out.kept.nnz(),
            out.dropped_norm,
            drop_budget(eps_g, 0.1),
            out.iterations,
            out.thresholds.iter().map(|t| format!("{t:.2e}")).collect::<Vec<_>>()
        );
    }
    Ok(())
}
