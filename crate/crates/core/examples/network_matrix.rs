//! Communicability-style exponential of a normalized graph adjacency
//! matrix A = I - B / (2 rho(B)).

use psscf::harness::graph_normalize_with;
use psscf::{expm_filtered, SparseMatrix};

fn main() -> psscf::Result<()> {
    // Ring of 500 nodes with a few chords.
    let n = 500;
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, 1.0));
        edges.push(((i + 1) % n, i, 1.0));
    }
    for i in (0..n).step_by(50) {
        let j = (i + n / 2) % n;
        edges.push((i, j, 1.0));
        edges.push((j, i, 1.0));
    }
    let b = SparseMatrix::from_triplets(n, edges)?;
    let (a, rho) = graph_normalize_with(&b, 1)?;
    println!("rho(B) ~ {:.6} after {} iterations{}", rho.value, rho.iterations, if rho.surrogate { " (|B| surrogate)" } else { "" });

    let r = expm_filtered(&a, 1e-10)?;
    println!(
        "exp(A): nnz {} of {} ({:.2}% dense), certified {:.2e}",
        r.result.nnz(),
        n * n,
        100.0 * r.result.sparsity(),
        r.certified_bound
    );
    Ok(())
}
