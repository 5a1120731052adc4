use psscf::io::{read_matrix_market, write_matrix_market};
use psscf::{expm_filtered, SparseMatrix};

fn main() -> psscf::Result<()> {
    let dir = std::env::temp_dir().join("psscf-example");
    std::fs::create_dir_all(&dir).map_err(|e| psscf::Error::Io { path: dir.clone(), source: e })?;
    let input = dir.join("tridiag.mtx");
    let output = dir.join("exp_tridiag.mtx");

    // Symmetric files list one triangle; the reader mirrors it.
    std::fs::write(
        &input,
        "%%MatrixMarket matrix coordinate real symmetric\n4 4 7\n1 1 -0.5\n2 1 0.25\n2 2 -0.5\n3 2 0.25\n3 3 -0.5\n4 3 0.25\n4 4 -0.5\n",
    )
    .map_err(|e| psscf::Error::Io { path: input.clone(), source: e })?;

    let a = read_matrix_market(&input)?;
    println!("read {}x{} with {} stored entries", a.dim(), a.dim(), a.nnz());
    let e = expm_filtered(&a, 1e-14)?;
    write_matrix_market(&e.result, &output)?;
    let back: SparseMatrix = read_matrix_market(&output)?;
    assert_eq!(back, e.result);
    println!("wrote {}:", output.display());
    print!("{}", std::fs::read_to_string(&output).unwrap_or_default());
    Ok(())
}
