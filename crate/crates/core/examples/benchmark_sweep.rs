//! Filtered vs unfiltered evaluation over bandwidths 1..8; the CSV goes to
//! stdout, a per-bandwidth summary to stderr.
//!
//! cargo run --release --example benchmark_sweep -- [n] [trials] > sweep.csv

use psscf::harness::{run_benchmark, summarize, BenchConfig};
use psscf::io::format_csv;

fn main() -> psscf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = BenchConfig {
        sizes: vec![args.first().and_then(|s| s.parse().ok()).unwrap_or(200)],
        trials_per_bandwidth: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3),
        ..BenchConfig::default()
    };
    let rows = run_benchmark(&cfg)?;
    format_csv(&rows, &mut std::io::stdout().lock()).expect("stdout");
    eprintln!("method     bw  median time  mean sparsity  max rel error");
    for s in summarize(&rows) {
        eprintln!(
            "{:<9} {:>3}  {:.3e}    {:.4}         {:.2e}",
            s.method.to_string(),
            s.bandwidth,
            s.median_time,
            s.mean_sparsity,
            s.max_rel_error
        );
    }
    Ok(())
}
