//! Estimated power norms ||Z^i||_1 next to exact ones, and the geometric
//! extrapolation used beyond the measured range.

use psscf::harness::gen_banded;
use psscf::norm::estimate_power_one_norm;
use psscf::{NormConfig, NormProfile};

fn main() -> psscf::Result<()> {
    let z = gen_banded(120, 3, 11)?;
    let z = z.scale(2.0 / z.one_norm());

    let exact = NormProfile::build(&z, &NormConfig { exact_dim_limit: usize::MAX, ..NormConfig::default() })?;
    let estimated = NormProfile::build(&z, &NormConfig { exact_dim_limit: 0, ..NormConfig::default() })?;
    println!(" i   exact        estimate     t=4");
    for i in 1..=10 {
        let wide = estimate_power_one_norm(&z, i, 4, 99)?;
        println!("{i:>2}   {:.6e}  {:.6e}  {wide:.6e}", exact.get(i), estimated.get(i));
    }
    println!("alpha: {:.6} (exact norms), {:.6} (estimates)", exact.alpha(), estimated.alpha());
    for i in [12, 16, 20] {
        println!("z_{i} = {:.3e}", estimated.get(i));
    }
    Ok(())
}
