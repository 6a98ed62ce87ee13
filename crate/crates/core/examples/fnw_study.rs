//! Flip-N-Write against direct writes on worn CBRAM, paired by seed.
//! Usage: fnw_study [seeds] [cycles]

use nvm_bench::encoding::compare_endurance;
use nvm_bench::profile::{Technology, TechnologyProfile};

fn main() -> nvm_bench::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().map_or(10, |s| s.parse().expect("seed count"));
    let cycles: u64 = args.next().map_or(200_000, |s| s.parse().expect("cycles"));
    let seeds: Vec<u64> = (1..=n).collect();

    let profile = TechnologyProfile::default_for(Technology::Cbram);
    let cmp = compare_endurance(&profile, cycles, &seeds)?;
    println!(
        "{:>4} {:>9} {:>9} {:>8} {:>8}",
        "seed", "base 2b", "fnw 2b", "x 2b", "x total"
    );
    for s in &cmp.per_seed {
        println!(
            "{:>4} {:>9} {:>9} {:>8.2} {:>8.2}",
            s.seed, s.baseline_2bit, s.fnw_2bit, s.reduction_factor_2bit, s.reduction_factor_total
        );
    }
    println!(
        "geometric mean: 2-bit {:.2}x, total {:.2}x",
        cmp.geomean_reduction_factor_2bit, cmp.geomean_reduction_factor_total
    );
    let toggles: (u64, u64) = cmp.per_seed.iter().fold((0, 0), |a, s| {
        (a.0 + s.baseline_toggles, a.1 + s.fnw_toggles)
    });
    println!(
        "bit toggles: direct {} vs fnw {} ({:.3})",
        toggles.0,
        toggles.1,
        toggles.1 as f64 / toggles.0 as f64
    );
    Ok(())
}
