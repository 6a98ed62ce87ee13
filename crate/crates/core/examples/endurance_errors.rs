//! Cycles one page with random data and classifies every read-back error
//! by the number of wrong bits.
//! Usage: endurance_errors [cycles]

use nvm_bench::characterization::run_endurance;
use nvm_bench::device::DeviceInstance;
use nvm_bench::profile::{Technology, TechnologyProfile};

fn main() -> nvm_bench::Result<()> {
    let cycles: u64 = std::env::args()
        .nth(1)
        .map_or(200_000, |s| s.parse().expect("cycles"));
    let mut device = DeviceInstance::new(TechnologyProfile::default_for(Technology::Cbram), 1)?;
    let run = run_endurance(&mut device, cycles, None)?;
    let h = &run.histogram;
    println!("{} cycles, {} erroneous reads", cycles, h.total_errors);
    for k in 1..=8 {
        let bar = "#".repeat((60 * h.count(k) / h.total_errors.max(1)) as usize);
        println!("{k}-bit {:>8} {bar}", h.count(k));
    }
    let worst = h
        .per_address
        .iter()
        .enumerate()
        .max_by_key(|(_, c)| c.iter().sum::<u64>())
        .map(|(a, c)| (a, c.iter().sum::<u64>()));
    if let Some((addr, n)) = worst {
        println!("worst address {addr}: {n} errors");
    }
    Ok(())
}
