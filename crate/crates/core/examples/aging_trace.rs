//! Page current and latency over repeated random page writes. CBRAM's
//! write-verify-write retries make both climb as cells wear.
//! Usage: aging_trace [technology] [cycles]

use nvm_bench::characterization::run_aging;
use nvm_bench::device::DeviceInstance;
use nvm_bench::profile::{Technology, TechnologyProfile};

fn main() -> nvm_bench::Result<()> {
    let mut args = std::env::args().skip(1);
    let technology: Technology = args.next().unwrap_or_else(|| "cbram".into()).parse()?;
    let cycles: u64 = args.next().map_or(200_000, |s| s.parse().expect("cycles"));

    let mut device = DeviceInstance::new(TechnologyProfile::default_for(technology), 1)?;
    let trace = run_aging(&mut device, cycles, 100)?;
    let step = (trace.samples.len() / 10).max(1);
    println!(
        "{:>8} {:>10} {:>9} {:>9}",
        "cycle", "current", "latency", "attempts"
    );
    for s in trace.samples.iter().step_by(step) {
        println!(
            "{:>8} {:>10.4} {:>9} {:>9.3}",
            s.cycle_index, s.page_current, s.page_latency_cycles, s.mean_wvw_attempts
        );
    }
    let (l0, l1) = trace.latency_deciles();
    let (c0, c1) = trace.current_deciles();
    println!("latency deciles {l0:.0} -> {l1:.0} cycles, current deciles {c0:.4} -> {c1:.4} a.u.");
    Ok(())
}
