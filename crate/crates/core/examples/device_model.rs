//! Drives a single simulated chip byte by byte and prints what each write
//! costs. Pass a technology name (default `cbram`).

use nvm_bench::device::DeviceInstance;
use nvm_bench::profile::{Technology, TechnologyProfile};

fn main() -> nvm_bench::Result<()> {
    let technology: Technology = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "cbram".into())
        .parse()?;
    let profile = TechnologyProfile::default_for(technology);
    let mut device = DeviceInstance::new(profile, 42)?;

    println!(
        "{} ({} bytes, {} pages)",
        technology.display_name(),
        device.capacity(),
        device.page_count()
    );
    println!(
        "{:>6} {:>6} {:>7} {:>10} {:>8} {:>5}",
        "value", "prev", "toggled", "current", "cycles", "erase"
    );
    for value in [0x00u8, 0x01, 0x03, 0xFF, 0xF0, 0x0F, 0xAA] {
        let prev = device.peek(0)?.data;
        let w = device.write_byte(0, value)?;
        println!(
            "{value:>#6x} {prev:>#6x} {:>7} {:>10.5} {:>8} {:>5}",
            w.bits_toggled,
            w.current,
            w.latency_cycles,
            w.auto_erase.is_some()
        );
    }
    let page: Vec<u8> = (0..64).map(|i| i as u8).collect();
    let p = device.write_page(1, &page)?;
    println!(
        "page write: current {:.4} a.u., {} cycles",
        p.current, p.latency_cycles
    );
    println!("read back byte 0: {:#x}", device.read_byte(0)?);
    println!("{:#?}", device.counters());
    Ok(())
}
