//! Runs the network application on every default technology profile and
//! prints the normalized comparison table.

use nvm_bench::benchmark::benchmark_technologies;
use nvm_bench::nn::{ImageInput, NNParameters, INPUTS};
use nvm_bench::profile::TechnologyProfile;

fn main() -> nvm_bench::Result<()> {
    let params = NNParameters::random(7);
    let image = ImageInput::new((0..INPUTS).map(|i| (i * 37 % 256) as u8).collect())?;
    let table = benchmark_technologies(&TechnologyProfile::defaults(), &params, &image, 1, 1)?;
    print!("{}", table.to_text());
    println!();
    for row in &table.rows {
        let m = &row.raw;
        println!(
            "{:<12} write {:>9} cycles  app {:>7} cycles  erases {:>3}  byte current {:.4}",
            m.technology.slug(),
            m.weights_write_cycles,
            m.nn_application_cycles,
            m.erases,
            m.average_byte_write_current_au
        );
    }
    Ok(())
}
