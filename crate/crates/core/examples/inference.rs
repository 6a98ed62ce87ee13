//! Stores one parameter set on every technology, reads it back into the
//! weight buffer and classifies the same image.

use nvm_bench::device::DeviceInstance;
use nvm_bench::nn::{forward, ImageInput, NNParameters, NnEngine, INPUTS};
use nvm_bench::profile::TechnologyProfile;

fn main() -> nvm_bench::Result<()> {
    let params = NNParameters::random(5);
    let image = ImageInput::new((0..INPUTS).map(|i| (i % 251) as u8).collect())?;
    let expected = forward(&params, &image);
    println!(
        "reference prediction {} hidden {:?}",
        expected.prediction, expected.hidden_activations
    );
    println!(
        "{:<12} {:>10} {:>12} {:>10} {:>10}",
        "technology", "writes", "store cyc", "reads", "load cyc"
    );
    for profile in TechnologyProfile::defaults() {
        let technology = profile.technology;
        let mut engine = NnEngine::new(DeviceInstance::new(profile, 1)?);
        let store = engine.store_parameters(&params)?;
        let report = engine.infer(&image)?;
        assert_eq!(report.prediction, expected.prediction);
        println!(
            "{:<12} {:>10} {:>12} {:>10} {:>10}",
            technology.slug(),
            store.byte_writes,
            store.latency_cycles,
            report.weight_load.byte_reads,
            report.weight_load.latency_cycles
        );
    }
    Ok(())
}
