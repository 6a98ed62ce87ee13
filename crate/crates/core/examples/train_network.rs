//! Trains the 768-7-1 integer network on the synthetic image set with
//! differential evolution.
//! Usage: train_network [generations]

use nvm_bench::de::{de_train, evaluate, DEConfig, Dataset, SyntheticSpec};

fn main() -> nvm_bench::Result<()> {
    let generations: u32 = std::env::args()
        .nth(1)
        .map_or(300, |s| s.parse().expect("generations"));
    let dataset = Dataset::synthetic(&SyntheticSpec::default())?;
    let config = DEConfig {
        generations,
        ..DEConfig::default()
    };
    println!(
        "{} samples ({:.0}% positive), NP={} F={} CR={}",
        dataset.len(),
        100.0 * dataset.positive_fraction(),
        config.population_size,
        config.differential_weight,
        config.crossover_rate
    );
    let result = de_train(&dataset, &config)?;
    for (g, acc) in result.history.iter().enumerate().step_by(25) {
        println!("generation {g:>4}: {acc:.4}");
    }
    println!("final accuracy {:.4}", result.accuracy);
    assert_eq!(evaluate(&result.best, &dataset), result.accuracy);
    Ok(())
}
