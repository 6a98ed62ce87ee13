//! Differential evolution (DE/rand/1/bin) over integer network parameters.
//!
//! The genome is a real vector of length 5391 in the canonical parameter
//! layout. Fitness quantizes it (round half away from zero, clamp to a
//! signed byte) and scores classification accuracy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{forward, ImageInput, NNParameters, HIGH, INPUTS, LOW, PARAMETER_BYTES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DEConfig {
    pub population_size: usize,
    pub differential_weight: f64,
    pub crossover_rate: f64,
    pub generations: u32,
    pub seed: u64,
    /// Stop early once the best individual reaches this accuracy.
    pub target_accuracy: Option<f64>,
}

impl Default for DEConfig {
    fn default() -> Self {
        DEConfig {
            population_size: 40,
            differential_weight: 0.7,
            crossover_rate: 0.9,
            generations: 300,
            seed: 1,
            target_accuracy: None,
        }
    }
}

impl DEConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 4 {
            return Err(Error::config("population_size must be >= 4"));
        }
        if !(self.differential_weight > 0.0 && self.differential_weight <= 2.0) {
            return Err(Error::config("differential_weight must lie in (0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::config("crossover_rate must lie in [0, 1]"));
        }
        if let Some(t) = self.target_accuracy {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::config("target_accuracy must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub image: ImageInput,
    /// 0 or 255.
    pub label: u8,
}

/// Parameters of the two-blob synthetic image set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub count: usize,
    /// Distance between the two class means along a random +-1 pixel template.
    pub separation: f64,
    /// Per-pixel Gaussian noise standard deviation.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            count: 209,
            separation: 8.0,
            noise: 60.0,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    #[serde(default)]
    pub generator: Option<SyntheticSpec>,
}

fn pixel(mean: f64, noise: f64, rng: &mut ChaCha8Rng) -> u8 {
    let z: f64 = if noise > 0.0 {
        rng.sample(StandardNormal)
    } else {
        0.0
    };
    (mean + noise * z).round().clamp(0.0, 255.0) as u8
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let d = Dataset {
            samples,
            generator: None,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::config("dataset needs at least two samples"));
        }
        if let Some(s) = self
            .samples
            .iter()
            .find(|s| s.label != LOW && s.label != HIGH)
        {
            return Err(Error::config(format!(
                "label must be 0 or 255, got {}",
                s.label
            )));
        }
        let positives = self.samples.iter().filter(|s| s.label == HIGH).count();
        if positives == 0 || positives == self.samples.len() {
            return Err(Error::config("dataset must contain both labels"));
        }
        Ok(())
    }

    /// Two Gaussian image classes: `128 +- separation / 2` along a random
    /// sign template, with independent per-pixel noise. Half the samples
    /// (rounded down) are positive; order is shuffled.
    pub fn synthetic(spec: &SyntheticSpec) -> Result<Self> {
        if spec.count < 2 {
            return Err(Error::config("synthetic dataset needs count >= 2"));
        }
        if !(spec.separation.is_finite() && spec.noise.is_finite() && spec.noise >= 0.0) {
            return Err(Error::config(
                "separation and noise must be finite, noise >= 0",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let template: Vec<f64> = (0..INPUTS)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let mut labels: Vec<u8> = (0..spec.count)
            .map(|i| if i < spec.count / 2 { HIGH } else { LOW })
            .collect();
        labels.shuffle(&mut rng);
        let samples = labels
            .into_iter()
            .map(|label| {
                let sign = if label == HIGH { 0.5 } else { -0.5 };
                let pixels = template
                    .iter()
                    .map(|t| pixel(128.0 + sign * spec.separation * t, spec.noise, &mut rng))
                    .collect();
                Sample {
                    image: ImageInput::new(pixels).expect("768 pixels"),
                    label,
                }
            })
            .collect();
        let d = Dataset {
            samples,
            generator: Some(spec.clone()),
        };
        d.validate()?;
        Ok(d)
    }

    /// Bright images (mean 170) labelled 255, dark images (mean 85)
    /// labelled 0, alternating.
    pub fn brightness(count: usize, noise: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..count)
            .map(|i| {
                let (mean, label) = if i % 2 == 0 {
                    (170.0, HIGH)
                } else {
                    (85.0, LOW)
                };
                let pixels = (0..INPUTS).map(|_| pixel(mean, noise, &mut rng)).collect();
                Sample {
                    image: ImageInput::new(pixels).expect("768 pixels"),
                    label,
                }
            })
            .collect();
        Dataset::new(samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.samples.iter().filter(|s| s.label == HIGH).count() as f64 / self.len() as f64
    }
}

/// Fraction of samples whose prediction equals the label.
pub fn evaluate(params: &NNParameters, dataset: &Dataset) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let correct = dataset
        .samples
        .iter()
        .filter(|s| forward(params, &s.image).prediction == s.label)
        .count();
    correct as f64 / dataset.len() as f64
}

/// Round half away from zero, then clamp to `[-128, 127]`.
pub fn quantize_gene(g: f64) -> i8 {
    g.round().clamp(-128.0, 127.0) as i8
}

pub fn quantize(genome: &[f64]) -> NNParameters {
    let bytes: Vec<u8> = genome.iter().map(|&g| quantize_gene(g) as u8).collect();
    NNParameters::from_bytes(&bytes).expect("genome has the parameter length")
}

pub fn genome_of(params: &NNParameters) -> Vec<f64> {
    params
        .to_bytes()
        .into_iter()
        .map(|b| b as i8 as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingResult {
    pub best: NNParameters,
    pub accuracy: f64,
    /// Best accuracy after initialization (index 0) and after every generation.
    pub history: Vec<f64>,
    pub generations_run: u32,
}

const GENE_MIN: f64 = -128.0;
const GENE_MAX: f64 = 127.0;

fn best_index(fitness: &[f64]) -> usize {
    // first index wins ties
    let mut best = 0;
    for (i, &f) in fitness.iter().enumerate().skip(1) {
        if f > fitness[best] {
            best = i;
        }
    }
    best
}

/// Initial population for `config` (uniform over the signed-byte range).
pub fn initial_population(config: &DEConfig) -> (ChaCha8Rng, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let population = (0..config.population_size)
        .map(|_| {
            (0..PARAMETER_BYTES)
                .map(|_| rng.gen_range(GENE_MIN..=GENE_MAX))
                .collect()
        })
        .collect();
    (rng, population)
}

pub fn de_train(dataset: &Dataset, config: &DEConfig) -> Result<TrainingResult> {
    config.validate()?;
    dataset.validate()?;
    let np = config.population_size;
    let (mut rng, mut population) = initial_population(config);
    let score = |genome: &Vec<f64>| evaluate(&quantize(genome), dataset);
    let mut fitness: Vec<f64> = population.par_iter().map(score).collect();
    let mut history = vec![fitness[best_index(&fitness)]];
    let reached = |f: f64| config.target_accuracy.is_some_and(|t| f >= t);

    let mut generations_run = 0;
    for _ in 0..config.generations {
        if reached(*history.last().expect("non-empty")) {
            break;
        }
        let trials: Vec<Vec<f64>> = (0..np)
            .map(|i| {
                let pick = |rng: &mut ChaCha8Rng, taken: &[usize]| loop {
                    let r = rng.gen_range(0..np);
                    if !taken.contains(&r) {
                        break r;
                    }
                };
                let r1 = pick(&mut rng, &[i]);
                let r2 = pick(&mut rng, &[i, r1]);
                let r3 = pick(&mut rng, &[i, r1, r2]);
                let forced = rng.gen_range(0..PARAMETER_BYTES);
                let (a, b, c) = (&population[r1], &population[r2], &population[r3]);
                (0..PARAMETER_BYTES)
                    .map(|j| {
                        if j == forced || rng.gen::<f64>() < config.crossover_rate {
                            (a[j] + config.differential_weight * (b[j] - c[j]))
                                .clamp(GENE_MIN, GENE_MAX)
                        } else {
                            population[i][j]
                        }
                    })
                    .collect()
            })
            .collect();
        let trial_fitness: Vec<f64> = trials.par_iter().map(score).collect();
        for (i, (trial, f)) in trials.into_iter().zip(trial_fitness).enumerate() {
            if f >= fitness[i] {
                population[i] = trial;
                fitness[i] = f;
            }
        }
        history.push(fitness[best_index(&fitness)]);
        generations_run += 1;
    }

    let best = best_index(&fitness);
    Ok(TrainingResult {
        best: quantize(&population[best]),
        accuracy: fitness[best],
        history,
        generations_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::HIDDEN;

    fn small_config() -> DEConfig {
        DEConfig {
            population_size: 8,
            generations: 5,
            ..DEConfig::default()
        }
    }

    #[test]
    fn quantization_rounds_half_away_and_clamps() {
        assert_eq!(quantize_gene(0.5), 1);
        assert_eq!(quantize_gene(-0.5), -1);
        assert_eq!(quantize_gene(1.49), 1);
        assert_eq!(quantize_gene(-2.5), -3);
        assert_eq!(quantize_gene(500.0), 127);
        assert_eq!(quantize_gene(-500.0), -128);
    }

    #[test]
    fn quantization_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g: Vec<f64> = (0..PARAMETER_BYTES)
            .map(|_| rng.gen_range(-200.0..200.0))
            .collect();
        let q = quantize(&g);
        assert_eq!(quantize(&genome_of(&q)), q);
    }

    #[test]
    fn config_validation() {
        assert!(DEConfig::default().validate().is_ok());
        let bad = [
            DEConfig {
                population_size: 3,
                ..DEConfig::default()
            },
            DEConfig {
                differential_weight: 0.0,
                ..DEConfig::default()
            },
            DEConfig {
                differential_weight: 2.5,
                ..DEConfig::default()
            },
            DEConfig {
                crossover_rate: 1.1,
                ..DEConfig::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let s = Sample {
            image: ImageInput::new(vec![0; INPUTS]).unwrap(),
            label: HIGH,
        };
        assert!(Dataset::new(vec![s.clone(), s]).is_err());
    }

    #[test]
    fn constant_high_predictor_scores_class_rate() {
        let d = Dataset::brightness(20, 10.0, 1).unwrap();
        assert_eq!(evaluate(&NNParameters::zeros(), &d), 0.5);
    }

    #[test]
    fn evaluate_matches_per_sample_oracle() {
        let d = Dataset::synthetic(&SyntheticSpec {
            count: 30,
            ..SyntheticSpec::default()
        })
        .unwrap();
        for seed in 0..5 {
            let p = NNParameters::random(seed);
            let mut correct = 0;
            for s in &d.samples {
                let mut hidden = [0u8; HIDDEN];
                for (j, h) in hidden.iter_mut().enumerate() {
                    let mut acc = p.hidden_biases[j] as i64;
                    for i in 0..INPUTS {
                        acc += s.image.pixels()[i] as i64 * p.hidden_weights[j * INPUTS + i] as i64;
                    }
                    *h = if acc >= 0 { 255 } else { 0 };
                }
                let mut acc = p.output_bias as i64;
                for j in 0..HIDDEN {
                    acc += hidden[j] as i64 * p.output_weights[j] as i64;
                }
                let pred = if acc >= 0 { 255 } else { 0 };
                correct += (pred == s.label) as usize;
            }
            assert_eq!(evaluate(&p, &d), correct as f64 / d.len() as f64);
        }
    }

    #[test]
    fn hand_built_threshold_network_is_perfect_on_noise_free_brightness() {
        let d = Dataset::brightness(40, 0.0, 3).unwrap();
        let mut p = NNParameters::zeros();
        // hidden neuron 0: pixel 0 minus 128; bright = 170, dark = 85
        p.hidden_weights[0] = 1;
        p.hidden_biases[0] = -128;
        p.output_weights[0] = 1;
        p.output_bias = -1;
        assert_eq!(evaluate(&p, &d), 1.0);
    }

    #[test]
    fn zero_generations_returns_best_initial_individual() {
        let d = Dataset::brightness(30, 20.0, 5).unwrap();
        let cfg = DEConfig {
            generations: 0,
            ..small_config()
        };
        let r = de_train(&d, &cfg).unwrap();
        let (_, pop) = initial_population(&cfg);
        let scores: Vec<f64> = pop.iter().map(|g| evaluate(&quantize(g), &d)).collect();
        let best = scores.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(r.accuracy, best);
        assert_eq!(r.history, vec![best]);
        let first_best = scores.iter().position(|&s| s == best).unwrap();
        assert_eq!(r.best, quantize(&pop[first_best]));
    }

    #[test]
    fn training_is_elitist_and_deterministic() {
        let d = Dataset::synthetic(&SyntheticSpec {
            count: 40,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let cfg = small_config();
        let a = de_train(&d, &cfg).unwrap();
        assert!(a.history.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(a.history.len(), 6);
        assert_eq!(evaluate(&a.best, &d), a.accuracy);
        let (_, pop) = initial_population(&cfg);
        assert!(pop.iter().all(|g| evaluate(&quantize(g), &d) <= a.accuracy));
        assert_eq!(a, de_train(&d, &cfg).unwrap());
    }

    #[test]
    fn target_accuracy_stops_early() {
        let d = Dataset::brightness(20, 5.0, 1).unwrap();
        let cfg = DEConfig {
            target_accuracy: Some(0.0),
            ..small_config()
        };
        let r = de_train(&d, &cfg).unwrap();
        assert_eq!(r.generations_run, 0);
    }
}
