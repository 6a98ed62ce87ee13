//! Integer feed-forward network (768 -> 7 -> 1) with step activations, and
//! an engine that keeps its parameters on a simulated memory device.
//!
//! Activations are unsigned bytes, weights and biases signed bytes. Every
//! neuron computes `g(sum_j a_j * w_j + b)` with `g(x) = 0` for `x < 0` and
//! `255` otherwise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::device::DeviceInstance;
use crate::error::{Error, Result};
use crate::profile::PAGE_SIZE;

pub const INPUTS: usize = 16 * 16 * 3;
pub const HIDDEN: usize = 7;
/// Serialized parameter size: 7 * (768 + 1) + (7 + 1).
pub const PARAMETER_BYTES: usize = HIDDEN * (INPUTS + 1) + HIDDEN + 1;
/// Multiply-accumulates per inference.
pub const MAC_COUNT: u64 = (HIDDEN * INPUTS + HIDDEN) as u64;
/// Largest possible |pre-activation|: 768 * 255 * 128 + 127.
pub const ACCUMULATOR_BOUND: i64 = INPUTS as i64 * 255 * 128 + 127;
pub const LAYOUT_VERSION: u32 = 1;

pub const LOW: u8 = 0;
pub const HIGH: u8 = 255;

/// Step activation.
pub fn activation(x: i64) -> u8 {
    if x < 0 {
        LOW
    } else {
        HIGH
    }
}

#[inline]
fn dot(activations: &[u8], weights: &[i8]) -> i32 {
    activations
        .iter()
        .zip(weights)
        .map(|(&a, &w)| a as i32 * w as i32)
        .sum()
}

/// Weighted sum plus bias, accumulated in 32 bits.
pub fn pre_activation(activations: &[u8], weights: &[i8], bias: i8) -> Result<i32> {
    if activations.len() != weights.len() {
        return Err(Error::argument(format!(
            "{} activations but {} weights",
            activations.len(),
            weights.len()
        )));
    }
    if activations.len() > INPUTS {
        return Err(Error::argument(format!(
            "fan-in {} exceeds {INPUTS}",
            activations.len()
        )));
    }
    Ok(dot(activations, weights) + bias as i32)
}

pub fn neuron_forward(activations: &[u8], weights: &[i8], bias: i8) -> Result<u8> {
    Ok(activation(
        pre_activation(activations, weights, bias)? as i64
    ))
}

/// A 16x16 RGB image, one byte per input neuron.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInput {
    pixels: Vec<u8>,
}

impl ImageInput {
    pub fn new(pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != INPUTS {
            return Err(Error::argument(format!(
                "image must have {INPUTS} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(ImageInput { pixels })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NNParameters {
    /// Row-major, one row of 768 weights per hidden neuron.
    pub hidden_weights: Vec<i8>,
    pub hidden_biases: [i8; HIDDEN],
    pub output_weights: [i8; HIDDEN],
    pub output_bias: i8,
}

impl NNParameters {
    pub fn zeros() -> Self {
        NNParameters {
            hidden_weights: vec![0; HIDDEN * INPUTS],
            hidden_biases: [0; HIDDEN],
            output_weights: [0; HIDDEN],
            output_bias: 0,
        }
    }

    /// Uniformly random parameters over the full signed-byte range.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros();
        rng.fill(&mut p.hidden_weights[..]);
        rng.fill(&mut p.hidden_biases[..]);
        rng.fill(&mut p.output_weights[..]);
        p.output_bias = rng.gen();
        p
    }

    pub fn hidden_row(&self, neuron: usize) -> &[i8] {
        &self.hidden_weights[neuron * INPUTS..(neuron + 1) * INPUTS]
    }

    /// Canonical layout: hidden weights (row-major), hidden biases, output
    /// weights, output bias; two's complement.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(PARAMETER_BYTES);
        out.extend(self.hidden_weights.iter().map(|&w| w as u8));
        out.extend(self.hidden_biases.iter().map(|&b| b as u8));
        out.extend(self.output_weights.iter().map(|&w| w as u8));
        out.push(self.output_bias as u8);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != PARAMETER_BYTES {
            return Err(Error::argument(format!(
                "parameter blob must be {PARAMETER_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let (hw, rest) = bytes.split_at(HIDDEN * INPUTS);
        let (hb, rest) = rest.split_at(HIDDEN);
        let (ow, ob) = rest.split_at(HIDDEN);
        let signed = |s: &[u8]| -> [i8; HIDDEN] { std::array::from_fn(|i| s[i] as i8) };
        Ok(NNParameters {
            hidden_weights: hw.iter().map(|&b| b as i8).collect(),
            hidden_biases: signed(hb),
            output_weights: signed(ow),
            output_bias: ob[0] as i8,
        })
    }
}

/// Shape metadata stored next to a raw parameter file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSidecar {
    pub layout_version: u32,
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub parameter_bytes: usize,
    pub layout: String,
    pub sha256: String,
}

impl NNParameters {
    pub fn sidecar(&self) -> ParameterSidecar {
        ParameterSidecar {
            layout_version: LAYOUT_VERSION,
            inputs: INPUTS,
            hidden: HIDDEN,
            outputs: 1,
            parameter_bytes: PARAMETER_BYTES,
            layout:
                "hidden_weights[7][768], hidden_biases[7], output_weights[7], output_bias; int8"
                    .into(),
            sha256: hex::encode(Sha256::digest(self.to_bytes())),
        }
    }

    /// Writes the raw blob to `path` and the sidecar to `path` with a
    /// `.json` extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(path.with_extension("json"), json + "\n")?;
        Ok(())
    }

    /// Reads a raw blob. A sidecar, when present, must match it.
    pub fn load(path: &Path) -> Result<Self> {
        let params = Self::from_bytes(&crate::error::read(path)?)?;
        let sidecar_path = path.with_extension("json");
        if sidecar_path != path && sidecar_path.exists() {
            let sidecar: ParameterSidecar =
                serde_json::from_str(&crate::error::read_to_string(&sidecar_path)?)?;
            let expected = params.sidecar();
            if sidecar.layout_version != LAYOUT_VERSION {
                return Err(Error::config(format!(
                    "unsupported parameter layout version {}",
                    sidecar.layout_version
                )));
            }
            if sidecar.sha256 != expected.sha256 {
                return Err(Error::config(format!(
                    "{} does not match its sidecar checksum",
                    path.display()
                )));
            }
        }
        Ok(params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Forward {
    pub prediction: u8,
    pub hidden_activations: [u8; HIDDEN],
}

/// Pure inference from in-memory parameters.
pub fn forward(params: &NNParameters, image: &ImageInput) -> Forward {
    let hidden: [u8; HIDDEN] = std::array::from_fn(|j| {
        let sum = dot(image.pixels(), params.hidden_row(j)) + params.hidden_biases[j] as i32;
        activation(sum as i64)
    });
    let out = dot(&hidden, &params.output_weights) + params.output_bias as i32;
    Forward {
        prediction: activation(out as i64),
        hidden_activations: hidden,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreReport {
    pub byte_writes: u64,
    pub erases: u64,
    /// Program plus erase latency.
    pub latency_cycles: u64,
    /// Program plus erase current.
    pub current_au: f64,
    pub write_current_au: f64,
    pub erase_current_au: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightLoad {
    pub byte_reads: u64,
    pub latency_cycles: u64,
    pub current_au: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeStats {
    pub mac_count: u64,
    pub latency_cycles: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub prediction: u8,
    pub hidden_activations: [u8; HIDDEN],
    pub weight_load: WeightLoad,
    pub compute: ComputeStats,
}

/// Network engine whose parameters live on a memory device. Before each
/// inference the parameters are copied into an on-chip weight buffer, which
/// costs nothing to read.
#[derive(Clone, Debug)]
pub struct NnEngine {
    device: DeviceInstance,
    base_addr: usize,
    cycles_per_mac: u64,
    stored: bool,
}

impl NnEngine {
    pub const DEFAULT_CYCLES_PER_MAC: u64 = 1;

    pub fn new(device: DeviceInstance) -> Self {
        NnEngine {
            device,
            base_addr: 0,
            cycles_per_mac: Self::DEFAULT_CYCLES_PER_MAC,
            stored: false,
        }
    }

    pub fn with_cycles_per_mac(mut self, cycles: u64) -> Self {
        self.cycles_per_mac = cycles;
        self
    }

    pub fn device(&self) -> &DeviceInstance {
        &self.device
    }

    pub fn into_device(self) -> DeviceInstance {
        self.device
    }

    /// Uploads the parameters byte by byte. Technologies with
    /// erase-before-write erase every spanned page first.
    pub fn store_parameters(&mut self, params: &NNParameters) -> Result<StoreReport> {
        let end = self.base_addr + PARAMETER_BYTES;
        if end > self.device.capacity() {
            return Err(Error::Capacity {
                needed: end,
                available: self.device.capacity(),
            });
        }
        let before = self.device.counters().clone();
        if self.device.profile().erase_model.erase_before_write {
            let first = self.base_addr / PAGE_SIZE;
            let last = (end - 1) / PAGE_SIZE;
            for page in first..=last {
                self.device.erase(page)?;
            }
        }
        for (i, byte) in params.to_bytes().into_iter().enumerate() {
            self.device.write_byte(self.base_addr + i, byte)?;
        }
        self.stored = true;
        let after = self.device.counters();
        Ok(StoreReport {
            byte_writes: after.byte_writes - before.byte_writes,
            erases: after.erases - before.erases,
            latency_cycles: after.total_latency_cycles - before.total_latency_cycles,
            current_au: after.total_current_au - before.total_current_au,
            write_current_au: after.write_current_au - before.write_current_au,
            erase_current_au: after.erase_current_au - before.erase_current_au,
        })
    }

    /// Reads the parameters back from the device (charged as device reads).
    pub fn load_parameters(&mut self) -> Result<(NNParameters, WeightLoad)> {
        if !self.stored {
            return Err(Error::State(
                "no parameters have been stored on the device".into(),
            ));
        }
        let before = self.device.counters().clone();
        let mut bytes = Vec::with_capacity(PARAMETER_BYTES);
        for i in 0..PARAMETER_BYTES {
            bytes.push(self.device.read_byte(self.base_addr + i)?);
        }
        let after = self.device.counters();
        let load = WeightLoad {
            byte_reads: after.byte_reads - before.byte_reads,
            latency_cycles: after.total_latency_cycles - before.total_latency_cycles,
            current_au: after.total_current_au - before.total_current_au,
        };
        Ok((NNParameters::from_bytes(&bytes)?, load))
    }

    pub fn infer(&mut self, image: &ImageInput) -> Result<InferenceReport> {
        let (params, weight_load) = self.load_parameters()?;
        let f = forward(&params, image);
        Ok(InferenceReport {
            prediction: f.prediction,
            hidden_activations: f.hidden_activations,
            weight_load,
            compute: ComputeStats {
                mac_count: MAC_COUNT,
                latency_cycles: MAC_COUNT * self.cycles_per_mac,
            },
        })
    }
}
