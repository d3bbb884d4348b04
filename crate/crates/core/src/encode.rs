//! Angle-encoding feature maps and the layered hardware-efficient ansatz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simcore::{Circuit, Gate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EncoderDepth {
    /// One RY per feature.
    #[default]
    Plain,
    /// RY layer followed by a CZ ring, repeated `repeats` times.
    Entangled { repeats: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_qubits: usize,
    /// Feature-to-angle scale.
    pub kappa: f64,
    #[serde(default)]
    pub depth: EncoderDepth,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { num_qubits: 8, kappa: 1.0, depth: EncoderDepth::Plain }
    }
}

impl EncoderConfig {
    pub fn with_qubits(num_qubits: usize) -> Self {
        EncoderConfig { num_qubits, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Entangler {
    #[default]
    RingCnot,
    LineCnot,
    RingCz,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub num_qubits: usize,
    pub layers: usize,
    #[serde(default)]
    pub entangler: Entangler,
    #[serde(default)]
    pub reupload: bool,
}

impl AnsatzSpec {
    pub fn new(num_qubits: usize, layers: usize) -> Self {
        AnsatzSpec { num_qubits, layers, entangler: Entangler::RingCnot, reupload: false }
    }

    pub fn num_params(&self) -> usize {
        self.num_qubits * self.layers
    }
}

/// Nearest-neighbour pairs `(q, q+1)`, closed into a ring when asked. Two
/// qubits get a single pair so the ring does not double back on itself.
fn neighbour_pairs(n: usize, ring: bool) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|q| (q, q + 1)).collect();
    if ring && n > 2 {
        pairs.push((n - 1, 0));
    }
    pairs
}

/// `U_E(x)`: `RY(kappa * x_j)` on qubit `j`.
pub fn angle_encode(features: &[f64], cfg: &EncoderConfig) -> Result<Circuit> {
    if features.len() != cfg.num_qubits {
        return Err(Error::DimensionMismatch { expected: cfg.num_qubits, got: features.len() });
    }
    let mut circ = Circuit::new(cfg.num_qubits)?;
    let rotations = |circ: &mut Circuit| -> Result<()> {
        for (q, &x) in features.iter().enumerate() {
            circ.push(Gate::Ry { target: q, angle: cfg.kappa * x })?;
        }
        Ok(())
    };
    match cfg.depth {
        EncoderDepth::Plain => rotations(&mut circ)?,
        EncoderDepth::Entangled { repeats } => {
            for _ in 0..repeats.max(1) {
                rotations(&mut circ)?;
                for (a, b) in neighbour_pairs(cfg.num_qubits, true) {
                    circ.push(Gate::Cz { control: a, target: b })?;
                }
            }
        }
    }
    Ok(circ)
}

fn push_layer(circ: &mut Circuit, spec: &AnsatzSpec, layer: usize, theta: &[f64]) -> Result<()> {
    let n = spec.num_qubits;
    for q in 0..n {
        let k = layer * n + q;
        circ.push_param(Gate::Ry { target: q, angle: theta[k] }, k)?;
    }
    let (ring, cz) = match spec.entangler {
        Entangler::RingCnot => (true, false),
        Entangler::LineCnot => (false, false),
        Entangler::RingCz => (true, true),
    };
    for (a, b) in neighbour_pairs(n, ring) {
        let g = if cz { Gate::Cz { control: a, target: b } } else { Gate::Cnot { control: a, target: b } };
        circ.push(g)?;
    }
    Ok(())
}

fn check_theta(spec: &AnsatzSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != spec.num_params() {
        return Err(Error::ParamLength { expected: spec.num_params(), got: theta.len() });
    }
    Ok(())
}

/// `U(theta)`: per layer, `RY(theta[l*N + q])` on every qubit then the
/// entangler. Parameter `l*N + q` is bound to that rotation.
///
/// This is the trainable block alone; [`model_circuit`] handles the
/// encoding and data re-uploading.
pub fn build_ansatz(spec: &AnsatzSpec, theta: &[f64]) -> Result<Circuit> {
    check_theta(spec, theta)?;
    let mut circ = Circuit::new(spec.num_qubits)?;
    for layer in 0..spec.layers {
        push_layer(&mut circ, spec, layer, theta)?;
    }
    Ok(circ)
}

/// `U(theta) U_E(x)`, with `U_E(x)` re-applied before every layer when
/// `spec.reupload` is set.
pub fn model_circuit(spec: &AnsatzSpec, theta: &[f64], features: &[f64], enc: &EncoderConfig) -> Result<Circuit> {
    check_theta(spec, theta)?;
    if enc.num_qubits != spec.num_qubits {
        return Err(Error::QubitMismatch { expected: spec.num_qubits, got: enc.num_qubits });
    }
    let encoding = angle_encode(features, enc)?;
    let mut circ = Circuit::new(spec.num_qubits)?;
    circ.append(&encoding)?;
    for layer in 0..spec.layers {
        if spec.reupload && layer > 0 {
            circ.append(&encoding)?;
        }
        push_layer(&mut circ, spec, layer, theta)?;
    }
    Ok(circ)
}
