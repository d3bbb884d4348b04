//! Quantum-trained neural network: an input-free circuit whose basis-state
//! probabilities generate every weight of a small classical MLP.
//!
//! Only the circuit angles are trained. The MLP is `d -> h -> h -> 2` with
//! tanh hidden units; weight `i` is `beta * (2^N p_i - 1)`, so the uniform
//! distribution maps to the zero network.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{build_ansatz, AnsatzSpec, Entangler};
use crate::error::{Error, Result};
use crate::evalkit::Footprint;
use crate::kernelml::sign_label;
use crate::util::derive_seed;
use crate::vqc::{check_binary, cross_entropy, epoch_record, l2, shifted_states, softmax, weight_decay, Adam, Estimator, TrainConfig, TrainTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QtArch {
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    pub hidden: usize,
    /// Circuit layers of the generator.
    pub layers: usize,
}

fn default_input_dim() -> usize {
    8
}

impl QtArch {
    pub fn new(hidden: usize, layers: usize) -> Self {
        QtArch { input_dim: 8, hidden, layers }
    }

    /// `(d h + h) + (h^2 + h) + (2 h + 2)`.
    pub fn num_classical(&self) -> usize {
        let (d, h) = (self.input_dim, self.hidden);
        (d * h + h) + (h * h + h) + (2 * h + 2)
    }

    /// Smallest `N` with `2^N >= M`.
    pub fn num_qubits(&self) -> usize {
        let m = self.num_classical();
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }

    pub fn num_quantum(&self) -> usize {
        self.num_qubits() * self.layers
    }

    pub fn ansatz(&self) -> AnsatzSpec {
        AnsatzSpec::new(self.num_qubits(), self.layers)
    }

    pub fn footprint(&self) -> Footprint {
        Footprint { qubits: self.num_qubits(), layers: self.layers, classical_params: self.num_classical(), quantum_params: self.num_quantum() }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(Error::Config(format!("degenerate QT-NN architecture {self:?}")));
        }
        Ok(())
    }

    /// Slot names in generation order, e.g. `W1[2,0]`, `b3[1]`.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_classical());
        for (l, (rows, cols)) in self.shapes().into_iter().enumerate() {
            for r in 0..rows {
                for c in 0..cols {
                    names.push(format!("W{}[{r},{c}]", l + 1));
                }
            }
            for r in 0..rows {
                names.push(format!("b{}[{r}]", l + 1));
            }
        }
        names
    }

    fn shapes(&self) -> [(usize, usize); 3] {
        [(self.hidden, self.input_dim), (self.hidden, self.hidden), (2, self.hidden)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    pub beta: f64,
}

impl Default for WeightMap {
    fn default() -> Self {
        WeightMap { beta: 1.0 }
    }
}

/// `|<i|U(theta)|0>|^2` for the bare ansatz; no data enters the circuit.
pub fn generate_probs(theta: &[f64], num_qubits: usize, layers: usize) -> Result<Vec<f64>> {
    let spec = AnsatzSpec::new(num_qubits, layers);
    Ok(build_ansatz(&spec, theta)?.prepare()?.probabilities())
}

/// First `M` probabilities mapped to `beta * (2^N p_i - 1)`; the rest are
/// discarded.
pub fn map_weights(probs: &[f64], arch: &QtArch, map: &WeightMap) -> Result<Vec<f64>> {
    let m = arch.num_classical();
    if probs.len() < m {
        return Err(Error::DimensionMismatch { expected: m, got: probs.len() });
    }
    let scale = probs.len() as f64;
    Ok(probs[..m].iter().map(|p| map.beta * (scale * p - 1.0)).collect())
}

struct Layer<'a> {
    w: &'a [f64],
    b: &'a [f64],
    rows: usize,
    cols: usize,
}

fn layers<'a>(weights: &'a [f64], arch: &QtArch) -> Vec<Layer<'a>> {
    let mut at = 0;
    arch.shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let w = &weights[at..at + rows * cols];
            let b = &weights[at + rows * cols..at + rows * cols + rows];
            at += rows * cols + rows;
            Layer { w, b, rows, cols }
        })
        .collect()
}

fn affine(l: &Layer, x: &[f64]) -> Vec<f64> {
    (0..l.rows).map(|r| l.b[r] + l.w[r * l.cols..(r + 1) * l.cols].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).collect()
}

fn check_mlp(x: &[f64], weights: &[f64], arch: &QtArch) -> Result<()> {
    if weights.len() != arch.num_classical() {
        return Err(Error::ParamLength { expected: arch.num_classical(), got: weights.len() });
    }
    if x.len() != arch.input_dim {
        return Err(Error::DimensionMismatch { expected: arch.input_dim, got: x.len() });
    }
    Ok(())
}

/// Two tanh layers, then a linear 2-logit output.
pub fn mlp_forward(x: &[f64], weights: &[f64], arch: &QtArch) -> Result<Vec<f64>> {
    check_mlp(x, weights, arch)?;
    let ls = layers(weights, arch);
    let a1: Vec<f64> = affine(&ls[0], x).into_iter().map(f64::tanh).collect();
    let a2: Vec<f64> = affine(&ls[1], &a1).into_iter().map(f64::tanh).collect();
    Ok(affine(&ls[2], &a2))
}

/// Cross-entropy of one sample and its gradient with respect to every MLP
/// weight (same layout as the weight vector).
fn mlp_backprop(x: &[f64], y: i8, weights: &[f64], arch: &QtArch) -> Result<(f64, bool, f64, Vec<f64>)> {
    check_mlp(x, weights, arch)?;
    let cls = match y {
        1 => 1,
        -1 => 0,
        other => return Err(Error::InvalidLabel(other as f64)),
    };
    let ls = layers(weights, arch);
    let a1: Vec<f64> = affine(&ls[0], x).into_iter().map(f64::tanh).collect();
    let a2: Vec<f64> = affine(&ls[1], &a1).into_iter().map(f64::tanh).collect();
    let z = affine(&ls[2], &a2);
    let p = softmax(&z);
    let (loss, clamped) = cross_entropy(p[cls]);
    let score = z[1] - z[0];
    let mut grad = vec![0.0; weights.len()];
    if clamped {
        return Ok((loss, clamped, score, grad));
    }

    let g3: Vec<f64> = (0..2).map(|o| p[o] - (o == cls) as u8 as f64).collect();
    let back = |l: &Layer, g: &[f64], a: &[f64]| -> Vec<f64> {
        (0..l.cols).map(|c| (0..l.rows).map(|r| l.w[r * l.cols + c] * g[r]).sum::<f64>() * (1.0 - a[c] * a[c])).collect()
    };
    let g2 = back(&ls[2], &g3, &a2);
    let g1 = back(&ls[1], &g2, &a1);

    let mut at = 0;
    for (l, g, input) in [(&ls[0], &g1, x), (&ls[1], &g2, &a1[..]), (&ls[2], &g3, &a2[..])] {
        for r in 0..l.rows {
            for c in 0..l.cols {
                grad[at + r * l.cols + c] = g[r] * input[c];
            }
        }
        at += l.rows * l.cols;
        grad[at..at + l.rows].copy_from_slice(g);
        at += l.rows;
    }
    Ok((loss, clamped, score, grad))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QtnnModel {
    pub arch: QtArch,
    pub map: WeightMap,
    #[serde(default)]
    pub entangler: Entangler,
    pub theta: Vec<f64>,
}

impl QtnnModel {
    /// Angles uniform in [-pi, pi]: near-zero angles concentrate all mass on
    /// `|0...0>` and saturate the generated network.
    pub fn new(arch: QtArch, map: WeightMap, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..arch.num_quantum()).map(|_| rng.random_range(-PI..PI)).collect();
        Ok(QtnnModel { arch, map, entangler: Entangler::default(), theta })
    }

    pub fn with_theta(arch: QtArch, map: WeightMap, theta: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if theta.len() != arch.num_quantum() {
            return Err(Error::ParamLength { expected: arch.num_quantum(), got: theta.len() });
        }
        Ok(QtnnModel { arch, map, entangler: Entangler::default(), theta })
    }

    pub fn footprint(&self) -> Footprint {
        self.arch.footprint()
    }

    fn spec(&self) -> AnsatzSpec {
        AnsatzSpec { entangler: self.entangler, ..self.arch.ansatz() }
    }

    pub fn probs(&self) -> Result<Vec<f64>> {
        Ok(build_ansatz(&self.spec(), &self.theta)?.prepare()?.probabilities())
    }

    pub fn weights(&self) -> Result<Vec<f64>> {
        map_weights(&self.probs()?, &self.arch, &self.map)
    }

    pub fn predict(&self, x: &[f64]) -> Result<(f64, i8)> {
        self.predict_with(x, &self.weights()?)
    }

    /// Prediction from pre-generated weights (generate once, score many).
    pub fn predict_with(&self, x: &[f64], weights: &[f64]) -> Result<(f64, i8)> {
        let z = mlp_forward(x, weights, &self.arch)?;
        let s = z[1] - z[0];
        Ok((s, sign_label(s)))
    }

    /// `index,slot,value` for the generated weight vector.
    pub fn weights_csv(&self) -> Result<String> {
        let w = self.weights()?;
        let mut out = String::from("index,slot,value\n");
        for (i, (name, v)) in self.arch.slot_names().iter().zip(&w).enumerate() {
            out.push_str(&format!("{i},{name},{v}\n"));
        }
        Ok(out)
    }
}

/// Mean cross-entropy of the generated network plus `(lambda/2)||theta||^2`.
pub fn composite_loss(xs: &[Vec<f64>], ys: &[i8], model: &QtnnModel, lambda: f64) -> Result<f64> {
    check_binary(xs, ys)?;
    let w = model.weights()?;
    let mut data = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        data += mlp_backprop(x, y, &w, &model.arch)?.0;
    }
    Ok(data / xs.len() as f64 + weight_decay(&model.theta, lambda))
}

pub struct CompositeGrad {
    pub loss: f64,
    pub clamp_events: usize,
    pub grad: Vec<f64>,
}

/// Chain rule: MLP backprop gives `dL/dw`, `dw_i/dp_i = beta 2^N`, and
/// `dp_i/dtheta_k` comes from one pair of shifted probability vectors per
/// angle.
pub fn composite_grad(xs: &[Vec<f64>], ys: &[i8], model: &QtnnModel, lambda: f64, est: Estimator) -> Result<CompositeGrad> {
    check_binary(xs, ys)?;
    let circ = build_ansatz(&model.spec(), &model.theta)?;
    let (state, shifted) = shifted_states(&circ)?;
    let probs = est.probabilities(&state, 0)?;
    let w = map_weights(&probs, &model.arch, &model.map)?;

    let per_sample: Vec<(f64, bool, f64, Vec<f64>)> = xs.par_iter().zip(ys).map(|(x, &y)| mlp_backprop(x, y, &w, &model.arch)).collect::<Result<_>>()?;
    let inv = 1.0 / xs.len() as f64;
    let mut dw = vec![0.0; w.len()];
    let mut data = 0.0;
    let mut clamp_events = 0;
    for (l, clamped, _, g) in &per_sample {
        data += l * inv;
        clamp_events += *clamped as usize;
        for (a, b) in dw.iter_mut().zip(g) {
            *a += b * inv;
        }
    }
    let dp_scale = model.map.beta * probs.len() as f64;

    let mut grad: Vec<f64> = model.theta.iter().map(|t| lambda * t).collect();
    for (s, (k, [plus, minus])) in shifted.iter().enumerate() {
        let pp = est.probabilities(plus, 1 + 2 * s as u64)?;
        let pm = est.probabilities(minus, 2 + 2 * s as u64)?;
        grad[*k] += dw.iter().enumerate().map(|(i, d)| d * dp_scale * 0.5 * (pp[i] - pm[i])).sum::<f64>();
    }
    Ok(CompositeGrad { loss: data + weight_decay(&model.theta, lambda), clamp_events, grad })
}

/// Adam on theta only; the generated weights carry no optimizer state.
pub fn qt_train(xs: &[Vec<f64>], ys: &[i8], model: &QtnnModel, cfg: &TrainConfig) -> Result<(QtnnModel, TrainTrace)> {
    cfg.validate()?;
    check_binary(xs, ys)?;
    let mut model = model.clone();
    let mut adam = Adam::new(model.theta.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut trace = TrainTrace::default();
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut grad_norms = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<Vec<f64>> = batch.iter().map(|&i| xs[i].clone()).collect();
            let by: Vec<i8> = batch.iter().map(|&i| ys[i]).collect();
            let est = Estimator::from_shots(cfg.shots, derive_seed(cfg.seed, &[epoch as u64, step as u64]));
            let g = composite_grad(&bx, &by, &model, cfg.weight_decay, est)?;
            if !g.loss.is_finite() || g.grad.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            trace.clamp_events += g.clamp_events;
            grad_norms += l2(&g.grad);
            batches += 1;
            adam.step(&mut model.theta, &g.grad);
            step += 1;
        }

        let w = model.weights()?;
        let evals: Vec<(f64, bool, f64, Vec<f64>)> = xs.par_iter().zip(ys).map(|(x, &y)| mlp_backprop(x, y, &w, &model.arch)).collect::<Result<_>>()?;
        let data_loss = evals.iter().map(|e| e.0).sum::<f64>() / xs.len() as f64;
        if !data_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step });
        }
        let scores: Vec<f64> = evals.iter().map(|e| e.2).collect();
        trace.epochs.push(epoch_record(epoch, &scores, data_loss, ys, &model.theta, cfg.weight_decay, l2(&model.theta), grad_norms / batches.max(1) as f64)?);
    }
    Ok((model, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QtnnCheckpoint {
    pub model: QtnnModel,
    pub config: TrainConfig,
    pub footprint: Footprint,
}

impl QtnnCheckpoint {
    pub fn new(model: QtnnModel, config: TrainConfig) -> Self {
        let footprint = model.footprint();
        QtnnCheckpoint { model, config, footprint }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
