//! Variational (pure) and hybrid quantum neural-network classifiers.
//!
//! A model encodes `x`, applies the layered ansatz and reads expectation
//! values `f_c = <O_c>`. The pure model thresholds `<Z_0>`; the hybrid model
//! feeds all `<Z_q>` into a 2-logit linear head. Training is mini-batch Adam
//! on cross-entropy plus `(lambda/2)||params||^2`, with parameter-shift
//! gradients for the circuit angles and exact backprop for the head.

use std::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{model_circuit, AnsatzSpec, EncoderConfig};
use crate::error::{Error, Result};
use crate::evalkit::{accuracy, confusion, f1_positive, sensitivity, specificity, Footprint};
use crate::kernelml::sign_label;
use crate::simcore::{count_circuit_run, Circuit, Observable, StateVector};
use crate::util::derive_seed;

/// Lower clamp applied to the true-class probability before the log.
pub const PROB_CLAMP: f64 = 1e-12;

/// Half-angle shift of the parameter-shift rule.
pub const SHIFT: f64 = FRAC_PI_2;

/// Linear map `W f + b`, `W` stored row-major (`outputs x readouts`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalHead {
    pub outputs: usize,
    pub readouts: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl ClassicalHead {
    pub fn new(outputs: usize, readouts: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if w.len() != outputs * readouts {
            return Err(Error::ParamLength { expected: outputs * readouts, got: w.len() });
        }
        if b.len() != outputs {
            return Err(Error::ParamLength { expected: outputs, got: b.len() });
        }
        Ok(ClassicalHead { outputs, readouts, w, b })
    }

    pub fn num_params(&self) -> usize {
        self.outputs * self.readouts + self.outputs
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.outputs).map(|o| self.b[o] + self.w[o * self.readouts..(o + 1) * self.readouts].iter().zip(f).map(|(w, x)| w * x).sum::<f64>()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    pub ansatz: AnsatzSpec,
    pub encoder: EncoderConfig,
    pub theta: Vec<f64>,
    pub observables: Vec<Observable>,
    pub head: Option<ClassicalHead>,
}

fn small_uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-0.1..=0.1)).collect()
}

impl QnnModel {
    pub fn new(ansatz: AnsatzSpec, encoder: EncoderConfig, theta: Vec<f64>, observables: Vec<Observable>, head: Option<ClassicalHead>) -> Result<Self> {
        if theta.len() != ansatz.num_params() {
            return Err(Error::ParamLength { expected: ansatz.num_params(), got: theta.len() });
        }
        if encoder.num_qubits != ansatz.num_qubits {
            return Err(Error::QubitMismatch { expected: ansatz.num_qubits, got: encoder.num_qubits });
        }
        if observables.is_empty() {
            return Err(Error::EmptyInput("observables"));
        }
        match &head {
            Some(h) => {
                if h.readouts != observables.len() {
                    return Err(Error::DimensionMismatch { expected: observables.len(), got: h.readouts });
                }
                if h.outputs != 2 {
                    return Err(Error::Config(format!("binary head needs 2 outputs, got {}", h.outputs)));
                }
            }
            None if observables.len() > 2 => {
                return Err(Error::Config(format!("{} readouts without a head", observables.len())));
            }
            None => {}
        }
        Ok(QnnModel { ansatz, encoder, theta, observables, head })
    }

    /// `<Z_0>` readout with sign thresholding; angles uniform in [-0.1, 0.1].
    pub fn pure(num_qubits: usize, layers: usize, seed: u64) -> Result<Self> {
        let ansatz = AnsatzSpec::new(num_qubits, layers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = small_uniform(&mut rng, ansatz.num_params());
        QnnModel::new(ansatz, EncoderConfig::with_qubits(num_qubits), theta, vec![Observable::z(0)], None)
    }

    /// `<Z_q>` on every qubit into a 2-logit head. Head weights start in
    /// [-0.1, 0.1], biases at zero.
    pub fn hybrid(num_qubits: usize, layers: usize, seed: u64) -> Result<Self> {
        let ansatz = AnsatzSpec::new(num_qubits, layers);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = small_uniform(&mut rng, ansatz.num_params());
        let w = small_uniform(&mut rng, 2 * num_qubits);
        let head = ClassicalHead::new(2, num_qubits, w, vec![0.0; 2])?;
        let obs = (0..num_qubits).map(Observable::z).collect();
        QnnModel::new(ansatz, EncoderConfig::with_qubits(num_qubits), theta, obs, Some(head))
    }

    pub fn num_quantum_params(&self) -> usize {
        self.theta.len()
    }

    pub fn num_classical_params(&self) -> usize {
        self.head.as_ref().map_or(0, ClassicalHead::num_params)
    }

    pub fn num_params(&self) -> usize {
        self.num_quantum_params() + self.num_classical_params()
    }

    pub fn footprint(&self) -> Footprint {
        Footprint {
            qubits: self.ansatz.num_qubits,
            layers: self.ansatz.layers,
            classical_params: self.num_classical_params(),
            quantum_params: self.num_quantum_params(),
        }
    }

    /// Flat parameter vector: theta, then head W (row-major), then b.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.theta.clone();
        if let Some(h) = &self.head {
            p.extend_from_slice(&h.w);
            p.extend_from_slice(&h.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::ParamLength { expected: self.num_params(), got: p.len() });
        }
        let nt = self.theta.len();
        self.theta.copy_from_slice(&p[..nt]);
        if let Some(h) = &mut self.head {
            let nw = h.w.len();
            h.w.copy_from_slice(&p[nt..nt + nw]);
            h.b.copy_from_slice(&p[nt + nw..]);
        }
        Ok(())
    }

    pub fn circuit(&self, x: &[f64]) -> Result<Circuit> {
        model_circuit(&self.ansatz, &self.theta, x, &self.encoder)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: QnnModel = serde_json::from_str(text)?;
        QnnModel::new(m.ansatz, m.encoder, m.theta, m.observables, m.head)
    }
}

/// How expectation values are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Exact,
    /// `shots` samples per circuit; each evaluation derives its own stream from `seed`.
    Shots {
        shots: u64,
        seed: u64,
    },
}

impl Estimator {
    pub fn from_shots(shots: Option<u64>, seed: u64) -> Self {
        match shots {
            Some(s) => Estimator::Shots { shots: s, seed },
            None => Estimator::Exact,
        }
    }

    /// Basis-state probabilities, or their empirical frequencies.
    pub(crate) fn probabilities(&self, state: &StateVector, eval: u64) -> Result<Vec<f64>> {
        match *self {
            Estimator::Exact => Ok(state.probabilities()),
            Estimator::Shots { shots, seed } => {
                let hist = state.sample_counts(shots, derive_seed(seed, &[eval]))?;
                Ok((0..state.amps().len()).map(|i| hist.frequency(i)).collect())
            }
        }
    }

    fn readouts(&self, state: &StateVector, obs: &[Observable], eval: u64) -> Result<Vec<f64>> {
        match *self {
            Estimator::Exact => obs.iter().map(|o| state.expectation(o)).collect(),
            Estimator::Shots { shots, seed } => {
                let hist = state.sample_counts(shots, derive_seed(seed, &[eval]))?;
                obs.iter().map(|o| hist.estimate(o)).collect()
            }
        }
    }
}

/// Raw readouts `(<O_1>, ..., <O_C>)`.
pub fn readouts(x: &[f64], model: &QnnModel, est: Estimator) -> Result<Vec<f64>> {
    let state = model.circuit(x)?.prepare()?;
    est.readouts(&state, &model.observables, 0)
}

/// Readouts, or logits `W f + b` when the model has a head.
pub fn qnn_forward(x: &[f64], model: &QnnModel) -> Result<Vec<f64>> {
    let f = readouts(x, model, Estimator::Exact)?;
    Ok(match &model.head {
        Some(h) => h.apply(&f),
        None => f,
    })
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Class probabilities `[p(Normal), p(attack)]` from raw readouts.
///
/// Without a head a single readout is read as a Born probability,
/// `p(attack) = (1 + f) / 2`; two readouts go through softmax.
pub fn class_probs(model: &QnnModel, f: &[f64]) -> Vec<f64> {
    match &model.head {
        Some(h) => softmax(&h.apply(f)),
        None if f.len() == 1 => {
            let p = ((1.0 + f[0]) / 2.0).clamp(0.0, 1.0);
            vec![1.0 - p, p]
        }
        None => softmax(f),
    }
}

/// Decision score: positive means attack. `logit_1 - logit_0` with a head,
/// `f_0` for the pure model.
pub fn decision_score(model: &QnnModel, f: &[f64]) -> f64 {
    match &model.head {
        Some(h) => {
            let z = h.apply(f);
            z[1] - z[0]
        }
        None if f.len() == 1 => f[0],
        None => f[1] - f[0],
    }
}

pub fn predict(x: &[f64], model: &QnnModel) -> Result<(f64, i8)> {
    let f = readouts(x, model, Estimator::Exact)?;
    let s = decision_score(model, &f);
    Ok((s, sign_label(s)))
}

fn class_index(y: i8) -> Result<usize> {
    match y {
        1 => Ok(1),
        -1 => Ok(0),
        other => Err(Error::InvalidLabel(other as f64)),
    }
}

/// `-ln max(p, 1e-12)`; the flag reports whether the clamp was hit.
pub fn cross_entropy(p_true: f64) -> (f64, bool) {
    if p_true < PROB_CLAMP {
        (-PROB_CLAMP.ln(), true)
    } else {
        (-p_true.ln(), false)
    }
}

pub fn weight_decay(params: &[f64], lambda: f64) -> f64 {
    0.5 * lambda * params.iter().map(|p| p * p).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub data: f64,
    pub decay: f64,
    pub clamp_events: usize,
}

/// Mean cross-entropy over the batch plus weight decay on every parameter.
pub fn loss(xs: &[Vec<f64>], ys: &[i8], model: &QnnModel, lambda: f64) -> Result<LossValue> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let mut data = 0.0;
    let mut clamp_events = 0;
    for (x, &y) in xs.iter().zip(ys) {
        let f = readouts(x, model, Estimator::Exact)?;
        let (l, clamped) = cross_entropy(class_probs(model, &f)[class_index(y)?]);
        data += l;
        clamp_events += clamped as usize;
    }
    data /= xs.len() as f64;
    let decay = weight_decay(&model.params(), lambda);
    Ok(LossValue { total: data + decay, data, decay, clamp_events })
}

/// `d<O_c>/d theta_k` for every readout `c`, from two full shifted circuits.
pub fn param_shift_grad(x: &[f64], model: &QnnModel, k: usize, est: Estimator) -> Result<Vec<f64>> {
    let circ = model.circuit(x)?;
    let plus = circ.shifted(k, SHIFT)?.prepare()?;
    let minus = circ.shifted(k, -SHIFT)?.prepare()?;
    let fp = est.readouts(&plus, &model.observables, 1)?;
    let fm = est.readouts(&minus, &model.observables, 2)?;
    Ok(fp.iter().zip(&fm).map(|(a, b)| 0.5 * (a - b)).collect())
}

/// Final state of `circ` plus, for every trainable slot, the final states
/// with that gate's angle shifted by `+SHIFT` and `-SHIFT`.
///
/// The state just before each trainable gate is cached during the forward
/// pass, so each shifted evaluation only replays the circuit suffix.
pub(crate) fn shifted_states(circ: &Circuit) -> Result<(StateVector, Vec<(usize, [StateVector; 2])>)> {
    let mut state = StateVector::new_zero(circ.num_qubits)?;
    let mut cached = Vec::with_capacity(circ.param_slots.len());
    let mut at = 0;
    for slot in &circ.param_slots {
        circ.run_range(&mut state, at..slot.gate_index);
        cached.push(state.clone());
        at = slot.gate_index;
    }
    circ.run_range(&mut state, at..circ.len());
    count_circuit_run();

    let mut out = Vec::with_capacity(cached.len());
    for (slot, before) in circ.param_slots.iter().zip(cached) {
        let shifted = [SHIFT, -SHIFT].map(|delta| {
            let mut g = circ.gates[slot.gate_index];
            if let Some(a) = g.angle_mut() {
                *a += delta;
            }
            let mut st = before.clone();
            st.apply_unchecked(&g);
            circ.run_range(&mut st, slot.gate_index + 1..circ.len());
            count_circuit_run();
            st
        });
        out.push((slot.param_index, shifted));
    }
    Ok((state, out))
}

/// Readouts and their full Jacobian `jac[k][c] = d f_c / d theta_k`.
pub fn readout_jacobian(x: &[f64], model: &QnnModel, est: Estimator) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let (state, shifted) = shifted_states(&model.circuit(x)?)?;
    let f = est.readouts(&state, &model.observables, 0)?;
    let mut jac = vec![vec![0.0; f.len()]; model.theta.len()];
    for (s, (k, [plus, minus])) in shifted.iter().enumerate() {
        let fp = est.readouts(plus, &model.observables, 1 + 2 * s as u64)?;
        let fm = est.readouts(minus, &model.observables, 2 + 2 * s as u64)?;
        for (c, d) in jac[*k].iter_mut().enumerate() {
            *d += 0.5 * (fp[c] - fm[c]);
        }
    }
    Ok((f, jac))
}

/// One sample's data loss, gradient over the flat parameter vector, and
/// decision score.
#[derive(Clone, Debug)]
pub struct SampleGrad {
    pub loss: f64,
    pub clamped: bool,
    pub grad: Vec<f64>,
    pub score: f64,
}

pub fn sample_grad(x: &[f64], y: i8, model: &QnnModel, est: Estimator) -> Result<SampleGrad> {
    let cls = class_index(y)?;
    let (f, jac) = readout_jacobian(x, model, est)?;
    let probs = class_probs(model, &f);
    let (loss, clamped) = cross_entropy(probs[cls]);
    let score = decision_score(model, &f);
    let mut grad = vec![0.0; model.num_params()];
    if clamped {
        // the clamped log is flat in every parameter
        return Ok(SampleGrad { loss, clamped, grad, score });
    }
    let nt = model.theta.len();
    // dL/df
    let g_f: Vec<f64> = match &model.head {
        Some(h) => {
            let g_z: Vec<f64> = (0..2).map(|o| probs[o] - (o == cls) as u8 as f64).collect();
            for o in 0..h.outputs {
                for r in 0..h.readouts {
                    grad[nt + o * h.readouts + r] = g_z[o] * f[r];
                }
                grad[nt + h.w.len() + o] = g_z[o];
            }
            (0..h.readouts).map(|r| (0..h.outputs).map(|o| h.w[o * h.readouts + r] * g_z[o]).sum()).collect()
        }
        None if f.len() == 1 => {
            let s = if cls == 1 { 1.0 } else { -1.0 };
            vec![-s / (2.0 * probs[cls])]
        }
        None => (0..f.len()).map(|o| probs[o] - (o == cls) as u8 as f64).collect(),
    };
    for (k, row) in jac.iter().enumerate() {
        grad[k] = row.iter().zip(&g_f).map(|(j, g)| j * g).sum();
    }
    Ok(SampleGrad { loss, clamped, grad, score })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// `None` means exact expectations.
    pub shots: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            weight_decay: 1e-4,
            shots: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidHyper(format!("learning_rate {} must be > 0", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidHyper("batch_size must be >= 1".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidHyper(format!("weight_decay {} must be >= 0", self.weight_decay)));
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2) && self.adam_eps > 0.0) {
            return Err(Error::InvalidHyper("Adam betas must lie in [0, 1) and eps > 0".into()));
        }
        if self.shots == Some(0) {
            return Err(Error::ZeroShots);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam { lr: cfg.learning_rate, beta1: cfg.adam_beta1, beta2: cfg.adam_beta2, eps: cfg.adam_eps, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// One row per epoch, evaluated on the full training set after the epoch's
/// updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub specificity: f64,
    pub sensitivity: f64,
    /// Norm of the trainable quantum angles.
    pub theta_norm: f64,
    /// Mean mini-batch gradient norm over the epoch.
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub clamp_events: usize,
}

impl TrainTrace {
    /// `epoch,loss,accuracy,f1,specificity,sensitivity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy,f1,specificity,sensitivity\n");
        for r in &self.epochs {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.epoch, r.loss, r.accuracy, r.f1, r.specificity, r.sensitivity));
        }
        out
    }
}

pub(crate) fn check_binary(xs: &[Vec<f64>], ys: &[i8]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if let Some(&bad) = ys.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidLabel(bad as f64));
    }
    Ok(())
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Loss, metrics and norms for one finished epoch.
pub(crate) fn epoch_record(
    epoch: usize,
    scores: &[f64],
    data_loss: f64,
    ys: &[i8],
    params: &[f64],
    lambda: f64,
    theta_norm: f64,
    grad_norm: f64,
) -> Result<EpochRecord> {
    let preds: Vec<i8> = scores.iter().map(|&s| sign_label(s)).collect();
    let c = confusion(&preds, ys)?;
    Ok(EpochRecord {
        epoch,
        loss: data_loss + weight_decay(params, lambda),
        accuracy: accuracy(&c),
        f1: f1_positive(&c),
        specificity: specificity(&c),
        sensitivity: sensitivity(&c),
        theta_norm,
        grad_norm,
    })
}

/// Mini-batch Adam. Per-sample work fans out over the rayon pool and is
/// reduced in batch order, so exact-mode runs are bit-reproducible.
pub fn train(xs: &[Vec<f64>], ys: &[i8], model: &QnnModel, cfg: &TrainConfig) -> Result<(QnnModel, TrainTrace)> {
    cfg.validate()?;
    check_binary(xs, ys)?;
    let mut model = model.clone();
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut trace = TrainTrace::default();
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut grad_norms = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<SampleGrad> = batch
                .par_iter()
                .map(|&i| {
                    let est = Estimator::from_shots(cfg.shots, derive_seed(cfg.seed, &[epoch as u64, step as u64, i as u64]));
                    sample_grad(&xs[i], ys[i], &model, est)
                })
                .collect::<Result<_>>()?;
            let inv = 1.0 / batch.len() as f64;
            let mut grad: Vec<f64> = params.iter().map(|p| cfg.weight_decay * p).collect();
            let mut data = 0.0;
            for r in &results {
                data += r.loss * inv;
                trace.clamp_events += r.clamped as usize;
                for (g, v) in grad.iter_mut().zip(&r.grad) {
                    *g += v * inv;
                }
            }
            let total = data + weight_decay(&params, cfg.weight_decay);
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            grad_norms += l2(&grad);
            batches += 1;
            adam.step(&mut params, &grad);
            model.set_params(&params)?;
            step += 1;
        }

        let evals: Vec<(f64, f64)> = (0..xs.len())
            .into_par_iter()
            .map(|i| {
                let est = Estimator::from_shots(cfg.shots, derive_seed(cfg.seed, &[epoch as u64, u64::MAX, i as u64]));
                let f = readouts(&xs[i], &model, est)?;
                let p = class_probs(&model, &f)[class_index(ys[i])?];
                Ok((cross_entropy(p).0, decision_score(&model, &f)))
            })
            .collect::<Result<_>>()?;
        let data_loss = evals.iter().map(|e| e.0).sum::<f64>() / xs.len() as f64;
        let scores: Vec<f64> = evals.iter().map(|e| e.1).collect();
        if !data_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, step });
        }
        trace.epochs.push(epoch_record(epoch, &scores, data_loss, ys, &params, cfg.weight_decay, l2(&model.theta), grad_norms / batches.max(1) as f64)?);
    }
    Ok((model, trace))
}

/// Trained model plus the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QnnCheckpoint {
    pub model: QnnModel,
    pub config: TrainConfig,
    pub footprint: Footprint,
}

impl QnnCheckpoint {
    pub fn new(model: QnnModel, config: TrainConfig) -> Self {
        let footprint = model.footprint();
        QnnCheckpoint { model, config, footprint }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
