//! Dense statevector simulation for few-qubit circuits.
//!
//! Qubit 0 is the least-significant bit of the basis-state index. Gate
//! conventions: `RY(t)|0> = cos(t/2)|0> + sin(t/2)|1>`,
//! `RZ(t) = diag(e^{-it/2}, e^{+it/2})`, `RX(t) = exp(-i t X / 2)`.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 12;

static CIRCUITS_RUN: AtomicU64 = AtomicU64::new(0);
static SHOTS_DRAWN: AtomicU64 = AtomicU64::new(0);

/// Process-wide simulator counters: (circuits run, shots drawn).
pub(crate) fn count_circuit_run() {
    CIRCUITS_RUN.fetch_add(1, Ordering::Relaxed);
}

pub fn sim_counters() -> (u64, u64) {
    (CIRCUITS_RUN.load(Ordering::Relaxed), SHOTS_DRAWN.load(Ordering::Relaxed))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum Gate {
    Rx {
        target: usize,
        angle: f64,
    },
    Ry {
        target: usize,
        angle: f64,
    },
    Rz {
        target: usize,
        angle: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Cz {
        control: usize,
        target: usize,
    },
    #[serde(rename = "HADAMARD")]
    H {
        target: usize,
    },
}

impl Gate {
    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => Some(angle),
            _ => None,
        }
    }

    pub fn is_rotation(&self) -> bool {
        self.angle().is_some()
    }

    pub(crate) fn angle_mut(&mut self) -> Option<&mut f64> {
        match self {
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Rotations negate their angle; CNOT, CZ and H are self-inverse.
    pub fn inverse(&self) -> Gate {
        let mut g = *self;
        if let Some(a) = g.angle_mut() {
            *a = -*a;
        }
        g
    }

    fn check(&self, num_qubits: usize) -> Result<()> {
        let idx = |q: usize| {
            if q < num_qubits {
                Ok(())
            } else {
                Err(Error::QubitIndex { index: q, num_qubits })
            }
        };
        match *self {
            Gate::Rx { target, .. } | Gate::Ry { target, .. } | Gate::Rz { target, .. } | Gate::H { target } => idx(target),
            Gate::Cnot { control, target } | Gate::Cz { control, target } => {
                idx(control)?;
                idx(target)?;
                if control == target {
                    return Err(Error::SameQubit(target));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

/// Per-qubit Pauli letters; entry `q` acts on qubit `q`, missing trailing
/// qubits are identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::Config(format!("bad Pauli letter {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(PauliString)
    }

    /// Single-qubit letter on `qubit`, identity elsewhere.
    pub fn single(qubit: usize, p: Pauli) -> Self {
        let mut v = vec![Pauli::I; qubit + 1];
        v[qubit] = p;
        PauliString(v)
    }

    fn masks(&self) -> (usize, usize, u32) {
        let (mut x, mut z, mut ny) = (0usize, 0usize, 0u32);
        for (q, p) in self.0.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => x |= 1 << q,
                Pauli::Z => z |= 1 << q,
                Pauli::Y => {
                    x |= 1 << q;
                    z |= 1 << q;
                    ny += 1;
                }
            }
        }
        (x, z, ny)
    }

    pub fn is_diagonal(&self) -> bool {
        self.0.iter().all(|p| matches!(p, Pauli::I | Pauli::Z))
    }
}

/// Real-weighted sum of Pauli strings (Hermitian by construction).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub terms: Vec<(f64, PauliString)>,
}

impl Observable {
    pub fn z(qubit: usize) -> Self {
        Observable { terms: vec![(1.0, PauliString::single(qubit, Pauli::Z))] }
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    fn width(&self) -> usize {
        self.terms.iter().map(|(_, p)| p.0.len()).max().unwrap_or(0)
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.is_diagonal())
    }

    /// Value of a diagonal observable on computational basis state `index`.
    pub fn diagonal_value(&self, index: usize) -> Result<f64> {
        let mut acc = 0.0;
        for (c, p) in &self.terms {
            if !p.is_diagonal() {
                return Err(Error::UnsupportedObservable(format!("{:?}", p.0)));
            }
            let (_, z, _) = p.masks();
            let sign = if (index & z).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            acc += c * sign;
        }
        Ok(acc)
    }
}

/// Outcome counts of repeated computational-basis measurement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotHistogram {
    pub counts: BTreeMap<usize, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl ShotHistogram {
    pub fn frequency(&self, index: usize) -> f64 {
        self.counts.get(&index).copied().unwrap_or(0) as f64 / self.shots as f64
    }

    /// Sample mean of a diagonal observable.
    pub fn estimate(&self, obs: &Observable) -> Result<f64> {
        let mut acc = 0.0;
        for (&idx, &n) in &self.counts {
            acc += obs.diagonal_value(idx)? * n as f64;
        }
        Ok(acc / self.shots as f64)
    }
}

impl StateVector {
    /// `|0...0>` on `num_qubits` qubits.
    pub fn new_zero(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::QubitRange(num_qubits));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    /// Wraps raw amplitudes; they must have power-of-two length and unit norm.
    pub fn from_amps(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidState(len));
        }
        let num_qubits = len.trailing_zeros() as usize;
        if num_qubits > MAX_QUBITS {
            return Err(Error::QubitRange(num_qubits));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(len));
        }
        Ok(StateVector { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.check(self.num_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::Ry { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                self.for_pairs(target, |a, b| (a * c - b * s, a * s + b * c));
            }
            Gate::Rx { target, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let mis = Complex64::new(0.0, -s);
                self.for_pairs(target, |a, b| (a * c + b * mis, a * mis + b * c));
            }
            Gate::Rz { target, angle } => {
                let lo = Complex64::from_polar(1.0, -angle / 2.0);
                let hi = Complex64::from_polar(1.0, angle / 2.0);
                self.for_pairs(target, |a, b| (a * lo, b * hi));
            }
            Gate::H { target } => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                self.for_pairs(target, |a, b| ((a + b) * r, (a - b) * r));
            }
            Gate::Cnot { control, target } => {
                let (cm, tm) = (1usize << control, 1usize << target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            Gate::Cz { control, target } => {
                let m = (1usize << control) | (1usize << target);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & m == m {
                        *a = -*a;
                    }
                }
            }
        }
    }

    #[inline]
    fn for_pairs<F>(&mut self, target: usize, f: F)
    where
        F: Fn(Complex64, Complex64) -> (Complex64, Complex64),
    {
        let stride = 1usize << target;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (na, nb) = f(*a, *b);
                *a = na;
                *b = nb;
            }
        }
    }

    /// `sum_k c_k <psi|P_k|psi>` for a Pauli-sum observable.
    pub fn expectation(&self, obs: &Observable) -> Result<f64> {
        if obs.width() > self.num_qubits {
            return Err(Error::QubitIndex { index: obs.width() - 1, num_qubits: self.num_qubits });
        }
        let mut total = 0.0;
        for (coef, pauli) in &obs.terms {
            total += coef * self.pauli_expectation(pauli);
        }
        Ok(total)
    }

    fn pauli_expectation(&self, pauli: &PauliString) -> f64 {
        let (x, z, ny) = pauli.masks();
        // P|i> = i^ny (-1)^{popcount(i & z)} |i ^ x>
        let phase = match ny % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, a) in self.amps.iter().enumerate() {
            let term = self.amps[i ^ x].conj() * a;
            if (i & z).count_ones() % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let v = acc * phase;
        debug_assert!(v.im.abs() < 1e-10, "imaginary residue {}", v.im);
        v.re
    }

    /// Multinomial draw of `shots` computational-basis outcomes.
    pub fn sample_counts(&self, shots: u64, seed: u64) -> Result<ShotHistogram> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let last = self.amps.len() - 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(last);
            *counts.entry(idx).or_insert(0u64) += 1;
        }
        SHOTS_DRAWN.fetch_add(shots, Ordering::Relaxed);
        Ok(ShotHistogram { counts, shots, seed })
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump {
            n: usize,
            amps: Vec<[f64; 2]>,
        }
        let dump = Dump { n: self.num_qubits, amps: self.amps.iter().map(|a| [a.re, a.im]).collect() };
        serde_json::to_string(&dump).expect("state dump serializes")
    }
}

pub fn new_zero_state(num_qubits: usize) -> Result<StateVector> {
    StateVector::new_zero(num_qubits)
}

pub fn apply_gate(mut state: StateVector, gate: &Gate) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

pub fn run_circuit(circuit: &Circuit, mut state: StateVector) -> Result<StateVector> {
    circuit.run(&mut state)?;
    Ok(state)
}

pub fn expectation(state: &StateVector, obs: &Observable) -> Result<f64> {
    state.expectation(obs)
}

/// `|<a|b>|^2`.
pub fn overlap_sq(a: &StateVector, b: &StateVector) -> Result<f64> {
    if a.num_qubits != b.num_qubits {
        return Err(Error::QubitMismatch { expected: a.num_qubits, got: b.num_qubits });
    }
    // Accumulate in index order on both sides so the result is symmetric bit-for-bit.
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for (x, y) in a.amps.iter().zip(&b.amps) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    Ok((re * re + im * im).clamp(0.0, 1.0))
}

pub fn sample_counts(state: &StateVector, shots: u64, seed: u64) -> Result<ShotHistogram> {
    state.sample_counts(shots, seed)
}

/// Binds a trainable parameter to a rotation gate in a [`Circuit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub gate_index: usize,
    pub param_index: usize,
}

/// Ordered gate list on a fixed register, with optional trainable-angle slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
    pub param_slots: Vec<ParamSlot>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::QubitRange(num_qubits));
        }
        Ok(Circuit { num_qubits, gates: Vec::new(), param_slots: Vec::new() })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check(self.num_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Pushes a rotation whose angle is trainable parameter `param_index`.
    pub fn push_param(&mut self, gate: Gate, param_index: usize) -> Result<()> {
        if !gate.is_rotation() {
            return Err(Error::Config(format!("{gate:?} cannot carry a parameter")));
        }
        self.push(gate)?;
        self.param_slots.push(ParamSlot { gate_index: self.gates.len() - 1, param_index });
        Ok(())
    }

    /// Appends `other`; its parameter slots keep their parameter indices.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::QubitMismatch { expected: self.num_qubits, got: other.num_qubits });
        }
        let offset = self.gates.len();
        self.gates.extend_from_slice(&other.gates);
        self.param_slots.extend(other.param_slots.iter().map(|s| ParamSlot { gate_index: s.gate_index + offset, param_index: s.param_index }));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.param_slots.iter().map(|s| s.param_index + 1).max().unwrap_or(0)
    }

    /// Reversed gate list with negated angles.
    pub fn inverse(&self) -> Circuit {
        let n = self.gates.len();
        let gates = self.gates.iter().rev().map(Gate::inverse).collect();
        let mut param_slots: Vec<ParamSlot> =
            self.param_slots.iter().map(|s| ParamSlot { gate_index: n - 1 - s.gate_index, param_index: s.param_index }).collect();
        param_slots.sort_by_key(|s| s.gate_index);
        Circuit { num_qubits: self.num_qubits, gates, param_slots }
    }

    /// Copy with `delta` added to every gate bound to `param_index`.
    pub fn shifted(&self, param_index: usize, delta: f64) -> Result<Circuit> {
        let np = self.num_params();
        if param_index >= np {
            return Err(Error::ParamIndex { index: param_index, len: np });
        }
        let mut out = self.clone();
        for s in self.param_slots.iter().filter(|s| s.param_index == param_index) {
            if let Some(a) = out.gates[s.gate_index].angle_mut() {
                *a += delta;
            }
        }
        Ok(out)
    }

    pub fn run(&self, state: &mut StateVector) -> Result<()> {
        if state.num_qubits != self.num_qubits {
            return Err(Error::QubitMismatch { expected: self.num_qubits, got: state.num_qubits });
        }
        for g in &self.gates {
            state.apply(g)?;
        }
        CIRCUITS_RUN.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Runs the circuit on `|0...0>`.
    pub fn prepare(&self) -> Result<StateVector> {
        let mut s = StateVector::new_zero(self.num_qubits)?;
        self.run(&mut s)?;
        Ok(s)
    }

    /// Runs gates `range` on `state`. Gates must already be valid for the
    /// state's register (true for anything built through `push`).
    pub(crate) fn run_range(&self, state: &mut StateVector, range: std::ops::Range<usize>) {
        for g in &self.gates[range] {
            state.apply_unchecked(g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_state_layout() {
        assert_eq!(StateVector::new_zero(1).unwrap().amps(), &[c(1.0), c(0.0)]);
        let s = StateVector::new_zero(3).unwrap();
        assert_eq!(s.amps().len(), 8);
        assert_eq!(s.amps()[0], c(1.0));
        assert!(s.amps()[1..].iter().all(|a| *a == c(0.0)));
        assert!(matches!(StateVector::new_zero(13), Err(Error::QubitRange(13))));
        assert!(StateVector::new_zero(0).is_err());
    }

    #[test]
    fn ry_pi_flips() {
        let s = apply_gate(StateVector::new_zero(1).unwrap(), &Gate::Ry { target: 0, angle: PI }).unwrap();
        assert_abs_diff_eq!(s.amps()[0].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amps()[1].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ry_half_pi_is_plus() {
        let s = apply_gate(StateVector::new_zero(1).unwrap(), &Gate::Ry { target: 0, angle: PI / 2.0 }).unwrap();
        assert_abs_diff_eq!(s.amps()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amps()[1].re, FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn cnot_truth_table() {
        // |10> in ket notation (q0 = 1, q1 = 0) is basis index 1.
        let mut amps = vec![c(0.0); 4];
        amps[1] = c(1.0);
        let mut s = StateVector::from_amps(amps).unwrap();
        s.apply(&Gate::Cnot { control: 0, target: 1 }).unwrap();
        assert_eq!(s.amps()[3], c(1.0));
        assert!(s.apply(&Gate::Cnot { control: 1, target: 1 }).is_err());
        assert!(s.apply(&Gate::Cnot { control: 0, target: 2 }).is_err());
    }

    #[test]
    fn rz_and_rx_matrices() {
        let mut s = StateVector::new_zero(1).unwrap();
        s.apply(&Gate::Rz { target: 0, angle: 0.8 }).unwrap();
        assert_abs_diff_eq!(s.amps()[0].arg(), -0.4, epsilon = 1e-15);
        let mut s = StateVector::new_zero(1).unwrap();
        s.apply(&Gate::Rx { target: 0, angle: PI }).unwrap();
        // RX(pi)|0> = -i|1>
        assert_abs_diff_eq!(s.amps()[1].im, -1.0, epsilon = 1e-15);
        let mut s = StateVector::new_zero(1).unwrap();
        s.apply(&Gate::H { target: 0 }).unwrap();
        s.apply(&Gate::H { target: 0 }).unwrap();
        assert_abs_diff_eq!(s.amps()[0].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn double_ry_pi_is_minus_identity() {
        let mut circ = Circuit::new(1).unwrap();
        circ.push(Gate::Ry { target: 0, angle: PI }).unwrap();
        circ.push(Gate::Ry { target: 0, angle: PI }).unwrap();
        let s = run_circuit(&circ, StateVector::new_zero(1).unwrap()).unwrap();
        assert_abs_diff_eq!(s.amps()[0].norm_sqr(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amps()[0].re, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let circ = Circuit::new(2).unwrap();
        let s = StateVector::new_zero(2).unwrap();
        assert_eq!(run_circuit(&circ, s.clone()).unwrap(), s);
        let bad = Circuit::new(3).unwrap();
        assert!(matches!(run_circuit(&bad, s), Err(Error::QubitMismatch { .. })));
    }

    #[test]
    fn pauli_expectations() {
        let zero = StateVector::new_zero(1).unwrap();
        assert_eq!(zero.expectation(&Observable::z(0)).unwrap(), 1.0);
        let one = apply_gate(zero.clone(), &Gate::Ry { target: 0, angle: PI }).unwrap();
        assert_abs_diff_eq!(one.expectation(&Observable::z(0)).unwrap(), -1.0, epsilon = 1e-15);
        let plus = apply_gate(zero.clone(), &Gate::H { target: 0 }).unwrap();
        let x = Observable { terms: vec![(1.0, PauliString::parse("X").unwrap())] };
        assert_abs_diff_eq!(plus.expectation(&x).unwrap(), 1.0, epsilon = 1e-15);
        // RX(-pi/2)|0> points along +Y
        let ystate = apply_gate(zero.clone(), &Gate::Rx { target: 0, angle: -PI / 2.0 }).unwrap();
        let y = Observable { terms: vec![(1.0, PauliString::parse("Y").unwrap())] };
        assert_abs_diff_eq!(ystate.expectation(&y).unwrap(), 1.0, epsilon = 1e-12);
        assert!(zero.expectation(&Observable::z(1)).is_err());
    }

    #[test]
    fn overlap_basics() {
        let zero = StateVector::new_zero(1).unwrap();
        let one = apply_gate(zero.clone(), &Gate::Ry { target: 0, angle: PI }).unwrap();
        assert_eq!(overlap_sq(&zero, &zero).unwrap(), 1.0);
        assert_abs_diff_eq!(overlap_sq(&zero, &one).unwrap(), 0.0, epsilon = 1e-15);
        assert!(overlap_sq(&zero, &StateVector::new_zero(2).unwrap()).is_err());
    }

    #[test]
    fn sampling_contracts() {
        let zero = StateVector::new_zero(2).unwrap();
        let h = zero.sample_counts(100, 3).unwrap();
        assert_eq!(h.counts.get(&0), Some(&100));
        assert_eq!(h.counts.values().sum::<u64>(), 100);
        assert!(matches!(zero.sample_counts(0, 1), Err(Error::ZeroShots)));
        let plus = apply_gate(StateVector::new_zero(1).unwrap(), &Gate::H { target: 0 }).unwrap();
        assert_eq!(plus.sample_counts(500, 9).unwrap(), plus.sample_counts(500, 9).unwrap());
        assert_ne!(plus.sample_counts(500, 9).unwrap(), plus.sample_counts(500, 10).unwrap());
    }

    #[test]
    fn uniform_state_concentrates() {
        let plus = apply_gate(StateVector::new_zero(1).unwrap(), &Gate::H { target: 0 }).unwrap();
        let h = plus.sample_counts(1_000_000, 2024).unwrap();
        assert!((h.frequency(0) - 0.5).abs() < 0.005);
    }

    #[test]
    fn shifted_touches_only_bound_gates() {
        let mut circ = Circuit::new(2).unwrap();
        circ.push(Gate::Ry { target: 0, angle: 0.3 }).unwrap();
        circ.push_param(Gate::Ry { target: 1, angle: 0.5 }, 0).unwrap();
        let s = circ.shifted(0, 1.0).unwrap();
        assert_eq!(s.gates[0].angle(), Some(0.3));
        assert_eq!(s.gates[1].angle(), Some(1.5));
        assert!(circ.shifted(1, 1.0).is_err());
        assert!(circ.push_param(Gate::H { target: 0 }, 1).is_err());
    }

    #[test]
    fn json_dump_shape() {
        let v: serde_json::Value = serde_json::from_str(&StateVector::new_zero(1).unwrap().to_json()).unwrap();
        assert_eq!(v["n"], 1);
        assert_eq!(v["amps"][0][0], 1.0);
        assert_eq!(v["amps"][1][1], 0.0);
    }
}
