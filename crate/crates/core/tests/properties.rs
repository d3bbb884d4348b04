use proptest::prelude::*;

use qids_core::dataio::{balance, binarize, split, synth_generate, BalanceStrategy, SynthConfig};
use qids_core::encode::EncoderConfig;
use qids_core::qkernel::{kernel_exact, kernel_shots};
use qids_core::qtnn::{map_weights, QtArch, QtnnModel, WeightMap};
use qids_core::simcore::{Circuit, Gate, Observable};
use qids_core::vqc::{class_probs, qnn_forward, softmax, QnnModel};

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    (0..6usize, 0..n, 1..n.max(2), -7.0..7.0f64).prop_map(move |(kind, q, off, angle)| {
        let t = (q + off) % n;
        match kind {
            _ if n == 1 && kind >= 4 => Gate::H { target: q },
            0 => Gate::Rx { target: q, angle },
            1 => Gate::Ry { target: q, angle },
            2 => Gate::Rz { target: q, angle },
            3 => Gate::H { target: q },
            4 => Gate::Cnot { control: q, target: t },
            _ => Gate::Cz { control: q, target: t },
        }
    })
}

fn circuit() -> impl Strategy<Value = Circuit> {
    (1..6usize).prop_flat_map(|n| {
        prop::collection::vec(gate(n), 0..30).prop_map(move |gs| {
            let mut c = Circuit::new(n).unwrap();
            for g in gs {
                c.push(g).unwrap();
            }
            c
        })
    })
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circuits_preserve_norm_and_bound_expectations(c in circuit()) {
        let s = c.prepare().unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        for q in 0..s.num_qubits() {
            let z = s.expectation(&Observable::z(q)).unwrap();
            prop_assert!(z.abs() <= 1.0 + 1e-12);
        }
        let p: f64 = s.probabilities().iter().sum();
        prop_assert!((p - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_kernel_is_a_symmetric_similarity(x in point(4), y in point(4)) {
        let enc = EncoderConfig::with_qubits(4);
        let kxy = kernel_exact(&x, &y, &enc).unwrap();
        let kyx = kernel_exact(&y, &x, &enc).unwrap();
        prop_assert!((kxy - kyx).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&kxy));
        prop_assert!((kernel_exact(&x, &x, &enc).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shot_kernel_is_a_frequency(x in point(3), y in point(3), seed in any::<u64>()) {
        let enc = EncoderConfig::with_qubits(3);
        let shots = 257;
        let k = kernel_shots(&x, &y, &enc, shots, seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert!(((k * shots as f64).round() - k * shots as f64).abs() < 1e-9);
        prop_assert_eq!(k, kernel_shots(&x, &y, &enc, shots, seed).unwrap());
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0..50.0f64, 1..6)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn qnn_class_probabilities_sum_to_one(x in point(3), seed in any::<u64>(), hybrid in any::<bool>()) {
        let m = if hybrid { QnnModel::hybrid(3, 2, seed) } else { QnnModel::pure(3, 2, seed) }.unwrap();
        let f = qnn_forward(&x, &m).unwrap();
        let p = class_probs(&m, &f);
        prop_assert_eq!(p.len(), 2);
        prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generated_weights_stay_in_range(seed in any::<u64>(), beta in 0.1..2.0f64) {
        let arch = QtArch { input_dim: 2, hidden: 2, layers: 2 };
        let map = WeightMap { beta };
        let m = QtnnModel::new(arch, map, seed).unwrap();
        let probs = m.probs().unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let scale = (1usize << arch.num_qubits()) as f64;
        let w = map_weights(&probs, &arch, &map).unwrap();
        prop_assert_eq!(w.len(), arch.num_classical());
        prop_assert!(w.iter().all(|&v| v >= -beta - 1e-12 && v <= beta * (scale - 1.0) + 1e-9));
    }

    #[test]
    fn split_partitions_and_balance_equalizes(seed in any::<u64>(), ratio in 0.3..0.9f64) {
        let mut cfg = SynthConfig { seed, ..Default::default() };
        for c in cfg.classes.values_mut() {
            c.count = 12;
        }
        let ds = binarize(&synth_generate(&cfg).unwrap());
        let sp = split(&ds, ratio, seed).unwrap();
        let mut all: Vec<usize> = sp.train_indices().iter().chain(sp.test_indices()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        let (train, test) = sp.apply(&ds).unwrap();
        prop_assert!(train.binary_counts().0 > 0 && train.binary_counts().1 > 0);
        prop_assert!(test.binary_counts().0 > 0 && test.binary_counts().1 > 0);
        let bal = balance(&train, BalanceStrategy::Undersample, seed).unwrap();
        let (pos, neg) = bal.binary_counts();
        prop_assert_eq!(pos, neg);
        prop_assert_eq!(pos, train.binary_counts().0.min(train.binary_counts().1));
    }
}
