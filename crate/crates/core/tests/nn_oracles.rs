use morphdis::nn::adam::{adam_step, adam_update, AdamConfig};
use morphdis::nn::graph::Graph;
use morphdis::nn::params::{ParamStore, Parameter};
use morphdis::nn::tensor::{log_sum_exp, softmax, Tensor};
use proptest::prelude::*;

/// Cross-entropy written out in the plain form, with a max shift so large
/// logits stay finite.
fn naive_cross_entropy(logits: &[f64], gold: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
    m + z.ln() - logits[gold]
}

fn logits_and_gold() -> impl Strategy<Value = (Vec<f64>, usize)> {
    prop::collection::vec(-30.0f64..30.0, 1..12).prop_flat_map(|v| {
        let n = v.len();
        (Just(v), 0..n)
    })
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-700.0f64..700.0, 1..20)) {
        let p = softmax(&v);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn softmax_ignores_constant_shift(v in prop::collection::vec(-20.0f64..20.0, 1..10), c in -50.0f64..50.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        for (a, b) in softmax(&v).iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn log_sum_exp_bounds(v in prop::collection::vec(-100.0f64..100.0, 1..10)) {
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let l = log_sum_exp(&v);
        prop_assert!(l >= m - 1e-12);
        prop_assert!(l <= m + (v.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn cross_entropy_matches_plain_formula((logits, gold) in logits_and_gold()) {
        let mut store = ParamStore::new();
        let id = store.add(Parameter::new("x", Tensor::vector(logits.clone())));
        let mut g = Graph::new(&store);
        let x = g.param(id);
        let loss = g.cross_entropy(x, gold);
        let expected = naive_cross_entropy(&logits, gold);
        prop_assert!((g.scalar(loss) - expected).abs() <= 1e-10 * (1.0 + expected.abs()));

        // d loss / d logits = softmax - onehot
        let grads = g.backward(loss);
        let got = grads.dense(id, logits.len());
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        for (k, gk) in got.iter().enumerate() {
            let want = (logits[k] - m).exp() / z - if k == gold { 1.0 } else { 0.0 };
            prop_assert!((gk - want).abs() < 1e-12);
        }
    }
}

#[test]
fn adam_matches_hand_computed_steps() {
    let cfg = AdamConfig {
        learning_rate: 0.1,
        ..AdamConfig::default()
    };
    let (mut x, mut m, mut v) = ([1.0], [0.0], [0.0]);
    // expected (value, m, v) after each step, computed by hand
    let expected = [
        (0.900000002, 0.05, 0.00025),
        (0.9366103542405654, -0.055, 0.00124975),
        (0.9502794203389762, -0.0245, 0.00131100025),
    ];
    for (step, (g, (ex, em, ev))) in [0.5, -1.0, 0.25].into_iter().zip(expected).enumerate() {
        adam_update(&mut x, &[g], &mut m, &mut v, step as u64 + 1, &cfg);
        assert!((x[0] - ex).abs() < 1e-12, "step {}: {} vs {ex}", step + 1, x[0]);
        assert!((m[0] - em).abs() < 1e-15);
        assert!((v[0] - ev).abs() < 1e-15);
    }
}

#[test]
fn adam_step_counts_and_clears_gradient() {
    let mut p = Parameter::new("w", Tensor::vector(vec![1.0, -1.0]));
    p.grad = Tensor::vector(vec![0.5, 0.0]);
    adam_step(&mut p, &AdamConfig::default()).unwrap();
    assert_eq!(p.step_count, 1);
    assert!(p.grad.data().iter().all(|&g| g == 0.0));
    // the first step moves each touched entry by about the learning rate
    assert!((p.value.data()[0] - (1.0 - 0.0005)).abs() < 1e-10);
    assert_eq!(p.value.data()[1], -1.0);
}

#[test]
fn clipping_bounds_global_norm() {
    let mut store = ParamStore::new();
    let a = store.add(Parameter::new("a", Tensor::vector(vec![0.0; 2])));
    let b = store.add(Parameter::new("b", Tensor::vector(vec![0.0; 1])));
    store.get_mut(a).grad = Tensor::vector(vec![3.0, 4.0]);
    store.get_mut(b).grad = Tensor::vector(vec![12.0]);
    assert!((store.grad_norm() - 13.0).abs() < 1e-12);
    store.clip_grad_norm(6.5);
    assert!((store.grad_norm() - 6.5).abs() < 1e-12);
    assert!((store.get(a).grad.data()[0] - 1.5).abs() < 1e-12);
}
