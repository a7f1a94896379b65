use super::*;
use crate::testutil::{fd_check_network, random_tensor};

fn assert_grads_ok(net: &Network, input: &Tensor, nonce: Option<u64>, seed: u64) {
    let report = fd_check_network(net, input, nonce, seed, 1e-3, 1e-3);
    assert!(
        report.ok(),
        "gradient check failed: {:?} (checked {}, skipped {})",
        report.worst,
        report.checked,
        report.skipped
    );
    assert!(report.checked > 0, "nothing was checked");
}

#[test]
fn relu_forward_matches_definition() {
    let net = Network::new(vec![Layer::Relu]);
    let out = net.infer(&Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0])).unwrap();
    assert_eq!(out.data(), &[0.0, 0.0, 2.0]);
}

#[test]
fn softmax_symmetric_input() {
    let net = Network::new(vec![Layer::Softmax]);
    let out = net.infer(&Tensor::from_vec(&[2], vec![0.0, 0.0])).unwrap();
    assert_eq!(out.data(), &[0.5, 0.5]);
}

#[test]
fn softmax_is_probability_vector() {
    for seed in 0..10u64 {
        let net = Network::new(vec![Layer::Softmax]);
        let input = random_tensor(&[10], -5.0, 5.0, seed);
        let out = net.infer(&input).unwrap();
        assert!(out.data().iter().all(|&v| v >= 0.0));
        let sum: f32 = out.data().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-5);
    }
}

#[test]
fn fixed_seed_net_matches_hand_rolled_forward() {
    // Two-layer net (dense then softmax) on a fixed 4x4 input, recomputed
    // by explicit f64 loops over the same weights.
    let net = NetworkBuilder::new(2024).flatten().dense(16, 3).softmax().build();
    let input = random_tensor(&[1, 4, 4], 0.0, 1.0, 7);
    let out = net.infer(&input).unwrap();

    let params = net.params();
    let (w, b) = (params[0].data(), params[1].data());
    let mut z = [0.0f64; 3];
    for o in 0..3 {
        let mut acc = b[o] as f64;
        for i in 0..16 {
            acc += w[o * 16 + i] as f64 * input.data()[i] as f64;
        }
        z[o] = acc;
    }
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    for (got, want) in out.data().iter().zip(exps.iter().map(|e| e / sum)) {
        assert!((*got as f64 - want).abs() < 1e-5, "{got} vs {want}");
    }
}

#[test]
fn dense_weight_grad_is_outer_product() {
    let mut net = NetworkBuilder::new(5).dense(3, 2).build();
    net.set_mode(Mode::Training);
    let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]);
    let trace = net.forward_train(&x, 0).unwrap();
    let g = Tensor::from_vec(&[2], vec![0.7, -0.3]);
    let grads = net.backward(&trace, &g).unwrap();
    let dw = &grads.layers[0].as_ref().unwrap().weight;
    for o in 0..2 {
        for i in 0..3 {
            let want = g.data()[o] * x.data()[i];
            assert!((dw.data()[o * 3 + i] - want).abs() < 1e-6);
        }
    }
    assert_eq!(grads.layers[0].as_ref().unwrap().bias.data(), g.data());
}

#[test]
fn zero_output_grad_gives_zero_param_grads() {
    let net = NetworkBuilder::new(1).conv3x3(1, 2).relu().flatten().dense(2 * 16, 4).build();
    let input = random_tensor(&[1, 4, 4], 0.0, 1.0, 3);
    let trace = net.forward_trace(&input).unwrap();
    let g = Tensor::zeros(&[4]);
    let grads = net.backward(&trace, &g).unwrap();
    for lg in grads.layers.iter().flatten() {
        assert!(lg.weight.data().iter().all(|&v| v == 0.0));
        assert!(lg.bias.data().iter().all(|&v| v == 0.0));
    }
    assert!(grads.input.data().iter().all(|&v| v == 0.0));
}

#[test]
fn conv_gradients_match_finite_differences() {
    for seed in 0..3u64 {
        let net = NetworkBuilder::new(seed).conv3x3(2, 3).build();
        let input = random_tensor(&[2, 6, 6], -1.0, 1.0, seed + 100);
        assert_grads_ok(&net, &input, None, seed);
    }
}

#[test]
fn relu_and_pool_gradients_match_finite_differences() {
    for seed in 0..3u64 {
        let net = NetworkBuilder::new(seed).conv3x3(1, 2).relu().maxpool2x2().build();
        let input = random_tensor(&[1, 6, 6], -1.0, 1.0, seed + 200);
        assert_grads_ok(&net, &input, None, seed);
    }
}

#[test]
fn dense_softmax_gradients_match_finite_differences() {
    for seed in 0..3u64 {
        let net = NetworkBuilder::new(seed).flatten().dense(36, 5).softmax().build();
        let input = random_tensor(&[1, 6, 6], -1.0, 1.0, seed + 300);
        assert_grads_ok(&net, &input, None, seed);
    }
}

#[test]
fn dropout_gradients_match_finite_differences() {
    for seed in 0..3u64 {
        let mut net = NetworkBuilder::new(seed)
            .flatten()
            .dense(36, 12)
            .relu()
            .dropout(0.4)
            .dense(12, 4)
            .build();
        net.set_mode(Mode::Training);
        let input = random_tensor(&[1, 6, 6], -1.0, 1.0, seed + 400);
        assert_grads_ok(&net, &input, Some(seed + 11), seed);
    }
}

#[test]
fn full_stack_gradients_match_finite_differences() {
    let mut net = NetworkBuilder::new(9)
        .conv3x3(1, 2)
        .relu()
        .conv3x3(2, 2)
        .relu()
        .maxpool2x2()
        .dropout(0.3)
        .flatten()
        .dense(2 * 3 * 3, 8)
        .relu()
        .dropout(0.5)
        .dense(8, 4)
        .softmax()
        .build();
    net.set_mode(Mode::Training);
    let input = random_tensor(&[1, 6, 6], 0.0, 1.0, 99);
    assert_grads_ok(&net, &input, Some(5), 9);
}

#[test]
fn inference_is_deterministic_and_dropout_free() {
    let net = NetworkBuilder::new(33)
        .conv3x3(1, 4)
        .relu()
        .maxpool2x2()
        .dropout(0.5)
        .flatten()
        .dense(4 * 3 * 3, 10)
        .softmax()
        .build();
    let input = random_tensor(&[1, 6, 6], 0.0, 1.0, 1);
    let a = net.infer(&input).unwrap();
    let b = net.infer(&input).unwrap();
    assert_eq!(a.data(), b.data(), "inference must be bit-identical");

    // Dropout inference = identity: a net of just dropout passes through.
    let drop = Network::new(vec![Layer::Dropout { rate: 0.9, seed: 4 }]);
    let out = drop.infer(&input).unwrap();
    assert_eq!(out.data(), input.data());
}

#[test]
fn training_dropout_masks_are_nonce_deterministic() {
    let mut net = NetworkBuilder::new(12).flatten().dropout(0.5).build();
    net.set_mode(Mode::Training);
    let input = random_tensor(&[1, 4, 4], 0.5, 1.0, 2);
    let t1 = net.forward_train(&input, 77).unwrap();
    let t2 = net.forward_train(&input, 77).unwrap();
    let t3 = net.forward_train(&input, 78).unwrap();
    assert_eq!(t1.output().data(), t2.output().data());
    assert_ne!(t1.output().data(), t3.output().data());
}

#[test]
fn forward_rejects_shape_mismatch_with_layer_index() {
    let net = NetworkBuilder::new(0).conv3x3(1, 2).flatten().dense(99, 4).build();
    let input = random_tensor(&[1, 4, 4], 0.0, 1.0, 0);
    match net.forward(&input) {
        Err(NnError::ShapeMismatch { layer, .. }) => assert_eq!(layer, 2),
        other => panic!("expected shape mismatch, got {other:?}"),
    }
}

#[test]
fn backward_rejects_mismatched_output_grad() {
    let net = NetworkBuilder::new(0).flatten().dense(16, 4).build();
    let input = random_tensor(&[1, 4, 4], 0.0, 1.0, 0);
    let trace = net.forward_trace(&input).unwrap();
    let bad = Tensor::zeros(&[5]);
    assert!(net.backward(&trace, &bad).is_err());
}
