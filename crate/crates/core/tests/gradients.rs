mod common;

use common::*;
use npc_core::model::{build_model, pair_loss_and_grads, ArchitectureSpec, LossKind};
use rand::Rng;

#[test]
fn layer_primitives_match_central_differences() {
    for seed in 0..20 {
        for c in layer_checks(seed) {
            assert!(
                c.max_rel_err < c.tolerance,
                "{} seed {seed}: {:e} >= {:e}",
                c.layer,
                c.max_rel_err,
                c.tolerance
            );
        }
    }
}

#[test]
fn reduced_network_cross_entropy_gradients() {
    let arch = reduced_arch(true);
    for seed in 0..4 {
        let params = build_model::<f64>(&arch, seed).unwrap();
        let batch = random_batch(&arch, 6, 100 + seed);
        let err = end_to_end_check(&params, &batch, LossKind::CrossEntropy, 1e-5, |_, n| (0..n).collect());
        assert!(err < 1e-4, "seed {seed}: {err:e}");
    }
}

#[test]
fn reduced_network_cosine_gradients() {
    let arch = reduced_arch(false);
    for seed in 0..4 {
        let params = build_model::<f64>(&arch, seed).unwrap();
        let batch = random_batch(&arch, 6, 200 + seed);
        let err = end_to_end_check(&params, &batch, LossKind::Cosine, 1e-5, |_, n| (0..n).collect());
        assert!(err < 1e-4, "seed {seed}: {err:e}");
    }
}

#[test]
fn default_network_sampled_gradients() {
    let arch = ArchitectureSpec::default();
    let params = build_model::<f64>(&arch, 7).unwrap();
    let batch = random_batch(&arch, 2, 8);
    // biases feeding a batch norm cancel exactly; their numeric gradient is
    // pure roundoff, so check them for zero instead
    let names: Vec<String> = params.trainable().into_iter().map(|(n, _)| n).collect();
    let pre_bn: Vec<bool> = names
        .iter()
        .map(|n| n.ends_with(".bias") && !n.starts_with("head"))
        .collect();
    let x1: Vec<_> = batch.x1.iter().collect();
    let x2: Vec<_> = batch.x2.iter().collect();
    let grads = pair_loss_and_grads(&mut params.clone(), &x1, &x2, &batch.labels, LossKind::CrossEntropy, false)
        .unwrap()
        .grads;
    for (g, skip) in grads.iter().zip(&pre_bn) {
        if *skip {
            assert!(g.data().iter().all(|v| v.abs() < 1e-12));
        }
    }
    let mut r = rng(9);
    let err = end_to_end_check(&params, &batch, LossKind::CrossEntropy, 1e-6, |t, n| {
        if pre_bn[t] { vec![] } else { (0..3).map(|_| r.gen_range(0..n)).collect() }
    });
    assert!(err < 1e-4, "{err:e}");
}
