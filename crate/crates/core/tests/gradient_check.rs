mod support;

use std::sync::Arc;

use regnets::linop::{SvdOperator, DEFAULT_RANK_TOL};
use regnets::network::{loss_and_gradient, Identity, NetworkArch, NetworkParams, OutputProjection, TrainingSample};
use regnets::regnet::ComplementProjector;
use support::{finite_difference, rng, uniform_vec};

fn samples(side: usize, count: usize, seed: u64) -> Vec<TrainingSample> {
    let mut r = rng(seed);
    let n = side * side;
    (0..count)
        .map(|_| TrainingSample {
            input: uniform_vec(n, &mut r),
            base: uniform_vec(n, &mut r),
            target: uniform_vec(n, &mut r),
        })
        .collect()
}

fn check(params: &NetworkParams, batch: &[TrainingSample], projection: &dyn OutputProjection) {
    let (_, grads) = loss_and_gradient(params, batch, projection).unwrap();
    let analytic: Vec<f64> = grads.values().copied().collect();
    assert_eq!(analytic.len(), params.parameter_count());
    for (i, g) in analytic.iter().enumerate() {
        let fd = finite_difference(params, batch, projection, i, 1e-6);
        let scale = g.abs().max(fd.abs()).max(1e-6);
        assert!((g - fd).abs() <= 1e-4 * scale, "parameter {i}: backprop {g}, finite difference {fd}");
    }
}

#[test]
fn two_layer_gradient_matches_finite_differences() {
    let side = 5;
    let params = NetworkParams::init(NetworkArch::with_channels(side, &[3], false).unwrap(), 8).unwrap();
    check(&params, &samples(side, 3, 1), &Identity);
}

#[test]
fn gradient_through_projection_and_skip() {
    let side = 4;
    let mut r = rng(2);
    let op = Arc::new(SvdOperator::decompose(uniform_vec(7 * 16, &mut r), 7, 16, DEFAULT_RANK_TOL).unwrap());
    let mut params = NetworkParams::init(NetworkArch::with_channels(side, &[2, 2], true).unwrap(), 5).unwrap();
    params.layers[2].bias[0] = 0.05;
    check(&params, &samples(side, 2, 9), &ComplementProjector::new(op, 3));
}
