#![allow(dead_code)]

use depthscout_nn::gradcheck::{compare, numeric_gradient, project, GradReport};
use depthscout_nn::layers::Layer;
use depthscout_nn::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const H: f32 = 1e-3;
pub const ATOL: f64 = 1e-4;
pub const RTOL: f64 = 1e-2;

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Distinct values at least `gap` apart in random order, so a finite
/// difference step never flips a max or a ReLU.
pub fn separated(rng: &mut ChaCha8Rng, n: usize, gap: f32) -> Vec<f32> {
    use rand::seq::SliceRandom;
    // The quarter-gap offset keeps every value away from zero.
    let mut v: Vec<f32> = (0..n).map(|i| (i as f32 - (n / 2) as f32 + 0.25) * gap).collect();
    v.shuffle(rng);
    v
}

/// Up to `max` random coordinates of a vector of length `n`.
pub fn some_indices(rng: &mut ChaCha8Rng, n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    (0..max).map(|_| rng.gen_range(0..n)).collect()
}

/// Checks input and parameter gradients of `layer` at `x` under the loss
/// `sum w_i y_i` with random `w`. Returns one report per checked tensor.
pub fn check_layer(layer: &mut dyn Layer, x: &Tensor, rng: &mut ChaCha8Rng) -> Vec<GradReport> {
    let y = layer.forward(x).unwrap();
    let w = uniform(rng, y.len(), 1.0);
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let gx = layer.backward(&Tensor::new(y.shape(), w.clone()).unwrap()).unwrap();
    assert_eq!(gx.shape(), x.shape());
    let mut reports = Vec::new();

    let idx = some_indices(rng, x.len(), 40);
    let numeric = numeric_gradient(
        |v| project(layer.forward(&Tensor::new(x.shape(), v.to_vec()).unwrap()).unwrap().data(), &w),
        x.data(),
        &idx,
        H,
    );
    let analytic: Vec<f64> = idx.iter().map(|&i| gx.data()[i] as f64).collect();
    reports.push(compare(&analytic, &numeric, &idx, ATOL, RTOL));

    let n_params = layer.params().len();
    for k in 0..n_params {
        let (values, grads) = {
            let p = &layer.params()[k];
            (p.data().to_vec(), p.grad().unwrap().to_vec())
        };
        let idx = some_indices(rng, values.len(), 40);
        let numeric = numeric_gradient(
            |v| {
                layer.params_mut()[k].data_mut().copy_from_slice(v);
                project(layer.forward(x).unwrap().data(), &w)
            },
            &values,
            &idx,
            H,
        );
        layer.params_mut()[k].data_mut().copy_from_slice(&values);
        let analytic: Vec<f64> = idx.iter().map(|&i| grads[i] as f64).collect();
        reports.push(compare(&analytic, &numeric, &idx, ATOL, RTOL));
    }
    reports
}

pub fn assert_passed(what: &str, reports: &[GradReport]) {
    for (k, r) in reports.iter().enumerate() {
        assert!(r.passed(), "{what}: tensor {k} failed {r:?}");
    }
}
