//! Criteria on the network stack, the schedule and the two methods.

use depthscout_baselines::experiment::{run, ExperimentConfig};
use depthscout_baselines::MeanModel;
use depthscout_core::{DepthImage, Geometry, LabelVolume, VoxelVolume};
use depthscout_nn::gradcheck::{compare, numeric_gradient, project};
use depthscout_nn::layers::{Conv2d, Conv3d, Convert2dTo3d, Layer, MaxPool2d, Relu, Sigmoid, Upsample};
use depthscout_nn::loss::dice_bce_loss;
use depthscout_nn::net::{Conversion, ModelConfig, Network, Pix2VoxConfig, SkipConversion};
use depthscout_nn::optim::lr_schedule;
use depthscout_nn::train::{TrainConfig, FULL_SCALE_TOTAL_STEPS};
use depthscout_nn::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Check;

const H: f32 = 1e-3;
const ATOL: f64 = 1e-4;
const RTOL: f64 = 1e-2;

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Distinct values away from zero, so a finite step never crosses a kink.
fn separated(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    let mut v: Vec<f32> = (0..n).map(|i| (i as f32 - (n / 2) as f32 + 0.25) * 0.01).collect();
    v.shuffle(rng);
    v
}

fn indices(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    if n <= 40 {
        (0..n).collect()
    } else {
        (0..40).map(|_| rng.gen_range(0..n)).collect()
    }
}

/// Input and parameter gradients under the loss `sum w_i y_i`.
fn check_layer(layer: &mut dyn Layer, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let y = layer.forward(x).map_err(|e| e.to_string())?;
    let w = uniform(rng, y.len(), 1.0);
    for p in layer.params_mut() {
        p.zero_grad();
    }
    let gx = layer.backward(&Tensor::new(y.shape(), w.clone()).unwrap()).map_err(|e| e.to_string())?;
    let idx = indices(rng, x.len());
    let numeric = numeric_gradient(
        |v| project(layer.forward(&Tensor::new(x.shape(), v.to_vec()).unwrap()).unwrap().data(), &w),
        x.data(),
        &idx,
        H,
    );
    let analytic: Vec<f64> = idx.iter().map(|&i| gx.data()[i] as f64).collect();
    let r = compare(&analytic, &numeric, &idx, ATOL, RTOL);
    ensure!(r.passed(), "input gradient: {r:?}");
    for k in 0..layer.params().len() {
        let values = layer.params()[k].data().to_vec();
        let grads = layer.params()[k].grad().unwrap().to_vec();
        let idx = indices(rng, values.len());
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
        let r = compare(&analytic, &numeric, &idx, ATOL, RTOL);
        ensure!(r.passed(), "parameter {k}: {r:?}");
    }
    Ok(())
}

fn tensor(shape: &[usize], data: Vec<f32>) -> Tensor {
    Tensor::new(shape, data).unwrap()
}

pub fn gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc3);
    let kinds = ["conv2d", "conv3d", "conversion", "max pool", "upsample", "sigmoid", "relu", "dice+bce"];
    for kind in kinds {
        for case in 0..20 {
            let r = &mut rng;
            let checked = match kind {
                "conv2d" => {
                    let (ci, co) = (r.gen_range(1..4), r.gen_range(1..4));
                    let k = [r.gen_range(1..4), r.gen_range(1..4)];
                    let s = [r.gen_range(1..3), r.gen_range(1..3)];
                    let p = [r.gen_range(0..k[0]), r.gen_range(0..k[1])];
                    let hw = [r.gen_range(k[0]..7), r.gen_range(k[1]..7)];
                    let b = r.gen_range(1..3);
                    let mut layer = Conv2d::new(ci, co, k, s, p, r).unwrap();
                    layer.inner.bias.data_mut().copy_from_slice(&uniform(r, co, 0.5));
                    let x = tensor(&[b, ci, hw[0], hw[1]], uniform(r, b * ci * hw[0] * hw[1], 1.0));
                    check_layer(&mut layer, &x, r)
                }
                "conv3d" => {
                    let (ci, co) = (r.gen_range(1..4), r.gen_range(1..4));
                    let k: [usize; 3] = std::array::from_fn(|_| r.gen_range(1..4));
                    let s: [usize; 3] = std::array::from_fn(|_| r.gen_range(1..3));
                    let p: [usize; 3] = std::array::from_fn(|a| r.gen_range(0..k[a]));
                    let dhw: [usize; 3] = std::array::from_fn(|a| r.gen_range(k[a]..6));
                    let b = r.gen_range(1..3);
                    let mut layer = Conv3d::new(ci, co, k, s, p, r).unwrap();
                    layer.bias.data_mut().copy_from_slice(&uniform(r, co, 0.5));
                    let n = b * ci * dhw.iter().product::<usize>();
                    let x = tensor(&[b, ci, dhw[0], dhw[1], dhw[2]], uniform(r, n, 1.0));
                    check_layer(&mut layer, &x, r)
                }
                "conversion" => {
                    let c = r.gen_range(2..9);
                    let (k, s, f) = (r.gen_range(1..=c), r.gen_range(1..4), r.gen_range(1..4));
                    let pad = r.gen_range(0..k);
                    let hw = [r.gen_range(1..5), r.gen_range(1..5)];
                    let b = r.gen_range(1..3);
                    let mut layer = Convert2dTo3d::new(k, s, f, pad, r).unwrap();
                    let x = tensor(&[b, c, hw[0], hw[1]], uniform(r, b * c * hw[0] * hw[1], 1.0));
                    check_layer(&mut layer, &x, r)
                }
                "max pool" => {
                    let shape = [r.gen_range(1..3), r.gen_range(1..4), 2 * r.gen_range(1..4), 2 * r.gen_range(1..4)];
                    let x = tensor(&shape, separated(r, shape.iter().product()));
                    check_layer(&mut MaxPool2d::new(), &x, r)
                }
                "upsample" => {
                    let f: [usize; 3] = std::array::from_fn(|_| r.gen_range(1..3));
                    let shape = [r.gen_range(1..3), r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..4), r.gen_range(1..4)];
                    let x = tensor(&shape, uniform(r, shape.iter().product(), 1.0));
                    check_layer(&mut Upsample::new(f).unwrap(), &x, r)
                }
                "sigmoid" => {
                    let shape = [r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..6)];
                    let x = tensor(&shape, uniform(r, shape.iter().product(), 6.0));
                    check_layer(&mut Sigmoid::new(), &x, r)
                }
                "relu" => {
                    let shape = [r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..6)];
                    let x = tensor(&shape, separated(r, shape.iter().product()));
                    check_layer(&mut Relu::new(), &x, r)
                }
                _ => {
                    let shape = [r.gen_range(1..3), r.gen_range(1..4), r.gen_range(1..5), r.gen_range(1..5)];
                    let n: usize = shape.iter().product();
                    let logits = uniform(r, n, 3.0);
                    let density = [0.0, 0.3, 0.7][case % 3];
                    let t = tensor(&shape, (0..n).map(|_| r.gen_bool(density) as u8 as f32).collect());
                    let (wd, wb) = [(0.5, 0.5), (1.0, 0.0), (0.0, 1.0), (0.3, 0.7)][case % 4];
                    let value = dice_bce_loss(&tensor(&shape, logits.clone()), &t, wd, wb).unwrap();
                    let idx = indices(r, n);
                    let numeric = numeric_gradient(
                        |v| dice_bce_loss(&tensor(&shape, v.to_vec()), &t, wd, wb).unwrap().loss,
                        &logits,
                        &idx,
                        H,
                    );
                    let analytic: Vec<f64> = idx.iter().map(|&i| value.grad.data()[i] as f64).collect();
                    let rep = compare(&analytic, &numeric, &idx, ATOL, RTOL);
                    if rep.passed() {
                        Ok(())
                    } else {
                        Err(format!("{rep:?}"))
                    }
                }
            };
            checked.map_err(|e| format!("{kind} case {case}: {e}"))?;
        }
    }
    Ok(format!("{} layer kinds x 20 shapes", kinds.len()))
}

/// A conversion producing exactly `depth` slices and the channel count it needs.
fn conversion_for(depth: usize, rng: &mut ChaCha8Rng) -> (Conversion, usize) {
    let (s, k) = (rng.gen_range(1..4), rng.gen_range(1..4));
    let span = s * (depth - 1) + k;
    let pad = rng.gen_range(0..=(span - 1) / 2).min(1);
    let c = span - 2 * pad + rng.gen_range(0..s);
    (Conversion { k, s, f: rng.gen_range(1..4), pad }, c)
}

fn random_config(rng: &mut ChaCha8Rng) -> Pix2VoxConfig {
    let levels = rng.gen_range(1..5);
    let scale = 1usize << (levels - 1);
    let input_hw = [scale * rng.gen_range(1..3), scale * rng.gen_range(1..3)];
    let mut widths: Vec<usize> = (0..levels).map(|_| rng.gen_range(1..5)).collect();
    let d0 = rng.gen_range(1..4);
    let (bottleneck, c) = conversion_for(d0, rng);
    widths[levels - 1] = c;
    let mut d = d0;
    let mut skips = Vec::new();
    for stage in 0..levels - 1 {
        let level = levels - 2 - stage;
        if rng.gen_bool(0.5) {
            let target = if rng.gen_bool(0.5) { d } else { 2 * d };
            let (conversion, c) = conversion_for(target, rng);
            widths[level] = c;
            skips.push(SkipConversion { level, conversion });
            d = target;
        } else {
            d *= 2;
        }
    }
    Pix2VoxConfig {
        input_hw,
        encoder_widths: widths,
        convs_per_level: rng.gen_range(1..3),
        bottleneck,
        skips,
        decoder_widths: (1..levels).map(|_| rng.gen_range(1..4)).collect(),
        decoder_kernels: (1..levels).map(|_| [1, 3][rng.gen_range(0..2)]).collect(),
        n_labels: rng.gen_range(1..4),
        output_shape: [d, input_hw[0], input_hw[1]],
    }
}

pub fn shapes() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc4);
    let mut conversions = 0;
    for case in 0..200u64 {
        let cfg = random_config(&mut rng);
        let plan = cfg.plan().map_err(|e| format!("case {case}: {e}"))?;
        ensure!(plan.output == cfg.output_shape, "case {case}: planned {:?}", plan.output);
        let b = rng.gen_range(1..3);
        let [h, w] = cfg.input_hw;
        let x = tensor(&[b, 1, h, w], (0..b * h * w).map(|i| (i % 7) as f32 / 7.0).collect());
        let mut net = Network::new(&ModelConfig::Pix2vox(cfg.clone()), case).unwrap();
        let y = net.forward(&x).map_err(|e| format!("case {case}: {e}"))?;
        let [d, oh, ow] = cfg.output_shape;
        ensure!(y.shape() == [b, cfg.n_labels, d, oh, ow], "case {case}: forward gave {:?}", y.shape());
        conversions += 1 + cfg.skips.len();
    }
    for case in 0..200 {
        let c = rng.gen_range(1..20);
        let (k, s, p) = (rng.gen_range(1..8), rng.gen_range(1..5), rng.gen_range(0..3));
        if c + 2 * p < k {
            ensure!(Conversion { k, s, f: 1, pad: p }.depth(c).is_none(), "case {case}: impossible depth accepted");
            continue;
        }
        let d = (c + 2 * p - k) / s + 1;
        let mut layer = Convert2dTo3d::new(k, s, 2, p, &mut rng).unwrap();
        ensure!(layer.output_depth(c) == Some(d), "case {case}: depth {:?}, formula {d}", layer.output_depth(c));
        let y = layer.forward(&Tensor::zeros(&[1, c, 2, 3])).unwrap();
        ensure!(y.shape() == [1, 2, d, 2, 3], "case {case}: conversion output {:?}", y.shape());
    }
    Ok(format!("200 networks with {conversions} conversions"))
}

pub fn schedule() -> Check {
    for total in [TrainConfig::default().total_steps, FULL_SCALE_TOTAL_STEPS] {
        let cfg = TrainConfig { total_steps: total, ..TrainConfig::default() };
        let w = cfg.warmup_steps;
        ensure!(cfg.lr == 0.001 && w == 1000, "defaults are lr {} and warmup {w}", cfg.lr);
        ensure!(lr_schedule(w, &cfg) == 0.001, "lr at the end of warmup is {}", lr_schedule(w, &cfg));
        let last = lr_schedule(total - 1, &cfg);
        ensure!(last < 1e-8, "lr at the final step of {total} is {last}");
        for s in 0..w {
            let ramp = cfg.lr * s as f64 / w as f64;
            let got = lr_schedule(s, &cfg);
            // One step of quantization, plus rounding.
            let step = cfg.lr / w as f64;
            ensure!((got - ramp).abs() <= step * (1.0 + 1e-9), "warmup step {s}: {got} vs {ramp}");
        }
        let mut prev = f64::INFINITY;
        for s in w..total {
            let v = lr_schedule(s, &cfg);
            ensure!(v <= prev, "lr rises at step {s} after warmup");
            prev = v;
        }
    }
    let last = lr_schedule(FULL_SCALE_TOTAL_STEPS - 1, &TrainConfig { total_steps: FULL_SCALE_TOTAL_STEPS, ..TrainConfig::default() });
    Ok(format!("final full-scale lr {last:.2e}"))
}

fn random_labels(rng: &mut ChaCha8Rng, g: Geometry) -> LabelVolume {
    let channels = ["liver", "spleen", "stomach"]
        .iter()
        .map(|n| {
            let density = [0.0, 0.1, 0.5][rng.gen_range(0..3)];
            (n.to_string(), VoxelVolume::from_mask(g, &(0..g.len()).map(|_| rng.gen_bool(density)).collect::<Vec<_>>()).unwrap())
        })
        .collect();
    LabelVolume::new(g, channels).unwrap()
}

pub fn mean_model() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacc7);
    for case in 0..50 {
        let g = Geometry::unit(std::array::from_fn(|_| rng.gen_range(1..8))).unwrap();
        let sample = random_labels(&mut rng, g);
        let model = MeanModel::fit(std::slice::from_ref(&sample)).map_err(|e| e.to_string())?;
        for (name, m) in sample.channels() {
            let got = model.masks().get(name).ok_or(format!("case {case}: {name} missing"))?;
            ensure!(got.data() == m.data(), "case {case}: fitted {name} differs from the only sample");
        }
        let more: Vec<LabelVolume> = (0..rng.gen_range(2..6)).map(|_| random_labels(&mut rng, g)).collect();
        let model = MeanModel::fit(&more).unwrap();
        let a = DepthImage::zeros([g.shape()[0], g.shape()[2]], [1.0, 1.0]).unwrap();
        let data: Vec<f32> = (0..g.shape()[0] * g.shape()[2]).map(|_| rng.gen()).collect();
        let b = DepthImage::new([g.shape()[0], g.shape()[2]], [1.0, 1.0], data).unwrap();
        ensure!(model.predict(&a) == model.predict(&b), "case {case}: prediction depends on the input");
        ensure!(model.predict(&a) == model.predict(&more[0]), "case {case}: prediction depends on the input type");
    }
    Ok("50 fits".into())
}

pub fn experiment() -> Check {
    let cfg = ExperimentConfig::default();
    ensure!(cfg.train.total_steps <= 2000, "{} steps", cfg.train.total_steps);
    ensure!(cfg.n_train == 128 && cfg.n_test == 32 && cfg.phantom.n_organs == 8, "wrong experiment size");
    ensure!(cfg.model.input_hw == [64, 64] && cfg.model.output_shape == [32, 64, 64], "wrong desk model size");
    let r = run(&cfg, |_, _| {}).map_err(|e| e.to_string())?;
    let (net, mean) = (r.network_summary(), r.mean_summary());
    let detail = format!(
        "Dice {:.3} vs {:.3}; DOE LR {:.2} vs {:.2} mm, SI {:.2} vs {:.2} mm, AP {:.2} vs {:.2} mm; {} steps in {:.0} s",
        net.dice, mean.dice, net.doe_lr, mean.doe_lr, net.doe_si, mean.doe_si, net.doe_ap, mean.doe_ap,
        cfg.train.total_steps, r.train_seconds
    );
    ensure!(net.dice >= mean.dice + 0.10, "{detail}");
    ensure!(net.doe_lr < mean.doe_lr && net.doe_si < mean.doe_si, "{detail}");
    Ok(detail)
}
