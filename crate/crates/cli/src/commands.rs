use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use depthscout_baselines::{combine_projections, predict_projection, train_plane_model, MeanModel};
use depthscout_core::depthsynth::render_manifest;
use depthscout_core::io::{read_depth, read_labels, write_labels};
use depthscout_core::labels::{fill_holes, keep_main_components, priority_merge};
use depthscout_core::manifest::{Manifest, ManifestItem};
use depthscout_core::metrics::evaluate;
use depthscout_core::phantom::generate_dataset;
use depthscout_core::LabelVolume;
use depthscout_nn::data::{Dataset, Plane, TargetKind};
use depthscout_nn::net::ModelConfig;
use depthscout_nn::train::{train, TrainConfig, TrainOutputs};
use depthscout_nn::{Checkpoint, Predictor};

use crate::config::{self, required, snapshot, sub_seed};
use crate::failure::{Classify, Outcome};
use crate::{Baseline, Cli, Command, TrainFlags};

pub fn run(cli: Cli) -> Outcome<()> {
    let jobs = cli.jobs as usize;
    match cli.command {
        Command::Phantom(a) => phantom(a, jobs),
        Command::Depth(a) => depth(a, jobs),
        Command::Labels(a) => labels(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Baseline(Baseline::Mean(a)) => mean_baseline(a),
        Command::Baseline(Baseline::Proj25d(a)) => projection_baseline(a),
        Command::Eval(a) => eval(a),
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: Option<PathBuf>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// A comma-separated flag with a fixed number of values.
fn exactly<T: Copy, const N: usize>(values: &[T], flag: &str) -> Outcome<[T; N]> {
    values
        .try_into()
        .map_err(|_| anyhow!("{flag} takes {N} comma-separated values, got {}", values.len()))
        .usage()
}

fn load_manifest(path: &Path) -> Outcome<Manifest> {
    Manifest::load(path)
        .with_context(|| format!("cannot load dataset manifest at {}", path.display()))
        .usage()
}

fn phantom(a: crate::PhantomArgs, jobs: usize) -> Outcome<()> {
    let mut run: config::PhantomRun = config::load(a.config.as_deref())?;
    set(&mut run.n, a.n);
    set(&mut run.seed, a.seed);
    set_path(&mut run.out, a.out);
    let p = &mut run.phantom;
    if let Some(s) = a.shape {
        p.shape = exactly(&s, "--shape")?;
    }
    if let Some(s) = a.spacing {
        p.spacing_mm = exactly(&s, "--spacing")?;
    }
    set(&mut p.n_organs, a.n_organs);
    set(&mut p.noise_amplitude, a.noise);
    if let Some(b) = a.body_scale {
        let [lo, hi] = exactly(&b, "--body-scale")?;
        p.body_scale_range = (lo, hi);
    }
    p.seed = run.seed;
    p.validate().usage()?;
    let out = required(&run.out, "--out")?.to_path_buf();
    let m = generate_dataset(run.n, run.seed, &run.phantom, &out, jobs).runtime()?;
    snapshot(&out, "phantom", &run)?;
    println!("wrote {} phantoms to {}", m.items.len(), out.display());
    Ok(())
}

fn depth(a: crate::DepthArgs, jobs: usize) -> Outcome<()> {
    let mut run: config::DepthRun = config::load(a.config.as_deref())?;
    set_path(&mut run.data, a.data);
    set(&mut run.depth.intensity_threshold, a.threshold);
    set(&mut run.depth.depth_cutoff, a.cutoff);
    set(&mut run.depth.binary_opening_radius_vox, a.body_radius);
    set(&mut run.depth.grayscale_opening_radius_px, a.depth_radius);
    run.depth.validate().usage()?;
    let mut m = load_manifest(required(&run.data, "--data")?)?;
    render_manifest(&mut m, &run.depth, jobs).runtime()?;
    snapshot(m.dir(), "depth", &run)?;
    println!("rendered {} depth images in {}", m.items.len(), m.dir().display());
    Ok(())
}

fn labels(a: crate::LabelsArgs) -> Outcome<()> {
    let mut run: config::LabelsRun = config::load(a.config.as_deref())?;
    if !a.sources.is_empty() {
        run.sources = a.sources;
    }
    set_path(&mut run.out, a.out);
    if a.no_fill_holes {
        run.fill_holes = false;
    }
    set(&mut run.min_fraction, a.min_fraction);
    if run.sources.is_empty() {
        return Err(anyhow!("at least one --source is required")).usage();
    }
    if !(0.0..=1.0).contains(&run.min_fraction) {
        return Err(anyhow!("min_fraction must lie in [0, 1], got {}", run.min_fraction)).usage();
    }
    let out = required(&run.out, "--out")?.to_path_buf();
    let sources = run
        .sources
        .iter()
        .map(|p| read_labels(p).with_context(|| format!("cannot read label source {}", p.display())))
        .collect::<anyhow::Result<Vec<LabelVolume>>>()
        .usage()?;
    let merged = priority_merge(&sources).usage()?;
    let cleaned = merged
        .map_channels(|m| {
            let m = if run.fill_holes { fill_holes(m)? } else { m.clone() };
            keep_main_components(&m, run.min_fraction)
        })
        .runtime()?;
    let dir = out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display())).runtime()?;
    write_labels(&cleaned, &out).runtime()?;
    snapshot(dir, "labels", &run)?;
    println!("wrote {} structures to {}", cleaned.len(), out.display());
    Ok(())
}

fn apply_train_flags(cfg: &mut TrainConfig, f: &TrainFlags) {
    set(&mut cfg.seed, f.seed);
    set(&mut cfg.lr, f.lr);
    set(&mut cfg.warmup_steps, f.warmup_steps);
    set(&mut cfg.total_steps, f.total_steps);
    set(&mut cfg.batch_size, f.batch_size);
    match (f.w_dice, f.w_bce) {
        (Some(d), Some(b)) => cfg.loss_weights = (d, b),
        (Some(d), None) => cfg.loss_weights = (d, 1.0 - d),
        (None, Some(b)) => cfg.loss_weights = (1.0 - b, b),
        (None, None) => {}
    }
    if f.no_augment {
        cfg.augment.enabled = false;
    }
}

fn train_cmd(a: crate::TrainArgs) -> Outcome<()> {
    let mut run: config::TrainRun = config::load(a.config.as_deref())?;
    set_path(&mut run.data, a.data);
    set_path(&mut run.out, a.out);
    set_path(&mut run.resume, a.resume);
    if a.stop_at.is_some() {
        run.stop_at = a.stop_at;
    }
    apply_train_flags(&mut run.train, &a.train);
    run.train.validate().usage()?;
    let manifest = load_manifest(required(&run.data, "--data")?)?;
    let out = required(&run.out, "--out")?.to_path_buf();
    let data = Dataset::from_manifest(&manifest, TargetKind::Volume, None).usage()?;
    // The label count always follows the data.
    run.model.n_labels = data.labels.len();
    let plan = run.model.plan().usage()?;
    let mut produced = vec![run.model.n_labels];
    produced.extend(plan.output);
    if run.model.input_hw != data.input_hw || produced != data.target_shape {
        return Err(anyhow!(
            "the model maps {:?} depth images to {:?} but the data has {:?} images and {:?} targets",
            run.model.input_hw,
            produced,
            data.input_hw,
            data.target_shape
        ))
        .usage();
    }
    let resume = match &run.resume {
        Some(p) => Some(Checkpoint::load(p).usage()?),
        None => None,
    };
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display())).runtime()?;
    snapshot(&out, "train", &run)?;
    let (ck, log) = (out.join("model.ckpt"), out.join("train_log.csv"));
    let model = ModelConfig::Pix2vox(run.model.clone());
    let outputs = TrainOutputs { checkpoint: &ck, log: &log };
    let done = train(&data, &model, &run.train, &outputs, resume, run.stop_at).runtime()?;
    println!("trained to step {} on {} samples; checkpoint {}", done.step, data.samples.len(), ck.display());
    Ok(())
}

fn depth_of(m: &Manifest, item: &ManifestItem) -> Outcome<depthscout_core::DepthImage> {
    let rel = item
        .depth
        .as_ref()
        .ok_or_else(|| anyhow!("sample {} has no depth image; run `depthscout depth` first", item.id()))
        .usage()?;
    read_depth(&m.resolve(rel)).runtime()
}

fn prediction_item(seed: u64, labels: Option<PathBuf>, boxes: Option<PathBuf>) -> ManifestItem {
    ManifestItem {
        seed,
        intensity: None,
        labels,
        depth: None,
        boxes,
    }
}

fn predict(a: crate::PredictArgs) -> Outcome<()> {
    let mut run: config::PredictRun = config::load(a.config.as_deref())?;
    set_path(&mut run.checkpoint, a.checkpoint);
    set_path(&mut run.data, a.data);
    set_path(&mut run.out, a.out);
    let ck = Checkpoint::load(required(&run.checkpoint, "--checkpoint")?).usage()?;
    if ck.target != TargetKind::Volume {
        return Err(anyhow!("this checkpoint predicts plane projections; use `baseline proj25d --predict`")).usage();
    }
    let m = load_manifest(required(&run.data, "--data")?)?;
    let out = required(&run.out, "--out")?.to_path_buf();
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display())).runtime()?;
    let mut predictor = Predictor::new(&ck).runtime()?;
    let mut items = Vec::with_capacity(m.items.len());
    for item in &m.items {
        let depth = depth_of(&m, item)?;
        let labels = predictor.predict(&depth).runtime()?;
        let name = PathBuf::from(format!("sample_{:08}_pred.vvol", item.seed));
        write_labels(&labels, &out.join(&name)).runtime()?;
        items.push(prediction_item(item.seed, Some(name), None));
    }
    let n = items.len();
    Manifest::new(&out, items, serde_json::json!({"method": "pix2vox", "labels": ck.labels})).save().runtime()?;
    snapshot(&out, "predict", &run)?;
    println!("wrote {n} predictions to {}", out.display());
    Ok(())
}

fn mean_baseline(a: crate::MeanArgs) -> Outcome<()> {
    let mut run: config::MeanRun = config::load(a.config.as_deref())?;
    set_path(&mut run.data, a.data);
    set_path(&mut run.out, a.out);
    set_path(&mut run.predict, a.predict);
    let m = load_manifest(required(&run.data, "--train")?)?;
    let out = required(&run.out, "--out")?.to_path_buf();
    let test = run.predict.as_deref().map(load_manifest).transpose()?;
    let training = m
        .items
        .iter()
        .map(|item| {
            let rel = item.labels.as_ref().ok_or_else(|| anyhow!("training sample {} has no labels", item.id()))?;
            Ok(read_labels(&m.resolve(rel))?)
        })
        .collect::<anyhow::Result<Vec<_>>>()
        .usage()?;
    if training.is_empty() {
        return Err(anyhow!("the training manifest is empty")).usage();
    }
    let model = MeanModel::fit(&training).usage()?;
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display())).runtime()?;
    model.save(&out).runtime()?;
    if let Some(test) = test {
        let mut items = Vec::with_capacity(test.items.len());
        for item in &test.items {
            let name = PathBuf::from(format!("sample_{:08}_mean.vvol", item.seed));
            write_labels(&model.predict(item), &out.join(&name)).runtime()?;
            items.push(prediction_item(item.seed, Some(name), None));
        }
        Manifest::new(&out, items, serde_json::json!({"method": "mean"})).save().runtime()?;
    }
    snapshot(&out, "baseline_mean", &run)?;
    println!("fitted the mean model on {} samples; wrote {}", training.len(), out.display());
    Ok(())
}

fn projection_baseline(a: crate::ProjectionArgs) -> Outcome<()> {
    let mut run: config::ProjectionRun = config::load(a.config.as_deref())?;
    set_path(&mut run.data, a.data);
    set_path(&mut run.out, a.out);
    set_path(&mut run.predict, a.predict);
    set(&mut run.seed, a.train.seed);
    apply_train_flags(&mut run.train, &a.train);
    run.train.validate().usage()?;
    run.model.validate().usage()?;
    let m = load_manifest(required(&run.data, "--train")?)?;
    let out = required(&run.out, "--out")?.to_path_buf();
    let test = run.predict.as_deref().map(load_manifest).transpose()?;
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display())).runtime()?;
    snapshot(&out, "baseline_proj25d", &run)?;

    let planes = [Plane::Coronal, Plane::Sagittal, Plane::Axial];
    let mut predictors = Vec::new();
    for plane in planes {
        let cfg = TrainConfig {
            seed: sub_seed(run.seed, plane.name()),
            ..run.train.clone()
        };
        let ck = out.join(format!("{}.ckpt", plane.name()));
        let log = out.join(format!("{}_log.csv", plane.name()));
        let trained = train_plane_model(plane, &m, &run.model, &cfg, &TrainOutputs { checkpoint: &ck, log: &log }).runtime()?;
        predictors.push(Predictor::new(&trained).runtime()?);
    }
    if let Some(test) = test {
        let mut items = Vec::with_capacity(test.items.len());
        for item in &test.items {
            let depth = depth_of(&test, item)?;
            let mut proj = Vec::with_capacity(3);
            for p in &mut predictors {
                proj.push(predict_projection(p, &depth).runtime()?);
            }
            let boxes = combine_projections(&proj[0], &proj[1], &proj[2]);
            let name = PathBuf::from(format!("sample_{:08}_boxes.json", item.seed));
            let mut text = serde_json::to_string_pretty(&boxes).expect("boxes serialize");
            text.push('\n');
            fs::write(out.join(&name), text).with_context(|| format!("cannot write {}", name.display())).runtime()?;
            items.push(prediction_item(item.seed, None, Some(name)));
        }
        Manifest::new(&out, items, serde_json::json!({"method": "proj25d"})).save().runtime()?;
    }
    println!("trained three plane models; wrote {}", out.display());
    Ok(())
}

fn eval(a: crate::EvalArgs) -> Outcome<()> {
    let mut run: config::EvalRun = config::load(a.config.as_deref())?;
    set_path(&mut run.pred, a.pred);
    set_path(&mut run.gt, a.gt);
    set_path(&mut run.out, a.out);
    if a.no_postprocess {
        run.eval.postprocess = false;
    }
    set(&mut run.eval.min_fraction, a.min_fraction);
    if let Some(g) = a.groups {
        let bytes = fs::read(&g).with_context(|| format!("cannot read groups {}", g.display())).usage()?;
        run.eval.groups = serde_json::from_slice(&bytes)
            .with_context(|| format!("groups file {} must map names to label lists", g.display()))
            .usage()?;
    }
    if !(0.0..=1.0).contains(&run.eval.min_fraction) {
        return Err(anyhow!("min_fraction must lie in [0, 1], got {}", run.eval.min_fraction)).usage();
    }
    let pred = load_manifest(required(&run.pred, "--pred")?)?;
    let gt = load_manifest(required(&run.gt, "--gt")?)?;
    let out = run.out.clone().unwrap_or_else(|| pred.dir().to_path_buf());
    let report = evaluate(&pred, &gt, &run.eval).usage()?;
    report.write(&out).runtime()?;
    snapshot(&out, "eval", &run)?;
    let a = &report.aggregates;
    println!(
        "{} samples, {} rows: mean Dice {}, mean DOE LR/AP/SI {} / {} / {} mm",
        a.n_samples,
        a.n_rows,
        fmt(a.dice.mean),
        fmt(a.per_axis.get("LR").and_then(|s| s.mean)),
        fmt(a.per_axis.get("AP").and_then(|s| s.mean)),
        fmt(a.per_axis.get("SI").and_then(|s| s.mean)),
    );
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}
