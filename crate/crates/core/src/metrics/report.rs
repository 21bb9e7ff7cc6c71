//! Evaluation over datasets: per-sample rows plus aggregate statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{assd, dice, doe, mask_to_bbox, postprocess_prediction};
use crate::io::read_labels;
use crate::manifest::Manifest;
use crate::{BoundingBox3D, Error, Face, LabelRegistry, LabelVolume, Result, VolumeKind, VoxelVolume};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Remove small isolated components from volumetric predictions first.
    pub postprocess: bool,
    pub min_fraction: f64,
    /// Optional reporting groups, e.g. `{"kidneys": ["kidney left", "kidney right"]}`.
    pub groups: BTreeMap<String, Vec<String>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            postprocess: true,
            min_fraction: 0.1,
            groups: BTreeMap::new(),
        }
    }
}

/// What a method produced for one sample.
#[derive(Clone, Debug)]
pub enum Prediction {
    Volume(LabelVolume),
    Boxes(Vec<(String, BoundingBox3D)>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub sample_id: String,
    pub label: String,
    pub doe: Option<[f64; 6]>,
    pub dice: Option<f64>,
    pub assd_mm: Option<f64>,
    pub missing_prediction: bool,
    pub missing_ground_truth: bool,
}

impl EvalRow {
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        if self.missing_prediction {
            flags.push("missing_prediction");
        }
        if self.missing_ground_truth {
            flags.push("missing_ground_truth");
        }
        if self.assd_mm.is_none() && self.dice.is_some() {
            flags.push("assd_undefined");
        }
        flags.join("|")
    }
}

/// Mean and population standard deviation over the defined values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let values: Vec<f64> = values.into_iter().collect();
        let n = values.len();
        if n == 0 {
            return Self { mean: None, std: None, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        Self { mean: Some(mean), std: Some(var.sqrt()), n }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AxisGroup {
    LR,
    AP,
    SI,
}

impl AxisGroup {
    pub const ALL: [AxisGroup; 3] = [AxisGroup::LR, AxisGroup::AP, AxisGroup::SI];

    fn faces(self) -> [usize; 2] {
        match self {
            AxisGroup::LR => [0, 1],
            AxisGroup::AP => [2, 3],
            AxisGroup::SI => [4, 5],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AxisGroup::LR => "LR",
            AxisGroup::AP => "AP",
            AxisGroup::SI => "SI",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricStats {
    pub doe: BTreeMap<&'static str, Stat>,
    pub dice: Stat,
    pub assd_mm: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelStats {
    pub label: String,
    #[serde(flatten)]
    pub stats: MetricStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Aggregates {
    pub n_samples: usize,
    pub n_rows: usize,
    pub missing_prediction: usize,
    pub missing_ground_truth: usize,
    pub per_label: Vec<LabelStats>,
    pub per_face: BTreeMap<&'static str, Stat>,
    pub per_axis: BTreeMap<&'static str, Stat>,
    pub dice: Stat,
    pub assd_mm: Stat,
    pub groups: BTreeMap<String, MetricStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub aggregates: Aggregates,
}

fn metric_stats<'a>(rows: impl Iterator<Item = &'a EvalRow> + Clone) -> MetricStats {
    MetricStats {
        doe: Face::ALL
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name(), Stat::of(rows.clone().filter_map(|r| r.doe.map(|d| d[i])))))
            .collect(),
        dice: Stat::of(rows.clone().filter_map(|r| r.dice)),
        assd_mm: Stat::of(rows.filter_map(|r| r.assd_mm)),
    }
}

impl EvalReport {
    /// Builds aggregates from rows; rows are sorted by sample then label.
    pub fn from_rows(mut rows: Vec<EvalRow>, groups: &BTreeMap<String, Vec<String>>) -> Self {
        let registry = LabelRegistry::new();
        let label_key = |l: &str| registry.index_of(l).unwrap_or(usize::MAX);
        let sample_key = |s: &str| (s.parse::<u64>().ok(), s.to_string());
        rows.sort_by(|a, b| {
            (sample_key(&a.sample_id), label_key(&a.label), &a.label)
                .cmp(&(sample_key(&b.sample_id), label_key(&b.label), &b.label))
        });

        let mut labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        labels.sort_by_key(|l| (label_key(l), l.to_string()));
        labels.dedup();
        let mut samples: Vec<&str> = rows.iter().map(|r| r.sample_id.as_str()).collect();
        samples.dedup();

        let per_label = labels
            .iter()
            .map(|&l| LabelStats {
                label: l.to_string(),
                stats: metric_stats(rows.iter().filter(|r| r.label == l)),
            })
            .collect();
        let all = metric_stats(rows.iter());
        let per_axis = AxisGroup::ALL
            .iter()
            .map(|g| {
                let [a, b] = g.faces();
                let vals = rows.iter().filter_map(|r| r.doe).flat_map(|d| [d[a], d[b]]);
                (g.name(), Stat::of(vals))
            })
            .collect();
        let groups = groups
            .iter()
            .map(|(name, members)| {
                (name.clone(), metric_stats(rows.iter().filter(|r| members.contains(&r.label))))
            })
            .collect();
        let aggregates = Aggregates {
            n_samples: samples.len(),
            n_rows: rows.len(),
            missing_prediction: rows.iter().filter(|r| r.missing_prediction).count(),
            missing_ground_truth: rows.iter().filter(|r| r.missing_ground_truth).count(),
            per_label,
            per_face: all.doe,
            per_axis,
            dice: all.dice,
            assd_mm: all.assd_mm,
            groups,
        };
        Self { rows, aggregates }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "sample_id,label,doe_left,doe_right,doe_anterior,doe_posterior,doe_inferior,doe_superior,dice,assd_mm,flags\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = write!(out, "{},\"{}\"", r.sample_id, r.label);
            for i in 0..6 {
                let _ = write!(out, ",{}", opt(r.doe.map(|d| d[i])));
            }
            let _ = writeln!(out, ",{},{},{}", opt(r.dice), opt(r.assd_mm), r.flags());
        }
        out
    }

    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.aggregates).expect("aggregates serialize");
        s.push('\n');
        s
    }

    /// Writes `per_sample.csv` and `aggregate.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [("per_sample.csv", self.csv()), ("aggregate.json", self.json())] {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn rows_for_sample(id: &str, pred: &Prediction, gt: &LabelVolume, cfg: &EvalConfig) -> Result<Vec<EvalRow>> {
    let pred = match pred {
        Prediction::Volume(v) if cfg.postprocess => {
            Prediction::Volume(postprocess_prediction(v, cfg.min_fraction)?)
        }
        other => other.clone(),
    };
    let empty = VoxelVolume::zeros(*gt.geometry(), VolumeKind::BinaryMask);
    let mut rows = Vec::with_capacity(gt.len());
    for (label, gt_mask) in gt.channels() {
        let gt_box = mask_to_bbox(gt_mask)?;
        let row = match &pred {
            Prediction::Volume(p) => {
                let pm = p.get(label).unwrap_or(&empty);
                if pm.geometry() != gt_mask.geometry() {
                    return Err(Error::GeometryMismatch(format!(
                        "sample {id}: prediction for `{label}` has a different geometry"
                    )));
                }
                let pred_box = mask_to_bbox(pm)?;
                EvalRow {
                    sample_id: id.to_string(),
                    label: label.clone(),
                    doe: doe(&pred_box, &gt_box),
                    dice: Some(dice(pm, gt_mask)?),
                    assd_mm: assd(pm, gt_mask)?,
                    missing_prediction: pred_box.empty,
                    missing_ground_truth: gt_box.empty,
                }
            }
            Prediction::Boxes(boxes) => {
                let pred_box = boxes
                    .iter()
                    .find(|(n, _)| n == label)
                    .map(|(_, b)| *b)
                    .unwrap_or_else(BoundingBox3D::empty);
                EvalRow {
                    sample_id: id.to_string(),
                    label: label.clone(),
                    doe: doe(&pred_box, &gt_box),
                    dice: None,
                    assd_mm: None,
                    missing_prediction: pred_box.empty,
                    missing_ground_truth: gt_box.empty,
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Evaluates in-memory `(sample id, prediction, ground truth)` triples.
pub fn evaluate_samples(samples: &[(String, Prediction, LabelVolume)], cfg: &EvalConfig) -> Result<EvalReport> {
    let mut rows = Vec::new();
    for (id, pred, gt) in samples {
        rows.extend(rows_for_sample(id, pred, gt, cfg)?);
    }
    Ok(EvalReport::from_rows(rows, &cfg.groups))
}

fn load_boxes(path: &Path) -> Result<Vec<(String, BoundingBox3D)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Matches prediction and ground-truth manifests by sample id and evaluates
/// every ground-truth label.
pub fn evaluate(pred: &Manifest, gt: &Manifest, cfg: &EvalConfig) -> Result<EvalReport> {
    let mut missing: Vec<String> = gt
        .items
        .iter()
        .filter(|g| !pred.items.iter().any(|p| p.seed == g.seed))
        .map(|g| format!("{} (no prediction)", g.id()))
        .collect();
    missing.extend(
        pred.items
            .iter()
            .filter(|p| !gt.items.iter().any(|g| g.seed == p.seed))
            .map(|p| format!("{} (no ground truth)", p.id())),
    );
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    let mut rows = Vec::new();
    for g in &gt.items {
        let p = pred.items.iter().find(|p| p.seed == g.seed).expect("matched above");
        let gt_path = g
            .labels
            .as_ref()
            .ok_or_else(|| Error::Param(format!("ground truth {} has no labels", g.id())))?;
        let truth = read_labels(&gt.resolve(gt_path))?;
        let prediction = match (&p.labels, &p.boxes) {
            (Some(l), _) => Prediction::Volume(read_labels(&pred.resolve(l))?),
            (None, Some(b)) => Prediction::Boxes(load_boxes(&pred.resolve(b))?),
            (None, None) => {
                return Err(Error::Param(format!("prediction {} has neither labels nor boxes", p.id())))
            }
        };
        rows.extend(rows_for_sample(&g.id(), &prediction, &truth, cfg)?);
    }
    Ok(EvalReport::from_rows(rows, &cfg.groups))
}
