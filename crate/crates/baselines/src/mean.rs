use std::fs;
use std::path::{Path, PathBuf};

use depthscout_core::io::{read_labels, write_labels, Vvol};
use depthscout_core::{Error, Geometry, LabelVolume, Result, VolumeKind, VoxelVolume};

pub const FREQUENCY_FILE: &str = "frequency.vvol";
pub const MASKS_FILE: &str = "masks.vvol";

/// Voxel-wise label frequency over a training set, thresholded per label at
/// half its maximum (strictly greater).
#[derive(Clone, Debug, PartialEq)]
pub struct MeanModel {
    geometry: Geometry,
    /// `(label, frequency)` with values in `[0, 1]`.
    frequencies: Vec<(String, Vec<f32>)>,
    masks: LabelVolume,
}

fn threshold(freq: &[f32]) -> Vec<bool> {
    let max = freq.iter().copied().fold(0.0f32, f32::max);
    freq.iter().map(|&f| max > 0.0 && f > 0.5 * max).collect()
}

impl MeanModel {
    /// Labels are taken in first-appearance order; a label missing from a
    /// sample counts as empty there.
    pub fn fit(training: &[LabelVolume]) -> Result<Self> {
        let first = training
            .first()
            .ok_or_else(|| Error::Param("mean model needs at least one training volume".into()))?;
        let geometry = *first.geometry();
        let mut names: Vec<String> = Vec::new();
        for (i, lv) in training.iter().enumerate() {
            if lv.geometry() != &geometry {
                return Err(Error::GeometryMismatch(format!(
                    "training volume {i} has geometry {:?}, expected {:?}",
                    lv.geometry(),
                    geometry
                )));
            }
            for n in lv.names() {
                if !names.iter().any(|m| m == n) {
                    names.push(n.to_string());
                }
            }
        }
        let n = training.len() as f64;
        let mut frequencies = Vec::with_capacity(names.len());
        for name in names {
            let mut counts = vec![0u32; geometry.len()];
            for lv in training {
                if let Some(m) = lv.get(&name) {
                    for (c, &v) in counts.iter_mut().zip(m.data()) {
                        *c += (v != 0.0) as u32;
                    }
                }
            }
            frequencies.push((name, counts.iter().map(|&c| (c as f64 / n) as f32).collect()));
        }
        Self::from_frequencies(geometry, frequencies)
    }

    fn from_frequencies(geometry: Geometry, frequencies: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let channels = frequencies
            .iter()
            .map(|(name, f)| Ok((name.clone(), VoxelVolume::from_mask(geometry, &threshold(f))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geometry,
            masks: LabelVolume::new(geometry, channels)?,
            frequencies,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn frequency(&self, label: &str) -> Option<&[f32]> {
        self.frequencies.iter().find(|(n, _)| n == label).map(|(_, f)| f.as_slice())
    }

    /// The same masks for every patient; the input is ignored.
    pub fn predict<T: ?Sized>(&self, _input: &T) -> LabelVolume {
        self.masks.clone()
    }

    pub fn masks(&self) -> &LabelVolume {
        &self.masks
    }

    /// Writes `frequency.vvol` (intensity channels) and `masks.vvol` into
    /// `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
        let freq = dir.join(FREQUENCY_FILE);
        Vvol {
            kind: VolumeKind::Intensity,
            geometry: self.geometry,
            channels: Some(self.frequencies.iter().map(|(n, _)| n.clone()).collect()),
            data: self.frequencies.iter().flat_map(|(_, f)| f.iter().copied()).collect(),
        }
        .write(&freq)?;
        let masks = dir.join(MASKS_FILE);
        write_labels(&self.masks, &masks)?;
        Ok(vec![freq, masks])
    }

    /// Reads the frequencies and checks that the stored masks agree with
    /// them.
    pub fn load(dir: &Path) -> Result<Self> {
        let v = Vvol::read(&dir.join(FREQUENCY_FILE))?;
        let names = v.channels.ok_or_else(|| Error::Param("frequency file has no channel names".into()))?;
        let n = v.geometry.len();
        if let Some(bad) = v.data.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(Error::Invariant(format!("frequency {bad} outside [0, 1]")));
        }
        let frequencies = names.into_iter().zip(v.data.chunks_exact(n).map(<[f32]>::to_vec)).collect();
        let model = Self::from_frequencies(v.geometry, frequencies)?;
        if read_labels(&dir.join(MASKS_FILE))? != model.masks {
            return Err(Error::Invariant("stored masks disagree with the stored frequencies".into()));
        }
        Ok(model)
    }
}
