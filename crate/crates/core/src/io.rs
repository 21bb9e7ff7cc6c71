//! The VVOL container.
//!
//! One UTF-8 JSON header line terminated by `\n`:
//!
//! ```text
//! {"magic":"VVOL1","kind":"binary_mask","shape":[64,32,64],"spacing_mm":[..],
//!  "origin_mm":[..],"dtype":"u8","channels":["spleen",...]}
//! ```
//!
//! followed by the raw little-endian payload, LR fastest, channels outermost.
//! Intensities are written as `f32`, masks as `u8` in `{0, 1}`. Depth images
//! use shape `[n_lr, n_si, 1]` with kind `intensity`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::{DepthImage, Error, Geometry, LabelVolume, Result, VolumeKind, VoxelVolume};

pub const MAGIC: &str = "VVOL1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
        }
    }
}

/// Decoded contents of any VVOL file. `data` holds every channel back to
/// back; a file without a `channels` field has exactly one.
#[derive(Clone, Debug, PartialEq)]
pub struct Vvol {
    pub kind: VolumeKind,
    pub geometry: Geometry,
    pub channels: Option<Vec<String>>,
    pub data: Vec<f32>,
}

#[derive(Serialize)]
struct HeaderOut<'a> {
    magic: &'a str,
    kind: VolumeKind,
    shape: [usize; 3],
    spacing_mm: [f64; 3],
    origin_mm: [f64; 3],
    dtype: Dtype,
    #[serde(skip_serializing_if = "Option::is_none")]
    channels: Option<&'a [String]>,
}

impl Vvol {
    fn n_channels(&self) -> usize {
        self.channels.as_ref().map_or(1, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let expected = self.n_channels() * self.geometry.len();
        if self.data.len() != expected {
            return Err(Error::Invariant(format!(
                "payload has {} values, header implies {expected}",
                self.data.len()
            )));
        }
        if self.kind == VolumeKind::BinaryMask {
            if let Some(v) = self.data.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::Invariant(format!(
                    "binary mask contains {v}, expected 0 or 1"
                )));
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let dtype = match self.kind {
            VolumeKind::Intensity => Dtype::F32,
            VolumeKind::BinaryMask => Dtype::U8,
        };
        let header = HeaderOut {
            magic: MAGIC,
            kind: self.kind,
            shape: self.geometry.shape(),
            spacing_mm: self.geometry.spacing_mm(),
            origin_mm: self.geometry.origin_mm(),
            dtype,
            channels: self.channels.as_deref(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.reserve(self.data.len() * dtype.width());
        match dtype {
            Dtype::F32 => {
                for v in &self.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Dtype::U8 => out.extend(self.data.iter().map(|&v| v as u8)),
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("header", "no terminating newline"))?;
        let header: Value = serde_json::from_slice(&bytes[..newline])
            .map_err(|e| Error::format("header", format!("invalid JSON: {e}")))?;
        let obj = header
            .as_object()
            .ok_or_else(|| Error::format("header", "not a JSON object"))?;
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| Error::format(name, "missing"))
        };

        if field("magic")?.as_str() != Some(MAGIC) {
            return Err(Error::format("magic", format!("expected \"{MAGIC}\"")));
        }
        let kind = match field("kind")?.as_str() {
            Some("intensity") => VolumeKind::Intensity,
            Some("binary_mask") => VolumeKind::BinaryMask,
            _ => return Err(Error::format("kind", "expected \"intensity\" or \"binary_mask\"")),
        };
        let shape = triple(field("shape")?, "shape", |v| {
            v.as_u64().filter(|&n| n >= 1).map(|n| n as usize)
        })?;
        let spacing = triple(field("spacing_mm")?, "spacing_mm", |v| {
            v.as_f64().filter(|&s| s > 0.0)
        })?;
        let origin = triple(field("origin_mm")?, "origin_mm", Value::as_f64)?;
        let dtype = match field("dtype")?.as_str() {
            Some("f32") => Dtype::F32,
            Some("u8") => Dtype::U8,
            _ => return Err(Error::format("dtype", "expected \"f32\" or \"u8\"")),
        };
        let channels = match obj.get("channels") {
            None | Some(Value::Null) => None,
            Some(Value::Array(items)) => Some(
                items
                    .iter()
                    .map(|v| v.as_str().map(str::to_string))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::format("channels", "expected an array of strings"))?,
            ),
            Some(_) => return Err(Error::format("channels", "expected an array of strings")),
        };
        let geometry = Geometry::new(shape, spacing, origin)
            .map_err(|e| Error::format("shape", e.to_string()))?;

        let n_channels = channels.as_ref().map_or(1, Vec::len);
        let count = n_channels * geometry.len();
        let payload = &bytes[newline + 1..];
        let expected = count * dtype.width();
        if payload.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: payload.len(),
            });
        }
        let data: Vec<f32> = match dtype {
            Dtype::F32 => payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
            Dtype::U8 => payload.iter().map(|&b| b as f32).collect(),
        };
        let vvol = Vvol {
            kind,
            geometry,
            channels,
            data,
        };
        vvol.validate()?;
        Ok(vvol)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))
    }
}

fn triple<T>(value: &Value, name: &str, get: impl Fn(&Value) -> Option<T>) -> Result<[T; 3]> {
    let items = value
        .as_array()
        .filter(|a| a.len() == 3)
        .ok_or_else(|| Error::format(name, "expected an array of 3 values"))?;
    let parsed: Vec<T> = items
        .iter()
        .map(&get)
        .collect::<Option<_>>()
        .ok_or_else(|| Error::format(name, "invalid element"))?;
    parsed
        .try_into()
        .map_err(|_| Error::format(name, "expected 3 values"))
}

pub fn write_volume(vol: &VoxelVolume, path: &Path) -> Result<()> {
    Vvol {
        kind: vol.kind(),
        geometry: *vol.geometry(),
        channels: None,
        data: vol.data().to_vec(),
    }
    .write(path)
}

pub fn read_volume(path: &Path) -> Result<VoxelVolume> {
    let vvol = Vvol::read(path)?;
    if vvol.channels.is_some() {
        return Err(Error::format("channels", "expected a single-channel volume"));
    }
    VoxelVolume::new(vvol.geometry, vvol.data, vvol.kind)
}

pub fn write_labels(labels: &LabelVolume, path: &Path) -> Result<()> {
    let mut data = Vec::with_capacity(labels.len() * labels.geometry().len());
    for (_, mask) in labels.channels() {
        data.extend_from_slice(mask.data());
    }
    Vvol {
        kind: VolumeKind::BinaryMask,
        geometry: *labels.geometry(),
        channels: Some(labels.names().map(str::to_string).collect()),
        data,
    }
    .write(path)
}

pub fn read_labels(path: &Path) -> Result<LabelVolume> {
    let vvol = Vvol::read(path)?;
    if vvol.kind != VolumeKind::BinaryMask {
        return Err(Error::format("kind", "label volumes must be binary_mask"));
    }
    let names = vvol
        .channels
        .ok_or_else(|| Error::format("channels", "missing for a label volume"))?;
    let n = vvol.geometry.len();
    let channels = names
        .into_iter()
        .zip(vvol.data.chunks_exact(n.max(1)))
        .map(|(name, chunk)| {
            Ok((
                name,
                VoxelVolume::new(vvol.geometry, chunk.to_vec(), VolumeKind::BinaryMask)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    LabelVolume::new(vvol.geometry, channels)
}

pub fn write_depth(img: &DepthImage, path: &Path) -> Result<()> {
    let [nx, nz] = img.shape();
    let [sx, sz] = img.pixel_spacing_mm();
    Vvol {
        kind: VolumeKind::Intensity,
        geometry: Geometry::new([nx, nz, 1], [sx, sz, 1.0], [0.0; 3])?,
        channels: None,
        data: img.data().to_vec(),
    }
    .write(path)
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    let vvol = Vvol::read(path)?;
    let [nx, nz, one] = vvol.geometry.shape();
    if one != 1 {
        return Err(Error::format("shape", "depth images need a third dimension of 1"));
    }
    if vvol.kind != VolumeKind::Intensity || vvol.channels.is_some() {
        return Err(Error::format("kind", "depth images are single-channel intensity"));
    }
    let [sx, sz, _] = vvol.geometry.spacing_mm();
    DepthImage::new([nx, nz], [sx, sz], vvol.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_volume() -> VoxelVolume {
        let g = Geometry::new([2, 3, 4], [1.5, 1.5, 3.0], [-1.0, 2.0, 0.25]).unwrap();
        let data = (0..24).map(|i| (i as f32 * 0.37).sin()).collect();
        VoxelVolume::new(g, data, VolumeKind::Intensity).unwrap()
    }

    #[test]
    fn volume_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vvol");
        let v = sample_volume();
        write_volume(&v, &path).unwrap();
        let back = read_volume(&path).unwrap();
        assert_eq!(back.geometry().spacing_mm(), [1.5, 1.5, 3.0]);
        let bits = |v: &VoxelVolume| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&v));
        assert_eq!(back, v);
    }

    #[test]
    fn label_round_trip_keeps_channel_order() {
        let g = Geometry::unit([2, 2, 2]).unwrap();
        let a = VoxelVolume::from_mask(g, &[true, false, false, true, false, false, false, true]).unwrap();
        let b = VoxelVolume::zeros(g, VolumeKind::BinaryMask);
        let labels = LabelVolume::new(g, vec![("liver".into(), a), ("spleen".into(), b)]).unwrap();
        let bytes = {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("l.vvol");
            write_labels(&labels, &p).unwrap();
            let back = read_labels(&p).unwrap();
            assert_eq!(back, labels);
            fs::read(&p).unwrap()
        };
        let header = std::str::from_utf8(&bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()]).unwrap();
        assert!(header.contains(r#""channels":["liver","spleen"]"#));
        assert!(header.contains(r#""dtype":"u8""#));
    }

    #[test]
    fn depth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.vvol");
        let img = DepthImage::new([2, 2], [2.0, 4.0], vec![0.0, 0.25, 1.0, 0.5]).unwrap();
        write_depth(&img, &p).unwrap();
        assert_eq!(read_depth(&p).unwrap(), img);
    }

    #[test]
    fn truncated_payload() {
        let g = Geometry::unit([2, 2, 2]).unwrap();
        let v = VoxelVolume::zeros(g, VolumeKind::Intensity);
        let vvol = Vvol { kind: v.kind(), geometry: g, channels: None, data: v.data().to_vec() };
        let mut bytes = vvol.encode().unwrap();
        bytes.truncate(bytes.len() - 4);
        match Vvol::decode(&bytes) {
            Err(Error::Truncated { expected: 32, found: 28 }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_names_field() {
        let cases = [
            (r#"{"magic":"VVOL2","kind":"intensity","shape":[1,1,1],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f32"}"#, "magic"),
            (r#"{"magic":"VVOL1","kind":"intensity","shape":[1,1],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f32"}"#, "shape"),
            (r#"{"magic":"VVOL1","kind":"intensity","shape":[1,1,1],"spacing_mm":[1,-1,1],"origin_mm":[0,0,0],"dtype":"f32"}"#, "spacing_mm"),
            (r#"{"magic":"VVOL1","kind":"intensity","shape":[1,1,1],"spacing_mm":[1,1,1],"dtype":"f32"}"#, "origin_mm"),
            (r#"{"magic":"VVOL1","kind":"intensity","shape":[1,1,1],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f64"}"#, "dtype"),
            (r#"{"magic":"VVOL1","kind":"volume","shape":[1,1,1],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f32"}"#, "kind"),
            (r#"{"magic":"VVOL1","kind":"intensity","shape":[0,1,1],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f32"}"#, "shape"),
        ];
        for (header, field) in cases {
            let mut bytes = header.as_bytes().to_vec();
            bytes.push(b'\n');
            bytes.extend_from_slice(&[0; 4]);
            match Vvol::decode(&bytes) {
                Err(Error::Format { field: f, .. }) => assert_eq!(f, field, "{header}"),
                other => panic!("expected format error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn seven_values_for_eight_voxels() {
        let header = r#"{"magic":"VVOL1","kind":"intensity","shape":[2,2,2],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f32"}"#;
        let mut bytes = header.as_bytes().to_vec();
        bytes.push(b'\n');
        bytes.extend_from_slice(&[0; 28]);
        assert!(matches!(Vvol::decode(&bytes), Err(Error::Truncated { .. })));
    }

    #[test]
    fn write_rejects_invalid_masks() {
        let g = Geometry::unit([2, 1, 1]).unwrap();
        let bad = Vvol { kind: VolumeKind::BinaryMask, geometry: g, channels: None, data: vec![0.0, 0.5] };
        assert!(matches!(bad.encode(), Err(Error::Invariant(_))));
        assert!(VoxelVolume::new(g, vec![0.5, 1.0], VolumeKind::BinaryMask).is_err());
    }

    #[test]
    fn io_errors_carry_path() {
        let err = read_volume(Path::new("/definitely/not/here.vvol")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.vvol"));
    }

    proptest! {
        #[test]
        fn encode_decode_is_bitwise_identity(
            shape in prop::array::uniform3(1usize..5),
            spacing in prop::array::uniform3(0.1f64..10.0),
            origin in prop::array::uniform3(-500.0f64..500.0),
            seed in any::<u64>(),
            mask in any::<bool>(),
        ) {
            let g = Geometry::new(shape, spacing, origin).unwrap();
            let mut state = seed;
            let data: Vec<f32> = (0..g.len()).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if mask { (state >> 63) as f32 } else { f32::from_bits((state >> 32) as u32 & 0x7f7f_ffff) }
            }).collect();
            let kind = if mask { VolumeKind::BinaryMask } else { VolumeKind::Intensity };
            let vvol = Vvol { kind, geometry: g, channels: None, data };
            let back = Vvol::decode(&vvol.encode().unwrap()).unwrap();
            prop_assert_eq!(back.geometry, vvol.geometry);
            let bits = |d: &[f32]| d.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.data), bits(&vvol.data));
        }
    }
}
