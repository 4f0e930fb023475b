//! Volume file formats.
//!
//! Two formats are supported:
//!
//! - a single-file NIfTI-1 subset (`.nii`): little-endian, 3D only, datatypes
//!   uint8 / int16 / float32, extensions skipped, orientation ignored;
//! - `rawjson`: a compact JSON header `{"dims":[..],"spacing_mm":[..],"dtype":".."}`
//!   terminated by `"\n\0"`, followed by the little-endian payload.
//!
//! Metrics only depend on the grid dims and spacing, so that is all the readers keep.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::volume::{GridGeometry, IntensityVolume, LabelVolume};
use crate::{Error, Result};

pub const NIFTI1_HEADER_SIZE: usize = 348;
pub const NIFTI1_MAGIC: &[u8; 4] = b"n+1\0";
/// Header plus the 4-byte extension flag.
const NIFTI1_VOX_OFFSET: usize = 352;
const RAWJSON_TERMINATOR: &[u8; 2] = b"\n\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeFormat {
    Nifti1,
    RawJson,
}

impl VolumeFormat {
    /// Picks the format from a file extension: `.nii` is NIfTI-1, anything else rawjson.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("nii") => VolumeFormat::Nifti1,
            _ => VolumeFormat::RawJson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Uint8,
    Int16,
    Float32,
}

impl Datatype {
    pub fn nifti_code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Float32 => 16,
        }
    }

    pub fn from_nifti_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(Datatype::Uint8),
            4 => Ok(Datatype::Int16),
            16 => Ok(Datatype::Float32),
            other => Err(Error::UnsupportedDatatype(i32::from(other))),
        }
    }

    pub fn byte_size(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Float32 => 4,
        }
    }

    fn decode(self, bytes: &[u8]) -> f64 {
        match self {
            Datatype::Uint8 => f64::from(bytes[0]),
            Datatype::Int16 => f64::from(i16::from_le_bytes([bytes[0], bytes[1]])),
            Datatype::Float32 => f64::from(f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])),
        }
    }

    fn encode(self, value: f64, out: &mut Vec<u8>) -> Result<()> {
        match self {
            Datatype::Uint8 => {
                if value.fract() != 0.0 || !(0.0..=255.0).contains(&value) {
                    return Err(Error::ValueNotRepresentable(value));
                }
                out.push(value as u8);
            }
            Datatype::Int16 => {
                if value.fract() != 0.0 || !(-32768.0..=32767.0).contains(&value) {
                    return Err(Error::ValueNotRepresentable(value));
                }
                out.extend_from_slice(&(value as i16).to_le_bytes());
            }
            Datatype::Float32 => {
                if !value.is_finite() {
                    return Err(Error::ValueNotRepresentable(value));
                }
                out.extend_from_slice(&(value as f32).to_le_bytes());
            }
        }
        Ok(())
    }
}

/// A parsed volume before it is interpreted as a mask or an intensity image.
#[derive(Debug, Clone, PartialEq)]
pub struct RawVolume {
    pub geometry: GridGeometry,
    /// Voxel values in file order, with NIfTI intensity scaling already applied.
    pub values: Vec<f64>,
    pub datatype: Datatype,
}

impl RawVolume {
    pub fn into_label(self) -> Result<LabelVolume> {
        LabelVolume::from_values(self.geometry, &self.values)
    }

    pub fn into_intensity(self) -> Result<IntensityVolume> {
        IntensityVolume::new(self.geometry, self.values)
    }
}

pub fn read_volume(bytes: &[u8], format: VolumeFormat) -> Result<RawVolume> {
    if bytes.is_empty() {
        return Err(Error::MalformedHeader("empty input".into()));
    }
    match format {
        VolumeFormat::Nifti1 => read_nifti1(bytes),
        VolumeFormat::RawJson => read_rawjson(bytes),
    }
}

pub fn write_volume(
    geometry: &GridGeometry,
    values: &[f64],
    datatype: Datatype,
    format: VolumeFormat,
) -> Result<Vec<u8>> {
    let expected = geometry.voxel_count();
    if values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: values.len(),
        });
    }
    let mut out = match format {
        VolumeFormat::Nifti1 => nifti1_header(geometry, datatype),
        VolumeFormat::RawJson => rawjson_header(geometry, datatype)?,
    };
    out.reserve(values.len() * datatype.byte_size());
    for &v in values {
        datatype.encode(v, &mut out)?;
    }
    Ok(out)
}

fn le_i16(bytes: &[u8], offset: usize) -> i16 {
    i16::from_le_bytes([bytes[offset], bytes[offset + 1]])
}

fn le_i32(bytes: &[u8], offset: usize) -> i32 {
    i32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn le_f32(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn read_nifti1(bytes: &[u8]) -> Result<RawVolume> {
    if bytes.len() < NIFTI1_HEADER_SIZE {
        return Err(Error::MalformedHeader(format!(
            "{} bytes, a NIfTI-1 header needs {NIFTI1_HEADER_SIZE}",
            bytes.len()
        )));
    }
    let sizeof_hdr = le_i32(bytes, 0);
    if sizeof_hdr != NIFTI1_HEADER_SIZE as i32 {
        return Err(Error::MalformedHeader(format!(
            "sizeof_hdr is {sizeof_hdr}, expected 348 (big-endian files are not supported)"
        )));
    }
    if &bytes[344..348] != NIFTI1_MAGIC {
        return Err(Error::MalformedHeader(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&bytes[344..348])
        )));
    }
    let ndim = le_i16(bytes, 40);
    if ndim != 3 {
        return Err(Error::MalformedHeader(format!(
            "only 3D volumes are supported, dim[0] = {ndim}"
        )));
    }
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let v = le_i16(bytes, 42 + 2 * axis);
        if v < 1 {
            return Err(Error::MalformedHeader(format!("dim[{}] = {v}", axis + 1)));
        }
        *d = v as usize;
    }
    let datatype = Datatype::from_nifti_code(le_i16(bytes, 70))?;
    let mut spacing = [0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        *s = f64::from(le_f32(bytes, 80 + 4 * axis));
    }
    let geometry = GridGeometry::new(dims, spacing).map_err(|e| Error::MalformedHeader(e.to_string()))?;

    let vox_offset = le_f32(bytes, 108);
    if !(vox_offset.is_finite() && vox_offset >= NIFTI1_HEADER_SIZE as f32) {
        return Err(Error::MalformedHeader(format!("vox_offset {vox_offset}")));
    }
    let offset = vox_offset as usize;
    let slope = f64::from(le_f32(bytes, 112));
    let inter = f64::from(le_f32(bytes, 116));

    let needed = geometry.voxel_count() * datatype.byte_size();
    let payload = bytes.get(offset..).unwrap_or(&[]);
    if payload.len() < needed {
        return Err(Error::TruncatedPayload {
            expected: needed,
            found: payload.len(),
        });
    }
    let mut values = decode_payload(&payload[..needed], datatype);
    if slope != 0.0 && slope.is_finite() && inter.is_finite() {
        for v in &mut values {
            *v = slope * *v + inter;
        }
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteVoxel(i));
    }
    Ok(RawVolume {
        geometry,
        values,
        datatype,
    })
}

fn decode_payload(payload: &[u8], datatype: Datatype) -> Vec<f64> {
    payload
        .chunks_exact(datatype.byte_size())
        .map(|c| datatype.decode(c))
        .collect()
}

fn nifti1_header(geometry: &GridGeometry, datatype: Datatype) -> Vec<u8> {
    let mut h = vec![0u8; NIFTI1_VOX_OFFSET];
    let put_i16 = |h: &mut Vec<u8>, off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut Vec<u8>, off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());

    h[0..4].copy_from_slice(&(NIFTI1_HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r'; // regular
    let dims = geometry.dims();
    put_i16(&mut h, 40, 3);
    for axis in 0..3 {
        put_i16(&mut h, 42 + 2 * axis, dims[axis] as i16);
    }
    for k in 4..8 {
        put_i16(&mut h, 40 + 2 * k, 1);
    }
    put_i16(&mut h, 70, datatype.nifti_code());
    put_i16(&mut h, 72, (datatype.byte_size() * 8) as i16);
    let spacing = geometry.spacing_mm();
    put_f32(&mut h, 76, 1.0);
    for axis in 0..3 {
        put_f32(&mut h, 80 + 4 * axis, spacing[axis] as f32);
    }
    put_f32(&mut h, 108, NIFTI1_VOX_OFFSET as f32);
    put_f32(&mut h, 112, 0.0);
    put_f32(&mut h, 116, 0.0);
    h[123] = 10; // xyzt_units: mm + sec
    h[344..348].copy_from_slice(NIFTI1_MAGIC);
    h
}

#[derive(Serialize, Deserialize)]
struct RawJsonHeader {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
    dtype: Datatype,
}

fn rawjson_header(geometry: &GridGeometry, datatype: Datatype) -> Result<Vec<u8>> {
    let header = RawJsonHeader {
        dims: geometry.dims(),
        spacing_mm: geometry.spacing_mm(),
        dtype: datatype,
    };
    let mut out = serde_json::to_vec(&header)?;
    out.extend_from_slice(RAWJSON_TERMINATOR);
    Ok(out)
}

fn read_rawjson(bytes: &[u8]) -> Result<RawVolume> {
    let split = bytes
        .windows(2)
        .position(|w| w == RAWJSON_TERMINATOR)
        .ok_or_else(|| Error::MalformedHeader("rawjson header terminator not found".into()))?;
    let header: RawJsonHeader =
        serde_json::from_slice(&bytes[..split]).map_err(|e| Error::MalformedHeader(format!("rawjson header: {e}")))?;
    let geometry =
        GridGeometry::new(header.dims, header.spacing_mm).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let payload = &bytes[split + RAWJSON_TERMINATOR.len()..];
    let needed = geometry.voxel_count() * header.dtype.byte_size();
    if payload.len() < needed {
        return Err(Error::TruncatedPayload {
            expected: needed,
            found: payload.len(),
        });
    }
    let values = decode_payload(&payload[..needed], header.dtype);
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteVoxel(i));
    }
    Ok(RawVolume {
        geometry,
        values,
        datatype: header.dtype,
    })
}

pub fn read_file(path: &Path) -> Result<RawVolume> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_volume(&bytes, VolumeFormat::from_path(path))
}

pub fn read_label_file(path: &Path) -> Result<LabelVolume> {
    read_file(path)?.into_label()
}

pub fn read_intensity_file(path: &Path) -> Result<IntensityVolume> {
    read_file(path)?.into_intensity()
}

pub fn write_label_file(path: &Path, mask: &LabelVolume) -> Result<()> {
    let bytes = write_volume(
        mask.geometry(),
        &mask.to_values(),
        Datatype::Uint8,
        VolumeFormat::from_path(path),
    )?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_intensity_file(path: &Path, volume: &IntensityVolume) -> Result<()> {
    let bytes = write_volume(
        volume.geometry(),
        volume.voxels(),
        Datatype::Float32,
        VolumeFormat::from_path(path),
    )?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
