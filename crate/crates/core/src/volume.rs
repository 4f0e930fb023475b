//! Voxel grids, binary masks and intensity volumes.
//!
//! All volumes are stored densely in x-fastest linear order:
//! `index = x + nx * (y + ny * z)`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Foreground threshold applied when binarizing label inputs.
pub const FOREGROUND_THRESHOLD: f64 = 0.5;

/// Shape and voxel spacing of a 3D grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    dims: [usize; 3],
    spacing_mm: [f64; 3],
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGeometry(format!(
                "all dimensions must be >= 1, got {dims:?}"
            )));
        }
        if spacing_mm.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "all spacings must be finite and > 0, got {spacing_mm:?}"
            )));
        }
        if dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).is_none() {
            return Err(Error::InvalidGeometry("voxel count overflows".into()));
        }
        Ok(Self { dims, spacing_mm })
    }

    /// Unit-spaced grid, handy for index-space work.
    pub fn isotropic(dims: [usize; 3]) -> Result<Self> {
        Self::new(dims, [1.0; 3])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing_mm(&self) -> [f64; 3] {
        self.spacing_mm
    }

    pub fn voxel_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Volume of one voxel in millilitres (mm³ / 1000).
    pub fn voxel_volume_ml(&self) -> f64 {
        self.spacing_mm[0] * self.spacing_mm[1] * self.spacing_mm[2] / 1000.0
    }

    #[inline]
    pub fn linear_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// True when both grids have identical dims and spacing.
    pub fn same_grid(&self, other: &GridGeometry) -> bool {
        self == other
    }

    pub(crate) fn ensure_same(&self, other: &GridGeometry) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.dims, self.spacing_mm, other.dims, other.spacing_mm
            )))
        }
    }
}

/// Binary voxel mask (reference or prediction).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    geometry: GridGeometry,
    voxels: Vec<u8>,
}

impl LabelVolume {
    pub fn empty(geometry: GridGeometry) -> Self {
        Self {
            geometry,
            voxels: vec![0; geometry.voxel_count()],
        }
    }

    /// Builds a mask from 0/1 bytes. Any non-zero byte is foreground.
    pub fn from_bits(geometry: GridGeometry, voxels: Vec<u8>) -> Result<Self> {
        check_len(&geometry, voxels.len())?;
        let voxels = voxels.into_iter().map(|v| u8::from(v != 0)).collect();
        Ok(Self { geometry, voxels })
    }

    /// Binarizes arbitrary values: a voxel is foreground when its value exceeds 0.5.
    pub fn from_values(geometry: GridGeometry, values: &[f64]) -> Result<Self> {
        check_len(&geometry, values.len())?;
        let voxels = values.iter().map(|&v| u8::from(v > FOREGROUND_THRESHOLD)).collect();
        Ok(Self { geometry, voxels })
    }

    pub fn from_indices(geometry: GridGeometry, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = Self::empty(geometry);
        let n = mask.voxels.len();
        for i in indices {
            if i >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: i + 1,
                });
            }
            mask.voxels[i] = 1;
        }
        Ok(mask)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    #[inline]
    pub fn is_set(&self, index: usize) -> bool {
        self.voxels[index] != 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.voxels[self.geometry.linear_index(x, y, z)] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.geometry.linear_index(x, y, z);
        self.voxels[i] = u8::from(value);
    }

    pub fn set_index(&mut self, index: usize, value: bool) {
        self.voxels[index] = u8::from(value);
    }

    pub fn foreground_count(&self) -> usize {
        self.voxels.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.iter().all(|&v| v == 0)
    }

    /// Foreground volume in millilitres.
    pub fn volume_ml(&self) -> f64 {
        self.foreground_count() as f64 * self.geometry.voxel_volume_ml()
    }

    /// Voxel count of `self ∩ other`.
    pub fn intersection_count(&self, other: &LabelVolume) -> Result<usize> {
        self.geometry.ensure_same(&other.geometry)?;
        Ok(self
            .voxels
            .iter()
            .zip(&other.voxels)
            .filter(|(&a, &b)| a != 0 && b != 0)
            .count())
    }

    pub fn foreground_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.voxels.iter().enumerate().filter(|(_, &v)| v != 0).map(|(i, _)| i)
    }

    /// Mask values as `f64` (0.0 / 1.0), the form written to disk.
    pub fn to_values(&self) -> Vec<f64> {
        self.voxels.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Dense real-valued volume (SUV or raw activity concentration).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityVolume {
    geometry: GridGeometry,
    voxels: Vec<f64>,
}

impl IntensityVolume {
    pub fn new(geometry: GridGeometry, voxels: Vec<f64>) -> Result<Self> {
        check_len(&geometry, voxels.len())?;
        if let Some(i) = voxels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteVoxel(i));
        }
        Ok(Self { geometry, voxels })
    }

    pub fn filled(geometry: GridGeometry, value: f64) -> Result<Self> {
        Self::new(geometry, vec![value; geometry.voxel_count()])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn voxels(&self) -> &[f64] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<f64> {
        self.voxels
    }
}

/// Injected activity (decay corrected) and body weight used for SUV normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuvParams {
    pub injected_activity_mbq: f64,
    pub body_weight_g: f64,
}

impl SuvParams {
    pub fn new(injected_activity_mbq: f64, body_weight_g: f64) -> Result<Self> {
        let params = Self {
            injected_activity_mbq,
            body_weight_g,
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.injected_activity_mbq) && ok(self.body_weight_g) {
            Ok(())
        } else {
            Err(Error::NonPositiveParams)
        }
    }
}

/// Converts activity concentration (MBq/mL) to SUV: `c / (A_inj / W)`.
pub fn to_suv(raw: &IntensityVolume, params: &SuvParams) -> Result<IntensityVolume> {
    params.validate()?;
    if let Some(i) = raw.voxels.iter().position(|&c| c < 0.0) {
        return Err(Error::NegativeActivity(i));
    }
    let dose_per_gram = params.injected_activity_mbq / params.body_weight_g;
    let voxels = raw.voxels.iter().map(|&c| c / dose_per_gram).collect();
    Ok(IntensityVolume {
        geometry: raw.geometry,
        voxels,
    })
}

/// Axis-aligned box with inclusive index bounds per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BoxRegion {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        Self { lo, hi }
    }

    /// Checks `0 <= lo <= hi < dim` on every axis.
    pub fn validate(&self, geometry: &GridGeometry) -> Result<()> {
        let dims = geometry.dims();
        for axis in 0..3 {
            if self.lo[axis] > self.hi[axis] || self.hi[axis] >= dims[axis] {
                return Err(Error::RegionOutOfBounds(format!(
                    "axis {axis}: [{}, {}] not within [0, {})",
                    self.lo[axis], self.hi[axis], dims[axis]
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, c: [usize; 3]) -> bool {
        (0..3).all(|a| self.lo[a] <= c[a] && c[a] <= self.hi[a])
    }
}

/// Clears every voxel inside `region`.
///
/// Meant for prediction masks in exclusion ablations; reference annotations are
/// left to the caller.
pub fn exclude_region(mask: &LabelVolume, region: &BoxRegion) -> Result<LabelVolume> {
    region.validate(&mask.geometry)?;
    let mut out = mask.clone();
    for z in region.lo[2]..=region.hi[2] {
        for y in region.lo[1]..=region.hi[1] {
            let start = mask.geometry.linear_index(region.lo[0], y, z);
            let end = mask.geometry.linear_index(region.hi[0], y, z);
            out.voxels[start..=end].fill(0);
        }
    }
    Ok(out)
}

fn check_len(geometry: &GridGeometry, len: usize) -> Result<()> {
    let expected = geometry.voxel_count();
    if len == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found: len })
    }
}
