//! Whole-mask metrics: overlap, volume agreement and surface distance.

use serde::{Deserialize, Serialize};

use crate::distance::{axis_weights, squared_distance_to};
use crate::volume::LabelVolume;
use crate::{Error, Result};

/// Regularization added to both volumes of the volume ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioConfig {
    pub epsilon_ml: f64,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self { epsilon_ml: 0.012 }
    }
}

impl RatioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon_ml.is_finite() && self.epsilon_ml > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "epsilon_ml must be > 0, got {}",
                self.epsilon_ml
            )))
        }
    }
}

/// Surface-distance tolerance. In index units by default; `physical` switches
/// both the tolerance and the distance to millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsdConfig {
    pub tolerance: f64,
    #[serde(default)]
    pub physical: bool,
}

impl Default for NsdConfig {
    fn default() -> Self {
        Self {
            tolerance: 1.0,
            physical: false,
        }
    }
}

impl NsdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_finite() && self.tolerance >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "NSD tolerance must be >= 0, got {}",
                self.tolerance
            )))
        }
    }
}

fn dice_from_counts(g: usize, p: usize, both: usize) -> f64 {
    if g + p == 0 {
        return 1.0;
    }
    2.0 * both as f64 / (g + p) as f64
}

/// Dice similarity coefficient for lesion-positive cases.
///
/// Cases with an empty reference are only scored by false positive volume, so
/// they are rejected here with [`Error::EmptyReference`].
pub fn dsc(reference: &LabelVolume, prediction: &LabelVolume) -> Result<f64> {
    let both = reference.intersection_count(prediction)?;
    let g = reference.foreground_count();
    if g == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(dice_from_counts(g, prediction.foreground_count(), both))
}

/// Dice over all cases: an empty reference scores 1 when the prediction is empty too, else 0.
pub fn dsc_all(reference: &LabelVolume, prediction: &LabelVolume) -> Result<f64> {
    dsc_all_with(reference, prediction, 1.0)
}

/// [`dsc_all`] with a configurable score for the both-empty case.
pub fn dsc_all_with(reference: &LabelVolume, prediction: &LabelVolume, both_empty: f64) -> Result<f64> {
    let both = reference.intersection_count(prediction)?;
    let g = reference.foreground_count();
    let p = prediction.foreground_count();
    Ok(match (g, p) {
        (0, 0) => both_empty,
        (0, _) => 0.0,
        _ => dice_from_counts(g, p, both),
    })
}

/// `1 - ||G| - |P|| / (|G| + |P|)`.
pub fn volumetric_similarity(reference: &LabelVolume, prediction: &LabelVolume) -> Result<f64> {
    reference.geometry().ensure_same(prediction.geometry())?;
    let g = reference.foreground_count() as f64;
    let p = prediction.foreground_count() as f64;
    if g + p == 0.0 {
        return Err(Error::BothEmpty);
    }
    Ok(1.0 - (g - p).abs() / (g + p))
}

/// Foreground voxels with at least one background face neighbor. Voxels on
/// the grid border always count as boundary.
pub fn boundary(mask: &LabelVolume) -> LabelVolume {
    let g = *mask.geometry();
    let [nx, ny, nz] = g.dims();
    let mut out = LabelVolume::empty(g);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !mask.get(x, y, z) {
                    continue;
                }
                let on_border = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                let exposed = on_border
                    || !mask.get(x - 1, y, z)
                    || !mask.get(x + 1, y, z)
                    || !mask.get(x, y - 1, z)
                    || !mask.get(x, y + 1, z)
                    || !mask.get(x, y, z - 1)
                    || !mask.get(x, y, z + 1);
                if exposed {
                    out.set(x, y, z, true);
                }
            }
        }
    }
    out
}

/// Normalized surface distance: the fraction of both boundaries lying within
/// `cfg.tolerance` of the other boundary. An empty prediction scores 0.
pub fn nsd(reference: &LabelVolume, prediction: &LabelVolume, cfg: &NsdConfig) -> Result<f64> {
    cfg.validate()?;
    reference.geometry().ensure_same(prediction.geometry())?;
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    if prediction.is_empty() {
        return Ok(0.0);
    }
    let weights = axis_weights(reference.geometry(), cfg.physical);
    let tol2 = cfg.tolerance * cfg.tolerance;
    let bg = boundary(reference);
    let bp = boundary(prediction);
    let to_p = squared_distance_to(&bp, weights);
    let to_g = squared_distance_to(&bg, weights);
    let close_g = bg.foreground_indices().filter(|&i| to_p[i] <= tol2).count();
    let close_p = bp.foreground_indices().filter(|&i| to_g[i] <= tol2).count();
    let total = bg.foreground_count() + bp.foreground_count();
    Ok((close_g + close_p) as f64 / total as f64)
}

/// Signed volume difference `vol(P) - vol(G)` in millilitres.
pub fn volume_difference(reference: &LabelVolume, prediction: &LabelVolume) -> Result<f64> {
    reference.geometry().ensure_same(prediction.geometry())?;
    let diff = prediction.foreground_count() as f64 - reference.foreground_count() as f64;
    Ok(diff * reference.geometry().voxel_volume_ml())
}

/// `(vol(P) + eps) / (vol(G) + eps)` with volumes in millilitres.
pub fn volume_ratio(reference: &LabelVolume, prediction: &LabelVolume, cfg: &RatioConfig) -> Result<f64> {
    cfg.validate()?;
    reference.geometry().ensure_same(prediction.geometry())?;
    Ok((prediction.volume_ml() + cfg.epsilon_ml) / (reference.volume_ml() + cfg.epsilon_ml))
}
