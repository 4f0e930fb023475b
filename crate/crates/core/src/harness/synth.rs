//! Synthetic phantoms: ellipsoidal lesions, an uptake image and degraded predictions.

use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{load_manifest, CaseManifest, ManifestEntry, MANIFEST_SCHEMA_VERSION};
use crate::io::{write_intensity_file, write_label_file};
use crate::ranking::SubsetKey;
use crate::volume::{GridGeometry, IntensityVolume, LabelVolume};
use crate::{Error, Result};

/// Placement attempts per object before giving up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomParams {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    /// Inclusive range of lesions per case.
    pub lesion_count: [usize; 2],
    /// Range of ellipsoid semi-axes in millimetres.
    pub radius_mm: [f64; 2],
    pub background_uptake: f64,
    /// Range of uptake added inside each lesion.
    pub lesion_uptake: [f64; 2],
}

impl Default for PhantomParams {
    fn default() -> Self {
        Self {
            dims: [48, 48, 32],
            spacing_mm: [2.0, 2.0, 3.0],
            lesion_count: [1, 4],
            radius_mm: [3.0, 7.0],
            background_uptake: 1.0,
            lesion_uptake: [2.0, 10.0],
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        GridGeometry::new(self.dims, self.spacing_mm)?;
        let max_spacing = self.spacing_mm.iter().copied().fold(0.0, f64::max);
        let bad = |what: &str| Err(Error::InvalidConfig(format!("synth params: {what}")));
        if self.lesion_count[0] > self.lesion_count[1] {
            return bad("lesion_count range is empty");
        }
        if !(self.radius_mm[0] >= max_spacing && self.radius_mm[0] <= self.radius_mm[1]) {
            return bad("radius_mm must be ordered and at least one voxel spacing");
        }
        if !(self.background_uptake.is_finite() && self.background_uptake >= 0.0) {
            return bad("background_uptake must be finite and non-negative");
        }
        if !(self.lesion_uptake[0] > 0.0
            && self.lesion_uptake[0] <= self.lesion_uptake[1]
            && self.lesion_uptake[1].is_finite())
        {
            return bad("lesion_uptake must be positive and ordered");
        }
        Ok(())
    }
}

/// How a prediction departs from the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Degradation {
    /// Face-connected dilation steps; negative values erode.
    pub dilation: i32,
    /// Probability that a lesion is missing from the prediction.
    pub drop_probability: f64,
    /// Expected number of spurious cubes per case.
    pub spurious_rate: f64,
    /// Edge length of spurious cubes in voxels.
    pub spurious_edge: usize,
    /// Fraction of lesions predicted as a copy shifted along x so that only
    /// its end cap overlaps the reference (IoU below 1/3, still detected at
    /// one voxel). Every lesion whose index crosses a multiple of
    /// `1 / marginal_fraction` is shifted, so at least this fraction is.
    pub marginal_fraction: f64,
}

impl Default for Degradation {
    fn default() -> Self {
        Self {
            dilation: 0,
            drop_probability: 0.0,
            spurious_rate: 0.0,
            spurious_edge: 2,
            marginal_fraction: 0.0,
        }
    }
}

impl Degradation {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.drop_probability) || !prob(self.marginal_fraction) {
            return Err(Error::InvalidConfig(
                "synth params: probabilities must lie in [0, 1]".into(),
            ));
        }
        if !(self.spurious_rate.is_finite() && self.spurious_rate >= 0.0) || self.spurious_edge == 0 {
            return Err(Error::InvalidConfig(
                "synth params: spurious_rate must be >= 0 and spurious_edge >= 1".into(),
            ));
        }
        Ok(())
    }

    fn is_marginal(&self, index: usize) -> bool {
        let f = self.marginal_fraction;
        ((index + 1) as f64 * f).ceil() > (index as f64 * f).ceil()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    #[serde(flatten)]
    pub phantom: PhantomParams,
    #[serde(default)]
    pub degradation: Degradation,
    #[serde(default)]
    pub seed: u64,
}

/// Inclusive index box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct Footprint {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Footprint {
    fn clears(&self, other: &Footprint, gap: usize) -> bool {
        (0..3).any(|a| self.hi[a] + gap < other.lo[a] || other.hi[a] + gap < self.lo[a])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLesion {
    pub center: [usize; 3],
    /// Semi-axes in voxels.
    pub radii: [f64; 3],
    pub voxels: usize,
    pub uptake: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub reference: LabelVolume,
    pub intensity: IntensityVolume,
    pub lesions: Vec<SynthLesion>,
    footprints: Vec<Footprint>,
}

/// What the degradation did, for building oracles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DegradationTruth {
    pub dropped: Vec<usize>,
    pub marginal: Vec<usize>,
    /// Voxel count of each injected spurious component.
    pub spurious_voxels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub reference: LabelVolume,
    pub intensity: IntensityVolume,
    pub prediction: LabelVolume,
    pub lesions: Vec<SynthLesion>,
    pub truth: DegradationTruth,
}

fn ellipsoid_voxels(center: [usize; 3], radii: [f64; 3], dims: [usize; 3]) -> Vec<[usize; 3]> {
    let h = radii.map(|r| r.floor() as usize);
    let mut out = Vec::new();
    for z in center[2] - h[2]..=center[2] + h[2] {
        for y in center[1] - h[1]..=center[1] + h[1] {
            for x in center[0] - h[0]..=center[0] + h[0] {
                let c = [x, y, z];
                let q: f64 = (0..3)
                    .map(|a| {
                        let d = (c[a] as f64 - center[a] as f64) / radii[a];
                        d * d
                    })
                    .sum();
                if q <= 1.0 && (0..3).all(|a| c[a] < dims[a]) {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Generates the reference and uptake image. Lesion footprints reserve room
/// for a marginal shift along +x and keep a gap of `gap` voxels.
fn place_phantom(params: &PhantomParams, gap: usize, rng: &mut ChaCha8Rng) -> Result<Phantom> {
    params.validate()?;
    let geometry = GridGeometry::new(params.dims, params.spacing_mm)?;
    let dims = params.dims;
    let n = rng.gen_range(params.lesion_count[0]..=params.lesion_count[1]);
    let mut reference = LabelVolume::empty(geometry);
    let mut values = vec![params.background_uptake; geometry.voxel_count()];
    let mut lesions = Vec::with_capacity(n);
    let mut footprints: Vec<Footprint> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let radii: [f64; 3] = std::array::from_fn(|a| {
                rng.gen_range(params.radius_mm[0]..=params.radius_mm[1]) / params.spacing_mm[a]
            });
            let h = radii.map(|r| r.floor() as usize);
            // x needs room for the shifted copy: [c - h, c + 3h]
            let span = [4 * h[0], 2 * h[1], 2 * h[2]];
            if (0..3).any(|a| span[a] + 1 > dims[a]) {
                continue;
            }
            let center = [
                rng.gen_range(h[0]..dims[0] - 3 * h[0]),
                rng.gen_range(h[1]..dims[1] - h[1]),
                rng.gen_range(h[2]..dims[2] - h[2]),
            ];
            let fp = Footprint {
                lo: [center[0] - h[0], center[1] - h[1], center[2] - h[2]],
                hi: [center[0] + 3 * h[0], center[1] + h[1], center[2] + h[2]],
            };
            if footprints.iter().any(|o| !fp.clears(o, gap)) {
                continue;
            }
            let uptake = rng.gen_range(params.lesion_uptake[0]..=params.lesion_uptake[1]);
            let voxels = ellipsoid_voxels(center, radii, dims);
            for c in &voxels {
                reference.set(c[0], c[1], c[2], true);
                values[geometry.linear_index(c[0], c[1], c[2])] = params.background_uptake + uptake;
            }
            lesions.push(SynthLesion {
                center,
                radii,
                voxels: voxels.len(),
                uptake,
            });
            footprints.push(fp);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::PlacementFailure(MAX_PLACEMENT_ATTEMPTS));
        }
    }
    Ok(Phantom {
        reference,
        intensity: IntensityVolume::new(geometry, values)?,
        lesions,
        footprints,
    })
}

fn gap_for(dilation: i32) -> usize {
    2 + 2 * dilation.max(0) as usize
}

/// Phantom with a footprint gap wide enough for dilations up to `max_dilation`.
pub fn synth_phantom(params: &PhantomParams, max_dilation: i32, seed: u64) -> Result<Phantom> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    place_phantom(params, gap_for(max_dilation), &mut rng)
}

fn morph_step(mask: &LabelVolume, dilate: bool) -> LabelVolume {
    let g = *mask.geometry();
    let [nx, ny, nz] = g.dims();
    let mut out = LabelVolume::empty(g);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let c = [x as i64, y as i64, z as i64];
                let neighbors =
                    [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]].map(|o: [i64; 3]| {
                        let p = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
                        let inside = p[0] >= 0
                            && p[1] >= 0
                            && p[2] >= 0
                            && p[0] < nx as i64
                            && p[1] < ny as i64
                            && p[2] < nz as i64;
                        inside && mask.get(p[0] as usize, p[1] as usize, p[2] as usize)
                    });
                let here = mask.get(x, y, z);
                let v = if dilate {
                    here || neighbors.iter().any(|&b| b)
                } else {
                    here && neighbors.iter().all(|&b| b)
                };
                if v {
                    out.set(x, y, z, true);
                }
            }
        }
    }
    out
}

/// Derives a prediction from `phantom`.
pub fn degrade(phantom: &Phantom, degradation: &Degradation, seed: u64) -> Result<(LabelVolume, DegradationTruth)> {
    degradation.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let geometry = *phantom.reference.geometry();
    let dims = geometry.dims();
    let mut pred = LabelVolume::empty(geometry);
    let mut truth = DegradationTruth::default();
    for (i, lesion) in phantom.lesions.iter().enumerate() {
        if rng.gen_bool(degradation.drop_probability) {
            truth.dropped.push(i);
            continue;
        }
        let shift = if degradation.is_marginal(i) {
            truth.marginal.push(i);
            2 * lesion.radii[0].floor() as usize
        } else {
            0
        };
        for c in ellipsoid_voxels(lesion.center, lesion.radii, dims) {
            pred.set(c[0] + shift, c[1], c[2], true);
        }
    }
    for _ in 0..degradation.dilation.unsigned_abs() {
        pred = morph_step(&pred, degradation.dilation > 0);
    }

    let whole = degradation.spurious_rate.floor();
    let count = whole as usize + usize::from(rng.gen_bool(degradation.spurious_rate - whole));
    let edge = degradation.spurious_edge;
    let gap = gap_for(degradation.dilation);
    let mut occupied = phantom.footprints.clone();
    if (0..3).any(|a| edge > dims[a]) && count > 0 {
        return Err(Error::PlacementFailure(0));
    }
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let lo: [usize; 3] = std::array::from_fn(|a| rng.gen_range(0..=dims[a] - edge));
            let fp = Footprint {
                lo,
                hi: lo.map(|v| v + edge - 1),
            };
            if occupied.iter().any(|o| !fp.clears(o, gap)) {
                continue;
            }
            for z in lo[2]..lo[2] + edge {
                for y in lo[1]..lo[1] + edge {
                    for x in lo[0]..lo[0] + edge {
                        pred.set(x, y, z, true);
                    }
                }
            }
            truth.spurious_voxels.push(edge * edge * edge);
            occupied.push(fp);
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::PlacementFailure(MAX_PLACEMENT_ATTEMPTS));
        }
    }
    Ok((pred, truth))
}

/// Reference, uptake image and one degraded prediction, all determined by `params.seed`.
pub fn synth_case(params: &SynthParams) -> Result<SynthCase> {
    let phantom = synth_phantom(&params.phantom, params.degradation.dilation, params.seed)?;
    let (prediction, truth) = degrade(&phantom, &params.degradation, params.seed)?;
    Ok(SynthCase {
        reference: phantom.reference,
        intensity: phantom.intensity,
        prediction,
        lesions: phantom.lesions,
        truth,
    })
}

/// A pure function of `(seed, index)` used to derive per-case and per-algorithm seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmProfile {
    pub name: String,
    #[serde(default)]
    pub degradation: Degradation,
}

/// Phantom settings plus one degradation profile per simulated algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthPlan {
    #[serde(default)]
    pub phantom: PhantomParams,
    pub algorithms: Vec<AlgorithmProfile>,
}

impl Default for SynthPlan {
    fn default() -> Self {
        let profile = |name: &str, dilation, drop_probability, spurious_rate, marginal_fraction| AlgorithmProfile {
            name: name.to_string(),
            degradation: Degradation {
                dilation,
                drop_probability,
                spurious_rate,
                spurious_edge: 2,
                marginal_fraction,
            },
        };
        Self {
            phantom: PhantomParams::default(),
            algorithms: vec![
                profile("alpha", 0, 0.05, 0.3, 0.0),
                profile("beta", 1, 0.15, 1.0, 0.2),
                profile("gamma", 0, 0.3, 1.5, 0.5),
            ],
        }
    }
}

impl SynthPlan {
    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("synth plan lists no algorithms".into()));
        }
        let mut names: Vec<&str> = self.algorithms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
            return Err(Error::InvalidConfig(
                "algorithm names must be unique, non-empty and path-safe".into(),
            ));
        }
        self.algorithms.iter().try_for_each(|a| a.degradation.validate())
    }

    fn max_dilation(&self) -> i32 {
        self.algorithms
            .iter()
            .map(|a| a.degradation.dilation)
            .max()
            .unwrap_or(0)
    }
}

/// Writes `cases` synthetic cases (subsets assigned round-robin) plus
/// `manifest.json` under `out_dir`, and returns the manifest with resolved paths.
pub fn synth_challenge(plan: &SynthPlan, cases: usize, seed: u64, out_dir: &Path) -> Result<CaseManifest> {
    plan.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = (0..cases)
        .into_par_iter()
        .map(|i| {
            let case_id = format!("case_{i:04}");
            let case_seed = derive_seed(seed, i as u64);
            let phantom = synth_phantom(&plan.phantom, plan.max_dilation(), case_seed)?;
            let dir = out_dir.join(&case_id);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_label_file(&dir.join("reference.nii"), &phantom.reference)?;
            write_intensity_file(&dir.join("intensity.nii"), &phantom.intensity)?;
            let mut predictions = std::collections::BTreeMap::new();
            for (a, profile) in plan.algorithms.iter().enumerate() {
                let (pred, _) = degrade(&phantom, &profile.degradation, derive_seed(case_seed, a as u64 + 1))?;
                let file = format!("{}.nii", profile.name);
                write_label_file(&dir.join(&file), &pred)?;
                predictions.insert(profile.name.clone(), Path::new(&case_id).join(file));
            }
            Ok(ManifestEntry {
                subset: SubsetKey::ALL[i % 4],
                reference: Path::new(&case_id).join("reference.nii"),
                intensity: Some(Path::new(&case_id).join("intensity.nii")),
                predictions,
                case_id,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = CaseManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        cases: entries,
    };
    let path = out_dir.join("manifest.json");
    let json = manifest.to_json()?;
    std::fs::write(&path, &json).map_err(|e| Error::io(&path, e))?;
    // the file keeps relative paths; the caller gets them resolved
    load_manifest(json.as_bytes(), out_dir)
}
