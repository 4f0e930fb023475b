//! Connected-component labeling and reference × prediction overlap tables.
//!
//! Labeling is a two-pass union-find over the index grid (spacing is ignored).
//! Final labels are assigned in order of each component's first voxel in the
//! x-fastest scan, so output is reproducible across runs and implementations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::volume::{GridGeometry, IntensityVolume, LabelVolume};
use crate::{Error, Result};

/// Voxel neighborhood used to decide whether two foreground voxels touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    /// Shared face.
    Six,
    /// Shared face or edge.
    #[default]
    Eighteen,
    /// Shared face, edge or corner.
    TwentySix,
}

impl Connectivity {
    pub const ALL: [Connectivity; 3] = [Connectivity::Six, Connectivity::Eighteen, Connectivity::TwentySix];

    /// Largest L1 norm of a neighbor offset in this neighborhood.
    fn max_l1(self) -> i32 {
        match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        }
    }

    pub fn value(self) -> u8 {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// All neighbor offsets `(dx, dy, dz)`.
    pub fn offsets(self) -> Vec<[i32; 3]> {
        let mut out = Vec::new();
        for dz in -1i32..=1 {
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let l1 = dx.abs() + dy.abs() + dz.abs();
                    if l1 > 0 && l1 <= self.max_l1() {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }

    /// Offsets that precede the current voxel in scan order.
    fn backward_offsets(self) -> Vec<[i32; 3]> {
        self.offsets()
            .into_iter()
            .filter(|&[dx, dy, dz]| (dz, dy, dx) < (0, 0, 0))
            .collect()
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidConfig(format!(
                "connectivity must be 6, 18 or 26, got {other}"
            ))),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        c.value()
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u8 = s
            .trim()
            .trim_start_matches("cc")
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("invalid connectivity {s:?}")))?;
        Connectivity::try_from(v)
    }
}

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Per-voxel component labels (0 is background) plus component sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLabeling {
    geometry: GridGeometry,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Component sizes in voxels; `sizes()[l - 1]` is the size of label `l`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, label: u32) -> usize {
        self.sizes[label as usize - 1]
    }

    pub fn foreground_count(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Mask of a single component.
    pub fn component_mask(&self, label: u32) -> LabelVolume {
        let bits = self.labels.iter().map(|&l| u8::from(l == label)).collect();
        LabelVolume::from_bits(self.geometry, bits).expect("labels match geometry")
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // slot 0 is unused so provisional labels start at 1
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let ra = self.find(a);
        let rb = self.find(b);
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Labels the connected components of `mask` under `conn`.
pub fn label_components(mask: &LabelVolume, conn: Connectivity) -> ComponentLabeling {
    let geometry = *mask.geometry();
    let [nx, ny, nz] = geometry.dims();
    let offsets = conn.backward_offsets();
    let mut labels = vec![0u32; geometry.voxel_count()];
    let mut sets = DisjointSet::new();

    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let idx = geometry.linear_index(x, y, z);
                if !mask.is_set(idx) {
                    continue;
                }
                let mut current = 0u32;
                for &[dx, dy, dz] in &offsets {
                    let (px, py, pz) = (x as i64 + dx as i64, y as i64 + dy as i64, z as i64 + dz as i64);
                    if px < 0 || py < 0 || pz < 0 || px >= nx as i64 || py >= ny as i64 {
                        continue;
                    }
                    let neighbor = labels[geometry.linear_index(px as usize, py as usize, pz as usize)];
                    if neighbor == 0 {
                        continue;
                    }
                    current = if current == 0 {
                        sets.find(neighbor)
                    } else {
                        sets.union(current, neighbor)
                    };
                }
                labels[idx] = if current == 0 { sets.make() } else { current };
            }
        }
    }

    let mut final_of_root = vec![0u32; sets.parent.len()];
    let mut sizes: Vec<usize> = Vec::new();
    for label in labels.iter_mut() {
        if *label == 0 {
            continue;
        }
        let root = sets.find(*label) as usize;
        if final_of_root[root] == 0 {
            sizes.push(0);
            final_of_root[root] = sizes.len() as u32;
        }
        *label = final_of_root[root];
        sizes[*label as usize - 1] += 1;
    }

    ComponentLabeling {
        geometry,
        labels,
        sizes,
    }
}

/// One stored intersection between reference component `reference` and prediction
/// component `prediction` (both 1-based labels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapEntry {
    pub reference: u32,
    pub prediction: u32,
    pub voxels: usize,
}

/// Sparse contingency table of voxel intersections between reference and
/// prediction components. Only overlapping pairs are stored, sorted by
/// `(reference, prediction)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    pub ref_sizes: Vec<usize>,
    pub pred_sizes: Vec<usize>,
    pub entries: Vec<OverlapEntry>,
    pub voxel_volume_ml: f64,
}

impl OverlapTable {
    /// Builds a table directly from sizes and entries, validating the invariants.
    pub fn from_parts(
        ref_sizes: Vec<usize>,
        pred_sizes: Vec<usize>,
        entries: impl IntoIterator<Item = (u32, u32, usize)>,
        voxel_volume_ml: f64,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (r, p, v) in entries {
            map.insert((r, p), v);
        }
        let table = Self {
            ref_sizes,
            pred_sizes,
            entries: map
                .into_iter()
                .map(|((reference, prediction), voxels)| OverlapEntry {
                    reference,
                    prediction,
                    voxels,
                })
                .collect(),
            voxel_volume_ml,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_volume_ml.is_finite() && self.voxel_volume_ml > 0.0) {
            return Err(Error::InvalidConfig("voxel volume must be > 0".into()));
        }
        let mut ref_totals = vec![0usize; self.n_ref()];
        let mut pred_totals = vec![0usize; self.n_pred()];
        for e in &self.entries {
            let (r, p) = (e.reference as usize, e.prediction as usize);
            if r == 0 || p == 0 || r > self.n_ref() || p > self.n_pred() {
                return Err(Error::InvalidConfig(format!("entry ({r}, {p}) out of range")));
            }
            if e.voxels == 0 || e.voxels > self.ref_sizes[r - 1].min(self.pred_sizes[p - 1]) {
                return Err(Error::InvalidConfig(format!(
                    "entry ({r}, {p}) has impossible intersection {}",
                    e.voxels
                )));
            }
            ref_totals[r - 1] += e.voxels;
            pred_totals[p - 1] += e.voxels;
        }
        let over = |totals: &[usize], sizes: &[usize]| totals.iter().zip(sizes).any(|(t, s)| t > s);
        if over(&ref_totals, &self.ref_sizes) || over(&pred_totals, &self.pred_sizes) {
            return Err(Error::InvalidConfig("intersections exceed component sizes".into()));
        }
        Ok(())
    }

    pub fn n_ref(&self) -> usize {
        self.ref_sizes.len()
    }

    pub fn n_pred(&self) -> usize {
        self.pred_sizes.len()
    }

    pub fn intersection(&self, reference: u32, prediction: u32) -> usize {
        self.entries
            .binary_search_by(|e| (e.reference, e.prediction).cmp(&(reference, prediction)))
            .map(|i| self.entries[i].voxels)
            .unwrap_or(0)
    }

    /// IoU of one stored entry.
    pub fn iou(&self, entry: &OverlapEntry) -> f64 {
        let r = self.ref_sizes[entry.reference as usize - 1];
        let p = self.pred_sizes[entry.prediction as usize - 1];
        entry.voxels as f64 / (r + p - entry.voxels) as f64
    }

    /// The same table with the roles of reference and prediction swapped.
    pub fn transposed(&self) -> OverlapTable {
        let mut entries: Vec<OverlapEntry> = self
            .entries
            .iter()
            .map(|e| OverlapEntry {
                reference: e.prediction,
                prediction: e.reference,
                voxels: e.voxels,
            })
            .collect();
        entries.sort_by_key(|e| (e.reference, e.prediction));
        OverlapTable {
            ref_sizes: self.pred_sizes.clone(),
            pred_sizes: self.ref_sizes.clone(),
            entries,
            voxel_volume_ml: self.voxel_volume_ml,
        }
    }

    /// Total intersection voxels, which equals `|G ∩ P|`.
    pub fn total_intersection(&self) -> usize {
        self.entries.iter().map(|e| e.voxels).sum()
    }
}

/// Counts the voxel intersection of every overlapping (reference, prediction)
/// component pair in one pass over the grid.
pub fn overlap_table(reference: &ComponentLabeling, prediction: &ComponentLabeling) -> Result<OverlapTable> {
    reference.geometry.ensure_same(&prediction.geometry)?;
    let mut map: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&r, &p) in reference.labels.iter().zip(&prediction.labels) {
        if r != 0 && p != 0 {
            *map.entry((r, p)).or_default() += 1;
        }
    }
    Ok(OverlapTable {
        ref_sizes: reference.sizes.clone(),
        pred_sizes: prediction.sizes.clone(),
        entries: map
            .into_iter()
            .map(|((reference, prediction), voxels)| OverlapEntry {
                reference,
                prediction,
                voxels,
            })
            .collect(),
        voxel_volume_ml: reference.geometry.voxel_volume_ml(),
    })
}

/// Inclusive index bounds of a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStat {
    pub label: u32,
    pub voxels: usize,
    pub volume_ml: f64,
    pub suv_max: Option<f64>,
    pub bounding_box: BoundingBox,
}

/// Per-component statistics, ordered by label.
pub type ComponentStats = Vec<ComponentStat>;

pub fn component_stats(labeling: &ComponentLabeling, intensity: Option<&IntensityVolume>) -> Result<ComponentStats> {
    if let Some(img) = intensity {
        labeling.geometry.ensure_same(img.geometry())?;
    }
    let voxel_ml = labeling.geometry.voxel_volume_ml();
    let mut stats: Vec<ComponentStat> = labeling
        .sizes
        .iter()
        .enumerate()
        .map(|(i, &voxels)| ComponentStat {
            label: i as u32 + 1,
            voxels,
            volume_ml: voxels as f64 * voxel_ml,
            suv_max: intensity.map(|_| f64::NEG_INFINITY),
            bounding_box: BoundingBox {
                lo: [usize::MAX; 3],
                hi: [0; 3],
            },
        })
        .collect();
    for (idx, &label) in labeling.labels.iter().enumerate() {
        if label == 0 {
            continue;
        }
        let stat = &mut stats[label as usize - 1];
        let c = labeling.geometry.coords(idx);
        for a in 0..3 {
            stat.bounding_box.lo[a] = stat.bounding_box.lo[a].min(c[a]);
            stat.bounding_box.hi[a] = stat.bounding_box.hi[a].max(c[a]);
        }
        if let (Some(img), Some(max)) = (intensity, stat.suv_max.as_mut()) {
            *max = max.max(img.voxels()[idx]);
        }
    }
    Ok(stats)
}
