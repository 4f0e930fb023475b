//! Lesion-level metrics computed from [`OverlapTable`]s.
//!
//! Every detection-style metric shares one matching kernel: a reference and a
//! prediction component are linked when their pair satisfies a
//! [`MatchCriterion`]. Multi-assignment is allowed everywhere, so one
//! prediction may detect several references and vice versa.

use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::components::{ComponentLabeling, ComponentStats, OverlapTable};
use crate::distance::{axis_weights, nearest_site};
use crate::volume::LabelVolume;
use crate::{Error, Result};

/// Rule deciding whether a reference/prediction component pair matches.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchCriterion {
    /// At least one shared voxel.
    #[default]
    OneVoxel,
    /// Pairwise IoU of at least `tau`.
    Iou { tau: f64 },
}

impl MatchCriterion {
    pub fn iou(tau: f64) -> Result<Self> {
        let c = MatchCriterion::Iou { tau };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MatchCriterion::OneVoxel => Ok(()),
            MatchCriterion::Iou { tau } if tau > 0.0 && tau <= 1.0 => Ok(()),
            MatchCriterion::Iou { tau } => Err(Error::InvalidConfig(format!(
                "IoU threshold must lie in (0, 1], got {tau}"
            ))),
        }
    }

    /// Whether an intersection of `inter` voxels between components of size
    /// `ref_size` and `pred_size` satisfies the criterion.
    #[inline]
    pub fn accepts(&self, inter: usize, ref_size: usize, pred_size: usize) -> bool {
        match *self {
            MatchCriterion::OneVoxel => inter >= 1,
            MatchCriterion::Iou { tau } => inter >= 1 && inter as f64 / (ref_size + pred_size - inter) as f64 >= tau,
        }
    }
}

impl fmt::Display for MatchCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchCriterion::OneVoxel => write!(f, "one_voxel"),
            MatchCriterion::Iou { tau } => write!(f, "iou@{tau}"),
        }
    }
}

/// Summed volume of prediction components that touch no reference component.
pub fn fpv(ot: &OverlapTable) -> f64 {
    let mut touched = vec![false; ot.n_pred()];
    for e in &ot.entries {
        touched[e.prediction as usize - 1] = true;
    }
    let voxels: usize = ot
        .pred_sizes
        .iter()
        .zip(&touched)
        .filter(|(_, &t)| !t)
        .map(|(&s, _)| s)
        .sum();
    voxels as f64 * ot.voxel_volume_ml
}

/// Summed volume of reference components that no prediction touches.
pub fn fnv(ot: &OverlapTable) -> f64 {
    let mut touched = vec![false; ot.n_ref()];
    for e in &ot.entries {
        touched[e.reference as usize - 1] = true;
    }
    let voxels: usize = ot
        .ref_sizes
        .iter()
        .zip(&touched)
        .filter(|(_, &t)| !t)
        .map(|(&s, _)| s)
        .sum();
    voxels as f64 * ot.voxel_volume_ml
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionFlags {
    /// `reference_detected[i - 1]` for reference component `i`.
    pub reference_detected: Vec<bool>,
    /// `prediction_matched[l - 1]` for prediction component `l`.
    pub prediction_matched: Vec<bool>,
}

impl DetectionFlags {
    pub fn detected_count(&self) -> usize {
        self.reference_detected.iter().filter(|&&d| d).count()
    }

    pub fn matched_count(&self) -> usize {
        self.prediction_matched.iter().filter(|&&m| m).count()
    }
}

pub fn detection_flags(ot: &OverlapTable, crit: &MatchCriterion) -> DetectionFlags {
    let mut flags = DetectionFlags {
        reference_detected: vec![false; ot.n_ref()],
        prediction_matched: vec![false; ot.n_pred()],
    };
    for e in &ot.entries {
        let r = ot.ref_sizes[e.reference as usize - 1];
        let p = ot.pred_sizes[e.prediction as usize - 1];
        if crit.accepts(e.voxels, r, p) {
            flags.reference_detected[e.reference as usize - 1] = true;
            flags.prediction_matched[e.prediction as usize - 1] = true;
        }
    }
    flags
}

/// Default IoU grid for sweeps: 0.01 to 0.50 in steps of 0.01.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=50).map(|k| k as f64 / 100.0).collect()
}

/// The one-voxel criterion followed by IoU criteria at each `tau`.
pub fn sweep_criteria(taus: &[f64]) -> Result<Vec<MatchCriterion>> {
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("taus must be strictly ascending".into()));
    }
    let mut out = vec![MatchCriterion::OneVoxel];
    for &tau in taus {
        out.push(MatchCriterion::iou(tau)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub criterion: MatchCriterion,
    pub detected: usize,
    pub total: usize,
    pub sensitivity: f64,
}

/// Pooled detection sensitivity over all cases, for the one-voxel criterion and each `tau`.
pub fn sensitivity_sweep(ots: &[OverlapTable], taus: &[f64]) -> Result<Vec<SweepPoint>> {
    let total: usize = ots.iter().map(OverlapTable::n_ref).sum();
    if total == 0 {
        return Err(Error::EmptyPopulation);
    }
    Ok(sweep_criteria(taus)?
        .into_iter()
        .map(|criterion| {
            let detected: usize = ots
                .iter()
                .map(|ot| detection_flags(ot, &criterion).detected_count())
                .sum();
            SweepPoint {
                criterion,
                detected,
                total,
                sensitivity: detected as f64 / total as f64,
            }
        })
        .collect())
}

/// Association-cluster counts of the six-way detection error taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaxonomyCounts {
    /// One reference, one prediction.
    pub cd: usize,
    /// Prediction without reference.
    pub fa: usize,
    /// Reference without prediction.
    pub df: usize,
    /// One prediction covering several references.
    pub m: usize,
    /// One reference covered by several predictions.
    pub s: usize,
    /// Several references and several predictions.
    pub sm: usize,
    /// Reference components inside M, S or SM clusters.
    pub refs_in_multi: usize,
    /// Prediction components inside M, S or SM clusters.
    pub preds_in_multi: usize,
}

impl TaxonomyCounts {
    pub fn reference_total(&self) -> usize {
        self.cd + self.df + self.refs_in_multi
    }

    pub fn prediction_total(&self) -> usize {
        self.cd + self.fa + self.preds_in_multi
    }
}

impl Add for TaxonomyCounts {
    type Output = TaxonomyCounts;

    fn add(self, o: TaxonomyCounts) -> TaxonomyCounts {
        TaxonomyCounts {
            cd: self.cd + o.cd,
            fa: self.fa + o.fa,
            df: self.df + o.df,
            m: self.m + o.m,
            s: self.s + o.s,
            sm: self.sm + o.sm,
            refs_in_multi: self.refs_in_multi + o.refs_in_multi,
            preds_in_multi: self.preds_in_multi + o.preds_in_multi,
        }
    }
}

impl AddAssign for TaxonomyCounts {
    fn add_assign(&mut self, o: TaxonomyCounts) {
        *self = *self + o;
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Classifies the connected clusters of the bipartite match graph.
pub fn error_taxonomy(ot: &OverlapTable, crit: &MatchCriterion) -> TaxonomyCounts {
    let n_ref = ot.n_ref();
    let n = n_ref + ot.n_pred();
    let mut parent: Vec<usize> = (0..n).collect();
    for e in &ot.entries {
        let r = e.reference as usize - 1;
        let p = e.prediction as usize - 1;
        if crit.accepts(e.voxels, ot.ref_sizes[r], ot.pred_sizes[p]) {
            let a = find(&mut parent, r);
            let b = find(&mut parent, n_ref + p);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut refs = vec![0usize; n];
    let mut preds = vec![0usize; n];
    for node in 0..n {
        let root = find(&mut parent, node);
        if node < n_ref {
            refs[root] += 1;
        } else {
            preds[root] += 1;
        }
    }
    let mut counts = TaxonomyCounts::default();
    for root in 0..n {
        match (refs[root], preds[root]) {
            (0, 0) => {}
            (1, 0) => counts.df += 1,
            (0, 1) => counts.fa += 1,
            (1, 1) => counts.cd += 1,
            (r, p) => {
                match (r, p) {
                    (_, 1) => counts.m += 1,
                    (1, _) => counts.s += 1,
                    _ => counts.sm += 1,
                }
                counts.refs_in_multi += r;
                counts.preds_in_multi += p;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanopticResult {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Panoptic, segmentation and recognition quality at IoU threshold `tau`.
///
/// A reference is a true positive when any prediction reaches the threshold;
/// its segmentation quality is the best IoU among its predictions.
pub fn panoptic(ot: &OverlapTable, tau: f64) -> Result<PanopticResult> {
    let crit = MatchCriterion::iou(tau)?;
    let flags = detection_flags(ot, &crit);
    let mut best_iou = vec![0.0f64; ot.n_ref()];
    for e in &ot.entries {
        let iou = ot.iou(e);
        let slot = &mut best_iou[e.reference as usize - 1];
        if iou > *slot {
            *slot = iou;
        }
    }
    let tp = flags.detected_count();
    let fn_ = ot.n_ref() - tp;
    let fp = ot.n_pred() - flags.matched_count();
    let denom = 2 * tp + fp + fn_;
    let rq = if denom > 0 { 2.0 * tp as f64 / denom as f64 } else { 0.0 };
    let sq = if tp > 0 {
        let sum: f64 = flags
            .reference_detected
            .iter()
            .zip(&best_iou)
            .filter(|(&d, _)| d)
            .map(|(_, &iou)| iou)
            .sum();
        sum / tp as f64
    } else {
        0.0
    };
    Ok(PanopticResult {
        pq: sq * rq,
        sq,
        rq,
        tp,
        fp,
        fn_,
    })
}

/// Per-component DSC inside a nearest-reference Voronoi partition, averaged
/// over reference components with equal weight.
///
/// Distances are Euclidean in millimetres; voxels equidistant to several
/// components belong to the lowest label.
pub fn cc_dsc(reference: &ComponentLabeling, prediction: &LabelVolume) -> Result<f64> {
    let geometry = reference.geometry();
    geometry.ensure_same(prediction.geometry())?;
    if reference.count() == 0 {
        return Err(Error::EmptyReference);
    }
    if prediction.is_empty() {
        return Ok(0.0);
    }
    let cells = nearest_site(geometry, reference.labels(), axis_weights(geometry, true)).label;
    let k = reference.count();
    let mut pred_in_cell = vec![0usize; k];
    let mut hits = vec![0usize; k];
    for i in prediction.foreground_indices() {
        let cell = cells[i] as usize - 1;
        pred_in_cell[cell] += 1;
        if reference.labels()[i] != 0 {
            hits[cell] += 1;
        }
    }
    let sum: f64 = (0..k)
        .map(|c| 2.0 * hits[c] as f64 / (reference.sizes()[c] + pred_in_cell[c]) as f64)
        .sum();
    Ok(sum / k as f64)
}

/// Pooled counts behind [`pooled_f1`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl DetectionCounts {
    pub fn from_table(ot: &OverlapTable, crit: &MatchCriterion) -> Self {
        let flags = detection_flags(ot, crit);
        let tp = flags.detected_count();
        Self {
            tp,
            fn_: ot.n_ref() - tp,
            fp: ot.n_pred() - flags.matched_count(),
        }
    }

    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }
}

/// Detection F1 from TP/FP/FN pooled across all cases.
pub fn pooled_f1(ots: &[OverlapTable], crit: &MatchCriterion) -> Result<f64> {
    crit.validate()?;
    let mut pooled = DetectionCounts::default();
    for ot in ots {
        let c = DetectionCounts::from_table(ot, crit);
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.fn_ += c.fn_;
    }
    pooled.f1().ok_or(Error::EmptyPopulation)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratificationAxis {
    Volume,
    SuvMax,
}

/// One reference lesion in a pooled population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionRecord {
    pub volume_ml: f64,
    pub suv_max: Option<f64>,
    pub detected: bool,
}

/// Pairs reference component statistics with detection flags.
pub fn lesion_records(stats: &ComponentStats, flags: &DetectionFlags) -> Vec<LesionRecord> {
    stats
        .iter()
        .zip(&flags.reference_detected)
        .map(|(s, &detected)| LesionRecord {
            volume_ml: s.volume_ml,
            suv_max: s.suv_max,
            detected,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileBin {
    pub lo: f64,
    pub hi: f64,
    pub total: usize,
    pub detected: usize,
    /// `None` for bins without lesions.
    pub sensitivity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileReport {
    pub axis: StratificationAxis,
    /// Eleven edges: minimum, the nine inner deciles, maximum.
    pub edges: Vec<f64>,
    pub bins: Vec<DecileBin>,
}

pub const MIN_STRATIFIED_LESIONS: usize = 10;

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Detection sensitivity per decile of lesion volume or SUVmax.
///
/// Bins are half-open `[e_k, e_{k+1})` except the last, which is closed, so
/// identical values always share one bin.
pub fn stratified_sensitivity(lesions: &[LesionRecord], axis: StratificationAxis) -> Result<DecileReport> {
    if lesions.len() < MIN_STRATIFIED_LESIONS {
        return Err(Error::InsufficientPopulation {
            required: MIN_STRATIFIED_LESIONS,
            found: lesions.len(),
        });
    }
    let values: Vec<f64> = lesions
        .iter()
        .map(|l| match axis {
            StratificationAxis::Volume => Ok(l.volume_ml),
            StratificationAxis::SuvMax => l.suv_max.ok_or(Error::MissingIntensity),
        })
        .collect::<Result<_>>()?;
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (0..=10).map(|k| quantile_sorted(&sorted, k as f64 / 10.0)).collect();
    let mut bins: Vec<DecileBin> = (0..10)
        .map(|k| DecileBin {
            lo: edges[k],
            hi: edges[k + 1],
            total: 0,
            detected: 0,
            sensitivity: None,
        })
        .collect();
    for (lesion, &v) in lesions.iter().zip(&values) {
        let k = edges[..10].iter().rposition(|&e| e <= v).unwrap_or(0);
        bins[k].total += 1;
        bins[k].detected += usize::from(lesion.detected);
    }
    for b in &mut bins {
        b.sensitivity = (b.total > 0).then(|| b.detected as f64 / b.total as f64);
    }
    Ok(DecileReport { axis, edges, bins })
}
