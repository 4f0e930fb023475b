//! Per-case evaluation and the parallel batch driver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{CaseManifest, ManifestEntry};
use crate::components::{
    component_stats, label_components, overlap_table, ComponentLabeling, Connectivity, OverlapTable,
};
use crate::io::{read_intensity_file, read_label_file};
use crate::lesion_metrics::{
    cc_dsc, default_tau_grid, error_taxonomy, fnv, fpv, panoptic, sweep_criteria, DetectionCounts, MatchCriterion,
    PanopticResult, TaxonomyCounts,
};
use crate::ranking::{MetricTriplet, SubsetKey};
use crate::volume::{IntensityVolume, LabelVolume};
use crate::voxel_metrics::{
    dsc, dsc_all_with, nsd, volume_difference, volume_ratio, volumetric_similarity, NsdConfig, RatioConfig,
};
use crate::{Error, Result};

/// Environment variable that overrides [`EvaluationConfig::workers`].
pub const WORKERS_ENV: &str = "LESION_EVAL_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub connectivity: Connectivity,
    pub nsd: NsdConfig,
    pub ratio: RatioConfig,
    /// IoU thresholds of the sensitivity sweep (the one-voxel point is always added).
    pub taus: Vec<f64>,
    pub pq_tau: f64,
    /// Criterion behind per-case detection counts and the pooled F1.
    pub f1_criterion: MatchCriterion,
    /// Score of `dsc_all` when reference and prediction are both empty.
    pub dsc_all_both_empty: f64,
    /// Worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::default(),
            nsd: NsdConfig::default(),
            ratio: RatioConfig::default(),
            taus: default_tau_grid(),
            pq_tau: 0.1,
            f1_criterion: MatchCriterion::OneVoxel,
            dsc_all_both_empty: 1.0,
            workers: None,
            seed: 0,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        self.nsd.validate()?;
        self.ratio.validate()?;
        sweep_criteria(&self.taus)?;
        MatchCriterion::iou(self.pq_tau)?;
        self.f1_criterion.validate()?;
        if !(0.0..=1.0).contains(&self.dsc_all_both_empty) {
            return Err(Error::InvalidConfig("dsc_all_both_empty must lie in [0, 1]".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Reads `{}`-style JSON; absent fields take their defaults.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: Self =
            serde_json::from_slice(bytes).map_err(|e| Error::InvalidConfig(format!("evaluation config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// All per-case metrics of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub reference_empty: bool,
    pub prediction_empty: bool,
    /// Absent for lesion-negative cases.
    pub dsc: Option<f64>,
    pub dsc_all: f64,
    pub fpv_ml: f64,
    /// Absent for lesion-negative cases.
    pub fnv_ml: Option<f64>,
    pub nsd: Option<f64>,
    /// Absent when both masks are empty.
    pub vs: Option<f64>,
    pub volume_difference_ml: f64,
    pub volume_ratio: f64,
    pub n_ref: usize,
    pub n_pred: usize,
    pub detection: DetectionCounts,
    /// Taxonomy at the one-voxel criterion.
    pub taxonomy: TaxonomyCounts,
    pub panoptic: PanopticResult,
    pub cc_dsc: Option<f64>,
}

impl CaseMetrics {
    pub fn triplet(&self) -> MetricTriplet {
        MetricTriplet {
            dsc: self.dsc,
            fpv_ml: self.fpv_ml,
            fnv_ml: self.fnv_ml,
        }
    }
}

/// Size and uptake of one reference lesion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionSize {
    pub volume_ml: f64,
    pub suv_max: Option<f64>,
}

/// Metrics plus the intermediate products needed for pooled analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseEvaluation {
    pub metrics: CaseMetrics,
    pub overlap: OverlapTable,
    pub lesions: Vec<LesionSize>,
}

/// Reference mask with its labeling and lesion sizes, shared across predictions.
pub struct PreparedReference {
    mask: LabelVolume,
    labeling: ComponentLabeling,
    lesions: Vec<LesionSize>,
}

impl PreparedReference {
    pub fn new(mask: LabelVolume, intensity: Option<&IntensityVolume>, connectivity: Connectivity) -> Result<Self> {
        let labeling = label_components(&mask, connectivity);
        let lesions = component_stats(&labeling, intensity)?
            .into_iter()
            .map(|s| LesionSize {
                volume_ml: s.volume_ml,
                suv_max: s.suv_max,
            })
            .collect();
        Ok(Self {
            mask,
            labeling,
            lesions,
        })
    }
}

/// Evaluates one prediction against its reference.
pub fn evaluate_case(
    reference: &LabelVolume,
    prediction: &LabelVolume,
    intensity: Option<&IntensityVolume>,
    cfg: &EvaluationConfig,
) -> Result<CaseEvaluation> {
    reference.geometry().ensure_same(prediction.geometry())?;
    let prepared = PreparedReference::new(reference.clone(), intensity, cfg.connectivity)?;
    evaluate_prepared(&prepared, prediction, cfg)
}

pub fn evaluate_prepared(
    reference: &PreparedReference,
    prediction: &LabelVolume,
    cfg: &EvaluationConfig,
) -> Result<CaseEvaluation> {
    let g = &reference.mask;
    g.geometry().ensure_same(prediction.geometry())?;
    let pred_labels = label_components(prediction, cfg.connectivity);
    let ot = overlap_table(&reference.labeling, &pred_labels)?;
    let positive = !g.is_empty();
    let metrics = CaseMetrics {
        reference_empty: !positive,
        prediction_empty: prediction.is_empty(),
        dsc: positive.then(|| dsc(g, prediction)).transpose()?,
        dsc_all: dsc_all_with(g, prediction, cfg.dsc_all_both_empty)?,
        fpv_ml: fpv(&ot),
        fnv_ml: positive.then(|| fnv(&ot)),
        nsd: positive.then(|| nsd(g, prediction, &cfg.nsd)).transpose()?,
        vs: match volumetric_similarity(g, prediction) {
            Ok(v) => Some(v),
            Err(Error::BothEmpty) => None,
            Err(e) => return Err(e),
        },
        volume_difference_ml: volume_difference(g, prediction)?,
        volume_ratio: volume_ratio(g, prediction, &cfg.ratio)?,
        n_ref: ot.n_ref(),
        n_pred: ot.n_pred(),
        detection: DetectionCounts::from_table(&ot, &cfg.f1_criterion),
        taxonomy: error_taxonomy(&ot, &MatchCriterion::OneVoxel),
        panoptic: panoptic(&ot, cfg.pq_tau)?,
        cc_dsc: positive.then(|| cc_dsc(&reference.labeling, prediction)).transpose()?,
    };
    Ok(CaseEvaluation {
        metrics,
        overlap: ot,
        lesions: reference.lesions.clone(),
    })
}

/// One (case, algorithm) row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub case_id: String,
    pub subset: SubsetKey,
    pub algorithm: String,
    pub metrics: Option<CaseMetrics>,
    pub error: Option<String>,
}

/// Lesion-level detail of one (case, algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDetail {
    pub case_id: String,
    pub subset: SubsetKey,
    pub algorithm: String,
    pub overlap: OverlapTable,
    pub lesions: Vec<LesionSize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Sorted by (case_id, algorithm).
    pub rows: Vec<MetricsRow>,
    /// Successful rows only, same order.
    pub details: Vec<CaseDetail>,
}

impl Evaluation {
    pub fn algorithms(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rows.iter().map(|r| r.algorithm.clone()).collect();
        names.sort();
        names.dedup();
        names
    }
}

fn evaluate_entry(entry: &ManifestEntry, cfg: &EvaluationConfig) -> Vec<(MetricsRow, Option<CaseDetail>)> {
    let prepared = (|| {
        let mask = read_label_file(&entry.reference)?;
        let intensity = entry.intensity.as_deref().map(read_intensity_file).transpose()?;
        PreparedReference::new(mask, intensity.as_ref(), cfg.connectivity)
    })();
    entry
        .predictions
        .iter()
        .map(|(algorithm, path)| {
            let result = prepared
                .as_ref()
                .map_err(|e| format!("reference: {e}"))
                .and_then(|reference| {
                    read_label_file(path)
                        .and_then(|p| evaluate_prepared(reference, &p, cfg))
                        .map_err(|e| e.to_string())
                });
            let mut row = MetricsRow {
                case_id: entry.case_id.clone(),
                subset: entry.subset,
                algorithm: algorithm.clone(),
                metrics: None,
                error: None,
            };
            match result {
                Ok(eval) => {
                    row.metrics = Some(eval.metrics);
                    let detail = CaseDetail {
                        case_id: entry.case_id.clone(),
                        subset: entry.subset,
                        algorithm: algorithm.clone(),
                        overlap: eval.overlap,
                        lesions: eval.lesions,
                    };
                    (row, Some(detail))
                }
                Err(e) => {
                    row.error = Some(e);
                    (row, None)
                }
            }
        })
        .collect()
}

/// Worker count from `WORKERS_ENV`, falling back to `configured`.
pub fn resolve_workers(configured: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidConfig(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(configured),
    }
}

/// Runs `f` on a dedicated pool with `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluates every (case, algorithm) pair of the manifest in parallel.
///
/// Failures are recorded in the row's `error` field; the call only fails when
/// no pair could be evaluated.
pub fn evaluate_all(manifest: &CaseManifest, cfg: &EvaluationConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let results: Vec<Vec<(MetricsRow, Option<CaseDetail>)>> = with_workers(cfg.workers, || {
        manifest
            .cases
            .par_iter()
            .map(|entry| evaluate_entry(entry, cfg))
            .collect()
    })?;
    let mut pairs: Vec<(MetricsRow, Option<CaseDetail>)> = results.into_iter().flatten().collect();
    pairs.sort_by(|a, b| (&a.0.case_id, &a.0.algorithm).cmp(&(&b.0.case_id, &b.0.algorithm)));
    if pairs.iter().all(|(r, _)| r.error.is_some()) {
        return Err(Error::NoSuccessfulCases);
    }
    let (rows, details): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(Evaluation {
        rows,
        details: details.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::GridGeometry;

    fn mask(dims: [usize; 3], boxes: &[([usize; 3], [usize; 3])]) -> LabelVolume {
        let g = GridGeometry::new(dims, [2.0, 2.0, 3.0]).unwrap();
        let mut m = LabelVolume::empty(g);
        for (lo, hi) in boxes {
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        m.set(x, y, z, true);
                    }
                }
            }
        }
        m
    }

    #[test]
    fn perfect_prediction() {
        let g = mask([16; 3], &[([1, 1, 1], [3, 3, 3]), ([8, 8, 8], [12, 10, 9])]);
        let e = evaluate_case(&g, &g, None, &EvaluationConfig::default())
            .unwrap()
            .metrics;
        assert_eq!(e.dsc, Some(1.0));
        assert_eq!(e.fpv_ml, 0.0);
        assert_eq!(e.fnv_ml, Some(0.0));
        assert_eq!(e.nsd, Some(1.0));
        assert_eq!(e.vs, Some(1.0));
        assert_eq!(e.volume_ratio, 1.0);
        assert_eq!(e.taxonomy.cd, 2);
        assert_eq!(e.cc_dsc, Some(1.0));
        assert_eq!(e.panoptic.pq, 1.0);
    }

    #[test]
    fn empty_reference_only_scores_false_positives() {
        let g = mask([8; 3], &[]);
        let p = mask([8; 3], &[([0, 0, 0], [1, 0, 0])]);
        let e = evaluate_case(&g, &p, None, &EvaluationConfig::default())
            .unwrap()
            .metrics;
        assert!(e.reference_empty);
        assert_eq!(e.triplet().dsc, None);
        assert_eq!(e.triplet().fnv_ml, None);
        assert_eq!(e.fpv_ml, 2.0 * g.geometry().voxel_volume_ml());
        assert_eq!(e.dsc_all, 0.0);
        assert_eq!(e.cc_dsc, None);

        let both = evaluate_case(&g, &g, None, &EvaluationConfig::default())
            .unwrap()
            .metrics;
        assert_eq!(both.dsc_all, 1.0);
        assert_eq!(both.vs, None);
        assert_eq!(both.fpv_ml, 0.0);
    }

    #[test]
    fn geometry_must_agree() {
        let g = mask([8; 3], &[([0, 0, 0], [1, 1, 1])]);
        let p = mask([8, 8, 9], &[]);
        assert!(matches!(
            evaluate_case(&g, &p, None, &EvaluationConfig::default()),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = EvaluationConfig::from_json(b"{}").unwrap();
        assert_eq!(cfg, EvaluationConfig::default());
        assert_eq!(cfg.taus.len(), 50);
        let cfg = EvaluationConfig::from_json(br#"{"connectivity": 6, "pq_tau": 0.5}"#).unwrap();
        assert_eq!(cfg.connectivity, Connectivity::Six);
        assert!(EvaluationConfig::from_json(br#"{"connectivity": 7}"#).is_err());
        assert!(EvaluationConfig::from_json(br#"{"workers": 0}"#).is_err());
        assert!(EvaluationConfig::from_json(br#"{"bogus": 1}"#).is_err());
    }
}
