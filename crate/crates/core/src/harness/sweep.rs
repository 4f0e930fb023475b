//! Pooled lesion-level analyses over evaluated cases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::evaluate::{CaseDetail, MetricsRow};
use crate::lesion_metrics::{
    detection_flags, error_taxonomy, pooled_f1, sensitivity_sweep, stratified_sensitivity, sweep_criteria,
    DecileReport, LesionRecord, MatchCriterion, StratificationAxis, SweepPoint, TaxonomyCounts, MIN_STRATIFIED_LESIONS,
};
use crate::ranking::{classification_summary, ClassificationSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyPoint {
    pub criterion: MatchCriterion,
    pub counts: TaxonomyCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSweep {
    pub algorithm: String,
    pub cases: usize,
    pub sensitivity: Vec<SweepPoint>,
    pub taxonomy: Vec<TaxonomyPoint>,
    /// Pooled detection F1 at the one-voxel criterion.
    pub pooled_f1: Option<f64>,
    pub volume_deciles: Option<DecileReport>,
    pub suv_max_deciles: Option<DecileReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub taus: Vec<f64>,
    pub algorithms: Vec<AlgorithmSweep>,
}

fn group_by_algorithm(details: &[CaseDetail]) -> BTreeMap<&str, Vec<&CaseDetail>> {
    let mut groups: BTreeMap<&str, Vec<&CaseDetail>> = BTreeMap::new();
    for d in details {
        groups.entry(d.algorithm.as_str()).or_default().push(d);
    }
    groups
}

fn deciles(records: &[LesionRecord], axis: StratificationAxis) -> Result<Option<DecileReport>> {
    if records.len() < MIN_STRATIFIED_LESIONS {
        return Ok(None);
    }
    match stratified_sensitivity(records, axis) {
        Ok(r) => Ok(Some(r)),
        Err(Error::MissingIntensity) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Sensitivity sweep, taxonomy curves, pooled F1 and decile stratification
/// per algorithm.
pub fn sweep_report(details: &[CaseDetail], taus: &[f64]) -> Result<SweepReport> {
    let criteria = sweep_criteria(taus)?;
    let mut algorithms = Vec::new();
    for (name, cases) in group_by_algorithm(details) {
        let tables: Vec<_> = cases.iter().map(|d| d.overlap.clone()).collect();
        let sensitivity = match sensitivity_sweep(&tables, taus) {
            Ok(points) => points,
            Err(Error::EmptyPopulation) => Vec::new(),
            Err(e) => return Err(e),
        };
        let taxonomy = criteria
            .iter()
            .map(|c| TaxonomyPoint {
                criterion: *c,
                counts: tables
                    .iter()
                    .map(|t| error_taxonomy(t, c))
                    .fold(TaxonomyCounts::default(), |a, b| a + b),
            })
            .collect();
        let pooled_f1 = match pooled_f1(&tables, &MatchCriterion::OneVoxel) {
            Ok(f) => Some(f),
            Err(Error::EmptyPopulation) => None,
            Err(e) => return Err(e),
        };
        let mut records = Vec::new();
        for d in &cases {
            let flags = detection_flags(&d.overlap, &MatchCriterion::OneVoxel);
            for (lesion, &detected) in d.lesions.iter().zip(&flags.reference_detected) {
                records.push(LesionRecord {
                    volume_ml: lesion.volume_ml,
                    suv_max: lesion.suv_max,
                    detected,
                });
            }
        }
        algorithms.push(AlgorithmSweep {
            algorithm: name.to_string(),
            cases: cases.len(),
            sensitivity,
            taxonomy,
            pooled_f1,
            volume_deciles: deciles(&records, StratificationAxis::Volume)?,
            suv_max_deciles: deciles(&records, StratificationAxis::SuvMax)?,
        });
    }
    Ok(SweepReport {
        taus: taus.to_vec(),
        algorithms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmClassification {
    pub algorithm: String,
    #[serde(flatten)]
    pub summary: ClassificationSummary,
}

/// Patient-level classification per algorithm from successful rows.
pub fn classification_report(rows: &[MetricsRow]) -> Vec<AlgorithmClassification> {
    let mut groups: BTreeMap<&str, Vec<(bool, bool)>> = BTreeMap::new();
    for r in rows {
        if let Some(m) = &r.metrics {
            groups
                .entry(r.algorithm.as_str())
                .or_default()
                .push((m.reference_empty, m.prediction_empty));
        }
    }
    groups
        .into_iter()
        .map(|(name, flags)| AlgorithmClassification {
            algorithm: name.to_string(),
            summary: classification_summary(flags),
        })
        .collect()
}
