//! CSV/JSON report emission and the metrics-file reader.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::evaluate::{CaseDetail, MetricsRow};
use super::sweep::{AlgorithmClassification, SweepReport};
use crate::ranking::{AlgorithmSummary, BootstrapSummary, CaseResult, Metric, MetricTriplet, RankTable, SubsetKey};
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const DETAILS_FILE: &str = "details.json";
pub const LEADERBOARD_FILE: &str = "leaderboard.csv";
pub const RANKS_FILE: &str = "ranks.json";
pub const BOOTSTRAP_FILE: &str = "bootstrap.json";
pub const SWEEP_FILE: &str = "sweep.json";
pub const TAXONOMY_FILE: &str = "taxonomy.json";
pub const CLASSIFICATION_FILE: &str = "classification.json";

/// Flat CSV form of a [`MetricsRow`]; undefined values are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub case_id: String,
    pub subset: SubsetKey,
    pub algorithm: String,
    pub reference_empty: Option<bool>,
    pub prediction_empty: Option<bool>,
    pub dsc: Option<f64>,
    pub dsc_all: Option<f64>,
    pub fpv_ml: Option<f64>,
    pub fnv_ml: Option<f64>,
    pub nsd: Option<f64>,
    pub vs: Option<f64>,
    pub volume_difference_ml: Option<f64>,
    pub volume_ratio: Option<f64>,
    pub n_ref: Option<usize>,
    pub n_pred: Option<usize>,
    pub tp: Option<usize>,
    pub fp: Option<usize>,
    #[serde(rename = "fn")]
    pub fn_: Option<usize>,
    pub cd: Option<usize>,
    pub fa: Option<usize>,
    pub df: Option<usize>,
    pub m: Option<usize>,
    pub s: Option<usize>,
    pub sm: Option<usize>,
    pub pq: Option<f64>,
    pub sq: Option<f64>,
    pub rq: Option<f64>,
    pub cc_dsc: Option<f64>,
    pub error: Option<String>,
}

impl From<&MetricsRow> for MetricsRecord {
    fn from(row: &MetricsRow) -> Self {
        let m = row.metrics.as_ref();
        MetricsRecord {
            case_id: row.case_id.clone(),
            subset: row.subset,
            algorithm: row.algorithm.clone(),
            reference_empty: m.map(|m| m.reference_empty),
            prediction_empty: m.map(|m| m.prediction_empty),
            dsc: m.and_then(|m| m.dsc),
            dsc_all: m.map(|m| m.dsc_all),
            fpv_ml: m.map(|m| m.fpv_ml),
            fnv_ml: m.and_then(|m| m.fnv_ml),
            nsd: m.and_then(|m| m.nsd),
            vs: m.and_then(|m| m.vs),
            volume_difference_ml: m.map(|m| m.volume_difference_ml),
            volume_ratio: m.map(|m| m.volume_ratio),
            n_ref: m.map(|m| m.n_ref),
            n_pred: m.map(|m| m.n_pred),
            tp: m.map(|m| m.detection.tp),
            fp: m.map(|m| m.detection.fp),
            fn_: m.map(|m| m.detection.fn_),
            cd: m.map(|m| m.taxonomy.cd),
            fa: m.map(|m| m.taxonomy.fa),
            df: m.map(|m| m.taxonomy.df),
            m: m.map(|m| m.taxonomy.m),
            s: m.map(|m| m.taxonomy.s),
            sm: m.map(|m| m.taxonomy.sm),
            pq: m.map(|m| m.panoptic.pq),
            sq: m.map(|m| m.panoptic.sq),
            rq: m.map(|m| m.panoptic.rq),
            cc_dsc: m.and_then(|m| m.cc_dsc),
            error: row.error.clone(),
        }
    }
}

impl MetricsRecord {
    /// Official triplet, or `None` for failed rows.
    pub fn case_result(&self) -> Result<Option<CaseResult>> {
        if self.error.is_some() {
            return Ok(None);
        }
        let fpv_ml = self
            .fpv_ml
            .ok_or_else(|| Error::SchemaViolation(format!("{} / {}: fpv_ml missing", self.case_id, self.algorithm)))?;
        if self.reference_empty == Some(false) && (self.dsc.is_none() || self.fnv_ml.is_none()) {
            return Err(Error::SchemaViolation(format!(
                "{} / {}: lesion-positive case without dsc/fnv",
                self.case_id, self.algorithm
            )));
        }
        Ok(Some(CaseResult {
            case_id: self.case_id.clone(),
            subset: self.subset,
            algorithm: self.algorithm.clone(),
            metrics: MetricTriplet {
                dsc: self.dsc,
                fpv_ml,
                fnv_ml: self.fnv_ml,
            },
        }))
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(MetricsRecord::from(row))?;
    }
    w.into_inner()
        .map_err(|e| Error::SchemaViolation(format!("csv buffer: {e}")))
}

pub fn read_metrics_csv(bytes: &[u8]) -> Result<Vec<MetricsRecord>> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRecord>, _>>()
        .map_err(|e| Error::SchemaViolation(format!("metrics table: {e}")))
}

/// Official per-case triplets from a metrics file, skipping failed rows.
pub fn read_case_results(path: &Path) -> Result<Vec<CaseResult>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for record in read_metrics_csv(&bytes)? {
        out.extend(record.case_result()?);
    }
    Ok(out)
}

/// Reads per-subset aggregates from a CSV with an `algorithm` column and one
/// `{metric}_{SUBSET}` column per metric and subset (e.g. `dsc_FDG_UKT`).
/// Other columns are ignored.
pub fn read_summaries_csv(bytes: &[u8]) -> Result<Vec<AlgorithmSummary>> {
    let mut reader = csv::Reader::from_reader(bytes);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaViolation(format!("summaries: missing column {name}")))
    };
    let name_col = find("algorithm")?;
    let mut cols = [[0usize; 4]; 3];
    for metric in Metric::ALL {
        for (k, subset) in SubsetKey::ALL.iter().enumerate() {
            cols[metric.index()][k] = find(&format!("{}_{subset}", metric.name()))?;
        }
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut values = [[0.0; 4]; 3];
        for m in 0..3 {
            for k in 0..4 {
                let cell = &record[cols[m][k]];
                values[m][k] = cell
                    .trim()
                    .parse()
                    .map_err(|e| Error::SchemaViolation(format!("summaries: {cell:?}: {e}")))?;
            }
        }
        out.push(AlgorithmSummary {
            algorithm: record[name_col].to_string(),
            values,
        });
    }
    Ok(out)
}

/// Fixed 4-decimal rendering; exact binary ties round half to even.
pub fn format_4dp(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

/// Leaderboard rows sorted by weighted rank, with per-subset values and ranks.
pub fn leaderboard_csv(table: &RankTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["position".to_string(), "algorithm".to_string()];
    for metric in Metric::ALL {
        for col in &table.columns {
            header.push(format!("{}_{col}", metric.name()));
            header.push(format!("{}_{col}_rank", metric.name()));
        }
        header.push(format!("{}_rank", metric.name()));
    }
    header.push("weighted_rank".into());
    header.push("final_rank".into());
    w.write_record(&header)?;
    for row in table.sorted_rows() {
        let mut rec = vec![
            row.position.map(|p| p.to_string()).unwrap_or_default(),
            row.algorithm.clone(),
        ];
        for metric in Metric::ALL {
            let m = &row.metrics[metric.index()];
            for (v, r) in m.values.iter().zip(&m.ranks) {
                rec.push(format_4dp(*v));
                rec.push(format_4dp(*r));
            }
            rec.push(format_4dp(m.rank));
        }
        rec.push(format_4dp(row.weighted_rank));
        rec.push(format_4dp(row.final_rank));
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::SchemaViolation(format!("csv buffer: {e}")))
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::SchemaViolation(format!("{}: {e}", path.display())))
}

/// Everything a run may emit; absent parts are skipped.
#[derive(Debug, Default, Clone, Copy)]
pub struct Reports<'a> {
    pub metrics: Option<&'a [MetricsRow]>,
    pub details: Option<&'a [CaseDetail]>,
    pub classification: Option<&'a [AlgorithmClassification]>,
    pub ranking: Option<&'a RankTable>,
    pub bootstrap: Option<&'a BootstrapSummary>,
    pub sweep: Option<&'a SweepReport>,
}

/// Writes the present reports into `out_dir` and returns the written paths.
pub fn emit_reports(out_dir: &Path, reports: &Reports<'_>) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    if let Some(rows) = reports.metrics {
        files.push((METRICS_FILE, metrics_csv(rows)?));
    }
    if let Some(details) = reports.details {
        files.push((DETAILS_FILE, to_json_bytes(&details)?));
    }
    if let Some(c) = reports.classification {
        files.push((CLASSIFICATION_FILE, to_json_bytes(&c)?));
    }
    if let Some(t) = reports.ranking {
        files.push((LEADERBOARD_FILE, leaderboard_csv(t)?));
        files.push((RANKS_FILE, to_json_bytes(t)?));
    }
    if let Some(b) = reports.bootstrap {
        files.push((BOOTSTRAP_FILE, to_json_bytes(b)?));
    }
    if let Some(s) = reports.sweep {
        files.push((SWEEP_FILE, to_json_bytes(s)?));
        let curves: Vec<_> = s
            .algorithms
            .iter()
            .map(|a| serde_json::json!({ "algorithm": a.algorithm, "taxonomy": a.taxonomy }))
            .collect();
        files.push((TAXONOMY_FILE, to_json_bytes(&curves)?));
    }
    if files.is_empty() {
        return Err(Error::InvalidConfig("nothing to emit".into()));
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = out_dir.join(name);
        write_bytes(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::{official_ranking, AlgorithmSummary, RankWeights};

    #[test]
    fn four_decimals_round_half_even() {
        assert_eq!(format_4dp(8.40625), "8.4062");
        assert_eq!(format_4dp(19.53125), "19.5312");
        assert_eq!(format_4dp(6.0625), "6.0625");
        assert_eq!(format_4dp(-0.00001), "0.0000");
        assert_eq!(format_4dp(2.0), "2.0000");
    }

    #[test]
    fn leaderboard_layout() {
        let s: Vec<AlgorithmSummary> = (0..3)
            .map(|i| AlgorithmSummary {
                algorithm: format!("alg{i}"),
                values: [[0.5 + 0.1 * i as f64; 4], [1.0; 4], [3.0 - i as f64; 4]],
            })
            .collect();
        let mut t = official_ranking(&s, RankWeights::default()).unwrap();
        t.assign_positions(crate::ranking::default_team);
        let csv = String::from_utf8(leaderboard_csv(&t).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 2 + 3 * 9 + 2);
        assert!(lines[1].starts_with("1,alg2,"));
        let final_sum: f64 = lines[1..]
            .iter()
            .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert_eq!(final_sum, 6.0);
    }

    #[test]
    fn metrics_records_round_trip() {
        let rec = MetricsRecord {
            case_id: "c1".into(),
            subset: SubsetKey::ALL[2],
            algorithm: "a".into(),
            reference_empty: Some(true),
            prediction_empty: Some(false),
            dsc: None,
            dsc_all: Some(0.0),
            fpv_ml: Some(0.1 + 0.2),
            fnv_ml: None,
            nsd: None,
            vs: Some(0.0),
            volume_difference_ml: Some(0.3),
            volume_ratio: Some(26.0),
            n_ref: Some(0),
            n_pred: Some(1),
            tp: Some(0),
            fp: Some(1),
            fn_: Some(0),
            cd: Some(0),
            fa: Some(1),
            df: Some(0),
            m: Some(0),
            s: Some(0),
            sm: Some(0),
            pq: Some(0.0),
            sq: Some(0.0),
            rq: Some(0.0),
            cc_dsc: None,
            error: None,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&rec).unwrap();
        let bytes = w.into_inner().unwrap();
        let back = read_metrics_csv(&bytes).unwrap();
        assert_eq!(back, vec![rec.clone()]);
        let cr = back[0].case_result().unwrap().unwrap();
        assert_eq!(cr.metrics.fpv_ml, 0.1 + 0.2);
        assert_eq!(cr.metrics.dsc, None);

        let failed = MetricsRecord {
            error: Some("boom".into()),
            ..rec
        };
        assert_eq!(failed.case_result().unwrap(), None);
    }
}
