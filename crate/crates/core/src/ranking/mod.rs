//! Challenge ranking.
//!
//! The official scheme (R1) averages each metric per tracer/center subset,
//! ranks algorithms within every subset, averages the subset ranks per metric
//! and combines the three metric ranks with fixed weights. Four alternative
//! schemes (R2–R5), bootstrap stability and patient-level classification live
//! alongside it.

mod bootstrap;
mod classification;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use bootstrap::{
    bootstrap_ranks, bootstrap_ranks_with, AlgorithmBootstrap, BootstrapSummary, CaseSampler, UniformSampler,
    QUANTILE_LEVELS,
};
pub use classification::{classification_summary, ClassificationSummary};
pub use stats::{
    average_ranks, holm_adjust, signed_rank_test, wilcoxon_signed_rank, Alternative, SignedRankResult, EXACT_MAX_N,
    MIN_PAIRS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tracer {
    #[serde(rename = "FDG")]
    Fdg,
    #[serde(rename = "PSMA")]
    Psma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Center {
    #[serde(rename = "UKT")]
    Ukt,
    #[serde(rename = "LMU")]
    Lmu,
}

/// Tracer/center combination defining one ranking subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SubsetKey {
    pub tracer: Tracer,
    pub center: Center,
}

impl SubsetKey {
    /// The four subsets, in leaderboard column order.
    pub const ALL: [SubsetKey; 4] = [
        SubsetKey {
            tracer: Tracer::Fdg,
            center: Center::Ukt,
        },
        SubsetKey {
            tracer: Tracer::Psma,
            center: Center::Lmu,
        },
        SubsetKey {
            tracer: Tracer::Fdg,
            center: Center::Lmu,
        },
        SubsetKey {
            tracer: Tracer::Psma,
            center: Center::Ukt,
        },
    ];

    pub fn column(self) -> usize {
        SubsetKey::ALL
            .iter()
            .position(|&k| k == self)
            .expect("all subsets listed")
    }
}

impl fmt::Display for SubsetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.tracer {
            Tracer::Fdg => "FDG",
            Tracer::Psma => "PSMA",
        };
        let c = match self.center {
            Center::Ukt => "UKT",
            Center::Lmu => "LMU",
        };
        write!(f, "{t}_{c}")
    }
}

impl FromStr for SubsetKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SubsetKey::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::SchemaViolation(format!("unknown subset {s:?}")))
    }
}

impl TryFrom<String> for SubsetKey {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SubsetKey> for String {
    fn from(k: SubsetKey) -> String {
        k.to_string()
    }
}

/// Challenge metrics, in leaderboard column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Dsc,
    Fnv,
    Fpv,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Dsc, Metric::Fnv, Metric::Fpv];

    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Dsc)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dsc => "dsc",
            Metric::Fnv => "fnv",
            Metric::Fpv => "fpv",
        }
    }
}

/// The three official per-case metrics. DSC and FNV are absent for cases
/// without reference lesions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriplet {
    pub dsc: Option<f64>,
    pub fpv_ml: f64,
    pub fnv_ml: Option<f64>,
}

impl MetricTriplet {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Dsc => self.dsc,
            Metric::Fnv => self.fnv_ml,
            Metric::Fpv => Some(self.fpv_ml),
        }
    }
}

/// One algorithm's metrics on one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub subset: SubsetKey,
    pub algorithm: String,
    pub metrics: MetricTriplet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseInfo {
    pub case_id: String,
    pub subset: SubsetKey,
}

/// Complete per-case results: every algorithm evaluated on every case.
#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeData {
    algorithms: Vec<String>,
    cases: Vec<CaseInfo>,
    /// `values[a][c]` for algorithm `a` and case `c`.
    values: Vec<Vec<MetricTriplet>>,
}

impl ChallengeData {
    /// Assembles results, sorting algorithms and cases by name. Every algorithm
    /// must have exactly one result per case.
    pub fn from_results(results: &[CaseResult]) -> Result<Self> {
        let algorithms: Vec<String> = results
            .iter()
            .map(|r| r.algorithm.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut case_subsets: BTreeMap<&str, SubsetKey> = BTreeMap::new();
        for r in results {
            if let Some(prev) = case_subsets.insert(&r.case_id, r.subset) {
                if prev != r.subset {
                    return Err(Error::SchemaViolation(format!(
                        "case {} listed under subsets {prev} and {}",
                        r.case_id, r.subset
                    )));
                }
            }
        }
        let cases: Vec<CaseInfo> = case_subsets
            .iter()
            .map(|(&id, &subset)| CaseInfo {
                case_id: id.to_string(),
                subset,
            })
            .collect();
        let case_pos: BTreeMap<&str, usize> = cases.iter().enumerate().map(|(i, c)| (c.case_id.as_str(), i)).collect();
        let alg_pos: BTreeMap<&str, usize> = algorithms.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let mut slots: Vec<Vec<Option<MetricTriplet>>> = vec![vec![None; cases.len()]; algorithms.len()];
        for r in results {
            let slot = &mut slots[alg_pos[r.algorithm.as_str()]][case_pos[r.case_id.as_str()]];
            if slot.replace(r.metrics).is_some() {
                return Err(Error::DuplicateCase(format!("{} / {}", r.case_id, r.algorithm)));
            }
        }
        let values = slots
            .into_iter()
            .enumerate()
            .map(|(a, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(c, v)| {
                        v.ok_or_else(|| {
                            Error::SchemaViolation(format!(
                                "algorithm {} has no result for case {}",
                                algorithms[a], cases[c].case_id
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            algorithms,
            cases,
            values,
        })
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn cases(&self) -> &[CaseInfo] {
        &self.cases
    }

    pub fn value(&self, algorithm: usize, case: usize) -> &MetricTriplet {
        &self.values[algorithm][case]
    }

    /// Case indices grouped by subset, in [`SubsetKey::ALL`] order.
    pub fn subset_cases(&self) -> [Vec<usize>; 4] {
        let mut out: [Vec<usize>; 4] = Default::default();
        for (i, c) in self.cases.iter().enumerate() {
            out[c.subset.column()].push(i);
        }
        out
    }

    fn check_subsets(&self) -> Result<[Vec<usize>; 4]> {
        let groups = self.subset_cases();
        for (k, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::EmptySubset(SubsetKey::ALL[k].to_string()));
            }
        }
        Ok(groups)
    }
}

/// Per-subset aggregate of each metric for one algorithm; `values[metric][subset]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub values: [[f64; 4]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Mean,
    Median,
}

fn aggregate(values: &mut [f64], how: Aggregate) -> f64 {
    match how {
        Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                (values[n / 2 - 1] + values[n / 2]) / 2.0
            }
        }
    }
}

/// Aggregates one algorithm's cases per subset and metric. DSC and FNV use
/// lesion-positive cases only; FPV uses every case.
pub fn subset_aggregates<'a>(
    cases: impl IntoIterator<Item = (SubsetKey, &'a MetricTriplet)>,
    how: Aggregate,
) -> Result<[[f64; 4]; 3]> {
    let mut buckets: [[Vec<f64>; 4]; 3] = Default::default();
    let mut seen = [false; 4];
    for (subset, m) in cases {
        let col = subset.column();
        seen[col] = true;
        for metric in Metric::ALL {
            if let Some(v) = m.get(metric) {
                buckets[metric.index()][col].push(v);
            }
        }
    }
    let mut out = [[0.0; 4]; 3];
    for metric in Metric::ALL {
        for col in 0..4 {
            let bucket = &mut buckets[metric.index()][col];
            if bucket.is_empty() {
                let subset = SubsetKey::ALL[col];
                return Err(Error::EmptySubset(if seen[col] {
                    format!("{subset} (no lesion-positive cases for {})", metric.name())
                } else {
                    subset.to_string()
                }));
            }
            out[metric.index()][col] = aggregate(bucket, how);
        }
    }
    Ok(out)
}

/// Per-subset means for one algorithm.
pub fn subset_means<'a>(cases: impl IntoIterator<Item = (SubsetKey, &'a MetricTriplet)>) -> Result<[[f64; 4]; 3]> {
    subset_aggregates(cases, Aggregate::Mean)
}

/// Summaries for every algorithm in `data`.
pub fn summarize(data: &ChallengeData, how: Aggregate) -> Result<Vec<AlgorithmSummary>> {
    (0..data.algorithms.len())
        .map(|a| {
            let values = subset_aggregates(
                data.cases
                    .iter()
                    .enumerate()
                    .map(|(c, info)| (info.subset, &data.values[a][c])),
                how,
            )?;
            Ok(AlgorithmSummary {
                algorithm: data.algorithms[a].clone(),
                values,
            })
        })
        .collect()
}

/// Weights combining the three metric ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub dsc: f64,
    pub fpv: f64,
    pub fnv: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self {
            dsc: 0.5,
            fpv: 0.25,
            fnv: 0.25,
        }
    }
}

impl RankWeights {
    pub fn new(dsc: f64, fpv: f64, fnv: f64) -> Result<Self> {
        let w = Self { dsc, fpv, fnv };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.dsc, self.fpv, self.fnv];
        if all.iter().any(|&w| !(w.is_finite() && w > 0.0)) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "rank weights must be positive and sum to 1, got {all:?}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Dsc => self.dsc,
            Metric::Fnv => self.fnv,
            Metric::Fpv => self.fpv,
        }
    }
}

impl FromStr for RankWeights {
    type Err = Error;

    /// Parses `dsc,fpv,fnv`, e.g. `0.5,0.25,0.25`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidConfig(format!("weights {s:?}: {e}")))?;
        match parts[..] {
            [dsc, fpv, fnv] => RankWeights::new(dsc, fpv, fnv),
            _ => Err(Error::InvalidConfig(format!("expected three weights, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RankMethod {
    /// Mean per subset, rank per subset, average ranks.
    R1,
    /// Mean of subset means, rank once.
    R2,
    /// Median per subset, rank per subset, average ranks.
    R3,
    /// Rank per case, average case ranks per subset, then as R1.
    R4,
    /// Pairwise Wilcoxon + Holm per subset, rank by significant wins.
    R5,
}

impl FromStr for RankMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "R1" => Ok(RankMethod::R1),
            "R2" => Ok(RankMethod::R2),
            "R3" => Ok(RankMethod::R3),
            "R4" => Ok(RankMethod::R4),
            "R5" => Ok(RankMethod::R5),
            _ => Err(Error::InvalidConfig(format!("unknown ranking method {s:?}"))),
        }
    }
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Scores and ranks of one metric for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanks {
    /// Score per column (subset aggregate, mean case rank, or win count).
    pub values: Vec<f64>,
    /// Rank per column among all algorithms.
    pub ranks: Vec<f64>,
    /// Mean of `ranks`.
    pub rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub algorithm: String,
    /// Indexed by [`Metric::index`].
    pub metrics: Vec<MetricRanks>,
    pub weighted_rank: f64,
    /// Rank of `weighted_rank` among all algorithms (1 is best, ties averaged).
    pub final_rank: f64,
    /// Team position; set only on each team's best algorithm.
    pub position: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub method: RankMethod,
    pub weights: RankWeights,
    pub columns: Vec<String>,
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn row(&self, algorithm: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }

    /// Assigns team positions: teams are ordered by their best weighted rank
    /// and only that algorithm carries the position. Algorithms for which
    /// `team_of` returns `None` (reference methods) are skipped.
    pub fn assign_positions<F>(&mut self, team_of: F)
    where
        F: Fn(&str) -> Option<String>,
    {
        let mut best: BTreeMap<String, usize> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(team) = team_of(&row.algorithm) {
                let entry = best.entry(team).or_insert(i);
                if row.weighted_rank < self.rows[*entry].weighted_rank {
                    *entry = i;
                }
            }
        }
        let mut leaders: Vec<usize> = best.into_values().collect();
        leaders.sort_by(|&a, &b| {
            self.rows[a]
                .weighted_rank
                .total_cmp(&self.rows[b].weighted_rank)
                .then_with(|| self.rows[a].algorithm.cmp(&self.rows[b].algorithm))
        });
        for row in &mut self.rows {
            row.position = None;
        }
        for (pos, &i) in leaders.iter().enumerate() {
            self.rows[i].position = Some(pos + 1);
        }
    }

    /// Rows sorted by weighted rank, then name.
    pub fn sorted_rows(&self) -> Vec<&RankRow> {
        let mut rows: Vec<&RankRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.weighted_rank
                .total_cmp(&b.weighted_rank)
                .then_with(|| a.algorithm.cmp(&b.algorithm))
        });
        rows
    }
}

/// Default team naming: a trailing single-letter variant (`"IKIM A"`) is
/// stripped, and names starting with `*` are reference methods without a team.
pub fn default_team(algorithm: &str) -> Option<String> {
    if algorithm.starts_with('*') {
        return None;
    }
    let trimmed = match algorithm.rsplit_once(' ') {
        Some((team, variant)) if variant.len() == 1 && variant.chars().all(|c| c.is_ascii_uppercase()) => team,
        _ => algorithm,
    };
    Some(trimmed.to_string())
}

/// Ranks one column of scores across algorithms (1 = best).
fn rank_column(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    if higher_is_better {
        average_ranks(&scores.iter().map(|v| -v).collect::<Vec<_>>())
    } else {
        average_ranks(scores)
    }
}

/// Builds a rank table from per-algorithm score columns.
/// `scores[metric][algorithm][column]`; `higher[metric]` gives the direction.
fn table_from_scores(
    method: RankMethod,
    weights: RankWeights,
    algorithms: &[String],
    columns: Vec<String>,
    scores: [Vec<Vec<f64>>; 3],
    higher: [bool; 3],
) -> RankTable {
    let k = algorithms.len();
    let ncol = columns.len();
    let mut rows: Vec<RankRow> = algorithms
        .iter()
        .map(|a| RankRow {
            algorithm: a.clone(),
            metrics: Vec::with_capacity(3),
            weighted_rank: 0.0,
            final_rank: 0.0,
            position: None,
        })
        .collect();
    for metric in Metric::ALL {
        let m = metric.index();
        let mut ranks = vec![vec![0.0; ncol]; k];
        for col in 0..ncol {
            let column: Vec<f64> = (0..k).map(|a| scores[m][a][col]).collect();
            for (a, r) in rank_column(&column, higher[m]).into_iter().enumerate() {
                ranks[a][col] = r;
            }
        }
        for (a, row) in rows.iter_mut().enumerate() {
            let rank = ranks[a].iter().sum::<f64>() / ncol as f64;
            row.weighted_rank += weights.get(metric) * rank;
            row.metrics.push(MetricRanks {
                values: scores[m][a].clone(),
                ranks: ranks[a].clone(),
                rank,
            });
        }
    }
    let weighted: Vec<f64> = rows.iter().map(|r| r.weighted_rank).collect();
    for (row, f) in rows.iter_mut().zip(average_ranks(&weighted)) {
        row.final_rank = f;
    }
    RankTable {
        method,
        weights,
        columns,
        rows,
    }
}

fn subset_columns() -> Vec<String> {
    SubsetKey::ALL.iter().map(ToString::to_string).collect()
}

fn check_algorithms(k: usize) -> Result<()> {
    if k < 2 {
        Err(Error::InsufficientAlgorithms(k))
    } else {
        Ok(())
    }
}

/// Ranks per-subset summaries with the subset-wise scheme used by R1 and R3.
pub fn rank_summaries(summaries: &[AlgorithmSummary], weights: RankWeights, method: RankMethod) -> Result<RankTable> {
    weights.validate()?;
    check_algorithms(summaries.len())?;
    let algorithms: Vec<String> = summaries.iter().map(|s| s.algorithm.clone()).collect();
    let scores = Metric::ALL.map(|metric| summaries.iter().map(|s| s.values[metric.index()].to_vec()).collect());
    Ok(table_from_scores(
        method,
        weights,
        &algorithms,
        subset_columns(),
        scores,
        Metric::ALL.map(Metric::higher_is_better),
    ))
}

/// The official ranking (R1) from per-subset means.
pub fn official_ranking(summaries: &[AlgorithmSummary], weights: RankWeights) -> Result<RankTable> {
    rank_summaries(summaries, weights, RankMethod::R1)
}

/// R2: average the four subset means into one score per metric and rank once.
pub fn aggregate_then_rank(summaries: &[AlgorithmSummary], weights: RankWeights) -> Result<RankTable> {
    weights.validate()?;
    check_algorithms(summaries.len())?;
    let algorithms: Vec<String> = summaries.iter().map(|s| s.algorithm.clone()).collect();
    let scores = Metric::ALL.map(|metric| {
        summaries
            .iter()
            .map(|s| vec![s.values[metric.index()].iter().sum::<f64>() / 4.0])
            .collect()
    });
    Ok(table_from_scores(
        RankMethod::R2,
        weights,
        &algorithms,
        vec!["ALL".to_string()],
        scores,
        Metric::ALL.map(Metric::higher_is_better),
    ))
}

/// R4: rank algorithms on every case, average the case ranks per subset, then
/// rank those averages as in R1. Cases where a metric is undefined are skipped.
pub fn rank_then_aggregate(data: &ChallengeData, weights: RankWeights) -> Result<RankTable> {
    weights.validate()?;
    let k = data.algorithms.len();
    check_algorithms(k)?;
    let groups = data.check_subsets()?;
    let scores = Metric::ALL.map(|metric| {
        let mut per_alg = vec![vec![0.0; 4]; k];
        for (col, cases) in groups.iter().enumerate() {
            let mut sums = vec![0.0; k];
            let mut used = 0usize;
            for &c in cases {
                let column: Option<Vec<f64>> = (0..k).map(|a| data.values[a][c].get(metric)).collect();
                let Some(column) = column else { continue };
                for (a, r) in rank_column(&column, metric.higher_is_better()).into_iter().enumerate() {
                    sums[a] += r;
                }
                used += 1;
            }
            for a in 0..k {
                // a subset without any usable case ties everyone
                per_alg[a][col] = if used > 0 { sums[a] / used as f64 } else { 0.0 };
            }
        }
        per_alg
    });
    Ok(table_from_scores(
        RankMethod::R4,
        weights,
        &data.algorithms,
        subset_columns(),
        scores,
        [false; 3],
    ))
}

/// Which p-values share one Holm correction in R5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolmFamily {
    /// All ordered algorithm pairs within one (metric, subset).
    #[default]
    MetricSubset,
    /// All pairs across the four subsets of one metric.
    Metric,
    /// Every test of the ranking.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestThenRankConfig {
    pub alpha: f64,
    pub family: HolmFamily,
}

impl Default for TestThenRankConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            family: HolmFamily::MetricSubset,
        }
    }
}

/// R5: one-sided Wilcoxon tests for every ordered algorithm pair in each
/// (metric, subset), Holm-adjusted; algorithms are ranked by the number of
/// opponents they significantly outperform.
pub fn test_then_rank(data: &ChallengeData, weights: RankWeights, cfg: &TestThenRankConfig) -> Result<RankTable> {
    weights.validate()?;
    let k = data.algorithms.len();
    check_algorithms(k)?;
    let groups = data.check_subsets()?;

    // raw p-values indexed [metric][subset][pair], pairs ordered (winner, loser)
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let mut raw = vec![vec![vec![1.0f64; pairs.len()]; 4]; 3];
    for metric in Metric::ALL {
        let alt = if metric.higher_is_better() {
            Alternative::Greater
        } else {
            Alternative::Less
        };
        for (col, cases) in groups.iter().enumerate() {
            for (pi, &(a, b)) in pairs.iter().enumerate() {
                let (x, y): (Vec<f64>, Vec<f64>) = cases
                    .iter()
                    .filter_map(|&c| Some((data.values[a][c].get(metric)?, data.values[b][c].get(metric)?)))
                    .unzip();
                raw[metric.index()][col][pi] = wilcoxon_signed_rank(&x, &y, alt).unwrap_or(1.0);
            }
        }
    }

    let mut adjusted = raw.clone();
    match cfg.family {
        HolmFamily::MetricSubset => {
            for m in 0..3 {
                for col in 0..4 {
                    adjusted[m][col] = holm_adjust(&raw[m][col]);
                }
            }
        }
        HolmFamily::Metric => {
            for m in 0..3 {
                let flat: Vec<f64> = raw[m].concat();
                let adj = holm_adjust(&flat);
                for col in 0..4 {
                    adjusted[m][col] = adj[col * pairs.len()..(col + 1) * pairs.len()].to_vec();
                }
            }
        }
        HolmFamily::All => {
            let flat: Vec<f64> = raw.iter().flat_map(|m| m.concat()).collect();
            let adj = holm_adjust(&flat);
            let per_metric = 4 * pairs.len();
            for m in 0..3 {
                for col in 0..4 {
                    let start = m * per_metric + col * pairs.len();
                    adjusted[m][col] = adj[start..start + pairs.len()].to_vec();
                }
            }
        }
    }

    let scores = Metric::ALL.map(|metric| {
        let mut wins = vec![vec![0.0; 4]; k];
        for col in 0..4 {
            for (pi, &(a, _)) in pairs.iter().enumerate() {
                if adjusted[metric.index()][col][pi] < cfg.alpha {
                    wins[a][col] += 1.0;
                }
            }
        }
        wins
    });
    Ok(table_from_scores(
        RankMethod::R5,
        weights,
        &data.algorithms,
        subset_columns(),
        scores,
        [true; 3],
    ))
}

/// Runs any of the five ranking methods on per-case data.
pub fn rank_with_method(data: &ChallengeData, method: RankMethod, weights: RankWeights) -> Result<RankTable> {
    match method {
        RankMethod::R1 => official_ranking(&summarize(data, Aggregate::Mean)?, weights),
        RankMethod::R2 => aggregate_then_rank(&summarize(data, Aggregate::Mean)?, weights),
        RankMethod::R3 => rank_summaries(&summarize(data, Aggregate::Median)?, weights, RankMethod::R3),
        RankMethod::R4 => rank_then_aggregate(data, weights),
        RankMethod::R5 => test_then_rank(data, weights, &TestThenRankConfig::default()),
    }
}

#[cfg(test)]
mod tests;
