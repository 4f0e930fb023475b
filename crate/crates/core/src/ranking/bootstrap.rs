//! Bootstrap stability of the official ranking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{official_ranking, subset_means, AlgorithmSummary, ChallengeData, RankWeights};
use crate::lesion_metrics::quantile_sorted;
use crate::{Error, Result};

/// Quantile levels reported per algorithm.
pub const QUANTILE_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Draws the case indices of one bootstrap replicate.
pub trait CaseSampler: Sync {
    /// `groups` holds case indices per subset; the result must keep the
    /// four-subset structure (one index list per subset).
    fn sample(&self, seed: u64, replicate: u64, groups: &[Vec<usize>; 4]) -> [Vec<usize>; 4];
}

/// Resamples each subset with replacement, preserving its size. Replicate `r`
/// draws from a ChaCha8 stream derived from `(seed, r)` only.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformSampler;

impl CaseSampler for UniformSampler {
    fn sample(&self, seed: u64, replicate: u64, groups: &[Vec<usize>; 4]) -> [Vec<usize>; 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate);
        groups
            .clone()
            .map(|g| (0..g.len()).map(|_| g[rng.gen_range(0..g.len())]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmBootstrap {
    pub algorithm: String,
    /// Final rank in the full (non-resampled) data.
    pub full_data_rank: f64,
    /// Final rank per replicate, in replicate order.
    pub ranks: Vec<f64>,
    /// Values at [`QUANTILE_LEVELS`].
    pub quantiles: Vec<f64>,
    pub median: f64,
    pub mean: f64,
    /// Fraction of replicates in which the algorithm is ranked first outright.
    pub rank_one_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub seed: u64,
    pub quantile_levels: Vec<f64>,
    pub algorithms: Vec<AlgorithmBootstrap>,
}

/// Bootstrap of the R1 ranking with stratified uniform resampling.
pub fn bootstrap_ranks(
    data: &ChallengeData,
    replicates: usize,
    seed: u64,
    weights: RankWeights,
) -> Result<BootstrapSummary> {
    bootstrap_ranks_with(data, replicates, seed, weights, &UniformSampler)
}

fn final_ranks(data: &ChallengeData, groups: &[Vec<usize>; 4], weights: RankWeights) -> Result<Vec<f64>> {
    let summaries = (0..data.algorithms().len())
        .map(|a| {
            let cases = groups
                .iter()
                .flatten()
                .map(|&c| (data.cases()[c].subset, data.value(a, c)));
            Ok(AlgorithmSummary {
                algorithm: data.algorithms()[a].clone(),
                values: subset_means(cases)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(official_ranking(&summaries, weights)?
        .rows
        .into_iter()
        .map(|r| r.final_rank)
        .collect())
}

/// Bootstrap with a caller-supplied sampler. Replicates run on the current
/// rayon pool and are gathered in replicate order.
pub fn bootstrap_ranks_with(
    data: &ChallengeData,
    replicates: usize,
    seed: u64,
    weights: RankWeights,
    sampler: &dyn CaseSampler,
) -> Result<BootstrapSummary> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one replicate".into()));
    }
    let groups = data.check_subsets()?;
    let full = final_ranks(data, &groups, weights)?;
    let per_replicate: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| final_ranks(data, &sampler.sample(seed, r, &groups), weights))
        .collect::<Result<_>>()?;

    let algorithms = data
        .algorithms()
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let ranks: Vec<f64> = per_replicate.iter().map(|r| r[a]).collect();
            let mut sorted = ranks.clone();
            sorted.sort_by(f64::total_cmp);
            let quantiles: Vec<f64> = QUANTILE_LEVELS.iter().map(|&q| quantile_sorted(&sorted, q)).collect();
            AlgorithmBootstrap {
                algorithm: name.clone(),
                full_data_rank: full[a],
                median: quantile_sorted(&sorted, 0.5),
                mean: ranks.iter().sum::<f64>() / ranks.len() as f64,
                rank_one_fraction: ranks.iter().filter(|&&r| r == 1.0).count() as f64 / ranks.len() as f64,
                quantiles,
                ranks,
            }
        })
        .collect();
    Ok(BootstrapSummary {
        replicates,
        seed,
        quantile_levels: QUANTILE_LEVELS.to_vec(),
        algorithms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::{CaseResult, MetricTriplet, SubsetKey};

    struct IdentitySampler;

    impl CaseSampler for IdentitySampler {
        fn sample(&self, _: u64, _: u64, groups: &[Vec<usize>; 4]) -> [Vec<usize>; 4] {
            groups.clone()
        }
    }

    fn challenge(n_per_subset: usize) -> ChallengeData {
        let mut results = Vec::new();
        for (k, subset) in SubsetKey::ALL.into_iter().enumerate() {
            for i in 0..n_per_subset {
                let case_id = format!("{subset}_{i:02}");
                let jitter = ((i * 7 + k * 3) % 11) as f64 / 100.0;
                for (a, base) in [("alpha", 0.9), ("beta", 0.6), ("gamma", 0.5)] {
                    let wobble = if a == "alpha" { 0.0 } else { jitter };
                    results.push(CaseResult {
                        case_id: case_id.clone(),
                        subset,
                        algorithm: a.to_string(),
                        metrics: MetricTriplet {
                            dsc: Some(base - wobble * 0.5),
                            fpv_ml: (1.0 - base) * 10.0 + wobble,
                            fnv_ml: Some((1.0 - base) * 5.0 + 2.0 * wobble),
                        },
                    });
                }
            }
        }
        ChallengeData::from_results(&results).unwrap()
    }

    #[test]
    fn identity_resample_reproduces_full_ranking() {
        let data = challenge(6);
        let s = bootstrap_ranks_with(&data, 1, 0, RankWeights::default(), &IdentitySampler).unwrap();
        for a in &s.algorithms {
            assert_eq!(a.ranks, vec![a.full_data_rank]);
        }
    }

    #[test]
    fn dominant_algorithm_always_first() {
        let data = challenge(8);
        let s = bootstrap_ranks(&data, 50, 3, RankWeights::default()).unwrap();
        let alpha = s.algorithms.iter().find(|a| a.algorithm == "alpha").unwrap();
        assert_eq!(alpha.rank_one_fraction, 1.0);
        for r in 0..50 {
            let mut col: Vec<f64> = s.algorithms.iter().map(|a| a.ranks[r]).collect();
            col.sort_by(f64::total_cmp);
            assert_eq!(col.iter().sum::<f64>(), 6.0);
        }
    }

    #[test]
    fn seeds_control_streams() {
        let data = challenge(8);
        let w = RankWeights::default();
        let a = bootstrap_ranks(&data, 40, 1, w).unwrap();
        let b = bootstrap_ranks(&data, 40, 1, w).unwrap();
        assert_eq!(a, b);
        let s = UniformSampler;
        let groups = data.subset_cases();
        assert_ne!(s.sample(1, 0, &groups), s.sample(2, 0, &groups));
        assert_ne!(s.sample(1, 0, &groups), s.sample(1, 1, &groups));
        assert!(bootstrap_ranks(&data, 0, 1, w).is_err());
    }
}
