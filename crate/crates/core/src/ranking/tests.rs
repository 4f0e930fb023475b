use proptest::prelude::*;

use super::*;

fn summary(name: &str, dsc: [f64; 4], fnv: [f64; 4], fpv: [f64; 4]) -> AlgorithmSummary {
    AlgorithmSummary {
        algorithm: name.to_string(),
        values: [dsc, fnv, fpv],
    }
}

fn triplet(dsc: f64, fnv: f64, fpv: f64) -> MetricTriplet {
    MetricTriplet {
        dsc: Some(dsc),
        fpv_ml: fpv,
        fnv_ml: Some(fnv),
    }
}

/// Builds per-case data; `f(algorithm, subset, case)` gives the triplet.
fn per_case(algorithms: &[&str], n: usize, f: impl Fn(usize, usize, usize) -> MetricTriplet) -> ChallengeData {
    let mut results = Vec::new();
    for (k, subset) in SubsetKey::ALL.into_iter().enumerate() {
        for c in 0..n {
            for (a, name) in algorithms.iter().enumerate() {
                results.push(CaseResult {
                    case_id: format!("{subset}-{c:03}"),
                    subset,
                    algorithm: name.to_string(),
                    metrics: f(a, k, c),
                });
            }
        }
    }
    ChallengeData::from_results(&results).unwrap()
}

#[test]
fn subset_keys_round_trip() {
    for k in SubsetKey::ALL {
        assert_eq!(k.to_string().parse::<SubsetKey>().unwrap(), k);
    }
    assert!(matches!("CTLM".parse::<SubsetKey>(), Err(Error::SchemaViolation(_))));
    let json = serde_json::to_string(&SubsetKey::ALL[1]).unwrap();
    assert_eq!(json, "\"PSMA_LMU\"");
}

#[test]
fn subset_mean_examples() {
    let k = SubsetKey::ALL;
    let cases = [
        (k[0], triplet(0.6, 1.0, 0.0)),
        (k[0], triplet(0.8, 2.0, 0.0)),
        (
            k[0],
            MetricTriplet {
                dsc: None,
                fpv_ml: 3.0,
                fnv_ml: None,
            },
        ),
        (k[1], triplet(0.7, 0.0, 0.0)),
        (k[2], triplet(0.7, 0.0, 0.0)),
        (k[3], triplet(0.7, 0.0, 0.0)),
    ];
    let m = subset_means(cases.iter().map(|(s, t)| (*s, t))).unwrap();
    assert!((m[Metric::Dsc.index()][0] - 0.7).abs() < 1e-15);
    assert_eq!(m[Metric::Fnv.index()][0], 1.5);
    assert_eq!(m[Metric::Fpv.index()][0], 1.0);
    assert_eq!(m[Metric::Dsc.index()][1], 0.7);

    let missing = subset_means(cases[..3].iter().map(|(s, t)| (*s, t)));
    assert!(matches!(missing, Err(Error::EmptySubset(_))));
}

#[test]
fn weights_validation() {
    assert_eq!("0.5,0.25,0.25".parse::<RankWeights>().unwrap(), RankWeights::default());
    assert!("0.5,0.5,0.25".parse::<RankWeights>().is_err());
    assert!("1,0,0".parse::<RankWeights>().is_err());
    assert!("0.5,0.5".parse::<RankWeights>().is_err());
}

#[test]
fn weighted_rank_arithmetic() {
    let w = RankWeights::default();
    let combine = |d: f64, n: f64, p: f64| w.dsc * d + w.fnv * n + w.fpv * p;
    assert_eq!(combine(4.75, 2.75, 12.0), 6.0625);
    assert_eq!(combine(7.5, 5.125, 13.5), 8.40625);
}

#[test]
fn identical_algorithms_tie() {
    let s = [
        summary("a", [0.7; 4], [1.0; 4], [2.0; 4]),
        summary("b", [0.7; 4], [1.0; 4], [2.0; 4]),
    ];
    let t = official_ranking(&s, RankWeights::default()).unwrap();
    for row in &t.rows {
        assert_eq!(row.weighted_rank, 1.5);
        assert_eq!(row.final_rank, 1.5);
        for m in &row.metrics {
            assert_eq!(m.ranks, vec![1.5; 4]);
        }
    }
    assert!(matches!(
        official_ranking(&s[..1], RankWeights::default()),
        Err(Error::InsufficientAlgorithms(1))
    ));
}

#[test]
fn directions_of_each_metric() {
    let s = [
        summary("good", [0.8; 4], [1.0; 4], [1.0; 4]),
        summary("bad", [0.5; 4], [3.0; 4], [4.0; 4]),
    ];
    let t = official_ranking(&s, RankWeights::default()).unwrap();
    let good = t.row("good").unwrap();
    assert!(good.metrics.iter().all(|m| m.rank == 1.0));
    assert_eq!(good.weighted_rank, 1.0);
    assert_eq!(t.row("bad").unwrap().weighted_rank, 2.0);
}

#[test]
fn mean_and_median_disagree_on_skewed_fixture() {
    // "steady" scores 0.6 everywhere; "spiky" has median 0.5 but a mean of 0.68.
    let spiky = [0.5, 0.5, 0.5, 0.9, 1.0];
    let data = per_case(&["spiky", "steady"], 5, |a, _, c| {
        let d = if a == 0 { spiky[c] } else { 0.6 };
        triplet(d, 1.0, 1.0)
    });
    let r1 = rank_with_method(&data, RankMethod::R1, RankWeights::default()).unwrap();
    let r3 = rank_with_method(&data, RankMethod::R3, RankWeights::default()).unwrap();
    assert!(r1.row("spiky").unwrap().final_rank < r1.row("steady").unwrap().final_rank);
    assert!(r3.row("spiky").unwrap().final_rank > r3.row("steady").unwrap().final_rank);
}

#[test]
fn r4_ranks_cases_before_averaging() {
    // "a" wins 4 of 5 cases narrowly, "b" wins one by a wide margin.
    let data = per_case(&["a", "b"], 5, |a, _, c| {
        let d = match (a, c) {
            (0, 4) => 0.1,
            (0, _) => 0.71,
            (_, _) => 0.7,
        };
        triplet(d, 1.0, 1.0)
    });
    let r1 = rank_with_method(&data, RankMethod::R1, RankWeights::default()).unwrap();
    let r4 = rank_with_method(&data, RankMethod::R4, RankWeights::default()).unwrap();
    assert_eq!(r1.row("b").unwrap().final_rank, 1.0);
    assert_eq!(r4.row("a").unwrap().final_rank, 1.0);
    let dsc = &r4.row("a").unwrap().metrics[Metric::Dsc.index()];
    assert!((dsc.values[0] - 1.2).abs() < 1e-12);
}

#[test]
fn r2_collapses_subsets() {
    let s = [
        summary("a", [0.9, 0.1, 0.9, 0.1], [1.0; 4], [1.0; 4]),
        summary("b", [0.4; 4], [1.0; 4], [1.0; 4]),
    ];
    let t = aggregate_then_rank(&s, RankWeights::default()).unwrap();
    assert_eq!(t.columns, vec!["ALL"]);
    assert_eq!(t.row("a").unwrap().metrics[0].values, vec![0.5]);
    assert_eq!(t.row("a").unwrap().final_rank, 1.0);
}

#[test]
fn r5_large_margin_pair() {
    let data = per_case(&["strong", "weak"], 50, |a, _, c| {
        let d = 0.3 + 0.005 * c as f64;
        let (dsc, vol) = if a == 0 {
            (d + 0.3, 1.0 + c as f64)
        } else {
            (d, 5.0 + 2.0 * c as f64)
        };
        triplet(dsc, vol, vol)
    });
    let t = test_then_rank(&data, RankWeights::default(), &TestThenRankConfig::default()).unwrap();
    let strong = t.row("strong").unwrap();
    let weak = t.row("weak").unwrap();
    for m in Metric::ALL {
        assert_eq!(strong.metrics[m.index()].values, vec![1.0; 4]);
        assert_eq!(weak.metrics[m.index()].values, vec![0.0; 4]);
    }
    assert_eq!((strong.final_rank, weak.final_rank), (1.0, 2.0));
}

#[test]
fn r5_dominance_chain_and_ties() {
    let data = per_case(&["first", "second", "third"], 10, |a, _, c| {
        let base = 0.2 + 0.01 * c as f64;
        let q = 2 - a;
        triplet(
            base + 0.2 * q as f64,
            10.0 - 3.0 * q as f64 + c as f64,
            10.0 - 3.0 * q as f64,
        )
    });
    let t = test_then_rank(&data, RankWeights::default(), &TestThenRankConfig::default()).unwrap();
    for (name, wins, rank) in [("first", 2.0, 1.0), ("second", 1.0, 2.0), ("third", 0.0, 3.0)] {
        let row = t.row(name).unwrap();
        assert_eq!(row.metrics[0].values, vec![wins; 4], "{name}");
        assert_eq!(row.final_rank, rank);
    }

    let same = per_case(&["x", "y"], 10, |_, _, c| triplet(0.5 + 0.01 * c as f64, 1.0, 1.0));
    let t = test_then_rank(&same, RankWeights::default(), &TestThenRankConfig::default()).unwrap();
    assert!(t.rows.iter().all(|r| r.final_rank == 1.5));
}

#[test]
fn holm_families_change_only_scope() {
    let data = per_case(&["a", "b", "c"], 8, |a, k, c| {
        let shift = (a as f64) * 0.01 * (1 + k) as f64;
        triplet(0.5 + shift + 0.001 * ((c * 5 + a) % 7) as f64, 1.0 + c as f64, 1.0)
    });
    for family in [HolmFamily::MetricSubset, HolmFamily::Metric, HolmFamily::All] {
        let cfg = TestThenRankConfig { alpha: 0.05, family };
        let t = test_then_rank(&data, RankWeights::default(), &cfg).unwrap();
        for m in Metric::ALL {
            for col in 0..4 {
                let sum: f64 = t.rows.iter().map(|r| r.metrics[m.index()].ranks[col]).sum();
                assert_eq!(sum, 6.0);
            }
        }
    }
}

#[test]
fn dominant_algorithm_wins_every_method() {
    let data = per_case(&["best", "mid", "low"], 10, |a, k, c| {
        let noise = ((c * 13 + k * 7 + a * 3) % 10) as f64 * 0.001;
        let q = a as f64;
        triplet(0.9 - 0.1 * q - noise, 1.0 + q + noise, 0.5 + q + noise)
    });
    for method in [
        RankMethod::R1,
        RankMethod::R2,
        RankMethod::R3,
        RankMethod::R4,
        RankMethod::R5,
    ] {
        let t = rank_with_method(&data, method, RankWeights::default()).unwrap();
        assert_eq!(t.row("best").unwrap().final_rank, 1.0, "{method}");
    }
}

#[test]
fn incomplete_data_rejected() {
    let k = SubsetKey::ALL[0];
    let r = |case: &str, alg: &str| CaseResult {
        case_id: case.into(),
        subset: k,
        algorithm: alg.into(),
        metrics: triplet(0.5, 0.0, 0.0),
    };
    assert!(matches!(
        ChallengeData::from_results(&[r("c1", "a"), r("c1", "b"), r("c2", "a")]),
        Err(Error::SchemaViolation(_))
    ));
    assert!(matches!(
        ChallengeData::from_results(&[r("c1", "a"), r("c1", "a")]),
        Err(Error::DuplicateCase(_))
    ));
    let one_subset = ChallengeData::from_results(&[r("c1", "a"), r("c1", "b")]).unwrap();
    assert!(matches!(
        rank_then_aggregate(&one_subset, RankWeights::default()),
        Err(Error::EmptySubset(_))
    ));
}

#[test]
fn team_positions() {
    assert_eq!(default_team("IKIM A").as_deref(), Some("IKIM"));
    assert_eq!(default_team("StockholmTrio").as_deref(), Some("StockholmTrio"));
    assert_eq!(default_team("*Ensemble"), None);
    let s = [
        summary("T1 A", [0.8; 4], [1.0; 4], [1.0; 4]),
        summary("T1 B", [0.7; 4], [1.0; 4], [1.0; 4]),
        summary("*Ref", [0.75; 4], [1.0; 4], [1.0; 4]),
        summary("T2", [0.6; 4], [1.0; 4], [1.0; 4]),
    ];
    let mut t = official_ranking(&s, RankWeights::default()).unwrap();
    t.assign_positions(default_team);
    let pos: Vec<Option<usize>> = t.rows.iter().map(|r| r.position).collect();
    assert_eq!(pos, vec![Some(1), None, None, Some(2)]);
}

fn summaries_strategy() -> impl Strategy<Value = Vec<AlgorithmSummary>> {
    (2usize..7).prop_flat_map(|k| {
        proptest::collection::vec(proptest::collection::vec(0u8..5, 12), k).prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, v)| {
                    let f = |m: usize| -> [f64; 4] { std::array::from_fn(|s| f64::from(v[m * 4 + s]) / 4.0) };
                    summary(&format!("alg{i}"), f(0), f(1), f(2))
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn rank_columns_sum_to_triangular(s in summaries_strategy()) {
        let k = s.len() as f64;
        let t = official_ranking(&s, RankWeights::default()).unwrap();
        for m in Metric::ALL {
            for col in 0..4 {
                let sum: f64 = t.rows.iter().map(|r| r.metrics[m.index()].ranks[col]).sum();
                prop_assert_eq!(sum, k * (k + 1.0) / 2.0);
            }
        }
        let w: f64 = t.rows.iter().map(|r| r.weighted_rank).sum();
        prop_assert!((w - k * (k + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_a_metric_keeps_ranks(s in summaries_strategy(), metric in 0usize..3, c in 0.1f64..50.0, e in -4i32..6) {
        let w = RankWeights::default();
        let scale = |f: f64| -> Vec<AlgorithmSummary> {
            s.iter()
                .map(|a| {
                    let mut a = a.clone();
                    for v in &mut a.values[metric] {
                        *v *= f;
                    }
                    a
                })
                .collect()
        };
        // R2 sums subset means, so only exact (power-of-two) scaling is guaranteed
        // to keep floating-point ties intact.
        let pow2 = 2f64.powi(e);
        for (x, y) in [
            (official_ranking(&s, w).unwrap(), official_ranking(&scale(c), w).unwrap()),
            (aggregate_then_rank(&s, w).unwrap(), aggregate_then_rank(&scale(pow2), w).unwrap()),
        ] {
            for (rx, ry) in x.rows.iter().zip(&y.rows) {
                prop_assert_eq!(rx.weighted_rank, ry.weighted_rank);
                for m in 0..3 {
                    prop_assert_eq!(&rx.metrics[m].ranks, &ry.metrics[m].ranks);
                }
            }
        }
    }
}
