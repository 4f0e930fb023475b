use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use lesion_eval::harness::{
    self, classification_report, emit_reports, evaluate_all, load_manifest_file, majority_vote, read_case_results,
    read_json, read_summaries_csv, resolve_workers, sweep_report, synth_challenge, with_workers, CaseDetail,
    CaseManifest, EvaluationConfig, Reports, SynthPlan, DETAILS_FILE, WORKERS_ENV,
};
use lesion_eval::io::{read_label_file, write_label_file};
use lesion_eval::ranking::{
    bootstrap_ranks, default_team, official_ranking, rank_with_method, ChallengeData, RankMethod, RankWeights,
    SubsetKey,
};
use lesion_eval::volume::{exclude_region, BoxRegion, LabelVolume};

#[derive(Parser)]
#[command(
    name = "lesion-eval",
    version,
    about = "Lesion segmentation evaluation, ranking and stability analysis"
)]
struct Cli {
    /// Worker threads (overrides the config file).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every prediction in a manifest.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Evaluation config JSON; defaults apply to absent fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank algorithms from a metrics table (or from per-subset summaries).
    Rank {
        #[arg(long, required_unless_present = "summaries", conflicts_with = "summaries")]
        metrics: Option<PathBuf>,
        /// CSV with `algorithm` and `{metric}_{SUBSET}` mean columns (R1 only).
        #[arg(long)]
        summaries: Option<PathBuf>,
        #[arg(long, default_value = "R1")]
        method: RankMethod,
        /// Weights for dsc,fpv,fnv.
        #[arg(long, default_value = "0.5,0.25,0.25")]
        weights: RankWeights,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bootstrap stability of the official ranking.
    Bootstrap {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value_t = 2000)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "0.5,0.25,0.25")]
        weights: RankWeights,
        /// Output directory; defaults to the metrics file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity sweep, taxonomy curves and decile stratification.
    Sweep {
        /// Directory written by `evaluate`.
        #[arg(long)]
        metrics_dir: PathBuf,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.01:0.5:0.01")]
        taus: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Voxelwise majority vote of several masks.
    Ensemble {
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic challenge with a manifest.
    Synth {
        /// Synth plan JSON; the built-in plan is used when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Clear a box from every prediction and re-evaluate.
    AblateRegion {
        /// Inclusive index ranges `x0:x1,y0:y1,z0:z1`.
        #[arg(long = "box")]
        region: String,
        #[arg(long)]
        manifest: PathBuf,
        /// Only ablate cases of these subsets (all when absent).
        #[arg(long, value_delimiter = ',')]
        subsets: Vec<SubsetKey>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_box(s: &str) -> Result<BoxRegion> {
    let axes: Vec<&str> = s.split(',').collect();
    if axes.len() != 3 {
        bail!("--box expects x0:x1,y0:y1,z0:z1, got {s:?}");
    }
    let mut lo = [0; 3];
    let mut hi = [0; 3];
    for (a, part) in axes.iter().enumerate() {
        let (l, h) = part
            .split_once(':')
            .with_context(|| format!("axis {a} of --box: expected lo:hi, got {part:?}"))?;
        lo[a] = l.trim().parse().with_context(|| format!("axis {a} lower bound"))?;
        hi[a] = h.trim().parse().with_context(|| format!("axis {a} upper bound"))?;
    }
    Ok(BoxRegion::new(lo, hi))
}

fn parse_taus(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [start, stop, step] => {
            let (start, stop, step): (f64, f64, f64) = (start.parse()?, stop.parse()?, step.parse()?);
            if !(step > 0.0 && start <= stop) {
                bail!("--taus range needs start <= stop and step > 0");
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..n)
                .map(|i| ((start + i as f64 * step) * 1e10).round() / 1e10)
                .collect())
        }
        [_] => s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(Into::into))
            .collect(),
        _ => bail!("--taus expects start:stop:step or a comma-separated list"),
    }
}

fn load_config(path: Option<&Path>, workers: Option<usize>) -> Result<EvaluationConfig> {
    let mut cfg = match path {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            EvaluationConfig::from_json(&bytes)?
        }
        None => EvaluationConfig::default(),
    };
    if workers.is_some() {
        cfg.workers = workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn evaluate_and_emit(manifest: &CaseManifest, cfg: &EvaluationConfig, out: &Path) -> Result<()> {
    let evaluation = evaluate_all(manifest, cfg)?;
    let failed = evaluation.rows.iter().filter(|r| r.error.is_some()).count();
    let classification = classification_report(&evaluation.rows);
    let sweep = sweep_report(&evaluation.details, &cfg.taus)?;
    emit_reports(
        out,
        &Reports {
            metrics: Some(&evaluation.rows),
            details: Some(&evaluation.details),
            classification: Some(&classification),
            sweep: Some(&sweep),
            ..Reports::default()
        },
    )?;
    eprintln!(
        "evaluated {} rows ({} failed) into {}",
        evaluation.rows.len(),
        failed,
        out.display()
    );
    for row in evaluation.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "  {} / {}: {}",
            row.case_id,
            row.algorithm,
            row.error.as_deref().unwrap_or_default()
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let workers = resolve_workers(cli.workers)?;
    match cli.command {
        Command::Evaluate { manifest, config, out } => {
            let cfg = load_config(config.as_deref(), workers)?;
            let manifest = load_manifest_file(&manifest)?;
            evaluate_and_emit(&manifest, &cfg, &out)?;
        }
        Command::Rank {
            metrics,
            summaries,
            method,
            weights,
            out,
        } => {
            let mut table = if let Some(path) = summaries {
                if method != RankMethod::R1 {
                    bail!("--summaries only supports R1; per-case metrics are needed for {method}");
                }
                let bytes = std::fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
                official_ranking(&read_summaries_csv(&bytes)?, weights)?
            } else {
                let path = metrics.expect("clap enforces --metrics");
                let data = ChallengeData::from_results(&read_case_results(&path)?)?;
                rank_with_method(&data, method, weights)?
            };
            table.assign_positions(default_team);
            emit_reports(
                &out,
                &Reports {
                    ranking: Some(&table),
                    ..Reports::default()
                },
            )?;
            for row in table.sorted_rows() {
                println!("{:>8}  {}", harness::format_4dp(row.weighted_rank), row.algorithm);
            }
        }
        Command::Bootstrap {
            metrics,
            replicates,
            seed,
            weights,
            out,
        } => {
            let data = ChallengeData::from_results(&read_case_results(&metrics)?)?;
            let summary = with_workers(workers, || bootstrap_ranks(&data, replicates, seed, weights))??;
            let out = out.unwrap_or_else(|| metrics.parent().unwrap_or(Path::new(".")).to_path_buf());
            emit_reports(
                &out,
                &Reports {
                    bootstrap: Some(&summary),
                    ..Reports::default()
                },
            )?;
            for a in &summary.algorithms {
                println!(
                    "{:<24} median {:>6}  95% [{}, {}]  first {:.3}",
                    a.algorithm,
                    harness::format_4dp(a.median),
                    harness::format_4dp(a.quantiles[0]),
                    harness::format_4dp(a.quantiles[4]),
                    a.rank_one_fraction
                );
            }
        }
        Command::Sweep { metrics_dir, taus, out } => {
            let taus = parse_taus(&taus)?;
            let details: Vec<CaseDetail> = read_json(&metrics_dir.join(DETAILS_FILE))?;
            let report = sweep_report(&details, &taus)?;
            emit_reports(
                out.as_deref().unwrap_or(&metrics_dir),
                &Reports {
                    sweep: Some(&report),
                    ..Reports::default()
                },
            )?;
            for a in &report.algorithms {
                let (first, last) = (a.sensitivity.first(), a.sensitivity.last());
                if let (Some(f), Some(l)) = (first, last) {
                    println!(
                        "{:<24} {} {:.3} -> {} {:.3}",
                        a.algorithm, f.criterion, f.sensitivity, l.criterion, l.sensitivity
                    );
                }
            }
        }
        Command::Ensemble { inputs, out } => {
            let masks = inputs
                .iter()
                .map(|p| read_label_file(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<LabelVolume>>>()?;
            let vote = majority_vote(&masks)?;
            write_label_file(&out, &vote)?;
            eprintln!(
                "{} foreground voxels written to {}",
                vote.foreground_count(),
                out.display()
            );
        }
        Command::Synth {
            params,
            cases,
            seed,
            out,
        } => {
            let plan: SynthPlan = match params {
                Some(p) => read_json(&p)?,
                None => SynthPlan::default(),
            };
            let manifest = with_workers(workers, || synth_challenge(&plan, cases, seed, &out))??;
            eprintln!(
                "{} cases x {} algorithms written to {}",
                manifest.cases.len(),
                plan.algorithms.len(),
                out.display()
            );
        }
        Command::AblateRegion {
            region,
            manifest,
            subsets,
            config,
            out,
        } => {
            let region = parse_box(&region)?;
            let cfg = load_config(config.as_deref(), workers)?;
            let mut manifest = load_manifest_file(&manifest)?;
            let volumes = out.join("ablated");
            for entry in &mut manifest.cases {
                if !subsets.is_empty() && !subsets.contains(&entry.subset) {
                    continue;
                }
                // references stay untouched; only predictions lose the region
                for (algorithm, path) in entry.predictions.iter_mut() {
                    let mask = read_label_file(path).with_context(|| format!("reading {}", path.display()))?;
                    let target = volumes.join(&entry.case_id).join(format!("{algorithm}.nii"));
                    if let Some(dir) = target.parent() {
                        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    }
                    write_label_file(&target, &exclude_region(&mask, &region)?)?;
                    *path = target;
                }
            }
            harness::write_bytes(&volumes.join("manifest.json"), manifest.to_json()?.as_bytes())?;
            evaluate_and_emit(&manifest, &cfg, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
