//! Batch driver: manifests, parallel evaluation, ensembling, synthetic
//! phantoms and report emission. This is the only layer that touches files.

mod ensemble;
mod evaluate;
mod manifest;
mod report;
mod sweep;
mod synth;

pub use ensemble::majority_vote;
pub use evaluate::{
    evaluate_all, evaluate_case, evaluate_prepared, resolve_workers, with_workers, CaseDetail, CaseEvaluation,
    CaseMetrics, Evaluation, EvaluationConfig, LesionSize, MetricsRow, PreparedReference, WORKERS_ENV,
};
pub use manifest::{load_manifest, load_manifest_file, CaseManifest, ManifestEntry, MANIFEST_SCHEMA_VERSION};
pub use report::{
    emit_reports, format_4dp, leaderboard_csv, metrics_csv, read_case_results, read_json, read_metrics_csv,
    read_summaries_csv, to_json_bytes, write_bytes, MetricsRecord, Reports, BOOTSTRAP_FILE, CLASSIFICATION_FILE,
    DETAILS_FILE, LEADERBOARD_FILE, METRICS_FILE, RANKS_FILE, SWEEP_FILE, TAXONOMY_FILE,
};
pub use sweep::{
    classification_report, sweep_report, AlgorithmClassification, AlgorithmSweep, SweepReport, TaxonomyPoint,
};
pub use synth::{
    degrade, derive_seed, synth_case, synth_challenge, synth_phantom, AlgorithmProfile, Degradation, DegradationTruth,
    Phantom, PhantomParams, SynthCase, SynthLesion, SynthParams, SynthPlan, MAX_PLACEMENT_ATTEMPTS,
};
