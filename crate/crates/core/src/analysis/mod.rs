//! Evaluation metrics and embedding-space diagnostics.

mod metrics;
mod similarity;
mod toy;

pub use metrics::{f1_scores, predict, predict_probs, F1Options, F1Scores, PredictionSet, DEFAULT_THRESHOLD};
pub use similarity::{export_report, read_report_csv, similarity_by_distance, ReportRow, SimilarityReport};
pub use toy::{toy_experiment, ToyConfig, ToyPoint, ToyReport};
