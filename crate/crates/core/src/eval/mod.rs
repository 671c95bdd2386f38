//! Dataset loading, answer matching and run metrics.

mod dataset;
mod hitrate;
mod matching;
mod report;
mod score;

pub use dataset::{load_dataset, parse_dataset, Category, DatasetError, Difficulty, QaInstance, VideoMetadata};
pub use hitrate::{hitrate_at_k, ranked_elements, HitRateEntry, HitRateReport, RankedResult};
pub use matching::{match_answer, normalize_answer};
pub use report::{emit_report, render_json, render_markdown, ReportFormat};
pub use score::{score_run, PredictionRecord, Quadrant, RoundBucket, RunReport, ScoreError};
