//! Quantitative analyses over VoG scores.

pub mod boundary;
pub mod decile;
pub mod ood;
pub mod stats;

pub use boundary::{boundary_distance_analysis, boundary_distances, BoundaryAnalysis};
pub use decile::{
    class_level_report, correctness_of, decile_error, stability, stage_flip_from_tables,
    stage_flip_report, ClassLevelReport, DecileErrorTable, DecileRow, StabilityReport,
    StageFlipReport,
};
pub use ood::{
    aupr, auroc, msp_from_logits, msp_scores, ood_metrics, ood_percentile_representation,
    vog_in_scores, OodMetrics, PositiveClass, QuartileRow,
};
pub use stats::{
    correlations, pearson, spearman, student_t_cdf, two_sided_p, welch_ttest, welch_ttest_samples,
    Correlation, Summary, WelchResult,
};
