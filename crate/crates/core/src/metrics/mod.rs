//! Evaluation metrics: the correctness × grounding taxonomy,
//! faithfulness, F1@k, grounding@k, bootstrap intervals and the corpus
//! report that ties them together.

mod bootstrap;
mod report;
mod taxonomy;

pub use bootstrap::{bootstrap_ci, ConfidenceInterval};
pub use report::{
    evaluate_corpus, f1_at_k, grounding_at_k, CompletionEval, MetricsReport, PrfAtK, csv_header,
};
pub use taxonomy::{classify, classify_with, faithfulness, TaxonomyCounts, TaxonomyLabel, TaxonomyRates, TaxonomyThresholds};
