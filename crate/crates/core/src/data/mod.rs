//! Dataset ingestion and experiment preparation.
//!
//! File formats (all comma-separated with a header row; column names are
//! matched case-insensitively):
//!
//! * ratings: `user,item,rating[,timestamp]`
//! * catalog: `item` plus optional `genres` (`|`-separated), `year`, `title`
//! * scores: `user,item,score`
//! * categories: `item,category[,weight]`

pub mod categories;
mod interactions;
pub mod scores;
mod split;
pub mod synthetic;

pub use categories::{
    build_genre_matrix, build_popularity_matrix, build_target_distribution, build_year_matrix,
    load_category_file, CategoryMatrix,
};
pub use interactions::{
    load_catalog, load_interactions, Catalog, Interaction, InteractionDataset, ItemMeta, UserRecord,
};
pub use scores::{assemble_candidates, load_scores, prepare_cases, CaseOptions, EvalCase, ScoreTable, UserEvalInstance};
pub use split::{seeded_rng, split_history_holdout, split_users, UserSplit};
pub use synthetic::{synthetic_corpus, synthetic_instance, CorpusSpec, ScoreDistribution};
