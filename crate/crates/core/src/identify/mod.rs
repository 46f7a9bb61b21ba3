//! Re-identification: segment embeddings, cosine nearest-neighbour matching
//! with majority voting, and the pairwise trial-fold evaluation protocol.

mod embedding;
mod matching;
mod protocol;

pub use embedding::{
    embed_statistical, load_embeddings, read_embeddings, Embedding, EmbeddingSet, SetRole,
    DEFAULT_VELOCITY_THRESHOLD_DEG_S, STAT_EMBEDDING_DIM,
};
pub use matching::{cosine_distance, nearest_label, predict_identity, Prediction, ZScore};
pub use protocol::{
    check_dataset, embed_streams, evaluate_embeddings, evaluate_identification, evaluate_streams,
    ordered_trial_pairs, truncate_record, EmbedderSpec, IdentificationReport, PairResult,
    UserOutcome,
};
