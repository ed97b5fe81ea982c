from .embedding import EmbeddingSpace, Word2VecParams, knn_hashtags, train_word2vec
from .model import (
    Encoder,
    HashtagModel,
    Mapper,
    SemanticMapper,
    TrainingPair,
    TrainingReport,
    compute_targets,
    encode,
    fine_tuning,
    recommend,
    transfer_learning,
)

__all__ = [
    "EmbeddingSpace", "Word2VecParams", "knn_hashtags", "train_word2vec",
    "Encoder", "HashtagModel", "Mapper", "SemanticMapper", "TrainingPair", "TrainingReport",
    "compute_targets", "encode", "fine_tuning", "recommend", "transfer_learning",
]
