from .pca import PCA, pca_reduce
from .pipeline import (
    EmbeddedPoint,
    EmbeddingResult,
    SeriesInfo,
    embed_hidden,
    embed_ram_joint,
    export_embedding,
    load_embedding,
    ram_to_bits,
)
from .tsne import TSNE, joint_probabilities, row_perplexities, tsne

__all__ = [
    "PCA",
    "pca_reduce",
    "TSNE",
    "tsne",
    "joint_probabilities",
    "row_perplexities",
    "EmbeddedPoint",
    "EmbeddingResult",
    "SeriesInfo",
    "embed_ram_joint",
    "embed_hidden",
    "export_embedding",
    "load_embedding",
    "ram_to_bits",
]
