"""Zero/few-shot classification over precomputed embedding vectors.

The package splits into small layers: linalg kernels, the EMB1 embedding
store, prototype builders, the three classifiers, and the evaluation
harness; the CLI wires them into reproducible runs.
"""

from .classify import (
    ClassifierConfig,
    Prediction,
    classify_batch,
    classify_knn,
    classify_npc,
    classify_softmax,
    knn_multi_k,
    softmax_over_similarities,
)
from .errors import (
    BadTemplateError,
    BatchItemError,
    CatalogError,
    CatalogMismatchError,
    CenterSamplingFailedError,
    DimMismatchError,
    EmptyInputError,
    FormatError,
    InsufficientDataError,
    KTooLargeError,
    LengthMismatchError,
    MissingClassError,
    ProtoclassError,
    SpecError,
    UnknownClassError,
    ZeroVectorError,
)
from .evaluate import (
    PipelineConfig,
    Projection2D,
    crossval_2fold,
    evaluate_direction,
    fuse_sets,
    join_by_source_id,
    project_2d,
    sweep_fusion,
    sweep_k,
    sweep_prompts,
    sweep_prototype_samples,
    top1_accuracy,
)
from .linalg import (
    PcaModel,
    cosine_sim,
    cosine_sim_many,
    euclidean_dist,
    euclidean_dist_many,
    fuse_concat,
    fuse_concat_rows,
    l2_normalize,
    mean_vector,
    normalize_rows,
    pca_fit,
    pca_inverse,
    pca_transform,
    pca_transform_rows,
)
from .prototypes import (
    Prototype,
    PrototypeBank,
    build_caption_prototypes,
    build_text_prototypes,
    build_visual_prototypes,
    read_bank,
    write_bank,
)
from .report import Aggregate, EvalReport, EvalRow
from .store import (
    CaptionEntry,
    CaptionSet,
    ClassCatalog,
    EmbeddingSet,
    LabeledEmbedding,
    concat_sets,
    read_captions,
    read_set,
    sample_per_class,
    subset_by_class,
    write_captions,
    write_set,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .templates import (
    TemplateBank,
    baseline_bank,
    bank_by_name,
    expand_templates,
    load_bank,
    multiple_bank,
    save_bank,
    selected_bank,
)

__version__ = "0.1.0"
