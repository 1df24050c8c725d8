"""warnrank: rank static-analysis warnings by true-positive likelihood.

Pipeline: parse a mini-C corpus, build the inter-procedural system
dependence graph, slice each warning's context, abstract and tokenize it,
embed tokens with from-scratch CBOW, score warnings with a dual-branch
BiLSTM ranker, and evaluate ranked lists with Top-k% precision/recall.
"""

from . import minic
from .dependence import (
    DependenceEdge,
    EdgeKind,
    Node,
    NodeKind,
    SdgError,
    SystemDependenceGraph,
    build_sdg,
    control_dependence,
    data_dependence,
    edge_list_text,
    post_dominators,
    reaching_definitions,
)
from .embedding import (
    CbowConfig,
    EmbeddingMatrix,
    EmptyCorpus,
    embed,
    load_embedding,
    save_embedding,
    train_cbow,
)
from .evaluation import (
    FoldPlan,
    K_GRID,
    MetricReport,
    RankedList,
    evaluate_ranking,
    mean_report,
    precision_at_k,
    rank,
    recall_at_k,
    stratified_kfold,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    run_ablation,
    run_experiment,
)
from .neural import (
    AdamaxState,
    AllMasked,
    ModelConfig,
    RankerModel,
    TrainData,
    adamax_step,
    bilstm,
    forward,
    global_max_pool,
    init_model,
    load_model,
    loss_and_grads,
    lstm_forward,
    save_model,
    train,
)
from .preprocess import (
    AbstractionTable,
    CapacityError,
    PreprocessConfig,
    TokenSequence,
    Vocabulary,
    abstract_token_lists,
    build_vocab,
    fit_length,
    tokenize_context,
)
from .slicing import ContextMode, UnknownNode, UnresolvedWarning, WarningContext, extract_context, slice_nodes
from .synth import SynthResult, synthesize_corpus, write_corpus
from .warnings_io import (
    Dataset,
    DuplicateWarning,
    SchemaError,
    Warning,
    detect_bo,
    detect_npd,
    load_corpus,
    load_warnings,
    save_warnings,
)

__version__ = "0.1.0"
