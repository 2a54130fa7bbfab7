"""Semi-supervised domain adaptation pipeline for machine translation.

The pipeline labels training sentences with a zero-shot classifier, builds
per-domain embedding centroids, routes inputs at inference time by cosine
similarity to those centroids, serves translation requests through a
per-domain backend gateway, mines parallel text from bilingual block
layouts, and evaluates with domain-stratified corpus BLEU.
"""

from .blockalign import (
    BlockDocument,
    BlockMatch,
    BlockPage,
    TextBlock,
    filter_blocks,
    match_blocks,
    matches_to_pairs,
    normalize_blocks,
    read_blocks,
)
from .centroids import (
    CentroidEntry,
    CentroidIndex,
    EmbedderClient,
    MockEmbedder,
    RemoteEmbedder,
    RoutingDecision,
    build_index,
    cosine,
    decide,
    embed_mock,
    load_index,
    route,
    save_index,
    token_pseudo_vector,
)
from .corpus import (
    Corpus,
    CorpusStats,
    SentencePair,
    SplitSpec,
    corpus_stats,
    deduplicate,
    ingest_moses,
    ingest_tsv,
    merge_corpora,
    normalize,
    read_corpus,
    segment_sentences,
    split_multi_sentence,
    train_eval_split,
    write_corpus,
)
from .evaluation import (
    BleuScore,
    DomainResult,
    EvalReport,
    corpus_bleu,
    render_report,
    report_from_dict,
    report_to_dict,
    stratified_eval,
    tokenize_eval,
)
from .gateway import (
    BackendRegistry,
    BackendSpec,
    BatchItemError,
    HealthProber,
    TranslationRequest,
    TranslationResponse,
    TranslationService,
    create_app,
)
from .labeler import (
    DEFAULT_DOMAINS,
    Classification,
    ClassifierClient,
    KeywordClassifier,
    LabeledPair,
    LabelerConfig,
    LabelingResult,
    RemoteClassifier,
    label_by_corpus,
    label_regime_a,
    label_regime_b,
    partition_by_domain,
    read_labeled,
    write_labeled,
)

__version__ = "0.1.0"
