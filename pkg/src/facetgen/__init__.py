"""Query-facet generation workbench: objectives, a tiny seq2seq model, decoding and metrics."""

from .corpus import QueryRecord, load_mimics, load_native, synthesize_corpus, write_native
from .estimator import FacetGenerator
from .metrics import EvalOptions, MetricReport, evaluate
from .permute import OBJECTIVES, count_full_examples, estimate_epoch_cost
from .stats import paired_ttest
from .text import Vocabulary, build_vocabulary

__version__ = "0.1.0"

__all__ = [
    "EvalOptions",
    "FacetGenerator",
    "MetricReport",
    "OBJECTIVES",
    "QueryRecord",
    "Vocabulary",
    "build_vocabulary",
    "count_full_examples",
    "estimate_epoch_cost",
    "evaluate",
    "load_mimics",
    "load_native",
    "paired_ttest",
    "synthesize_corpus",
    "write_native",
]
