"""Streaming frequency estimation with multi-brick sketch memory.

The core structure embeds each item into a small L1-normalized positive
vector, routes it to one of K additive memory bricks, and adds the vector at
hash-selected cells. Queries read those cells back and combine a rule-based
estimate with an optional neural decode gated on scanned stream
characteristics. Handcrafted baselines, stream generators, an evaluation
harness, and numeric theorem verifiers live alongside.
"""

from .baselines import CountMinSketch, CountSketch, ElasticSketch, make_sketch
from .embedding import EmbeddingTable
from .memory import MemoryBrick, load_brick, save_brick
from .nn import (
    BundleValidationError,
    DenseLayer,
    WeightBundle,
    load_bundle,
    rule_only_bundle,
    save_bundle,
)
from .sketch import ENSEMBLE, RULE_ONLY, BrickSketch, StreamCharacteristics, rule_estimate
from .streams import FrequencyTable, MetaTask, ZipfSpec, exact_count, gen_meta_task, gen_stream

__version__ = "0.1.0"

__all__ = [
    "BrickSketch",
    "BundleValidationError",
    "CountMinSketch",
    "CountSketch",
    "DenseLayer",
    "ElasticSketch",
    "EmbeddingTable",
    "ENSEMBLE",
    "FrequencyTable",
    "MemoryBrick",
    "MetaTask",
    "RULE_ONLY",
    "StreamCharacteristics",
    "WeightBundle",
    "ZipfSpec",
    "exact_count",
    "gen_meta_task",
    "gen_stream",
    "load_brick",
    "load_bundle",
    "make_sketch",
    "rule_estimate",
    "rule_only_bundle",
    "save_brick",
    "save_bundle",
]
