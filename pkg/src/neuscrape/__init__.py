"""Neural main-content extraction from HTML.

Pages become depth-first sequences of text, table and list nodes; a
hierarchical transformer labels each node, and the nodes labeled as primary
content make up the extracted text.
"""
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dom import (
    DomNode,
    DomTree,
    NodeKind,
    NodeSequence,
    build_node_sequence,
    chunk_sequence,
    html_to_nodes,
    normalize_text,
    parse_html,
)
from .errors import *  # noqa: F401,F403
from .extract import Extraction, Scraper, baseline_density, baseline_keep_all, evaluate_extractor, extract_primary
from .metrics import EvalReport, evaluate_by_containment, evaluate_node_level
from .model import (
    LABELS,
    ModelConfig,
    NeuScraperModel,
    compute_loss,
    encode_node,
    encode_sequence,
    predict_labels,
)
from .quantize import QuantizedModel, load_model, quantize
from .synthetic import LabeledDocument, SyntheticSpec, generate_synthetic_corpus, read_corpus, write_corpus
from .tokenizer import TokenizerConfig, tokenize
from .trainer import TrainConfig, lr_at, train

__version__ = "0.1.0"
