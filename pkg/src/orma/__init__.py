"""Cross-modal text-molecule retrieval with transport-based token-motif
alignment.

Pipeline: SMILES strings parse into molecular graphs, a rule-based
fragmentation groups atoms into motifs, and a hierarchical heterogeneous
graph (atom / motif / molecule nodes) feeds a graph-convolution encoder.
Texts run through a small trainable encoder. Optimal transport aligns tokens
with motifs to build fused multi-token representations, three contrastive
losses align the modalities at token-atom, multitoken-motif, and
sentence-molecule granularity, and retrieval ranks candidates by the
weighted combination of the three similarities.
"""

from .config import RunConfig, load_config
from .data import Record, load_dataset, planted_records
from .errors import (CheckpointError, ContractError, DatasetError,
                     DimensionError, InputError, LexicalError, NumericError,
                     OrmaError, ParseError, TapeError)
from .losses import LEVELS, LossWeights, combined_similarity
from .model import OrmaModel
from .retrieval import MetricReport, compute_metrics, run_retrieval
from .train import TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "CheckpointError", "ContractError", "DatasetError", "DimensionError",
    "InputError", "LEVELS", "LexicalError", "LossWeights", "MetricReport",
    "NumericError", "OrmaError", "OrmaModel", "ParseError", "Record",
    "RunConfig", "TapeError", "TrainResult", "combined_similarity",
    "compute_metrics", "load_config", "load_dataset", "planted_records",
    "run_retrieval", "train", "__version__",
]
