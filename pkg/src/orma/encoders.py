"""Text and molecule encoders projecting into one shared alignment space.

The text tower is a small trainable mixer: token + position embeddings pass
through two residual layers where each row is updated from itself and the
mean over all rows, then a linear projection maps the leading [CLS] row to
the sentence representation and the remaining rows to token representations.
It is deliberately lightweight; real pretrained sentence/token vectors can
be substituted through the embedding exchange file format below.

The molecule tower runs a 3-layer graph convolution (output width 300) over
the heterogeneous graph and projects atom, motif, and molecule rows into the
same width ``d`` as the text side.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional

import numpy as np

from .errors import ContractError, DimensionError, InputError
from .hetero import HeteroGraph, N_ELEMENT_ROWS, initial_node_features, normalized_adjacency
from .tensor import (Tensor, add, gather_rows, matmul, mul, relu, slice_rows,
                     tanh, tsum)

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
CLS_TOKEN = "[CLS]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN)
CLS_ID = SPECIAL_TOKENS.index(CLS_TOKEN)

TEXT_MIX_LAYERS = 2
GCN_LAYERS = 3
GCN_OUTPUT_DIM = 300

EMBEDDING_MAGIC = b"ORMAEMB1"

_WORD_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


def text_tokens(text: str) -> list[str]:
    """Lowercase word/punctuation split: alphanumeric runs and single
    punctuation marks become separate tokens."""
    return _WORD_RE.findall(text.lower())


class Vocabulary:
    """Token table with [PAD]=0, [UNK]=1, [CLS]=2 followed by sorted words."""

    def __init__(self, tokens: list[str]):
        if tuple(tokens[:3]) != SPECIAL_TOKENS:
            raise ContractError("vocabulary must start with the special tokens")
        self.tokens = list(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    @classmethod
    def build(cls, texts) -> "Vocabulary":
        words = set()
        for text in texts:
            words.update(text_tokens(text))
        words.discard("")
        return cls(list(SPECIAL_TOKENS) + sorted(words))

    def id_of(self, token: str) -> int:
        return self.index.get(token, self.index[UNK_TOKEN])


def tokenize_text(text: str, vocab: Vocabulary, max_text_len: int = 256) -> np.ndarray:
    """Token ids with [CLS] prepended, truncated to ``max_text_len`` ids.

    Raises ``InputError`` when nothing remains after tokenization.
    """
    pieces = text_tokens(text)
    if not pieces:
        raise InputError("text is empty after tokenization")
    pieces = pieces[:max_text_len - 1]
    ids = [vocab.index[CLS_TOKEN]] + [vocab.id_of(tok) for tok in pieces]
    return np.asarray(ids, dtype=np.intp)


# ---------------------------------------------------------------------------
# parameters


@dataclass
class EncoderParams:
    """Named parameter tensors for both towers plus their dimensions."""

    params: dict[str, Tensor]
    vocab_size: int
    d: int
    f0: int
    gcn_dim: int
    max_text_len: int

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def named(self) -> dict[str, Tensor]:
        return self.params


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


def init_encoder_params(vocab_size: int, d: int = 300, f0: int = 64,
                        gcn_dim: int = GCN_OUTPUT_DIM, max_text_len: int = 256,
                        seed: int = 0) -> EncoderParams:
    """Seeded parameter initialization; creation order is fixed so a given
    seed always produces identical tensors."""
    rng = np.random.default_rng(seed)
    p: dict[str, Tensor] = {}

    def param(name, array):
        p[name] = Tensor(array, requires_grad=True)

    param("text.token_embedding", rng.normal(0.0, 0.1, size=(vocab_size, f0)))
    param("text.position_embedding", rng.normal(0.0, 0.1, size=(max_text_len, f0)))
    for layer in range(1, TEXT_MIX_LAYERS + 1):
        param(f"text.mix{layer}.self_weight", _xavier(rng, f0, f0))
        param(f"text.mix{layer}.context_weight", _xavier(rng, f0, f0))
        param(f"text.mix{layer}.bias", np.zeros((1, f0)))
    param("text.projection", _xavier(rng, f0, d))
    param("mol.element_embedding", rng.normal(0.0, 0.1, size=(N_ELEMENT_ROWS, f0)))
    widths = [f0] + [gcn_dim] * GCN_LAYERS
    for layer in range(1, GCN_LAYERS + 1):
        param(f"mol.gcn{layer}.weight", _xavier(rng, widths[layer - 1], widths[layer]))
    param("mol.projection", _xavier(rng, gcn_dim, d))
    return EncoderParams(params=p, vocab_size=vocab_size, d=d, f0=f0,
                         gcn_dim=gcn_dim, max_text_len=max_text_len)


# ---------------------------------------------------------------------------
# forward passes


def encode_text(ids: np.ndarray, enc: EncoderParams) -> tuple[Tensor, Tensor]:
    """Run the text tower over one id sequence.

    Returns ``(sentence, tokens)``: the projected [CLS] row with shape
    (1, d) and the remaining projected rows with shape (N_t, d).
    """
    ids = np.asarray(ids, dtype=np.intp)
    if ids.size < 2:
        raise ContractError("id sequence must hold [CLS] plus at least one token")
    if ids[0] != CLS_ID:
        raise ContractError("id sequence must start with [CLS]")
    n = ids.size
    h = add(gather_rows(enc["text.token_embedding"], ids),
            slice_rows(enc["text.position_embedding"], 0, n))
    for layer in range(1, TEXT_MIX_LAYERS + 1):
        mean_row = mul(tsum(h, axis=0, keepdims=True), 1.0 / n)
        update = tanh(add(add(matmul(h, enc[f"text.mix{layer}.self_weight"]),
                              matmul(mean_row, enc[f"text.mix{layer}.context_weight"])),
                          enc[f"text.mix{layer}.bias"]))
        h = add(h, update)
    projected = matmul(h, enc["text.projection"])
    sentence = slice_rows(projected, 0, 1)
    tokens = slice_rows(projected, 1, n)
    return sentence, tokens


def gcn_node_outputs(hetero: HeteroGraph, enc: EncoderParams) -> Tensor:
    """Unprojected graph-convolution outputs with shape (n_nodes, gcn_dim)."""
    x = initial_node_features(hetero, enc["mol.element_embedding"])
    a_norm = normalized_adjacency(hetero)
    for layer in range(1, GCN_LAYERS + 1):
        x = matmul(matmul(a_norm, x), enc[f"mol.gcn{layer}.weight"])
        if layer < GCN_LAYERS:
            x = relu(x)
    return x


def encode_molecule(hetero: HeteroGraph,
                    enc: EncoderParams) -> tuple[Tensor, Tensor, Tensor]:
    """Run the molecule tower over one heterogeneous graph.

    Returns ``(molecule, atoms, motifs)`` with shapes (1, d), (N_a, d),
    (N_m, d).
    """
    projected = matmul(gcn_node_outputs(hetero, enc), enc["mol.projection"])
    atoms = slice_rows(projected, 0, hetero.n_atoms)
    motifs = slice_rows(projected, hetero.n_atoms, hetero.n_atoms + hetero.n_motifs)
    molecule = slice_rows(projected, hetero.n_nodes - 1, hetero.n_nodes)
    return molecule, atoms, motifs


# ---------------------------------------------------------------------------
# representation containers and the embedding exchange format


@dataclass
class TextBatchReps:
    sentence: np.ndarray               # (B, d)
    tokens: list[np.ndarray]           # per sample (N_t, d)
    token_counts: list[int]


@dataclass
class MolBatchReps:
    molecule: np.ndarray               # (B, d)
    atoms: list[np.ndarray]
    motifs: list[np.ndarray]


def save_external_embeddings(path: str, ids: list[str],
                             sentences: np.ndarray,
                             tokens: list[np.ndarray]) -> None:
    """Write per-record sentence and token vectors as little-endian float32.

    Layout: magic, then per record an id (u32 length + UTF-8 bytes), two u32
    counts (token rows, width), the sentence row, and the token rows.
    """
    if len(ids) != len(tokens) or len(ids) != sentences.shape[0]:
        raise ContractError("ids, sentences, and tokens must align")
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        for i, rec_id in enumerate(ids):
            encoded = rec_id.encode("utf-8")
            tok = np.ascontiguousarray(tokens[i], dtype="<f4")
            sent = np.ascontiguousarray(sentences[i], dtype="<f4")
            if tok.ndim != 2 or tok.shape[1] != sent.shape[0]:
                raise DimensionError(
                    f"record {rec_id!r}: token width {tok.shape} does not "
                    f"match sentence width {sent.shape[0]}")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<II", tok.shape[0], tok.shape[1]))
            fh.write(sent.tobytes())
            fh.write(tok.tobytes())


def _read_exact(fh: BinaryIO, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise InputError(f"embedding file truncated while reading {what}")
    return data


def load_external_embeddings(path: str,
                             expect_width: Optional[int] = None
                             ) -> tuple[list[str], TextBatchReps]:
    """Read an embedding exchange file back into per-record representations.

    ``expect_width`` (usually the model's shared width d) is validated
    against every record.
    """
    ids: list[str] = []
    sentences: list[np.ndarray] = []
    tokens: list[np.ndarray] = []
    with open(path, "rb") as fh:
        magic = fh.read(len(EMBEDDING_MAGIC))
        if magic != EMBEDDING_MAGIC:
            raise InputError(f"malformed header: expected {EMBEDDING_MAGIC!r}")
        while True:
            raw = fh.read(4)
            if not raw:
                break
            if len(raw) != 4:
                raise InputError("embedding file truncated in record header")
            (id_len,) = struct.unpack("<I", raw)
            rec_id = _read_exact(fh, id_len, "record id").decode("utf-8")
            rows, width = struct.unpack("<II", _read_exact(fh, 8, "counts"))
            if rows < 1:
                raise InputError(f"record {rec_id!r} has no token rows")
            if expect_width is not None and width != expect_width:
                raise DimensionError(
                    f"record {rec_id!r} width {width} does not match "
                    f"expected width {expect_width}")
            sent = np.frombuffer(
                _read_exact(fh, 4 * width, "sentence"), dtype="<f4")
            tok = np.frombuffer(
                _read_exact(fh, 4 * rows * width, "tokens"),
                dtype="<f4").reshape(rows, width)
            ids.append(rec_id)
            sentences.append(sent.astype(np.float64))
            tokens.append(tok.astype(np.float64))
    if not ids:
        raise InputError("embedding file holds no records")
    return ids, TextBatchReps(sentence=np.stack(sentences),
                              tokens=tokens,
                              token_counts=[t.shape[0] for t in tokens])
