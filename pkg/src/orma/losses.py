"""Per-level similarities, batch contrastive losses, and their weighted
combination.

Three levels share one recipe: ``ta`` compares token rows with atom rows,
``mm`` compares fused multi-token rows with motif rows (both through
``fine_similarity``), and ``sm`` is the plain cosine between sentence and
molecule vectors. Levels can be toggled for ablations; the weights of the
remaining levels are renormalized to sum to one, and the same rule applies
to the inference-time combined similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .kernels import _l1_cols, _minmax_rows
from .tensor import (Tensor, add, cosine_sim, l1_normalize, log, matmul,
                     min_max_normalize, mul, l2_normalize, stack_scalar_matrix,
                     sub, sum_pool, transpose, tsum, exp)

LEVELS = ("ta", "mm", "sm")


@dataclass(frozen=True)
class LossWeights:
    """Convex combination weights: ``alpha`` for the token-atom level,
    ``beta`` for the multitoken-motif level, the remainder for the
    sentence-molecule level."""

    alpha: float = 0.5
    beta: float = 0.2

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta > 1 + 1e-12:
            raise ContractError(
                f"weights must satisfy alpha, beta >= 0 and alpha + beta <= 1; "
                f"got alpha={self.alpha}, beta={self.beta}")

    def level_weights(self, levels=LEVELS) -> dict[str, float]:
        """Weights restricted to the active levels, renormalized to sum 1."""
        for level in levels:
            if level not in LEVELS:
                raise ContractError(f"unknown level {level!r}")
        if not levels:
            raise ContractError("at least one level must be active")
        base = {"ta": self.alpha, "mm": self.beta,
                "sm": 1.0 - self.alpha - self.beta}
        total = sum(base[level] for level in levels)
        if total <= 0:
            raise ContractError(
                f"active levels {levels} carry zero total weight")
        return {level: base[level] / total for level in levels}


@dataclass
class LevelSimilarities:
    s_ta: float
    s_mm: float
    s_sm: float

    def as_dict(self) -> dict[str, float]:
        return {"ta": self.s_ta, "mm": self.s_mm, "sm": self.s_sm}


def fine_similarity(x: Tensor, y: Tensor, grad_through_norm: bool = True) -> Tensor:
    """Alignment-weighted similarity between two row collections.

    The pairwise cosine matrix is min-max normalized within each x-row,
    l1-normalized within each y-column to form alignment weights, and the
    weights fold y's rows into per-x-row counterparts; the result is the
    cosine of the two sum-pooled sides. With ``grad_through_norm`` off the
    weights are treated as constants during backpropagation.
    """
    if x.ndim != 2 or y.ndim != 2:
        raise DimensionError("fine_similarity expects row matrices")
    if x.shape[1] != y.shape[1]:
        raise DimensionError(
            f"width mismatch: {x.shape[1]} vs {y.shape[1]}")
    cos_matrix = matmul(l2_normalize(x), transpose(l2_normalize(y)))
    if grad_through_norm:
        weights = l1_normalize(min_max_normalize(cos_matrix, axis="row"),
                               axis="col")
    else:
        weights = Tensor(_l1_cols(_minmax_rows(cos_matrix.data)))
    y_updated = matmul(weights, y)
    return cosine_sim(sum_pool(x), sum_pool(y_updated))


def sentence_similarity(sentence: Tensor, molecule: Tensor) -> Tensor:
    """Cosine between the sentence vector and the molecule vector."""
    return cosine_sim(sentence, molecule)


def batch_matrix(level: str, text_side: list[Tensor], mol_side: list[Tensor],
                 temperature: float = 1.0,
                 grad_through_norm: bool = True) -> Tensor:
    """(B, B) similarity matrix pairing text sample q with molecule sample k.

    ``text_side``/``mol_side`` carry the level's per-sample representations:
    token or fused multi-token matrices against atom or motif matrices for
    the fine levels, sentence against molecule rows for ``sm``. Entries are
    divided by ``temperature``.
    """
    if level not in LEVELS:
        raise ContractError(f"unknown level {level!r}")
    if len(text_side) != len(mol_side):
        raise DimensionError("batch sides differ in length")
    if not text_side:
        raise DimensionError("empty batch")
    if temperature <= 0:
        raise ContractError("temperature must be positive")
    grid = []
    for text_rep in text_side:
        row = []
        for mol_rep in mol_side:
            if level == "sm":
                cell = sentence_similarity(text_rep, mol_rep)
            else:
                cell = fine_similarity(text_rep, mol_rep,
                                       grad_through_norm=grad_through_norm)
            row.append(cell)
        grid.append(row)
    matrix = stack_scalar_matrix(grid)
    if temperature != 1.0:
        matrix = mul(matrix, 1.0 / temperature)
    return matrix


def _logsumexp_sum(s: Tensor, axis: int) -> Tensor:
    """Sum over slices of log-sum-exp along ``axis``; the max shift is a
    constant, which leaves the gradient exact."""
    shift = s.data.max(axis=axis, keepdims=True)
    shifted = exp(sub(s, shift))
    lse = add(log(tsum(shifted, axis=axis, keepdims=True)), shift)
    return tsum(lse)


def contrastive_cce(s: Tensor) -> Tensor:
    """Symmetric cross-entropy over a square batch similarity matrix.

    Averages the two retrieval directions: columns provide candidates for
    each text, rows provide candidates for each molecule, and the diagonal
    holds the matched pairs.
    """
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ContractError(f"similarity matrix must be square, got {s.shape}")
    b = s.shape[0]
    diag_sum = tsum(mul(s, Tensor(np.eye(b))))
    col_terms = sub(_logsumexp_sum(s, axis=0), diag_sum)
    row_terms = sub(_logsumexp_sum(s, axis=1), diag_sum)
    return mul(add(col_terms, row_terms), 1.0 / (2.0 * b))


def total_loss(level_losses: dict[str, Tensor], weights: LossWeights,
               levels=LEVELS) -> Tensor:
    """Weighted combination of the active per-level losses."""
    missing = [level for level in levels if level not in level_losses]
    if missing:
        raise ContractError(f"missing level losses: {missing}")
    level_weights = weights.level_weights(levels)
    total = None
    for level in levels:
        term = mul(level_losses[level], level_weights[level])
        total = term if total is None else add(total, term)
    return total


def combined_similarity(sims: LevelSimilarities, weights: LossWeights,
                        levels=LEVELS) -> float:
    """Inference-time score: the same weighting rule applied to the three
    level similarities of one text-molecule pair."""
    level_weights = weights.level_weights(levels)
    values = sims.as_dict()
    return float(sum(level_weights[level] * values[level] for level in levels))
