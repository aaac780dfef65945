"""Token-motif transport: cost matrix, proximal-point solver, hard
alignment, and fused multi-token representations.

The solver output is treated as a constant during backpropagation: the hard
alignment is non-differentiable and the contrastive losses drive the
representations directly, so everything here works on plain arrays. Fusion
returns a constant averaging matrix so the fused rows can be rebuilt on the
gradient tape from live token representations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError, NumericError

ALIGN_MODES = ("mass", "paper-form")


@dataclass
class IpotConfig:
    """Solver knobs; defaults follow the proximal-point method's usual
    regime (unit proximal weight, one Sinkhorn sweep per outer step)."""

    outer: int = 50
    inner: int = 1
    prox: float = 1.0
    tol: float = 1e-6


@dataclass
class TransportPlan:
    matrix: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    converged: bool
    marginal_violation: float
    iterations: int
    objective: float
    # raw per-outer-step objectives, before the final feasibility polish
    objective_history: np.ndarray = field(repr=False, default=None)


@dataclass
class TokenMotifAlignment:
    """Total token -> motif map plus its exact inverse (empty groups
    omitted)."""

    target_of: np.ndarray                 # one motif index per token
    groups: dict[int, list[int]]

    @property
    def n_groups(self) -> int:
        return len(self.groups)


@dataclass
class MultiTokenReps:
    """Per-motif means of aligned token rows, ordered by motif index."""

    rows: np.ndarray                      # (n_groups, d)
    motif_index: list[int]
    averaging: np.ndarray                 # (n_groups, n_tokens) constant


def cost_matrix(token_reps: np.ndarray, motif_reps: np.ndarray) -> np.ndarray:
    """Transport cost 1 - cosine for every (token, motif) pair; entries lie
    in [0, 2]."""
    token_reps = np.asarray(token_reps, dtype=np.float64)
    motif_reps = np.asarray(motif_reps, dtype=np.float64)
    if token_reps.ndim != 2 or motif_reps.ndim != 2:
        raise DimensionError("cost_matrix expects two row matrices")
    if token_reps.shape[1] != motif_reps.shape[1]:
        raise DimensionError(
            f"width mismatch: {token_reps.shape[1]} vs {motif_reps.shape[1]}")
    return 1.0 - kernels.pairwise_cosine(
        np.ascontiguousarray(token_reps), np.ascontiguousarray(motif_reps))


def uniform_marginals(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def ipot(cost: np.ndarray, mu: np.ndarray = None, nu: np.ndarray = None,
         cfg: IpotConfig = None) -> TransportPlan:
    """Solve the transport problem on ``cost`` with the proximal-point
    iteration.

    Marginals default to uniform; explicit marginals must be strictly
    positive and sum to one. Raises ``NumericError`` if the kernel or plan
    stops being finite.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise DimensionError("cost must be a matrix")
    n, m = cost.shape
    mu = uniform_marginals(n) if mu is None else np.asarray(mu, dtype=np.float64)
    nu = uniform_marginals(m) if nu is None else np.asarray(nu, dtype=np.float64)
    if mu.shape != (n,) or nu.shape != (m,):
        raise DimensionError("marginal lengths must match the cost shape")
    for name, marg in (("mu", mu), ("nu", nu)):
        if (marg <= 0).any() or abs(marg.sum() - 1.0) > 1e-9:
            raise ContractError(
                f"{name} must be strictly positive and sum to 1")
    cfg = cfg or IpotConfig()
    if not np.isfinite(cost).all():
        raise NumericError("cost matrix contains non-finite entries")
    plan, violation, iterations, history, objective = kernels.ipot_solve(
        cost, mu, nu, cfg.outer, cfg.inner, cfg.prox, cfg.tol)
    if not np.isfinite(plan).all():
        raise NumericError("transport plan diverged to non-finite values")
    return TransportPlan(matrix=plan, mu=mu, nu=nu,
                         converged=violation <= cfg.tol,
                         marginal_violation=violation,
                         iterations=iterations,
                         objective=objective,
                         objective_history=history)


def align_tokens(plan: TransportPlan, cost: np.ndarray,
                 mode: str = "mass") -> TokenMotifAlignment:
    """Collapse the plan to one motif per token.

    ``mass`` picks the column with the most transported mass; ``paper-form``
    picks the smallest per-cell plan-cost product. Ties break toward the
    lowest motif index.
    """
    if mode not in ALIGN_MODES:
        raise ContractError(f"unknown alignment mode {mode!r}")
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if plan.matrix.shape != cost.shape:
        raise DimensionError("plan and cost shapes differ")
    target = np.asarray(
        kernels.align_from_plan(plan.matrix, cost, mode == "mass"),
        dtype=np.int64)
    groups: dict[int, list[int]] = {}
    for token_idx, motif_idx in enumerate(target):
        groups.setdefault(int(motif_idx), []).append(token_idx)
    return TokenMotifAlignment(target_of=target,
                               groups=dict(sorted(groups.items())))


def fuse_multitokens(token_reps: np.ndarray,
                     alignment: TokenMotifAlignment) -> MultiTokenReps:
    """Average token rows per aligned motif; one output row per non-empty
    group in ascending motif order."""
    token_reps = np.ascontiguousarray(token_reps, dtype=np.float64)
    if len(alignment.target_of) != token_reps.shape[0]:
        raise ContractError("alignment does not cover the token rows")
    motif_ids = sorted(alignment.groups)
    averaging = np.zeros((len(motif_ids), token_reps.shape[0]))
    for row, motif_idx in enumerate(motif_ids):
        members = alignment.groups[motif_idx]
        averaging[row, members] = 1.0 / len(members)
    rows = averaging @ token_reps
    return MultiTokenReps(rows=rows, motif_index=motif_ids, averaging=averaging)
