"""Candidate ranking and retrieval metrics for both query directions.

All representations are encoded once per record and cached; scoring is then
read-only over the model. Ties in the combined similarity break toward the
ascending candidate id so rankings are deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import Record
from .errors import ContractError
from .losses import combined_similarity
from .model import MolRep, OrmaModel, TextRep

logger = logging.getLogger(__name__)

DIRECTIONS = ("t2m", "m2t")


@dataclass
class RankedResult:
    query_id: str
    candidates: list[tuple[str, float]]      # (candidate id, score), best first
    rank_of_truth: int


@dataclass
class MetricReport:
    hits_at: dict[int, float]
    recall_at: dict[int, float]
    mrr: float
    mean_rank: float
    n_queries: int

    def lines(self) -> list[str]:
        """Aligned human-readable rendering."""
        rows = [("queries", f"{self.n_queries}")]
        for k in sorted(self.hits_at):
            rows.append((f"hits@{k}", f"{100.0 * self.hits_at[k]:.1f}%"))
        for k in sorted(self.recall_at):
            rows.append((f"recall@{k}", f"{100.0 * self.recall_at[k]:.1f}%"))
        rows.append(("mrr", f"{self.mrr:.4f}"))
        rows.append(("mean rank", f"{self.mean_rank:.2f}"))
        width = max(len(name) for name, _ in rows)
        return [f"{name:<{width}}  {value}" for name, value in rows]

    def tsv_lines(self) -> list[str]:
        rows = [("n_queries", self.n_queries)]
        rows += [(f"hits@{k}", v) for k, v in sorted(self.hits_at.items())]
        rows += [(f"recall@{k}", v) for k, v in sorted(self.recall_at.items())]
        rows += [("mrr", self.mrr), ("mean_rank", self.mean_rank)]
        return [f"{name}\t{value}" for name, value in rows]


def rank_candidates(query_id: str, scored: list[tuple[str, float]],
                    truth_id: str) -> RankedResult:
    """Sort candidates by score descending, ties by id ascending."""
    if not scored:
        raise ContractError("no candidates to rank")
    ordered = sorted(scored, key=lambda pair: (-pair[1], pair[0]))
    rank = next((pos for pos, (cand_id, _) in enumerate(ordered, start=1)
                 if cand_id == truth_id), None)
    if rank is None:
        raise ContractError(
            f"ground truth {truth_id!r} missing from candidate pool")
    return RankedResult(query_id=query_id, candidates=ordered,
                        rank_of_truth=rank)


def compute_metrics(results: list[RankedResult],
                    ks: tuple[int, ...] = (1, 5, 10)) -> MetricReport:
    """Hits@k (= recall@k for single-truth queries), MRR, and mean rank."""
    if not results:
        raise ContractError("no retrieval results to aggregate")
    ranks = np.array([r.rank_of_truth for r in results], dtype=np.float64)
    hits = {k: float((ranks <= k).mean()) for k in ks}
    return MetricReport(
        hits_at=hits,
        recall_at=dict(hits),
        mrr=float((1.0 / ranks).mean()),
        mean_rank=float(ranks.mean()),
        n_queries=len(results),
    )


@dataclass
class EncodedCorpus:
    """Per-record representation cache for one model."""

    text_reps: dict[str, TextRep] = field(default_factory=dict)
    mol_reps: dict[str, MolRep] = field(default_factory=dict)


def encode_corpus(model: OrmaModel, records: list[Record],
                  text_overrides: dict[str, TextRep] | None = None,
                  cache: EncodedCorpus | None = None) -> EncodedCorpus:
    """Encode every record's text and molecule once.

    ``text_overrides`` substitutes externally produced text representations
    (from the embedding exchange format) by record id.
    """
    cache = cache or EncodedCorpus()
    for rec in records:
        if rec.id not in cache.text_reps:
            if text_overrides and rec.id in text_overrides:
                cache.text_reps[rec.id] = text_overrides[rec.id]
            else:
                cache.text_reps[rec.id] = model.text_rep(rec.description)
        if rec.id not in cache.mol_reps:
            cache.mol_reps[rec.id] = model.mol_rep(rec.smiles)
    return cache


def rank_all(direction: str, model: OrmaModel, queries: list[Record],
             pool: list[Record] | None = None,
             corpus: EncodedCorpus | None = None,
             text_overrides: dict[str, TextRep] | None = None
             ) -> list[RankedResult]:
    """Rank the pool for every query; the pool defaults to the queries
    themselves (test-only convention)."""
    if direction not in DIRECTIONS:
        raise ContractError(f"direction must be one of {DIRECTIONS}")
    pool_records = list(pool) if pool is not None else list(queries)
    if not pool_records:
        raise ContractError("empty candidate pool")
    pool_ids = {rec.id for rec in pool_records}
    missing = [rec.id for rec in queries if rec.id not in pool_ids]
    if missing:
        raise ContractError(
            f"pool lacks ground-truth records for queries: {missing[:5]}")

    corpus = encode_corpus(model, pool_records, text_overrides, corpus)
    corpus = encode_corpus(model, queries, text_overrides, corpus)
    weights = model.config.weights()
    levels = model.config.levels

    results = []
    for query in queries:
        scored = []
        for cand in pool_records:
            if direction == "t2m":
                sims = model.pair_similarities(corpus.text_reps[query.id],
                                               corpus.mol_reps[cand.id])
            else:
                sims = model.pair_similarities(corpus.text_reps[cand.id],
                                               corpus.mol_reps[query.id])
            scored.append((cand.id, combined_similarity(sims, weights, levels)))
        results.append(rank_candidates(query.id, scored, query.id))
    return results


def run_retrieval(direction: str, model: OrmaModel, queries: list[Record],
                  pool: list[Record] | None = None,
                  ks: tuple[int, ...] = (1, 5, 10),
                  corpus: EncodedCorpus | None = None,
                  text_overrides: dict[str, TextRep] | None = None
                  ) -> MetricReport:
    """Rank every query against the pool and aggregate the metrics."""
    return compute_metrics(
        rank_all(direction, model, queries, pool=pool, corpus=corpus,
                 text_overrides=text_overrides), ks=ks)
