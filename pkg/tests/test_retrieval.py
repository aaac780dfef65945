import numpy as np
import pytest

from orma.config import RunConfig
from orma.data import Record, planted_records
from orma.encoders import Vocabulary
from orma.errors import ContractError
from orma.model import MolRep, OrmaModel, TextRep
from orma.retrieval import (compute_metrics, encode_corpus, rank_all,
                            rank_candidates, run_retrieval, RankedResult)


def tiny_model(records, seed=0, **cfg):
    config = RunConfig(d=24, f0=8, seed=seed, epochs=1, batch_size=2,
                       **cfg).validate()
    vocab = Vocabulary.build([r.description for r in records])
    return OrmaModel.from_config(config, vocab)


class TestRankCandidates:
    def test_single_candidate(self):
        out = rank_candidates("q", [("c", 0.4)], "c")
        assert out.rank_of_truth == 1

    def test_tie_breaks_by_ascending_id(self):
        out = rank_candidates("q", [("a", 0.9), ("b", 0.9)], "b")
        assert out.rank_of_truth == 2
        assert [cid for cid, _ in out.candidates] == ["a", "b"]

    def test_scores_non_increasing(self):
        out = rank_candidates("q", [("a", 0.1), ("b", 0.9), ("c", 0.5)], "a")
        scores = [s for _, s in out.candidates]
        assert scores == sorted(scores, reverse=True)
        assert out.rank_of_truth == 3

    def test_missing_truth_rejected(self):
        with pytest.raises(ContractError):
            rank_candidates("q", [("a", 1.0)], "zzz")

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            rank_candidates("q", [], "a")


class TestComputeMetrics:
    def _results(self, ranks):
        return [RankedResult(query_id=f"q{i}", candidates=[("x", 0.0)],
                             rank_of_truth=r) for i, r in enumerate(ranks)]

    def test_hand_computed_example(self):
        report = compute_metrics(self._results([1, 2, 4]), ks=(1, 5, 10))
        assert report.mrr == pytest.approx(0.5833, abs=1e-4)
        assert report.mean_rank == pytest.approx(2.3333, abs=1e-4)
        assert report.hits_at[1] == pytest.approx(1 / 3)

    def test_all_rank_one(self):
        report = compute_metrics(self._results([1, 1, 1]))
        assert report.hits_at[1] == 1.0
        assert report.mrr == 1.0
        assert report.mean_rank == 1.0

    def test_rank_three_cutoffs(self):
        report = compute_metrics(self._results([3]), ks=(1, 10))
        assert report.hits_at[1] == 0.0
        assert report.hits_at[10] == 1.0

    def test_hits_non_decreasing_in_k(self):
        report = compute_metrics(self._results([1, 3, 7, 2, 9]),
                                 ks=(1, 2, 3, 5, 10))
        values = [report.hits_at[k] for k in (1, 2, 3, 5, 10)]
        assert values == sorted(values)

    def test_mrr_bounds(self):
        report = compute_metrics(self._results([1, 4, 2]))
        assert report.hits_at[1] <= report.mrr <= 1.0

    def test_recall_equals_hits_for_single_truth(self):
        report = compute_metrics(self._results([1, 2]))
        assert report.recall_at == report.hits_at

    def test_permutation_invariant(self):
        a = compute_metrics(self._results([1, 5, 3, 2]))
        b = compute_metrics(self._results([2, 3, 5, 1]))
        assert a.mrr == b.mrr and a.mean_rank == b.mean_rank

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            compute_metrics([])


class TestRunRetrieval:
    def test_counts_and_ranks_in_range(self):
        records = planted_records(10)
        model = tiny_model(records)
        results = rank_all("t2m", model, records)
        assert len(results) == 10
        for res in results:
            assert len(res.candidates) == 10
            assert 1 <= res.rank_of_truth <= 10

    def test_full_pool_never_improves_rank(self):
        records = planted_records(12)
        queries = records[:6]
        model = tiny_model(records)
        test_only = rank_all("t2m", model, queries, pool=queries)
        full = rank_all("t2m", model, queries, pool=records)
        for small, big in zip(test_only, full):
            assert big.rank_of_truth >= small.rank_of_truth

    def test_directions_swap_roles(self):
        records = planted_records(6)
        model = tiny_model(records)
        t2m = run_retrieval("t2m", model, records)
        m2t = run_retrieval("m2t", model, records)
        assert t2m.n_queries == m2t.n_queries == 6

    def test_deterministic_reports(self):
        records = planted_records(6)
        model = tiny_model(records)
        a = run_retrieval("t2m", model, records)
        b = run_retrieval("t2m", model, records)
        assert a == b

    def test_planted_orthogonal_reps_rank_first(self):
        # bypass the encoders: hand the scorer orthogonal representations
        records = [Record(id=f"r{i}", smiles="C", description="x")
                   for i in range(4)]
        model = tiny_model(records)
        corpus = encode_corpus(model, records)
        eye = np.eye(4)
        for i, rec in enumerate(records):
            basis = np.zeros((1, model.config.d))
            basis[0, i] = 1.0
            corpus.text_reps[rec.id] = TextRep(sentence=basis[0].copy(),
                                               tokens=basis.copy())
            corpus.mol_reps[rec.id] = MolRep(molecule=basis[0].copy(),
                                             atoms=basis.copy(),
                                             motifs=basis.copy())
        del eye
        results = rank_all("t2m", model, records, corpus=corpus)
        assert all(res.rank_of_truth == 1 for res in results)
        results = rank_all("m2t", model, records, corpus=corpus)
        assert all(res.rank_of_truth == 1 for res in results)

    def test_missing_truth_in_pool_rejected(self):
        records = planted_records(4)
        model = tiny_model(records)
        with pytest.raises(ContractError):
            rank_all("t2m", model, records[:2], pool=records[2:])

    def test_bad_direction_rejected(self):
        records = planted_records(3)
        with pytest.raises(ContractError):
            rank_all("sideways", tiny_model(records), records)

    def test_empty_pool_rejected(self):
        records = planted_records(3)
        with pytest.raises(ContractError):
            rank_all("t2m", tiny_model(records), records, pool=[])

    def test_report_rendering(self):
        records = planted_records(4)
        report = run_retrieval("t2m", tiny_model(records), records, ks=(1, 5))
        text = "\n".join(report.lines())
        assert "hits@1" in text and "mean rank" in text
        tsv = report.tsv_lines()
        assert any(line.startswith("mrr\t") for line in tsv)
