import itertools

import numpy as np
import pytest

from orma.errors import ContractError, DimensionError, NumericError
from orma.ot import (IpotConfig, align_tokens, cost_matrix, fuse_multitokens,
                     ipot, uniform_marginals)

TIGHT = IpotConfig(outer=500, prox=0.5, tol=1e-9)


def permutation_optimum(cost: np.ndarray) -> float:
    """Exact optimum over permutation couplings scaled by 1/n (brute force)."""
    n = cost.shape[0]
    return min(sum(cost[i, perm[i]] for i in range(n)) / n
               for perm in itertools.permutations(range(n)))


class TestCostMatrix:
    def test_identical_rows_cost_zero(self):
        v = np.array([[1.0, 2.0, 3.0]])
        np.testing.assert_allclose(cost_matrix(v, v), [[0.0]], atol=1e-12)

    def test_orthogonal_cost_one(self):
        a = np.array([[1.0, 0.0]])
        b = np.array([[0.0, 1.0]])
        np.testing.assert_allclose(cost_matrix(a, b), [[1.0]])

    def test_antiparallel_cost_two(self):
        a = np.array([[1.0, 2.0]])
        np.testing.assert_allclose(cost_matrix(a, -a), [[2.0]], atol=1e-12)

    def test_entries_bounded(self):
        rng = np.random.default_rng(0)
        c = cost_matrix(rng.normal(size=(7, 5)), rng.normal(size=(4, 5)))
        assert (c >= 0.0).all() and (c <= 2.0).all()

    def test_width_mismatch(self):
        with pytest.raises(DimensionError):
            cost_matrix(np.ones((2, 3)), np.ones((2, 4)))


class TestIpot:
    def test_one_by_one(self):
        plan = ipot(np.array([[0.7]]))
        np.testing.assert_allclose(plan.matrix, [[1.0]], atol=1e-12)

    def test_perfect_matching(self):
        plan = ipot(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(plan.matrix, [[0.5, 0.0], [0.0, 0.5]],
                                   atol=1e-4)
        assert plan.objective == pytest.approx(0.0, abs=1e-4)

    def test_random_4x4_meets_permutation_oracle(self):
        rng = np.random.default_rng(1)
        cost = rng.uniform(0.0, 2.0, (4, 4))
        plan = ipot(cost, cfg=TIGHT)
        assert plan.objective <= permutation_optimum(cost) + 1e-3

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_oracle_equivalence(self, n):
        for seed in range(20):
            cost = np.random.default_rng(1000 * n + seed).uniform(0, 2, (n, n))
            plan = ipot(cost, cfg=TIGHT)
            assert plan.objective <= permutation_optimum(cost) + 1e-3

    def test_feasibility_at_default_iterations(self):
        for seed in range(100):
            cost = np.random.default_rng(seed).uniform(0, 2, (8, 6))
            plan = ipot(cost)
            assert plan.marginal_violation <= 1e-4
            assert (plan.matrix >= 0).all()
            np.testing.assert_allclose(plan.matrix.sum(axis=1),
                                       uniform_marginals(8), atol=1e-4)
            np.testing.assert_allclose(plan.matrix.sum(axis=0),
                                       uniform_marginals(6), atol=1e-4)

    def test_objective_monotone_with_exactish_inner_steps(self):
        # a single inner sweep trades monotonicity for speed; from two sweeps
        # per outer step the proximal subproblem is solved tightly enough
        # for the raw objective trace to be non-increasing
        cfg = IpotConfig(inner=2)
        for seed in range(100):
            cost = np.random.default_rng(seed).uniform(0, 2, (6, 6))
            history = ipot(cost, cfg=cfg).objective_history
            assert (np.diff(history) <= 1e-9).all(), seed

    def test_scale_robustness(self):
        # cosine costs ignore positive rescaling, hence so does the plan
        rng = np.random.default_rng(2)
        tok = rng.normal(size=(6, 8))
        mot = rng.normal(size=(4, 8))
        base = ipot(cost_matrix(tok, mot))
        scaled = ipot(cost_matrix(tok * 17.0, mot * 0.03))
        np.testing.assert_allclose(base.matrix, scaled.matrix, atol=1e-9)

    def test_bad_marginals_rejected(self):
        cost = np.zeros((2, 2))
        with pytest.raises(ContractError):
            ipot(cost, mu=np.array([0.5, 0.6]), nu=np.array([0.5, 0.5]))
        with pytest.raises(ContractError):
            ipot(cost, mu=np.array([1.0, 0.0]), nu=np.array([0.5, 0.5]))

    def test_nan_cost_rejected(self):
        cost = np.array([[np.nan, 1.0], [1.0, 0.0]])
        with pytest.raises(NumericError):
            ipot(cost)

    def test_marginal_length_mismatch(self):
        with pytest.raises(DimensionError):
            ipot(np.zeros((2, 3)), mu=np.array([0.5, 0.5]),
                 nu=np.array([0.5, 0.5]))


class TestAlignTokens:
    def test_mass_mode_row_argmax(self):
        plan = ipot(np.array([[0.0, 1.0], [1.0, 0.0]]))
        plan.matrix = np.array([[0.6, 0.4], [0.1, 0.9]])
        alignment = align_tokens(plan, np.zeros((2, 2)), mode="mass")
        np.testing.assert_array_equal(alignment.target_of, [0, 1])

    def test_tie_breaks_toward_lowest_index(self):
        plan = ipot(np.zeros((1, 2)))
        plan.matrix = np.array([[0.5, 0.5]])
        alignment = align_tokens(plan, np.zeros((1, 2)), mode="mass")
        assert alignment.target_of[0] == 0

    def test_converged_plan_gives_identity_alignment(self):
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        plan = ipot(cost)
        alignment = align_tokens(plan, cost, mode="mass")
        np.testing.assert_array_equal(alignment.target_of, [0, 1])

    def test_paper_form_mode(self):
        plan = ipot(np.array([[0.0, 1.0], [1.0, 0.0]]))
        plan.matrix = np.array([[0.6, 0.4], [0.1, 0.9]])
        cost = np.array([[1.0, 0.1], [1.0, 1.0]])
        alignment = align_tokens(plan, cost, mode="paper-form")
        # picks argmin of plan*cost per row
        np.testing.assert_array_equal(alignment.target_of, [1, 0])

    def test_groups_invert_alignment(self):
        plan = ipot(np.zeros((4, 3)))
        plan.matrix = np.array([[0.9, 0.1, 0.0],
                                [0.8, 0.1, 0.1],
                                [0.0, 0.0, 1.0],
                                [0.2, 0.1, 0.7]])
        alignment = align_tokens(plan, np.zeros((4, 3)), mode="mass")
        assert alignment.groups == {0: [0, 1], 2: [2, 3]}
        assert alignment.n_groups == 2

    def test_unknown_mode_rejected(self):
        plan = ipot(np.zeros((1, 1)))
        with pytest.raises(ContractError):
            align_tokens(plan, np.zeros((1, 1)), mode="magic")


class TestFuseMultitokens:
    def _alignment(self, targets, n_motifs):
        plan = ipot(np.zeros((len(targets), n_motifs)))
        plan.matrix = np.eye(len(targets), n_motifs)
        alignment = align_tokens(plan, np.zeros((len(targets), n_motifs)))
        alignment.target_of = np.asarray(targets)
        groups = {}
        for tok, mot in enumerate(targets):
            groups.setdefault(mot, []).append(tok)
        alignment.groups = dict(sorted(groups.items()))
        return alignment

    def test_mean_of_group(self):
        tokens = np.array([[1.0, 0.0], [3.0, 2.0]])
        fused = fuse_multitokens(tokens, self._alignment([0, 0], 2))
        np.testing.assert_allclose(fused.rows, [[2.0, 1.0]])
        assert fused.motif_index == [0]

    def test_singleton_copied_verbatim(self):
        tokens = np.array([[1.0, 5.0], [3.0, 2.0]])
        fused = fuse_multitokens(tokens, self._alignment([0, 1], 2))
        np.testing.assert_array_equal(fused.rows, tokens)
        assert fused.motif_index == [0, 1]

    def test_empty_groups_omitted(self):
        tokens = np.array([[1.0, 0.0], [3.0, 2.0], [5.0, 4.0]])
        fused = fuse_multitokens(tokens, self._alignment([1, 1, 1], 2))
        assert fused.rows.shape == (1, 2)
        assert fused.motif_index == [1]

    def test_group_count_bounded(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n_tok = int(rng.integers(1, 9))
            n_mot = int(rng.integers(1, 6))
            targets = rng.integers(0, n_mot, size=n_tok)
            fused = fuse_multitokens(rng.normal(size=(n_tok, 4)),
                                     self._alignment(list(targets), n_mot))
            assert fused.rows.shape[0] <= min(n_tok, n_mot)

    def test_fusion_conservation(self):
        # group means weighted by group sizes recover the token-row total
        rng = np.random.default_rng(4)
        tokens = rng.normal(size=(7, 5))
        targets = [0, 2, 2, 1, 0, 2, 1]
        fused = fuse_multitokens(tokens, self._alignment(targets, 3))
        counts = np.array([targets.count(m) for m in fused.motif_index],
                          dtype=np.float64)
        np.testing.assert_allclose((fused.rows * counts[:, None]).sum(axis=0),
                                   tokens.sum(axis=0), atol=1e-12, rtol=0)

    def test_alignment_must_cover_tokens(self):
        with pytest.raises(ContractError):
            fuse_multitokens(np.ones((3, 2)), self._alignment([0, 1], 2))
