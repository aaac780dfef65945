"""Gradient-free numeric kernels for transport solving and pair scoring.

These are the hot inner loops: the proximal-point transport solver runs once
per sample per training step, and the fine-similarity scorer runs once per
(query, candidate, level) during retrieval. Neither needs the gradient tape
(the transport plan is constant under backpropagation and retrieval is
read-only), so both ship in two interchangeable flavors:

* pure-numpy reference implementations (``*_numpy``), always available;
* numba ``@njit`` loop kernels, used by default when numba imports.

Set ``ORMA_NUMBA=0`` in the environment to force the numpy path. The public
names (``ipot_solve``, ``fine_similarity_value``, ...) point at whichever
flavor is active; ``USING_NUMBA`` reports the choice.
``benchmarks/bench_kernels.py`` compares the two.

Zero-handling mirrors the tape ops exactly: vectors with norm below 1e-12
cosine to 0, constant min-max slices map to zeros, and zero-sum weight
columns fall back to uniform.
"""

from __future__ import annotations

import os

import numpy as np

_EPS = 1e-12


def _numba_enabled() -> bool:
    flag = os.environ.get("ORMA_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


# ---------------------------------------------------------------------------
# numpy reference implementations


# feasibility polish applied to the final plan: plain Sinkhorn sweeps on the
# plan itself until the marginals are met tightly
_POLISH_SWEEPS = 200
_POLISH_TOL = 1e-9


def ipot_solve_numpy(cost: np.ndarray, mu: np.ndarray, nu: np.ndarray,
                     outer: int = 50, inner: int = 1, prox: float = 1.0,
                     tol: float = 1e-6):
    """Inexact proximal-point transport solver.

    Each outer step multiplies the proximal kernel ``exp(-cost/prox)`` into
    the current plan and re-scales it toward the marginals with ``inner``
    Sinkhorn sweeps; iteration stops early once the violation and the
    objective change both drop below ``tol``. The final plan is then polished
    with marginal re-scalings so the returned coupling is tightly feasible.

    Returns ``(plan, marginal_violation, iterations, objective_history,
    objective)``. The history holds the raw per-outer-step objectives; the
    last objective is recomputed after the polish.
    """
    n, m = cost.shape
    kernel = np.exp(-cost / prox)
    plan = np.outer(mu, nu)
    sigma = np.full(m, 1.0 / m)
    history = np.zeros(outer)
    prev_obj = np.inf
    done = 0
    for step in range(outer):
        done = step + 1
        q = kernel * plan
        for _ in range(inner):
            delta = mu / (q @ sigma)
            sigma = nu / (q.T @ delta)
        plan = delta[:, None] * q * sigma[None, :]
        obj = float((plan * cost).sum())
        history[step] = obj
        violation = max(np.abs(plan.sum(axis=1) - mu).max(),
                        np.abs(plan.sum(axis=0) - nu).max())
        if violation < tol and abs(prev_obj - obj) < tol:
            break
        prev_obj = obj
    for _ in range(_POLISH_SWEEPS):
        rows = plan.sum(axis=1)
        if (rows <= 0).any():
            break
        plan = plan * (mu / rows)[:, None]
        cols = plan.sum(axis=0)
        if (cols <= 0).any():
            break
        plan = plan * (nu / cols)[None, :]
        violation = max(np.abs(plan.sum(axis=1) - mu).max(),
                        np.abs(plan.sum(axis=0) - nu).max())
        if violation <= _POLISH_TOL:
            break
    violation = max(np.abs(plan.sum(axis=1) - mu).max(),
                    np.abs(plan.sum(axis=0) - nu).max())
    objective = float((plan * cost).sum())
    return plan, float(violation), done, history[:done].copy(), objective


def pairwise_cosine_numpy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cosine of every row pair; rows with norm < 1e-12 contribute zeros."""
    xn = _safe_unit_rows(x)
    yn = _safe_unit_rows(y)
    return xn @ yn.T


def _safe_unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1)
    alive = norms >= _EPS
    safe = np.where(alive, norms, 1.0)
    return np.where(alive[:, None], x / safe[:, None], 0.0)


def _minmax_rows(m: np.ndarray) -> np.ndarray:
    lo = m.min(axis=1, keepdims=True)
    hi = m.max(axis=1, keepdims=True)
    span = hi - lo
    alive = span > 0
    return np.where(alive, (m - lo) / np.where(alive, span, 1.0), 0.0)


def _l1_cols(m: np.ndarray) -> np.ndarray:
    s = m.sum(axis=0, keepdims=True)
    alive = np.abs(s) >= _EPS
    return np.where(alive, m / np.where(alive, s, 1.0), 1.0 / m.shape[0])


def fine_similarity_numpy(x: np.ndarray, y: np.ndarray) -> float:
    """Alignment-weighted similarity between two row collections.

    Cosine matrix -> min-max per row -> column l1 weights -> weights fold Y
    into per-row counterparts -> cosine of the two sum-pooled vectors.
    """
    m = pairwise_cosine_numpy(x, y)
    w = _l1_cols(_minmax_rows(m))
    y_updated = w @ y
    return vector_cosine(x.sum(axis=0), y_updated.sum(axis=0))


def vector_cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu_ = np.linalg.norm(u)
    nv_ = np.linalg.norm(v)
    if nu_ < _EPS or nv_ < _EPS:
        return 0.0
    return float(np.dot(u / nu_, v / nv_))


def align_from_plan_numpy(plan: np.ndarray, cost: np.ndarray,
                          mass_mode: bool = True) -> np.ndarray:
    """Per-token target index: argmax of transported mass (``mass_mode``) or
    argmin of the per-cell plan-cost product; ties go to the lowest index."""
    if mass_mode:
        return np.argmax(plan, axis=1)
    return np.argmin(plan * cost, axis=1)


def group_means_numpy(x: np.ndarray, assign: np.ndarray,
                      n_groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean of x's rows per assigned group, empty groups omitted.

    Returns ``(means, group_ids)`` with groups in ascending id order.
    """
    counts = np.bincount(assign, minlength=n_groups)
    group_ids = np.nonzero(counts)[0]
    sums = np.zeros((n_groups, x.shape[1]))
    np.add.at(sums, assign, x)
    means = sums[group_ids] / counts[group_ids][:, None]
    return means, group_ids


# ---------------------------------------------------------------------------
# numba loop kernels


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def _violation_nb(plan, mu, nu):
        n, m = plan.shape
        viol = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += plan[i, j]
            err = abs(acc - mu[i])
            if err > viol:
                viol = err
        for j in range(m):
            acc = 0.0
            for i in range(n):
                acc += plan[i, j]
            err = abs(acc - nu[j])
            if err > viol:
                viol = err
        return viol

    @njit(cache=True)
    def ipot_nb(cost, mu, nu, outer, inner, prox, tol):
        n, m = cost.shape
        kernel = np.exp(-cost / prox)
        plan = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                plan[i, j] = mu[i] * nu[j]
        sigma = np.full(m, 1.0 / m)
        delta = np.empty(n)
        history = np.zeros(outer)
        prev_obj = np.inf
        done = 0
        for step in range(outer):
            done = step + 1
            q = kernel * plan
            for _ in range(inner):
                for i in range(n):
                    acc = 0.0
                    for j in range(m):
                        acc += q[i, j] * sigma[j]
                    delta[i] = mu[i] / acc
                for j in range(m):
                    acc = 0.0
                    for i in range(n):
                        acc += q[i, j] * delta[i]
                    sigma[j] = nu[j] / acc
            obj = 0.0
            for i in range(n):
                for j in range(m):
                    plan[i, j] = delta[i] * q[i, j] * sigma[j]
                    obj += plan[i, j] * cost[i, j]
            history[step] = obj
            violation = _violation_nb(plan, mu, nu)
            if violation < tol and abs(prev_obj - obj) < tol:
                break
            prev_obj = obj
        for _ in range(200):
            ok = True
            for i in range(n):
                acc = 0.0
                for j in range(m):
                    acc += plan[i, j]
                if acc <= 0.0:
                    ok = False
                    break
                scale = mu[i] / acc
                for j in range(m):
                    plan[i, j] *= scale
            if not ok:
                break
            for j in range(m):
                acc = 0.0
                for i in range(n):
                    acc += plan[i, j]
                if acc <= 0.0:
                    ok = False
                    break
                scale = nu[j] / acc
                for i in range(n):
                    plan[i, j] *= scale
            if not ok:
                break
            if _violation_nb(plan, mu, nu) <= 1e-9:
                break
        violation = _violation_nb(plan, mu, nu)
        objective = 0.0
        for i in range(n):
            for j in range(m):
                objective += plan[i, j] * cost[i, j]
        return plan, violation, done, history[:done].copy(), objective

    @njit(cache=True)
    def unit_rows_nb(x):
        n, d = x.shape
        out = np.zeros((n, d))
        for i in range(n):
            acc = 0.0
            for k in range(d):
                acc += x[i, k] * x[i, k]
            norm = np.sqrt(acc)
            if norm >= 1e-12:
                for k in range(d):
                    out[i, k] = x[i, k] / norm
        return out

    @njit(cache=True)
    def pairwise_cosine_nb(x, y):
        # row normalization is fused loops; the big product goes to BLAS
        xn = unit_rows_nb(x)
        yn = unit_rows_nb(y)
        return xn @ yn.T

    @njit(cache=True)
    def fine_similarity_nb(x, y):
        m = pairwise_cosine_nb(x, y)
        r, c = m.shape
        d = y.shape[1]
        w = np.zeros((r, c))
        for i in range(r):
            lo = m[i, 0]
            hi = m[i, 0]
            for j in range(1, c):
                if m[i, j] < lo:
                    lo = m[i, j]
                if m[i, j] > hi:
                    hi = m[i, j]
            span = hi - lo
            if span > 0.0:
                for j in range(c):
                    w[i, j] = (m[i, j] - lo) / span
        col_weight = np.empty(c)
        for j in range(c):
            s = 0.0
            for i in range(r):
                s += w[i, j]
            if abs(s) >= 1e-12:
                for i in range(r):
                    w[i, j] = w[i, j] / s
            else:
                for i in range(r):
                    w[i, j] = 1.0 / r
        # pooled counterpart: sum_i (W Y)_i = (column sums of W) @ Y
        for j in range(c):
            s = 0.0
            for i in range(r):
                s += w[i, j]
            col_weight[j] = s
        pooled_y = col_weight @ y
        pooled_x = np.zeros(d)
        for i in range(r):
            for k in range(d):
                pooled_x[k] += x[i, k]
        nx = 0.0
        ny = 0.0
        dot = 0.0
        for k in range(d):
            nx += pooled_x[k] * pooled_x[k]
            ny += pooled_y[k] * pooled_y[k]
            dot += pooled_x[k] * pooled_y[k]
        nx = np.sqrt(nx)
        ny = np.sqrt(ny)
        if nx < 1e-12 or ny < 1e-12:
            return 0.0
        return dot / (nx * ny)

    @njit(cache=True)
    def align_from_plan_nb(plan, cost, mass_mode):
        n, m = plan.shape
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            best = 0
            if mass_mode:
                best_val = plan[i, 0]
                for j in range(1, m):
                    if plan[i, j] > best_val:
                        best_val = plan[i, j]
                        best = j
            else:
                best_val = plan[i, 0] * cost[i, 0]
                for j in range(1, m):
                    v = plan[i, j] * cost[i, j]
                    if v < best_val:
                        best_val = v
                        best = j
            out[i] = best
        return out

    @njit(cache=True)
    def group_means_nb(x, assign, n_groups):
        n, d = x.shape
        counts = np.zeros(n_groups, dtype=np.int64)
        sums = np.zeros((n_groups, d))
        for i in range(n):
            g = assign[i]
            counts[g] += 1
            for k in range(d):
                sums[g, k] += x[i, k]
        n_used = 0
        for g in range(n_groups):
            if counts[g] > 0:
                n_used += 1
        means = np.empty((n_used, d))
        group_ids = np.empty(n_used, dtype=np.int64)
        row = 0
        for g in range(n_groups):
            if counts[g] > 0:
                for k in range(d):
                    means[row, k] = sums[g, k] / counts[g]
                group_ids[row] = g
                row += 1
        return means, group_ids

    return {
        "ipot_solve": ipot_nb,
        "pairwise_cosine": pairwise_cosine_nb,
        "fine_similarity_value": fine_similarity_nb,
        "align_from_plan": align_from_plan_nb,
        "group_means": group_means_nb,
    }


USING_NUMBA = False
ipot_solve = ipot_solve_numpy
pairwise_cosine = pairwise_cosine_numpy
fine_similarity_value = fine_similarity_numpy
align_from_plan = align_from_plan_numpy
group_means = group_means_numpy

if _numba_enabled():
    try:
        _nb = _build_numba_kernels()
    except ImportError:  # numba missing: stay on numpy
        _nb = None
    if _nb is not None:
        USING_NUMBA = True
        ipot_solve = _nb["ipot_solve"]
        pairwise_cosine = _nb["pairwise_cosine"]
        fine_similarity_value = _nb["fine_similarity_value"]
        align_from_plan = _nb["align_from_plan"]
        group_means = _nb["group_means"]


def warmup() -> None:
    """Trigger JIT compilation on tiny inputs so first real calls are fast."""
    c = np.array([[0.0, 1.0], [1.0, 0.0]])
    half = np.array([0.5, 0.5])
    ipot_solve(c, half, half, 2, 1, 1.0, 1e-6)
    x = np.eye(2)
    fine_similarity_value(x, x)
    plan = np.array([[0.5, 0.0], [0.0, 0.5]])
    assign = align_from_plan(plan, c, True)
    group_means(x, assign, 2)
