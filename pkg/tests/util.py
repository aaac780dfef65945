"""Shared test helpers: finite-difference oracles, SMILES corpus generation,
and a random-graph SMILES emitter used as the parser round-trip oracle."""

from __future__ import annotations

import numpy as np

from orma.smiles import parse_smiles


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of an array.

    ``f`` must read the array it is handed (mutated in place between calls).
    """
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f(x)
        flat[i] = orig - eps
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    return float(np.abs(analytic - numeric).max()
                 / (np.abs(numeric).max() + 1e-12))


# ---------------------------------------------------------------------------
# SMILES corpus

_EXTRA_SMILES = (
    "c1ccc2ccccc2c1",            # fused bicyclic aromatic
    "c1ccccc1-c1ccccc1",         # two rings joined by an acyclic bond
    "c1ccoc1", "c1ccsc1", "c1cc[nH]c1", "c1ccncc1", "c1cnccn1",
    "C%12CCCCC%12",              # two-digit ring closure
    "C1CCCCCCC1", "C1CCCCCCCC1",
    "F/C=C/F", "F/C=C\\F",       # stereo markers, discarded
    "C[C@@H](N)C(=O)O", "C[C@H](O)C",
    "[NH4+]", "[Na+]", "[O-]C(=O)C", "CC(=O)[O-]", "[13CH4]",
    "N#Cc1ccccc1", "O=C(N)c1ccccc1", "OCc1ccccc1", "Clc1ccccc1Cl",
    "C(F)(F)F", "FC(F)(F)c1ccccc1",
    "O=S(=O)(O)O", "OP(=O)(O)O", "CSC", "CS(=O)C",
    "C1CC2CCC1CC2",              # bridged bicycle
    "C1CC1C1CC1",                # two rings, reused digit
    "CC(C)(C)C", "CCOC(=O)C", "CNC(=O)C", "CN(C)C", "COC(=O)OC",
    "C=CC=C", "C#CC#C", "CC=O", "OC=O", "NC=O",
    "c1ccc(cc1)N", "c1ccc(cc1)O", "c1ccc(cc1)C(=O)O",
    "Cn1cccc1",                  # N-methyl aromatic ring
    "OCCO", "OCCCO", "NCCN", "SCCS", "OCCN",
    "CC(N)C(=O)O", "NCC(=O)O",
    "ClCCl", "BrCBr", "ICI", "ClC(Cl)Cl",
    "CC(=O)OC1CCCC1", "O1CCOCC1", "N1CCNCC1", "S1CCCC1",
    "Cc1ccc(C)cc1", "Cc1cccc(C)c1", "Cc1ccccc1C",
    "CCCCCCCCCC", "CCCCCCCC",
    "B(O)O", "CB(O)O",
    "[Se]1CCCC1", "c1cc[se]c1",
)


def smiles_corpus(n: int = 200) -> list[str]:
    """Deterministic list of ``n`` distinct, parseable SMILES strings."""
    from orma.data import planted_records

    out: list[str] = []
    seen: set[str] = set()

    def push(smiles: str) -> None:
        if len(out) >= n or smiles in seen:
            return
        try:
            parse_smiles(smiles)
        except Exception:
            return
        seen.add(smiles)
        out.append(smiles)

    for rec in planted_records(120):
        push(rec.smiles)
    for smiles in _EXTRA_SMILES:
        push(smiles)
    for length in range(2, 12):  # simple homologous series for volume
        push("C" * length + "N")
        push("C" * length + "O" + "C")
        push("C" * length + "S")
        push("C" * length + "(C)C")
    assert len(out) >= n, f"corpus generator produced only {len(out)}"
    return out[:n]


# ---------------------------------------------------------------------------
# random molecular graphs and a minimal SMILES emitter (round-trip oracle)


def random_molgraph(rng: np.random.Generator, max_atoms: int = 12):
    """Random connected graph: spanning tree plus up to two extra edges.

    Returns (elements, edge set) with single bonds only; degrees are capped
    at 4 so the emitter output stays within normal valence.
    """
    n = int(rng.integers(2, max_atoms + 1))
    elements = [str(rng.choice(["C", "N", "O", "S", "P"])) for _ in range(n)]
    edges: set[frozenset] = set()
    degree = [0] * n
    for child in range(1, n):
        choices = [p for p in range(child) if degree[p] < 4]
        parent = int(rng.choice(choices))
        edges.add(frozenset((parent, child)))
        degree[parent] += 1
        degree[child] += 1
    for _ in range(int(rng.integers(0, 3))):
        a, b = rng.integers(0, n, size=2)
        a, b = int(a), int(b)
        if a == b or frozenset((a, b)) in edges:
            continue
        if degree[a] >= 4 or degree[b] >= 4:
            continue
        edges.add(frozenset((a, b)))
        degree[a] += 1
        degree[b] += 1
    return elements, edges


def emit_smiles(elements: list[str], edges: set[frozenset]) -> tuple[str, list[int]]:
    """Write a graph as SMILES via DFS with ring-closure digits.

    Returns the string and the visit order (original index per emitted
    position); the parser assigns indices in emitted order, so the visit
    order is the isomorphism to check against.
    """
    n = len(elements)
    adj: list[list[int]] = [[] for _ in range(n)]
    for edge in edges:
        a, b = sorted(edge)
        adj[a].append(b)
        adj[b].append(a)
    for nbrs in adj:
        nbrs.sort()

    visited: list[int] = []
    in_tree: set[frozenset] = set()
    seen = [False] * n
    stack = [(0, -1)]
    # first pass: DFS spanning tree (children visited in ascending order)
    order_children: dict[int, list[int]] = {u: [] for u in range(n)}
    while stack:
        u, parent = stack.pop()
        if seen[u]:
            continue
        seen[u] = True
        visited.append(u)
        if parent >= 0:
            in_tree.add(frozenset((u, parent)))
            order_children[parent].append(u)
        for v in reversed(adj[u]):
            if not seen[v]:
                stack.append((v, u))
    back_edges = [tuple(sorted(e)) for e in edges if e not in in_tree]
    back_at: dict[int, list[tuple]] = {u: [] for u in range(n)}
    for edge in sorted(back_edges):
        back_at[edge[0]].append(edge)
        back_at[edge[1]].append(edge)

    digit_of: dict[tuple, int] = {}
    next_digit = [1]

    def emit(u: int) -> str:
        s = elements[u]
        for edge in back_at[u]:
            if edge not in digit_of:
                digit_of[edge] = next_digit[0]
                next_digit[0] += 1
            s += str(digit_of[edge])
        children = order_children[u]
        parts = [emit(v) for v in children]
        for i, part in enumerate(parts):
            s += f"({part})" if i < len(parts) - 1 else part
        return s

    smiles = emit(0)
    return smiles, visited
