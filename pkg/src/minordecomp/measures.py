"""Structural measures: volume, boundary, conductance, sparsity, diameter.

All set-level measures are exact rationals; the global minima are exact
brute-force enumerations below a vertex cap, with a clearly-labeled
spectral (Fiedler sweep) fallback above it.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable

import numpy as np

from .graph import Graph, as_vertex_set

EXACT_CUT_CAP = 20  # default brute-force cap: 2^(cap-1) cuts enumerated

INFINITE = math.inf


class CapacityError(RuntimeError):
    """Raised when an exact computation exceeds its configured cap."""


def volume(g: Graph, s: Iterable[int]) -> int:
    """Sum of whole-graph degrees over `s` (not the induced degrees)."""
    sv = as_vertex_set(g, s)
    return int(sum(g.degree(v) for v in sv))


def boundary_size(g: Graph, s: Iterable[int]) -> int:
    """Number of edges with exactly one endpoint in `s`; self-loops never count."""
    sv = as_vertex_set(g, s)
    return sum(1 for u, v in g.edges if u != v and (u in sv) != (v in sv))


def conductance_of_set(g: Graph, s: Iterable[int]) -> Fraction:
    sv = as_vertex_set(g, s)
    if not sv or len(sv) == g.n:
        raise ValueError("conductance needs a proper nonempty vertex set")
    vol_s = volume(g, sv)
    vol_rest = int(g.degrees.sum()) - vol_s
    denom = min(vol_s, vol_rest)
    if denom == 0:
        raise ValueError("conductance undefined: one side has zero volume")
    return Fraction(boundary_size(g, sv), denom)


def sparsity_of_set(g: Graph, s: Iterable[int]) -> Fraction:
    sv = as_vertex_set(g, s)
    if not sv or len(sv) == g.n:
        raise ValueError("sparsity needs a proper nonempty vertex set")
    return Fraction(boundary_size(g, sv), min(len(sv), g.n - len(sv)))


def _cut_enumeration(g: Graph, weights: np.ndarray, cap: int):
    """Enumerate all proper cuts with vertex 0 fixed on one side.

    Returns (best boundary, best denominator, argmin mask) minimizing
    boundary/denominator where denominator = min(side weight, total-side
    weight), all in exact integer arithmetic.  `weights` is the per-vertex
    weight defining the denominator (degrees for conductance, ones for
    sparsity).
    """
    n = g.n
    if n > cap:
        raise CapacityError(
            f"graph has {n} > {cap} vertices; use the sweep bound instead")
    if n < 2:
        raise ValueError("need at least two vertices")
    total_w = int(weights.sum())
    nmask = 1 << (n - 1)  # vertex n-1 fixed outside the enumerated side
    best_num = None
    best_den = None
    best_mask = None
    chunk = 1 << 20
    plain_edges = [(u, v) for u, v in g.edges if u != v]
    for start in range(0, nmask, chunk):
        stop = min(start + chunk, nmask)
        masks = np.arange(start, stop, dtype=np.int64)
        if start == 0:
            masks = masks[1:]  # empty set excluded
            if masks.size == 0:
                continue
        boundary = np.zeros(masks.shape, dtype=np.int32)
        for u, v in plain_edges:
            bu = (masks >> u) & 1 if u < n - 1 else 0
            bv = (masks >> v) & 1 if v < n - 1 else 0
            boundary += (bu != bv).astype(np.int32)
        side_w = np.zeros(masks.shape, dtype=np.int64)
        for v in range(n - 1):
            side_w += ((masks >> v) & 1) * int(weights[v])
        den = np.minimum(side_w, total_w - side_w)
        ok = den > 0
        if not ok.any():
            continue
        # the denominator takes few distinct values; compare exactly per value
        for d in np.unique(den[ok]):
            sel = ok & (den == d)
            i = int(np.argmin(np.where(sel, boundary, np.iinfo(np.int32).max)))
            num = int(boundary[i])
            if not sel[i]:
                continue
            if (best_num is None
                    or num * best_den < best_num * int(d)
                    or (num * best_den == best_num * int(d) and int(masks[i]) < best_mask)):
                best_num, best_den, best_mask = num, int(d), int(masks[i])
    if best_num is None:
        raise ValueError("no cut with positive denominator exists")
    return best_num, best_den, best_mask


def _mask_to_set(mask: int, n: int) -> frozenset[int]:
    return frozenset(v for v in range(n - 1) if (mask >> v) & 1)


def conductance_exact(g: Graph, cap: int = EXACT_CUT_CAP) -> tuple[Fraction, frozenset[int]]:
    """Exact minimum conductance and an argmin cut, by enumeration."""
    num, den, mask = _cut_enumeration(g, g.degrees, cap)
    return Fraction(num, den), _mask_to_set(mask, g.n)


def sparsity_exact(g: Graph, cap: int = EXACT_CUT_CAP) -> tuple[Fraction, frozenset[int]]:
    """Exact minimum sparsity (edge expansion) and an argmin cut."""
    num, den, mask = _cut_enumeration(g, np.ones(g.n, dtype=np.int64), cap)
    return Fraction(num, den), _mask_to_set(mask, g.n)


# -- spectral fallback -------------------------------------------------------

def _fiedler_vector(g: Graph, normalized: bool) -> np.ndarray:
    """Deterministic Fiedler vector (dense for small n, ARPACK above)."""
    n = g.n
    deg = g.degrees.astype(float)
    if n <= 600:
        lap = np.zeros((n, n))
        for u, v in g.edges:
            if u == v:
                continue
            lap[u, v] -= 1.0
            lap[v, u] -= 1.0
            lap[u, u] += 1.0
            lap[v, v] += 1.0
        if normalized:
            d = np.where(deg > 0, deg, 1.0)
            scale = 1.0 / np.sqrt(d)
            lap = lap * scale[:, None] * scale[None, :]
        vals, vecs = np.linalg.eigh(lap)
        return vecs[:, 1]
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    rows, cols, data = [], [], []
    diag = np.zeros(n)
    for u, v in g.edges:
        if u == v:
            continue
        rows += [u, v]
        cols += [v, u]
        data += [-1.0, -1.0]
        diag[u] += 1.0
        diag[v] += 1.0
    lap = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    lap = lap + sp.diags(diag)
    if normalized:
        d = np.where(deg > 0, deg, 1.0)
        s = sp.diags(1.0 / np.sqrt(d))
        lap = s @ lap @ s
    v0 = np.cos(np.arange(n, dtype=float))  # fixed start vector for determinism
    vals, vecs = spla.eigsh(lap, k=2, sigma=-1e-9, which="LM", v0=v0)
    order = np.argsort(vals)
    return vecs[:, order[1]]


def conductance_sweep_lower_bound(g: Graph) -> dict:
    """Cheeger lower bound plus the best Fiedler-sweep cut (non-exact).

    Returns {'lower': lambda2/2 of the normalized Laplacian, 'cut': best
    sweep cut, 'cut_value': its exact conductance (an upper bound on the
    true minimum)}.  The lower bound is a float heuristic certificate; the
    cut value is exact for the returned cut only.
    """
    if g.n < 2:
        raise ValueError("need at least two vertices")
    vec = _fiedler_vector(g, normalized=True)
    lam2 = _rayleigh_normalized(g, vec)
    order = np.lexsort((np.arange(g.n), vec))  # ties broken by vertex index
    best_cut, best_val = None, None
    prefix: set[int] = set()
    for v in order[:-1]:
        prefix.add(int(v))
        try:
            val = conductance_of_set(g, prefix)
        except ValueError:
            continue
        if best_val is None or val < best_val:
            best_val, best_cut = val, frozenset(prefix)
    return {"lower": max(lam2 / 2.0, 0.0), "cut": best_cut, "cut_value": best_val,
            "exact": False}


def sparsity_sweep(g: Graph) -> dict:
    """Best Fiedler-sweep cut under the sparsity objective (non-exact)."""
    if g.n < 2:
        raise ValueError("need at least two vertices")
    vec = _fiedler_vector(g, normalized=False)
    order = np.lexsort((np.arange(g.n), vec))
    best_cut, best_val = None, None
    prefix: set[int] = set()
    for v in order[:-1]:
        prefix.add(int(v))
        val = sparsity_of_set(g, prefix)
        if best_val is None or val < best_val:
            best_val, best_cut = val, frozenset(prefix)
    return {"cut": best_cut, "cut_value": best_val, "exact": False}


def _rayleigh_normalized(g: Graph, vec: np.ndarray) -> float:
    deg = g.degrees.astype(float)
    d = np.where(deg > 0, deg, 1.0)
    x = vec / np.sqrt(d)
    num = sum((x[u] - x[v]) ** 2 for u, v in g.edges if u != v)
    den = float((deg * x * x).sum())
    return num / den if den > 0 else 0.0


def conductance_estimate(g: Graph, cap: int = EXACT_CUT_CAP) -> Fraction:
    """Best available conductance estimate: exact below the cap, sweep-cut
    value above (an upper bound, adequate as a balancing-rate hint)."""
    if g.n < 2:
        return Fraction(1)
    if g.n <= cap:
        return conductance_exact(g, cap)[0]
    val = conductance_sweep_lower_bound(g)["cut_value"]
    return val if val is not None else Fraction(1)


# -- diameters ---------------------------------------------------------------

def diameter_of_induced(g: Graph, s: Iterable[int]):
    """Exact diameter of G[s]; math.inf when the induced graph is disconnected."""
    sv = as_vertex_set(g, s)
    if not sv:
        raise ValueError("diameter of empty set is undefined")
    if len(sv) == 1:
        return 0
    sub, order = g.induced_subgraph(sv)
    if len(sv) > 400:
        import scipy.sparse as sp
        import scipy.sparse.csgraph as csg

        rows = [u for u, v in sub.edges if u != v] + [v for u, v in sub.edges if u != v]
        cols = [v for u, v in sub.edges if u != v] + [u for u, v in sub.edges if u != v]
        mat = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(sub.n, sub.n))
        dist = csg.shortest_path(mat, method="D", unweighted=True)
        if np.isinf(dist).any():
            return INFINITE
        return int(dist.max())
    best = 0
    for v in range(sub.n):
        layers = sub.bfs_layers(v)
        if len(layers) < sub.n:
            return INFINITE
        best = max(best, max(layers.values()))
    return best
