"""Edge-space linear algebra on finite networks and determinantal edge measures.

Edges carry their stored orientation; chi_e is the unit vector of edge e
pointing tail -> head.  The star of x is sum_{e at x} +-sqrt(C(e)) chi_e
(+ when x is the tail), a cycle x_0 .. x_{n-1} x_0 is
sum chi<x_i, x_{i+1}> / sqrt(C).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    CoordinateMismatch,
    DegenerateConditioning,
    EnumerationTooLarge,
    InvalidParameter,
    NumericalDegeneracy,
)
from .network import FiniteNetwork
from .rng import RngSeed, as_seed

RANK_TOL = 1e-10
MAX_ENUM_EDGES = 24


@dataclass(frozen=True)
class EdgeSpaceBasis:
    """A subspace of R^E: its spanning set and an orthonormal basis (columns of Q)."""

    edges: tuple[str, ...]
    spanning: np.ndarray  # (|E|, k) spanning vectors as columns
    Q: np.ndarray  # (|E|, dim) orthonormal columns

    @property
    def dim(self) -> int:
        return self.Q.shape[1]

    def projection(self) -> np.ndarray:
        return self.Q @ self.Q.T


def orthonormalize(A: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the column span of A (pivoted QR, one re-orthogonalization pass).

    Rank is the number of |R_ii| above ``tol`` times the largest column norm.
    """
    m = A.shape[0]
    if A.size == 0:
        return np.zeros((m, 0))
    norms = np.linalg.norm(A, axis=0)
    scale = norms.max()
    if scale == 0:
        return np.zeros((m, 0))
    Q, R, _ = scipy.linalg.qr(A, mode="economic", pivoting=True)
    rank = int(np.sum(np.abs(np.diag(R)) > tol * scale))
    Q = Q[:, :rank]
    Q, _ = np.linalg.qr(Q)  # re-orthogonalize
    return Q


def _basis(edges, spanning) -> EdgeSpaceBasis:
    return EdgeSpaceBasis(tuple(edges), spanning, orthonormalize(spanning))


def star_vectors(network: FiniteNetwork) -> np.ndarray:
    index = network.vertex_index()
    S = np.zeros((len(network.edges), len(network.vertices)))
    for j, e in enumerate(network.edges):
        s = np.sqrt(e.conductance)
        S[j, index[e.tail]] += s
        S[j, index[e.head]] -= s
    return S


def star_space(network: FiniteNetwork) -> EdgeSpaceBasis:
    return _basis(network.edge_ids, star_vectors(network))


def cycle_vectors(network: FiniteNetwork) -> np.ndarray:
    """Fundamental cycles of a breadth-first spanning tree, one per non-tree edge."""
    root = network.vertices[0]
    parent_edge = {root: None}
    for v in network.bfs_order(root):
        for i in network.adjacency[v]:
            u = network.edges[i].other(v)
            if u not in parent_edge:
                parent_edge[u] = i
    tree = {i for i in parent_edge.values() if i is not None}

    def path_to_root(v):
        # list of (edge index, sign) traversing v -> root
        out = []
        while parent_edge[v] is not None:
            e = network.edges[parent_edge[v]]
            out.append((parent_edge[v], 1.0 if e.tail == v else -1.0))
            v = e.other(v)
        return out

    cols = []
    for j, e in enumerate(network.edges):
        if j in tree:
            continue
        c = np.zeros(len(network.edges))
        c[j] += 1.0
        # close the cycle: head -> root -> tail
        for i, s in path_to_root(e.head):
            c[i] += s
        for i, s in path_to_root(e.tail):
            c[i] -= s
        cols.append(c / np.sqrt([f.conductance for f in network.edges]))
    if not cols:
        return np.zeros((len(network.edges), 0))
    return np.column_stack(cols)


def cycle_space(network: FiniteNetwork) -> EdgeSpaceBasis:
    return _basis(network.edge_ids, cycle_vectors(network))


@dataclass(frozen=True)
class Kernel:
    edges: tuple[str, ...]
    K: np.ndarray
    tag: str  # wsf-star | fsf-cycle-complement | conditioned

    def index(self, edge_ids) -> list[int]:
        pos = {e: i for i, e in enumerate(self.edges)}
        try:
            return [pos[e] for e in edge_ids]
        except KeyError as exc:
            raise InvalidParameter(f"unknown edge {exc.args[0]!r}") from None


def kernel_from_basis(basis: EdgeSpaceBasis, tag: str = "conditioned") -> Kernel:
    return Kernel(basis.edges, basis.projection(), tag)


def transfer_kernel(network: FiniteNetwork, variant: str = "wsf") -> Kernel:
    """Gram matrix of P_star (wsf) or of the projection onto the cycle complement (fsf)."""
    if variant == "wsf":
        return kernel_from_basis(star_space(network), "wsf-star")
    if variant == "fsf":
        Q = cycle_space(network).Q
        return Kernel(network.edge_ids, np.eye(len(network.edges)) - Q @ Q.T, "fsf-cycle-complement")
    raise InvalidParameter(f"variant must be wsf or fsf, got {variant!r}")


def inclusion_prob(kernel: Kernel, edges) -> float:
    edges = list(edges)
    if len(set(edges)) != len(edges):
        raise InvalidParameter("edges must be distinct")
    if not edges:
        return 1.0
    idx = kernel.index(edges)
    return float(np.linalg.det(kernel.K[np.ix_(idx, idx)]))


def dpp_sample(basis: EdgeSpaceBasis, seed: RngSeed | int) -> frozenset[str]:
    """Exact draw from P^H by sequential conditioning of the projection kernel.

    Pick an edge with probability K_ee / rank, then replace the basis by its
    part orthogonal to chi_e; repeat until the dimension is exhausted.
    """
    rng = as_seed(seed).generator()
    V = basis.Q.copy()
    chosen = []
    for k in range(basis.dim, 0, -1):
        w = np.einsum("ij,ij->i", V, V)
        total = w.sum()
        if total < 1e-12:
            raise NumericalDegeneracy("kernel diagonal vanished before the dimension was exhausted")
        i = int(min(np.searchsorted(np.cumsum(w), rng.random() * total, side="right"), len(w) - 1))
        chosen.append(i)
        # eliminate coordinate i: rotate so only one column touches row i, drop it
        j = int(np.argmax(np.abs(V[i])))
        col = V[:, j].copy()
        V = np.delete(V, j, axis=1)
        if V.shape[1]:
            V -= np.outer(col, V[i] / col[i])
            V = orthonormalize(V) if V.shape[1] else V
    return frozenset(basis.edges[i] for i in chosen)


def _drop(basis_edges, e_index, A):
    return tuple(x for i, x in enumerate(basis_edges) if i != e_index), np.delete(A, e_index, axis=0)


def condition_edge(network: FiniteNetwork, edge_id: str, status) -> EdgeSpaceBasis:
    """Subspace whose determinantal measure is the WSF conditioned on ``edge_id``.

    present -> H1 = star intersect chi_e^perp (null space of the e-coordinate on star),
    absent  -> H2 = (star + R chi_e) intersect chi_e^perp (star projected off e).
    Both are returned in the coordinates of E minus {e}.
    """
    present = status in (True, 1, "1", "present")
    if not present and status not in (False, 0, "0", "absent"):
        raise InvalidParameter(f"status must be present or absent, got {status!r}")
    j = network.edge_index(edge_id)
    star = star_space(network)
    Q = star.Q
    k_ee = float(Q[j] @ Q[j])
    if present:
        if k_ee < RANK_TOL:
            raise DegenerateConditioning(f"edge {edge_id} has inclusion probability 0")
        # vectors of star whose e-coordinate vanishes
        null = scipy.linalg.null_space(Q[j : j + 1, :], rcond=RANK_TOL)
        span = Q @ null
    else:
        if abs(1.0 - k_ee) < RANK_TOL:
            raise DegenerateConditioning(f"edge {edge_id} is present with probability 1")
        span = Q.copy()
        span[j, :] = 0.0
    edges, span = _drop(star.edges, j, span)
    return _basis(edges, span)


@dataclass(frozen=True)
class SubspaceRelation:
    contained: bool
    equal: bool
    dim1: int
    dim2: int

    @property
    def gap(self) -> int:
        return self.dim2 - self.dim1

    @property
    def proper(self) -> bool:
        return self.contained and not self.equal


def subspace_compare(h1: EdgeSpaceBasis, h2: EdgeSpaceBasis, tol: float = 1e-8) -> SubspaceRelation:
    if h1.edges != h2.edges:
        raise CoordinateMismatch("bases live on different edge coordinate lists")
    if h1.dim == 0:
        contained = True
    else:
        resid = h1.Q - h2.Q @ (h2.Q.T @ h1.Q)
        contained = bool(np.max(np.linalg.norm(resid, axis=0)) <= tol)
    return SubspaceRelation(contained, contained and h1.dim == h2.dim, h1.dim, h2.dim)


# -- exact enumeration oracle --------------------------------------------------------


@dataclass(frozen=True)
class TreeDistribution:
    edges: tuple[str, ...]
    trees: tuple[frozenset[str], ...]
    weights: tuple[float, ...]
    probs: tuple[float, ...]

    def marginal(self, edge_ids) -> float:
        s = set(edge_ids)
        return float(sum(p for t, p in zip(self.trees, self.probs) if s <= t))

    def singles(self) -> dict[str, float]:
        return {e: self.marginal([e]) for e in self.edges}

    def pairs(self) -> dict[tuple[str, str], float]:
        return {(a, b): self.marginal([a, b]) for a, b in itertools.combinations(self.edges, 2)}

    def conditional(self, edge_id: str, present: bool) -> dict[str, float]:
        """P[f in T | status of edge_id] for every other edge f."""
        keep = [(t, p) for t, p in zip(self.trees, self.probs) if (edge_id in t) == present]
        z = sum(p for _, p in keep)
        if z <= 0:
            raise DegenerateConditioning(f"edge {edge_id} status has probability 0")
        return {f: float(sum(p for t, p in keep if f in t) / z) for f in self.edges if f != edge_id}


def enumerate_spanning_trees(network: FiniteNetwork, max_edges: int = MAX_ENUM_EDGES) -> TreeDistribution:
    """All spanning trees by backtracking over edges with a union-find."""
    m = len(network.edges)
    if m > max_edges:
        raise EnumerationTooLarge(f"{m} edges exceed the enumeration budget of {max_edges}")
    index = network.vertex_index()
    ends = [(index[e.tail], index[e.head]) for e in network.edges]
    cond = [e.conductance for e in network.edges]
    need = len(network.vertices) - 1
    parent = list(range(len(network.vertices)))
    found: list[tuple[list[int], float]] = []

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    def rec(i, chosen, weight):
        if len(chosen) == need:
            found.append((list(chosen), weight))
            return
        if m - i < need - len(chosen):
            return
        a, b = find(ends[i][0]), find(ends[i][1])
        if a != b:
            parent[a] = b  # no path compression, so the undo is exact
            chosen.append(i)
            rec(i + 1, chosen, weight * cond[i])
            chosen.pop()
            parent[a] = a
        rec(i + 1, chosen, weight)

    rec(0, [], 1.0)
    ids = network.edge_ids
    total = sum(w for _, w in found)
    trees = tuple(frozenset(ids[i] for i in t) for t, _ in found)
    weights = tuple(w for _, w in found)
    return TreeDistribution(ids, trees, weights, tuple(w / total for w in weights))
