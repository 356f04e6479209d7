"""Seeded samplers: Wilson's algorithm, wired truncations, ray + percolation.

Conventions for tree samplers.  A replica seed ``s`` owns the substreams

* ``s.child(0)`` -- the harmonic-measure ray (child side, for pairs),
* ``s.child(1)`` -- the edge percolation, one coin per vertex path,
* ``s.child(2)`` -- root-side ray (pairs) / rejection attempts (survival),
* ``s.child(3)`` -- the mixture coin of a conditioned pair.

Percolation coins are keyed by vertex path, so ``perc_component_sample(s)``
is exactly the percolation part of ``root_component_sample(s)``, and
``ray_sample(s)`` is exactly its ray.  Batch replica ``i`` uses the replica
seed ``seed.child(i)``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import potential
from .errors import (
    InvalidParameter,
    RecurrentProfile,
    RejectionBudgetExceeded,
    UnsupportedDepth,
    ZeroSurvival,
)
from .network import (
    WIRED,
    ComponentSample,
    FiniteNetwork,
    SphericalProfile,
    VertexPath,
    parse_path,
    truncate_wired,
)
from .rng import (
    SALT_PERC,
    SALT_PERC_REVERSED,
    SALT_RAY,
    RngSeed,
    as_seed,
    child_key,
    child_key_array,
    coin,
    coin_array,
)

RAY, PERC, AUX, MIX = 0, 1, 2, 3
LAWS = ("perc", "rayperc", "survival")


# -- spanning trees of finite networks -------------------------------------------


@dataclass(frozen=True)
class EdgeConfig:
    network: FiniteNetwork
    present: frozenset[str]

    def indicator(self) -> np.ndarray:
        return np.array([e.id in self.present for e in self.network.edges], dtype=np.int8)

    def is_spanning_tree(self) -> bool:
        net = self.network
        if len(self.present) != len(net.vertices) - 1:
            return False
        parent = {v: v for v in net.vertices}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in net.edges:
            if e.id in self.present:
                a, b = find(e.tail), find(e.head)
                if a == b:
                    return False
                parent[a] = b
        return True


class _Walker:
    """Network random walk tables plus Wilson's loop-erased sweep."""

    def __init__(self, network: FiniteNetwork, root: str):
        if root not in network.adjacency:
            raise InvalidParameter(f"root {root!r} is not a vertex")
        self.network = network
        index = network.vertex_index()
        self.order = [index[v] for v in network.bfs_order(root)]
        self.root = index[root]
        self.nbr: list[list[int]] = []
        self.eid: list[list[int]] = []
        self.cum: list[list[float]] = []
        for v in network.vertices:
            inc = network.adjacency[v]
            c = np.cumsum([network.edges[i].conductance for i in inc])
            self.nbr.append([index[network.edges[i].other(v)] for i in inc])
            self.eid.append(list(inc))
            self.cum.append(list(c[:-1] / c[-1]))

    def sample(self, uniforms: Iterator[float]) -> list[int]:
        n = len(self.nbr)
        in_tree = [False] * n
        in_tree[self.root] = True
        next_v = [-1] * n
        next_e = [-1] * n
        nbr, eid, cum = self.nbr, self.eid, self.cum
        for v in self.order:
            u = v
            while not in_tree[u]:
                j = bisect.bisect_right(cum[u], next(uniforms)) if cum[u] else 0
                next_e[u] = eid[u][j]
                next_v[u] = nbr[u][j]
                u = next_v[u]
            u = v
            while not in_tree[u]:
                in_tree[u] = True
                u = next_v[u]
        return [next_e[v] for v in range(n) if v != self.root]


def _uniform_stream(gen: np.random.Generator, chunk: int = 1 << 16) -> Iterator[float]:
    while True:
        yield from gen.random(chunk).tolist()


def wilson_batch(network: FiniteNetwork, root: str, seed: RngSeed | int, samples: int) -> list[EdgeConfig]:
    """``samples`` independent weighted spanning trees via Wilson's algorithm.

    Vertices are swept in breadth-first order from ``root``; each walk runs
    until it hits the current tree and its loop erasure is attached.  The
    draws come sequentially from ``seed.generator()``.
    """
    walker = _Walker(network, root)
    stream = _uniform_stream(as_seed(seed).generator())
    ids = network.edge_ids
    return [EdgeConfig(network, frozenset(ids[i] for i in walker.sample(stream))) for _ in range(samples)]


def wilson_ust(network: FiniteNetwork, root: str, seed: RngSeed | int) -> EdgeConfig:
    return wilson_batch(network, root, seed, 1)[0]


# -- wired spanning forest on truncations ---------------------------------------------


@dataclass(frozen=True)
class WiredForest:
    """A weighted spanning tree of a wired truncation, split by edge kind."""

    config: EdgeConfig
    keep: int

    @property
    def tree_edges(self) -> frozenset[VertexPath]:
        """Child endpoints of the present tree edges."""
        return frozenset(parse_path(e[1:]) for e in self.config.present if e.startswith("e"))

    @property
    def boundary_edges(self) -> frozenset[VertexPath]:
        return frozenset(parse_path(e[1:]) for e in self.config.present if e.startswith("b"))

    def root_component(self) -> ComponentSample:
        present = self.tree_edges
        verts = [()]
        for v in verts:
            for c in _children_in(v, present):
                verts.append(c)
        return ComponentSample.from_vertices(verts, self.keep)


def _children_in(v: VertexPath, present: frozenset) -> list[VertexPath]:
    out = []
    i = 0
    while v + (i,) in present or i == 0:
        if v + (i,) in present:
            out.append(v + (i,))
        i += 1
        if i > 64 and not out:
            break
    return out


def wsf_truncated_batch(
    profile: SphericalProfile, depth: int, seed: RngSeed | int, samples: int, keep: int | None = None
) -> list[WiredForest]:
    """Weighted spanning trees of the wired truncation at ``depth``.

    With ``keep`` the levels below ``keep`` are series-reduced first, which
    leaves the law on levels ``<= keep`` unchanged; this is how truncations
    far deeper than memory allows are sampled.
    """
    if not potential.is_transient(profile):
        raise RecurrentProfile("the wired closure needs a transient profile")
    keep = depth if keep is None else keep
    net = truncate_wired(profile, depth, keep)
    return [WiredForest(cfg, keep) for cfg in wilson_batch(net, WIRED, seed, samples)]


def wsf_truncated(profile: SphericalProfile, depth: int, seed: RngSeed | int, keep: int | None = None) -> WiredForest:
    return wsf_truncated_batch(profile, depth, seed, 1, keep)[0]


# -- ray and percolation on the spherically symmetric tree ------------------------------


def _require_transient(profile: SphericalProfile) -> tuple[float, ...]:
    if not potential.is_transient(profile):
        raise RecurrentProfile("sampler needs a transient profile")
    return potential.perc_open_probs(profile)


def _check_depth(profile: SphericalProfile, depth: int) -> None:
    if isinstance(depth, bool) or int(depth) != depth or not (0 <= depth <= profile.depth):
        raise InvalidParameter(f"depth {depth!r} outside [0, {profile.depth}]")


def vertex_key(perc_key: int, path: VertexPath) -> int:
    k = perc_key
    for i in path:
        k = child_key(k, i)
    return k


def _ray_from(profile: SphericalProfile, start: VertexPath, depth: int, ray_key: int) -> list[VertexPath]:
    ray = [start]
    v = start
    for n in range(len(start) + 1, depth + 1):
        v = v + (int(coin(child_key(ray_key, n), SALT_RAY) * profile.b(n)),)
        ray.append(v)
    return ray


def _grow(
    profile: SphericalProfile,
    p: tuple[float, ...],
    depth: int,
    starts: list[tuple[VertexPath, int]],
    ray: set[VertexPath],
    exclude: VertexPath | None = None,
) -> list[VertexPath]:
    """Downward closure of ``starts`` through open edges and ray edges."""
    out = []
    frontier = list(starts)
    while frontier:
        nxt = []
        for v, k in frontier:
            out.append(v)
            n = len(v) + 1
            if n > depth:
                continue
            pn = p[n]
            for i in range(profile.b(n)):
                c = v + (i,)
                if c == exclude:
                    continue
                ck = child_key(k, i)
                if c in ray or coin(ck, SALT_PERC) < pn:
                    nxt.append((c, ck))
        frontier = nxt
    return out


def ray_sample(profile: SphericalProfile, depth: int, seed: RngSeed | int) -> ComponentSample:
    """A harmonic-measure ray: uniform child choices from the root."""
    _require_transient(profile)
    _check_depth(profile, depth)
    seed = as_seed(seed)
    return ComponentSample.from_vertices(_ray_from(profile, (), depth, seed.child(RAY).key()), depth)


def perc_component_sample(profile: SphericalProfile, depth: int, seed: RngSeed | int) -> ComponentSample:
    """Root cluster of independent percolation with level-n open probability p_n."""
    p = _require_transient(profile)
    _check_depth(profile, depth)
    seed = as_seed(seed)
    return ComponentSample.from_vertices(_grow(profile, p, depth, [((), seed.child(PERC).key())], set()), depth)


def root_component_sample(profile: SphericalProfile, depth: int, seed: RngSeed | int) -> ComponentSample:
    """Root component of the wired spanning forest, to ``depth`` levels.

    The ray from ``seed.child(0)`` is united with the percolation from
    ``seed.child(1)``; the result is the component of the root in that
    union, so percolation clusters hanging off any ray vertex belong to it.
    """
    p = _require_transient(profile)
    _check_depth(profile, depth)
    seed = as_seed(seed)
    ray = set(_ray_from(profile, (), depth, seed.child(RAY).key()))
    return ComponentSample.from_vertices(_grow(profile, p, depth, [((), seed.child(PERC).key())], ray), depth)


def _subtree_component(
    profile: SphericalProfile, p, depth: int, x: VertexPath, perc_key: int, ray_key: int | None
) -> ComponentSample:
    ray = set(_ray_from(profile, x, depth, ray_key)) if ray_key is not None else set()
    verts = _grow(profile, p, depth, [(x, vertex_key(perc_key, x))], ray)
    return ComponentSample.from_vertices(verts, depth, root=x)


def _root_side_component(
    profile: SphericalProfile, p, depth: int, x: VertexPath, perc_key: int, ray_key: int | None
) -> ComponentSample:
    """Component of y = parent(x) in the tree with the subtree of x removed."""
    n = len(x)
    side = potential.root_side(profile, n)
    y = x[:-1]
    ancestors = [x[:k] for k in range(n)]  # a_0 = root, ..., a_{n-1} = y

    ray: set[VertexPath] = set()
    ray_top = n - 1
    if ray_key is not None:
        cum = np.cumsum(side.escape)
        u = coin(child_key(ray_key, 0), SALT_RAY) * cum[-1]
        ray_top = min(int(np.searchsorted(cum, u, side="right")), n - 1)
        a = ancestors[ray_top]
        blocked = x[ray_top]  # the path child of a_k (x itself when k = n-1)
        j = int(coin(child_key(ray_key, 1), SALT_RAY) * (profile.b(ray_top + 1) - 1))
        c = a + (j if j < blocked else j + 1,)
        ray.update(ancestors[ray_top:])
        if len(c) <= depth:
            ray.update(_ray_from_keyed(profile, c, depth, ray_key))

    # climb from y while the re-rooted path edges are open or carried by the ray
    top = n - 1
    while top > 0:
        k = top - 1
        covered = ray_key is not None and ray_top <= k
        if covered or coin(vertex_key(perc_key, ancestors[top]), SALT_PERC_REVERSED) < side.up_open[k]:
            top = k
        else:
            break
    verts: list[VertexPath] = list(ancestors[top:])
    starts = []
    for k in range(top, n):
        a = ancestors[k]
        if k + 1 > depth:
            continue
        path_child = x[: k + 1]
        ka = vertex_key(perc_key, a)
        pk1 = p[k + 1]
        for i in range(profile.b(k + 1)):
            c = a + (i,)
            if c == path_child:
                continue
            ck = child_key(ka, i)
            if c in ray or coin(ck, SALT_PERC) < pk1:
                starts.append((c, ck))
    verts.extend(_grow(profile, p, depth, starts, ray))
    return ComponentSample.from_vertices(verts, depth, root=ancestors[top])


def _ray_from_keyed(profile: SphericalProfile, start: VertexPath, depth: int, ray_key: int) -> list[VertexPath]:
    # counters 0 and 1 are spent on the exit choice; levels use counter n + 2
    ray = [start]
    v = start
    for n in range(len(start) + 1, depth + 1):
        v = v + (int(coin(child_key(ray_key, n + 2), SALT_RAY) * profile.b(n)),)
        ray.append(v)
    return ray


@dataclass(frozen=True)
class ConditionedPair:
    """Components on both sides of the edge [x, y] under a conditioned WSF."""

    x: VertexPath
    y: VertexPath
    edge_present: bool
    ray_side: str  # "both" | "child" | "root"
    child_side: ComponentSample
    root_side: ComponentSample


def conditioned_pair_sample(
    profile: SphericalProfile,
    edge_level: int,
    status: str | bool,
    depth: int,
    seed: RngSeed | int,
    x: VertexPath | None = None,
) -> ConditionedPair:
    """Sample (component of x below the edge, component of y above it).

    ``status`` absent: independent ray+percolation on both sides.  Present:
    with probability ``potential.mixture_weight`` ray+percolation below and
    percolation alone above, otherwise the other way round.
    """
    p = _require_transient(profile)
    _check_depth(profile, depth)
    if edge_level < 1:
        raise InvalidParameter("edge_level must be >= 1")
    if edge_level > depth:
        raise UnsupportedDepth(f"edge level {edge_level} lies below the sampled depth {depth}")
    present = status in (True, 1, "present", "1")
    if not present and status not in (False, 0, "absent", "0"):
        raise InvalidParameter(f"status must be present or absent, got {status!r}")
    x = tuple(x) if x is not None else (0,) * edge_level
    if len(x) != edge_level or not profile.is_valid_vertex(x):
        raise InvalidParameter(f"{x!r} is not a level-{edge_level} vertex")
    seed = as_seed(seed)
    perc_key = seed.child(PERC).key()
    child_ray, root_ray = seed.child(RAY).key(), seed.child(AUX).key()
    if not present:
        side = "both"
    else:
        weight = potential.mixture_weight(profile, edge_level)
        side = "child" if coin(seed.child(MIX).key(), SALT_RAY) < weight else "root"
    child = _subtree_component(profile, p, depth, x, perc_key, child_ray if side in ("both", "child") else None)
    root = _root_side_component(profile, p, depth, x, perc_key, root_ray if side in ("both", "root") else None)
    return ConditionedPair(x, x[:-1], present, side, child, root)


@dataclass(frozen=True)
class SurvivalSample:
    sample: ComponentSample
    attempts: int
    acceptance_rate: float

    @property
    def expected_attempts(self) -> float:
        return 1.0 / self.acceptance_rate


def survival_conditioned_perc(
    profile: SphericalProfile, depth: int, seed: RngSeed | int, max_attempts: int = 1_000_000
) -> SurvivalSample:
    """Percolation cluster conditioned to reach level ``depth``, by rejection.

    Attempt ``j`` is ``perc_component_sample`` under ``seed.child(2, j)``.
    """
    _require_transient(profile)
    _check_depth(profile, depth)
    s = potential.survival_to_depth(profile, depth)
    if s <= np.finfo(float).eps:
        raise ZeroSurvival(f"survival probability to depth {depth} is {s!r}")
    seed = as_seed(seed)
    for j in range(max_attempts):
        sample = perc_component_sample(profile, depth, seed.child(AUX, j))
        if sample.level_counts[depth] > 0:
            return SurvivalSample(sample, j + 1, s)
    raise RejectionBudgetExceeded(f"no surviving cluster in {max_attempts} attempts (rate {s:.3g})")


# -- vectorized batches of level counts ------------------------------------------------


def _batch_counts(profile, p, depth, perc_keys, ray_keys):
    R = len(perc_keys)
    counts = np.zeros((R, depth + 1), dtype=np.int64)
    counts[:, 0] = 1
    rep = np.arange(R)
    key = perc_keys.copy()
    onray = np.ones(R, dtype=bool) if ray_keys is not None else None
    for n in range(1, depth + 1):
        if rep.size == 0:
            break
        b = profile.b(n)
        idx = np.tile(np.arange(b, dtype=np.uint64), rep.size)
        rep_c = np.repeat(rep, b)
        key_c = child_key_array(np.repeat(key, b), idx)
        keep = coin_array(key_c, SALT_PERC) < p[n]
        if ray_keys is not None:
            level = np.full(R, n, dtype=np.uint64)
            choice = (coin_array(child_key_array(ray_keys, level), SALT_RAY) * b).astype(np.int64)
            onray_c = np.repeat(onray, b) & (idx.astype(np.int64) == choice[rep_c])
            keep |= onray_c
            onray = onray_c[keep]
        rep, key = rep_c[keep], key_c[keep]
        counts[:, n] = np.bincount(rep, minlength=R)
    return counts


def _replica_keys(seed: RngSeed, replicas: int, *labels: int) -> np.ndarray:
    keys = seed.child_keys(replicas)
    for label in labels:
        keys = child_key_array(keys, np.full(replicas, label, dtype=np.uint64))
    return keys


def level_counts_batch(
    profile: SphericalProfile,
    depth: int,
    replicas: int,
    law: str,
    seed: RngSeed | int,
    max_attempts: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-level cardinalities |t_n| for ``replicas`` samples under ``law``.

    Row ``i`` equals the level counts of the single-sample function called
    with ``seed.child(i)``.  Returns ``(counts, attempts)``; attempts are
    all 1 except under ``survival``.
    """
    p = _require_transient(profile)
    _check_depth(profile, depth)
    if replicas < 1:
        raise InvalidParameter("replicas must be >= 1")
    seed = as_seed(seed)
    attempts = np.ones(replicas, dtype=np.int64)
    if law == "rayperc":
        counts = _batch_counts(profile, p, depth, _replica_keys(seed, replicas, PERC), _replica_keys(seed, replicas, RAY))
    elif law == "perc":
        counts = _batch_counts(profile, p, depth, _replica_keys(seed, replicas, PERC), None)
    elif law == "survival":
        s = potential.survival_to_depth(profile, depth)
        if s <= np.finfo(float).eps:
            raise ZeroSurvival(f"survival probability to depth {depth} is {s!r}")
        counts = np.zeros((replicas, depth + 1), dtype=np.int64)
        pending = np.arange(replicas)
        base = _replica_keys(seed, replicas, AUX)
        for j in range(max_attempts):
            keys = child_key_array(base[pending], np.full(pending.size, j, dtype=np.uint64))
            keys = child_key_array(keys, np.full(pending.size, PERC, dtype=np.uint64))
            c = _batch_counts(profile, p, depth, keys, None)
            ok = c[:, depth] > 0
            counts[pending[ok]] = c[ok]
            attempts[pending[ok]] = j + 1
            pending = pending[~ok]
            if pending.size == 0:
                break
        else:
            raise RejectionBudgetExceeded(f"{pending.size} replicas did not survive in {max_attempts} attempts")
    else:
        raise InvalidParameter(f"law must be one of {LAWS}, got {law!r}")
    return counts, attempts
