"""Finite networks, spherically symmetric tree profiles and wired truncations."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    DisconnectedGraph,
    DuplicateEdge,
    InvalidParameter,
    MissingTailRule,
    NonpositiveConductance,
    RecurrentTail,
    SelfLoop,
)

WIRED = "wired"
MAX_TRUNCATION_VERTICES = 2_000_000

VertexPath = tuple[int, ...]


# -- finite networks ---------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    """Undirected edge with a stored orientation ``tail -> head``."""

    id: str
    tail: str
    head: str
    conductance: float = 1.0

    @property
    def resistance(self) -> float:
        return 1.0 / self.conductance

    def other(self, x: str) -> str:
        return self.head if x == self.tail else self.tail

    def flipped(self) -> Edge:
        return Edge(self.id, self.head, self.tail, self.conductance)


@dataclass(frozen=True)
class FiniteNetwork:
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    adjacency: Mapping[str, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise DisconnectedGraph("a network needs at least two vertices")
        if len(set(self.vertices)) != len(self.vertices):
            raise InvalidParameter("duplicate vertex identifiers")
        known = set(self.vertices)
        adj: dict[str, list[int]] = {v: [] for v in self.vertices}
        ids = set()
        for i, e in enumerate(self.edges):
            if e.id in ids:
                raise DuplicateEdge(f"edge id {e.id!r} used twice")
            ids.add(e.id)
            if e.tail not in known or e.head not in known:
                raise InvalidParameter(f"edge {e.id!r} has an unknown endpoint")
            if e.tail == e.head:
                raise SelfLoop(f"edge {e.id!r} is a self-loop at {e.tail!r}")
            c = e.conductance
            if not (isinstance(c, (int, float)) and math.isfinite(c) and c > 0):
                raise NonpositiveConductance(f"edge {e.id!r} has conductance {c!r}")
            adj[e.tail].append(i)
            adj[e.head].append(i)
        for v, inc in adj.items():
            if not math.isfinite(sum(self.edges[i].conductance for i in inc)):
                raise NonpositiveConductance(f"total conductance at {v!r} is not finite")
        object.__setattr__(self, "adjacency", {v: tuple(inc) for v, inc in adj.items()})
        if len(self._reachable(self.vertices[0])) != len(self.vertices):
            raise DisconnectedGraph("network is not connected")

    def _reachable(self, start: str) -> set[str]:
        seen = {start}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for i in self.adjacency[x]:
                y = self.edges[i].other(x)
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return seen

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    def edge_index(self, edge_id: str) -> int:
        for i, e in enumerate(self.edges):
            if e.id == edge_id:
                return i
        raise InvalidParameter(f"no edge with id {edge_id!r}")

    def vertex_index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    def bfs_order(self, root: str) -> list[str]:
        if root not in self.adjacency:
            raise InvalidParameter(f"unknown vertex {root!r}")
        order = [root]
        seen = {root}
        for x in order:
            for i in self.adjacency[x]:
                y = self.edges[i].other(x)
                if y not in seen:
                    seen.add(y)
                    order.append(y)
        return order

    def with_orientation(self, flip: Iterable[str]) -> FiniteNetwork:
        flip = set(flip)
        return FiniteNetwork(self.vertices, tuple(e.flipped() if e.id in flip else e for e in self.edges))

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"id": e.id, "u": e.tail, "v": e.head, "c": e.conductance, "orientation": "forward"}
                for e in self.edges
            ],
        }


def build_finite_network(desc: Mapping) -> FiniteNetwork:
    """Validate a graph description and build a ``FiniteNetwork``.

    ``desc`` follows the graph-file layout: ``{"vertices": [...], "edges":
    [{"u", "v", "c"?, "id"?, "orientation"?}, ...]}``.  Edge ids default to
    ``e1, e2, ...``; orientation is ``u -> v`` when ``orientation`` is
    ``"forward"``, ``v -> u`` for ``"reverse"``, otherwise lexicographic.
    Parallel edges must each carry an explicit ``id``.
    """
    try:
        vertices = [str(v) for v in desc["vertices"]]
        raw_edges = list(desc.get("edges", []))
    except (KeyError, TypeError) as exc:
        raise InvalidParameter(f"malformed graph description: {exc}") from None
    edges = []
    seen_pairs: dict[frozenset, bool] = {}
    for k, raw in enumerate(raw_edges):
        if isinstance(raw, Mapping):
            unknown = set(raw) - {"u", "v", "c", "id", "orientation"}
            if unknown:
                raise InvalidParameter(f"unknown edge keys {sorted(unknown)}")
            u, v = str(raw["u"]), str(raw["v"])
            c = raw.get("c", 1.0)
            explicit_id = "id" in raw
            eid = str(raw["id"]) if explicit_id else f"e{k + 1}"
            orientation = raw.get("orientation")
        else:
            u, v, *rest = raw
            u, v = str(u), str(v)
            c = rest[0] if rest else 1.0
            explicit_id, eid, orientation = False, f"e{k + 1}", "forward"
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            raise NonpositiveConductance(f"edge {eid!r} has non-numeric conductance {c!r}")
        pair = frozenset((u, v))
        if pair in seen_pairs and not (explicit_id and seen_pairs[pair]):
            raise DuplicateEdge(f"parallel edges between {u!r} and {v!r} need distinct explicit ids")
        seen_pairs[pair] = explicit_id and seen_pairs.get(pair, True)
        if orientation == "forward":
            tail, head = u, v
        elif orientation == "reverse":
            tail, head = v, u
        elif orientation is None:
            tail, head = (u, v) if u <= v else (v, u)
        else:
            raise InvalidParameter(f"orientation must be 'forward' or 'reverse', got {orientation!r}")
        edges.append(Edge(eid, tail, head, float(c)))
    return FiniteNetwork(tuple(vertices), tuple(edges))


def load_network(path: str | Path) -> FiniteNetwork:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"{path}: invalid JSON ({exc})") from None
    return build_finite_network(data)


# -- vertex paths ------------------------------------------------------------


def path_str(path: Sequence[int]) -> str:
    return ".".join(str(i) for i in path)


def parse_path(s: str | Sequence[int]) -> VertexPath:
    if not isinstance(s, str):
        return tuple(int(i) for i in s)
    return tuple(int(i) for i in s.split(".")) if s else ()


# -- profile rules -----------------------------------------------------------


class ProfileRule:
    """Generator of (b_n, r_n) plus knowledge about the tail beyond the data.

    ``tail(n, size_n)`` returns ``(L_n, bound)`` with
    ``L_n = sum_{m>n} r_m/|T_m|`` and a guaranteed absolute error bound.
    """

    name = "rule"
    growth_ratio_liminf: float | None = None
    poly_exponent: float | None = None
    unit_resistance = True
    max_branching: int | None = None
    series_converges: bool | None = None

    def branching(self, n: int) -> int:
        raise NotImplementedError

    def resistance(self, n: int) -> float:
        return 1.0

    def tail(self, n: int, size_n: int) -> tuple[float, float]:
        raise MissingTailRule(f"{self.name} profile carries no tail rule")

    def params(self) -> dict:
        raise InvalidParameter(f"{self.name} profiles are not serializable")


@dataclass(frozen=True)
class Binary(ProfileRule):
    name = "binary"
    growth_ratio_liminf = 2.0
    max_branching = 2

    def branching(self, n):
        return 2

    def tail(self, n, size_n):
        return math.ldexp(1.0, -n), 0.0

    def params(self):
        return {"rule": "binary"}


@dataclass(frozen=True)
class Geometric(ProfileRule):
    b: int = 2
    name = "geometric"

    def __post_init__(self):
        if isinstance(self.b, bool) or int(self.b) != self.b or self.b < 1:
            raise InvalidParameter(f"geometric branching must be an integer >= 1, got {self.b!r}")

    @property
    def growth_ratio_liminf(self):
        return float(self.b)

    @property
    def max_branching(self):
        return int(self.b)

    def branching(self, n):
        return int(self.b)

    def tail(self, n, size_n):
        if self.b == 1:
            return math.inf, 0.0
        # integer true division stays correctly rounded for huge b^n
        return 1 / (size_n * (self.b - 1)), 0.0

    def params(self):
        return {"rule": "geometric", "b": int(self.b)}


def _iroot_ceil(x: int, k: int) -> int:
    """Smallest integer r >= 1 with r**k >= x."""
    if x <= 1:
        return 1
    r = 1 << -(-x.bit_length() // k)
    while True:
        s = ((k - 1) * r + x // r ** (k - 1)) // k
        if s >= r:
            break
        r = s
    return r if r**k >= x else r + 1


@dataclass(frozen=True)
class Poly(ProfileRule):
    """|T_n| = 2^floor(gamma * log2(n+1)), unit resistances."""

    gamma: float = 2.0
    name = "poly"
    growth_ratio_liminf = 1.0

    def __post_init__(self):
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidParameter(f"poly exponent must be > 0, got {self.gamma!r}")

    @property
    def poly_exponent(self):
        return float(self.gamma)

    @property
    def max_branching(self):
        return 2 ** math.ceil(self.gamma)

    @property
    def _integral(self) -> bool:
        return float(self.gamma).is_integer()

    def level_exponent(self, n: int) -> int:
        if self._integral:
            return ((n + 1) ** int(self.gamma)).bit_length() - 1
        return math.floor(self.gamma * math.log2(n + 1))

    def first_level_with_exponent(self, k: int) -> int:
        """Smallest m >= 0 with level_exponent(m) >= k."""
        if k <= 0:
            return 0
        if self._integral:
            return _iroot_ceil(1 << k, int(self.gamma)) - 1
        m = max(0, math.ceil(2.0 ** (k / self.gamma)) - 3)
        while self.level_exponent(m) < k:
            m += 1
        return m

    def branching(self, n):
        return 1 << (self.level_exponent(n) - self.level_exponent(n - 1))

    def tail(self, n, size_n):
        if self.gamma <= 1:
            return math.inf, 0.0
        # blocks of constant level exponent k contribute (block length) * 2^-k
        acc = _Compensated()
        k = self.level_exponent(n + 1)
        start = n + 1
        rho = 2.0 ** (1.0 / self.gamma - 1.0)
        while True:
            nxt = self.first_level_with_exponent(k + 1)
            acc.add((nxt - start) * math.ldexp(1.0, -k))
            start, k = nxt, k + 1
            # block j holds at most 2^((j+1)/gamma) - 2^(j/gamma) + 1 levels
            remaining = 2.0 ** (1.0 / self.gamma) * rho**k / (1.0 - rho) + math.ldexp(2.0, -k)
            if remaining <= 1e-17 * acc.value or k / self.gamma > 1000:
                return acc.value, remaining

    def params(self):
        return {"rule": "poly", "gamma": float(self.gamma)}


@dataclass(frozen=True)
class Explicit(ProfileRule):
    branching_seq: tuple[int, ...] = ()
    resistance_seq: tuple[float, ...] = ()
    name = "explicit"
    unit_resistance = False

    def __post_init__(self):
        object.__setattr__(self, "branching_seq", tuple(self.branching_seq))
        object.__setattr__(self, "resistance_seq", tuple(float(r) for r in self.resistance_seq))
        if len(self.branching_seq) != len(self.resistance_seq):
            raise InvalidParameter("explicit branching and resistance must have equal length")

    @property
    def max_branching(self):
        return max(self.branching_seq, default=1)

    def branching(self, n):
        if n > len(self.branching_seq):
            raise InvalidParameter(f"explicit profile has no data at level {n}")
        return self.branching_seq[n - 1]

    def resistance(self, n):
        if n > len(self.resistance_seq):
            raise InvalidParameter(f"explicit profile has no data at level {n}")
        return self.resistance_seq[n - 1]

    def params(self):
        return {"rule": "explicit", "branching": list(self.branching_seq), "resistance": list(self.resistance_seq)}


@dataclass(frozen=True)
class Custom(ProfileRule):
    """Caller-supplied generators and a closed form for the tail sums.

    ``tail_fn(n)`` must return ``sum_{m>n} r_m/|T_m|`` (``math.inf`` for a
    recurrent tail).  ``series_converges`` is the caller's verdict on the
    classifying series, if known.
    """

    branching_fn: Callable[[int], int] = lambda n: 2
    resistance_fn: Callable[[int], float] = lambda n: 1.0
    tail_fn: Callable[[int], float] = lambda n: math.ldexp(1.0, -n)
    tail_bound: float = 0.0
    series_converges: bool | None = None
    max_branching: int | None = None
    label: str = "custom"
    name = "custom"
    unit_resistance = False

    def branching(self, n):
        return int(self.branching_fn(n))

    def resistance(self, n):
        return float(self.resistance_fn(n))

    def tail(self, n, size_n):
        return float(self.tail_fn(n)), float(self.tail_bound)


class _Compensated:
    """Neumaier summation."""

    def __init__(self):
        self.total = 0.0
        self.comp = 0.0

    def add(self, x: float) -> None:
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self.comp


# -- spherically symmetric profiles ------------------------------------------


@dataclass(frozen=True)
class SphericalProfile:
    """Branching numbers b_1..b_depth and resistances r_1..r_depth."""

    branching: tuple[int, ...]
    resistance: tuple[float, ...]
    rule: ProfileRule
    level_sizes: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.branching) != len(self.resistance) or not self.branching:
            raise InvalidParameter("profile needs equal-length, nonempty branching and resistance data")
        sizes = [1]
        for n, (b, r) in enumerate(zip(self.branching, self.resistance), start=1):
            if isinstance(b, bool) or int(b) != b or b < 1:
                raise InvalidParameter(f"branching number b_{n} = {b!r} is not an integer >= 1")
            if not (math.isfinite(r) and r > 0):
                raise InvalidParameter(f"resistance r_{n} = {r!r} is not positive and finite")
            sizes.append(sizes[-1] * int(b))
        if sizes[-1] > 2**1000:
            raise InvalidParameter("level sizes exceed double-precision range; reduce depth")
        object.__setattr__(self, "level_sizes", tuple(sizes))

    @property
    def depth(self) -> int:
        return len(self.branching)

    def b(self, n: int) -> int:
        return self.branching[n - 1]

    def r(self, n: int) -> float:
        return self.resistance[n - 1]

    def size(self, n: int) -> int:
        return self.level_sizes[n]

    def check_level(self, n: int, lo: int = 0) -> None:
        if not (lo <= n <= self.depth):
            raise InvalidParameter(f"level {n} outside [{lo}, {self.depth}]")

    def tail_beyond_depth(self) -> tuple[float, float]:
        return self.rule.tail(self.depth, self.size(self.depth))

    def to_dict(self) -> dict:
        return {**self.rule.params(), "depth": self.depth}

    def is_valid_vertex(self, path: Sequence[int]) -> bool:
        return len(path) <= self.depth and all(0 <= c < self.b(i + 1) for i, c in enumerate(path))


def build_profile(rule: ProfileRule | Mapping, depth: int | None = None) -> SphericalProfile:
    """Materialize a profile rule to ``depth`` levels.

    ``rule`` may be a rule object or a profile-file dict; a dict's own
    ``"depth"`` is used when ``depth`` is not given.
    """
    if isinstance(rule, Mapping):
        rule, file_depth = _rule_from_dict(rule)
        depth = file_depth if depth is None else depth
    if depth is None:
        depth = len(rule.branching_seq) if isinstance(rule, Explicit) else 64
    if isinstance(depth, bool) or int(depth) != depth or depth < 1:
        raise InvalidParameter(f"profile depth must be an integer >= 1, got {depth!r}")
    depth = int(depth)
    if isinstance(rule, Explicit) and depth > len(rule.branching_seq):
        raise InvalidParameter(f"explicit data has {len(rule.branching_seq)} levels, asked for {depth}")
    branching = tuple(rule.branching(n) for n in range(1, depth + 1))
    resistance = tuple(rule.resistance(n) for n in range(1, depth + 1))
    return SphericalProfile(branching, resistance, rule)


_PROFILE_KEYS = {"rule", "b", "gamma", "depth", "branching", "resistance"}


def _rule_from_dict(d: Mapping) -> tuple[ProfileRule, int | None]:
    unknown = set(d) - _PROFILE_KEYS
    if unknown:
        raise InvalidParameter(f"unknown profile keys {sorted(unknown)}")
    kind = d.get("rule")
    depth = d.get("depth")
    if kind == "binary":
        return Binary(), depth
    if kind == "geometric":
        return Geometric(d.get("b", 2)), depth
    if kind == "poly":
        return Poly(d.get("gamma", 2.0)), depth
    if kind == "explicit":
        if "branching" not in d or "resistance" not in d:
            raise InvalidParameter("explicit profiles need 'branching' and 'resistance'")
        return Explicit(tuple(d["branching"]), tuple(d["resistance"])), depth
    raise InvalidParameter(f"unknown profile rule {kind!r}")


def load_profile(path: str | Path, depth: int | None = None) -> SphericalProfile:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, Mapping):
        raise InvalidParameter(f"{path}: profile file must hold a JSON object")
    return build_profile(data, depth)


# -- component samples -------------------------------------------------------


@dataclass(frozen=True)
class ComponentSample:
    """A finite rooted subtree, stored level by level as child-index paths.

    ``level_sets[n]`` holds the retained vertices at tree level ``n``
    (``0 <= n <= depth``); ``root`` is the top vertex of the subtree, the
    tree root for ordinary component samples.
    """

    depth: int
    level_sets: tuple[frozenset[VertexPath], ...]
    root: VertexPath = ()

    def __post_init__(self):
        if len(self.level_sets) != self.depth + 1:
            raise InvalidParameter("level_sets must have depth + 1 entries")
        if self.root not in self.level_sets[len(self.root)]:
            raise InvalidParameter("root vertex missing from sample")
        k = len(self.root)
        for n, level in enumerate(self.level_sets):
            for v in level:
                if len(v) != n:
                    raise InvalidParameter(f"vertex {path_str(v)!r} stored at level {n}")
                if v[:k] != self.root:
                    raise InvalidParameter(f"vertex {path_str(v)!r} does not descend from the root")
                if n > k and v[:-1] not in self.level_sets[n - 1]:
                    raise InvalidParameter(f"parent of {path_str(v)!r} missing")

    @classmethod
    def from_vertices(cls, vertices: Iterable[VertexPath], depth: int, root: VertexPath = ()) -> ComponentSample:
        levels: list[set] = [set() for _ in range(depth + 1)]
        for v in vertices:
            if len(v) <= depth:
                levels[len(v)].add(tuple(v))
        return cls(depth, tuple(frozenset(s) for s in levels), tuple(root))

    @property
    def level_counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.level_sets)

    @property
    def vertices(self) -> frozenset[VertexPath]:
        return frozenset().union(*self.level_sets)

    @property
    def edge_count(self) -> int:
        return sum(self.level_counts) - 1

    def truncated(self, depth: int) -> ComponentSample:
        return ComponentSample(depth, self.level_sets[: depth + 1], self.root)

    def rerooted(self) -> ComponentSample:
        """Relabel so the root becomes ``()`` (drops the root prefix)."""
        k = len(self.root)
        return ComponentSample(self.depth - k, tuple(frozenset(v[k:] for v in s) for s in self.level_sets[k:]), ())

    def validate_against(self, profile: SphericalProfile) -> None:
        if self.depth > profile.depth:
            raise InvalidParameter("sample deeper than profile")
        for level in self.level_sets:
            for v in level:
                if not profile.is_valid_vertex(v):
                    raise InvalidParameter(f"vertex {path_str(v)!r} invalid under profile branching")


# -- wired truncation --------------------------------------------------------


def tree_vertex_paths(profile: SphericalProfile, depth: int) -> list[VertexPath]:
    """All vertices of levels 0..depth in breadth-first, lexicographic order."""
    out: list[VertexPath] = [()]
    level = [()]
    for n in range(1, depth + 1):
        level = [v + (i,) for v in level for i in range(profile.b(n))]
        out.extend(level)
    return out


def truncate_wired(profile: SphericalProfile, depth: int, keep: int | None = None) -> FiniteNetwork:
    """Wired truncation of the tree at ``depth``.

    Levels ``0..depth`` are kept and every level-``depth`` vertex is joined
    to a single extra vertex ``"wired"`` by an edge whose conductance is the
    effective conductance to infinity of the subtree hanging below it.

    With ``keep < depth`` only levels ``0..keep`` are materialized: each
    level-``keep`` subtree of the depth-``depth`` wired truncation is a
    two-terminal network between its top vertex and the wired vertex, and is
    replaced by its series-parallel equivalent.  Restricted to levels
    ``<= keep`` the weighted spanning-tree law is unchanged.
    """
    profile.check_level(depth)
    keep = depth if keep is None else keep
    if not (0 <= keep <= depth):
        raise InvalidParameter(f"keep={keep} must lie in [0, {depth}]")
    try:
        tail, _ = profile.rule.tail(depth, profile.size(depth))
    except MissingTailRule:
        raise MissingTailRule("explicit profile has no tail rule; wired closure undefined") from None
    if not math.isfinite(tail):
        raise RecurrentTail("tail sum is infinite: the tree is recurrent and has no wired closure")
    n_vertices = sum(profile.level_sizes[: keep + 1]) + 1
    if n_vertices > MAX_TRUNCATION_VERTICES:
        raise InvalidParameter(f"truncation would have {n_vertices} vertices; use a smaller keep level")
    # resistance from a level-keep vertex through its subtree to the wired vertex
    acc = _Compensated()
    for m in range(keep + 1, depth + 1):
        acc.add(profile.r(m) * profile.size(keep) / profile.size(m))
    acc.add(profile.size(keep) * tail)
    closure = 1.0 / acc.value

    paths = tree_vertex_paths(profile, keep)
    vertices = [path_str(p) for p in paths] + [WIRED]
    edges = []
    for p in paths[1:]:
        edges.append(Edge("e" + path_str(p), path_str(p[:-1]), path_str(p), 1.0 / profile.r(len(p))))
    for p in paths:
        if len(p) == keep:
            edges.append(Edge("b" + path_str(p), path_str(p), WIRED, closure))
    return FiniteNetwork(tuple(vertices), tuple(edges))
