"""Electrical and percolation analytics on spherically symmetric profiles.

Everything here is a deterministic function of a ``SphericalProfile``.  The
central quantities are the tail sums ``L_n = sum_{m>n} r_m/|T_m|``; the
hitting probability of the root from level ``n`` is ``h_n = L_n / L_0``
(harmonic interpolation of the resistance to infinity along the collapsed
level chain), and the percolation open probability of a level-``n`` edge is
``p_n = L_n / L_{n-1}``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import InvalidParameter, MissingTailRule, NotAFlow, RecurrentProfile
from .network import Poly, SphericalProfile, VertexPath, _Compensated, parse_path

FLOW_TOL = 1e-12


@dataclass(frozen=True)
class TailSums:
    values: tuple[float, ...]
    remainder_bound: float
    complete: bool = True


@lru_cache(maxsize=256)
def tail_sums(profile: SphericalProfile) -> TailSums:
    """``L_0..L_depth`` by compensated backward summation from the tail.

    Explicit profiles have no tail: the returned values are the partial
    sums over the stored levels for ``n < depth`` only, flagged incomplete
    with an infinite remainder bound.
    """
    try:
        tail, bound = profile.tail_beyond_depth()
        complete = True
    except MissingTailRule:
        tail, bound, complete = 0.0, math.inf, False
    acc = _Compensated()
    acc.add(tail)
    values = [tail]
    for n in range(profile.depth, 0, -1):
        acc.add(profile.r(n) / profile.size(n))
        values.append(acc.value)
    values.reverse()
    if not complete:
        values.pop()
    return TailSums(tuple(values), bound, complete)


def _L(profile: SphericalProfile) -> tuple[float, ...]:
    ts = tail_sums(profile)
    if not ts.complete:
        raise MissingTailRule("explicit profile: finite data cannot decide the tail")
    if not math.isfinite(ts.values[0]):
        raise RecurrentProfile("tail sum diverges: the network is recurrent")
    return ts.values


def is_transient(profile: SphericalProfile) -> bool:
    ts = tail_sums(profile)
    if not ts.complete:
        raise MissingTailRule("explicit profile: finite data cannot decide transience")
    return math.isfinite(ts.values[0])


def hit_root_prob(profile: SphericalProfile, n: int) -> float:
    L = _L(profile)
    profile.check_level(n)
    return L[n] / L[0]


def harmonic_measure(profile: SphericalProfile, n: int) -> float:
    _L(profile)
    profile.check_level(n)
    return 1.0 / profile.size(n)


def perc_open_prob(profile: SphericalProfile, n: int) -> float:
    L = _L(profile)
    if n < 1:
        raise InvalidParameter("the root has no parent edge; n must be >= 1")
    profile.check_level(n, lo=1)
    return L[n] / L[n - 1]


def perc_open_probs(profile: SphericalProfile) -> tuple[float, ...]:
    """``(nan, p_1, ..., p_depth)`` -- indexed by level."""
    L = _L(profile)
    return (math.nan,) + tuple(L[n] / L[n - 1] for n in range(1, profile.depth + 1))


# -- the root side T_{y,x} of an edge -----------------------------------------


@dataclass(frozen=True)
class RootSide:
    """Walk data for the edge between a level-``n`` vertex x and its parent y.

    The component of y after deleting [x, y] is the ancestor path
    ``a_0 = o, ..., a_{n-1} = y`` with spherically symmetric bushes hanging
    off it.  ``up_open[k]`` is the probability that the walk from ``a_k``
    hits ``a_{k+1}`` (the open probability of that edge when the tree is
    re-rooted at y); ``escape[k]`` is the probability that the walk from y
    finally leaves the path into a bush hanging at ``a_k``.
    """

    edge_level: int
    beta_x: float
    beta_y: float
    alpha: float
    up_open: tuple[float, ...]
    escape: tuple[float, ...]

    @property
    def edge_prob(self) -> float:
        """P[[x, y] in WSF]: one of the two loop-erased paths from x, y uses the edge."""
        bx, by = self.beta_x, self.beta_y
        return (bx + by - 2 * bx * by) / (bx + by - bx * by)

    @property
    def mixture_weight(self) -> float:
        """P[the component of [x, y] ends below x | [x, y] present].

        The path from y crosses to x with probability bx (1 - by) / D and
        the path from x crosses to y with probability by (1 - bx) / D, where
        D = bx + by - bx by; the weight is the first share of their sum.
        """
        bx, by = self.beta_x, self.beta_y
        return bx * (1 - by) / (bx + by - 2 * bx * by)


def _path_system(profile: SphericalProfile, L, top: int):
    """Laplacian of the path a_0..a_top with bushes collapsed into sinks."""
    k = top + 1
    sink = np.array(
        [(profile.b(j + 1) - 1) / (profile.r(j + 1) + profile.size(j + 1) * L[j + 1]) for j in range(k)]
    )
    lap = np.diag(sink.copy())
    for j in range(1, k):
        c = 1.0 / profile.r(j)
        lap[j, j] += c
        lap[j - 1, j - 1] += c
        lap[j, j - 1] -= c
        lap[j - 1, j] -= c
    return lap, sink


@lru_cache(maxsize=1024)
def root_side(profile: SphericalProfile, n: int) -> RootSide:
    L = _L(profile)
    profile.check_level(n, lo=1)
    c_edge = 1.0 / profile.r(n)

    # probability that the walk from y ever hits x: x absorbing at potential 1
    lap, sink = _path_system(profile, L, n - 1)
    lap[n - 1, n - 1] += c_edge
    rhs = np.zeros(n)
    rhs[n - 1] = c_edge
    beta_y = 1.0 - float(np.linalg.solve(lap, rhs)[n - 1])
    beta_x = 1.0 - L[n] / L[n - 1]
    alpha = beta_x / (beta_x + beta_y - beta_x * beta_y)

    up = []
    for k in range(n - 1):
        lap_k, _ = _path_system(profile, L, k)
        c = 1.0 / profile.r(k + 1)
        lap_k[k, k] += c
        rhs = np.zeros(k + 1)
        rhs[k] = c
        up.append(float(np.linalg.solve(lap_k, rhs)[k]))

    lap, sink = _path_system(profile, L, n - 1)
    escape = np.linalg.solve(lap, np.diag(sink))[n - 1]
    return RootSide(n, beta_x, beta_y, alpha, tuple(up), tuple(float(f) for f in escape))


def alpha_split(profile: SphericalProfile, n: int) -> float:
    """Probability that the walk from x ends up in the subtree below x."""
    return root_side(profile, n).alpha


def mixture_weight(profile: SphericalProfile, n: int) -> float:
    """Weight of (ray below x, percolation above) in the law conditioned on [x, y] present.

    Differs from ``alpha_split``: the walk from x may cross the edge many
    times, while the forest only records the loop-erased crossings.
    """
    return root_side(profile, n).mixture_weight


# -- the classifying series ----------------------------------------------------


@dataclass(frozen=True)
class SeriesSums:
    terms: tuple[float, ...]  # terms[n - 1] is the level-n term
    partial: tuple[float, ...]  # partial[N] = sum of the first N terms; partial[0] = 0


def series_partial_sums(profile: SphericalProfile, N: int) -> SeriesSums:
    L = _L(profile)
    profile.check_level(N)
    terms = []
    partial = [0.0]
    acc = _Compensated()
    for n in range(1, N + 1):
        t = profile.r(n) / profile.size(n) / profile.size(n) / L[n] / L[n - 1]
        terms.append(t)
        acc.add(t)
        partial.append(acc.value)
    return SeriesSums(tuple(terms), tuple(partial))


def series_tail_bound(profile: SphericalProfile, N: int) -> float | None:
    """Rigorous bound on the series remainder beyond level N, when one is known.

    Infinite for certified divergence; for Poly(gamma > 1) each term is at
    most ``4 (gamma-1)^2 1.5^(2 gamma - 2) / (n+1)^2``.
    """
    rule = profile.rule
    if _ratio_test(profile):
        return math.inf
    if isinstance(rule, Poly) and rule.gamma > 1:
        g = rule.gamma
        return 4.0 * (g - 1.0) ** 2 * 1.5 ** (2.0 * g - 2.0) / (N + 1)
    return None


def _vertex_level_value(flow: Mapping, profile: SphericalProfile) -> dict[VertexPath, float]:
    out: dict[VertexPath, float] = {}
    for key, val in flow.items():
        path = parse_path(key)
        if not profile.is_valid_vertex(path):
            raise NotAFlow(f"flow key {key!r} is not a vertex of the profile")
        out[path] = out.get(path, 0.0) + float(val)
    return out


def validate_flow(profile: SphericalProfile, flow: Mapping, N: int) -> dict[VertexPath, float]:
    """Check a unit flow from the root on levels 0..N; returns it keyed by path."""
    theta = _vertex_level_value(flow, profile)
    if abs(theta.get((), 0.0) - 1.0) > FLOW_TOL:
        raise NotAFlow(f"flow out of the root is {theta.get((), 0.0)!r}, not 1")
    for v, val in theta.items():
        if val < -FLOW_TOL:
            raise NotAFlow(f"negative flow {val!r} at {v!r}")
        if len(v) > N:
            raise NotAFlow(f"flow given at {v!r} beyond level {N}")
    parents = {v[:-1] for v in theta if v} | {v for v, val in theta.items() if len(v) < N and val != 0.0}
    for x in parents:
        children = sum(theta.get(x + (i,), 0.0) for i in range(profile.b(len(x) + 1)))
        if abs(children - theta.get(x, 0.0)) > FLOW_TOL:
            raise NotAFlow(f"conservation fails at {x!r}: {theta.get(x, 0.0)!r} in, {children!r} out")
    return theta


def genseries_summands(profile: SphericalProfile, flow: Mapping, N: int) -> tuple[float, ...]:
    """Per-level sums of theta(x)^2 (1/h(x) - 1/h(parent)) for levels 1..N."""
    L = _L(profile)
    profile.check_level(N)
    theta = validate_flow(profile, flow, N)
    sq = [0.0] * (N + 1)
    for v, val in theta.items():
        sq[len(v)] += val * val
    return tuple(sq[n] * (L[0] / L[n] - L[0] / L[n - 1]) for n in range(1, N + 1))


def equally_splitting_flow(profile: SphericalProfile, N: int) -> dict[str, float]:
    from .network import path_str, tree_vertex_paths

    return {path_str(p): 1.0 / profile.size(len(p)) for p in tree_vertex_paths(profile, N)}


def expected_W(profile: SphericalProfile, n: int) -> float:
    """Mean of the level-n martingale under the ray-plus-percolation law."""
    L = _L(profile)
    return 1.0 + L[0] * series_partial_sums(profile, n).partial[n]


# -- survival of the percolation cluster ---------------------------------------


def survival_curve(profile: SphericalProfile, n: int) -> tuple[float, ...]:
    """``s_0 .. s_n`` where s_k = P(root cluster reaches level k)."""
    return tuple(survival_to_depth(profile, k) for k in range(n + 1))


def survival_to_depth(profile: SphericalProfile, n: int) -> float:
    p = perc_open_probs(profile)
    profile.check_level(n)
    # s_k: probability a level-k vertex's cluster reaches level n
    s = 1.0
    for k in range(n - 1, -1, -1):
        b, q = profile.b(k + 1), p[k + 1] * s
        s = -math.expm1(b * math.log1p(-q)) if q < 1e-4 else 1.0 - (1.0 - q) ** b
    return s


# -- classification --------------------------------------------------------------


class Tolerance(str, enum.Enum):
    CHANGE_INTOLERANT = "ChangeIntolerant"
    INSERTION_TOLERANT = "InsertionTolerant"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ToleranceReport:
    classification: Tolerance
    essentially_deletion_tolerant: bool
    transient: bool
    test: str  # ratio | polynomial | custom | none
    terms: int
    partial_sums: tuple[float, ...]
    last_term: float
    series_tail_bound: float | None
    L0: float
    tail_remainder_bound: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classification"] = self.classification.value
        d["partial_sums"] = list(self.partial_sums)
        return d


def _ratio_test(profile: SphericalProfile) -> bool:
    rule = profile.rule
    g = rule.growth_ratio_liminf
    return bool(rule.unit_resistance and g is not None and 1.0 < g < math.inf)


def _poly_test(profile: SphericalProfile) -> bool:
    rule = profile.rule
    g = rule.poly_exponent
    return bool(rule.unit_resistance and g is not None and g > 1.0)


def classify(profile: SphericalProfile, terms: int = 64) -> ToleranceReport:
    if not is_transient(profile):
        raise RecurrentProfile("classification needs a transient profile")
    L = _L(profile)
    N = min(int(terms), profile.depth)
    series = series_partial_sums(profile, N)
    if _ratio_test(profile):
        verdict, test = Tolerance.CHANGE_INTOLERANT, "ratio"
    elif _poly_test(profile):
        verdict, test = Tolerance.INSERTION_TOLERANT, "polynomial"
    elif profile.rule.series_converges is not None:
        test = "custom"
        verdict = Tolerance.INSERTION_TOLERANT if profile.rule.series_converges else Tolerance.CHANGE_INTOLERANT
    else:
        verdict, test = Tolerance.INCONCLUSIVE, "none"
    edt = verdict is Tolerance.INSERTION_TOLERANT and profile.rule.max_branching is not None
    return ToleranceReport(
        classification=verdict,
        essentially_deletion_tolerant=edt,
        transient=True,
        test=test,
        terms=N,
        partial_sums=series.partial[1:],
        last_term=series.terms[-1] if series.terms else math.nan,
        series_tail_bound=series_tail_bound(profile, N),
        L0=L[0],
        tail_remainder_bound=tail_sums(profile).remainder_bound,
    )
