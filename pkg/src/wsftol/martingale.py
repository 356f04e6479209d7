"""The Radon-Nikodym martingale W_n = sum over t_n of I(x)/h(x).

Under spherical symmetry I(x)/h(x) depends on the level only, so W_n of a
component is |t_n| * w_n with w_n = L_0 / (|T_n| L_n).  ``w_value`` does the
per-vertex sum; ``w_levels`` gives the closed-form weights used by the
vectorized batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import potential, sampler
from .errors import EnumerationTooLarge, InsufficientData, InvalidParameter, RecurrentProfile
from .network import ComponentSample, SphericalProfile
from .rng import RngSeed, as_seed

LAW_NAMES = {"perc": "Perc", "rayperc": "RayPerc", "survival": "PercConditionedSurvival"}
MIN_REPLICAS = 100
MAX_RN_DEPTH = 4
MAX_LABELED_SUBTREES = 2_000_000
# relative growth of the median (and of expected_W) between the middle and the
# end of the observed window separating "grows" from "plateaus"
GROWTH_THRESHOLD = 0.25


def w_levels(profile: SphericalProfile, depth: int) -> np.ndarray:
    """Per-vertex weights w_n = I/h = L_0/(|T_n| L_n) for n = 0..depth."""
    L = potential._L(profile)
    profile.check_level(depth)
    return np.array([L[0] / (profile.size(n) * L[n]) for n in range(depth + 1)])


def w_value(sample: ComponentSample, profile: SphericalProfile, n: int) -> float:
    """W_n(t) summed vertex by vertex from path products of 1/b_k and p_k."""
    if not potential.is_transient(profile):
        raise RecurrentProfile("W_n needs a transient profile")
    if not (0 <= n <= sample.depth):
        raise InvalidParameter(f"level {n} outside the sample depth {sample.depth}")
    p = potential.perc_open_probs(profile)
    total = 0.0
    for x in sample.level_sets[n]:
        ratio = 1.0
        for k in range(1, len(x) + 1):
            ratio /= profile.b(k) * p[k]
        total += ratio
    return total


def w_closed(level_count: int, profile: SphericalProfile, n: int) -> float:
    return level_count * float(w_levels(profile, n)[n])


# -- exact check of the Radon-Nikodym identity ------------------------------------------


@dataclass(frozen=True)
class RnCheck:
    depth: int
    error: float  # max |RayPerc([t]) - W(t) Perc([t])| over labeled subtrees
    martingale_error: float  # max |E_Perc[W_{n+1} | F_n] - W_n|
    perc_mass: float  # total Perc mass of all subtrees (should be 1)
    rayperc_mass: float
    labeled_subtrees: int
    count_classes: int
    exact: bool


def _is_dyadic(x: float, bits: int = 30) -> bool:
    return Fraction(x).denominator <= 1 << bits


def rn_identity_check(profile: SphericalProfile, depth: int) -> RnCheck:
    """Enumerate all rooted subtrees of levels 0..depth and test dRayPerc = W dPerc.

    Labeled subtrees sharing the same level counts have equal Perc and
    RayPerc weight by symmetry, so the enumeration runs over count vectors
    weighted by the number of labeled subtrees in each.  RayPerc([t]) is
    built directly from the sampler's description: the ray picks a child
    uniformly at each level and must end in t_depth, every other edge from
    t to its children is an independent coin.
    """
    L = potential._L(profile)
    if not (0 <= depth <= MAX_RN_DEPTH):
        raise InvalidParameter(f"depth must lie in [0, {MAX_RN_DEPTH}]")
    profile.check_level(depth)
    p_float = potential.perc_open_probs(profile)
    exact = all(_is_dyadic(p_float[n]) and _is_dyadic(L[n]) for n in range(1, depth + 1)) and _is_dyadic(L[0])
    num = Fraction if exact else float
    p = [None] + [num(p_float[n]) for n in range(1, depth + 1)]
    w = [num(L[0]) / (profile.size(n) * num(L[n])) for n in range(depth + 1)]
    b = [None] + [profile.b(n) for n in range(1, depth + 1)]

    labeled = 1
    classes = [((1,), 1)]  # (level counts, number of labeled subtrees)
    for n in range(1, depth + 1):
        nxt = []
        for counts, mult in classes:
            slots = b[n] * counts[-1]
            for c in range(slots + 1):
                nxt.append((counts + (c,), mult * math.comb(slots, c)))
        classes = nxt
        labeled = sum(m for _, m in classes)
        if labeled > MAX_LABELED_SUBTREES:
            raise EnumerationTooLarge(f"{labeled} rooted subtrees at depth {n} exceed {MAX_LABELED_SUBTREES}")

    def perc_weight(counts):
        out = num(1)
        for n in range(1, len(counts)):
            slots = b[n] * counts[n - 1]
            out *= p[n] ** counts[n] * (1 - p[n]) ** (slots - counts[n])
        return out

    def rayperc_weight(counts):
        # sum over the ray's end x in t_depth: P(ray = path to x) times the
        # coins on all edges from t to its children except the path edges
        d = len(counts) - 1
        if counts[d] == 0:
            return num(0)
        out = num(counts[d])
        for n in range(1, d + 1):
            slots = b[n] * counts[n - 1]
            out *= num(1) / b[n] * p[n] ** (counts[n] - 1) * (1 - p[n]) ** (slots - counts[n])
        return out

    err = num(0)
    perc_mass = num(0)
    ray_mass = num(0)
    for counts, mult in classes:
        pw, rw = perc_weight(counts), rayperc_weight(counts)
        perc_mass += mult * pw
        ray_mass += mult * rw
        err = max(err, abs(rw - counts[-1] * w[depth] * pw))

    # martingale property: exact Binomial(b_{n+1} |t_n|, p_{n+1}) extension sums
    mart = num(0)
    for n in range(depth):
        for size in range(profile.size(n) + 1):
            slots = b[n + 1] * size
            cond = sum(
                (math.comb(slots, k) * p[n + 1] ** k * (1 - p[n + 1]) ** (slots - k) * k * w[n + 1] for k in range(slots + 1)),
                num(0),
            )
            mart = max(mart, abs(cond - size * w[n]))
    return RnCheck(depth, float(err), float(mart), float(perc_mass), float(ray_mass), labeled, len(classes), exact)


# -- Monte Carlo trajectories ----------------------------------------------------------


@dataclass(frozen=True)
class WTrajectory:
    law: str
    values: tuple[float, ...]
    attempts: int = 1


@dataclass
class TrajectoryBatch:
    """W_0..W_depth for many replicas; row i is replica ``seed.child(i)``."""

    law: str
    W: np.ndarray
    counts: np.ndarray
    attempts: np.ndarray
    profile: SphericalProfile = field(repr=False)

    def __len__(self):
        return self.W.shape[0]

    def __getitem__(self, i) -> WTrajectory:
        return WTrajectory(self.law, tuple(float(x) for x in self.W[i]), int(self.attempts[i]))

    @property
    def depth(self) -> int:
        return self.W.shape[1] - 1

    def summary(self) -> dict:
        W = self.W
        q = np.quantile(W, [0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9], axis=0)
        R = len(self)
        return {
            "law": self.law,
            "replicas": R,
            "depth": self.depth,
            "mean": W.mean(axis=0).tolist(),
            "stderr": (W.std(axis=0, ddof=1) / math.sqrt(R)).tolist() if R > 1 else [0.0] * (self.depth + 1),
            "median": q[4].tolist(),
            "quantiles": {k: row.tolist() for k, row in zip(("q01", "q05", "q10", "q25", "q50", "q75", "q90"), q)},
            "expected_W": expected_curve(self.profile, self.depth, self.law),
            "mean_attempts": float(self.attempts.mean()),
        }


def expected_curve(profile: SphericalProfile, depth: int, law: str = "rayperc") -> list[float]:
    if law == "Perc":
        return [1.0] * (depth + 1)
    return [potential.expected_W(profile, n) for n in range(depth + 1)]


def trajectory_batch(
    profile: SphericalProfile, depth: int, replicas: int, law: str, seed: RngSeed | int
) -> TrajectoryBatch:
    law = law.lower()
    if law not in LAW_NAMES:
        raise InvalidParameter(f"law must be one of {tuple(LAW_NAMES)}, got {law!r}")
    counts, attempts = sampler.level_counts_batch(profile, depth, replicas, law, as_seed(seed))
    W = counts * w_levels(profile, depth)
    return TrajectoryBatch(LAW_NAMES[law], W, counts, attempts, profile)


# -- growth versus boundedness --------------------------------------------------------


@dataclass(frozen=True)
class Diagnosis:
    verdict: str
    heuristic: bool
    window: tuple[int, int]
    median_slope: float
    median_growth: float
    expected_growth: float
    median: tuple[float, ...]
    expected_W: tuple[float, ...]
    classification: str
    survival_lower_quantiles: dict | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "heuristic": self.heuristic,
            "window": list(self.window),
            "median_slope": self.median_slope,
            "median_growth": self.median_growth,
            "expected_growth": self.expected_growth,
            "median": list(self.median),
            "expected_W": list(self.expected_W),
            "classification": self.classification,
            "survival_lower_quantiles": self.survival_lower_quantiles,
        }


def tolerance_diagnosis(
    trajectories: TrajectoryBatch, profile: SphericalProfile, survival: TrajectoryBatch | None = None
) -> Diagnosis:
    """Heuristic growth test on the median of W_n over the second half of the window.

    CONSISTENT-WITH-DIVERGENCE when the median and the expected_W reference
    curve both grow by at least ``GROWTH_THRESHOLD`` relative to their value
    at the middle of the window; CONSISTENT-WITH-BOUNDEDNESS when neither
    does; INCONCLUSIVE otherwise.  Finite samples never prove either.
    """
    if len(trajectories) < MIN_REPLICAS:
        raise InsufficientData(f"{len(trajectories)} replicas; at least {MIN_REPLICAS} required")
    if trajectories.law != "RayPerc":
        raise InvalidParameter("diagnosis needs RayPerc trajectories")
    depth = trajectories.depth
    if depth < 4:
        raise InsufficientData("diagnosis needs depth >= 4")
    lo = depth // 2
    med = np.median(trajectories.W, axis=0)
    ew = np.array(expected_curve(profile, depth))
    levels = np.arange(lo, depth + 1)
    slope = float(np.polyfit(levels, med[lo:], 1)[0])
    growth = slope * (depth - lo) / max(med[lo], 1e-300)
    e_growth = float((ew[depth] - ew[lo]) / ew[lo])
    if growth >= GROWTH_THRESHOLD and e_growth >= GROWTH_THRESHOLD:
        verdict = "CONSISTENT-WITH-DIVERGENCE"
    elif growth < GROWTH_THRESHOLD and e_growth < GROWTH_THRESHOLD:
        verdict = "CONSISTENT-WITH-BOUNDEDNESS"
    else:
        verdict = "INCONCLUSIVE"
    lower = None
    if survival is not None:
        last = survival.W[:, -1]
        lower = {
            "q01": float(np.quantile(last, 0.01)),
            "q05": float(np.quantile(last, 0.05)),
            "q10": float(np.quantile(last, 0.10)),
            "fraction_zero": float(np.mean(last == 0)),
        }
    return Diagnosis(
        verdict,
        True,
        (lo, depth),
        slope,
        float(growth),
        e_growth,
        tuple(float(x) for x in med),
        tuple(float(x) for x in ew),
        potential.classify(profile).classification.value,
        lower,
    )
