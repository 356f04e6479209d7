"""Command-line interface.

    wsftol classify --profile P [--terms N] [--depth N]
    wsftol sample wilson --graph G --samples N --seed S [--root V]
    wsftol sample wsf --profile P --depth N --samples N --seed S
    wsftol sample component --profile P --depth N --samples N --seed S [--law L]
    wsftol sample pair --profile P --depth N --samples N --seed S --condition EDGE=0|1
    wsftol diagnose --profile P --depth N --samples N --seed S [--law L]
    wsftol kernel --graph G [--condition EDGE=0|1]
    wsftol oracle --graph G

JSON goes to stdout; CSV goes to --out when given, otherwise to stdout
(``--format`` picks which one stdout carries for commands producing both).
Exit codes: 0 ok, 2 input, 3 recurrence, 4 sampler/diagnostic, 5 degenerate
conditioning, 6 enumeration budget.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys

import jsonschema
import numpy as np

from . import detkernel, martingale, potential, sampler
from .errors import InsufficientData, InvalidParameter, WsfError
from .network import load_network, load_profile, parse_path
from .rng import MASK64, RngSeed

_NUM = {"type": ["number", "null"]}
_NUMS = {"type": "array", "items": _NUM}

SCHEMAS = {
    "classify": {
        "type": "object",
        "required": ["classification", "essentially_deletion_tolerant", "transient", "test", "terms", "partial_sums", "L0"],
        "properties": {
            "classification": {"enum": [t.value for t in potential.Tolerance]},
            "essentially_deletion_tolerant": {"type": "boolean"},
            "transient": {"type": "boolean"},
            "test": {"enum": ["ratio", "polynomial", "custom", "none"]},
            "terms": {"type": "integer", "minimum": 0},
            "partial_sums": _NUMS,
            "last_term": _NUM,
            "series_tail_bound": _NUM,
            "L0": _NUM,
            "tail_remainder_bound": _NUM,
        },
    },
    "diagnose": {
        "type": "object",
        "required": ["profile", "summary", "diagnosis"],
        "properties": {
            "summary": {
                "type": "object",
                "required": ["law", "replicas", "depth", "mean", "median", "expected_W"],
                "properties": {"mean": _NUMS, "median": _NUMS, "expected_W": _NUMS},
            },
            "survival_summary": {"type": ["object", "null"]},
            "diagnosis": {
                "type": ["object", "null"],
                "properties": {"verdict": {"enum": ["CONSISTENT-WITH-DIVERGENCE", "CONSISTENT-WITH-BOUNDEDNESS", "INCONCLUSIVE"]}},
            },
        },
    },
    "kernel": {
        "type": "object",
        "required": ["edges", "tag", "dimension", "singletons", "pairs"],
        "properties": {
            "edges": {"type": "array", "items": {"type": "string"}},
            "condition": {"type": ["object", "null"]},
            "dimension": {"type": "integer"},
            "singletons": {"type": "object", "additionalProperties": _NUM},
            "pairs": {"type": "array", "items": {"type": "object", "required": ["edges", "prob"]}},
        },
    },
    "oracle": {
        "type": "object",
        "required": ["edges", "count", "trees", "singletons", "pairs", "conditionals"],
        "properties": {
            "count": {"type": "integer"},
            "trees": {
                "type": "array",
                "items": {"type": "object", "required": ["edges", "weight", "prob"]},
            },
            "singletons": {"type": "object", "additionalProperties": _NUM},
        },
    },
}


def fmt(x) -> str:
    return f"{x:.10g}"


def _clean(obj):
    """Round floats to 10 significant digits; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else None
    return obj


def emit_json(obj, schema: str, stream) -> None:
    data = _clean(obj)
    jsonschema.validate(data, SCHEMAS[schema])
    stream.write(json.dumps(data, indent=2) + "\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _write_csv(args, header, rows, stdout) -> None:
    text = _csv_text(header, rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def _seed(s: str) -> int:
    try:
        v = int(s, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {s!r}") from None
    if not 0 <= v <= MASK64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {s!r}")
    return v


def _count(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {s!r}")
    return v


def _condition(s: str) -> tuple[str, bool]:
    edge, sep, status = s.rpartition("=")
    if not sep or not edge or status not in ("0", "1"):
        raise argparse.ArgumentTypeError(f"condition must look like EDGE=0 or EDGE=1, got {s!r}")
    return edge, status == "1"


def _profile_to_depth(args):
    """Profile materialized at least to --depth (which sampling commands require)."""
    if args.depth is None:
        raise InvalidParameter("--depth is required")
    profile = load_profile(args.profile)
    if args.depth > profile.depth:
        profile = load_profile(args.profile, args.depth)
    return profile, args.depth


# -- commands ---------------------------------------------------------------


def cmd_classify(args, stdout):
    profile = load_profile(args.profile, args.depth)
    report = potential.classify(profile, terms=args.terms)
    if args.format == "csv":
        rows = [(n + 1, s) for n, s in enumerate(report.partial_sums)]
        _write_csv(args, ["n", "partial_sum"], rows, stdout)
    else:
        emit_json(report.to_dict(), "classify", stdout)


def cmd_sample_wilson(args, stdout):
    net = load_network(args.graph)
    root = args.root if args.root is not None else net.vertices[0]
    configs = sampler.wilson_batch(net, root, RngSeed(args.seed), args.samples)
    ids = net.edge_ids
    rows = ([i] + [int(e in c.present) for e in ids] for i, c in enumerate(configs))
    _write_csv(args, ["replica"] + list(ids), rows, stdout)


def cmd_sample_wsf(args, stdout):
    profile, depth = _profile_to_depth(args)
    forests = sampler.wsf_truncated_batch(profile, depth, RngSeed(args.seed), args.samples)
    rows = []
    for i, f in enumerate(forests):
        counts = f.root_component().level_counts
        rows.append([i, depth, len(f.boundary_edges)] + list(counts))
    header = ["replica", "depth", "boundary_edges"] + [f"t{n}" for n in range(depth + 1)]
    _write_csv(args, header, rows, stdout)


def cmd_sample_component(args, stdout):
    profile, depth = _profile_to_depth(args)
    counts, attempts = sampler.level_counts_batch(profile, depth, args.samples, args.law, RngSeed(args.seed))
    w = martingale.w_levels(profile, depth)
    rows = ([i, depth, int(attempts[i]), int(c.sum())] + c.tolist() + [float(c[-1] * w[-1])] for i, c in enumerate(counts))
    header = ["replica", "depth", "attempts", "size"] + [f"t{n}" for n in range(depth + 1)] + ["W_depth"]
    _write_csv(args, header, rows, stdout)


def cmd_sample_pair(args, stdout):
    profile, depth = _profile_to_depth(args)
    if args.condition is None:
        raise InvalidParameter("sample pair needs --condition EDGE=0|1")
    edge, present = args.condition
    x = parse_path(edge[1:] if edge.startswith("e") else edge)
    base = RngSeed(args.seed)
    rows = []
    for i in range(args.samples):
        pair = sampler.conditioned_pair_sample(profile, len(x), present, depth, base.child(i), x=x)
        rows.append(
            [i, depth, int(pair.edge_present), pair.ray_side, len(pair.root_side.root)]
            + list(pair.child_side.level_counts)
            + list(pair.root_side.level_counts)
        )
    header = (
        ["replica", "depth", "edge_present", "ray_side", "root_side_top"]
        + [f"child_t{n}" for n in range(depth + 1)]
        + [f"root_t{n}" for n in range(depth + 1)]
    )
    _write_csv(args, header, rows, stdout)


def cmd_diagnose(args, stdout):
    profile, depth = _profile_to_depth(args)
    base = RngSeed(args.seed)
    law = args.law
    main_law = "perc" if law == "perc" else "rayperc"
    if args.samples < martingale.MIN_REPLICAS:
        raise InsufficientData(f"{args.samples} replicas; at least {martingale.MIN_REPLICAS} required")
    batch = martingale.trajectory_batch(profile, depth, args.samples, main_law, base.child(0))
    surv = martingale.trajectory_batch(profile, depth, args.samples, "survival", base.child(1)) if law == "survival" else None
    diag = martingale.tolerance_diagnosis(batch, profile, surv).to_dict() if main_law == "rayperc" else None
    report = {
        "profile": profile.to_dict(),
        "summary": batch.summary(),
        "survival_summary": surv.summary() if surv is not None else None,
        "diagnosis": diag,
    }
    if args.out:
        rows = []
        for b in (batch, surv):
            if b is None:
                continue
            rows.extend([i, b.law] + [float(x) for x in b.W[i]] for i in range(len(b)))
        _write_csv(args, ["replica_id", "law"] + [f"W_{n}" for n in range(depth + 1)], rows, stdout)
    emit_json(report, "diagnose", stdout)


def cmd_kernel(args, stdout):
    net = load_network(args.graph)
    if args.condition is None:
        kernel = detkernel.transfer_kernel(net, "wsf")
        dim = int(round(np.trace(kernel.K)))
        cond = None
    else:
        edge, present = args.condition
        basis = detkernel.condition_edge(net, edge, present)
        kernel = detkernel.kernel_from_basis(basis)
        dim = basis.dim
        cond = {"edge": edge, "present": present}
    edges = kernel.edges
    report = {
        "edges": list(edges),
        "tag": kernel.tag,
        "condition": cond,
        "dimension": dim,
        "singletons": {e: detkernel.inclusion_prob(kernel, [e]) for e in edges},
        "pairs": [{"edges": [a, b], "prob": detkernel.inclusion_prob(kernel, [a, b])} for a, b in itertools.combinations(edges, 2)],
        "kernel": kernel.K.tolist(),
    }
    rows = ([e] + [float(v) for v in kernel.K[i]] for i, e in enumerate(edges))
    if args.format == "csv":
        _write_csv(args, ["edge"] + list(edges), rows, stdout)
        return
    if args.out:
        _write_csv(args, ["edge"] + list(edges), rows, stdout)
    emit_json(report, "kernel", stdout)


def cmd_oracle(args, stdout):
    net = load_network(args.graph)
    dist = detkernel.enumerate_spanning_trees(net)
    conditionals = {}
    for e in dist.edges:
        for present in (True, False):
            try:
                conditionals[f"{e}={int(present)}"] = dist.conditional(e, present)
            except WsfError:
                conditionals[f"{e}={int(present)}"] = None
    report = {
        "edges": list(dist.edges),
        "count": len(dist.trees),
        "trees": [
            {"edges": sorted(t, key=dist.edges.index), "weight": w, "prob": p}
            for t, w, p in zip(dist.trees, dist.weights, dist.probs)
        ],
        "singletons": dist.singles(),
        "pairs": [{"edges": list(k), "prob": v} for k, v in dist.pairs().items()],
        "conditionals": conditionals,
    }
    emit_json(report, "oracle", stdout)


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsftol",
        description="Wired spanning forests on spherically symmetric trees: tolerance, sampling, kernels.",
        epilog="Exit codes: 0 ok, 2 input, 3 recurrence, 4 sampler/diagnostic, 5 degenerate conditioning, 6 enumeration budget.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=False, profile=False, seed=False, law=False, condition=False):
        if graph:
            p.add_argument("--graph", required=True, metavar="PATH")
        if profile:
            p.add_argument("--profile", required=True, metavar="PATH")
            p.add_argument("--depth", type=_count, metavar="N")
        if seed:
            p.add_argument("--samples", type=_count, required=True, metavar="N")
            p.add_argument("--seed", type=_seed, required=True, metavar="U64")
        if law:
            p.add_argument("--law", choices=sampler.LAWS, default="rayperc")
        if condition:
            p.add_argument("--condition", type=_condition, metavar="EDGE=0|1")
        p.add_argument("--out", metavar="PATH")
        p.add_argument("--format", choices=("csv", "json"))

    p = sub.add_parser("classify", help="tolerance classification of a profile")
    common(p, profile=True)
    p.add_argument("--terms", type=_count, default=64, metavar="N")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sample", help="seeded sample batches (CSV)")
    ssub = p.add_subparsers(dest="kind", required=True)
    q = ssub.add_parser("wilson")
    common(q, graph=True, seed=True)
    q.add_argument("--root", metavar="VERTEX")
    q.set_defaults(func=cmd_sample_wilson)
    q = ssub.add_parser("wsf")
    common(q, profile=True, seed=True)
    q.set_defaults(func=cmd_sample_wsf)
    q = ssub.add_parser("component")
    common(q, profile=True, seed=True, law=True)
    q.set_defaults(func=cmd_sample_component)
    q = ssub.add_parser("pair")
    common(q, profile=True, seed=True, condition=True)
    q.set_defaults(func=cmd_sample_pair)

    p = sub.add_parser("diagnose", help="W_n trajectories and growth diagnosis")
    common(p, profile=True, seed=True, law=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("kernel", help="transfer-current kernel and inclusion probabilities")
    common(p, graph=True, condition=True)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("oracle", help="exact spanning-tree enumeration")
    common(p, graph=True)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, stdout)
    except WsfError as exc:
        stderr.write(f"{type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        stderr.write(f"InputError: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
