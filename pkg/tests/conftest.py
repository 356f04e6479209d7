import itertools

import pytest

from wsftol.network import Binary, Geometric, Poly, build_finite_network, build_profile


def make_net(vertices, edges):
    """edges: (u, v, c) triples, oriented u -> v."""
    return build_finite_network(
        {"vertices": list(vertices), "edges": [{"u": u, "v": v, "c": c, "orientation": "forward"} for u, v, c in edges]}
    )


@pytest.fixture(scope="session")
def binary():
    return build_profile(Binary(), 64)


@pytest.fixture(scope="session")
def geom3():
    return build_profile(Geometric(3), 64)


@pytest.fixture(scope="session")
def poly2():
    return build_profile(Poly(2), 64)


@pytest.fixture(scope="session")
def triangle():
    return make_net("abc", [("a", "b", 1), ("b", "c", 1), ("c", "a", 1)])


@pytest.fixture(scope="session")
def wtriangle():
    return make_net("abc", [("a", "b", 2), ("b", "c", 1), ("c", "a", 1)])


@pytest.fixture(scope="session")
def square():
    return make_net("abcd", [("a", "b", 1), ("b", "c", 1), ("c", "d", 1), ("d", "a", 1)])


@pytest.fixture(scope="session")
def k4():
    return make_net("abcd", [(u, v, 1) for u, v in itertools.combinations("abcd", 2)])


@pytest.fixture(scope="session")
def bridge():
    return make_net("ab", [("a", "b", 1)])


@pytest.fixture(scope="session")
def files(tmp_path_factory):
    """Graph and profile files for CLI runs, keyed by short name."""
    import json

    d = tmp_path_factory.mktemp("inputs")
    data = {
        "k3": {"vertices": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"], ["c", "a"]]},
        "k3w": {"vertices": ["a", "b", "c"], "edges": [["a", "b", 2], ["b", "c", 1], ["c", "a", 1]]},
        "bridge": {"vertices": ["a", "b"], "edges": [["a", "b"]]},
        "k6": {"vertices": list("abcdef"), "edges": [[u, v] for u, v in itertools.combinations("abcdef", 2)]},
        "k8": {"vertices": list("abcdefgh"), "edges": [[u, v] for u, v in itertools.combinations("abcdefgh", 2)]},
        "binary": {"rule": "binary"},
        "geom3": {"rule": "geometric", "b": 3},
        "poly2": {"rule": "poly", "gamma": 2},
        "poly1": {"rule": "poly", "gamma": 1},
        "ray": {"rule": "geometric", "b": 1},
        "explicit": {"rule": "explicit", "branching": [2, 2, 2], "resistance": [1, 1, 1]},
    }
    out = {}
    for name, obj in data.items():
        p = d / f"{name}.json"
        p.write_text(json.dumps(obj))
        out[name] = str(p)
    bad = d / "bad.json"
    bad.write_text("{not json")
    out["bad"] = str(bad)
    return out


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
