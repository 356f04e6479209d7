import csv
import io
import json

import jsonschema
import pytest

from wsftol.cli import SCHEMAS, main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def run_json(*argv):
    code, out, err = run(*argv)
    assert code == 0, err
    return json.loads(out)


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_classify(files):
    r = run_json("classify", "--profile", files["binary"])
    jsonschema.validate(r, SCHEMAS["classify"])
    assert r["classification"] == "ChangeIntolerant" and r["transient"]
    assert r["terms"] == 64 and len(r["partial_sums"]) == 64
    r = run_json("classify", "--profile", files["poly2"], "--terms", 10)
    assert r["classification"] == "InsertionTolerant" and r["essentially_deletion_tolerant"] is True
    assert len(r["partial_sums"]) == 10
    code, out, _ = run("classify", "--profile", files["geom3"], "--format", "csv", "--terms", 3)
    assert code == 0 and rows(out)[0] == ["n", "partial_sum"] and len(rows(out)) == 4


@pytest.mark.parametrize("name,code", [("ray", 3), ("poly1", 3), ("explicit", 2), ("bad", 2)])
def test_classify_errors(files, name, code):
    c, out, err = run("classify", "--profile", files[name])
    assert c == code and out == ""
    if name == "ray":
        assert err.startswith("RecurrentProfile")


def test_input_errors(files, tmp_path):
    assert run("classify", "--profile", tmp_path / "missing.json")[0] == 2
    assert run("sample", "wilson", "--graph", files["k3"], "--samples", 5)[0] == 2  # no seed
    assert run("sample", "wilson", "--graph", files["k3"], "--samples", 5, "--seed", -1)[0] == 2
    assert run("sample", "wilson", "--graph", files["k3"], "--samples", 5, "--seed", 2**64)[0] == 2
    assert run("sample", "component", "--profile", files["binary"], "--samples", 5, "--seed", 1)[0] == 2
    assert run("kernel", "--graph", files["k3"], "--condition", "e1")[0] == 2
    assert run("kernel", "--graph", files["k3"], "--condition", "e9=1")[0] == 2
    assert run("bogus")[0] == 2


def test_sample_wilson(files):
    code, out, _ = run("sample", "wilson", "--graph", files["k3"], "--samples", 50, "--seed", 7, "--root", "a")
    assert code == 0
    r = rows(out)
    assert r[0] == ["replica", "e1", "e2", "e3"] and len(r) == 51
    assert all(sum(int(x) for x in row[1:]) == 2 for row in r[1:])


def test_sample_wsf(files):
    code, out, _ = run("sample", "wsf", "--profile", files["binary"], "--depth", 3, "--samples", 20, "--seed", 1)
    assert code == 0
    r = rows(out)
    assert r[0] == ["replica", "depth", "boundary_edges", "t0", "t1", "t2", "t3"]
    assert all(row[3] == "1" for row in r[1:]) and len(r) == 21
    assert run("sample", "wsf", "--profile", files["ray"], "--depth", 3, "--samples", 2, "--seed", 1)[0] == 3


@pytest.mark.parametrize("law", ["perc", "rayperc", "survival"])
def test_sample_component(files, law):
    code, out, _ = run(
        "sample", "component", "--profile", files["binary"], "--depth", 10, "--samples", 1000, "--seed", 1, "--law", law
    )
    assert code == 0
    r = rows(out)
    assert r[0][:4] == ["replica", "depth", "attempts", "size"] and r[0][-1] == "W_depth"
    assert len(r) == 1001 and len(r[1]) == 4 + 11 + 1
    for row in r[1:]:
        counts = [int(x) for x in row[4:-1]]
        assert counts[0] == 1 and sum(counts) == int(row[3])
        if law != "perc":
            assert counts[-1] >= 1


def test_sample_component_deep_profile(files):
    # --depth beyond the file's default materialization
    code, out, _ = run("sample", "component", "--profile", files["binary"], "--depth", 80, "--samples", 3, "--seed", 4)
    assert code == 0 and len(rows(out)[0]) == 4 + 81 + 1


def test_sample_pair(files, tmp_path):
    outp = tmp_path / "pair.csv"
    for status in ("1", "0"):
        code, out, _ = run(
            "sample", "pair", "--profile", files["binary"], "--depth", 3, "--samples", 40, "--seed", 2,
            "--condition", f"e0.1={status}", "--out", outp,
        )
        assert code == 0 and out == ""
        r = rows(outp.read_text())
        assert r[0][:5] == ["replica", "depth", "edge_present", "ray_side", "root_side_top"]
        assert {row[2] for row in r[1:]} == {status}
    assert run("sample", "pair", "--profile", files["binary"], "--depth", 3, "--samples", 4, "--seed", 2)[0] == 2


def test_diagnose(files, tmp_path):
    outp = tmp_path / "traj.csv"
    r = run_json(
        "diagnose", "--profile", files["binary"], "--depth", 10, "--samples", 20000, "--seed", 3, "--out", outp
    )
    jsonschema.validate(r, SCHEMAS["diagnose"])
    assert r["diagnosis"]["verdict"] == "CONSISTENT-WITH-DIVERGENCE"
    assert abs(r["summary"]["expected_W"][10] - 6.0) < 1e-9
    assert abs(r["summary"]["mean"][10] - 6.0) < 0.25
    t = rows(outp.read_text())
    assert t[0] == ["replica_id", "law"] + [f"W_{n}" for n in range(11)] and len(t) == 20001
    r = run_json(
        "diagnose", "--profile", files["poly2"], "--depth", 10, "--samples", 20000, "--seed", 3, "--law", "survival"
    )
    assert r["diagnosis"]["verdict"] == "CONSISTENT-WITH-BOUNDEDNESS"
    assert r["survival_summary"]["law"] == "PercConditionedSurvival"
    r = run_json("diagnose", "--profile", files["binary"], "--depth", 6, "--samples", 200, "--seed", 3, "--law", "perc")
    assert r["diagnosis"] is None and r["summary"]["law"] == "Perc"
    code, _, err = run("diagnose", "--profile", files["binary"], "--depth", 10, "--samples", 10, "--seed", 3)
    assert code == 4 and err.startswith("InsufficientData")


def test_kernel(files):
    r = run_json("kernel", "--graph", files["k3"])
    jsonschema.validate(r, SCHEMAS["kernel"])
    assert r["dimension"] == 2 and all(v == 0.6666666667 for v in r["singletons"].values())
    assert all(p["prob"] == 0.3333333333 for p in r["pairs"])
    r = run_json("kernel", "--graph", files["k3"], "--condition", "e1=1")
    assert r["singletons"]["e2"] == 0.5 and r["dimension"] == 1 and "e1" not in r["edges"]
    r = run_json("kernel", "--graph", files["k3"], "--condition", "e1=0")
    assert r["singletons"]["e2"] == 1.0
    code, out, _ = run("kernel", "--graph", files["k3"], "--format", "csv")
    k = rows(out)
    assert k[0] == ["edge", "e1", "e2", "e3"] and k[1][1] == "0.6666666667"
    code, _, err = run("kernel", "--graph", files["bridge"], "--condition", "e1=0")
    assert code == 5 and err.startswith("DegenerateConditioning")


def test_oracle(files):
    r = run_json("oracle", "--graph", files["k3"])
    jsonschema.validate(r, SCHEMAS["oracle"])
    assert r["count"] == 3 and all(t["prob"] == 0.3333333333 for t in r["trees"])
    assert r["conditionals"]["e1=1"]["e2"] == 0.5
    r = run_json("oracle", "--graph", files["k3w"])
    assert sorted(t["prob"] for t in r["trees"]) == [0.2, 0.4, 0.4]
    assert run_json("oracle", "--graph", files["k6"])["count"] == 1296
    r = run_json("oracle", "--graph", files["bridge"])
    assert r["conditionals"]["e1=0"] is None
    code, _, err = run("oracle", "--graph", files["k8"])
    assert code == 6 and err.startswith("EnumerationTooLarge")


SAMPLING = [
    ("sample", "wilson", "--graph", "k3", "--samples", 200),
    ("sample", "wsf", "--profile", "binary", "--depth", 4, "--samples", 200),
    ("sample", "component", "--profile", "binary", "--depth", 8, "--samples", 300, "--law", "rayperc"),
    ("sample", "component", "--profile", "poly2", "--depth", 8, "--samples", 300, "--law", "survival"),
    ("sample", "pair", "--profile", "binary", "--depth", 3, "--samples", 50, "--condition", "e0=1"),
    ("diagnose", "--profile", "binary", "--depth", 6, "--samples", 200),
]


def resolve(cmd, files):
    return [files.get(a, a) if isinstance(a, str) else a for a in cmd]


@pytest.mark.parametrize("cmd", SAMPLING, ids=lambda c: " ".join(map(str, c[:2])))
def test_determinism(files, cmd, tmp_path):
    def once(seed, name):
        p = tmp_path / name
        code, out, _ = run(*resolve(cmd, files), "--seed", seed, "--out", p)
        assert code == 0
        return p.read_bytes() + out.encode()

    assert once(11, "a") == once(11, "b")
    assert once(11, "a") != once(12, "c")
