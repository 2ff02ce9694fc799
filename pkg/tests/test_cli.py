import json
import subprocess
import sys

import numpy as np
import pytest

from conjugate import mobius_algebra as MA
from conjugate.cli import dumps, read_matrix_blocks, run


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_invariants_x1x2x3():
    code, out = run(["invariants", "--f", "x1*x2*x3", "--point", "1,1,1"])
    assert code == 0
    rec = records(out)[0]
    assert rec["X"] == pytest.approx(6.0, rel=1e-14)
    assert set("JZXYRSVABDTUFGKMNW") <= set(rec)


def test_invariants_spherical_log():
    code, out = run(["invariants", "--gallery", "spherical-log", "--point", "1,0,0"])
    rec = records(out)[0]
    assert code == 0 and abs(rec["X"]) < 1e-14 and abs(rec["Y"]) < 1e-14


def test_parse_error_exit():
    assert run(["invariants", "--f", "x1*+", "--point", "1,1,1"])[0] == 2


def test_domain_error_exit():
    assert run(["invariants", "--f", "log(x1)", "--point", "0,1,1"])[0] == 3


def test_usage_errors():
    assert run(["invariants", "--point", "1,1,1"])[0] == 2
    assert run(["invariants", "--f", "x1", "--gallery", "hopf", "--point", "1,1,1"])[0] == 2
    assert run(["invariants", "--gallery", "nope", "--point", "1,1,1"])[0] == 2
    assert run(["invariants", "--f", "x1", "--point", "1,1"])[0] == 2
    assert run(["invariants", "--f", "x1", "--grid", "0:1:10000"])[0] == 2


def test_negative_point():
    code, out = run(["invariants", "--f", "x1", "--point=-1,2,-3"])
    assert code == 0 and records(out)[0]["point"] == [-1, 2, -3]


def test_classify_hopf_grid():
    code, out = run(["classify", "--gallery", "hopf", "--grid", "0.3:0.9:5"])
    recs = records(out)
    assert code == 0 and len(recs) == 125
    assert all(r["verdict"] in ("Admits", "AdmitsOnBranch") for r in recs)


def test_classify_x1x2x3_grid():
    code, out = run(["classify", "--f", "x1*x2*x3", "--grid", "0.3:0.9:3"])
    assert code == 0 and all(r["class"] == "NoneReal" for r in records(out))


def test_classify_r_squared():
    code, out = run(["classify", "--gallery", "cylindrical-r2", "--grid", "0.3:0.9:3"])
    assert code == 0 and all(r["verdict"] == "Rejects" for r in records(out))


def test_directions():
    code, out = run(["directions", "--f", "x1^2-x2^2-x3^2", "--point", "1,1,0"])
    rec = records(out)[0]
    assert rec["class"] == "TwoDistinct"
    assert np.allclose(rec["omegas"][0], [2, 2, 0], atol=1e-12)


def test_reconstruct_cylindrical():
    code, out = run(["reconstruct", "--gallery", "cylindrical", "--grid", "0:1:5", "--grid", "0.5:1.5:5",
                     "--grid", "0.5:1.5:5"])
    assert code == 0
    rec = records(out)[0]
    assert len(rec["g"]) == 125
    st = rec["stats"]
    assert st["reference_max_error"] < 1e-6
    assert st["loop_check"]["degenerate_loop"] == 0
    assert st["loop_check"]["square_loop_relative"] < 1e-7


def test_reconstruct_non_integrable():
    assert run(["reconstruct", "--f", "x1*x2*x3", "--grid", "0.3:0.9:3"])[0] == 4


def test_reconstruct_csv(capsys):
    code, out = run(["reconstruct", "--gallery", "log-arccos", "--grid", "0.2:0.6:3", "--format", "csv"])
    lines = out.splitlines()
    assert code == 0 and lines[0] == "x1,x2,x3,g" and len(lines) == 28
    stats = json.loads(capsys.readouterr().err)
    assert stats["reference_max_error"] < 1e-6


def test_verify_pair():
    code, out = run(["verify-pair", "--gallery", "hopf"])
    assert code == 0 and records(out)[0]["pass"]
    code, out = run(["verify-pair", "--f", "x1", "--g", "x1", "--point", "1,2,3"])
    assert code == 0 and not records(out)[0]["pass"]


def test_relations():
    code, out = run(["relations", "--gallery", "hopf", "--eps", "0.3", "--eps", "2"])
    recs = records(out)
    assert code == 0 and len(recs) == 2
    for r in recs:
        assert max(v for k, v in r.items() if k not in ("eps",) and isinstance(v, float)) < 1e-8


def test_canon(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("0 0 1\n0 1 0\n1 0 0\n\n0 0 0\n0 0 2\n0 -2 0\n")
    code, out = run(["canon", "--matrix", str(path)])
    rec = records(out)[0]
    assert code == 0 and rec["case"] == "Nilpotent"
    assert np.allclose(rec["A"], np.eye(3), atol=1e-10)
    path.write_text("0 0 1\n0 1 0\n1 0 0\n\n0 0 0\n0 0 0\n0 0 0\n")
    rec = records(run(["canon", "--matrix", str(path)])[1])[0]
    assert rec["case"] == "RealPair" and rec["params"] == [0.0]


def test_canon_random_round_trip(tmp_path):
    p = MA.random_instance(np.random.default_rng(0), 5, "FirstType", (1.3, 0.4))
    text = "\n".join(" ".join("%.17g" % v for v in row) for row in p.H) + "\n\n" + \
        "\n".join(" ".join("%.17g" % v for v in row) for row in p.N) + "\n"
    path = tmp_path / "m.txt"
    path.write_text(text)
    rec = records(run(["canon", "--matrix", str(path)])[1])[0]
    assert rec["case"] == "FirstType" and np.allclose(rec["params"], [1.3, 0.4], atol=1e-6)


def test_canon_bad_matrix(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 0 0\n0 1 0\n0 0 1\n\n0 0 0\n0 0 0\n0 0 0\n")
    assert run(["canon", "--matrix", str(path)])[0] == 5
    path.write_text("0 0 1\n0 1 0\n1 0 0\n\n0 1 0\n1 0 0\n0 0 0\n")
    assert run(["canon", "--matrix", str(path)])[0] == 5


def test_read_matrix_blocks():
    H, N = read_matrix_blocks("1 0 0\n0 1 0\n0 0 -1\n\n0 1 0\n-1 0 0\n0 0 0\n")
    assert H.shape == N.shape == (3, 3)


def test_classify_xyzero():
    for f, model in (("atan2(x3,x2)", "AzimuthalAngle"), ("x1/(x1^2+x2^2+x3^2)", "InvertedLinear")):
        code, out = run(["classify-xyzero", "--f", f])
        assert code == 0 and records(out)[0]["model"] == model
    assert run(["classify-xyzero", "--f", "x1*x2*x3"])[0] == 3


def test_weights():
    code, out = run(["weights"])
    recs = {r["invariant"]: r for r in records(out)}
    assert recs["X"]["weight"] == -6 and recs["V"]["odd"] is True
    code, out = run(["weights", "--f", "x1*x2*x3+x1^2", "--maps", "5"])
    assert code == 0 and all(r["max_weight_residual"] < 1e-6 for r in records(out))


def test_selftest_subset():
    code, out = run(["selftest", "--suite", "appendixB", "--scale", "0.2"])
    rep = records(out)[0]
    assert code == 0 and list(rep["suites"]) == ["appendixB"]


def test_selftest_fault():
    code, out = run(["selftest", "--suite", "oracle", "--inject-fault", "--scale", "0.2"])
    assert code == 1 and not records(out)[0]["pass"]


def test_json_format_and_determinism():
    argv = ["verify-pair", "--gallery", "hopf", "--samples", "3", "--seed", "7"]
    a, b = run(argv)[1], run(argv)[1]
    assert a != run(argv[:-1] + ["8"])[1]
    assert a == b
    line = a.splitlines()[0]
    keys = list(json.loads(line))
    assert keys == sorted(keys)
    x = 0.1 + 0.2
    assert float(json.loads(dumps({"v": x}))["v"]) == x
    assert dumps({"b": float("nan"), "a": [1.0, float("inf")]}) == '{"a": [1, null], "b": null}'


def test_csv_format():
    code, out = run(["invariants", "--f", "x1", "--point", "1,2,3", "--format", "csv"])
    lines = out.splitlines()
    head = lines[0].split(",")
    assert code == 0 and head[:4] == ["J", "Z", "X", "Y"] and "point[2]" in head
    assert dict(zip(head, lines[1].split(",")))["J"] == "1"


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "conjugate", "invariants", "--f", "x1", "--point", "1,1,1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["J"] == 1
