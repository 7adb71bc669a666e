import json

import pytest

from collatz_bounds.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_table1(capsys):
    code, out = run(capsys, "table1", "--k-range", "2..4")
    assert code == 0
    assert out == "k,depth,literals\n2,3,8\n3,10,84\n4,41,12829\n"


def test_build_system_emit(tmp_path, capsys):
    path = tmp_path / "sys.txt"
    assert main(["build-system", "--k", "2", "--emit", str(path)]) == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "# k=2 base"
    assert lines[2] == "(p 5 0 0 (p 2 -2 0))"


def test_eliminate_stats(capsys):
    code, out = run(capsys, "eliminate", "--k", "3", "--order", "dfs", "--stats")
    assert code == 0
    assert out.splitlines() == ["k,class,depth,literals", "3,8,1,4", "3,17,4,28", "3,26,10,84"]


def test_eliminate_emit_round_trip(tmp_path):
    from collatz_bounds.trees import parse_system

    path = tmp_path / "el.txt"
    assert main(["eliminate", "--k", "2", "--emit", str(path)]) == 0
    system = parse_system(path.read_text())
    assert system.eliminated and system.k == 2


def test_eliminate_huge_needs_flag():
    with pytest.raises(SystemExit) as exc:
        main(["eliminate", "--k", "5"])
    assert exc.value.code == 2


def test_eliminate_huge_streams(capsys):
    code, out = run(capsys, "eliminate", "--k", "5", "--allow-huge", "--node-cap", "2000")
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "k,class,depth,literals,complete"
    assert len(rows) == 1 + 27
    assert "5,8,1,4,1" in rows
    assert any(r.endswith(",0") for r in rows)


def test_build_lp(capsys):
    code, out = run(capsys, "build-lp", "--k", "2", "--family", "el")
    assert code == 0
    assert "(a[8.1], -1, 1) <= (c[8], -3, 1) + (a[8.2], -3, 2)" in out
    code, out = run(capsys, "build-lp", "--k", "2")
    assert "(c[5], 0, 0) <= (c[2], -2, 0)" in out


def test_search_verify_pipeline(tmp_path, capsys):
    cert = tmp_path / "k2.json"
    code, out = run(capsys, "search-lambda", "--k", "2", "--tol", "1e-6", "--emit", str(cert))
    assert code == 0
    assert out.splitlines()[1].startswith("2,1.35339")
    doc = json.loads(cert.read_text())
    assert doc["family"] == "nt" and doc["status"] == "verified"
    assert run(capsys, "verify", "--cert", str(cert))[0] == 0
    code, out = run(capsys, "verify", "--cert", str(cert), "--family", "el")
    assert code == 0 and out.startswith("verified family=el")
    code, out = run(capsys, "verify-bound", "--a", "5", "--cert", str(cert), "--ymax", "15")
    assert code == 0 and len(out.splitlines()) == 17


def test_verify_detects_tampering(tmp_path, capsys):
    cert = tmp_path / "k2.json"
    main(["search-lambda", "--k", "2", "--emit", str(cert)])
    doc = json.loads(cert.read_text())
    doc["principal"]["8"] = "1.5"
    cert.write_text(json.dumps(doc))
    code, out = run(capsys, "verify", "--cert", str(cert))
    assert code == 1 and "FAILED family=nt" in out


def test_verify_missing_cert(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--cert", str(tmp_path / "missing.cert")])
    assert exc.value.code == 2
    assert "--cert" in capsys.readouterr().err


def test_usage_errors(capsys):
    for argv in (["table1", "--k-range", "x..y"], ["build-lp", "--k", "1"], ["search-lambda"], ["frobnicate"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_table2_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["table2", "--k-range", "2..4", "--tol", "1e-4", "--emit", str(a)]) == 0
    assert main(["table2", "--k-range", "2..4", "--tol", "1e-4", "--emit", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0] == "k,gamma_k,lambda_k,C_k_max,cbar_k_k,cbar_k-1_k,difference"
    reference = {2: 1.3534010, 3: 1.5275960, 4: 1.6122870}
    for row in rows[1:]:
        k, _, lam = row.split(",")[:3]
        assert abs(float(lam) - reference[int(k)]) <= 1e-3


def test_table2_bad_format():
    with pytest.raises(SystemExit) as exc:
        main(["table2", "--k-range", "2..2", "--out", "xlsx"])
    assert exc.value.code == 2


def test_verify_headline(capsys):
    code, out = run(capsys, "verify-headline", "--x", "1e2,1e4")
    assert code == 0
    assert out.splitlines()[1].startswith("100,100,")
