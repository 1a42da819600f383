import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from bisym import cli
from bisym.genset import HEnumeration, enumerate_h
from bisym.witness import certificate_from_json, verify_certificate


def run(args):
    out = io.StringIO()
    code = cli.run(args, stdout=out)
    return code, out.getvalue()


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_default_construct_count(tmp_path):
    target = tmp_path / "e.json"
    code, out = run(["construct", "--out", str(target)])
    assert code == 0
    assert "elements=44" in out
    e = HEnumeration.loads(target.read_text())
    assert len(e.elements) == 44


def test_depth0_construct(tmp_path):
    cfg = write(tmp_path, "c.toml", "depth = 0\n")
    code, out = run(["construct", "--config", cfg, "--out", str(tmp_path / "e.json")])
    assert code == 0 and "elements=2" in out


def test_invalid_radicand_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "c.toml", 'generators = [["1", 4]]\n')
    code, _ = run(["construct", "--config", cfg, "--out", str(tmp_path / "e.json")])
    assert code == 2
    assert "squarefree" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["depth = [", "bogus = 1\n", '[witness]\nnope = 1\n', 'weights = ["1/0"]\n'])
def test_bad_configs_exit_2(tmp_path, text):
    cfg = write(tmp_path, "c.toml", text)
    assert run(["verify", "--config", cfg])[0] == 2


def test_cap_exceeded_exits_3(tmp_path, monkeypatch):
    monkeypatch.setenv("BISYM_MAX_ELEMENTS", "10")
    assert run(["construct", "--out", str(tmp_path / "e.json")])[0] == 3


def test_require_stabilized(tmp_path):
    cfg = write(tmp_path, "c.toml", "require_stabilized = true\n")
    assert run(["construct", "--config", cfg, "--out", str(tmp_path / "e.json")])[0] == 3
    cfg = write(tmp_path, "d.toml", 'require_stabilized = true\ndepth = 1\nwindow = ["1", "4"]\n')
    assert run(["construct", "--config", cfg, "--out", str(tmp_path / "e.json")])[0] == 0


@pytest.mark.parametrize("weights, expect", [
    ('["1", "1"]', {"bisymmetry": "holds_on_sample", "associativity": "holds_on_sample",
                    "symmetry": "holds_on_sample", "reflexivity": "violated"}),
    ('["1", "2"]', {"symmetry": "violated"}),
    ('["1/2", "1/2"]', {"reflexivity": "holds_on_sample"}),
])
def test_verify_examples(tmp_path, weights, expect):
    cfg = write(tmp_path, "c.toml", f"weights = {weights}\ndepth = 2\nwindow = [\"0\", \"64\"]\n")
    out = tmp_path / "r.json"
    code, _ = run(["verify", "--config", cfg, "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    verdicts = {r["law"]: r["verdict"] for r in rep["results"]["laws"]}
    for law, v in expect.items():
        assert verdicts[law] == v
    for r in rep["results"]["laws"]:
        if r["verdict"] == "violated":
            assert r["counterexample"] and r["counterexample_rechecked"]
    assert rep["schema_version"] == 1 and rep["command"] == "verify"


def test_witness_report_is_self_contained(tmp_path):
    out = tmp_path / "w.json"
    cfg = write(tmp_path, "c.toml", 'depth = 2\n[witness]\nfixed = [0, 1]\nk = 2\n')
    code, _ = run(["witness", "--config", cfg, "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    for entry in rep["results"]["entries"]:
        assert len(entry["certificates"]) == 2
        for c in entry["certificates"]:
            cert = certificate_from_json(c["certificate"])
            e = enumerate_h(cert.family, cert.weights, 2, (1, 16))
            assert verify_certificate(cert, e)


def test_witness_unverifiable_exits_3(tmp_path):
    cfg = write(tmp_path, "c.toml", 'generators = [["1", 2]]\ndepth = 2\n')
    assert run(["witness", "--config", cfg, "--out", str(tmp_path / "w.json")])[0] == 3


def test_plot_writes_csv(tmp_path):
    outdir = tmp_path / "plots"
    cfg = write(tmp_path, "c.toml", "depth = 2\n[plot]\nresolution = 21\n")
    code, _ = run(["plot", "--config", cfg, "--out", str(outdir)])
    assert code == 0
    rows = list(csv.reader((outdir / "staircase.csv").open()))
    assert rows[0] == ["t", "value"] and rows[1] == ["0", "0"] and rows[-1] == ["1", "1"]
    vals = [float(v) for _, v in rows[1:]]
    assert vals == sorted(vals)
    assert (outdir / "section.json").exists() and (outdir / "report.json").exists()


def test_reconstruct_command(tmp_path):
    cfg = write(tmp_path, "c.toml", '[reconstruct]\nmean = "arith"\na = "0"\nb = "1"\ndepth = 6\nword_depth = 4\n')
    out = tmp_path / "r.json"
    code, _ = run(["reconstruct", "--config", cfg, "--out", str(out)])
    assert code == 0
    res = json.loads(out.read_text())["results"]
    assert res["max_residual"] == 0 and res["quasi_arithmetic"] is True
    assert res["density_gaps"] == {"4": 1 / 16}


def test_reconstruct_impostor_exits_2(tmp_path):
    server = f"{sys.executable} -c \"import sys; [print('VAL 0.7 0.7', flush=True) for _ in sys.stdin]\""
    cfg = write(tmp_path, "c.toml", f"[reconstruct]\nmean = 'external:{server}'\na = \"0\"\nb = \"1\"\n")
    assert run(["reconstruct", "--config", cfg, "--out", str(tmp_path / "r.json")])[0] == 2


def test_escape_command(tmp_path):
    out = tmp_path / "e.json"
    code, _ = run(["escape", "--out", str(out)])
    assert code == 0
    res = json.loads(out.read_text())["results"]
    r3 = res["reports"][3]
    assert (r3["lower"], r3["upper"], r3["stabilization_depth"]) == ("8/1", "16/1", 4)
    assert all(res["balanced_layer_check"].values())


def test_seeded_reports_are_identical(tmp_path):
    texts = []
    for i in range(2):
        out = tmp_path / f"v{i}.json"
        run(["verify", "--seed", "5", "--out", str(out)])
        texts.append(cli.strip_wall_time(out.read_text()))
    assert texts[0] == texts[1]


def test_print_config_round_trip(tmp_path):
    _, text = run(["construct", "--print-config"])
    cfg = write(tmp_path, "c.toml", text)
    _, again = run(["construct", "--config", cfg, "--print-config"])
    assert again == text


rat = st.fractions(min_value=Fraction(1, 7), max_value=9, max_denominator=7).map(
    lambda q: f"{q.numerator}/{q.denominator}")


@settings(max_examples=40, deadline=None)
@given(st.lists(rat, min_size=2, max_size=3), st.integers(0, 4), st.integers(0, 2 ** 31),
       st.sampled_from(["geom", "arith", "power:2"]), st.sampled_from(["all", [0], [[1]]]))
def test_config_canonical_round_trip(weights, depth, seed, mean, fixed):
    cfg = cli.RunConfig(weights=weights, depth=depth, seed=seed)
    cfg.reconstruct.mean = mean
    cfg.witness.fixed = fixed
    text = cfg.dumps()
    assert cli.RunConfig.loads(text).dumps() == text


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bisym.cli", "escape"], capture_output=True,
                          text=True, cwd=tmp_path)
    assert proc.returncode == 0
    assert json.loads(proc.stdout[proc.stdout.index("{"):])["command"] == "escape"
