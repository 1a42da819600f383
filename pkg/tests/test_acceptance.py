"""Acceptance criteria, one test each.

Each test prints a PASS/FAIL line in the "acceptance criteria" section of the
pytest terminal summary.  Run alone with ``pytest tests/test_acceptance.py``.
"""
import io
import json
import math
import random
import time
from fractions import Fraction as F

import pytest

from bisym import cli
from bisym.genset import HEnumeration, enumerate_h, make_family
from bisym.quasisum import (ZERO, Law, Verdict, expected_verdicts, extended_apply,
                            extended_reflexive_points, recheck, verify_bisym_from_assoc_sym)
from bisym.reconstruct import (build_dyadic_map, builtin_mean, density_gap_scan, generate_words,
                               reconstruct_phi)
from bisym.staircase import build_stage_map, section_samples, staircase_samples
from bisym.weights import Weights
from bisym.witness import (Direction, balanced_layer_check, find_gap_certificate,
                           stabilization_depth, tail_certificates, verify_certificate)

FAMILY_SPEC = [(1, 2), (1, 3)]


def _pool(weights, depth=2, window=(0, 64)):
    fam = make_family(FAMILY_SPEC, (1, 2))
    return enumerate_h(fam, Weights.of(weights), depth, window)


def _truth_table(configs, samples=1000, seed=0):
    """Law verdicts vs the weight-predicted table; counterexamples rechecked."""
    problems = []
    for ws in configs:
        w = Weights.of(ws)
        pool = _pool(ws)
        expected = expected_verdicts(w)
        expected[Law.EXTENDED_BISYMMETRY] = Verdict.HOLDS
        for r in cli.run_laws(w, pool, samples, seed):
            if r.verdict is not expected[r.law]:
                problems.append(f"{ws} {r.law.value}: {r.verdict.value}")
            if r.counterexample is not None and not recheck(r, pool.family):
                problems.append(f"{ws} {r.law.value}: counterexample does not recheck")
            if not r.holds and r.counterexample is None:
                problems.append(f"{ws} {r.law.value}: violation without counterexample")
    return problems


def test_criterion_1_binary_truth_table(criterion):
    t = time.perf_counter()
    problems = _truth_table([(1, 1), (1, 2), (F(1, 2), F(1, 2)), (2, 2), (2, 3)])
    elapsed = time.perf_counter() - t
    criterion.record(1, f"binary law truth table, 5 weight configs ({elapsed:.1f}s)", {
        "verdicts match: " + "; ".join(problems): not problems,
        f"runtime {elapsed:.1f}s < 30s": elapsed < 30,
    })


def test_criterion_2_nary_truth_table(criterion):
    t = time.perf_counter()
    problems = _truth_table([(1, 1, 1), (1, 1, 2), (F(1, 3), F(1, 3), F(1, 3))])
    elapsed = time.perf_counter() - t
    criterion.record(2, f"n=3 law truth table incl. (2n-1)-argument associativity ({elapsed:.1f}s)", {
        "verdicts match: " + "; ".join(problems): not problems,
        f"runtime {elapsed:.1f}s < 60s": elapsed < 60,
    })


def _certificates_everywhere(ws, window, direction, family_spec=FAMILY_SPEC, fam_window=(1, 2)):
    fam = make_family(family_spec, fam_window)
    w = Weights.of(ws)
    e = enumerate_h(fam, w, 2, window)
    deeper = enumerate_h(fam, w, 3, window)
    bad = []
    for x in e.elements:
        for free in (0, 1):
            c = find_gap_certificate(w, free, [x], e, direction)
            if c.direction is not direction:
                bad.append(f"{x}: wrong direction")
            if not verify_certificate(c, e):
                bad.append(f"{x} free={free}: fails at build depth")
            if not verify_certificate(c, deeper):
                bad.append(f"{x} free={free}: fails at depth+1")
    return len(e.elements), bad


def test_criterion_3_certificates_expanding(criterion):
    checks = {}
    for ws, window in [((1, 1), (1, 16)), ((2, 2), (1, 64))]:
        n, bad = _certificates_everywhere(ws, window, Direction.ABOVE)
        checks[f"{ws}: all {n} fixed elements certified: {bad[:3]}"] = not bad and n > 0
    criterion.record(3, "Above-direction gap certificates at depth 2 and depth 3", checks)


def test_criterion_4_certificates_contracting(criterion):
    spec = [(F(1, 2), 2), (F(1, 2), 3)]
    n, bad = _certificates_everywhere((F(1, 4), F(1, 4)), (0, 1), Direction.BELOW,
                                      family_spec=spec, fam_window=(F(1, 2), 1))
    criterion.record(4, "Below-direction certificates for weights (1/4,1/4) on [1/2,1]", {
        f"all {n} fixed elements certified: {bad[:3]}": not bad and n > 0,
    })


def test_criterion_5_escape(criterion):
    fam = make_family(FAMILY_SPEC, (1, 2))
    checks = {}
    for ws in [(1, 1), (F(1, 2), F(1, 2))]:
        for m in range(7):
            checks[f"balanced_layer_check {ws} m={m}"] = balanced_layer_check(Weights.of(ws), fam, m)
    depth, _ = stabilization_depth(F(2), F(1), F(2), F(10))
    checks[f"stabilization_depth(M=10, lambda=2, L0=1) = {depth}"] = depth == 4
    criterion.record(5, "escape bounds for m <= 6 and stabilization depth 4", checks)


def test_criterion_6_neutral_extension(criterion):
    pool = _pool((1, 1))
    w = Weights.of([1, 1])
    report = verify_bisym_from_assoc_sym(1000, 0, pool)
    rng = random.Random(1)
    ext = [ZERO] + list(pool.elements)
    direct = 0
    for _ in range(1000):
        x, y, u, v = (rng.choice(ext) for _ in range(4))
        lhs = extended_apply(w, (extended_apply(w, (x, y)), extended_apply(w, (u, v))))
        rhs = extended_apply(w, (extended_apply(w, (x, u)), extended_apply(w, (y, v))))
        direct += lhs == rhs
    fixed = extended_reflexive_points(pool)
    criterion.record(6, "neutral element adjoined at (1,1)", {
        f"rewriting chain holds on {report.samples_checked} quadruples": report.holds
        and report.samples_checked >= 1000,
        f"direct bisymmetry on 1000 quadruples ({direct})": direct == 1000,
        "F(e,e) = e only at Zero": fixed == [ZERO],
    })


def test_criterion_7_reconstruction(criterion):
    t = time.perf_counter()
    arith = builtin_mean("arith")
    exact = True
    for n in range(0, 11):
        dm = build_dyadic_map(arith, 0, 1, n)
        exact &= len(dm.entries) == 2 ** n + 1
        exact &= all(v.lo == d and v.hi == d for d, v in dm.entries.items())
    geom = builtin_mean("geom")
    dm = build_dyadic_map(geom, 1, 4, 10)
    rec = reconstruct_phi(geom, 1, 4, 10, dyadic=dm)
    log_dev = rec.generator_deviation(math.log2)
    g4 = density_gap_scan(generate_words(geom, 1, 4, 4))
    g8 = density_gap_scan(generate_words(geom, 1, 4, 8))
    elapsed = time.perf_counter() - t
    criterion.record(7, f"two-point reconstruction ({elapsed:.1f}s)", {
        "arith f0(k/2^n) = k/2^n exactly, n <= 10": exact,
        f"geom fit residual {rec.max_residual:.2e} <= 1e-6": rec.max_residual <= 1e-6,
        f"geom phi vs normalized log2 {log_dev:.2e} <= 1e-6": log_dev <= 1e-6,
        f"well-definedness {float(dm.consistency_residual):.2e} <= 1e-9": dm.consistency_residual <= F(1, 10 ** 9),
        f"gap(8) {float(g8):.4f} < gap(4) {float(g4):.4f}": g8 < g4,
        f"runtime {elapsed:.1f}s < 60s": elapsed < 60,
    })


def test_criterion_8_staircase_and_sections(criterion):
    checks = {}
    for ws, window in [((1, 1), (1, 16)), ((2, 2), (1, 64))]:
        w = Weights.of(ws)
        e = _pool(ws, window=window)
        st = staircase_samples(e, 201)
        vals = [p for _, p in st.points]
        checks[f"{ws} staircase nondecreasing"] = all(a <= b for a, b in zip(vals, vals[1:]))
        checks[f"{ws} endpoints (0,0),(1,1)"] = st.points[0] == (0, 0) and st.points[-1] == (1, 1)
        m = build_stage_map(e)
        for x in e.elements:
            samples = section_samples(w, 1, [x], m)
            hit = [s.value_t for s in samples if s.in_window]
            tail = tail_certificates(w, 1, [x], e, len(e.elements))
            missed = {m.coordinate_of(c.missed_value) for c in tail.certificates}
            u = tail.certificates[0].forbidden_generator
            zero_u = {m.coordinate_of(y) for y in e.elements if y.coeff(u) == 0}
            checks[f"{ws} section at {x} monotone"] = all(a < b for a, b in zip(hit, hit[1:]))
            checks[f"{ws} section at {x} omits every certified coordinate"] = not (missed & set(hit))
            checks[f"{ws} certified set is the zero-u layer at {x}"] = missed == zero_u
    criterion.record(8, "staircase and section samples on depth-2 enumerations", checks)


def test_criterion_9_determinism_roundtrip(criterion, tmp_path):
    w = Weights.of([1, 1])
    pool = _pool((1, 1))
    loaded = HEnumeration.loads(pool.dumps())
    mem = [r.to_json() for r in cli.run_laws(w, pool, 1000, 7)]
    disk = [r.to_json() for r in cli.run_laws(w, loaded, 1000, 7)]
    cfg = tmp_path / "c.toml"
    cfg.write_text('weights = ["1", "2"]\ndepth = 2\nwindow = ["0", "64"]\n')
    texts = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        code = cli.run(["verify", "--config", str(cfg), "--seed", "11", "--out", str(out)],
                       stdout=io.StringIO())
        texts.append(cli.strip_wall_time(out.read_text()))
    enum_file = tmp_path / "e.json"
    cli.run(["construct", "--config", str(cfg), "--out", str(enum_file)], stdout=io.StringIO())
    out = tmp_path / "r_file.json"
    cli.run(["verify", "--config", str(cfg), "--seed", "11", "--enum", str(enum_file),
             "--out", str(out)], stdout=io.StringIO())
    via_file = json.loads(out.read_text())["results"]["laws"]
    criterion.record(9, "round-trip and byte-identical seeded reports", {
        "enumeration survives serialization": loaded.dumps() == pool.dumps(),
        "in-memory and reloaded verdicts identical": mem == disk,
        "CLI exit 0": code == 0,
        "identical seeds give identical reports": texts[0] == texts[1],
        "construct->file->verify equals in-memory CLI": via_file == json.loads(texts[0])["results"]["laws"],
    })


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
