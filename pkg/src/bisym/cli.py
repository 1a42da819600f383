"""``bisym`` command line: construct, verify, witness, plot, reconstruct, escape.

Exit codes: 0 when every expected property is confirmed, 2 on a property
violation or invalid input, 3 when a resource cap is hit or a claim cannot
be certified.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from .coeffs import PrecisionExceeded, as_rational, format_rational
from .genset import (EnumerationCapExceeded, FamilyError, HEnumeration, enumerate_h,
                     make_family)
from .quasisum import (Law, Verdict, check_associativity, check_reflexivity, check_symmetry,
                       describe_weights, expected_verdicts, extended_reflexive_points, recheck,
                       verify_bisym_from_assoc_sym, verify_bisymmetry, verify_monotonicity)
from .reconstruct import (MonotonicityError, ProtocolError, ReflexivityError, build_dyadic_map,
                          density_gap_scan, generate_words, reconstruct_phi, resolve_mean)
from .staircase import (build_stage_map, section_rows, section_samples, sidecar_json,
                        staircase_rows, staircase_samples, write_csv)
from .weights import Weights
from .witness import (Direction, balanced_layer_check, escape_bounds, tail_certificates,
                      verify_certificate)

REPORT_SCHEMA = "bisym.report"
REPORT_VERSION = 1

EXIT_OK, EXIT_VIOLATION, EXIT_UNVERIFIABLE = 0, 2, 3

COMMANDS = ("construct", "verify", "witness", "plot", "reconstruct", "escape")


class ConfigError(ValueError):
    pass


def _q(v) -> str:
    return format_rational(as_rational(v))


@dataclass
class WitnessOptions:
    free_position: int = 1
    fixed: list | str = "all"   # "all", or a list of (n-1)-tuples of element indices
    k: int = 3
    direction: str = "auto"
    recheck_deeper: bool = True


@dataclass
class PlotOptions:
    targets: list = field(default_factory=lambda: ["staircase", "section"])
    resolution: int = 101
    free_position: int = 1
    fixed: list = field(default_factory=lambda: [0])


@dataclass
class ReconstructOptions:
    mean: str = "geom"
    a: str = "1"
    b: str = "4"
    depth: int = 10
    word_depth: int = 8
    precision: str = "1/1000000000000"
    fit_tolerance: str = "1/1000000"
    pairs: int = 2000


@dataclass
class EscapeOptions:
    m_min: int = 0
    m_max: int = 6
    bound: str = "10"
    digits: int = 0
    layer_check_max: int = 4


@dataclass
class RunConfig:
    weights: list = field(default_factory=lambda: ["1", "1"])
    generators: list = field(default_factory=lambda: [["1", 2], ["1", 3]])
    depth: int = 3
    window: list = field(default_factory=lambda: ["1", "16"])
    seed: int = 0
    sample_count: int = 1000
    require_stabilized: bool = False
    witness: WitnessOptions = field(default_factory=WitnessOptions)
    plot: PlotOptions = field(default_factory=PlotOptions)
    reconstruct: ReconstructOptions = field(default_factory=ReconstructOptions)
    escape: EscapeOptions = field(default_factory=EscapeOptions)

    # -- canonical form ---------------------------------------------------

    def canonical(self) -> dict:
        """Normalized dict: rationals as ``p/q``, every field present."""
        d = dataclasses.asdict(self)
        d["weights"] = [_q(w) for w in self.weights]
        d["generators"] = [[_q(s), int(r)] for s, r in self.generators]
        d["window"] = [_q(v) for v in self.window]
        r = d["reconstruct"]
        for key in ("a", "b", "precision", "fit_tolerance"):
            r[key] = _q(r[key])
        d["escape"]["bound"] = _q(d["escape"]["bound"])
        return d

    def dumps(self) -> str:
        return tomli_w.dumps(_sorted(self.canonical()))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        sections = {"witness": WitnessOptions, "plot": PlotOptions,
                    "reconstruct": ReconstructOptions, "escape": EscapeOptions}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            if key in sections:
                sub = sections[key]
                sub_known = {f.name for f in dataclasses.fields(sub)}
                bad = set(value) - sub_known
                if bad:
                    raise ConfigError(f"unknown keys in [{key}]: {sorted(bad)}")
                kwargs[key] = sub(**value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        try:
            cfg = cls.from_canonical(cfg.canonical())
        except (ValueError, TypeError, ZeroDivisionError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        return cfg

    @classmethod
    def from_canonical(cls, d: dict) -> "RunConfig":
        return cls(
            weights=d["weights"], generators=d["generators"], depth=int(d["depth"]),
            window=d["window"], seed=int(d["seed"]), sample_count=int(d["sample_count"]),
            require_stabilized=bool(d["require_stabilized"]),
            witness=WitnessOptions(**d["witness"]), plot=PlotOptions(**d["plot"]),
            reconstruct=ReconstructOptions(**d["reconstruct"]), escape=EscapeOptions(**d["escape"]),
        )

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from None

    # -- derived objects --------------------------------------------------

    def weights_obj(self) -> Weights:
        return Weights.of(self.weights)

    def family(self):
        return make_family([(as_rational(s), r) for s, r in self.generators], self.window)


def _sorted(d):
    if isinstance(d, dict):
        return {k: _sorted(d[k]) for k in sorted(d)}
    return d


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return RunConfig.loads(text)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class Outcome:
    results: dict
    code: int = EXIT_OK
    messages: list = field(default_factory=list)


def make_report(command: str, cfg: RunConfig, results: dict, wall_time: float) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "schema_version": REPORT_VERSION,
        "command": command,
        "config": cfg.canonical(),
        "results": results,
        "wall_time": wall_time,
    }


def dumps_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def strip_wall_time(text: str) -> str:
    """Report text with the only nondeterministic field removed."""
    doc = json.loads(text)
    doc.pop("wall_time", None)
    return json.dumps(doc, sort_keys=True, indent=2)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def construct(cfg: RunConfig) -> HEnumeration:
    return enumerate_h(cfg.family(), cfg.weights_obj(), cfg.depth, cfg.window)


def _enumeration(cfg: RunConfig, enum_path: str | None) -> HEnumeration:
    if enum_path is None:
        return construct(cfg)
    try:
        return HEnumeration.loads(Path(enum_path).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load enumeration {enum_path}: {exc}") from None


def cmd_construct(cfg: RunConfig, out: str | None, enum_path=None) -> Outcome:
    e = construct(cfg)
    text = e.dumps()
    target = out or "enumeration.json"
    Path(target).write_text(text)
    res = {"elements": len(e.elements), "stabilized": e.stabilized, "truncated": e.truncated,
           "depth_certificate": e.depth_certificate, "file": target}
    o = Outcome(res, messages=[f"elements={len(e.elements)} stabilized={str(e.stabilized).lower()}"
                               f" file={target}"])
    if cfg.require_stabilized and not e.stabilized:
        o.code = EXIT_UNVERIFIABLE
        o.messages.append("enumeration is not certified stabilized")
    return o


def run_laws(w: Weights, pool: HEnumeration, sample_count: int, seed: int) -> list:
    reports = [
        verify_bisymmetry(w, sample_count, seed, pool),
        verify_monotonicity(w, sample_count, seed, pool),
        check_reflexivity(w, pool, seed),
        check_symmetry(w, pool, sample_count, seed),
        check_associativity(w, pool, sample_count, seed),
    ]
    if w.n == 2 and w.all_one:
        reports.append(verify_bisym_from_assoc_sym(sample_count, seed, pool))
    return reports


def cmd_verify(cfg: RunConfig, out, enum_path=None) -> Outcome:
    pool = _enumeration(cfg, enum_path)
    w = cfg.weights_obj()
    reports = run_laws(w, pool, cfg.sample_count, cfg.seed)
    expected = expected_verdicts(w)
    expected[Law.EXTENDED_BISYMMETRY] = Verdict.HOLDS
    rows, mismatches = [], []
    for r in reports:
        j = r.to_json()
        j["expected"] = expected[r.law].value
        j["matches_expected"] = r.verdict is expected[r.law]
        if r.counterexample is not None:
            j["counterexample_rechecked"] = recheck(r, pool.family)
            j["matches_expected"] = j["matches_expected"] and j["counterexample_rechecked"]
        if not j["matches_expected"]:
            mismatches.append(r.law.value)
        rows.append(j)
    res = {"weights": describe_weights(w), "pool_size": len(pool.elements), "laws": rows,
           "mismatches": mismatches}
    if w.n == 2 and w.all_one:
        res["extended_reflexive_points"] = [
            "zero" if not hasattr(x, "to_json") else x.to_json()
            for x in extended_reflexive_points(pool)]
    o = Outcome(res, messages=[f"{r['law']}: {r['verdict']}" for r in rows])
    if mismatches:
        o.code = EXIT_VIOLATION
        o.messages.append("verdicts disagree with the weight truth table: " + ", ".join(mismatches))
    return o


def _fixed_tuples(cfg: RunConfig, e: HEnumeration, spec, arity: int) -> list:
    if spec == "all":
        return [(x,) * arity for x in e.elements]
    out = []
    for item in spec:
        idx = item if isinstance(item, list) else [item] * arity
        if len(idx) != arity:
            raise ConfigError(f"fixed entry {item} needs {arity} indices")
        try:
            out.append(tuple(e.elements[i] for i in idx))
        except IndexError:
            raise ConfigError(f"fixed index out of range in {item}") from None
    return out


def cmd_witness(cfg: RunConfig, out, enum_path=None) -> Outcome:
    e = _enumeration(cfg, enum_path)
    w = cfg.weights_obj()
    opt = cfg.witness
    if not 0 <= opt.free_position < w.n:
        raise ConfigError(f"free_position must lie in [0, {w.n})")
    direction = None if opt.direction == "auto" else Direction(opt.direction)
    deeper = None
    if opt.recheck_deeper:
        deeper = enumerate_h(e.family, w, e.depth + 1, e.window)
    entries, failures = [], 0
    for fixed in _fixed_tuples(cfg, e, opt.fixed, w.n - 1):
        tail = tail_certificates(w, opt.free_position, fixed, e, opt.k, direction)
        certs = []
        for c in tail.certificates:
            ok = verify_certificate(c, e)
            ok_deep = verify_certificate(c, deeper) if deeper is not None else None
            if not ok or ok_deep is False:
                failures += 1
            certs.append({"certificate": c.to_json(), "verified": ok, "verified_deeper": ok_deep})
        if tail.truncated:
            failures += 1
        entries.append({"fixed": [x.to_json() for x in fixed], "certificates": certs,
                        "truncated": tail.truncated})
    res = {"weights": describe_weights(w), "free_position": opt.free_position, "k": opt.k,
           "entries": entries, "unverified": failures}
    o = Outcome(res, messages=[f"fixed sections={len(entries)} unverified={failures}"])
    if failures:
        o.code = EXIT_UNVERIFIABLE
    return o


def cmd_plot(cfg: RunConfig, out, enum_path=None) -> Outcome:
    e = _enumeration(cfg, enum_path)
    outdir = Path(out or "plots")
    outdir.mkdir(parents=True, exist_ok=True)
    opt = cfg.plot
    files = []
    res: dict = {}
    for target in opt.targets:
        if target == "staircase":
            st = staircase_samples(e, opt.resolution)
            rows = staircase_rows(st)
            res["staircase"] = {"samples": len(rows), "flat_regions": st.flat_regions(),
                                "radius": format_rational(st.radius)}
        elif target == "section":
            w = cfg.weights_obj()
            m = build_stage_map(e)
            fixed = _fixed_tuples(cfg, e, [opt.fixed], w.n - 1)[0]
            samples = section_samples(w, opt.free_position, fixed, m)
            rows = section_rows(samples)
            res["section"] = {"samples": len(rows),
                              "out_of_window": sum(1 for s in samples if not s.in_window)}
        else:
            raise ConfigError(f"unknown plot target {target!r}")
        (outdir / f"{target}.csv").write_text(write_csv(rows))
        (outdir / f"{target}.json").write_text(sidecar_json(rows, target))
        files += [f"{target}.csv", f"{target}.json"]
    res["files"] = files
    return Outcome(res, messages=[f"wrote {', '.join(files)} to {outdir}"])


def cmd_reconstruct(cfg: RunConfig, out, enum_path=None) -> Outcome:
    opt = cfg.reconstruct
    M = resolve_mean(opt.mean)
    prec = as_rational(opt.precision)
    try:
        dm = build_dyadic_map(M, opt.a, opt.b, opt.depth, prec)
        rec = reconstruct_phi(M, opt.a, opt.b, opt.depth, prec, float(as_rational(opt.fit_tolerance)),
                              pairs=opt.pairs, seed=cfg.seed, dyadic=dm)
        gaps = {}
        for d in sorted({min(4, opt.word_depth), opt.word_depth}):
            gaps[str(d)] = float(density_gap_scan(generate_words(M, opt.a, opt.b, d, prec)))
    except ReflexivityError as exc:
        return Outcome({"mean": M.name, "error": str(exc), "defect": float(exc.defect)},
                       EXIT_VIOLATION, [str(exc)])
    except MonotonicityError as exc:
        return Outcome({"mean": M.name, "error": str(exc),
                        "pair": [format_rational(p) for p in exc.pair]}, EXIT_VIOLATION, [str(exc)])
    except ProtocolError as exc:
        return Outcome({"mean": M.name, "error": str(exc)}, EXIT_UNVERIFIABLE, [str(exc)])
    res = rec.to_json()
    res["density_gaps"] = gaps
    o = Outcome(res, messages=[f"{M.name}: max residual {rec.max_residual:.3g}, "
                               f"quasi-arithmetic={str(rec.ok).lower()}"])
    if not rec.ok:
        o.code = EXIT_VIOLATION
        o.messages.append("residual exceeds the fit tolerance at this depth")
    return o


def cmd_escape(cfg: RunConfig, out, enum_path=None) -> Outcome:
    opt = cfg.escape
    w = cfg.weights_obj()
    fam = cfg.family()
    reports = [escape_bounds(w, fam, m, opt.bound, opt.digits).to_json()
               for m in range(opt.m_min, opt.m_max + 1)]
    checks = {}
    for m in range(opt.m_min, min(opt.m_max, opt.layer_check_max) + 1):
        checks[str(m)] = balanced_layer_check(w, fam, m, opt.digits)
    res = {"weights": describe_weights(w), "reports": reports, "balanced_layer_check": checks}
    o = Outcome(res, messages=[f"stabilization depth: {reports[0]['stabilization_depth']}"
                               if reports else "no layers requested"])
    if not all(checks.values()):
        o.code = EXIT_VIOLATION
        o.messages.append("a balanced layer left its escape bounds")
    return o


HANDLERS = {
    "construct": cmd_construct, "verify": cmd_verify, "witness": cmd_witness,
    "plot": cmd_plot, "reconstruct": cmd_reconstruct, "escape": cmd_escape,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bisym", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML run configuration (defaults used when omitted)")
    ap.add_argument("--out", help="output path: enumeration file, report file or plot directory")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--enum", help="enumeration file produced by 'construct'")
    ap.add_argument("--print-config", action="store_true",
                    help="print the canonical config and exit")
    return ap


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.print_config:
            stdout.write(cfg.dumps())
            return EXIT_OK
        outcome = HANDLERS[args.command](cfg, args.out, args.enum)
    except (ConfigError, FamilyError, ValueError) as exc:
        print(f"bisym: error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (EnumerationCapExceeded, PrecisionExceeded) as exc:
        print(f"bisym: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_UNVERIFIABLE
    for line in outcome.messages:
        stdout.write(line + "\n")
    if args.command != "construct":
        report = make_report(args.command, cfg, outcome.results, time.perf_counter() - start)
        text = dumps_report(report)
        if args.command == "plot":
            Path(args.out or "plots", "report.json").write_text(text)
        elif args.out:
            Path(args.out).write_text(text)
        else:
            stdout.write(text)
    return outcome.code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
