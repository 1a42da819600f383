"""Serve a built-in mean over the line protocol.

    python -m bisym.mean_server geom

Each ``EVAL x_lo x_hi y_lo y_hi prec`` line is answered with ``VAL lo hi``
or ``ERR <reason>``.  End of input stops the server.
"""
from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from decimal import ROUND_CEILING, ROUND_FLOOR

from .reconstruct import Bounds, builtin_mean, decimal_text


def handle(mean, line: str) -> str:
    parts = line.split()
    if len(parts) != 6 or parts[0] != "EVAL":
        return "ERR expected: EVAL x_lo x_hi y_lo y_hi prec"
    try:
        xl, xh, yl, yh, prec = (Fraction(p) for p in parts[1:])
    except ValueError as exc:
        return f"ERR {exc}"
    if xl > xh or yl > yh or prec <= 0:
        return "ERR malformed enclosure"
    v = mean(Bounds(xl, xh), Bounds(yl, yh), prec)
    return f"VAL {decimal_text(v.lo, ROUND_FLOOR)} {decimal_text(v.hi, ROUND_CEILING)}"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="bisym-mean-server", description=__doc__.splitlines()[0])
    ap.add_argument("mean", help="arith, geom, power:p, quasi:exp or quasi:log")
    args = ap.parse_args(argv)
    mean = builtin_mean(args.mean)
    for line in sys.stdin:
        if not line.strip():
            continue
        sys.stdout.write(handle(mean, line) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
