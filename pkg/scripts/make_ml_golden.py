"""Regenerate tests/data/ml_golden.txt from an extended-precision oracle.

Independent of fracsys: power series at high precision for moderate |z|,
the real-line integral representation (valid for beta < 1 + alpha) for
large negative z.  Output: one ``alpha beta z value`` record per line.
"""

from __future__ import annotations

import sys
from pathlib import Path

import mpmath as mp

ALPHAS = ["0.1", "0.3", "0.5", "0.7", "0.9", "0.99"]
NEG = ["-0.5", "-1", "-2.5", "-7", "-20", "-49", "-51", "-200", "-1000", "-10000"]
POS = ["0.5", "2", "5"]


def series(z, a, b):
    # terms peak near k ~ |z|^(1/a)/a; precision covers the cancellation for z < 0
    zf, af = abs(float(z)), float(a)
    peak = zf ** (1 / af) / af
    extra = int(2 * zf ** (1 / af) / 2.302585) if float(z) < 0 else 0  # cancellation only for z < 0
    with mp.workdps(40 + extra):
        z, a, b = mp.mpf(z), mp.mpf(a), mp.mpf(b)
        kmax = int(3 * peak + 400)
        return +mp.fsum(z ** k * mp.rgamma(a * k + b) for k in range(kmax))


def integral(z, a, b):
    z, a, b = mp.mpf(z), mp.mpf(a), mp.mpf(b)
    m = 1 / (a - b + 1)  # s = w^m removes the s^(a-b) endpoint singularity

    def f(w):
        s = w ** m
        r = s ** a
        num = r * mp.sin(mp.pi * (1 - b)) - z * mp.sin(mp.pi * (1 - b + a))
        den = r * r - 2 * r * z * mp.cos(mp.pi * a) + z * z
        return m * mp.exp(-s) * num / den / mp.pi

    peak = (-z) ** (1 / a)
    pts = sorted({mp.mpf(0), mp.mpf(1), peak ** (1 / m), mp.mpf(10), mp.mpf(100)})
    return mp.quad(f, pts + [mp.inf])


def oracle(z: str, a: str, b: str):
    zf = float(z)
    if zf > 0 or abs(zf) ** (1 / float(a)) <= 150:
        return series(z, a, b)
    with mp.workdps(45):
        return integral(z, a, b)


def main(path: Path) -> None:
    lines = ["# alpha beta z value  (extended-precision oracle)"]
    for a in ALPHAS:
        for b in ("1", a):
            for z in NEG + POS:
                if float(z) > 0 and float(z) ** (1 / float(a)) > 600:
                    continue
                v = oracle(z, a, b)
                lines.append(f"{a} {b} {z} {mp.nstr(v, 20)}")
    path.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "tests/data/ml_golden.txt"
    main(out)
