#!/usr/bin/env python3
"""Regenerate tests/data/pu_goldens.json from the committed coefficient file.

Evaluates the rational-power encoding at 50-digit precision (mpmath) at 20
log-spaced luminances across the validity range, plus the anchor points used
by spot tests. Run from the repository root:

    python tools/make_pu_goldens.py
"""

import json
import pathlib

from mpmath import mp, mpf, power, log

mp.dps = 50

ROOT = pathlib.Path(__file__).resolve().parent.parent
COEFFS = ROOT / "src" / "itmbench" / "data" / "pu_banding_glare.json"
OUT = ROOT / "tests" / "data" / "pu_goldens.json"


def main():
    cfg = json.loads(COEFFS.read_text())
    p = [mpf(repr(v)) for v in cfg["p"]]
    y_min, y_max = mpf(repr(cfg["y_min"])), mpf(repr(cfg["y_max"]))

    def encode(y):
        z = power(y, p[2])
        return p[6] * (power((p[0] + p[1] * z) / (1 + p[3] * z), p[4]) - p[5])

    n = 20
    lo, hi = log(y_min, 10), log(y_max, 10)
    rows = []
    for i in range(n):
        y = power(10, lo + (hi - lo) * i / (n - 1))
        rows.append({"y": float(mp.nstr(y, 17)), "v": float(mp.nstr(encode(y), 17))})
    doc = {
        "source": cfg["name"],
        "points": rows,
        "anchors": {
            "y_min": float(mp.nstr(encode(y_min), 17)),
            "100": float(mp.nstr(encode(mpf(100)), 17)),
            "1000": float(mp.nstr(encode(mpf(1000)), 17)),
            "y_max": float(mp.nstr(encode(y_max), 17)),
        },
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
