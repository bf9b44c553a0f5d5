"""Regenerates trending.csv (hourly bars, symbol TREND).

    python3 generate_trending.py 775232 1500 0.0261 27.81 0.0354 96.07 0.0059 \
        -0.00120,0.00189,-0.00079,0.00104,0.00288,0.00050,0.00178,0.00135 > trending.csv

Log price = piecewise-linear drift + two sine cycles + Gaussian noise.
"""

import math
import random
import sys


def make(seed, n, a1, p1, a2, p2, noise, segs):
    rng = random.Random(seed)
    lp = []
    trend = 0.0
    seg_len = n // len(segs)
    for t in range(n):
        trend += segs[min(t // seg_len, len(segs) - 1)]
        lp.append(trend + a1 * math.sin(2 * math.pi * t / p1) + a2 * math.sin(2 * math.pi * t / p2 + 1.0) + rng.gauss(0, noise))
    rows = []
    base = 100.0
    prev_close = base * math.exp(lp[0])
    t0 = 1_600_000_000_000
    for t in range(n):
        close = base * math.exp(lp[t])
        open_ = prev_close
        hi = max(open_, close) * (1 + abs(rng.gauss(0, 0.002)))
        lo = min(open_, close) * (1 - abs(rng.gauss(0, 0.002)))
        vol = 1000 + rng.random() * 500
        rows.append(f"{t0 + t * 3_600_000},{open_:.6f},{hi:.6f},{lo:.6f},{close:.6f},{vol:.3f}")
        prev_close = close
    return "timestamp,open,high,low,close,volume\n" + "\n".join(rows) + "\n"


if __name__ == "__main__":
    seed, n = int(sys.argv[1]), int(sys.argv[2])
    a1, p1, a2, p2, noise = (float(a) for a in sys.argv[3:8])
    segs = [float(s) for s in sys.argv[8].split(",")]
    sys.stdout.write(make(seed, n, a1, p1, a2, p2, noise, segs))
