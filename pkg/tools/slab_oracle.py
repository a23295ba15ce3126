"""Reference slab levels for a normalized ball pair by a planar angle sweep.

Both balls are centred on the x_n axis, so the images of their boundary
spheres are surfaces of revolution and the extreme heights are found on a
single meridian.  The sweep is refined with a bounded scalar optimizer.

Usage: python tools/slab_oracle.py [out.json]
"""

import json
import sys

import numpy as np
from scipy.optimize import minimize_scalar

R1, R2, R = 0.5, 3.0, 1.5
A_GRID = [round(0.1 * k, 1) for k in range(1, 20)]
SWEEP = 20001


def image_height(theta, center, rho, a):
    x1 = rho * np.sin(theta)
    xn = center + rho * np.cos(theta)
    norm = np.hypot(x1, xn)
    return R ** (a + 1) * norm ** -(a + 1) * xn


def extreme(center, rho, a, sign):
    """max (sign=+1) or min (sign=-1) of the image height over the meridian."""
    th = np.linspace(0.0, np.pi, SWEEP)
    h = sign * image_height(th, center, rho, a)
    k = int(np.argmax(h))
    lo, hi = th[max(k - 1, 0)], th[min(k + 1, SWEEP - 1)]
    res = minimize_scalar(lambda t: -sign * image_height(t, center, rho, a),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    return sign * max(h[k], -res.fun)


def table():
    t, z = -(R + R1), -(R2 - R)
    rows = []
    for a in A_GRID:
        c1 = extreme(t, R1, a, +1)
        c2 = extreme(z, R2, a, -1)
        tau = -R ** (a + 1) * (R + 2 * R1) ** -a
        zeta = -R ** (a + 1) * (2 * R2 - R) ** -a
        rows.append({
            "a": a, "c1": c1, "c2": c2, "separated": bool(c1 < c2),
            "tau_n": tau, "zeta_n": zeta,
            "c1_at_pole": bool(c1 <= tau + 1e-9), "c2_at_pole": bool(c2 >= zeta - 1e-9),
        })
    return {"r1": R1, "r2": R2, "r": R, "rows": rows}


if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "tests/data/slab_golden.json"
    with open(out, "w", newline="\n") as fh:
        json.dump(table(), fh, indent=1, sort_keys=True)
        fh.write("\n")
