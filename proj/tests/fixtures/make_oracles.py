"""Regenerates the oracle fixtures by direct ODE integration, independent of the C++ solver."""
import json
import math
from pathlib import Path

HERE = Path(__file__).resolve().parent


def rk4(f, x, y, h, steps):
    for _ in range(steps):
        k1 = f(x, y)
        k2 = f(x + h / 2, [a + h / 2 * b for a, b in zip(y, k1)])
        k3 = f(x + h / 2, [a + h / 2 * b for a, b in zip(y, k2)])
        k4 = f(x + h, [a + h * b for a, b in zip(y, k3)])
        y = [a + h / 6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]
        x += h
    return x, y


def cusp_profile(r_far=30.0, h=1e-4, probes=(1.0, 6.0, 11.0, 16.0, 21.0)):
    # u'' + (2/r - 6 r^2) u' = u, u'(r_far) = 0, then normalized so u(1) = 1
    f = lambda x, y: [y[1], y[0] - (2 / x - 6 * x * x) * y[1]]
    x, y = r_far, [1.0, 0.0]
    values = {}
    for target in sorted(probes, reverse=True):
        steps = int(round((x - target) / h))
        x, y = rk4(f, x, y, -h, steps)
        values[target] = y[0]
    scale = values[1.0]
    return {str(k): v / scale for k, v in sorted(values.items())}


def support_radius(m=3, xi=0.5, delta=1e-3, h=1e-4):
    # u'' + (m-1)/r u' = u^xi with u(1) = 1; shoot inward from the free boundary s0
    gamma = 2 / (1 - xi)
    c = ((1 - xi) ** 2 / (2 * (1 + xi))) ** (1 / (1 - xi))

    def u_at_one(s0):
        f = lambda x, y: [y[1], max(y[0], 0.0) ** xi - (m - 1) / x * y[1]]
        start = s0 - delta
        y = [c * delta ** gamma, -gamma * c * delta ** (gamma - 1)]
        steps = int(round((start - 1) / h))
        _, y = rk4(f, start, y, -(start - 1) / steps, steps)
        return y[0]

    lo, hi = 1.5, 8.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if u_at_one(mid) > 1:
            hi = mid
        else:
            lo = mid
    return (lo + hi) / 2


def write(name, obj):
    (HERE / name).write_text(json.dumps(obj, indent=2) + "\n")


if __name__ == "__main__":
    write("cusp_m3_p2.json", {
        "schema": 1,
        "problem": {"family": "cusp_cubic", "m": 3, "p": 2, "lambda": 1, "xi": 1, "R": 1, "inner_value": 1},
        "provenance": "inward RK4 from r=30 with u'=0, step 1e-4, normalized to u(1)=1",
        "values": cusp_profile(),
    })
    write("support_m3_xi_half.json", {
        "schema": 1,
        "problem": {"family": "euclidean", "m": 3, "p": 2, "lambda": 1, "xi": 0.5, "R": 1, "inner_value": 1},
        "provenance": "inward RK4 shooting from the free boundary with the local quartic profile, step 1e-4, bisection on u(1)=1",
        "support_radius": support_radius(),
        "half_line_support_radius": support_radius(m=1),
    })
