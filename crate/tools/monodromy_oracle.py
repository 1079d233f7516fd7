#!/usr/bin/env python3
"""Numerical wreath-recursion oracle for explicit rational maps.

Loops around the finite marked points are lifted through f by Newton
continuation. Each finite marked point p carries a cut ray from p to infinity
in direction V; crossing a ray from its left to its right reads the letter x_p.
Finite punctures are numbered by the order in which their rays meet a line far
below, infinity is last, so that x_1 ... x_n = 1.

Usage: monodromy_oracle.py OUTDIR [map ...]
"""

import cmath
import json
import math
import sys

import numpy as np

DELTA = 0.13
V = -1j * cmath.exp(1j * DELTA)  # ray direction
U = -V  # leg direction (up)
R_SMALL = 2e-3
HEIGHT = 12.0


class RationalMap:
    def __init__(self, num, den):
        self.p = np.poly1d(num)
        self.q = np.poly1d(den)
        self.dp = self.p.deriv()
        self.dq = self.q.deriv()

    def __call__(self, z):
        return self.p(z) / self.q(z)

    def preimages(self, w):
        return list(np.roots((self.p - w * self.q).coeffs))

    def newton(self, z, w):
        for _ in range(30):
            h = self.p(z) - w * self.q(z)
            dh = self.dp(z) - w * self.dq(z)
            if dh == 0:
                return None
            step = h / dh
            z = z - step
            if abs(step) < 1e-14 * max(1.0, abs(z)):
                return z
        return z if abs(self.p(z) - w * self.q(z)) < 1e-9 * max(1.0, abs(w)) else None


class ComposedMap:
    """f = psi o g for a homeomorphism psi, given through chi = psi^-1."""

    def __init__(self, g, chi, chi_inf):
        self.g = g
        self.chi = chi
        self.chi_inf = chi_inf

    def __call__(self, z):
        raise NotImplementedError("psi is only known through its inverse")

    def preimages(self, w):
        return self.g.preimages(self.chi(w))

    def newton(self, z, w):
        return self.g.newton(z, self.chi(w))

    def chart(self, w):
        return self.chi(w)


def disk_push(c, v, r):
    def h(z):
        return z + v * max(0.0, 1.0 - abs(z - c) / r)
    return h


def bicycle_chi(eps):
    """chi = psi^-1: identity on |z| <= 2, infinity to kappa/2 and iS to -kappa/2."""
    kappa = (1 + eps * eps) / math.sqrt(eps)
    s = math.sqrt(1 / eps - eps)
    v0 = 2 / kappa

    def push_inf(z):
        if abs(z) <= 2:
            return z
        zeta = 1 / z
        return 1 / (zeta + v0 * (1 - abs(zeta) / 0.5))

    pushes = []
    p = push_inf(1j * s)
    r0, t0 = abs(p), cmath.phase(p)
    steps = 16
    for k in range(1, steps + 1):
        t = t0 + (math.pi - t0) * k / steps
        rad = r0 + (kappa / 2 - r0) * k / steps
        q = cmath.rect(rad, t)
        pushes.append(disk_push(p, q - p, 3.0))
        p = q

    def chi(z):
        z = push_inf(z)
        for h in pushes:
            z = h(z)
        return z

    return chi, kappa, s


def bicycle_map(eps=1 / 400):
    chi, kappa, s = bicycle_chi(eps)
    g = RationalMap(
        [kappa, 0, -kappa * eps],
        [1, 0, -2 * eps, 0, eps * eps + 1],
    )
    q = math.sqrt(eps)
    w = math.sqrt(1 + eps)
    u = math.sqrt(1 - eps)
    finite = [
        ("0", 0j), ("-q", -q + 0j), ("q", q + 0j),
        ("w1", w + 0j), ("w2", -w + 0j), ("w3", 1j * u), ("w4", -1j * u),
        ("s1", 1j * s), ("s2", -1j * s),
    ]
    return ComposedMap(g, chi, kappa / 2), finite


def order_punctures(finite):
    # position along a far line perpendicular to V, read left to right when
    # facing along V
    def key(item):
        z = item[1]
        return (z * V.conjugate()).imag
    return sorted(finite, key=key)


def crossings(a, b, rays):
    """Letters read along segment a->b."""
    out = []
    d = b - a
    for idx, q in rays:
        # a + s d = q + t V
        m = np.array([[d.real, -V.real], [d.imag, -V.imag]])
        det = np.linalg.det(m)
        if abs(det) < 1e-15:
            continue
        rhs = np.array([(q - a).real, (q - a).imag])
        s, t = np.linalg.solve(m, rhs)
        if 0 <= s < 1 and t >= 0:
            cross = (V.conjugate() * d).imag
            out.append((s, idx if cross > 0 else -idx))
    out.sort()
    return [g for _, g in out]


def reduce_word(w):
    out = []
    for g in w:
        if out and out[-1] == -g:
            out.pop()
        else:
            out.append(g)
    return out


def polyline(points, h0):
    """Dense sampling of a polyline with step at most h0."""
    out = [points[0]]
    for a, b in zip(points, points[1:]):
        k = max(1, int(math.ceil(abs(b - a) / h0)))
        for j in range(1, k + 1):
            out.append(a + (b - a) * j / k)
    return out


def lift(f, path, z0, marked):
    """Lift a dense path starting at z0, refining near marked points."""
    if getattr(f, "chart", None) is not None:
        return lift_charted(f, path, z0, marked)
    zs = [z0]
    z = z0
    for a, b in zip(path, path[1:]):
        dist = min(abs(a - p) for p in marked) if marked else 1.0
        k = max(1, int(math.ceil(abs(b - a) / (0.02 * max(dist, 1e-9)))))
        for j in range(1, k + 1):
            w = a + (b - a) * j / k
            z2 = f.newton(z, w)
            if z2 is None or abs(z2 - z) > 0.25 * max(abs(z), 1e-3) + 0.1:
                raise RuntimeError(f"continuation failed at w={w} z={z}")
            z = z2
            zs.append(z)
    return zs


def lift_charted(f, path, z0, marked):
    """Adaptive continuation: each step moves the chart value by at most
    a small fraction of its distance to the critical values."""
    cm = [f.chart(p) for p in marked] + [f.chi_inf]
    zs = [z0]
    z = z0
    for a, b in zip(path, path[1:]):
        t, h = 0.0, 1.0
        c = f.chart(a)
        while t < 1.0:
            h = min(h, 1.0 - t)
            dist = min(abs(c - p) for p in cm)
            c2 = f.chart(a + (b - a) * (t + h))
            if abs(c2 - c) > 0.02 * dist:
                h /= 2
                if h < 1e-14:
                    raise RuntimeError(f"step underflow near {a}")
                continue
            z2 = f.newton(z, a + (b - a) * (t + h))
            if z2 is None:
                h /= 2
                continue
            t += h
            c, z = c2, z2
            zs.append(z)
            h *= 2
    return zs


def generator_loop(p, base):
    top = complex((p + U * ((base.imag - p.imag) / U.imag)).real, base.imag)
    near = p + U * R_SMALL
    circle = [p + R_SMALL * U * cmath.exp(2j * math.pi * t / 64) for t in range(65)]
    return [base, top, near] + circle + [near, top, base]


def infinity_loop(base):
    # clockwise in the plane is counterclockwise around infinity
    r = abs(base)
    th0 = cmath.phase(base)
    return [r * cmath.exp(1j * (th0 - 2 * math.pi * t / 256)) for t in range(257)]


def word_of(points, rays):
    w = []
    for a, b in zip(points, points[1:]):
        w.extend(crossings(a, b, rays))
    return reduce_word(w)


def recursion(name, f, finite, has_inf=True, height=None):
    height = height or HEIGHT
    ordered = order_punctures(finite)
    names = [nm for nm, _ in ordered] + (["inf"] if has_inf else [])
    rays = [(i + 1, z) for i, (_, z) in enumerate(ordered)]
    marked = [z for _, z in ordered]
    base = complex(0.0, height)
    sheets = sorted(f.preimages(base), key=lambda z: (cmath.phase(z), abs(z)))
    d = len(sheets)
    # connecting paths from base to each sheet
    conn = []
    for s in sheets:
        mid = (base + s) / 2 + 0.37j
        conn.append([base, mid, s])
    gens = {}
    loops = [generator_loop(z, base) for _, z in ordered]
    if has_inf:
        loops.append(infinity_loop(base))
    for gname, loop in zip(names, loops):
        dense = polyline(loop, 0.05)
        perm, rest = [], []
        for i, s in enumerate(sheets):
            zs = lift(f, dense, s, marked)
            end = zs[-1]
            j = min(range(d), key=lambda k: abs(sheets[k] - end))
            if abs(sheets[j] - end) > 1e-6:
                raise RuntimeError("lift did not close on a sheet")
            path = conn[i] + zs + list(reversed(conn[j]))
            perm.append(j + 1)
            rest.append(word_of(path, rays))
        gens[gname] = {"perm": perm, "rest": rest}
    return {"punctures": names, "degree": d, "generators": gens}


def rabbit_c():
    roots = np.roots([1, 2, 1, 1])
    return max(roots, key=lambda z: z.imag)


def maps():
    c = rabbit_c()
    quart = [cmath.rect(0.5, math.pi / 4 + k * math.pi / 2) for k in range(4)]
    lam = 1j / 8
    v = 2 * cmath.sqrt(lam)
    crit = [complex(z) for z in np.roots([1, 0, 0, 0, 0, 0, -lam])]
    return {
        "mcmullen3": (
            RationalMap([1, 0, 0, 0, 0, 0, lam], [1, 0, 0, 0]),
            [("0", 0j), ("v", v), ("-v", -v)] + [(f"c{k + 1}", z) for k, z in enumerate(crit)],
        ),
        "cubic_pf": (RationalMap([-2, 3, 0, 0], [1]), [("0", 0j), ("1", 1 + 0j)]),
        "z2": (RationalMap([1, 0, 0], [1]), [("0", 0j)]),
        "z2_marked": (RationalMap([1, 0, 0], [1]), [("0", 0j), ("1", 1 + 0j), ("-1", -1 + 0j)]),
        "basilica": (RationalMap([1, 0, -1], [1]), [("0", 0j), ("-1", -1 + 0j)]),
        "basilica_marked": (
            RationalMap([1, 0, -1], [1]),
            [("0", 0j), ("-1", -1 + 0j), ("1", 1 + 0j)],
        ),
        "rabbit": (
            RationalMap([1, 0, c], [1]),
            [("0", 0j), ("c", c), ("c2+c", c * c + c)],
        ),
        "z2_plus_i": (
            RationalMap([1, 0, 1j], [1]),
            [("0", 0j), ("i", 1j), ("i-1", -1 + 1j), ("-i", -1j)],
        ),
        "chebyshev": (
            RationalMap([1, 0, -2], [1]),
            [("0", 0j), ("-2", -2 + 0j), ("2", 2 + 0j)],
        ),
        "sierpinski_g": (
            RationalMap([16, 0, 0, 0, -1], [16, 0, 0]),
            [("0", 0j), ("i/2", 0.5j), ("-i/2", -0.5j)]
            + [(f"c{k + 1}", z) for k, z in enumerate(quart)],
        ),
    }


def main():
    out = sys.argv[1]
    table = maps()
    table["bicycle_amalgam"] = bicycle_map()
    wanted = sys.argv[2:] or list(table)
    for name in wanted:
        f, finite = table[name]
        height = 100.0 if name == "bicycle_amalgam" else None
        rec = recursion(name, f, finite, height=height)
        with open(f"{out}/{name}.raw.json", "w") as fh:
            json.dump(rec, fh)
        print(name, "degree", rec["degree"], "punctures", rec["punctures"])


if __name__ == "__main__":
    main()
