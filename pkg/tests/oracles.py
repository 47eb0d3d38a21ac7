"""Reference computations written independently of the library code."""
import math

import numpy as np
from scipy.optimize import minimize


def in_pyramid(u, t1, n, t2, mu, n_edges, tol=1e-12):
    """Whether ``u`` lies in a regular ``n_edges`` pyramid inscribed in the
    Coulomb cone, one edge along ``t1``."""
    a, h, b = u @ t1, u @ n, u @ t2
    if h <= tol:
        return False
    w = np.array([a, b]) / h
    th = 2 * math.pi * np.arange(n_edges + 1) / n_edges
    V = mu * np.column_stack([np.cos(th), np.sin(th)])
    for k in range(n_edges):
        e, r = V[k + 1] - V[k], w - V[k]
        if e[0] * r[1] - e[1] * r[0] < -tol:
            return False
    return True


def two_contact_closure(p1, frame1, p2, frame2, mu, n_edges):
    """Closed-form two-contact test.

    Two contact forces cancel with zero torque only when they are opposite
    and aligned with the line through the contacts, so the chord direction
    must lie in one cone and its reverse in the other.
    """
    d = np.asarray(p2, float) - np.asarray(p1, float)
    d /= np.linalg.norm(d)
    return any(in_pyramid(s * d, *frame1, mu, n_edges) and in_pyramid(-s * d, *frame2, mu, n_edges)
               for s in (1.0, -1.0))


def fibonacci_sphere(n):
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    th = math.pi * (1 + 5 ** 0.5) * k
    s = np.sqrt(1 - z * z)
    return np.column_stack([s * np.cos(th), s * np.sin(th), z])


def separation(A, B, dirs):
    """Support-function gap ``min_a u.a - max_b u.b`` per direction ``u``."""
    return (A @ dirs.T).min(axis=0) - (B @ dirs.T).max(axis=0)


def hull_distance_bruteforce(A, B, n_dirs=100_000, chunk=20_000):
    """Distance between conv(A) and conv(B) from the separating-axis bound.

    Scans ``n_dirs`` directions, then polishes the best one locally.  The
    bound is exact at the optimum and zero for intersecting hulls.
    """
    A, B = np.asarray(A, float), np.asarray(B, float)
    dirs = fibonacci_sphere(n_dirs)
    best, u0 = -np.inf, None
    for s in range(0, n_dirs, chunk):
        g = separation(A, B, dirs[s:s + chunk])
        k = int(np.argmax(g))
        if g[k] > best:
            best, u0 = float(g[k]), dirs[s + k]
    if best <= 0:
        return 0.0

    u = u0
    for _ in range(6):
        # tangent-plane coordinates around the current best direction
        e1 = np.cross(u, [1.0, 0, 0] if abs(u[0]) < 0.9 else [0, 1.0, 0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(u, e1)

        def neg(v, u=u, e1=e1, e2=e2):
            w = u + v[0] * e1 + v[1] * e2
            return -float(separation(A, B, (w / np.linalg.norm(w))[None, :])[0])

        res = minimize(neg, np.zeros(2), method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-14, "maxiter": 4000,
                                "initial_simplex": [[0, 0], [1e-2, 0], [0, 1e-2]]})
        w = u + res.x[0] * e1 + res.x[1] * e2
        u = w / np.linalg.norm(w)
        best = max(best, -res.fun)
    return max(best, 0.0)
