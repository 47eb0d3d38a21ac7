"""Contact frames, pyramidal friction cones, contact wrenches and force closure.

A contact on a phalanx is placed by its height ratio ``alpha`` along the link
axis and its angle ``phi`` around it; ``phi = 0`` is the palmar side (+z of
the link frame).  A palm contact sits on the inner face at in-plane offsets
``(ux, uy)`` from the palm centre.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import OutOfBounds
from .kinematics import HandModel, forward_kinematics

BOUND_TOL = 1e-9


@dataclass(frozen=True)
class ContactParam:
    link: int
    alpha: float = 0.0
    phi: float = 0.0
    ux: float = 0.0
    uy: float = 0.0


@dataclass(frozen=True)
class ContactFrame:
    position: np.ndarray
    normal: np.ndarray
    tangent1: np.ndarray
    tangent2: np.ndarray

    @property
    def rotation(self) -> np.ndarray:
        """Columns (t1, t2, n): a right-handed frame with the normal as z."""
        return np.column_stack([self.tangent1, self.tangent2, self.normal])


@dataclass(frozen=True)
class FrictionCone:
    mu: float
    n_edges: int
    edges: np.ndarray  # (n_edges, 3) unit vectors in the hand frame
    axis: np.ndarray


def cylinder_frame(T: np.ndarray, length: float, radius: float, alpha: float, phi: float) -> ContactFrame:
    x, y, z = T[:3, 0], T[:3, 1], T[:3, 2]
    n = np.cos(phi) * z + np.sin(phi) * y
    p = T[:3, 3] + alpha * length * x + radius * n
    return ContactFrame(p, n, x.copy(), np.cross(n, x))


def palm_frame(model: HandModel, ux: float, uy: float) -> ContactFrame:
    t = model.palm.geometry.thickness
    e = np.eye(3)
    return ContactFrame(np.array([ux, uy, 0.5 * t]), e[2].copy(), e[0].copy(), e[1].copy())


def check_bounds(model: HandModel, cp: ContactParam) -> None:
    lk = model.link(cp.link)
    if lk.is_palm:
        g = lk.geometry
        if abs(cp.ux) > 0.5 * g.length + BOUND_TOL or abs(cp.uy) > 0.5 * g.width + BOUND_TOL:
            raise OutOfBounds(f"palm contact ({cp.ux}, {cp.uy}) lies off the palm face")
    else:
        if not (-BOUND_TOL <= cp.alpha <= 1 + BOUND_TOL):
            raise OutOfBounds(f"height ratio {cp.alpha} outside [0, 1]")
        if not (-np.pi - BOUND_TOL < cp.phi <= np.pi + BOUND_TOL):
            raise OutOfBounds(f"angle {cp.phi} outside (-pi, pi]")


def contact_position(model: HandModel, q, cp: ContactParam) -> ContactFrame:
    check_bounds(model, cp)
    lk = model.link(cp.link)
    if lk.is_palm:
        return palm_frame(model, cp.ux, cp.uy)
    T = forward_kinematics(model, q, lk.id)
    return cylinder_frame(T, lk.geometry.length, lk.geometry.radius, cp.alpha, cp.phi)


def pyramid_edges(mu: float, n_edges: int) -> np.ndarray:
    """Unit pyramid edges in local (t1, n, t2) coordinates, one per column.

    The middle row is the cone axis.
    """
    if n_edges < 3:
        raise ValueError("a friction pyramid needs at least three edges")
    if mu < 0:
        raise ValueError("friction coefficient must be non-negative")
    ang = 2 * np.pi * np.arange(1, n_edges + 1) / n_edges
    E = np.vstack([mu * np.cos(ang), np.ones(n_edges), mu * np.sin(ang)])
    return E / np.linalg.norm(E, axis=0)


def friction_cone(mu: float, n_edges: int, frame: ContactFrame) -> FrictionCone:
    E = pyramid_edges(mu, n_edges)
    basis = np.column_stack([frame.tangent1, frame.normal, frame.tangent2])
    return FrictionCone(mu, n_edges, (basis @ E).T, frame.normal.copy())


def primitive_wrenches(frames, center, cones) -> np.ndarray:
    """Stacked primitive wrenches ``[f, (p - o) x f]``, shape (N_c * N_f, 6)."""
    o = np.asarray(center, dtype=float)
    rows = []
    for fr, cone in zip(frames, cones):
        d = fr.position - o
        for f in cone.edges:
            rows.append(np.concatenate([f, np.cross(d, f)]))
    return np.array(rows)


def closure_residual(wrenches, coeffs) -> float:
    """Largest violation of the convex-combination-to-zero conditions."""
    c = np.asarray(coeffs, dtype=float)
    return float(max(np.abs(np.asarray(wrenches).T @ c).max(), abs(c.sum() - 1.0),
                     max(0.0, -c.min())))


def force_closure_feasible(wrenches) -> tuple[bool, np.ndarray | None]:
    """Decide whether the origin lies in the convex hull of the wrenches.

    Returns ``(feasible, coefficients)``; the coefficients are a witness
    (non-negative, summing to one) when feasible and ``None`` otherwise.
    """
    W = np.asarray(wrenches, dtype=float)
    m = W.shape[0]
    A_eq = np.vstack([W.T, np.ones((1, m))])
    b_eq = np.concatenate([np.zeros(W.shape[1]), [1.0]])
    res = linprog(np.zeros(m), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return False, None
    c = np.clip(res.x, 0.0, None)
    c /= c.sum()
    return True, c


def closure_gap(wrenches) -> float:
    """Smallest achievable closure residual over all convex combinations.

    Zero when the origin lies in the hull of the wrenches; otherwise the
    infinity-norm distance a convex combination must leave uncancelled.
    """
    W = np.asarray(wrenches, dtype=float)
    m, k = W.shape
    # variables (c, t): minimise t subject to |W^T c| <= t, sum c = 1, c >= 0
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    ones = np.ones((k, 1))
    A_ub = np.vstack([np.hstack([W.T, -ones]), np.hstack([-W.T, -ones])])
    A_eq = np.concatenate([np.ones(m), [0.0]])[None, :]
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(2 * k), A_eq=A_eq, b_eq=[1.0],
                  bounds=(0, None), method="highs")
    return float(res.x[-1]) if res.status == 0 else float("inf")
