"""Independent recheck of a grasp solution.

Every constraint is recomputed from the persisted decision values with the
plain kinematics, contact and geometry routines, without the optimiser's
anchor bookkeeping or Jacobians.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import (ContactParam, check_bounds, closure_gap, closure_residual,
                      contact_position, friction_cone, primitive_wrenches)
from .errors import OutOfBounds
from .geometry import (point_rectangle_projection, point_segment_distance, sample_cylinder_axis,
                       signed_distance)
from .kinematics import HandModel, active_joints, link_endpoints
from .objects import part_segments
from .reachability import build_reachable_space

REALIZE_TOL = 1e-3  # mm
WITNESS_TOL = 1e-6


@dataclass
class AuditReport:
    violations: dict[str, float]
    witness: bool  # a closure witness exists for the contact wrenches
    realizable: bool
    hull_excess: tuple[float, ...] = ()  # per contact, mm outside the reachable hull
    notes: list[str] = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        return max(self.violations.values())

    def passed(self, tol: float = 1e-6) -> bool:
        return self.max_violation <= tol and self.witness and self.realizable

    def failures(self, tol: float = 1e-6) -> list[str]:
        out = [k for k, v in self.violations.items() if v > tol]
        if not self.witness:
            out.append("closure-witness")
        if not self.realizable:
            out.append("reachability")
        return out


def _samples(a, b, r):
    """Axis samples of a capsule; a sphere (a == b) is its centre."""
    if np.allclose(a, b):
        return a[None, :]
    h = float(np.linalg.norm(b - a))
    return sample_cylinder_axis(h, r, start=a, end=b).points


def _clearance(a1, b1, r1, a2, b2, r2) -> float:
    """Worst sampled clearance between two capsules, negative when too close."""
    bound = r1 + r2
    s1, s2 = _samples(a1, b1, r1), _samples(a2, b2, r2)
    sphere1, sphere2 = len(s1) == 1, len(s2) == 1
    worst = np.inf
    if sphere1 or not sphere2:
        worst = min(worst, float(point_segment_distance(s1, a2, b2).min()) - bound)
    if sphere2 or not sphere1:
        worst = min(worst, float(point_segment_distance(s2, a1, b1).min()) - bound)
    return worst


def _palm_clearance(model: HandModel, a, b, r) -> float:
    g = model.palm.geometry
    e = np.eye(3)
    worst = np.inf
    for p in _samples(a, b, r):
        d = point_rectangle_projection(p, np.zeros(3), e[0], e[1], 0.5 * g.length, 0.5 * g.width)[3]
        worst = min(worst, float(d) - r - 0.5 * g.thickness)
    return worst


def audit_solution(model: HandModel, sol, check_reach: bool = True, grid: int | None = None) -> AuditReport:
    """Recheck bounds, contact, closure, quaternion and collision constraints."""
    s = sol.settings
    q = np.asarray(sol.configuration, dtype=float)
    viol: dict[str, float] = {}
    notes: list[str] = []

    # bounds
    worst = 0.0
    for j in sol.layout_joints:
        lo, hi = model.joints[j].limits
        worst = max(worst, lo - q[j], q[j] - hi)
    params = []
    for link, a, b in sol.contact_params:
        cp = ContactParam(link, alpha=a, phi=b) if not model.links[link].is_palm \
            else ContactParam(link, ux=a, uy=b)
        try:
            check_bounds(model, cp)
        except OutOfBounds as e:
            notes.append(str(e))
            worst = max(worst, 1.0)
        params.append(cp)
    c = np.asarray(sol.center, dtype=float)
    if sol.cuboid is not None:
        box = np.asarray(sol.cuboid, dtype=float)
        worst = max(worst, float(np.max(box[0] - c)), float(np.max(c - box[1])))
    coeffs = np.asarray(sol.coeffs, dtype=float)
    worst = max(worst, float(np.max(-coeffs)), float(np.max(coeffs - 1.0)))
    viol["bounds"] = max(0.0, worst)

    # in-contact
    frames = [contact_position(model, q, cp) for cp in params]
    quat = np.asarray(sol.quaternion, dtype=float)
    obj = sol.object
    segs = part_segments(obj, c, quat)
    ca, cb, cr = segs[obj.contact_index]
    viol["in-contact"] = max(abs(float(point_segment_distance(f.position, ca, cb)) - cr)
                             for f in frames)

    # closure
    cones = [friction_cone(s.mu, s.n_edges, f) for f in frames]
    W = primitive_wrenches(frames, c, cones)
    viol["closure"] = closure_residual(W, coeffs)
    # a witness within the feasibility tolerance, found without the stored coefficients
    witness = closure_gap(W) <= WITNESS_TOL

    viol["quaternion"] = abs(float(quat @ quat) - 1.0)

    # collisions
    moving = {lk.id for lk in model.links
              if any(j in sol.layout_joints for j in active_joints(model, lk.id))}
    ends = {lk.id: link_endpoints(model, q, lk.id) for lk in model.links if not lk.is_palm}
    held = []
    for h in sol.held:
        held += part_segments(h)
    lo_ = [0.0]
    for lk in model.links:
        for a, b, r in segs:
            if lk.is_palm:
                lo_.append(-_palm_clearance(model, a, b, r))
            else:
                la, lb = ends[lk.id]
                lo_.append(-_clearance(la, lb, lk.radius, a, b, r))
    for lid in sorted(moving):
        if model.links[lid].is_palm:
            continue
        la, lb = ends[lid]
        for a, b, r in held:
            lo_.append(-_clearance(la, lb, model.links[lid].radius, a, b, r))
    viol["link-object"] = max(lo_)

    ll = [0.0]
    for i, j in sol.collision_pairs:
        if model.links[i].is_palm or model.links[j].is_palm:
            k = j if model.links[i].is_palm else i
            la, lb = ends[k]
            ll.append(-_palm_clearance(model, la, lb, model.links[k].radius))
        else:
            (ai, bi), (aj, bj) = ends[i], ends[j]
            ll.append(-_clearance(ai, bi, model.links[i].radius, aj, bj, model.links[j].radius))
    viol["link-link"] = max(ll)

    oo = [0.0]
    for a, b, r in segs:
        for ha, hb, hr in held:
            oo.append(-_clearance(a, b, r, ha, hb, hr))
    viol["object-object"] = max(oo)

    # realizability: the axis point under each contact lies in its reachable hull
    excess = []
    realizable = True
    if check_reach:
        fixed = {j: float(q[j]) for j in range(model.n_joints) if j not in set(sol.free)}
        for cp, f in zip(params, frames):
            lk = model.links[cp.link]
            kw = {} if grid is None else {"grid": grid}
            space = build_reachable_space(model, fixed, cp.link, **kw)
            foot = f.position if lk.is_palm else f.position - lk.radius * f.normal
            e = max(0.0, signed_distance(space.hull, foot))
            excess.append(e)
            if e > space.slack + REALIZE_TOL:
                realizable = False
                notes.append(f"contact on {lk.name} lies {e:.4g} mm outside its reachable hull")
    return AuditReport(viol, bool(witness), realizable, tuple(excess), notes)


def audit_scene(model: HandModel, q, objects) -> dict[str, float]:
    """Joint recheck of a final hand pose against every held object.

    Returns the worst link-object and object-object penetration, zero when
    everything is clear.
    """
    q = np.asarray(q, dtype=float)
    segs = [part_segments(o) for o in objects]
    lo, oo = [0.0], [0.0]
    for lk in model.links:
        ends = None if lk.is_palm else link_endpoints(model, q, lk.id)
        for parts in segs:
            for a, b, r in parts:
                if ends is None:
                    lo.append(-_palm_clearance(model, a, b, r))
                else:
                    lo.append(-_clearance(*ends, lk.radius, a, b, r))
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            for a, b, r in segs[i]:
                for c, d, s in segs[j]:
                    oo.append(-_clearance(a, b, r, c, d, s))
    return {"link-object": max(lo), "object-object": max(oo)}
