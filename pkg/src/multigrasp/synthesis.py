"""Two-contact grasp synthesis as a constrained nonlinear program.

The decision vector stacks, in order: the free active joints of the two
opposition-space links, the contact parameters of each contact (``alpha,
phi`` on a phalanx, ``ux, uy`` on the palm), the object centre, the object
quaternion ``(w, x, y, z)`` and the closure coefficients, ``n_edges`` per
contact.

Every constraint is written as ``g(x) >= 0`` or ``h(x) = 0`` with an analytic
Jacobian.  Collision geometry is capsule based: a phalanx is its axis segment
inflated by its radius, a cylinder part is its axis inflated by its radius
(rounded ends), a sphere is its centre inflated by its radius and the palm is
its mid-plane rectangle inflated by half its thickness.  Segments are sampled
at ``max(3, ceil(h / r))`` points and each sample is kept clear of the other
body's segment, in both directions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .contact import pyramid_edges
from .errors import Infeasible, NoFeasibleGrasp, NoFreeJoints, NotPermissive
from .geometry import sample_count
from .kinematics import HandModel, active_joints, joint_frames, skew
from .objects import ObjectModel, Sphere, quat_matrix, quat_matrix_grad
from .reachability import (OppositionSpace, ReachabilityMap, is_geometrically_permissive,
                           min_grasp_distance)
from .seeding import derive_seed

EPS = 1e-12
FEAS_TOL = 1e-6
N_CONTACTS = 2
RELAXED_ITER = 100


def cross(a, b) -> np.ndarray:
    """Cross product over the last axis; cheaper than ``np.cross`` for small arrays."""
    a, b = np.asarray(a), np.asarray(b)
    return np.stack([a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
                     a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
                     a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]], axis=-1)


@dataclass(frozen=True)
class GraspSettings:
    mu: float = 0.5
    n_edges: int = 3
    lam: float = 0.5
    q_weights: tuple[float, ...] = (10.0, 50.0, 25.0, 10.0)
    mode: str = "single"  # "single" or "ke"
    gravity: tuple[float, float, float] = (0.0, 0.0, -1.0)
    restarts: int = 8
    max_iter: int = 300
    feas_tol: float = FEAS_TOL
    kappa_override: float | None = None

    def __post_init__(self):
        if self.mode not in ("single", "ke"):
            raise ValueError(f"unknown objective mode {self.mode!r}")


@dataclass(frozen=True)
class ContactSlot:
    link: int
    palm: bool
    cols: tuple[int, int]  # (alpha, phi) or (ux, uy)


@dataclass(frozen=True)
class Layout:
    joints: tuple[int, ...]
    contacts: tuple[ContactSlot, ContactSlot]
    center: slice
    quat: slice
    coeffs: slice
    size: int


def make_layout(model: HandModel, links, free) -> Layout:
    free = set(free)
    joints: list[int] = []
    for lk in links:
        for j in active_joints(model, lk):
            if j in free and j not in joints:
                joints.append(j)
    col = len(joints)
    slots = []
    for lk in links:
        slots.append(ContactSlot(lk, model.links[lk].is_palm, (col, col + 1)))
        col += 2
    center = slice(col, col + 3)
    quat = slice(col + 3, col + 7)
    return Layout(tuple(joints), tuple(slots), center, quat, slice(col + 7, None), 0)


# --- capsule bookkeeping ------------------------------------------------------

@dataclass(frozen=True)
class Body:
    """A rigid carrier of anchor points: a link, the grasped object or the world."""
    kind: str  # "link", "object", "world"
    link: int = -1


@dataclass(frozen=True)
class Capsule:
    body: Body
    a: tuple  # local end points (equal for a sphere)
    b: tuple
    radius: float
    samples: int  # 1 for spheres

    @property
    def is_point(self) -> bool:
        return self.samples == 1


def link_capsule(model: HandModel, lid: int) -> Capsule:
    g = model.links[lid].geometry
    return Capsule(Body("link", lid), (0.0, 0.0, 0.0), (g.length, 0.0, 0.0), g.radius,
                   sample_count(g.length, g.radius))


def part_capsule(obj: ObjectModel, k: int, body: Body, center=None, quat=None) -> Capsule:
    """Capsule of object part ``k``; world-frame coordinates when ``center`` is given."""
    part = obj.parts[k]
    off = np.asarray(part.offset, dtype=float)
    if isinstance(part.shape, Sphere):
        a = b = off
        n = 1
    else:
        half = np.array([0.0, 0.0, 0.5 * part.shape.height])
        a, b = off - half, off + half
        n = sample_count(part.shape.height, part.shape.radius)
    if center is not None:
        R = quat_matrix(quat)
        a, b = center + R @ a, center + R @ b
    return Capsule(body, tuple(map(float, a)), tuple(map(float, b)), part.shape.radius, n)


def sample_fractions(n: int) -> np.ndarray:
    return np.zeros(1) if n == 1 else np.linspace(0.0, 1.0, n)


def capsule_terms(A: Capsule, B: Capsule, extra: float = 0.0):
    """Point-versus-segment clearance terms between two capsules.

    Yields ``(point capsule, fraction, segment capsule, bound)``.  A sphere
    needs only its centre against the other segment; two segments are
    sampled against each other in both directions.
    """
    bound = A.radius + B.radius + extra
    if A.is_point:
        yield A, 0.0, B, bound
        return
    if B.is_point:
        yield B, 0.0, A, bound
        return
    for s in sample_fractions(A.samples):
        yield A, float(s), B, bound
    for s in sample_fractions(B.samples):
        yield B, float(s), A, bound


def palm_terms(model: HandModel, C: Capsule):
    """Clearance of a capsule's samples from the palm slab."""
    bound = C.radius + 0.5 * model.palm.geometry.thickness
    for s in sample_fractions(C.samples):
        yield C, float(s), bound


# --- the problem --------------------------------------------------------------

@dataclass
class _State:
    x: np.ndarray
    q: np.ndarray
    jo: np.ndarray  # joint origins (N_j, 3)
    ja: np.ndarray  # joint axes (N_j, 3)
    link_T: dict
    R: np.ndarray
    dR: np.ndarray
    P: np.ndarray  # anchor positions
    JP: np.ndarray  # anchor Jacobians
    contacts: list  # per contact: dict of p, n, t1, t2 and Jacobians


class GraspProblem:
    """Assembled constraint set and objective for one object in one opposition space."""

    def __init__(self, model: HandModel, q_base, free, os: OppositionSpace, obj: ObjectModel,
                 grasped=(), collision_pairs=(), cuboid=None, settings: GraspSettings | None = None,
                 check_permissive: bool = True):
        self.model = model
        self.settings = settings or GraspSettings()
        self.os = os
        self.obj = obj
        self.grasped = tuple(grasped)
        self.q_base = np.asarray(q_base, dtype=float).copy()
        self.free = frozenset(free)
        s = self.settings

        if check_permissive:
            d = min_grasp_distance(obj, s.mu)
            if not is_geometrically_permissive(os, d):
                raise NotPermissive(f"opposition space {os.links} cannot host d={d:.4f} mm")

        lay = make_layout(model, os.links, self.free)
        if not lay.joints:
            raise NoFreeJoints(f"no free joint drives links {os.links}")
        nc = N_CONTACTS * s.n_edges
        size = lay.coeffs.start + nc
        self.layout = lay = replace(lay, coeffs=slice(lay.coeffs.start, size), size=size)
        self.n = size
        self.joint_col = {j: k for k, j in enumerate(lay.joints)}

        # bodies that move with the decision vector
        self.link_cols = {}
        for lk in model.links:
            cols = [(self.joint_col[j], j) for j in active_joints(model, lk.id) if j in self.joint_col]
            if cols:
                self.link_cols[lk.id] = cols
        self.moving = sorted(self.link_cols)

        if cuboid is None:
            raise ValueError("object-centre cuboid is required")
        self.cuboid = np.asarray(cuboid, dtype=float)
        self.lower, self.upper = self._bounds()

        self.edges = pyramid_edges(s.mu, s.n_edges)
        self.g = np.asarray(s.gravity, dtype=float)
        w = np.asarray(s.q_weights, dtype=float)
        self.qw = np.array([w[min(model.joints[j].slot, len(w) - 1)] for j in lay.joints])
        self.rest = np.array([model.joints[j].rest_angle for j in lay.joints])
        self.n_q = sum(len([j for j in active_joints(model, lk) if j in self.free])
                       for lk in os.links)

        self.collision_pairs = tuple(sorted(
            (min(a, b), max(a, b)) for a, b in collision_pairs
            if (a in self.link_cols or b in self.link_cols) and not model.adjacent(a, b)))
        self._build_terms()
        self._cache_key = None
        self._cache = None

    # --- layout helpers ---------------------------------------------------

    def _bounds(self):
        lay, m = self.layout, self.model
        lo, hi = np.empty(self.n), np.empty(self.n)
        for k, j in enumerate(lay.joints):
            lo[k], hi[k] = m.joints[j].limits
        g = m.palm.geometry
        for slot in lay.contacts:
            a, b = slot.cols
            if slot.palm:
                lo[a], hi[a] = -0.5 * g.length, 0.5 * g.length
                lo[b], hi[b] = -0.5 * g.width, 0.5 * g.width
            else:
                lo[a], hi[a] = 0.0, 1.0
                # the angle is periodic; a wider box keeps the bound from trapping it
                lo[b], hi[b] = -2 * math.pi, 2 * math.pi
        lo[lay.center], hi[lay.center] = self.cuboid[0], self.cuboid[1]
        lo[lay.quat], hi[lay.quat] = -1.0, 1.0
        lo[lay.coeffs], hi[lay.coeffs] = 0.0, 1.0
        return lo, hi

    def full_configuration(self, x) -> np.ndarray:
        q = self.q_base.copy()
        q[list(self.layout.joints)] = x[: len(self.layout.joints)]
        return q

    # --- term assembly ----------------------------------------------------

    def _build_terms(self):
        m, obj = self.model, self.obj
        world = Body("world")
        objb = Body("object")
        anchors: list[tuple[Body, tuple]] = []
        index: dict = {}

        def anchor(body, local) -> int:
            key = (body, tuple(round(float(v), 12) for v in local))
            if key not in index:
                index[key] = len(anchors)
                anchors.append((body, tuple(float(v) for v in local)))
            return index[key]

        def lerp(C: Capsule, s):
            a, b = np.asarray(C.a), np.asarray(C.b)
            return a + s * (b - a)

        seg_terms, palm_terms_ = [], []
        self.term_groups: list[str] = []
        palm_group: list[str] = []

        def add_pair(A: Capsule, B: Capsule, group):
            for P, s, S, bound in capsule_terms(A, B):
                seg_terms.append((anchor(P.body, lerp(P, s)), anchor(S.body, S.a),
                                  anchor(S.body, S.b), bound))
                self.term_groups.append(group)

        def add_palm(C: Capsule, group):
            for P, s, bound in palm_terms(m, C):
                palm_terms_.append((anchor(P.body, lerp(P, s)), bound))
                palm_group.append(group)

        link_caps = {lk.id: link_capsule(m, lk.id) for lk in m.links if not lk.is_palm}
        obj_caps = [part_capsule(obj, k, objb) for k in range(len(obj.parts))]
        held_caps = []
        for h in self.grasped:
            held_caps += [part_capsule(h, k, world, h.center, h.quaternion) for k in range(len(h.parts))]

        for lk in m.links:
            for C in obj_caps:
                if lk.is_palm:
                    add_palm(C, "link-object")
                else:
                    add_pair(link_caps[lk.id], C, "link-object")
        for a, b in self.collision_pairs:
            if m.links[a].is_palm or m.links[b].is_palm:
                add_palm(link_caps[b if m.links[a].is_palm else a], "link-link")
            else:
                add_pair(link_caps[a], link_caps[b], "link-link")
        for H in held_caps:
            for C in obj_caps:
                add_pair(C, H, "object-object")
            for lid in self.moving:
                add_pair(link_caps[lid], H, "link-object")

        # contact primitive axis, for the in-contact equalities
        cp = part_capsule(obj, obj.contact_index, objb)
        self.contact_axis = (anchor(objb, cp.a), anchor(objb, cp.b))
        self.contact_radius = cp.radius

        self.anchors = anchors
        self.term_groups += palm_group
        groups: dict[tuple, list] = {}
        for k, (body, local) in enumerate(anchors):
            groups.setdefault(body, []).append((k, local))
        self.anchor_groups = {b: (np.array([k for k, _ in v]), np.array([l for _, l in v]))
                              for b, v in groups.items()}
        st = np.array(seg_terms, dtype=float).reshape(-1, 4)
        self.seg_p, self.seg_a, self.seg_b = (st[:, k].astype(int) for k in range(3))
        self.seg_bound = st[:, 3]
        pt = np.array(palm_terms_, dtype=float).reshape(-1, 2)
        self.palm_p = pt[:, 0].astype(int)
        self.palm_bound = pt[:, 1]
        self.n_ineq = len(self.seg_bound) + len(self.palm_bound)
        self.n_eq = N_CONTACTS + 6 + 1 + 1

    # --- evaluation -------------------------------------------------------

    def _state(self, x) -> _State:
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key == self._cache_key:
            return self._cache
        lay, m, n = self.layout, self.model, self.n
        q = self.full_configuration(x)
        jf = joint_frames(m, q)
        jo = jf[:, :3, 3]
        ja = np.einsum("jab,jb->ja", jf[:, :3, :3], np.array([j.axis for j in m.joints]))
        link_T = {lk.id: (np.eye(4) if lk.is_palm else jf[lk.parent_joint] @ lk.local_frame)
                  for lk in m.links}
        qv = x[lay.quat]
        R, dR = quat_matrix(qv), quat_matrix_grad(qv)
        c = x[lay.center]

        K = len(self.anchors)
        P = np.empty((K, 3))
        JP = np.zeros((K, 3, n))
        for body, (idx, local) in self.anchor_groups.items():
            if body.kind == "link":
                T = link_T[body.link]
                pts = T[:3, 3] + local @ T[:3, :3].T
                cols, js = self._col_index(body.link)
                if cols:
                    JP[np.ix_(idx, range(3), cols)] = cross(
                        ja[js][None], pts[:, None, :] - jo[js][None]).transpose(0, 2, 1)
            elif body.kind == "object":
                pts = c + local @ R.T
                JP[idx, :, lay.center] = np.eye(3)
                for k in range(4):
                    JP[idx, :, lay.quat.start + k] = local @ dR[k].T
            else:
                pts = local
            P[idx] = pts

        contacts = [self._contact(slot, x, link_T, jo, ja) for slot in lay.contacts]
        st = _State(x.copy(), q, jo, ja, link_T, R, dR, P, JP, contacts)
        self._cache_key, self._cache = key, st
        return st

    def _col_index(self, link: int):
        pairs = self.link_cols.get(link, ())
        return [c for c, _ in pairs], [j for _, j in pairs]

    def _contact(self, slot: ContactSlot, x, link_T, jo, ja) -> dict:
        n = self.n
        Jp, Jn, Jt1, Jt2 = (np.zeros((3, n)) for _ in range(4))
        a, b = x[slot.cols[0]], x[slot.cols[1]]
        if slot.palm:
            t = self.model.palm.geometry.thickness
            p = np.array([a, b, 0.5 * t])
            nrm, t1, t2 = np.eye(3)[2], np.eye(3)[0], np.eye(3)[1]
            Jp[0, slot.cols[0]] = 1.0
            Jp[1, slot.cols[1]] = 1.0
        else:
            lk = self.model.links[slot.link]
            L, rho = lk.geometry.length, lk.geometry.radius
            T = link_T[slot.link]
            ex, ey, ez = T[:3, 0], T[:3, 1], T[:3, 2]
            nrm = math.cos(b) * ez + math.sin(b) * ey
            dn = -math.sin(b) * ez + math.cos(b) * ey
            p = T[:3, 3] + a * L * ex + rho * nrm
            t1, t2 = ex, cross(nrm, ex)
            cols, js = self._col_index(slot.link)
            if cols:
                A = ja[js]
                Jp[:, cols] = cross(A, p - jo[js]).T
                Jn[:, cols] = cross(A, nrm).T
                Jt1[:, cols] = cross(A, t1).T
                Jt2[:, cols] = cross(A, t2).T
            Jp[:, slot.cols[0]] = L * ex
            Jp[:, slot.cols[1]] = rho * dn
            Jn[:, slot.cols[1]] = dn
            Jt2[:, slot.cols[1]] = cross(dn, ex)
        return dict(p=p, n=nrm, t1=t1, t2=t2, Jp=Jp, Jn=Jn, Jt1=Jt1, Jt2=Jt2)

    # distances --------------------------------------------------------------

    def _seg_distances(self, st: _State):
        P, JP = st.P, st.JP
        p, a, b = P[self.seg_p], P[self.seg_a], P[self.seg_b]
        ab = b - a
        den = np.einsum("ki,ki->k", ab, ab)
        safe = np.where(den > 0, den, 1.0)
        t = np.where(den > 0, np.einsum("ki,ki->k", p - a, ab) / safe, 0.0)
        t = np.clip(t, 0.0, 1.0)
        diff = p - (a + t[:, None] * ab)
        d = np.linalg.norm(diff, axis=1)
        u = diff / np.maximum(d, EPS)[:, None]
        J = JP[self.seg_p] - (1 - t)[:, None, None] * JP[self.seg_a] - t[:, None, None] * JP[self.seg_b]
        return d, np.einsum("ki,kin->kn", u, J)

    def _palm_distances(self, st: _State):
        g = self.model.palm.geometry
        p = st.P[self.palm_p]
        dx = np.sign(p[:, 0]) * np.maximum(np.abs(p[:, 0]) - 0.5 * g.length, 0.0)
        dy = np.sign(p[:, 1]) * np.maximum(np.abs(p[:, 1]) - 0.5 * g.width, 0.0)
        vec = np.column_stack([dx, dy, p[:, 2]])
        d = np.linalg.norm(vec, axis=1)
        u = vec / np.maximum(d, EPS)[:, None]
        return d, np.einsum("ki,kin->kn", u, st.JP[self.palm_p])

    def ineq(self, x) -> np.ndarray:
        return self._ineq(x)[0]

    def ineq_jac(self, x) -> np.ndarray:
        return self._ineq(x)[1]

    def _ineq(self, x):
        st = self._state(x)
        d1, J1 = self._seg_distances(st)
        d2, J2 = self._palm_distances(st)
        return (np.concatenate([d1 - self.seg_bound, d2 - self.palm_bound]),
                np.vstack([J1, J2]).reshape(-1, self.n))

    # equalities ---------------------------------------------------------------

    def _eq(self, x):
        st = self._state(x)
        lay, n = self.layout, self.n
        vals, rows = [], []

        # in-contact: each contact point lies on the contact primitive surface
        ia, ib = self.contact_axis
        A, B, JA, JB = st.P[ia], st.P[ib], st.JP[ia], st.JP[ib]
        for ct in st.contacts:
            ab = B - A
            den = ab @ ab
            t = float(np.clip((ct["p"] - A) @ ab / den, 0.0, 1.0)) if den > 0 else 0.0
            diff = ct["p"] - (A + t * ab)
            d = float(np.linalg.norm(diff))
            u = diff / max(d, EPS)
            vals.append(d - self.contact_radius)
            rows.append(u @ (ct["Jp"] - (1 - t) * JA - t * JB))

        # closure: convex combination of the primitive wrenches vanishes
        c = x[lay.coeffs]
        E = self.edges
        o = x[lay.center]
        Jo = np.zeros((3, n))
        Jo[:, lay.center] = np.eye(3)
        F_tot = np.zeros(3)
        JF_tot = np.zeros((3, n))
        T_tot = np.zeros(3)
        JT_tot = np.zeros((3, n))
        nf = self.settings.n_edges
        for i, ct in enumerate(st.contacts):
            ci = c[i * nf:(i + 1) * nf]
            f = np.outer(ct["t1"], E[0]) + np.outer(ct["n"], E[1]) + np.outer(ct["t2"], E[2])  # (3, nf)
            Fi = f @ ci
            w = E @ ci  # (t1, n, t2) components of the contact force
            JFi = w[0] * ct["Jt1"] + w[1] * ct["Jn"] + w[2] * ct["Jt2"]
            cols = lay.coeffs.start + i * nf + np.arange(nf)
            JFi[:, cols] += f
            d = ct["p"] - o
            Jd = ct["Jp"] - Jo
            T_tot += cross(d, Fi)
            JT_tot += -skew(Fi) @ Jd + skew(d) @ JFi
            F_tot += Fi
            JF_tot += JFi
        vals += list(F_tot) + list(T_tot)
        rows += list(JF_tot) + list(JT_tot)

        row = np.zeros(n)
        row[lay.coeffs] = 1.0
        vals.append(c.sum() - 1.0)
        rows.append(row)

        qv = x[lay.quat]
        row = np.zeros(n)
        row[lay.quat] = 2 * qv
        vals.append(qv @ qv - 1.0)
        rows.append(row)
        return np.array(vals), np.array(rows)

    def eq(self, x) -> np.ndarray:
        return self._eq(x)[0]

    def eq_jac(self, x) -> np.ndarray:
        return self._eq(x)[1]

    # objective ------------------------------------------------------------------

    def costs(self, x) -> dict:
        """Cost terms and their gradients at ``x``."""
        st = self._state(x)
        lay, n = self.layout, self.n
        c1, c2 = st.contacts
        v = c2["p"] - c1["p"]
        Jv = c2["Jp"] - c1["Jp"]

        def angle(ct, w, Jw):
            s_vec = cross(ct["n"], w)
            Js = cross(ct["Jn"].T, w).T + cross(ct["n"], Jw.T).T
            s = math.sqrt(s_vec @ s_vec + EPS)
            ds = s_vec @ Js / s
            cc = ct["n"] @ w
            dc = w @ ct["Jn"] + ct["n"] @ Jw
            return math.atan2(s, cc), (cc * ds - s * dc) / (s * s + cc * cc)

        a1, g1 = angle(c1, v, Jv)
        a2, g2 = angle(c2, -v, -Jv)
        Cf, gCf = a1 + a2, g1 + g2

        Jo = np.zeros((3, n))
        Jo[:, lay.center] = np.eye(3)
        lever = 2 * x[lay.center] - c1["p"] - c2["p"]
        Jlever = 2 * Jo - c1["Jp"] - c2["Jp"]
        w = cross(lever, -self.g)
        Jw = cross(Jlever.T, -self.g).T
        Ct = math.sqrt(w @ w + EPS)
        gCt = w @ Jw / Ct

        k = len(lay.joints)
        dth = x[:k] - self.rest
        Cq = float(np.sum(self.qw * dth * dth))
        gCq = np.zeros(n)
        gCq[:k] = 2 * self.qw * dth

        dist = math.sqrt(v @ v + EPS)
        eta = self.os.cap_max / dist
        geta = -self.os.cap_max / dist ** 3 * (v @ Jv)
        return dict(C_f=Cf, C_t=Ct, C_q=Cq, eta=eta, grad_C_f=gCf, grad_C_t=gCt,
                    grad_C_q=gCq, grad_eta=geta, distance=dist)

    def log_kappa_base(self) -> float:
        return float(N_CONTACTS + self.n_q)

    def objective_parts(self, x):
        """Objective value, its gradient and the scale used internally.

        In KE mode the solver sees the objective divided by the constant
        ``exp(N_c + N_q)``; the reported value is the unscaled one.
        """
        s = self.settings
        cs = self.costs(x)
        lam = s.lam
        quality = cs["C_f"] + cs["C_t"]
        gq = cs["grad_C_f"] + cs["grad_C_t"]
        if s.mode == "single":
            return lam * quality + (1 - lam) * cs["C_q"], lam * gq + (1 - lam) * cs["grad_C_q"], 1.0, cs
        if s.kappa_override is not None:
            kappa = float(s.kappa_override)
            return (lam * kappa * quality + (1 - lam) * cs["C_q"],
                    lam * kappa * gq + (1 - lam) * cs["grad_C_q"], 1.0, cs)
        scale = math.exp(-self.log_kappa_base())
        e = math.exp(cs["eta"])
        val = lam * e * quality + (1 - lam) * cs["C_q"] * scale
        grad = lam * e * (gq + quality * cs["grad_eta"]) + (1 - lam) * cs["grad_C_q"] * scale
        return val, grad, scale, cs

    def objective(self, x) -> float:
        val, _, scale, _ = self.objective_parts(x)
        return val / scale

    def objective_grad(self, x) -> np.ndarray:
        _, grad, scale, _ = self.objective_parts(x)
        return grad / scale

    def wrenches(self, x) -> np.ndarray:
        """Primitive contact wrenches at ``x``, shape (N_c * N_f, 6)."""
        st = self._state(x)
        o = np.asarray(x, dtype=float)[self.layout.center]
        rows = []
        for ct in st.contacts:
            f = np.outer(ct["t1"], self.edges[0]) + np.outer(ct["n"], self.edges[1]) \
                + np.outer(ct["t2"], self.edges[2])
            for k in range(f.shape[1]):
                rows.append(np.concatenate([f[:, k], cross(ct["p"] - o, f[:, k])]))
        return np.array(rows)

    def kappa(self, x) -> float:
        return math.exp(self.log_kappa_base() + self.costs(x)["eta"])

    # violation ------------------------------------------------------------------

    def violations(self, x) -> dict[str, float]:
        x = np.asarray(x, dtype=float)
        out = {"bounds": float(max(0.0, np.max(self.lower - x), np.max(x - self.upper)))}
        h = self.eq(x)
        out["in-contact"] = float(np.abs(h[:N_CONTACTS]).max())
        out["closure"] = float(np.abs(h[N_CONTACTS:N_CONTACTS + 7]).max())
        out["quaternion"] = float(abs(h[-1]))
        g = self.ineq(x)
        for name in ("link-object", "link-link", "object-object"):
            mask = np.array([t == name for t in self.term_groups], dtype=bool)
            out[name] = float(max(0.0, -g[mask].min())) if mask.any() else 0.0
        return out

    def max_violation(self, x) -> float:
        return max(self.violations(x).values())

    # initial points --------------------------------------------------------------

    def initial_point(self, rng) -> np.ndarray:
        lay = self.layout
        x = np.empty(self.n)
        x[: len(lay.joints)] = np.clip(self.rest, self.lower[: len(lay.joints)],
                                       self.upper[: len(lay.joints)])
        for slot in lay.contacts:
            a, b = slot.cols
            x[a] = rng.uniform(self.lower[a], self.upper[a])
            x[b] = rng.uniform(self.lower[b], self.upper[b]) if slot.palm else rng.uniform(-math.pi, math.pi)
        x[lay.center] = rng.uniform(self.cuboid[0], self.cuboid[1])
        qv = rng.normal(size=4)
        x[lay.quat] = qv / np.linalg.norm(qv)
        x[lay.coeffs] = 1.0 / (N_CONTACTS * self.settings.n_edges)
        return x

    def random_box_point(self, rng) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


# --- solving ---------------------------------------------------------------------

@dataclass
class GraspSolution:
    os: tuple[int, int]
    cap_max: float
    object: ObjectModel
    x: np.ndarray
    layout_joints: tuple[int, ...]
    configuration: np.ndarray  # full hand configuration after the grasp
    contact_params: tuple[tuple[int, float, float], ...]  # (link, a, b)
    center: np.ndarray
    quaternion: np.ndarray
    coeffs: np.ndarray
    objective: float
    costs: dict
    kappa: float
    eta: float
    n_q: int
    violation: float
    violations: dict
    contact_points: np.ndarray
    contact_normals: np.ndarray
    consumed: tuple[int, ...]
    settings: GraspSettings
    collision_pairs: tuple = ()
    cuboid: np.ndarray | None = None
    held: tuple = ()
    restarts: int = 0
    iterations: int = 0
    feasible_restarts: int = 0
    free: tuple[int, ...] = ()  # joints that were free when the grasp was solved

    @property
    def contact_distance(self) -> float:
        return float(np.linalg.norm(self.contact_points[1] - self.contact_points[0]))

    @property
    def posed_object(self) -> ObjectModel:
        return self.object.posed(self.center, self.quaternion)


def _slsqp(*args, **kw):
    # SLSQP clips line-search steps to the bounds on its own; the notice is noise
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)
        return minimize(*args, method="SLSQP", **kw)


def _run_slsqp(problem: GraspProblem, x0, max_iter: int, ftol: float):
    return _slsqp(
        lambda z: problem.objective_parts(z)[0], x0,
        jac=lambda z: problem.objective_parts(z)[1],
        bounds=list(zip(problem.lower, problem.upper)),
        constraints=[{"type": "eq", "fun": problem.eq, "jac": problem.eq_jac},
                     {"type": "ineq", "fun": problem.ineq, "jac": problem.ineq_jac}],
        options={"maxiter": max_iter, "ftol": ftol},
    )


def _normalize(problem: GraspProblem, x) -> np.ndarray:
    x = np.clip(np.asarray(x, dtype=float), problem.lower, problem.upper)
    return x


def _seek_feasibility(problem: GraspProblem, x0, max_iter: int, relaxed: bool = False):
    """First phase: drive the contact and closure residuals to zero.

    Minimises the squared in-contact, force and torque residuals, the torque
    scaled by the contact radius to match the force, subject to the
    coefficient sum, the quaternion norm and the collision constraints.
    ``relaxed`` drops the link-object clearances so the object can pass
    through the fingers on its way to the contacts.
    """
    k = N_CONTACTS + 6
    w = np.ones(k)
    w[N_CONTACTS + 3:] = 1.0 / problem.contact_radius

    def fun(z):
        h, J = problem._eq(z)
        r = w * h[:k]
        return float(r @ r), 2 * (w * r) @ J[:k]

    if relaxed:
        keep = np.array([g != "link-object" for g in problem.term_groups], dtype=bool)
        ineq = {"type": "ineq", "fun": lambda z: problem.ineq(z)[keep],
                "jac": lambda z: problem.ineq_jac(z)[keep]}
    else:
        ineq = {"type": "ineq", "fun": problem.ineq, "jac": problem.ineq_jac}
    res = _slsqp(fun, x0, jac=True,
                 bounds=list(zip(problem.lower, problem.upper)),
                 constraints=[{"type": "eq", "fun": lambda z: problem.eq(z)[k:],
                               "jac": lambda z: problem.eq_jac(z)[k:]}, ineq],
                 options={"maxiter": max_iter, "ftol": 1e-16})
    return _normalize(problem, res.x), int(res.nit)


def _start_point(problem: GraspProblem, rng, k: int) -> np.ndarray:
    # The first start keeps the hand at rest, later ones scatter the joints.
    x0 = problem.initial_point(rng)
    if k > 0:
        j = len(problem.layout.joints)
        x0[:j] = rng.uniform(problem.lower[:j], problem.upper[:j])
    return x0


def solve(problem: GraspProblem, restarts: int | None = None, seed=0) -> GraspSolution:
    """Multi-start two-phase SLSQP; returns the lowest-objective feasible point."""
    s = problem.settings
    restarts = s.restarts if restarts is None else restarts
    rng = np.random.default_rng(seed)
    best = None
    best_viol = math.inf
    iters = 0
    n_feasible = 0
    for k in range(restarts):
        x0, nit0 = _seek_feasibility(problem, _start_point(problem, rng, k), RELAXED_ITER, True)
        xa, nit = _seek_feasibility(problem, x0, s.max_iter)
        iters += nit0 + nit
        va = problem.max_violation(xa)
        cands = [(va, xa)]
        if va < 1e-2:
            res = _run_slsqp(problem, xa, s.max_iter, 1e-10)
            iters += int(res.nit)
            xb = _normalize(problem, res.x)
            vb = problem.max_violation(xb)
            if vb > s.feas_tol:
                # restore feasibility near the lower-objective point
                xb, nit = _seek_feasibility(problem, xb, s.max_iter)
                iters += nit
                vb = problem.max_violation(xb)
            cands.append((vb, xb))
        ok = [(problem.objective(x), x) for v, x in cands if v <= s.feas_tol]
        best_viol = min(best_viol, min(v for v, _ in cands))
        if ok:
            n_feasible += 1
            val, x = min(ok, key=lambda t: t[0])
            if best is None or val < best[0]:
                best = (val, x)
    if best is None:
        raise Infeasible(f"no feasible grasp in {restarts} restarts for OS {problem.os.links}",
                         best_viol)
    return make_solution(problem, best[1], restarts=restarts, iterations=iters,
                         feasible_restarts=n_feasible)


def wrap_angle(a: float) -> float:
    """Map an angle into (-pi, pi]."""
    return math.pi - (math.pi - a) % (2 * math.pi)


def make_solution(problem: GraspProblem, x, restarts=0, iterations=0, feasible_restarts=0) -> GraspSolution:
    lay = problem.layout
    x = np.array(x, dtype=float)
    for slot in lay.contacts:
        if not slot.palm:
            x[slot.cols[1]] = wrap_angle(x[slot.cols[1]])
    st = problem._state(x)
    cs = problem.costs(x)
    params = tuple((slot.link, float(x[slot.cols[0]]), float(x[slot.cols[1]])) for slot in lay.contacts)
    consumed = set()
    for lk in problem.os.links:
        consumed.update(j for j in active_joints(problem.model, lk) if j in problem.free)
    viols = problem.violations(x)
    qv = x[lay.quat]
    return GraspSolution(
        os=problem.os.links, cap_max=problem.os.cap_max, object=problem.obj, x=np.array(x),
        layout_joints=lay.joints, configuration=problem.full_configuration(x),
        contact_params=params, center=x[lay.center].copy(), quaternion=qv.copy(),
        coeffs=x[lay.coeffs].copy(), objective=problem.objective(x),
        costs={"C_f": cs["C_f"], "C_t": cs["C_t"], "C_q": cs["C_q"]},
        kappa=problem.kappa(x), eta=cs["eta"], n_q=problem.n_q,
        violation=max(viols.values()), violations=viols,
        contact_points=np.array([c["p"] for c in st.contacts]),
        contact_normals=np.array([c["n"] for c in st.contacts]),
        consumed=tuple(sorted(consumed)), settings=problem.settings,
        collision_pairs=problem.collision_pairs, cuboid=problem.cuboid.copy(),
        held=problem.grasped, restarts=restarts, iterations=iterations,
        feasible_restarts=feasible_restarts, free=tuple(sorted(problem.free)))


def os_cuboid(rmap: ReachabilityMap, os: OppositionSpace) -> np.ndarray:
    """Axis-aligned box around the union of the two reachable spaces."""
    a, b = (rmap.space(k).hull.aabb for k in os.links)
    return np.array([np.minimum(a[0], b[0]), np.maximum(a[1], b[1])])


def assemble_problem(model: HandModel, q_base, free, os: OppositionSpace, obj: ObjectModel,
                     rmap: ReachabilityMap, grasped=(), settings: GraspSettings | None = None,
                     check_permissive: bool = True) -> GraspProblem:
    return GraspProblem(model, q_base, free, os, obj, grasped=grasped,
                        collision_pairs=rmap.collision_map.pairs(), cuboid=os_cuboid(rmap, os),
                        settings=settings, check_permissive=check_permissive)


def synthesize_grasp(model: HandModel, q_base, free, obj: ObjectModel, candidates,
                     rmap: ReachabilityMap, grasped=(), settings: GraspSettings | None = None,
                     seed=0, select: str = "objective") -> GraspSolution | None:
    """Solve every candidate opposition space and keep the best feasible grasp.

    ``select="objective"`` keeps the lowest objective, ``select="kappa"`` the
    lowest kinematic-efficiency cost.  Remaining ties go to the candidate with
    the smaller ``cap_max``.  Returns ``None`` when no joint is free.
    """
    if not free:
        return None
    if select not in ("objective", "kappa"):
        raise ValueError(f"unknown selection rule {select!r}")
    settings = settings or GraspSettings()
    found = []
    for k, os in enumerate(candidates):
        try:
            prob = assemble_problem(model, q_base, free, os, obj, rmap, grasped, settings)
            sol = solve(prob, seed=derive_seed(seed, "os", k))
        except (Infeasible, NotPermissive, NoFreeJoints):
            continue
        found.append(sol)
    if not found:
        raise NoFeasibleGrasp(f"no feasible grasp for object {obj.id}")
    if select == "kappa":
        return min(found, key=lambda s: (s.kappa, s.objective, s.cap_max, s.os))
    return min(found, key=lambda s: (s.objective, s.cap_max, s.os))
