"""Computational-geometry kernel: hulls, hull distances and primitive distances.

Hull construction is delegated to qhull through :mod:`scipy.spatial`.  The
minimum distance between two hulls is computed with a GJK iteration on the
vertex sets; it is exact for polytopes up to the termination tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull as _QHull
from scipy.spatial import QhullError
from scipy.spatial.distance import cdist

from .errors import DegenerateInput, NonpositiveDimension

GEOM_TOL = 1e-7  # mm
UNIT_TOL = 1e-9


@dataclass(frozen=True)
class ConvexHull3:
    vertices: np.ndarray  # (k, 3)
    faces: np.ndarray  # (m, 3) indices into vertices, outward winding
    normals: np.ndarray  # (m, 3) outward unit normals, empty when degenerate
    offsets: np.ndarray  # (m,) so that normals @ x + offsets <= 0 inside
    aabb: np.ndarray  # (2, 3) lower and upper corners
    dim: int  # affine dimension of the input
    volume: float = 0.0

    @property
    def degenerate(self) -> bool:
        return self.dim < 3

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)


def _affine_basis(points: np.ndarray):
    center = points.mean(axis=0)
    _, s, vt = np.linalg.svd(points - center, full_matrices=False)
    rms = s / math.sqrt(max(len(points), 1))
    dim = int(np.sum(rms > GEOM_TOL))
    return center, vt, dim


def _degenerate_hull(points: np.ndarray, center, vt, dim) -> ConvexHull3:
    if dim == 0:
        verts = points[:1].copy()
        faces = np.zeros((0, 3), dtype=int)
    elif dim == 1:
        t = (points - center) @ vt[0]
        verts = points[[int(np.argmin(t)), int(np.argmax(t))]].copy()
        faces = np.zeros((0, 3), dtype=int)
    else:
        uv = (points - center) @ vt[:2].T
        h2 = _QHull(uv)
        verts = points[h2.vertices].copy()  # counter-clockwise in the plane
        faces = np.array([[0, i, i + 1] for i in range(1, len(verts) - 1)], dtype=int)
    return ConvexHull3(vertices=verts, faces=faces, normals=np.zeros((0, 3)),
                       offsets=np.zeros(0), aabb=np.array([verts.min(0), verts.max(0)]),
                       dim=dim, volume=0.0)


def convex_hull(points, strict: bool = False) -> ConvexHull3:
    """Convex hull of a 3-D point set.

    Coplanar, collinear or coincident inputs give a flagged lower-dimensional
    hull (``dim < 3``) that supports distance queries only; pass ``strict=True``
    to raise :class:`DegenerateInput` instead.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise DegenerateInput("empty point set")
    center, vt, dim = _affine_basis(pts)
    if dim == 3:
        try:
            qh = _QHull(pts)
        except QhullError:
            dim = 2
    if dim < 3:
        if strict:
            raise DegenerateInput(f"points span only {dim} dimensions")
        return _degenerate_hull(pts, center, vt, dim)

    remap = -np.ones(len(pts), dtype=int)
    remap[qh.vertices] = np.arange(len(qh.vertices))
    verts = pts[qh.vertices]
    faces = remap[qh.simplices]
    normals = qh.equations[:, :3].copy()
    offsets = qh.equations[:, 3].copy()
    # qhull does not orient simplices; make the winding agree with the normal
    tri = verts[faces]
    wound = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = np.einsum("ij,ij->i", wound, normals) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return ConvexHull3(vertices=verts, faces=faces, normals=normals, offsets=offsets,
                       aabb=np.array([verts.min(0), verts.max(0)]), dim=3,
                       volume=float(qh.volume))


# --- GJK ------------------------------------------------------------------

def _closest_on_simplex(S: np.ndarray):
    """Closest point to the origin on conv(S) for up to four points.

    Returns (point, barycentric weights over S).  Enumerates the faces of
    the simplex; adequate for k <= 4.
    """
    k = len(S)
    best = None
    for size in range(1, k + 1):
        for idx in combinations(range(k), size):
            P = S[list(idx)]
            if size == 1:
                lam = np.ones(1)
                x = P[0]
            else:
                D = (P[1:] - P[0]).T
                mu, *_ = np.linalg.lstsq(D, -P[0], rcond=None)
                lam = np.concatenate([[1.0 - mu.sum()], mu])
                if np.any(lam < -1e-12):
                    continue
                x = P[0] + D @ mu
            d2 = float(x @ x)
            if best is None or d2 < best[0] - 1e-15:
                full = np.zeros(k)
                full[list(idx)] = lam
                best = (d2, x, full)
    return best[1], best[2]


def gjk_distance(A, B, tol: float = 1e-10, max_iter: int = 200):
    """Minimum distance between conv(A) and conv(B) for vertex arrays.

    Returns ``(distance, point_on_A, point_on_B)``; distance is 0 when the
    hulls intersect.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    ia, ib = [0], [0]
    W = np.array([A[0] - B[0]])
    v = W[0]
    lam = np.ones(1)
    for _ in range(max_iter):
        vv = float(v @ v)
        if vv <= tol * tol:
            break
        a = int(np.argmax(A @ -v))
        b = int(np.argmax(B @ v))
        w = A[a] - B[b]
        if vv - float(v @ w) <= tol * max(1.0, math.sqrt(vv)):
            break
        if any(a == x and b == y for x, y in zip(ia, ib)):
            break
        ia.append(a)
        ib.append(b)
        W = np.vstack([W, w])
        v, lam = _closest_on_simplex(W)
        keep = lam > 1e-14
        W, lam = W[keep], lam[keep]
        ia = [x for x, k in zip(ia, keep) if k]
        ib = [x for x, k in zip(ib, keep) if k]
        if len(W) == 4:  # origin enclosed by a full simplex
            v = np.zeros(3)
            break
    pa = lam @ A[ia]
    pb = lam @ B[ib]
    dist = float(np.linalg.norm(v))
    if dist <= tol:
        dist = 0.0
    return dist, pa, pb


def hull_distance(A: ConvexHull3, B: ConvexHull3) -> float:
    return gjk_distance(A.vertices, B.vertices)[0]


def hull_pair_extremal_distances(A: ConvexHull3, B: ConvexHull3) -> tuple[float, float]:
    """(min, max) Euclidean distance between a point of A and a point of B."""
    dmin = hull_distance(A, B)
    dmax = float(cdist(A.vertices, B.vertices).max())
    return dmin, dmax


def signed_distance(hull: ConvexHull3, point) -> float:
    """Negative inside (depth to nearest facet), exact distance outside."""
    p = np.asarray(point, dtype=float)
    if hull.dim == 3:
        s = hull.normals @ p + hull.offsets
        worst = float(s.max())
        if worst <= 0.0:
            return worst
    return gjk_distance(hull.vertices, p[None, :])[0]


# --- primitive distances ----------------------------------------------------

def point_segment_distance(p, a, b):
    """Distance from points ``p`` to segment ``ab``; broadcasts over leading axes."""
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    ab = b - a
    den = np.sum(ab * ab, axis=-1)
    t = np.where(den > 0, np.sum((p - a) * ab, axis=-1) / np.where(den > 0, den, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    c = a + t[..., None] * ab
    return np.linalg.norm(p - c, axis=-1)


def segment_segment_distance(p1, q1, p2, q2) -> float:
    """Exact distance between segments p1q1 and p2q2."""
    p1, q1, p2, q2 = (np.asarray(x, dtype=float) for x in (p1, q1, p2, q2))
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    eps = 1e-18
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, float(np.clip(f / e, 0.0, 1.0))
    else:
        c = d1 @ r
        if e <= eps:
            t, s = 0.0, float(np.clip(-c / a, 0.0, 1.0))
        else:
            b = d1 @ d2
            den = a * e - b * b
            # near-parallel segments: any s works, start from 0
            s = float(np.clip((b * f - c * e) / den, 0.0, 1.0)) if den > 1e-12 * a * e else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, float(np.clip(-c / a, 0.0, 1.0))
            elif t > 1.0:
                t, s = 1.0, float(np.clip((b - c) / a, 0.0, 1.0))
    return float(np.linalg.norm((p1 + s * d1) - (p2 + t * d2)))


def point_rectangle_projection(p, center, u, v, half_u, half_v):
    """Express ``p`` in a rectangle's frame.

    Returns ``(x, y, offset, distance)``: in-plane coordinates along ``u`` and
    ``v``, signed offset along ``u x v`` and Euclidean distance to the
    (closed) rectangle.
    """
    p = np.asarray(p, dtype=float)
    d = p - center
    n = np.cross(u, v)
    x, y, off = d @ u, d @ v, d @ n
    dx = np.maximum(np.abs(x) - half_u, 0.0)
    dy = np.maximum(np.abs(y) - half_v, 0.0)
    return x, y, off, np.sqrt(dx * dx + dy * dy + off * off)


# --- sampling ---------------------------------------------------------------

@dataclass(frozen=True)
class SegmentSamples:
    points: np.ndarray
    spacing: float


def sample_count(h: float, r: float) -> int:
    if not (h > 0 and r > 0):
        raise NonpositiveDimension(f"height and radius must be positive (h={h}, r={r})")
    return max(3, math.ceil(h / r - 1e-12))


def sample_cylinder_axis(h: float, r: float, start=None, end=None) -> SegmentSamples:
    """Uniform samples on a cylinder's central axis, endpoints included.

    Defaults to the local z axis centred on the origin.
    """
    n = sample_count(h, r)
    start = np.array([0.0, 0.0, -h / 2]) if start is None else np.asarray(start, dtype=float)
    end = np.array([0.0, 0.0, h / 2]) if end is None else np.asarray(end, dtype=float)
    s = np.linspace(0.0, 1.0, n)
    return SegmentSamples(points=start + s[:, None] * (end - start), spacing=h / (n - 1))


# --- export -----------------------------------------------------------------

def mesh_to_obj(vertices, faces, name: str = "mesh") -> str:
    lines = [f"o {name}"]
    lines += [f"v {x!r} {y!r} {z!r}" for x, y, z in np.asarray(vertices, dtype=float)]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in np.asarray(faces, dtype=int)]
    return "\n".join(lines) + "\n"


def export_obj(hull: ConvexHull3, path, name: str = "hull") -> Path:
    path = Path(path)
    path.write_text(mesh_to_obj(hull.vertices, hull.faces, name))
    return path
