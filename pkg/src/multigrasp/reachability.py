"""Reachable spaces, opposition spaces and the self-collision map.

Each link's reachable space is the convex hull of its axis end points over a
full factorial grid of its free active joints.  Pairs of reachable spaces
form opposition spaces whose capacity interval says which grasp distances the
pair can span.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations, product
from pathlib import Path

import numpy as np

from .errors import NoPermissiveOS
from .geometry import (ConvexHull3, convex_hull, export_obj, gjk_distance,
                       hull_pair_extremal_distances)
from .kinematics import HandModel, active_joints, batch_link_endpoints

DEFAULT_GRID = 9


@dataclass(frozen=True)
class ReachableSpace:
    link: int
    hull: ConvexHull3
    sample_count: int
    joint_grid: int
    free_joints: tuple[int, ...] = ()
    # Upper bound on how far a posture between grid nodes can leave the hull.
    slack: float = 0.0
    # Body used for collision queries; the palm collides through its mid-plane.
    core: ConvexHull3 | None = None

    @property
    def collision_hull(self) -> ConvexHull3:
        return self.core if self.core is not None else self.hull


@dataclass(frozen=True)
class OppositionSpace:
    links: tuple[int, int]
    cap_min: float
    cap_max: float

    def __post_init__(self):
        i, j = self.links
        if i == j:
            raise ValueError("an opposition space needs two distinct links")
        if i > j:
            object.__setattr__(self, "links", (j, i))

    @property
    def key(self) -> tuple[int, int]:
        return self.links


@dataclass(frozen=True)
class SelfCollisionMap:
    entries: dict[tuple[int, int], float] = field(default_factory=dict)

    def depth(self, a: int, b: int) -> float:
        return self.entries.get((min(a, b), max(a, b)), 0.0)

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (min(a, b), max(a, b)) in self.entries

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.entries)


@dataclass(frozen=True)
class ReachabilityMap:
    spaces: tuple[ReachableSpace, ...]
    os_set: tuple[OppositionSpace, ...]
    collision_map: SelfCollisionMap

    def space(self, link: int) -> ReachableSpace:
        return self.spaces[link]

    def opposition(self, a: int, b: int) -> OppositionSpace:
        key = (min(a, b), max(a, b))
        for os in self.os_set:
            if os.links == key:
                return os
        raise KeyError(key)


def palm_rectangle(model: HandModel, z: float) -> np.ndarray:
    g = model.palm.geometry
    hx, hy = 0.5 * g.length, 0.5 * g.width
    return np.array([[-hx, -hy, z], [hx, -hy, z], [hx, hy, z], [-hx, hy, z]])


def _interpolation_slack(model: HandModel, link: int, free: list[int], steps: list[float]) -> float:
    # Tensor-product linear interpolation error: sum_j R_j * step_j^2 / 8, with
    # R_j bounding the distance from joint j's axis to the link tip.
    lk = model.links[link]
    chain = active_joints(model, link)
    total = 0.0
    for jid, step in zip(free, steps):
        k = chain.index(jid)
        reach = sum(float(np.linalg.norm(model.joints[c].origin)) for c in chain[k + 1:])
        reach += lk.geometry.length
        total += reach * step * step / 8.0
    return total


def build_reachable_space(model: HandModel, fixed: dict[int, float] | None, link,
                          grid: int = DEFAULT_GRID) -> ReachableSpace:
    """Reachable space of one link with the joints in ``fixed`` pinned."""
    if grid < 2:
        raise ValueError("grid needs at least two samples per joint")
    lid = model.link_id(link)
    fixed = dict(fixed or {})
    if model.links[lid].is_palm:
        t = model.palm.geometry.thickness
        return ReachableSpace(lid, convex_hull(palm_rectangle(model, 0.5 * t)), 4, grid,
                              core=convex_hull(palm_rectangle(model, 0.0)))

    chain = active_joints(model, lid)
    free = [j for j in chain if j not in fixed]
    base = model.rest_configuration()
    for j, v in fixed.items():
        base[j] = v
    axes = [np.linspace(*model.joints[j].limits, grid) for j in free]
    if free:
        values = np.array(list(product(*axes)))
        configs = np.repeat(base[None, :], len(values), axis=0)
        configs[:, free] = values
    else:
        configs = base[None, :]
    a, b = batch_link_endpoints(model, lid, configs)
    pts = np.vstack([a, b])
    steps = [(model.joints[j].limits[1] - model.joints[j].limits[0]) / (grid - 1) for j in free]
    return ReachableSpace(lid, convex_hull(pts), len(pts), grid, tuple(free),
                          _interpolation_slack(model, lid, free, steps))


def build_opposition_set(spaces) -> list[OppositionSpace]:
    out = []
    for sa, sb in combinations(spaces, 2):
        lo, hi = hull_pair_extremal_distances(sa.hull, sb.hull)
        out.append(OppositionSpace((sa.link, sb.link), lo, hi))
    return out


def is_geometrically_permissive(os: OppositionSpace, d: float) -> bool:
    if not d > 0:
        raise ValueError("grasp distance must be positive")
    return os.cap_min <= d <= os.cap_max


def min_grasp_distance(obj, mu: float) -> float:
    """Shortest contact separation that still admits a force-closure grasp.

    Accepts an :class:`~multigrasp.objects.ObjectModel` or a bare radius.
    """
    r = float(obj) if isinstance(obj, (int, float)) else obj.contact_radius
    return 2.0 * r * math.cos(math.atan(mu))


def build_self_collision_map(model: HandModel, spaces) -> SelfCollisionMap:
    """Worst-case interpenetration depth for every non-adjacent link pair.

    Links joined by a joint touch by construction and are left out.
    """
    entries = {}
    for sa, sb in combinations(spaces, 2):
        i, j = sa.link, sb.link
        if model.adjacent(i, j):
            continue
        dist = gjk_distance(sa.collision_hull.vertices, sb.collision_hull.vertices)[0]
        depth = model.links[i].radius + model.links[j].radius - dist
        if depth > 0:
            entries[(min(i, j), max(i, j))] = depth
    return SelfCollisionMap(entries)


def build_reachability_map(model: HandModel, fixed: dict[int, float] | None = None,
                           grid: int = DEFAULT_GRID) -> ReachabilityMap:
    spaces = tuple(build_reachable_space(model, fixed, lk.id, grid) for lk in model.links)
    return ReachabilityMap(spaces, tuple(build_opposition_set(spaces)),
                           build_self_collision_map(model, spaces))


def select_os_candidates(os_set, d: float, n: int, exclude=(), rng=None,
                         randomize: bool = False) -> list[OppositionSpace]:
    """Permissive opposition spaces for grasp distance ``d``.

    Smallest ``cap_max`` first with the lower link pair breaking ties; with
    ``randomize`` the permissive set is shuffled by ``rng`` instead.
    """
    if n < 1:
        raise ValueError("batch size must be at least 1")
    banned = {(min(a, b), max(a, b)) for a, b in exclude}
    pool = [os for os in os_set if os.links not in banned and is_geometrically_permissive(os, d)]
    if not pool:
        raise NoPermissiveOS(f"no permissive opposition space for d={d:.4f} mm")
    pool.sort(key=lambda os: (os.cap_max, os.links))
    if randomize:
        rng = rng if rng is not None else np.random.default_rng()
        pool = [pool[k] for k in rng.permutation(len(pool))]
    return pool[:n]


# --- exports ----------------------------------------------------------------

def write_capacity_csv(model: HandModel, os_set, path, d: float | None = None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link_i", "link_j", "name_i", "name_j", "cap_min", "cap_max", "permissive"])
        for os in sorted(os_set, key=lambda o: o.links):
            i, j = os.links
            perm = "" if d is None else int(is_geometrically_permissive(os, d))
            w.writerow([i, j, model.links[i].name, model.links[j].name,
                        repr(os.cap_min), repr(os.cap_max), perm])
    return path


def write_collision_csv(model: HandModel, cmap: SelfCollisionMap, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link_i", "link_j", "name_i", "name_j", "depth"])
        for (i, j) in cmap.pairs():
            w.writerow([i, j, model.links[i].name, model.links[j].name, repr(cmap.entries[(i, j)])])
    return path


def export_hulls(model: HandModel, spaces, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [export_obj(s.hull, directory / f"reach_{model.links[s.link].name}.obj",
                       model.links[s.link].name) for s in spaces]
