"""Persistence and export of grasp solutions.

Solutions are stored as JSON; Python writes floats with their shortest
round-tripping decimal form, so a saved record reloads bit for bit.  Each
record carries the hand specification, so it can be audited on its own.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .geometry import mesh_to_obj
from .kinematics import HandModel, build_hand_model, forward_kinematics, link_endpoints
from .objects import ObjectModel, Sphere, object_from_dict, object_to_dict, quat_matrix
from .synthesis import GraspSettings, GraspSolution

FORMAT = "multigrasp-solution/1"


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


def posed_object_dict(obj: ObjectModel) -> dict:
    d = object_to_dict(obj)
    d["pose"] = {"center": _plain(obj.center), "quaternion": _plain(obj.quaternion)}
    return d


def solution_to_dict(model: HandModel, sol: GraspSolution) -> dict:
    return {
        "format": FORMAT,
        "hand": model.name,
        "hand_spec": model.source,
        "os": [model.links[k].name for k in sol.os],
        "os_links": list(sol.os),
        "cap_max": sol.cap_max,
        "object": object_to_dict(sol.object),
        "layout_joints": list(sol.layout_joints),
        "free": list(sol.free),
        "configuration": _plain(sol.configuration),
        "contact_params": [[int(l), float(a), float(b)] for l, a, b in sol.contact_params],
        "center": _plain(sol.center),
        "quaternion": _plain(sol.quaternion),
        "coeffs": _plain(sol.coeffs),
        "objective": sol.objective,
        "costs": _plain(sol.costs),
        "kappa": sol.kappa,
        "eta": sol.eta,
        "n_q": sol.n_q,
        "violation": sol.violation,
        "violations": _plain(sol.violations),
        "contact_points": _plain(sol.contact_points),
        "contact_normals": _plain(sol.contact_normals),
        "consumed": list(sol.consumed),
        "settings": _plain(asdict(sol.settings)),
        "collision_pairs": [list(p) for p in sol.collision_pairs],
        "cuboid": _plain(sol.cuboid),
        "held": [posed_object_dict(h) for h in sol.held],
        "restarts": sol.restarts,
        "iterations": sol.iterations,
        "feasible_restarts": sol.feasible_restarts,
    }


def settings_from_dict(d: dict) -> GraspSettings:
    d = dict(d)
    for k in ("q_weights", "gravity"):
        if k in d:
            d[k] = tuple(float(v) for v in d[k])
    return GraspSettings(**d)


def solution_from_dict(d: dict) -> tuple[HandModel, GraspSolution]:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a solution record (format {d.get('format')!r})")
    model = build_hand_model(d["hand_spec"])
    arr = lambda k: np.asarray(d[k], dtype=float)  # noqa: E731
    sol = GraspSolution(
        os=tuple(d["os_links"]), cap_max=float(d["cap_max"]), object=object_from_dict(d["object"]),
        x=np.zeros(0), layout_joints=tuple(d["layout_joints"]), configuration=arr("configuration"),
        contact_params=tuple((int(l), float(a), float(b)) for l, a, b in d["contact_params"]),
        center=arr("center"), quaternion=arr("quaternion"), coeffs=arr("coeffs"),
        objective=float(d["objective"]), costs=dict(d["costs"]), kappa=float(d["kappa"]),
        eta=float(d["eta"]), n_q=int(d["n_q"]), violation=float(d["violation"]),
        violations=dict(d["violations"]), contact_points=arr("contact_points"),
        contact_normals=arr("contact_normals"), consumed=tuple(d["consumed"]),
        settings=settings_from_dict(d["settings"]),
        collision_pairs=tuple(tuple(p) for p in d["collision_pairs"]),
        cuboid=None if d["cuboid"] is None else arr("cuboid"),
        held=tuple(object_from_dict(h) for h in d["held"]),
        restarts=int(d["restarts"]), iterations=int(d["iterations"]),
        feasible_restarts=int(d["feasible_restarts"]), free=tuple(d["free"]))
    return model, sol


def dumps(doc) -> str:
    return json.dumps(doc, indent=1) + "\n"


def save_solution(model: HandModel, sol: GraspSolution, path) -> Path:
    path = Path(path)
    path.write_text(dumps(solution_to_dict(model, sol)))
    return path


def load_solution(path) -> tuple[HandModel, GraspSolution]:
    return solution_from_dict(json.loads(Path(path).read_text()))


# --- text report --------------------------------------------------------------

def format_solution(model: HandModel, sol: GraspSolution) -> str:
    names = [model.links[k].name for k in sol.os]
    lines = [
        f"object {sol.object.id}",
        f"opposition space {names[0]}-{names[1]} cap_max {sol.cap_max!r}",
        f"objective {sol.objective!r}",
    ]
    lines += [f"  {k} {v!r}" for k, v in sol.costs.items()]
    lines += [f"  kappa {sol.kappa!r}", f"  eta {sol.eta!r}", f"  n_q {sol.n_q}",
              f"contact distance {sol.contact_distance!r}",
              f"max violation {sol.violation!r}"]
    lines += [f"  {k} {v!r}" for k, v in sol.violations.items()]
    for (link, a, b), p, n in zip(sol.contact_params, sol.contact_points, sol.contact_normals):
        lines.append(f"contact {model.links[link].name} params ({a!r}, {b!r}) "
                     f"point {_vec(p)} normal {_vec(n)}")
    lines.append(f"center {_vec(sol.center)} quaternion {_vec(sol.quaternion)}")
    lines.append("joints " + " ".join(f"{model.joints[j].name}={sol.configuration[j]!r}"
                                      for j in sol.layout_joints))
    lines.append("consumed " + " ".join(model.joints[j].name for j in sol.consumed))
    lines.append(f"solver restarts {sol.restarts} feasible {sol.feasible_restarts} "
                 f"iterations {sol.iterations}")
    return "\n".join(lines) + "\n"


def _vec(v) -> str:
    return "(" + ", ".join(repr(float(x)) for x in v) + ")"


# --- scene meshes ---------------------------------------------------------------

def _cylinder_mesh(a, b, r, segments=16):
    axis = b - a
    h = np.linalg.norm(axis)
    z = axis / h
    t = np.array([1.0, 0, 0]) if abs(z[0]) < 0.9 else np.array([0, 1.0, 0])
    x = np.cross(z, t)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    ang = 2 * math.pi * np.arange(segments) / segments
    ring = r * (np.cos(ang)[:, None] * x + np.sin(ang)[:, None] * y)
    V = np.vstack([a + ring, b + ring, a, b])
    F = []
    for i in range(segments):
        k = (i + 1) % segments
        F += [[i, k, segments + k], [i, segments + k, segments + i],
              [2 * segments, k, i], [2 * segments + 1, segments + i, segments + k]]
    return V, np.array(F)


def _sphere_mesh(c, r, n_lat=8, n_lon=16):
    V = [c + [0, 0, r]]
    for i in range(1, n_lat):
        th = math.pi * i / n_lat
        for k in range(n_lon):
            ph = 2 * math.pi * k / n_lon
            V.append(c + r * np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph),
                                       math.cos(th)]))
    V.append(c + [0, 0, -r])
    F = []
    ring = lambda i, k: 1 + (i - 1) * n_lon + k % n_lon  # noqa: E731
    for k in range(n_lon):
        F.append([0, ring(1, k), ring(1, k + 1)])
        for i in range(1, n_lat - 1):
            F += [[ring(i, k), ring(i + 1, k), ring(i + 1, k + 1)],
                  [ring(i, k), ring(i + 1, k + 1), ring(i, k + 1)]]
        F.append([len(V) - 1, ring(n_lat - 1, k + 1), ring(n_lat - 1, k)])
    return np.array(V), np.array(F)


def _box_mesh(half):
    s = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    V = s * half
    F = [[0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5], [0, 4, 5], [0, 5, 1],
         [2, 3, 7], [2, 7, 6], [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3]]
    return V, np.array(F)


def scene_meshes(model: HandModel, q, objects=()) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Triangle meshes of the posed hand and objects as ``(name, V, F)``."""
    out = []
    for lk in model.links:
        if lk.is_palm:
            g = lk.geometry
            V, F = _box_mesh(0.5 * np.array([g.length, g.width, g.thickness]))
            T = forward_kinematics(model, q, lk.id)
            out.append((lk.name, V @ T[:3, :3].T + T[:3, 3], F))
        else:
            a, b = link_endpoints(model, q, lk.id)
            out.append((lk.name, *_cylinder_mesh(a, b, lk.radius)))
    for obj in objects:
        R = quat_matrix(obj.quaternion)
        for k, part in enumerate(obj.parts):
            mid = obj.center + R @ np.asarray(part.offset, dtype=float)
            name = f"{obj.id}_{k}"
            if isinstance(part.shape, Sphere):
                out.append((name, *_sphere_mesh(mid, part.shape.radius)))
            else:
                half = 0.5 * part.shape.height * R[:, 2]
                out.append((name, *_cylinder_mesh(mid - half, mid + half, part.shape.radius)))
    return out


def export_scene(model: HandModel, q, objects, path) -> Path:
    path = Path(path)
    parts, offset = [], 0
    for name, V, F in scene_meshes(model, q, objects):
        text = mesh_to_obj(V, F + offset, name)
        # faces are numbered globally across objects in one file
        parts.append(text)
        offset += len(V)
    path.write_text("".join(parts))
    return path
