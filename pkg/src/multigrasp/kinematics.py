"""Articulated hand models: joints, primitive-geometry links and forward kinematics.

Lengths are millimetres and angles radians everywhere inside the package.
Hand specification documents (YAML) carry angles in degrees; conversion
happens once in :func:`build_hand_model`.

Frames follow one convention: every joint rotates about an axis expressed in
its own frame, phalanges extend along the local +x axis of the joint that
carries them, and the hand frame sits at the geometric centre of the palm
with +z along the inner palm normal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .errors import MalformedSpec, UnknownLink

UNIT_TOL = 1e-9
PALM = 0


@dataclass(frozen=True)
class Cylinder:
    radius: float
    length: float


@dataclass(frozen=True)
class Cuboid:
    width: float  # along hand y
    length: float  # along hand x
    thickness: float  # along hand z


@dataclass(frozen=True)
class Joint:
    id: int
    name: str
    finger: str
    parent: int | None  # parent joint id, None when mounted on the palm
    parent_link: int  # link the joint is mounted on
    origin: np.ndarray  # translation in the parent joint frame
    fixed_rotation: np.ndarray  # 3x3, applied before the joint rotation
    axis: np.ndarray  # unit vector in the joint frame
    limits: tuple[float, float]
    rest_angle: float
    slot: int  # position inside the finger chain, 0 = ab-/adduction
    kind: str = "revolute"

    @property
    def local_transform(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.fixed_rotation
        T[:3, 3] = self.origin
        return T


@dataclass(frozen=True)
class Link:
    id: int
    name: str
    geometry: Cylinder | Cuboid
    parent_joint: int | None
    finger: str | None = None
    local_frame: np.ndarray = field(default_factory=lambda: np.eye(4))

    @property
    def radius(self) -> float:
        """Collision radius: cylinder radius or palm half thickness."""
        if isinstance(self.geometry, Cylinder):
            return self.geometry.radius
        return 0.5 * self.geometry.thickness

    @property
    def is_palm(self) -> bool:
        return self.parent_joint is None


@dataclass(frozen=True)
class HandModel:
    name: str
    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    finger_chains: dict[str, tuple[tuple[int, ...], tuple[int, ...]]]
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def palm(self) -> Link:
        return self.links[PALM]

    @property
    def lower(self) -> np.ndarray:
        return np.array([j.limits[0] for j in self.joints])

    @property
    def upper(self) -> np.ndarray:
        return np.array([j.limits[1] for j in self.joints])

    def link_id(self, name_or_id) -> int:
        if isinstance(name_or_id, (int, np.integer)):
            if 0 <= int(name_or_id) < len(self.links):
                return int(name_or_id)
            raise UnknownLink(name_or_id)
        key = str(name_or_id).upper()
        if key == "L0":
            key = "PALM"
        for link in self.links:
            if link.name.upper() == key:
                return link.id
        raise UnknownLink(name_or_id)

    def link(self, name_or_id) -> Link:
        return self.links[self.link_id(name_or_id)]

    def rest_configuration(self) -> np.ndarray:
        return np.array([j.rest_angle for j in self.joints])

    def clamp(self, q) -> np.ndarray:
        return np.clip(np.asarray(q, dtype=float), self.lower, self.upper)

    def is_valid(self, q, tol: float = 1e-12) -> bool:
        q = np.asarray(q, dtype=float)
        return q.shape == (self.n_joints,) and bool(
            np.all(q >= self.lower - tol) and np.all(q <= self.upper + tol)
        )

    def chain(self, joint_id: int) -> list[int]:
        """Joint ids from the palm down to ``joint_id`` inclusive."""
        out = []
        j = joint_id
        while j is not None:
            out.append(j)
            j = self.joints[j].parent
        return out[::-1]

    def adjacent(self, a: int, b: int) -> bool:
        """True when two links are joined directly by a joint."""
        la, lb = self.links[a], self.links[b]
        for x, y in ((la, lb), (lb, la)):
            if y.parent_joint is not None and self.joints[y.parent_joint].parent_link == x.id:
                return True
        return False


# --- rotations ------------------------------------------------------------

def axis_angle(axis, angle) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def axis_angle_batch(axis, angles) -> np.ndarray:
    """Rotation matrices for one axis and an array of angles, shape (M, 3, 3)."""
    axis = np.asarray(axis, dtype=float)
    angles = np.asarray(angles, dtype=float)
    K = skew(axis)
    s = np.sin(angles)[:, None, None]
    c = np.cos(angles)[:, None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def rpy_matrix(roll, pitch, yaw) -> np.ndarray:
    return axis_angle([0, 0, 1], yaw) @ axis_angle([0, 1, 0], pitch) @ axis_angle([1, 0, 0], roll)


def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


# --- spec loading ---------------------------------------------------------

BUNDLED = {"human": "human_20dof.yaml", "human-20dof": "human_20dof.yaml",
           "allegro": "allegro_16dof.yaml", "allegro-16dof": "allegro_16dof.yaml"}


def load_hand_spec(name_or_path) -> dict:
    """Read a hand spec document, either a bundled name or a file path."""
    key = str(name_or_path)
    if key in BUNDLED:
        text = resources.files("multigrasp.hands").joinpath(BUNDLED[key]).read_text()
    else:
        text = Path(key).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MalformedSpec(f"unreadable hand spec: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedSpec("hand spec must be a mapping")
    return doc


def load_hand(name_or_path) -> HandModel:
    return build_hand_model(load_hand_spec(name_or_path))


def _positive(value, what):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise MalformedSpec(f"{what} must be a number") from None
    if not value > 0:
        raise MalformedSpec(f"{what} must be positive, got {value}")
    return value


def build_hand_model(spec: dict) -> HandModel:
    """Validate a hand spec mapping and return an immutable :class:`HandModel`."""
    palm = spec.get("palm")
    if not isinstance(palm, dict):
        raise MalformedSpec("missing palm")
    palm_geom = Cuboid(
        width=_positive(palm.get("width"), "palm.width"),
        length=_positive(palm.get("length"), "palm.length"),
        thickness=_positive(palm.get("thickness"), "palm.thickness"),
    )
    raw_joints = spec.get("joints") or []
    raw_links = spec.get("links") or []
    if not raw_joints:
        raise MalformedSpec("no joints declared")

    names = [j.get("name") for j in raw_joints]
    if len(set(names)) != len(names) or None in names:
        raise MalformedSpec("joint names must be unique and present")
    index = {n: i for i, n in enumerate(names)}

    parents: list[int | None] = []
    for j in raw_joints:
        p = j.get("parent", "PALM")
        if p == "PALM":
            parents.append(None)
        elif p in index:
            parents.append(index[p])
        else:
            raise MalformedSpec(f"joint {j['name']}: unknown parent {p!r}")

    # every joint must reach the palm without revisiting a joint
    for i in range(len(raw_joints)):
        seen, k = set(), i
        while k is not None:
            if k in seen:
                raise MalformedSpec(f"cycle through joint {names[i]}")
            seen.add(k)
            k = parents[k]
    children: dict[int, list[int]] = {}
    for i, p in enumerate(parents):
        if p is not None:
            children.setdefault(p, []).append(i)
    if any(len(c) > 1 for c in children.values()):
        raise MalformedSpec("finger chains must not branch")

    # links hang off joints; collect which joint carries which link
    link_of_joint: dict[int, str] = {}
    link_names = ["PALM"]
    geoms: list[Cylinder | Cuboid] = [palm_geom]
    link_joint: list[int | None] = [None]
    for l in raw_links:
        name = l.get("name")
        if name is None or name in link_names:
            raise MalformedSpec("link names must be unique and present")
        jn = l.get("joint")
        if jn not in index:
            raise MalformedSpec(f"link {name}: unknown joint {jn!r}")
        if index[jn] in link_of_joint:
            raise MalformedSpec(f"joint {jn} carries two links")
        link_of_joint[index[jn]] = name
        link_names.append(name)
        geoms.append(Cylinder(radius=_positive(l.get("radius"), f"{name}.radius"),
                              length=_positive(l.get("length"), f"{name}.length")))
        link_joint.append(index[jn])
    link_index = {n: i for i, n in enumerate(link_names)}

    def carrier(jid: int | None) -> int:
        # link a joint is mounted on: nearest ancestor joint that carries a link
        k = jid
        while k is not None:
            if k in link_of_joint:
                return link_index[link_of_joint[k]]
            k = parents[k]
        return PALM

    joints = []
    slot_counter: dict[str, int] = {}
    for i, j in enumerate(raw_joints):
        finger = str(j.get("finger", "F?"))
        axis = np.asarray(j.get("axis", [0, 0, 1]), dtype=float)
        if axis.shape != (3,) or not np.isclose(np.linalg.norm(axis), 1.0, atol=1e-6):
            raise MalformedSpec(f"joint {names[i]}: axis must be a unit 3-vector")
        axis = axis / np.linalg.norm(axis)
        lo, hi = (np.deg2rad(float(v)) for v in j.get("limits", [-180, 180]))
        rest = np.deg2rad(float(j.get("rest", 0.0)))
        if not lo <= rest <= hi:
            raise MalformedSpec(f"joint {names[i]}: rest angle outside limits")
        rpy = np.deg2rad(np.asarray(j.get("rpy", [0, 0, 0]), dtype=float))
        slot = slot_counter.get(finger, 0)
        slot_counter[finger] = slot + 1
        joints.append(Joint(
            id=i, name=names[i], finger=finger, parent=parents[i],
            parent_link=carrier(parents[i]),
            origin=np.asarray(j.get("origin", [0, 0, 0]), dtype=float),
            fixed_rotation=rpy_matrix(*rpy), axis=axis,
            limits=(lo, hi), rest_angle=rest, slot=slot,
        ))

    links = [Link(id=0, name="PALM", geometry=palm_geom, parent_joint=None)]
    for k in range(1, len(link_names)):
        links.append(Link(id=k, name=link_names[k], geometry=geoms[k],
                          parent_joint=link_joint[k],
                          finger=joints[link_joint[k]].finger))

    chains: dict[str, tuple[tuple[int, ...], tuple[int, ...]]] = {}
    for jt in joints:
        jl, ll = chains.get(jt.finger, ((), ()))
        chains[jt.finger] = (jl + (jt.id,), ll)
    for lk in links[1:]:
        jl, ll = chains[lk.finger]
        chains[lk.finger] = (jl, ll + (lk.id,))
    for finger, (jl, ll) in chains.items():
        if len(ll) > 3:
            raise MalformedSpec(f"finger {finger} has more than three links")

    return HandModel(name=str(spec.get("name", "hand")), links=tuple(links),
                     joints=tuple(joints), finger_chains=chains, source=spec)


# --- forward kinematics ---------------------------------------------------

def active_joints(model: HandModel, link) -> list[int]:
    """Joints preceding ``link`` along its chain, palm side first."""
    lk = model.link(link)
    if lk.parent_joint is None:
        return []
    return model.chain(lk.parent_joint)


def joint_frames(model: HandModel, q) -> np.ndarray:
    """Frame of every joint after its own rotation, shape (N_j, 4, 4)."""
    q = np.asarray(q, dtype=float)
    out = np.empty((model.n_joints, 4, 4))
    for j in model.joints:  # parents precede children in spec order
        parent = np.eye(4) if j.parent is None else out[j.parent]
        R = np.eye(4)
        R[:3, :3] = axis_angle(j.axis, q[j.id])
        out[j.id] = parent @ j.local_transform @ R
    return out


def link_frames(model: HandModel, q) -> np.ndarray:
    jf = joint_frames(model, q)
    out = np.empty((model.n_links, 4, 4))
    for lk in model.links:
        out[lk.id] = np.eye(4) if lk.parent_joint is None else jf[lk.parent_joint] @ lk.local_frame
    return out


def forward_kinematics(model: HandModel, q, link) -> np.ndarray:
    """Pose of the link frame in the hand frame as a 4x4 homogeneous matrix."""
    lid = model.link_id(link)
    lk = model.links[lid]
    if lk.parent_joint is None:
        return np.eye(4)
    q = np.asarray(q, dtype=float)
    T = np.eye(4)
    for jid in model.chain(lk.parent_joint):
        j = model.joints[jid]
        R = np.eye(4)
        R[:3, :3] = axis_angle(j.axis, q[jid])
        T = T @ j.local_transform @ R
    return T @ lk.local_frame


def link_endpoints(model: HandModel, q, link) -> tuple[np.ndarray, np.ndarray]:
    """Base and tip of a phalanx central axis."""
    T = forward_kinematics(model, q, link)
    L = model.link(link).geometry.length
    return T[:3, 3].copy(), T[:3, 3] + L * T[:3, 0]


def joint_axes_world(model: HandModel, q) -> tuple[np.ndarray, np.ndarray]:
    """World origin and world rotation axis of every joint."""
    jf = joint_frames(model, q)
    origins = jf[:, :3, 3].copy()
    axes = np.einsum("jab,jb->ja", jf[:, :3, :3], np.array([j.axis for j in model.joints]))
    return origins, axes


def batch_link_endpoints(model: HandModel, link, configs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`link_endpoints` over rows of full joint vectors."""
    lk = model.link(link)
    configs = np.atleast_2d(configs)
    M = configs.shape[0]
    if lk.parent_joint is None:
        raise ValueError("palm has no axis endpoints")
    T = np.broadcast_to(np.eye(4), (M, 4, 4)).copy()
    for jid in model.chain(lk.parent_joint):
        j = model.joints[jid]
        R = np.broadcast_to(np.eye(4), (M, 4, 4)).copy()
        R[:, :3, :3] = axis_angle_batch(j.axis, configs[:, jid])
        T = T @ j.local_transform @ R
    T = T @ lk.local_frame
    base = T[:, :3, 3]
    tip = base + lk.geometry.length * T[:, :3, 0]
    return base, tip
