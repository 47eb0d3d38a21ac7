"""Graspable objects built from spheres and cylinders.

A composite object is a rigid set of primitives expressed in the object
frame.  One primitive is designated as the contact primitive and sits at the
object-frame origin, so the object centre used by the optimiser is the centre
of the part the fingers touch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from .errors import NonpositiveDimension, UnsupportedShape
from .geometry import sample_cylinder_axis


@dataclass(frozen=True)
class Sphere:
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise NonpositiveDimension(f"sphere radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class CylinderShape:
    radius: float
    height: float  # along the local z axis, centred on the origin

    def __post_init__(self):
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "height", float(self.height))
        if not (self.radius > 0 and self.height > 0):
            raise NonpositiveDimension(
                f"cylinder dimensions must be positive, got r={self.radius} h={self.height}")


Primitive = Sphere | CylinderShape


@dataclass(frozen=True)
class Part:
    shape: Primitive
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)  # in the object frame


@dataclass(frozen=True)
class ObjectModel:
    id: str
    parts: tuple[Part, ...]
    contact_index: int | None = 0
    center: np.ndarray = field(default_factory=lambda: np.zeros(3), compare=False)
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]), compare=False)

    @property
    def is_composite(self) -> bool:
        return len(self.parts) > 1

    @property
    def contact_part(self) -> Part:
        if self.contact_index is None:
            raise UnsupportedShape(f"object {self.id} has no designated contact primitive")
        return self.parts[self.contact_index]

    @property
    def contact_radius(self) -> float:
        return self.contact_part.shape.radius

    def posed(self, center, quaternion) -> "ObjectModel":
        q = np.asarray(quaternion, dtype=float)
        return ObjectModel(self.id, self.parts, self.contact_index,
                           np.asarray(center, dtype=float).copy(), q / np.linalg.norm(q))


def sphere(id: str, r: float) -> ObjectModel:
    return ObjectModel(id, (Part(Sphere(r)),))


def cylinder(id: str, r: float, h: float) -> ObjectModel:
    return ObjectModel(id, (Part(CylinderShape(r, h)),))


def quat_matrix(q) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_matrix_grad(q) -> np.ndarray:
    """Derivative of :func:`quat_matrix` with respect to (w, x, y, z), shape (4, 3, 3)."""
    w, x, y, z = q
    dw = 2 * np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
    dx = 2 * np.array([[0, y, z], [y, -2 * x, -w], [z, w, -2 * x]])
    dy = 2 * np.array([[-2 * y, x, w], [x, 0, z], [-w, z, -2 * y]])
    dz = 2 * np.array([[-2 * z, -w, x], [w, -2 * z, y], [x, y, 0]])
    return np.array([dw, dx, dy, dz], dtype=float)


def part_segments(obj: ObjectModel, center=None, quaternion=None):
    """World-frame axis segment and radius of every part.

    A sphere is a degenerate segment (both ends at its centre).  Returns a
    list of ``(a, b, radius)``.
    """
    c = obj.center if center is None else np.asarray(center, dtype=float)
    R = quat_matrix(obj.quaternion if quaternion is None else quaternion)
    out = []
    for part in obj.parts:
        mid = c + R @ np.asarray(part.offset, dtype=float)
        if isinstance(part.shape, Sphere):
            out.append((mid, mid.copy(), part.shape.radius))
        else:
            half = 0.5 * part.shape.height * R[:, 2]
            out.append((mid - half, mid + half, part.shape.radius))
    return out


def part_samples(part: Part) -> np.ndarray:
    """Object-frame axis samples for one part (a single point for spheres)."""
    off = np.asarray(part.offset, dtype=float)
    if isinstance(part.shape, Sphere):
        return off[None, :]
    s = sample_cylinder_axis(part.shape.height, part.shape.radius)
    return s.points + off


# --- catalog ----------------------------------------------------------------

def object_from_dict(d: dict) -> ObjectModel:
    """Build an object from a plain mapping (scene and catalog format)."""
    oid = str(d.get("id", d.get("name", "object")))
    if "parts" in d:
        parts = []
        for p in d["parts"]:
            parts.append(Part(_primitive(p), tuple(float(v) for v in p.get("offset", (0, 0, 0)))))
        contact = d.get("contact", 0)
        if contact is not None:
            contact = int(contact)
            if np.linalg.norm(parts[contact].offset) > 0:
                raise UnsupportedShape(f"object {oid}: contact primitive must sit at the origin")
        obj = ObjectModel(oid, tuple(parts), contact)
    else:
        obj = ObjectModel(oid, (Part(_primitive(d)),))
    pose = d.get("pose")
    if pose:
        obj = obj.posed(pose.get("center", (0, 0, 0)), pose.get("quaternion", (1, 0, 0, 0)))
    return obj


def _primitive(d: dict) -> Primitive:
    shape = d.get("shape", "sphere")
    if shape == "sphere":
        return Sphere(float(d["radius"]))
    if shape == "cylinder":
        return CylinderShape(float(d["radius"]), float(d["height"]))
    raise UnsupportedShape(f"unknown primitive {shape!r}")


def object_to_dict(obj: ObjectModel) -> dict:
    def prim(shape):
        if isinstance(shape, Sphere):
            return {"shape": "sphere", "radius": shape.radius}
        return {"shape": "cylinder", "radius": shape.radius, "height": shape.height}

    if obj.is_composite:
        return {"id": obj.id, "contact": obj.contact_index,
                "parts": [{**prim(p.shape), "offset": list(p.offset)} for p in obj.parts]}
    return {"id": obj.id, **prim(obj.parts[0].shape)}


def load_catalog() -> dict[str, ObjectModel]:
    text = resources.files("multigrasp.data").joinpath("objects.yaml").read_text()
    doc = yaml.safe_load(text)
    return {o["id"]: object_from_dict(o) for o in doc["objects"]}
