"""Scene documents: which hand, which objects, and the planner settings.

A scene is a YAML mapping::

    hand: human                # bundled name or path to a hand YAML
    objects:
      - {id: ball, shape: sphere, radius: 10}
      - {catalog: O15}         # an entry of the bundled object catalog
    candidates: [[F3L4, PALM]] # optional opposition spaces for `grasp`
    settings: {mode: ke, batch: 3, seed: 7}

Settings left out take their defaults.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import yaml

from .errors import GraspError, MalformedSpec, ParseError, ValidationError
from .kinematics import HandModel, load_hand
from .objects import ObjectModel, object_from_dict
from .synthesis import GraspSettings


@dataclass
class SceneSettings:
    mode: str = "single"
    batch: int = 3
    lam: float = 0.5
    mu: float = 0.5
    n_edges: int = 3
    grid: int = 9
    restarts: int = 8
    seed: int | None = None
    trials: int = 50
    per_trial: int = 3
    max_batches: int | None = None

    def grasp_settings(self) -> GraspSettings:
        mode = "single" if self.mode in ("single", "regular") else "ke"
        return GraspSettings(mu=self.mu, n_edges=self.n_edges, lam=self.lam, mode=mode,
                             restarts=self.restarts)


@dataclass
class SceneDocument:
    hand: str
    objects: list[dict]
    settings: SceneSettings = field(default_factory=SceneSettings)
    candidates: list[list[str]] = field(default_factory=list)

    def hand_model(self) -> HandModel:
        return load_hand(self.hand)

    def object_models(self) -> list[ObjectModel]:
        return [object_from_dict(o) for o in self.objects]

    def to_dict(self) -> dict:
        d = {"hand": self.hand, "objects": self.objects, "settings": asdict(self.settings)}
        if self.candidates:
            d["candidates"] = self.candidates
        return d


_INT = {"batch", "n_edges", "grid", "restarts", "trials", "per_trial"}
_FLOAT = {"lam", "mu"}


def _check_settings(raw) -> SceneSettings:
    if raw is None:
        return SceneSettings()
    if not isinstance(raw, dict):
        raise ValidationError("settings", "must be a mapping")
    known = {f.name for f in fields(SceneSettings)}
    out = {}
    for k, v in raw.items():
        path = f"settings.{k}"
        if k not in known:
            raise ValidationError(path, "unknown setting")
        if k in _INT:
            if isinstance(v, bool) or not isinstance(v, int):
                raise ValidationError(path, "must be an integer")
            if v < 1:
                raise ValidationError(path, "must be at least 1")
        elif k in _FLOAT:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValidationError(path, "must be a number")
            v = float(v)
        elif k == "max_batches":
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 1):
                raise ValidationError(path, "must be a positive integer or null")
        elif k == "seed":
            if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
                raise ValidationError(path, "must be an integer")
        elif k == "mode" and v not in ("single", "regular", "ke"):
            raise ValidationError(path, "must be one of single, regular, ke")
        out[k] = v
    s = SceneSettings(**out)
    if s.mu < 0:
        raise ValidationError("settings.mu", "must be non-negative")
    if not 0 <= s.lam <= 1:
        raise ValidationError("settings.lam", "must lie in [0, 1]")
    if s.n_edges < 3:
        raise ValidationError("settings.n_edges", "needs at least three edges")
    if s.grid < 2:
        raise ValidationError("settings.grid", "needs at least two samples")
    return s


def _check_object(raw, k: int, catalog) -> dict:
    path = f"objects[{k}]"
    if not isinstance(raw, dict):
        raise ValidationError(path, "must be a mapping")
    if "catalog" in raw:
        ref = raw["catalog"]
        if ref not in catalog:
            raise ValidationError(f"{path}.catalog", f"unknown catalog object {ref!r}")
        d = yaml.safe_load(yaml.safe_dump(catalog[ref]))
        if "pose" in raw:
            d["pose"] = raw["pose"]
        if "id" in raw:
            d["id"] = raw["id"]
        raw = d
    parts = raw.get("parts", [raw])
    if not isinstance(parts, list) or not parts:
        raise ValidationError(f"{path}.parts", "must be a non-empty list")
    for i, p in enumerate(parts):
        pp = path if "parts" not in raw else f"{path}.parts[{i}]"
        shape = p.get("shape", "sphere")
        if shape not in ("sphere", "cylinder"):
            raise ValidationError(f"{pp}.shape", f"unsupported shape {shape!r}")
        need = ("radius",) if shape == "sphere" else ("radius", "height")
        for key in need:
            v = p.get(key)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValidationError(f"{pp}.{key}", "must be a number")
            if not v > 0:
                raise ValidationError(f"{pp}.{key}", f"must be positive, got {v}")
    try:
        object_from_dict(raw)
    except GraspError as e:
        raise ValidationError(path, str(e)) from None
    return raw


def scene_from_dict(doc) -> SceneDocument:
    if not isinstance(doc, dict):
        raise ValidationError("", "scene must be a mapping")
    hand = doc.get("hand")
    if not isinstance(hand, str):
        raise ValidationError("hand", "missing hand reference")
    try:
        load_hand(hand)
    except (MalformedSpec, OSError, KeyError) as e:
        raise ValidationError("hand", f"cannot resolve hand {hand!r}: {e}") from None
    raw_objs = doc.get("objects", [])
    if not isinstance(raw_objs, list):
        raise ValidationError("objects", "must be a list")
    catalog = {d["id"]: d for d in _catalog_dicts()}
    objs = [_check_object(o, k, catalog) for k, o in enumerate(raw_objs)]
    ids = [str(o.get("id", "")) for o in objs]
    if len(set(ids)) != len(ids):
        raise ValidationError("objects", "object ids must be unique")
    cands = doc.get("candidates", []) or []
    for k, c in enumerate(cands):
        if not (isinstance(c, list) and len(c) == 2 and all(isinstance(x, str) for x in c)):
            raise ValidationError(f"candidates[{k}]", "must be a pair of link names")
    return SceneDocument(hand, objs, _check_settings(doc.get("settings")), [list(c) for c in cands])


def _catalog_dicts() -> list[dict]:
    text = resources.files("multigrasp.data").joinpath("objects.yaml").read_text()
    return yaml.safe_load(text)["objects"]


def load_scene(path) -> SceneDocument:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read scene {path}: {e}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ParseError(f"scene {path} is not valid YAML: {e}") from None
    return scene_from_dict(doc)


def save_scene(scene: SceneDocument, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(scene.to_dict(), sort_keys=False))
    return path


def catalog_scene(hand: str = "human", settings: SceneSettings | None = None) -> SceneDocument:
    """Scene holding the whole bundled object catalog."""
    return SceneDocument(hand, _catalog_dicts(), settings or SceneSettings())
