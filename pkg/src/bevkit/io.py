"""Binary grid files, scene JSON files, PNG exports and JSON reports."""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from pathlib import Path

import jsonschema
import numpy as np
from PIL import Image

from .geometry import BevGrid, CameraIntrinsics, CameraPose
from .raster import Frame, Heatmap
from .simulator import Annotations, Person, Scene, SceneConfig

GRID_MAGIC = b"BEVG"
GRID_VERSION = 1
# magic, version u16, frame u8, H u32, W u32, scale f64
_HEADER = struct.Struct("<4sHBIId")
_FRAME_TAGS = {Frame.IMAGE: 0, Frame.BEV: 1}
_TAG_FRAMES = {v: k for k, v in _FRAME_TAGS.items()}


class GridFormatError(ValueError):
    pass


def grid_to_bytes(hm: Heatmap) -> bytes:
    H, W = hm.shape
    scale = hm.grid.scale_m_per_px if hm.frame is Frame.BEV and hm.grid is not None else 0.0
    header = _HEADER.pack(GRID_MAGIC, GRID_VERSION, _FRAME_TAGS[hm.frame], H, W, scale)
    return header + hm.values.astype("<f4").tobytes(order="C")


def grid_from_bytes(data: bytes, grid: BevGrid | None = None) -> Heatmap:
    """Decode a grid file.

    BEV files only record the scale, so the returned grid is anchored at the
    world origin unless a matching ``grid`` is supplied. Metric distances
    within one map do not depend on the anchor.
    """
    if len(data) < _HEADER.size:
        raise GridFormatError("file shorter than grid header")
    magic, version, tag, H, W, scale = _HEADER.unpack_from(data)
    if magic != GRID_MAGIC:
        raise GridFormatError(f"bad magic {magic!r}")
    if version != GRID_VERSION:
        raise GridFormatError(f"unsupported grid version {version}")
    if tag not in _TAG_FRAMES:
        raise GridFormatError(f"unknown frame tag {tag}")
    payload = data[_HEADER.size :]
    if len(payload) != H * W * 4:
        raise GridFormatError(f"payload is {len(payload)} bytes, expected {H * W * 4}")
    values = np.frombuffer(payload, dtype="<f4").reshape(H, W).astype(np.float64)
    frame = _TAG_FRAMES[tag]
    if frame is Frame.IMAGE:
        return Heatmap(values, frame)
    if grid is None:
        grid = BevGrid(H, W, scale)
    elif grid.shape != (H, W) or grid.scale_m_per_px != scale:
        raise GridFormatError("supplied grid does not match the file header")
    return Heatmap(values, frame, grid)


def write_grid(hm: Heatmap, path) -> None:
    Path(path).write_bytes(grid_to_bytes(hm))


def read_grid(path, grid: BevGrid | None = None) -> Heatmap:
    return grid_from_bytes(Path(path).read_bytes(), grid)


_NUM = {"type": "number"}
_UV = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCENE_SCHEMA = {
    "type": "object",
    "required": ["camera", "persons"],
    "additionalProperties": False,
    "properties": {
        "camera": {
            "type": "object",
            "required": ["height_m", "pitch_deg", "fu", "fv", "uc", "vc", "image_w", "image_h"],
            "additionalProperties": False,
            "properties": {
                "height_m": {"type": "number", "exclusiveMinimum": 0},
                "pitch_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 90},
                "fu": {"type": "number", "exclusiveMinimum": 0},
                "fv": {"type": "number", "exclusiveMinimum": 0},
                "uc": {"type": "number", "minimum": 0},
                "vc": {"type": "number", "minimum": 0},
                "image_w": {"type": "integer", "minimum": 1},
                "image_h": {"type": "integer", "minimum": 1},
            },
        },
        "persons": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["x_m", "y_m", "height_m", "visible_feet"],
                "additionalProperties": False,
                "properties": {
                    "x_m": _NUM,
                    "y_m": _NUM,
                    "height_m": {"type": "number", "minimum": 1.0, "maximum": 2.1},
                    "visible_feet": {"type": "boolean"},
                },
            },
        },
        "annotations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["head_uv", "feet_uv"],
                "additionalProperties": False,
                "properties": {"head_uv": _UV, "feet_uv": _UV},
            },
        },
    },
}


def _rad_to_deg(rad: float) -> float:
    """Shortest degree value whose conversion to radians gives back ``rad`` exactly.

    Keeps hand-written values such as 30.0 unchanged across a read/write cycle.
    """
    deg = math.degrees(rad)
    for digits in range(1, 18):
        cand = float(f"{deg:.{digits}g}")
        if math.radians(cand) == rad:
            return cand
    for cand in _neighbors(deg, 4):
        if math.radians(cand) == rad:
            return cand
    return deg


def _neighbors(x: float, n: int):
    lo = hi = x
    for _ in range(n):
        lo, hi = math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)
        yield lo
        yield hi


def scene_to_dict(scene: Scene, annotations: Annotations | None = None) -> dict:
    i, p = scene.intr, scene.pose
    out = {
        "camera": {
            "height_m": p.height_m,
            "pitch_deg": _rad_to_deg(p.pitch_rad),
            "fu": i.f_u,
            "fv": i.f_v,
            "uc": i.u_c,
            "vc": i.v_c,
            "image_w": i.image_w,
            "image_h": i.image_h,
        },
        "persons": [
            {"x_m": q.x_m, "y_m": q.y_m, "height_m": q.height_m, "visible_feet": q.visible_feet}
            for q in scene.persons
        ],
    }
    if annotations is not None:
        out["annotations"] = annotations.records()
    return out


def scene_from_dict(obj: dict) -> tuple[Scene, list[dict] | None]:
    jsonschema.validate(obj, SCENE_SCHEMA)
    cam = obj["camera"]
    intr = CameraIntrinsics(cam["fu"], cam["fv"], cam["uc"], cam["vc"], cam["image_w"], cam["image_h"])
    pose = CameraPose(cam["height_m"], math.radians(cam["pitch_deg"]))
    persons = [Person(q["x_m"], q["y_m"], q["height_m"], q["visible_feet"]) for q in obj["persons"]]
    return Scene(intr, pose, persons), obj.get("annotations")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_scene(scene: Scene, path, annotations: Annotations | None = None) -> None:
    Path(path).write_text(dumps(scene_to_dict(scene, annotations)))


def read_scene(path) -> tuple[Scene, list[dict] | None]:
    return scene_from_dict(json.loads(Path(path).read_text()))


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load_scene_config(path) -> SceneConfig:
    """SceneConfig from a JSON object whose keys are SceneConfig fields."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("scene config must be a JSON object")
    known = {f.name for f in dataclasses.fields(SceneConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown scene config keys: {', '.join(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return SceneConfig(**kwargs)


def to_uint8(values, vmax: float | None = None) -> np.ndarray:
    """Linear 8-bit grayscale rendering, 0 -> 0 and ``vmax`` (default: max) -> 255.

    Boolean masks map to 0 / 255.
    """
    arr = np.asarray(values)
    if arr.dtype == bool:
        return arr.astype(np.uint8) * 255
    arr = arr.astype(np.float64)
    top = float(arr.max()) if vmax is None else vmax
    if top <= 0:
        return np.zeros(arr.shape, dtype=np.uint8)
    return np.clip(np.rint(arr / top * 255), 0, 255).astype(np.uint8)


def save_png(values, path, vmax: float | None = None) -> None:
    """Visualization export only; PNGs are never read back."""
    Image.fromarray(to_uint8(values, vmax)).save(path, format="PNG")
