"""Per-tile instance detections: the JSON contract any detector must emit.

One file per tile::

    {"tile": {"col": i, "row": j, "x0": int, "y0": int, "w": int, "h": int},
     "instances": [{"bbox": [x, y, w, h], "score": float,
                    "rle": {"size": [h, w], "counts": [int, ...]}}]}

``bbox`` and the mask are tile-local; the RLE covers the whole tile.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DetectionValidationError
from .masks import decode_rle, encode_rle
from .tiling import Tile, TileGrid, tile_filename


@dataclass
class InstanceRecord:
    bbox: tuple[int, int, int, int]
    mask: np.ndarray
    score: float = 1.0

    @classmethod
    def from_mask(cls, mask, score: float = 1.0) -> "InstanceRecord":
        mask = np.asarray(mask, dtype=bool)
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows.size == 0:
            raise ValueError("instance mask is empty")
        bbox = (int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))
        return cls(bbox, mask, float(score))

    def to_json(self) -> dict:
        h, w = self.mask.shape
        return {"bbox": [int(v) for v in self.bbox], "score": float(self.score),
                "rle": {"size": [h, w], "counts": encode_rle(self.mask)}}


@dataclass
class TileDetections:
    tile: Tile
    instances: list[InstanceRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"tile": self.tile.to_json(), "instances": [i.to_json() for i in self.instances]}


def validate_instance(inst: InstanceRecord, tile: Tile) -> list[str]:
    problems = []
    x, y, w, h = inst.bbox
    if w <= 0 or h <= 0:
        problems.append(f"bbox {list(inst.bbox)} has non-positive size")
    if x < 0 or y < 0 or x + w > tile.w or y + h > tile.h:
        problems.append(f"bbox {list(inst.bbox)} exceeds the {tile.w}x{tile.h} tile")
    if not 0.0 <= inst.score <= 1.0:
        problems.append(f"score {inst.score} outside [0, 1]")
    if inst.mask.shape != (tile.h, tile.w):
        problems.append(f"mask size {list(inst.mask.shape)} != tile size {[tile.h, tile.w]}")
        return problems
    n = int(inst.mask.sum())
    if n < 1:
        problems.append("mask has no foreground pixels")
    elif w > 0 and h > 0:
        outside = inst.mask.copy()
        outside[max(y - 1, 0):y + h + 1, max(x - 1, 0):x + w + 1] = False
        if outside.any():
            problems.append(f"{int(outside.sum())} mask pixel(s) lie outside the bbox")
    return problems


def parse_tile_detections(doc: dict, grid: TileGrid, source="<memory>",
                          score_floor: float = 0.0) -> TileDetections:
    try:
        t = doc["tile"]
        col, row = int(t["col"]), int(t["row"])
        declared = (int(t["x0"]), int(t["y0"]), int(t["w"]), int(t["h"]))
        raw = doc["instances"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DetectionValidationError(source, [f"schema violation: {exc!r}"]) from exc
    if not (0 <= col < grid.cols and 0 <= row < grid.rows):
        raise DetectionValidationError(source, [f"tile ({col}, {row}) is not in the grid"])
    tile = grid.tile(col, row)
    if declared != (tile.x0, tile.y0, tile.w, tile.h):
        raise DetectionValidationError(
            source, [f"tile window {list(declared)} != manifest {[tile.x0, tile.y0, tile.w, tile.h]}"])
    if not isinstance(raw, list):
        raise DetectionValidationError(source, ["'instances' must be a list"])

    problems = []
    instances = []
    for k, item in enumerate(raw):
        try:
            bbox = tuple(int(v) for v in item["bbox"])
            if len(bbox) != 4:
                raise ValueError("bbox needs 4 values")
            score = float(item.get("score", 1.0))
            size = [int(v) for v in item["rle"]["size"]]
            mask = decode_rle(item["rle"]["counts"], size[0], size[1])
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            problems.append(f"instance {k}: {exc}")
            continue
        inst = InstanceRecord(bbox, mask, score)
        problems.extend(f"instance {k}: {p}" for p in validate_instance(inst, tile))
        if score >= score_floor:
            instances.append(inst)
    if problems:
        raise DetectionValidationError(source, problems)
    return TileDetections(tile, instances)


def load_tile_detections(path, grid: TileGrid, score_floor: float = 0.0) -> TileDetections:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DetectionValidationError(path, [f"invalid JSON: {exc}"]) from exc
    return parse_tile_detections(doc, grid, path, score_floor)


def save_tile_detections(dets: TileDetections, path) -> None:
    Path(path).write_text(json.dumps(dets.to_json(), separators=(",", ":")) + "\n")


def detection_files(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"detections directory {directory} does not exist")
    return sorted(directory.glob("*.json"))


def load_detection_dir(directory, grid: TileGrid, score_floor: float = 0.0,
                       threads: int = 1) -> list[TileDetections]:
    """Load every ``*.json`` in ``directory``; result is sorted row-major by tile."""
    files = detection_files(directory)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            dets = list(pool.map(lambda p: load_tile_detections(p, grid, score_floor), files))
    else:
        dets = [load_tile_detections(p, grid, score_floor) for p in files]
    seen = {}
    for d, p in zip(dets, files):
        if d.tile.key in seen:
            raise DataError(f"tile {d.tile.key} appears in both {seen[d.tile.key]} and {p}")
        seen[d.tile.key] = p
    return sorted(dets, key=lambda d: (d.tile.grid_row, d.tile.grid_col))


def write_detection_dir(dets: list[TileDetections], directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for d in dets:
        save_tile_detections(d, directory / tile_filename(d.tile, ".json"))
