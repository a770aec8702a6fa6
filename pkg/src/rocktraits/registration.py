"""Merge per-tile detections into globally registered rocks.

Tiles are visited in row-major order. An instance whose bbox reaches one of its
tile's shared edge bands is compared against already-registered rocks that sit
in the bands of the (up to four) edge-adjacent tiles; if the best bbox match has
enough mask overlap the two are merged, otherwise the instance is registered as
a new rock.

Mask overlap is normalised inside the zone both detections could have seen:
``|a & b| / min(|a inside tiles(b)|, |b inside tiles(a)|)``. Normalising by the
whole masks would let a large rock split near its middle fall below any useful
threshold, since only the thin overlap band is shared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detections import InstanceRecord, TileDetections
from .errors import DataError
from .masks import SparseMask
from .tiling import Rect, Tile, TileGrid, edge_bands


@dataclass
class RegisteredRock:
    id: int
    mask: SparseMask
    score: float
    source_tiles: set[tuple[int, int]] = field(default_factory=set)

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return self.mask.bbox

    @property
    def rect(self) -> Rect:
        return self.mask.rect

    @property
    def area(self) -> int:
        return self.mask.area


@dataclass
class RockRegistry:
    grid: TileGrid
    threshold: float = 0.5
    rocks: dict[int, RegisteredRock] = field(default_factory=dict)
    band_index: dict[tuple[int, int], set[int]] = field(default_factory=dict)
    instances: int = 0
    merge_events: int = 0
    _next_id: int = 0

    def register(self, rock: RegisteredRock) -> RegisteredRock:
        rock.id = self._next_id
        self._next_id += 1
        self.rocks[rock.id] = rock
        return rock

    def index(self, rock: RegisteredRock, key: tuple[int, int]) -> None:
        self.band_index.setdefault(key, set()).add(rock.id)

    def remove(self, rock_id: int) -> None:
        del self.rocks[rock_id]
        for ids in self.band_index.values():
            ids.discard(rock_id)

    def __len__(self) -> int:
        return len(self.rocks)

    def __iter__(self):
        return iter(self.rocks[k] for k in sorted(self.rocks))

    def subset(self, ids) -> "RockRegistry":
        ids = set(ids)
        sub = RockRegistry(self.grid, self.threshold, instances=self.instances,
                           merge_events=self.merge_events, _next_id=self._next_id)
        sub.rocks = {k: v for k, v in self.rocks.items() if k in ids}
        sub.band_index = {k: {i for i in v if i in ids} for k, v in self.band_index.items()}
        return sub


def project_to_global(tile: Tile, inst: InstanceRecord) -> RegisteredRock:
    x, y, w, h = inst.bbox
    # crop to the bbox expanded by 1 px, the validated foreground envelope
    r0, r1 = max(y - 1, 0), min(y + h + 1, inst.mask.shape[0])
    c0, c1 = max(x - 1, 0), min(x + w + 1, inst.mask.shape[1])
    local = SparseMask.from_dense(inst.mask[r0:r1, c0:c1], c0, r0)
    return RegisteredRock(-1, local.translated(tile.x0, tile.y0), float(inst.score), {tile.key})


def touches_edge_band(rock: RegisteredRock, tile: Tile, grid: TileGrid) -> bool:
    return any(rock.rect.intersects(band) for band in edge_bands(tile, grid))


def check_mask_overlap(a: SparseMask, b: SparseMask) -> int:
    return a.intersection(b)


def _count_in_tiles(mask: SparseMask, tiles, grid: TileGrid) -> int:
    rect = mask.rect
    cover = np.zeros((rect.y1 - rect.y0, rect.x1 - rect.x0), dtype=bool)
    for key in tiles:
        inter = grid.tile(*key).rect.intersect(rect)
        if not inter.empty:
            cover[inter.y0 - rect.y0:inter.y1 - rect.y0, inter.x0 - rect.x0:inter.x1 - rect.x0] = True
    return int((mask.crop & cover).sum())


def overlap_ratio(a: RegisteredRock, b: RegisteredRock, grid: TileGrid) -> float:
    inter = check_mask_overlap(a.mask, b.mask)
    if inter == 0:
        return 0.0
    denom = min(_count_in_tiles(a.mask, b.source_tiles, grid),
                _count_in_tiles(b.mask, a.source_tiles, grid))
    return inter / denom


def _band_candidates(registry: RockRegistry, tiles, grid: TileGrid) -> set[int]:
    ids = set()
    for key in tiles:
        for nb in grid.neighbours(grid.tile(*key)):
            ids |= registry.band_index.get(nb.key, set())
    return ids


def check_bbox_overlap(rock: RegisteredRock, registry: RockRegistry, tile: Tile) -> int | None:
    """Id of the band-indexed neighbour rock whose bbox meets ``rock``'s bbox.

    Among several bbox hits the largest mask intersection wins, then the lowest id.
    """
    best = None
    best_key = None
    for rid in _band_candidates(registry, [tile.key], registry.grid):
        other = registry.rocks[rid]
        if not other.rect.intersects(rock.rect):
            continue
        key = (-check_mask_overlap(rock.mask, other.mask), rid)
        if best_key is None or key < best_key:
            best, best_key = rid, key
    return best


def merge(target: RegisteredRock, rock: RegisteredRock) -> None:
    target.mask = target.mask.union(rock.mask)
    target.score = max(target.score, rock.score)
    target.source_tiles |= rock.source_tiles


def _cascade(registry: RockRegistry, target: RegisteredRock) -> None:
    grid = registry.grid
    while True:
        best = None
        best_key = None
        for rid in _band_candidates(registry, target.source_tiles, grid):
            if rid == target.id:
                continue
            other = registry.rocks[rid]
            if not other.rect.intersects(target.rect):
                continue
            if overlap_ratio(target, other, grid) < registry.threshold:
                continue
            key = (-check_mask_overlap(target.mask, other.mask), rid)
            if best_key is None or key < best_key:
                best, best_key = other, key
        if best is None:
            return
        merge(target, best)
        for key in best.source_tiles:
            registry.index(target, key)
        registry.remove(best.id)
        registry.merge_events += 1


def register_instance(registry: RockRegistry, tile: Tile, inst: InstanceRecord) -> RegisteredRock:
    grid = registry.grid
    rock = project_to_global(tile, inst)
    registry.instances += 1
    if touches_edge_band(rock, tile, grid):
        rid = check_bbox_overlap(rock, registry, tile)
        if rid is not None:
            target = registry.rocks[rid]
            if overlap_ratio(target, rock, grid) >= registry.threshold:
                merge(target, rock)
                registry.index(target, tile.key)
                registry.merge_events += 1
                _cascade(registry, target)
                return target
        registry.register(rock)
        registry.index(rock, tile.key)
        return rock
    return registry.register(rock)


def register_all(grid: TileGrid, detections: list[TileDetections],
                 overlap_ratio_threshold: float = 0.5) -> RockRegistry:
    if not 0.0 < overlap_ratio_threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {overlap_ratio_threshold}")
    registry = RockRegistry(grid, overlap_ratio_threshold)
    by_tile = {}
    for d in detections:
        key = d.tile.key
        if not (0 <= key[0] < grid.cols and 0 <= key[1] < grid.rows) or grid.tile(*key) != d.tile:
            raise DataError(f"detections reference tile {key} which is not in the grid")
        by_tile.setdefault(key, []).extend(d.instances)
    for tile in grid.tiles():
        for inst in by_tile.get(tile.key, ()):
            register_instance(registry, tile, inst)
    return registry


def registry_to_json(registry: RockRegistry) -> dict:
    g = registry.grid
    h, w = g.raster_height, g.raster_width
    rocks = []
    for rock in registry:
        rocks.append({
            "id": rock.id,
            "bbox": list(rock.bbox),
            "score": rock.score,
            "source_tiles": sorted([list(k) for k in rock.source_tiles]),
            "area_px": rock.area,
            "rle": {"size": [h, w], "counts": rock.mask.to_global_rle(h, w)},
        })
    return {
        "raster_size": [h, w],
        "tile_size": g.tile_size,
        "overlap": g.overlap,
        "threshold": registry.threshold,
        "instances": registry.instances,
        "merge_events": registry.merge_events,
        "rocks": rocks,
    }


def save_registry(registry: RockRegistry, path) -> None:
    Path(path).write_text(json.dumps(registry_to_json(registry), separators=(",", ":")) + "\n")


def load_registry(path, grid: TileGrid | None = None) -> RockRegistry:
    from .tiling import plan_tiles

    doc = json.loads(Path(path).read_text())
    h, w = doc["raster_size"]
    if grid is None:
        grid = plan_tiles(w, h, doc["tile_size"], doc["overlap"])
    reg = RockRegistry(grid, doc["threshold"], instances=doc["instances"],
                       merge_events=doc["merge_events"])
    for item in doc["rocks"]:
        mask = SparseMask.from_global_rle(item["rle"]["counts"], h, w)
        rock = RegisteredRock(int(item["id"]), mask, float(item["score"]),
                              {tuple(k) for k in item["source_tiles"]})
        reg.rocks[rock.id] = rock
        for key in rock.source_tiles:
            tile = grid.tile(*key)
            if touches_edge_band(rock, tile, grid):
                reg.index(rock, key)
    reg._next_id = max(reg.rocks, default=-1) + 1
    return reg
