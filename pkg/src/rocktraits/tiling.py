"""Overlapping tile plans over large rasters.

Tiles are full ``tile_size`` squares laid out with stride ``tile_size - overlap``;
the last tile on each axis is pulled back flush with the raster edge, so its
overlap with the predecessor can exceed ``overlap``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import TilingError
from .georaster import GeoRaster


@dataclass(frozen=True)
class Rect:
    """Half-open pixel rectangle ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def empty(self) -> bool:
        return self.x1 <= self.x0 or self.y1 <= self.y0

    def intersect(self, other: "Rect") -> "Rect":
        return Rect(max(self.x0, other.x0), max(self.y0, other.y0),
                    min(self.x1, other.x1), min(self.y1, other.y1))

    def intersects(self, other: "Rect") -> bool:
        return not self.intersect(other).empty


@dataclass(frozen=True)
class Tile:
    grid_col: int
    grid_row: int
    x0: int
    y0: int
    w: int
    h: int

    @property
    def key(self) -> tuple[int, int]:
        return (self.grid_col, self.grid_row)

    @property
    def rect(self) -> Rect:
        return Rect(self.x0, self.y0, self.x0 + self.w, self.y0 + self.h)

    def to_json(self) -> dict:
        return {"col": self.grid_col, "row": self.grid_row,
                "x0": self.x0, "y0": self.y0, "w": self.w, "h": self.h}


def _anchors(dim: int, tile_size: int, overlap: int) -> list[int]:
    if dim <= tile_size:
        return [0]
    stride = tile_size - overlap
    n = math.ceil((dim - overlap) / stride)
    out = [k * stride for k in range(n)]
    out[-1] = max(0, dim - tile_size)
    return out


@dataclass(frozen=True)
class TileGrid:
    raster_width: int
    raster_height: int
    tile_size: int
    overlap: int
    col_anchors: tuple[int, ...]
    row_anchors: tuple[int, ...]

    @property
    def stride(self) -> int:
        return self.tile_size - self.overlap

    @property
    def cols(self) -> int:
        return len(self.col_anchors)

    @property
    def rows(self) -> int:
        return len(self.row_anchors)

    def tile(self, col: int, row: int) -> Tile:
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            raise TilingError(f"tile ({col}, {row}) outside a {self.cols}x{self.rows} grid")
        x0 = self.col_anchors[col]
        y0 = self.row_anchors[row]
        return Tile(col, row, x0, y0,
                    min(self.tile_size, self.raster_width - x0),
                    min(self.tile_size, self.raster_height - y0))

    def tiles(self):
        """All tiles in row-major order."""
        for row in range(self.rows):
            for col in range(self.cols):
                yield self.tile(col, row)

    def neighbours(self, tile: Tile) -> list[Tile]:
        """Edge-adjacent tiles in (left, right, top, bottom) order."""
        out = []
        for dc, dr in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            c, r = tile.grid_col + dc, tile.grid_row + dr
            if 0 <= c < self.cols and 0 <= r < self.rows:
                out.append(self.tile(c, r))
        return out

    def to_json(self) -> dict:
        return {
            "raster_width": self.raster_width,
            "raster_height": self.raster_height,
            "tile_size": self.tile_size,
            "overlap": self.overlap,
            "stride": self.stride,
            "cols": self.cols,
            "rows": self.rows,
            "col_anchors": list(self.col_anchors),
            "row_anchors": list(self.row_anchors),
            "tiles": [t.to_json() for t in self.tiles()],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TileGrid":
        grid = plan_tiles(doc["raster_width"], doc["raster_height"], doc["tile_size"], doc["overlap"])
        if "col_anchors" in doc and (list(grid.col_anchors) != list(doc["col_anchors"])
                                     or list(grid.row_anchors) != list(doc["row_anchors"])):
            raise TilingError("manifest anchors disagree with the tiling rule")
        return grid


def plan_tiles(width: int, height: int, tile_size: int = 400, overlap: int = 10) -> TileGrid:
    if width < 1 or height < 1:
        raise TilingError(f"raster must be at least 1x1, got {width}x{height}")
    if overlap < 0 or tile_size <= 2 * overlap:
        raise TilingError(f"tile_size ({tile_size}) must exceed twice the overlap ({overlap})")
    return TileGrid(width, height, tile_size, overlap,
                    tuple(_anchors(width, tile_size, overlap)),
                    tuple(_anchors(height, tile_size, overlap)))


def extract_tile(raster: GeoRaster, tile: Tile) -> GeoRaster:
    if tile.x0 < 0 or tile.y0 < 0 or tile.x0 + tile.w > raster.width or tile.y0 + tile.h > raster.height:
        raise TilingError(f"tile {tile.key} window exceeds the {raster.width}x{raster.height} raster")
    window = raster.data[:, tile.y0:tile.y0 + tile.h, tile.x0:tile.x0 + tile.w]
    return GeoRaster(window.copy(), raster.transform.shifted(tile.x0, tile.y0),
                     raster.nodata, dict(raster.metadata))


def edge_bands(tile: Tile, grid: TileGrid) -> list[Rect]:
    """Rectangles this tile shares with its edge-adjacent neighbours."""
    bands = []
    for nb in grid.neighbours(tile):
        band = tile.rect.intersect(nb.rect)
        if not band.empty:
            bands.append(band)
    return bands


def save_manifest(grid: TileGrid, path, transform=None) -> None:
    doc = grid.to_json()
    if transform is not None:
        doc["geotransform"] = transform.to_list()
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_manifest(path) -> TileGrid:
    return TileGrid.from_json(json.loads(Path(path).read_text()))


def tile_filename(tile: Tile, suffix: str = ".tif") -> str:
    return f"tile_{tile.grid_row}_{tile.grid_col}{suffix}"
