"""Georeferenced rasters: a minimal GeoTIFF reader/writer and the pixel/world affine.

Only north-up rasters are supported. The geotransform lives in the standard
GeoTIFF tags ModelPixelScale (33550) and ModelTiepoint (33922); nodata follows
the GDAL_NODATA (42113) ASCII convention and free-form key/value metadata is
stored as GDAL_METADATA (42112) XML.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple
from xml.etree import ElementTree

import numpy as np
import tifffile

from .errors import DataError, GeoreferenceMissing, UnsupportedRaster

TAG_PIXEL_SCALE = 33550
TAG_TIEPOINT = 33922
TAG_TRANSFORMATION = 34264
TAG_GEOKEYS = 34735
TAG_GDAL_METADATA = 42112
TAG_GDAL_NODATA = 42113

SUPPORTED_DTYPES = tuple(
    np.dtype(t) for t in ("uint8", "uint16", "int16", "int32", "float32", "float64")
)


class PixelPoint(NamedTuple):
    col: float
    row: float


class WorldPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class GeoTransform:
    """North-up affine: ``x = origin_x + col*res_x``, ``y = origin_y - row*res_y``."""

    origin_x: float
    origin_y: float
    res_x: float
    res_y: float

    def __post_init__(self):
        if not (self.res_x > 0 and self.res_y > 0):
            raise ValueError(f"resolution must be positive, got ({self.res_x}, {self.res_y})")

    def shifted(self, col0: float, row0: float) -> "GeoTransform":
        """Transform of a window whose upper-left pixel is (col0, row0) in this frame."""
        x, y = pixel_to_world(self, PixelPoint(col0, row0))
        return GeoTransform(x, y, self.res_x, self.res_y)

    def to_list(self) -> list[float]:
        return [self.origin_x, self.origin_y, self.res_x, self.res_y]


def pixel_to_world(gt: GeoTransform, p) -> WorldPoint:
    col, row = p
    return WorldPoint(gt.origin_x + np.multiply(col, gt.res_x), gt.origin_y - np.multiply(row, gt.res_y))


def world_to_pixel(gt: GeoTransform, w) -> PixelPoint:
    x, y = w
    return PixelPoint(np.subtract(x, gt.origin_x) / gt.res_x, np.subtract(gt.origin_y, y) / gt.res_y)


@dataclass(frozen=True)
class GeoRaster:
    """Band-major sample cube ``data[band, row, col]`` plus georeferencing.

    Samples are stored as-is, including nodata sentinels; use :meth:`valid`
    to get a mask of usable pixels.
    """

    data: np.ndarray
    transform: GeoTransform
    nodata: float | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[np.newaxis]
        if data.ndim != 3 or data.shape[0] < 1 or data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError(f"raster data must be (bands, height, width), got {data.shape}")
        if data.flags.writeable:
            data = data.copy()
            data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def band(self, i: int = 0) -> np.ndarray:
        return self.data[i]

    def valid(self, i: int = 0) -> np.ndarray:
        b = self.data[i]
        ok = np.ones(b.shape, dtype=bool)
        if np.issubdtype(b.dtype, np.floating):
            ok &= np.isfinite(b)
        if self.nodata is not None and not math.isnan(self.nodata):
            ok &= b != self.nodata
        return ok

    def with_data(self, data, nodata=None, metadata=None) -> "GeoRaster":
        return GeoRaster(
            np.asarray(data),
            self.transform,
            self.nodata if nodata is None else nodata,
            dict(self.metadata if metadata is None else metadata),
        )


def _geokeys() -> tuple[int, ...]:
    # version 1.1.0, 2 keys: GTModelType=projected, GTRasterType=PixelIsArea
    return (1, 1, 0, 2, 1024, 0, 1, 1, 1025, 0, 1, 1)


def _metadata_xml(meta: dict[str, str]) -> str:
    root = ElementTree.Element("GDALMetadata")
    for k in sorted(meta):
        item = ElementTree.SubElement(root, "Item", name=str(k))
        item.text = str(meta[k])
    return ElementTree.tostring(root, encoding="unicode")


def _parse_metadata(xml: str) -> dict[str, str]:
    try:
        root = ElementTree.fromstring(xml)
    except ElementTree.ParseError:
        return {}
    return {el.get("name"): (el.text or "") for el in root.iter("Item") if el.get("name")}


def _format_nodata(v: float, dtype: np.dtype) -> str:
    if math.isnan(v):
        return "nan"
    if np.issubdtype(dtype, np.integer) or float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_raster(raster: GeoRaster, path, compress: bool = False, tile: int | None = None) -> None:
    """Write ``raster`` as a planar GeoTIFF readable by :func:`read_raster`."""
    data = raster.data
    if data.dtype not in SUPPORTED_DTYPES:
        raise UnsupportedRaster(f"cannot write sample type {data.dtype}")
    gt = raster.transform
    extratags = [
        (TAG_PIXEL_SCALE, "d", 3, (gt.res_x, gt.res_y, 0.0), True),
        (TAG_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, gt.origin_x, gt.origin_y, 0.0), True),
        (TAG_GEOKEYS, "H", 12, _geokeys(), True),
    ]
    if raster.nodata is not None:
        extratags.append((TAG_GDAL_NODATA, "s", 0, _format_nodata(raster.nodata, data.dtype), True))
    if raster.metadata:
        extratags.append((TAG_GDAL_METADATA, "s", 0, _metadata_xml(raster.metadata), True))
    kwargs = {}
    if tile:
        kwargs["tile"] = (tile, tile)
    arr = data[0] if data.shape[0] == 1 else data
    tifffile.imwrite(
        Path(path),
        arr,
        photometric="minisblack",
        planarconfig="separate" if data.shape[0] > 1 else None,
        compression="zlib" if compress else None,
        extratags=extratags,
        metadata=None,
        software=False,
        **kwargs,
    )


def read_raster(path) -> GeoRaster:
    """Read a north-up GeoTIFF; raise if it carries no usable geotransform."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    try:
        tif = tifffile.TiffFile(path)
    except tifffile.TiffFileError as exc:
        raise UnsupportedRaster(f"{path}: not a TIFF ({exc})") from exc
    with tif:
        page = tif.pages[0]
        tags = page.tags
        data = page.asarray()
        axes = page.axes
        if data.dtype not in SUPPORTED_DTYPES:
            raise UnsupportedRaster(f"{path}: unsupported sample type {data.dtype}")
        if data.ndim == 2:
            data = data[np.newaxis]
        elif axes.endswith("S"):
            data = np.moveaxis(data, -1, 0)
        elif data.ndim != 3:
            raise UnsupportedRaster(f"{path}: unsupported layout {axes} {data.shape}")

        if TAG_TRANSFORMATION in tags:
            m = tags[TAG_TRANSFORMATION].value
            if abs(m[1]) > 0 or abs(m[4]) > 0:
                raise UnsupportedRaster(f"{path}: rotated geotransforms are not supported")
            transform = GeoTransform(float(m[3]), float(m[7]), float(m[0]), float(-m[5]))
        elif TAG_PIXEL_SCALE in tags and TAG_TIEPOINT in tags:
            sx, sy = tags[TAG_PIXEL_SCALE].value[:2]
            i, j, _, x, y, _ = tags[TAG_TIEPOINT].value[:6]
            transform = GeoTransform(float(x - i * sx), float(y + j * sy), float(sx), float(sy))
        else:
            raise GeoreferenceMissing(f"{path}: no ModelPixelScale/ModelTiepoint tags")

        nodata = None
        if TAG_GDAL_NODATA in tags:
            txt = str(tags[TAG_GDAL_NODATA].value).strip().rstrip("\x00")
            nodata = float("nan") if txt.lower() == "nan" else float(txt)
        meta = {}
        if TAG_GDAL_METADATA in tags:
            meta = _parse_metadata(str(tags[TAG_GDAL_METADATA].value))
    return GeoRaster(np.ascontiguousarray(data), transform, nodata, meta)
