"""AP/AR scoring of instance predictions against ground truth (COCO conventions).

Each image (tile) is matched independently; detections from all images are then
pooled by score to build one precision/recall curve per IoU threshold.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoGroundTruth
from .masks import SparseMask

IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))
LARGE_AREA = 96 ** 2
MAX_DETS = 100
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


@dataclass
class EvalInstance:
    mask: SparseMask
    score: float = 1.0

    @classmethod
    def from_dense(cls, mask, score: float = 1.0, x0: int = 0, y0: int = 0) -> "EvalInstance":
        return cls(SparseMask.from_dense(mask, x0, y0), float(score))

    @property
    def area(self) -> int:
        return self.mask.area

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        return self.mask.bbox


def box_iou(a, b) -> float:
    """IoU of two ``(x, y, w, h)`` boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    union_w = max(aw, 0) * max(ah, 0) + max(bw, 0) * max(bh, 0)
    iw = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    ih = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = iw * ih
    union = union_w - inter
    if union <= 0:
        raise ValueError("IoU is undefined for two empty boxes")
    return inter / union


def mask_iou(a: SparseMask, b: SparseMask) -> float:
    inter = a.intersection(b)
    union = a.area + b.area - inter
    if union == 0:
        raise ValueError("IoU is undefined for two empty masks")
    return inter / union


def iou(a, b) -> float:
    """IoU of two masks (dense arrays or ``SparseMask``) or two ``(x, y, w, h)`` boxes."""
    if isinstance(a, SparseMask) or isinstance(b, SparseMask) or np.ndim(a) == 2:
        if not isinstance(a, SparseMask):
            a = SparseMask.from_dense(a)
        if not isinstance(b, SparseMask):
            b = SparseMask.from_dense(b)
        return mask_iou(a, b)
    return box_iou(a, b)


def _iou_matrix(dets, gts, kind: str) -> np.ndarray:
    out = np.zeros((len(dets), len(gts)))
    for i, d in enumerate(dets):
        for j, g in enumerate(gts):
            if kind == "bbox":
                out[i, j] = box_iou(d.bbox, g.bbox)
            elif d.mask.rect.intersects(g.mask.rect):
                out[i, j] = mask_iou(d.mask, g.mask)
    return out


def _match_image(dets, gts, kind, thresholds, area_rng, max_dets):
    """Greedy matching for one image. Returns scores, match flags, ignore flags, #gt."""
    lo, hi = area_rng
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)[:max_dets]
    dets = [dets[i] for i in order]
    g_ignore = np.array([not (lo < g.area <= hi) for g in gts], dtype=bool)
    # non-ignored ground truth first, as in the reference implementation
    g_order = np.argsort(g_ignore, kind="stable")
    gts = [gts[j] for j in g_order]
    g_ignore = g_ignore[g_order]
    ious = _iou_matrix(dets, gts, kind)
    if kind == "bbox":
        d_area = np.array([d.bbox[2] * d.bbox[3] for d in dets])
    else:
        d_area = np.array([d.area for d in dets])
    nt, nd, ng = len(thresholds), len(dets), len(gts)
    matched = np.zeros((nt, nd), dtype=bool)
    d_ignore = np.zeros((nt, nd), dtype=bool)
    for ti, t in enumerate(thresholds):
        g_taken = np.zeros(ng, dtype=bool)
        for di in range(nd):
            best_iou, m = t, -1
            for gi in range(ng):
                if g_taken[gi]:
                    continue
                if m > -1 and not g_ignore[m] and g_ignore[gi]:
                    break
                if ious[di, gi] < best_iou:
                    continue
                best_iou, m = ious[di, gi], gi
            if m == -1:
                continue
            g_taken[m] = True
            matched[ti, di] = True
            d_ignore[ti, di] = g_ignore[m]
    outside = (d_area <= lo) | (d_area > hi) if nd else np.zeros(0, dtype=bool)
    d_ignore |= ~matched & outside[None, :]
    scores = np.array([d.score for d in dets], dtype=np.float64)
    return scores, matched, d_ignore, int((~g_ignore).sum())


def _accumulate(per_image, n_thr):
    """AP and recall per threshold from pooled per-image matches; NaN when no gt."""
    n_gt = sum(p[3] for p in per_image)
    if n_gt == 0:
        return np.full(n_thr, np.nan), np.full(n_thr, np.nan)
    scores = np.concatenate([p[0] for p in per_image]) if per_image else np.zeros(0)
    order = np.argsort(-scores, kind="mergesort")
    ap = np.zeros(n_thr)
    rec = np.zeros(n_thr)
    for ti in range(n_thr):
        m = np.concatenate([p[1][ti] for p in per_image])[order]
        ig = np.concatenate([p[2][ti] for p in per_image])[order]
        tp = np.cumsum(m & ~ig)
        fp = np.cumsum(~m & ~ig)
        keep = ~ig
        tp, fp = tp[keep], fp[keep]
        if tp.size == 0:
            continue
        recall = tp / n_gt
        precision = tp / (tp + fp)
        rec[ti] = recall[-1]
        precision = np.maximum.accumulate(precision[::-1])[::-1]
        idx = np.searchsorted(recall, RECALL_POINTS, side="left")
        q = np.where(idx < precision.size, precision[np.minimum(idx, precision.size - 1)], 0.0)
        ap[ti] = math.fsum(q) / RECALL_POINTS.size
    return ap, rec


def _pct(values) -> float | None:
    v = [x for x in values if not math.isnan(x)]
    if not v:
        return None
    return 100.0 * math.fsum(v) / len(v)


@dataclass
class MetricSet:
    AP1: float | None
    AP2: float | None
    AP3: float | None
    AP4: float | None
    AR1: float | None
    AR2: float | None


@dataclass
class MetricReport:
    bbox: MetricSet
    mask: MetricSet
    thresholds: tuple[float, ...] = IOU_THRESHOLDS
    large_area: float = LARGE_AREA
    max_dets: int = MAX_DETS

    def to_json(self) -> dict:
        return {
            "bbox": asdict(self.bbox),
            "mask": asdict(self.mask),
            "iou_thresholds": list(self.thresholds),
            "large_area_px": self.large_area,
            "max_dets": self.max_dets,
            "notes": "AP/AR in percent; large = GT mask area > large_area_px (COCO default assumed)",
        }


def _as_images(x) -> dict:
    if isinstance(x, dict):
        return x
    return {0: list(x)}


def _metric_set(preds, gts, kind, thresholds, large_area, max_dets) -> MetricSet:
    keys = sorted(set(preds) | set(gts), key=repr)
    out = {}
    for name, rng in (("all", (-math.inf, math.inf)), ("large", (large_area, math.inf))):
        per_image = [_match_image(list(preds.get(k, [])), list(gts.get(k, [])), kind,
                                  thresholds, rng, max_dets) for k in keys]
        out[name] = _accumulate(per_image, len(thresholds))
    ap_all, rec_all = out["all"]
    ap_large, rec_large = out["large"]

    def at(t):
        return _pct([ap_all[thresholds.index(t)]]) if t in thresholds else None

    return MetricSet(_pct(ap_all), at(0.5), at(0.75), _pct(ap_large), _pct(rec_all), _pct(rec_large))


def evaluate(preds, gts, thresholds=IOU_THRESHOLDS, large_area: float = LARGE_AREA,
             max_dets: int = MAX_DETS) -> MetricReport:
    """Score ``preds`` against ``gts``.

    Both are either lists of ``EvalInstance`` (one image) or dicts mapping an
    image key (e.g. a tile key) to such lists.
    """
    preds, gts = _as_images(preds), _as_images(gts)
    if sum(len(v) for v in gts.values()) == 0:
        raise NoGroundTruth("ground truth contains no instances; AP/AR are undefined")
    thresholds = tuple(float(t) for t in thresholds)
    if any(not 0.0 < t <= 1.0 for t in thresholds):
        raise ValueError("IoU thresholds must lie in (0, 1]")
    return MetricReport(
        _metric_set(preds, gts, "bbox", thresholds, large_area, max_dets),
        _metric_set(preds, gts, "mask", thresholds, large_area, max_dets),
        thresholds, large_area, max_dets,
    )


def detections_to_images(dets, use_scores: bool = True) -> dict:
    """Per-tile ``TileDetections`` list -> ``{tile_key: [EvalInstance]}`` in tile-local pixels."""
    out = {}
    for d in dets:
        out[d.tile.key] = [EvalInstance(SparseMask.from_dense(i.mask), i.score if use_scores else 1.0)
                           for i in d.instances]
    return out


def report_csv_rows(report: MetricReport) -> list[list]:
    header = ["kind", "AP1_pct", "AP2_pct", "AP3_pct", "AP4_pct", "AR1_pct", "AR2_pct"]
    rows = [header]
    for kind, ms in (("bbox", report.bbox), ("mask", report.mask)):
        rows.append([kind] + ["" if v is None else repr(float(v)) for v in asdict(ms).values()])
    return rows
