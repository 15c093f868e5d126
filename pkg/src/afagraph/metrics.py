"""Region and boundary agreement between a segmentation and ground truth.

PRI, VoI and GCE are computed from label contingency tables; BDE uses
exact Euclidean distance transforms of the boundary maps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imgio import LabelMap, boundary_mask


class DimensionMismatch(ValueError):
    pass


VOI_BASES = ("e", "2")
REPORT_FIELDS = ("image_id", "k_T", "pri", "voi", "gce", "bde")


@dataclass
class GroundTruthSet:
    annotations: list[LabelMap]

    def __post_init__(self):
        if not self.annotations:
            raise ValueError("ground-truth set is empty")
        shape = self.annotations[0].shape
        for a in self.annotations[1:]:
            if a.shape != shape:
                raise DimensionMismatch(f"annotation shapes differ: {shape} vs {a.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.annotations[0].shape

    def __len__(self) -> int:
        return len(self.annotations)


@dataclass
class MetricReport:
    pri: float
    voi: float
    gce: float
    bde: float
    per_annotation: list[dict] = field(default_factory=list)
    voi_base: str = "e"
    aggregation: str = "PRI: pairwise-probability over annotations; VoI/GCE/BDE: mean over annotations"

    def as_dict(self) -> dict:
        return {"pri": self.pri, "voi": self.voi, "gce": self.gce, "bde": self.bde}


def _labels(x) -> np.ndarray:
    return x.labels if isinstance(x, LabelMap) else np.asarray(x)


def _gt_list(gt) -> list[np.ndarray]:
    if isinstance(gt, GroundTruthSet):
        return [a.labels for a in gt.annotations]
    if isinstance(gt, (LabelMap, np.ndarray)):
        return [_labels(gt)]
    out = [_labels(g) for g in gt]
    if not out:
        raise ValueError("ground-truth set is empty")
    return out


def _check(seg: np.ndarray, gts: list[np.ndarray]) -> None:
    for g in gts:
        if g.shape != seg.shape:
            raise DimensionMismatch(f"segmentation {seg.shape} vs annotation {g.shape}")


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Joint label histogram of two equally shaped label arrays."""
    _, ia = np.unique(a.ravel(), return_inverse=True)
    _, ib = np.unique(b.ravel(), return_inverse=True)
    ia, ib = ia.ravel(), ib.ravel()
    nb = ib.max() + 1
    return np.bincount(ia * nb + ib, minlength=(ia.max() + 1) * nb).reshape(-1, nb).astype(np.float64)


def _pairs(x: np.ndarray) -> float:
    return float(np.sum(x * (x - 1) / 2.0))


def pri(seg, gt) -> float:
    """Probabilistic Rand index against one or more annotations."""
    s = _labels(seg)
    gts = _gt_list(gt)
    _check(s, gts)
    n = s.size
    total = n * (n - 1) / 2.0
    if total == 0:
        return 1.0
    seg_sizes = np.bincount(np.unique(s.ravel(), return_inverse=True)[1].ravel()).astype(np.float64)
    together_seg = _pairs(seg_sizes)
    together_gt = 0.0
    together_both = 0.0
    for g in gts:
        table = contingency(s, g)
        together_gt += _pairs(table.sum(axis=0))
        together_both += _pairs(table)
    K = len(gts)
    p_sum = together_gt / K
    cp_sum = together_both / K
    # sum over pairs of c p + (1 - c)(1 - p)
    agree = total - together_seg - p_sum + 2.0 * cp_sum
    return float(agree / total)


def _entropy(p: np.ndarray, log) -> float:
    p = p[p > 0]
    return float(-np.sum(p * log(p)))


def voi_single(seg: np.ndarray, g: np.ndarray, base: str = "e") -> float:
    if base not in VOI_BASES:
        raise ValueError(f"log base must be one of {VOI_BASES}")
    log = np.log2 if base == "2" else np.log
    table = contingency(seg, g) / seg.size
    pa = table.sum(axis=1)
    pb = table.sum(axis=0)
    ha, hb = _entropy(pa, log), _entropy(pb, log)
    nz = table > 0
    mi = float(np.sum(table[nz] * log(table[nz] / np.outer(pa, pb)[nz])))
    return max(0.0, ha + hb - 2.0 * mi)


def voi(seg, gt, base: str = "e") -> float:
    """Variation of information; natural log unless ``base == "2"``."""
    s = _labels(seg)
    gts = _gt_list(gt)
    _check(s, gts)
    return float(np.mean([voi_single(s, g, base) for g in gts]))


def gce_single(seg: np.ndarray, g: np.ndarray) -> float:
    table = contingency(seg, g)
    n = seg.size
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    # sum_p E(S1,S2,p) = sum_ij n_ij (r_i - n_ij) / r_i
    e12 = np.sum(table * (row - table) / row)
    e21 = np.sum(table * (col - table) / col)
    return float(min(e12, e21) / n)


def gce(seg, gt) -> float:
    s = _labels(seg)
    gts = _gt_list(gt)
    _check(s, gts)
    return float(np.mean([gce_single(s, g) for g in gts]))


def boundary_pixels(labels: np.ndarray) -> np.ndarray:
    """Boundary map; a single-region map falls back to the image border."""
    mask = boundary_mask(labels)
    if not mask.any():
        mask = np.zeros(labels.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
    return mask


def bde_single(seg: np.ndarray, g: np.ndarray) -> float:
    bs = boundary_pixels(seg)
    bg = boundary_pixels(g)
    dist_to_g = ndimage.distance_transform_edt(~bg)
    dist_to_s = ndimage.distance_transform_edt(~bs)
    return float((dist_to_g[bs].mean() + dist_to_s[bg].mean()) / 2.0)


def bde(seg, gt) -> float:
    """Boundary displacement error in pixels."""
    s = _labels(seg)
    gts = _gt_list(gt)
    _check(s, gts)
    return float(np.mean([bde_single(s, g) for g in gts]))


def evaluate(seg, gt, voi_base: str = "e") -> MetricReport:
    s = _labels(seg)
    gts = _gt_list(gt)
    _check(s, gts)
    per = [
        {"pri": pri(s, [g]), "voi": voi_single(s, g, voi_base), "gce": gce_single(s, g), "bde": bde_single(s, g)}
        for g in gts
    ]
    return MetricReport(
        pri=pri(s, gts),
        voi=float(np.mean([p["voi"] for p in per])),
        gce=float(np.mean([p["gce"] for p in per])),
        bde=float(np.mean([p["bde"] for p in per])),
        per_annotation=per,
        voi_base=voi_base,
    )


def write_report(rows: list[dict], path) -> None:
    """CSV with one row per image plus a trailing ``mean`` row when nonempty."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
        if rows:
            mean = {"image_id": "mean", "k_T": ""}
            for key in ("pri", "voi", "gce", "bde"):
                mean[key] = float(np.mean([r[key] for r in rows]))
            writer.writerow(mean)
