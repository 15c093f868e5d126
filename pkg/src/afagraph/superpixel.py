"""Multi-scale over-segmentation.

Superpixels come either from a native Felzenszwalb-Huttenlocher pass over
the L*a*b* image or from externally produced label maps.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .imgio import LabelMap, RasterImage, read_label_map


@dataclass(frozen=True)
class FHParams:
    k: float = 100.0
    min_size: int = 20
    sigma: float = 0.8


DEFAULT_FH_SCALES = tuple(FHParams(k=k, min_size=20, sigma=0.8) for k in (50, 100, 150, 200, 300))


@dataclass
class SuperpixelScale:
    scale_id: int
    label_map: LabelMap
    adjacency: list[np.ndarray] = field(default_factory=list)
    areas: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        if self.areas is None:
            self.areas = np.bincount(self.label_map.labels.ravel(), minlength=self.N)
        if not self.adjacency:
            self.adjacency = region_adjacency(self.label_map.labels)

    @property
    def N(self) -> int:
        return self.label_map.num_labels

    @property
    def labels(self) -> np.ndarray:
        return self.label_map.labels


@dataclass
class ScaleStack:
    scales: list[SuperpixelScale]

    def __post_init__(self):
        if not self.scales:
            raise ValueError("scale stack is empty")
        shapes = {s.label_map.shape for s in self.scales}
        if len(shapes) != 1:
            raise ValueError(f"scales disagree on image size: {sorted(shapes)}")
        ids = [s.scale_id for s in self.scales]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate scale ids")

    def __len__(self) -> int:
        return len(self.scales)

    def __iter__(self):
        return iter(self.scales)

    def __getitem__(self, i) -> SuperpixelScale:
        return self.scales[i]

    @property
    def shape(self) -> tuple[int, int]:
        return self.scales[0].label_map.shape


def region_adjacency(labels: np.ndarray) -> list[np.ndarray]:
    """Sorted 4-connected neighbour lists for each label."""
    n = int(labels.max()) + 1
    pairs = np.concatenate(
        [
            np.stack([labels[:, :-1].ravel(), labels[:, 1:].ravel()], axis=1),
            np.stack([labels[:-1, :].ravel(), labels[1:, :].ravel()], axis=1),
        ]
    )
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.concatenate([pairs, pairs[:, ::-1]])
    pairs = np.unique(pairs, axis=0)
    splits = np.searchsorted(pairs[:, 0], np.arange(1, n))
    return [np.asarray(a, dtype=np.int64) for a in np.split(pairs[:, 1], splits)]


def _pixel_edges(data: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """8-connected pixel edges (each once) with Euclidean colour weights."""
    h, w, _ = data.shape
    idx = np.arange(h * w).reshape(h, w)
    src, dst = [], []
    for (a, b) in (
        (idx[:, :-1], idx[:, 1:]),
        (idx[:-1, :], idx[1:, :]),
        (idx[:-1, :-1], idx[1:, 1:]),
        (idx[:-1, 1:], idx[1:, :-1]),
    ):
        src.append(a.ravel())
        dst.append(b.ravel())
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    flat = data.reshape(-1, data.shape[2])
    weight = np.sqrt(((flat[lo] - flat[hi]) ** 2).sum(axis=1))
    return lo, hi, weight


def fh_segment(img: RasterImage, k_fh: float, min_size: int = 20, sigma: float = 0.8, scale_id: int = 0) -> SuperpixelScale:
    """Felzenszwalb-Huttenlocher graph segmentation on L*a*b* pixels.

    Edges are processed in ascending weight; ties are broken by
    (source, target) pixel index so the result is fully deterministic.
    """
    if k_fh <= 0:
        raise ValueError("k_fh must be positive")
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    data = img.data
    if sigma > 0:
        data = np.stack([ndimage.gaussian_filter(data[..., c], sigma, mode="nearest") for c in range(3)], axis=-1)
    h, w = img.shape
    src, dst, weight = _pixel_edges(data)
    order = np.lexsort((dst, src, weight))
    src_l = src[order].tolist()
    dst_l = dst[order].tolist()
    w_l = weight[order].tolist()

    n = h * w
    parent = list(range(n))
    size = [1] * n
    thresh = [k_fh] * n  # Int(C) + k/|C|, Int = 0 for singletons

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b, wt in zip(src_l, dst_l, w_l):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if wt <= thresh[ra] and wt <= thresh[rb]:
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
            # edges arrive in ascending order, so wt is the new max MST weight
            thresh[ra] = wt + k_fh / size[ra]

    if min_size > 1:
        for a, b in zip(src_l, dst_l):
            ra, rb = find(a), find(b)
            if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                if size[ra] < size[rb]:
                    ra, rb = rb, ra
                parent[rb] = ra
                size[ra] += size[rb]

    roots = np.array([find(i) for i in range(n)], dtype=np.int64).reshape(h, w)
    params = f"fh(k={k_fh:g},min_size={min_size},sigma={sigma:g})"
    return SuperpixelScale(scale_id=scale_id, label_map=LabelMap(roots), source=params)


def scale_from_label_map(label_map: LabelMap, scale_id: int = 0, source: str = "external") -> SuperpixelScale:
    return SuperpixelScale(scale_id=scale_id, label_map=label_map, source=source)


def build_stack(img: RasterImage, params: Sequence[FHParams | str | Path], workers: int = 1) -> ScaleStack:
    """One scale per FH setting or per external label-map path."""
    if len(params) == 0:
        raise ValueError("at least one scale is required")

    def make(item):
        i, p = item
        if isinstance(p, FHParams):
            return fh_segment(img, p.k, p.min_size, p.sigma, scale_id=i)
        return scale_from_label_map(read_label_map(p, shape=img.shape), scale_id=i, source=str(p))

    items = list(enumerate(params))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scales = list(pool.map(make, items))
    else:
        scales = [make(it) for it in items]
    return ScaleStack(scales)
