"""Superpixel colour features and their smoothing.

Features are stored column-wise, ``F[:, j]`` being superpixel ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .imgio import RasterImage
from .superpixel import SuperpixelScale


@dataclass
class FeatureMatrix:
    F: np.ndarray
    scale_id: int = 0
    smoothed: bool = False

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=np.float64)
        if self.F.ndim != 2 or self.F.shape[0] < 1:
            raise ValueError("feature matrix must be n x N with n >= 1")
        if not np.all(np.isfinite(self.F)):
            raise ValueError("non-finite features")

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def N(self) -> int:
        return self.F.shape[1]


def mlab(scale: SuperpixelScale, img: RasterImage) -> FeatureMatrix:
    """Mean L*a*b* colour of every superpixel."""
    if scale.label_map.shape != img.shape:
        raise ValueError("superpixel map and image differ in size")
    labels = scale.labels.ravel()
    flat = img.data.reshape(-1, 3)
    counts = np.bincount(labels, minlength=scale.N).astype(np.float64)
    sums = np.stack([np.bincount(labels, weights=flat[:, c], minlength=scale.N) for c in range(3)])
    return FeatureMatrix(sums / counts, scale_id=scale.scale_id)


def exponential_smooth(x: np.ndarray, alpha: float) -> np.ndarray:
    """Single exponential smoothing along axis 0; ``out[0] = x[0]``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    x = np.asarray(x, dtype=np.float64)
    if alpha == 1.0:
        return x.copy()
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, x.shape[0]):
        out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return out


def ikde_smooth(F: FeatureMatrix, alpha: float = 1.0, ordering: np.ndarray | None = None) -> FeatureMatrix:
    """Exponentially smooth feature columns visited in ``ordering``.

    The default ordering is the superpixel index order, i.e. raster order
    of each superpixel's first pixel.
    """
    if F.smoothed:
        raise ValueError("features are already smoothed")
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    order = np.arange(F.N) if ordering is None else np.asarray(ordering)
    out = F.F.copy()
    out[:, order] = exponential_smooth(F.F[:, order].T, alpha).T
    return replace(F, F=out, smoothed=True)


# -- comparison denoisers (image or feature level) --------------------------

GAUSS_SIGMA = 1.0
BILATERAL_SIGMA_SPATIAL = 5.0
BILATERAL_SIGMA_RANGE = 5.0
WINDOW_RADIUS = 2  # 5x5 / 5-tap


def gaussian_image(img: RasterImage) -> RasterImage:
    truncate = WINDOW_RADIUS / GAUSS_SIGMA
    data = np.stack(
        [ndimage.gaussian_filter(img.data[..., c], GAUSS_SIGMA, truncate=truncate, mode="nearest") for c in range(3)],
        axis=-1,
    )
    return RasterImage(data)


def bilateral_image(img: RasterImage) -> RasterImage:
    r = WINDOW_RADIUS
    data = img.data
    padded = np.pad(data, ((r, r), (r, r), (0, 0)), mode="edge")
    h, w, _ = data.shape
    acc = np.zeros_like(data)
    norm = np.zeros(data.shape[:2])
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            ws = np.exp(-(dy * dy + dx * dx) / (2 * BILATERAL_SIGMA_SPATIAL**2))
            wr = np.exp(-((shifted - data) ** 2).sum(-1) / (2 * BILATERAL_SIGMA_RANGE**2))
            wt = ws * wr
            acc += wt[..., None] * shifted
            norm += wt
    return RasterImage(acc / norm[..., None])


def ikde_image(img: RasterImage, alpha: float) -> RasterImage:
    """Exponential smoothing of pixels in raster order."""
    flat = img.data.reshape(-1, 3)
    return RasterImage(exponential_smooth(flat, alpha).reshape(img.data.shape))


def gaussian_features(F: FeatureMatrix) -> FeatureMatrix:
    truncate = WINDOW_RADIUS / GAUSS_SIGMA
    out = ndimage.gaussian_filter1d(F.F, GAUSS_SIGMA, axis=1, truncate=truncate, mode="nearest")
    return replace(F, F=out, smoothed=True)


def bilateral_features(F: FeatureMatrix) -> FeatureMatrix:
    r = WINDOW_RADIUS
    X = F.F
    N = X.shape[1]
    padded = np.pad(X, ((0, 0), (r, r)), mode="edge")
    acc = np.zeros_like(X)
    norm = np.zeros(N)
    for dt in range(-r, r + 1):
        shifted = padded[:, r + dt : r + dt + N]
        wt = np.exp(-dt * dt / (2 * BILATERAL_SIGMA_SPATIAL**2)) * np.exp(
            -((shifted - X) ** 2).sum(0) / (2 * BILATERAL_SIGMA_RANGE**2)
        )
        acc += wt * shifted
        norm += wt
    return replace(F, F=acc / norm, smoothed=True)
