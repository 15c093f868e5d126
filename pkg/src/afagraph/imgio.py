"""Image and label-map I/O.

Images are decoded from 8-bit sRGB (PNG or binary PPM) and converted to
CIE L*a*b* under a D65 white point. Label maps are read from 16-bit PGM,
CSV grids or BSD ``.seg`` files and relabelled densely.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# sRGB primaries -> XYZ, D65
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = _RGB_TO_XYZ.sum(axis=1)

_EPSILON = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


class ImageFormatError(ValueError):
    """Raised for unreadable, unsupported or malformed image/label files."""


@dataclass
class RasterImage:
    """H x W image in L*a*b*; ``data`` has shape (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got {self.data.shape}")
        if self.data.shape[0] == 0 or self.data.shape[1] == 0:
            raise ValueError("zero-dimension image")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite pixel values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


@dataclass
class LabelMap:
    """Dense 0-based integer labelling of an H x W grid."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError("label map must be 2-D")
        if labels.size and labels.min() < 0:
            raise ValueError("negative labels")
        self.labels = relabel_dense(labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def num_labels(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


def relabel_dense(labels: np.ndarray) -> np.ndarray:
    """Map labels onto 0..K-1 in raster order of first occurrence."""
    flat = np.asarray(labels).ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()].reshape(np.shape(labels)).astype(np.int64)


# -- colour conversion -----------------------------------------------------


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert sRGB values in [0, 1] (last axis = channel) to L*a*b*."""
    rgb = np.asarray(rgb, dtype=np.float64)
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _EPSILON, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_srgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`srgb_to_lab`; output is clipped to [0, 1]."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f**3 > _EPSILON, f**3, (116.0 * f - 16.0) / _KAPPA)
    xyz = t * _WHITE_D65
    linear = np.clip(xyz @ _XYZ_TO_RGB.T, 0.0, 1.0)
    rgb = np.where(linear <= 0.0031308, 12.92 * linear, 1.055 * linear ** (1 / 2.4) - 0.055)
    return np.clip(rgb, 0.0, 1.0)


def lab_to_rgb8(lab: np.ndarray) -> np.ndarray:
    return np.rint(lab_to_srgb(lab) * 255.0).astype(np.uint8)


# -- images -----------------------------------------------------------------


def image_from_rgb8(rgb: np.ndarray) -> RasterImage:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ImageFormatError(f"expected RGB array, got shape {rgb.shape}")
    return RasterImage(srgb_to_lab(rgb.astype(np.float64) / 255.0))


def load_image(path) -> RasterImage:
    """Load a PNG or binary PPM (P6) file and convert it to L*a*b*."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise ImageFormatError(f"{path}: unsupported format {im.format}")
            if im.format == "PPM" and im.mode not in ("RGB",):
                raise ImageFormatError(f"{path}: only binary P6 PPM is supported")
            if im.width == 0 or im.height == 0:
                raise ImageFormatError(f"{path}: zero-dimension image")
            rgb = np.asarray(im.convert("RGB"))
    except (OSError, Image.UnidentifiedImageError) as exc:
        raise ImageFormatError(f"{path}: unreadable image ({exc})") from exc
    return image_from_rgb8(rgb)


# -- label maps -------------------------------------------------------------


def _read_pgm(raw: bytes) -> np.ndarray:
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P5":
        raise ImageFormatError(f"not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    body = raw[pos : pos + count * dtype.itemsize]
    if len(body) != count * dtype.itemsize:
        raise ImageFormatError("truncated PGM body")
    return np.frombuffer(body, dtype=dtype).reshape(height, width).astype(np.int64)


def _read_csv(text: str) -> np.ndarray:
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if not rows:
        raise ImageFormatError("empty CSV label grid")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ImageFormatError("ragged rows in CSV label grid")
    try:
        return np.array([[int(v) for v in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise ImageFormatError(f"non-integer label: {exc}") from exc


def read_seg(path) -> np.ndarray:
    """Read a Berkeley ``.seg`` annotation (run-length ``seg row col1 col2``)."""
    width = height = None
    lines = Path(path).read_text().splitlines()
    for i, line in enumerate(lines):
        key, _, value = line.partition(" ")
        if key == "width":
            width = int(value)
        elif key == "height":
            height = int(value)
        elif key == "data":
            body = lines[i + 1 :]
            break
    else:
        raise ImageFormatError(f"{path}: no data section")
    if width is None or height is None:
        raise ImageFormatError(f"{path}: missing width/height")
    labels = np.full((height, width), -1, dtype=np.int64)
    for line in body:
        if not line.strip():
            continue
        try:
            seg, row, c1, c2 = (int(v) for v in line.split())
        except ValueError as exc:
            raise ImageFormatError(f"{path}: bad run line {line!r}") from exc
        if not (0 <= row < height and 0 <= c1 <= c2 < width):
            raise ImageFormatError(f"{path}: run {line!r} outside {width}x{height}")
        labels[row, c1 : c2 + 1] = seg
    if labels.min() < 0:
        raise ImageFormatError(f"{path}: uncovered pixels")
    return labels


def read_label_map(path, shape: tuple[int, int] | None = None) -> LabelMap:
    """Read a 16-bit PGM, CSV grid or BSD ``.seg`` file as a dense LabelMap.

    If ``shape`` is given the grid must match it as (height, width).
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc
    if path.suffix.lower() == ".seg":
        labels = read_seg(path)
    elif raw[:2] == b"P5":
        labels = _read_pgm(raw)
    else:
        labels = _read_csv(raw.decode("ascii", errors="strict"))
    if labels.size == 0:
        raise ImageFormatError(f"{path}: empty label map")
    if labels.min() < 0:
        raise ImageFormatError(f"{path}: negative labels")
    if shape is not None and tuple(labels.shape) != tuple(shape):
        raise ImageFormatError(f"{path}: dimensions {labels.shape} do not match image {tuple(shape)}")
    return LabelMap(labels)


def write_label_map(seg: LabelMap, path) -> None:
    """Write as 16-bit binary PGM (or CSV when the suffix is ``.csv``)."""
    path = Path(path)
    labels = seg.labels
    if path.suffix.lower() == ".csv":
        with path.open("w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(labels.tolist())
        return
    if labels.max(initial=0) > 65535:
        raise ValueError("too many labels for a 16-bit PGM")
    header = f"P5\n{seg.width} {seg.height}\n65535\n".encode("ascii")
    path.write_bytes(header + labels.astype(">u2").tobytes())


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Pixels whose right or lower neighbour carries a different label."""
    mask = np.zeros(labels.shape, dtype=bool)
    mask[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    mask[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return mask


def render_overlay(img: RasterImage, seg: LabelMap, boundary_rgb=(255, 0, 0)) -> np.ndarray:
    """Region-mean colour fill with 1-pixel boundaries; returns uint8 RGB."""
    if img.shape != seg.shape:
        raise ValueError(f"image {img.shape} and segmentation {seg.shape} differ")
    labels = seg.labels.ravel()
    k = seg.num_labels
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    flat = img.data.reshape(-1, 3)
    means = np.stack([np.bincount(labels, weights=flat[:, c], minlength=k) for c in range(3)], axis=1)
    means /= counts[:, None]
    out = lab_to_rgb8(means)[labels].reshape(seg.height, seg.width, 3)
    out[boundary_mask(seg.labels)] = boundary_rgb
    return out


def write_overlay(img: RasterImage, seg: LabelMap, path) -> None:
    rgb = render_overlay(img, seg)
    try:
        Image.fromarray(rgb, mode="RGB").save(Path(path), format="PNG", optimize=False)
    except OSError as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc
