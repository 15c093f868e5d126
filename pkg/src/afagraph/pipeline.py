"""End-to-end segmentation, dataset benchmarking and ablation runs."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import features as feat
from .cluster import (
    affinity_propagation,
    area_global_nodes,
    kmeans_cluster,
    select_global_nodes,
    similarity,
    spectral_cluster,
)
from .config import PipelineConfig
from .fusion import (
    AffinityGraph,
    Segmentation,
    adjacency_graph,
    bipartite,
    effective_groups,
    fuse,
    tcut,
    transfer_spectrum,
)
from .imgio import ImageFormatError, RasterImage, load_image, read_label_map, write_label_map, write_overlay
from .metrics import DimensionMismatch, GroundTruthSet, MetricReport, evaluate
from .nolrr import NolrrGraph, run_nolrr
from .subspace import spr_matrix, symmetrize, write_coo
from .superpixel import ScaleStack, SuperpixelScale, build_stack

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm")
LABEL_SUFFIXES = (".seg", ".pgm", ".csv")
DATA_ERRORS = (ImageFormatError, DimensionMismatch, FileNotFoundError)


class StageError(RuntimeError):
    """Failure inside one pipeline stage; ``cause`` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class DatasetError(ValueError):
    pass


@dataclass
class RunRecord:
    image_id: str
    config_hash: str
    stage_times: dict[str, float] = field(default_factory=dict)
    total_time: float = 0.0
    k_T: int = 0
    report: MetricReport | None = None


@contextmanager
def _stage(name: str, record: RunRecord):
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    finally:
        record.stage_times[name] = record.stage_times.get(name, 0.0) + time.perf_counter() - start


# -- per-scale stages ---------------------------------------------------------


def _denoise_image(img: RasterImage, cfg: PipelineConfig) -> RasterImage:
    if cfg.denoise_target != "image" or cfg.denoise == "none":
        return img
    if cfg.denoise == "gaussian":
        return feat.gaussian_image(img)
    if cfg.denoise == "bilateral":
        return feat.bilateral_image(img)
    return feat.ikde_image(img, cfg.alpha)


def scale_features(scale: SuperpixelScale, img: RasterImage, cfg: PipelineConfig) -> feat.FeatureMatrix:
    F = feat.mlab(scale, img)
    if cfg.denoise_target == "feature":
        if cfg.denoise == "ikde":
            return feat.ikde_smooth(F, cfg.alpha)
        if cfg.denoise == "gaussian":
            return feat.gaussian_features(F)
        if cfg.denoise == "bilateral":
            return feat.bilateral_features(F)
    return F


def global_nodes(scale: SuperpixelScale, F: feat.FeatureMatrix, cfg: PipelineConfig) -> np.ndarray:
    """Superpixels that take part in the long-range graph of this scale."""
    N = F.N
    if N < 2:
        return np.arange(N)
    if cfg.nodes == "area":
        return area_global_nodes(scale.areas)
    if cfg.nodes == "kmeans":
        return select_global_nodes(kmeans_cluster(F.F, 2, cfg.seed), cfg.node_rule)
    M = symmetrize(spr_matrix(F, cfg.psi, cfg.tau))
    if cfg.nodes == "kmeans+SPR":
        return select_global_nodes(spectral_cluster(M, 2, cfg.seed), cfg.node_rule)
    K = affinity_propagation(similarity(F, cfg.e, cfg.g)).K
    return select_global_nodes(spectral_cluster(M, min(K, N), cfg.seed), cfg.node_rule)


def scale_graph(scale: SuperpixelScale, F: feat.FeatureMatrix, nodes: np.ndarray, cfg: PipelineConfig) -> tuple[AffinityGraph, NolrrGraph | None]:
    if cfg.graph == "NOLRR":
        W, _ = run_nolrr(F.F, cfg.d, cfg.seed, cfg.lambda1, cfg.m_update)
        A = np.eye(F.N)
        return fuse(AffinityGraph(A, scale.scale_id), W), W
    A = adjacency_graph(scale, F, cfg.affinity)
    if cfg.graph == "A" or nodes.size == 0:
        return A, None
    W, _ = run_nolrr(F.F[:, nodes], cfg.d, cfg.seed, cfg.lambda1, cfg.m_update, node_index=nodes)
    return fuse(A, W), W


def _per_scale(scale: SuperpixelScale, img: RasterImage, cfg: PipelineConfig) -> tuple:
    rec = RunRecord("", "")
    with _stage("features", rec):
        F = scale_features(scale, img, cfg)
    with _stage("nodes", rec):
        nodes = global_nodes(scale, F, cfg)
    with _stage("graph", rec):
        graph, W = scale_graph(scale, F, nodes, cfg)
    return F, nodes, graph, W, rec.stage_times


def _dump_debug(debug_dir: Path, image_id: str, stack: ScaleStack, per_scale: list) -> None:
    debug_dir.mkdir(parents=True, exist_ok=True)
    for scale, (F, nodes, graph, W, _) in zip(stack, per_scale):
        stem = f"{image_id}_s{scale.scale_id}"
        np.savetxt(debug_dir / f"{stem}_features.csv", F.F.T, delimiter=",")
        write_label_map(scale.label_map, debug_dir / f"{stem}_superpixels.pgm")
        np.savetxt(debug_dir / f"{stem}_global_nodes.txt", nodes, fmt="%d")
        write_coo(graph.A, debug_dir / f"{stem}_affinity.coo")
        if W is not None:
            write_coo(W.W, debug_dir / f"{stem}_nolrr.coo")


# -- whole image ----------------------------------------------------------------


def segment_many(image, cfg: PipelineConfig, k_values: list[int] | None = None, image_id: str | None = None) -> tuple[list[Segmentation], RunRecord]:
    """Run the pipeline once and partition for every requested group count.

    The bipartite spectrum is computed once for the largest count and
    reused, so a sweep costs one eigen-solve.
    """
    cfg.validate()
    k_values = cfg.k_values if k_values is None else list(k_values)
    if image_id is None:
        image_id = Path(image).stem if isinstance(image, (str, Path)) else "image"
    chash = cfg.config_hash()
    rec = RunRecord(image_id=image_id, config_hash=chash)
    t0 = time.perf_counter()

    with _stage("load", rec):
        img = image if isinstance(image, RasterImage) else load_image(image)
        img = _denoise_image(img, cfg)
    with _stage("superpixels", rec):
        stack = build_stack(img, cfg.scales, workers=cfg.workers)

    t_scales = time.perf_counter()
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            per_scale = list(pool.map(lambda s: _per_scale(s, img, cfg), stack))
    else:
        per_scale = [_per_scale(s, img, cfg) for s in stack]
    wall = time.perf_counter() - t_scales
    sums = {name: sum(p[4].get(name, 0.0) for p in per_scale) for name in ("features", "nodes", "graph")}
    # overlapping scales: split the block's wall time in proportion to the work
    shrink = min(1.0, wall / max(sum(sums.values()), 1e-300))
    for name, t in sums.items():
        rec.stage_times[name] = t * shrink

    if cfg.debug_dir:
        _dump_debug(Path(cfg.debug_dir), image_id, stack, per_scale)

    with _stage("tcut", rec):
        graph = bipartite(stack, [p[2] for p in per_scale], cfg.beta)
        k_top = effective_groups(graph.B, max(k_values))
        spectrum = transfer_spectrum(graph.B, k_top)
        segs = [tcut(graph, k, cfg.seed, spectrum=spectrum, config_hash=chash) for k in k_values]

    if cfg.debug_dir:
        for s in segs:
            write_label_map(s.label_map, Path(cfg.debug_dir) / f"{image_id}_k{s.k_T}_{chash[:12]}.pgm")
    rec.total_time = time.perf_counter() - t0
    rec.k_T = segs[-1].k_T
    return segs, rec


def segment(image, cfg: PipelineConfig, k_T: int | None = None, image_id: str | None = None) -> tuple[Segmentation, RunRecord]:
    """Single segmentation at ``k_T`` (default: the config's k_T, else its sweep maximum)."""
    k = k_T if k_T is not None else (cfg.k_T if cfg.k_T is not None else cfg.kT_max)
    segs, rec = segment_many(image, cfg, [k], image_id)
    return segs[0], rec


def save_segmentation(seg: Segmentation, img: RasterImage | None, out_dir, image_id: str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{image_id}_k{seg.k_T}_{seg.config_hash[:12]}"
    path = out_dir / f"{stem}.pgm"
    write_label_map(seg.label_map, path)
    if img is not None:
        write_overlay(img, seg.label_map, out_dir / f"{stem}.png")
    return path


# -- datasets -------------------------------------------------------------------


@dataclass
class DatasetItem:
    image_id: str
    image: Path
    annotations: list[Path]


def scan_dataset(root) -> tuple[list[DatasetItem], list[str]]:
    """Images under ``images/`` with annotations under ``groundtruth/``.

    Annotations for image ``x`` are the files in ``groundtruth/x/`` or the
    files ``groundtruth/x_*``. Returns the usable items and the ids of
    images without ground truth.
    """
    root = Path(root)
    img_dir, gt_dir = root / "images", root / "groundtruth"
    if not img_dir.is_dir():
        raise DatasetError(f"missing directory {img_dir}")
    items, missing = [], []
    for path in sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        iid = path.stem
        found = []
        if (gt_dir / iid).is_dir():
            found = sorted(p for p in (gt_dir / iid).iterdir() if p.suffix.lower() in LABEL_SUFFIXES)
        if gt_dir.is_dir():
            found += sorted(p for p in gt_dir.glob(f"{iid}_*") if p.suffix.lower() in LABEL_SUFFIXES)
        if found:
            items.append(DatasetItem(iid, path, found))
        else:
            missing.append(iid)
    return items, missing


def _benchmark_one(item: DatasetItem, cfg: PipelineConfig) -> tuple[dict, RunRecord]:
    img = load_image(item.image)
    gt = GroundTruthSet([read_label_map(p, shape=img.shape) for p in item.annotations])
    segs, rec = segment_many(img, cfg, image_id=item.image_id)
    reports = [evaluate(s.label_map, gt, cfg.voi_base) for s in segs]
    best = int(np.argmax([r.pri for r in reports]))  # first best on ties
    rec.k_T = segs[best].k_T
    rec.report = reports[best]
    row = {"image_id": item.image_id, "k_T": segs[best].k_T, **reports[best].as_dict()}
    return row, rec


@dataclass
class BenchmarkResult:
    rows: list[dict]
    records: list[RunRecord]
    skipped: list[str]

    def means(self) -> dict[str, float]:
        if not self.rows:
            return {}
        return {k: float(np.mean([r[k] for r in self.rows])) for k in ("pri", "voi", "gce", "bde")}


def benchmark(root, cfg: PipelineConfig, limit: int | None = None) -> BenchmarkResult:
    """Best-PRI group count per image over the configured sweep."""
    items, missing = scan_dataset(root)
    for iid in missing:
        log.warning("no ground truth for %s; skipped", iid)
    if limit is not None:
        items = items[:limit]
    # images run in separate processes; each one then stays single-threaded
    inner = cfg.with_overrides(workers=1) if cfg.workers > 1 else cfg
    if cfg.workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            out = list(pool.map(_benchmark_one, items, [inner] * len(items)))
    else:
        out = [_benchmark_one(it, inner) for it in items]
    return BenchmarkResult([o[0] for o in out], [o[1] for o in out], missing)


ABLATION_FIELDS = ("mode", "n_images", "pri", "voi", "gce", "bde")


def default_ablation_grid() -> list[dict]:
    grid = [{"graph": g} for g in ("A", "NOLRR", "A+NOLRR")]
    grid += [{"nodes": n} for n in ("area", "kmeans", "kmeans+SPR", "APC+SPR")]
    for mode in ("gaussian", "bilateral", "ikde"):
        for target in ("image", "feature"):
            over = {"denoise": mode, "denoise_target": target}
            if mode == "ikde":
                over["alpha"] = 0.5
            grid.append(over)
    return grid


def mode_label(overrides: dict) -> str:
    return ",".join(f"{k}={v}" for k, v in overrides.items()) or "default"


def ablate(root, cfg: PipelineConfig, grid: list[dict], limit: int | None = None) -> list[dict]:
    """One aggregate benchmark row per configuration override."""
    rows = []
    for overrides in grid:
        result = benchmark(root, cfg.with_overrides(**overrides), limit)
        rows.append({"mode": mode_label(overrides), "n_images": len(result.rows), **result.means()})
    return rows
