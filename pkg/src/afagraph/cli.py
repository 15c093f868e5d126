"""Command-line entry point: segment, benchmark, ablate, metrics."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from .config import DENOISE_MODES, DENOISE_TARGETS, GRAPH_MODES, NODE_MODES, ConfigError, PipelineConfig
from .cluster import NODE_RULES
from .fusion import AFFINITY_MODES
from .imgio import ImageFormatError, load_image, read_label_map
from .metrics import DimensionMismatch, GroundTruthSet, evaluate, write_report
from .nolrr import M_UPDATES
from .pipeline import (
    ABLATION_FIELDS,
    DATA_ERRORS,
    DatasetError,
    StageError,
    ablate,
    benchmark,
    default_ablation_grid,
    save_segmentation,
    segment,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3
DATASET_ENV = "AFA_DATASET_ROOT"

log = logging.getLogger("afagraph")

# flag name -> (type, choices)
_OVERRIDES = {
    "alpha": (float, None),
    "psi": (int, None),
    "tau": (float, None),
    "e": (float, None),
    "g": (float, None),
    "d": (int, None),
    "lambda1": (float, None),
    "beta": (float, None),
    "affinity": (str, AFFINITY_MODES),
    "node_rule": (str, NODE_RULES),
    "m_update": (str, M_UPDATES),
    "k_T": (int, None),
    "kT_min": (int, None),
    "kT_max": (int, None),
    "seed": (int, None),
    "denoise": (str, DENOISE_MODES),
    "denoise_target": (str, DENOISE_TARGETS),
    "graph": (str, GRAPH_MODES),
    "nodes": (str, NODE_MODES),
    "voi_base": (str, ("e", "2")),
    "workers": (int, None),
    "debug_dir": (str, None),
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML file; flags override its values")
    p.add_argument("--scale-map", action="append", default=None, metavar="PATH",
                   help="use an external superpixel label map as a scale (repeatable)")
    for name, (typ, choices) in _OVERRIDES.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, choices=choices, default=None)


def _config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    over = {k: getattr(args, k) for k in _OVERRIDES if getattr(args, k) is not None}
    if args.scale_map:
        over["scales"] = [str(p) for p in args.scale_map]
    return cfg.with_overrides(**over) if over else cfg


def _dataset_root(arg) -> Path:
    root = arg or os.environ.get(DATASET_ENV)
    if not root:
        raise DatasetError(f"no dataset given; pass a directory or set {DATASET_ENV}")
    return Path(root)


def cmd_segment(args) -> int:
    cfg = _config_from_args(args)
    img = load_image(args.image)
    seg, rec = segment(img, cfg, image_id=args.image.stem)
    path = save_segmentation(seg, img, args.out, args.image.stem)
    for note in seg.notes:
        log.warning(note)
    print(json.dumps({"labels": str(path), "k_T": seg.k_T, "config_hash": rec.config_hash,
                      "stage_times": rec.stage_times, "total_time": rec.total_time}))
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config_from_args(args)
    result = benchmark(_dataset_root(args.dataset), cfg, args.limit)
    out = args.out or Path(f"benchmark_{cfg.config_hash()[:12]}.csv")
    write_report(result.rows, out)
    if not result.rows:
        log.error("no images with ground truth found; wrote an empty report to %s", out)
        return EXIT_DATA
    print(json.dumps({"report": str(out), "n_images": len(result.rows), "skipped": result.skipped, **result.means()}))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    grid = json.loads(args.grid.read_text()) if args.grid else default_ablation_grid()
    rows = ablate(_dataset_root(args.dataset), cfg, grid, args.limit)
    out = args.out or Path(f"ablation_{cfg.config_hash()[:12]}.csv")
    with out.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=ABLATION_FIELDS, restval="")
        writer.writeheader()
        writer.writerows(rows)
    if not any(r["n_images"] for r in rows):
        log.error("no images with ground truth found")
        return EXIT_DATA
    print(json.dumps({"report": str(out), "modes": len(rows)}))
    return EXIT_OK


def cmd_metrics(args) -> int:
    seg = read_label_map(args.seg)
    gt = GroundTruthSet([read_label_map(p, shape=seg.shape) for p in args.gt])
    report = evaluate(seg, gt, args.voi_base)
    print(json.dumps({**report.as_dict(), "voi_base": report.voi_base, "per_annotation": report.per_annotation}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afagraph", description="Unsupervised multi-scale graph segmentation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("segment", help="segment one PNG/PPM image")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, default=Path("."))
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    for verb, func, helptext in (("benchmark", cmd_benchmark, "best-PRI sweep over a dataset"),
                                 ("ablate", cmd_ablate, "one benchmark row per mode")):
        p = sub.add_parser(verb, help=helptext)
        p.add_argument("dataset", nargs="?", type=Path, help=f"dataset root (default: ${DATASET_ENV})")
        p.add_argument("--out", type=Path)
        p.add_argument("--limit", type=int, help="use only the first N images")
        if verb == "ablate":
            p.add_argument("--grid", type=Path, help="JSON list of config overrides, one per mode")
        _add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("metrics", help="score an external label map")
    p.add_argument("seg", type=Path)
    p.add_argument("gt", type=Path, nargs="+")
    p.add_argument("--voi-base", dest="voi_base", choices=("e", "2"), default="e")
    p.set_defaults(func=cmd_metrics)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DATA_ERRORS + (DatasetError, OSError)):
        return EXIT_DATA
    return EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, StageError, DatasetError, ImageFormatError, DimensionMismatch, OSError, ValueError,
            ArithmeticError, AssertionError, RuntimeError) as exc:
        code = _exit_code(exc)
        print(f"afagraph: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
