"""Command-line entry point: ``smotune {optimize,enhance,evaluate,shapes,synth}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    DecodeError,
    InvalidInput,
    InvalidParams,
    MissingPair,
    ObjectiveFailure,
    ShapeMismatch,
)

log = logging.getLogger("smotune")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
RUNLOG_NAME = "runlog.csv"
RESULT_NAME = "result.json"


class UsageError(Exception):
    pass


# -- optimize ------------------------------------------------------------------

def cmd_optimize(args) -> int:
    from .config import build_objective, dump_config, load_config
    from .smo import run

    cfg = load_config(args.config)
    overrides = {
        "seed": args.seed,
        "population_size": args.population_size,
        "max_evaluations": args.max_evaluations,
        "max_iterations": args.max_iterations,
        "output_dir": args.output_dir,
    }
    cfg = cfg.with_overrides(**overrides)
    objective, space = build_objective(cfg)
    out = cfg.resolve(cfg.output_dir) if args.output_dir is None else Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        runlog, best = run(objective, space, cfg.smo)
    except ObjectiveFailure as exc:
        if exc.log is not None:
            exc.log.to_csv(out / RUNLOG_NAME)
        log.error("objective failure: %s", exc)
        return EXIT_FAILURE
    runlog.to_csv(out / RUNLOG_NAME)
    runlog.write_result(out / RESULT_NAME, cfg.objective)
    (out / "config.json").write_text(dump_config(cfg))
    print(f"objective: {cfg.objective}")
    print(f"best objective: {runlog.best_objective!r}")
    for name, value in best.as_dict().items():
        print(f"  {name} = {value!r}")
    print(f"evaluations: {runlog.evaluations}  iterations: {runlog.iterations}  "
          f"stop: {runlog.stop_reason} ({runlog.stop_detail})")
    return EXIT_OK


# -- enhance -------------------------------------------------------------------

def _png_files(root: Path) -> list:
    return sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() == ".png")


def _enhance_params(args):
    from .enhance import ClaheParams, PmdParams

    values = {}
    if args.params:
        try:
            values = json.loads(Path(args.params).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"params: cannot load {args.params}: {exc}") from None
        allowed = {"kappa", "lam", "iterations", "edge_fn", "clip_limit", "tiles", "tiles_x",
                   "tiles_y", "bins", "order"}
        if not isinstance(values, dict) or set(values) - allowed:
            raise ConfigError(f"params: expected an object with keys from {sorted(allowed)}")
    for key in ("kappa", "lam", "iterations", "edge_fn", "clip_limit", "tiles", "bins", "order"):
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    tiles = values.get("tiles", 8)
    try:
        pmd = PmdParams(values.get("kappa", 0.1), values.get("lam", 0.2),
                        values.get("iterations", 10), values.get("edge_fn", "exponential"))
        cl = ClaheParams(values.get("clip_limit", 2.0), values.get("tiles_x", tiles),
                         values.get("tiles_y", tiles), values.get("bins", 256))
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from None
    order = values.get("order", "pmd_first")
    if order not in ("pmd_first", "clahe_first"):
        raise ConfigError(f"order: must be pmd_first or clahe_first, got {order!r}")
    return pmd, cl, order


def cmd_enhance(args) -> int:
    from .data import read_gray, write_gray
    from .enhance import EnhanceObjective, enhance, params_from_position
    from .rng import env_seed
    from .smo import SmoConfig, run

    src, dst = Path(args.input_dir), Path(args.output_dir)
    if not src.is_dir():
        raise UsageError(f"input directory {src} does not exist")
    pmd, cl, order = _enhance_params(args)
    files = _png_files(src)
    if not files:
        log.warning("no PNG files under %s; nothing to do", src)
        dst.mkdir(parents=True, exist_ok=True)
        return EXIT_OK

    images = {}
    for path in files:
        try:
            images[path] = read_gray(path)
        except DecodeError as exc:
            log.warning("skipping %s", exc)

    if args.tune and images:
        seed = args.seed if args.seed is not None else env_seed(0)
        sample = [images[p] for p in sorted(images)[: args.tune_samples]]
        objective = EnhanceObjective(sample, order=order)
        try:
            config = SmoConfig(population_size=args.population_size,
                               max_evaluations=args.max_evaluations,
                               max_groups=2, seed=seed)
        except ConfigError as exc:
            raise ConfigError(f"tuning: {exc}") from None
        runlog, best = run(objective, objective.space, config)
        pmd, cl = params_from_position(best, cl.bins)
        dst.mkdir(parents=True, exist_ok=True)
        runlog.to_csv(dst / "tuning_runlog.csv")
        runlog.write_result(dst / "tuning_result.json", objective.name)
        log.info("tuned parameters: %s", best.as_dict())

    applied = {"kappa": pmd.kappa, "lam": pmd.lam, "iterations": pmd.iterations,
               "edge_fn": pmd.edge_fn, "clip_limit": cl.clip_limit, "tiles_x": cl.tiles_x,
               "tiles_y": cl.tiles_y, "bins": cl.bins, "order": order}
    written = 0
    for path, img in images.items():
        target = dst / path.relative_to(src)
        target.parent.mkdir(parents=True, exist_ok=True)
        try:
            write_gray(target, enhance(img, pmd, cl, order))
        except (InvalidParams, InvalidInput) as exc:
            log.warning("skipping %s: %s", path, exc)
            continue
        written += 1
    dst.mkdir(parents=True, exist_ok=True)
    (dst / "applied_params.json").write_text(json.dumps(applied, indent=2, sort_keys=True) + "\n")
    print(f"enhanced {written} of {len(files)} images into {dst}")
    return EXIT_OK


# -- evaluate ------------------------------------------------------------------

def _mask_dir(path: Path) -> Path:
    return path / "masks" if (path / "masks").is_dir() else path


def score_directories(pred_dir, gt_dir, num_classes=None) -> dict:
    """Per-image :class:`MetricsReport` for every id present in both directories.

    Raises :class:`MissingPair` naming any id found in only one of them.
    """
    from .data import list_ids, read_mask
    from .metrics import macro_report

    pred_dir, gt_dir = _mask_dir(Path(pred_dir)), _mask_dir(Path(gt_dir))
    pred_ids, gt_ids = set(list_ids(pred_dir)), set(list_ids(gt_dir))
    only = sorted(pred_ids ^ gt_ids)
    if only:
        where = ["prediction" if i in pred_ids else "ground truth" for i in only]
        raise MissingPair("unpaired ids: " + ", ".join(f"{i} (only in {w})" for i, w in zip(only, where)))
    masks = {i: (read_mask(pred_dir / f"{i}.png"), read_mask(gt_dir / f"{i}.png")) for i in sorted(gt_ids)}
    if num_classes is None:
        top = max((max(int(p.max(initial=0)), int(g.max(initial=0))) for p, g in masks.values()), default=1)
        num_classes = max(top + 1, 2)
    reports = {}
    for i, (p, g) in masks.items():
        if p.shape != g.shape:
            raise ShapeMismatch(f"{i}: prediction {p.shape} vs ground truth {g.shape}")
        reports[i] = macro_report(p, g, num_classes)
    return reports


def metrics_csv(reports: dict) -> str:
    from .metrics import CSV_COLUMNS, dataset_rows

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(dataset_rows(reports))
    return buf.getvalue()


def cmd_evaluate(args) -> int:
    from .metrics import pooled_report

    reports = score_directories(args.pred_dir, args.gt_dir, args.num_classes)
    if not reports:
        raise UsageError("no masks to evaluate")
    text = metrics_csv(reports)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    pooled = pooled_report(reports[k] for k in sorted(reports))
    print(f"images: {len(reports)}")
    print(f"overall accuracy: {pooled.overall_accuracy:.6f}")
    print(f"mean dice: {pooled.mean_dice:.6f}")
    print(f"mean IoU: {pooled.mean_iou:.6f}")
    return EXIT_OK


# -- shapes --------------------------------------------------------------------

def cmd_shapes(args) -> int:
    from .arch import TensorShape, format_table, verify_alignment

    report = verify_alignment(TensorShape(args.size, args.size, args.channels))
    sys.stdout.write(format_table(report))
    if not report.ok:
        for s in report.failures:
            log.error("%s: %s", s.name, s.detail)
        return EXIT_FAILURE
    return EXIT_OK


# -- synth ---------------------------------------------------------------------

def cmd_synth(args) -> int:
    from .data import save_dataset, synth_dataset
    from .rng import env_seed

    if args.n < 1:
        raise UsageError("n must be >= 1")
    seed = args.seed if args.seed is not None else env_seed(0)
    pairs = synth_dataset(args.n, seed, args.size)
    try:
        save_dataset(pairs, args.out)
    except OSError as exc:
        log.error("cannot write dataset: %s", exc)
        return EXIT_FAILURE
    print(f"wrote {len(pairs)} image/mask pairs to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smotune", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run SMO on a configured objective")
    p.add_argument("config", help="JSON run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--population-size", type=int)
    p.add_argument("--max-evaluations", type=int)
    p.add_argument("--max-iterations", type=int)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("enhance", help="PMD + CLAHE enhancement of a PNG tree")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--params", help="JSON file with enhancement parameters")
    p.add_argument("--kappa", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--edge-fn", choices=("exponential", "rational"))
    p.add_argument("--clip-limit", type=float)
    p.add_argument("--tiles", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--order", choices=("pmd_first", "clahe_first"))
    p.add_argument("--tune", action="store_true", help="tune parameters with SMO before applying")
    p.add_argument("--tune-samples", type=int, default=2)
    p.add_argument("--population-size", type=int, default=8)
    p.add_argument("--max-evaluations", type=int, default=40)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("-o", "--output", default="metrics.csv")
    p.add_argument("--num-classes", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("shapes", help="print and verify the encoder/decoder shape plan")
    p.add_argument("size", type=int)
    p.add_argument("--channels", type=int, default=3)
    p.set_defaults(func=cmd_shapes)

    p = sub.add_parser("synth", help="generate a synthetic cell dataset")
    p.add_argument("n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, MissingPair, ShapeMismatch, InvalidInput, InvalidParams) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ObjectiveFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
