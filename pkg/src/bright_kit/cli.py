"""Single entry point exposing the toolkit as subcommands.

    bright-kit stats     --pool p.json --vocab v.json [--test t.json] --out-dir d/
    bright-kit balance   --pool p.json --vocab v.json --top-k 351 --l-test 10
                         --l-train 50 --epochs 20 --seed S --out-dir d/ [--augmented a.json]
    bright-kit zeroshot  --seen vocab351.json --universe vocab600.json --pool rem.json
                         --per-class 10 --classes 107 --seed S --out-dir d/
    bright-kit augment   --deficits d.json --refs refs.json --vocab v.json --budget 50
                         --target per-deficit --ports mock|http --seed S --out-dir d/
    bright-kit evaluate  --gt test.json --preds model.jsonl --vocab v.json [--iou 0.5] --out-dir d/
    bright-kit perturb   --class ID --gt test.json --preds model.jsonl --vocab v.json --out-dir d/
    bright-kit compare   --a reportsA/ --b reportsB/ --out-dir d/

Exit codes: 0 success, 2 usage error, 3 data error, 4 I/O error.  Errors are
reported as one JSON object on stderr.  A JSON config file (``--config``) can
pre-set any parameter; explicit flags win.  Every artifact embeds the toolkit
version, the seed, and a hash of the algorithmic parameters, and identical
inputs plus identical seeds reproduce artifacts byte for byte.  The
``BRIGHT_KIT_LOG`` environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .augment import GenerationBudget, generate_valid_images, http_ports, mock_ports
from .balancer import BalanceConfig, build_splits, fill_deficits
from .errors import DataError
from .evaluator import (
    MatchConfig,
    evaluate,
    load_predictions,
    perturb_tp_flip,
    ranking_shift,
)
from .jsonio import read_json, write_json, write_json_lines
from .model import (
    Dataset,
    HoiInstance,
    ImageRecord,
    load_dataset,
    load_vocabulary,
    save_split,
)
from .stats import distribution, ratio_report, sort_classes, top_k
from .zeroshot import ZeroShotPlan, build_zeroshot_split, enumerate_candidates

logger = logging.getLogger("bright_kit")


def _make_meta(seed: int, params: dict) -> dict:
    """Reproducibility stamp embedded in every artifact.

    The hash covers algorithmic parameters only (never paths), so runs into
    different output directories still produce identical artifact bytes.
    """
    canon = json.dumps(params, sort_keys=True)
    return {
        "toolkit_version": __version__,
        "seed": seed,
        "config_hash": hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16],
    }


class _Config:
    """Layered parameter lookup: flag value, then config-file value, then default."""

    def __init__(self, path: str | None, section: str):
        self.values: dict = {}
        if path:
            raw = read_json(path)
            if not isinstance(raw, dict):
                raise DataError(f"{path}: config file must be a JSON object")
            self.values = raw
        self.section = section

    def get(self, key: str, flag_value, default=None):
        if flag_value is not None:
            return flag_value
        section = self.values.get(self.section, {})
        if isinstance(section, dict) and key in section:
            return section[key]
        if key in self.values:
            return self.values[key]
        return default


class _UsageError(Exception):
    """Missing or invalid command-line parameter; maps to exit code 2."""


def _required(cfg: _Config, key: str, flag_value):
    value = cfg.get(key, flag_value)
    if value is None:
        raise _UsageError(f"missing required parameter --{key.replace('_', '-')}")
    return value


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _resolve_vocab_path(pool_path, vocab_path):
    """Fall back to the pool file's vocabulary_ref when --vocab is omitted."""
    if vocab_path is not None:
        return vocab_path
    raw = read_json(pool_path)
    ref = raw.get("vocabulary_ref") if isinstance(raw, dict) else None
    if not ref:
        raise _UsageError("missing required parameter --vocab")
    candidate = Path(pool_path).parent / ref
    return candidate if candidate.exists() else Path(ref)


def _cmd_stats(args) -> int:
    cfg = _Config(args.config, "stats")
    pool_path = _required(cfg, "pool", args.pool)
    vocab_path = _resolve_vocab_path(pool_path, cfg.get("vocab", args.vocab))
    test_path = cfg.get("test", args.test)
    out_dir = Path(_required(cfg, "out_dir", args.out_dir))
    seed = int(cfg.get("seed", args.seed, 0))

    vocab = load_vocabulary(vocab_path)
    pool = load_dataset(pool_path, vocab)
    dist = distribution(pool)
    ordered = sort_classes(dist, vocab)

    report = {
        "meta": _make_meta(seed, {"command": "stats"}),
        "images": len(pool),
        "instances": dist.total_instances,
        "max_count": dist.max_count,
        "min_count": dist.min_count,
        "median_count": dist.median_count,
        "median_count_including_zero": distribution(pool, include_zero=True).median_count,
        "classes": len(vocab),
        "sorted_class_ids": list(ordered.class_ids),
    }
    header = ["class_id", "verb", "object", "count"]
    rows = [
        [c.class_id, c.verb_name, c.object_name, dist.count(c.class_id)]
        for c in vocab
    ]

    if test_path:
        test = load_dataset(test_path, vocab)
        test_dist = distribution(test)
        ratios = ratio_report(pool, test)
        report["test"] = {
            "images": len(test),
            "instances": test_dist.total_instances,
            "max_count": test_dist.max_count,
            "min_count": test_dist.min_count,
            "median_count": test_dist.median_count,
        }
        report["ratios"] = [
            {
                "class_id": r.class_id,
                "train_count": r.train_count,
                "test_count": r.test_count,
                "ratio": r.ratio,
            }
            for r in ratios
        ]
        header = ["class_id", "verb", "object", "train_count", "test_count", "ratio"]
        by_id = {r.class_id: r for r in ratios}
        rows = [
            [
                c.class_id,
                c.verb_name,
                c.object_name,
                by_id[c.class_id].train_count,
                by_id[c.class_id].test_count,
                "undefined" if by_id[c.class_id].ratio is None else by_id[c.class_id].ratio,
            ]
            for c in vocab
        ]

    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "stats.json", report)
    _write_csv(out_dir / "per_class.csv", header, rows)
    print(f"stats: {len(pool)} images, {dist.total_instances} instances -> {out_dir}")
    return 0


def _cmd_balance(args) -> int:
    cfg = _Config(args.config, "balance")
    pool_path = _required(cfg, "pool", args.pool)
    vocab_path = _required(cfg, "vocab", args.vocab)
    k = int(_required(cfg, "top_k", args.top_k))
    l_test = int(_required(cfg, "l_test", args.l_test))
    l_train = int(_required(cfg, "l_train", args.l_train))
    epochs = int(cfg.get("epochs", args.epochs, 20))
    seed = int(cfg.get("seed", args.seed, 0))
    out_dir = Path(_required(cfg, "out_dir", args.out_dir))
    augmented_path = cfg.get("augmented", args.augmented)

    vocab = load_vocabulary(vocab_path)
    pool = load_dataset(pool_path, vocab)
    classes = top_k(sort_classes(distribution(pool), vocab), k)

    # Test pass consumes the base seed; the train pass uses seed + 1.
    test_cfg = BalanceConfig(l_test, epochs=epochs, seed=seed, top_k=k)
    train_cfg = BalanceConfig(l_train, epochs=epochs, seed=seed + 1, top_k=k)
    result = build_splits(pool, classes, test_cfg, train_cfg)

    train = result.train
    if augmented_path and result.train_deficits:
        augmented = load_dataset(augmented_path, vocab)
        train = fill_deficits(train, result.train_deficits, augmented)
        result.audit.filled_from_augmented = dict(result.train_deficits)
        result.audit.train_images = len(train)
        result.audit.train_instances = train.total_instances

    params = {
        "command": "balance",
        "top_k": k,
        "l_test": l_test,
        "l_train": l_train,
        "epochs": epochs,
    }
    meta = _make_meta(seed, params)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_split(result.test, out_dir / "test.json", meta=meta)
    save_split(train, out_dir / "train.json", meta=meta)
    write_json(
        out_dir / "deficits.json",
        {str(c): n for c, n in sorted(result.train_deficits.items())},
    )
    write_json(out_dir / "audit.json", {"meta": meta, **result.audit.to_dict()})
    print(
        f"balance: test {len(result.test)} images / {result.test.total_instances} "
        f"instances, train {len(train)} images / {train.total_instances} instances, "
        f"{len(result.train_deficits)} deficit classes -> {out_dir}"
    )
    return 0


def _cmd_zeroshot(args) -> int:
    cfg = _Config(args.config, "zeroshot")
    seen_path = _required(cfg, "seen", args.seen)
    universe_path = _required(cfg, "universe", args.universe)
    pool_path = _required(cfg, "pool", args.pool)
    per_class = int(cfg.get("per_class", args.per_class, 10))
    budget = int(cfg.get("classes", args.classes, 107))
    epochs = int(cfg.get("epochs", args.epochs, 20))
    seed = int(cfg.get("seed", args.seed, 0))
    out_dir = Path(_required(cfg, "out_dir", args.out_dir))

    seen = load_vocabulary(seen_path)
    universe = load_vocabulary(universe_path)
    pool = load_dataset(pool_path, universe)
    candidates = enumerate_candidates(seen, universe)
    plan = ZeroShotPlan(
        candidate_classes=tuple(candidates),
        source_pool=pool,
        instances_per_class=per_class,
        class_budget=budget,
    )
    result = build_zeroshot_split(
        plan, BalanceConfig(per_class, epochs=epochs, seed=seed)
    )

    meta = _make_meta(
        seed,
        {"command": "zeroshot", "per_class": per_class, "classes": budget, "epochs": epochs},
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    save_split(result.dataset, out_dir / "zeroshot.json", meta=meta)
    write_json(out_dir / "zeroshot_report.json", {"meta": meta, **result.to_report_dict()})
    print(
        f"zeroshot: {len(result.selected_class_ids)} classes x {per_class} = "
        f"{result.dataset.total_instances} instances -> {out_dir}"
    )
    return 0


def _cmd_augment(args) -> int:
    cfg = _Config(args.config, "augment")
    deficits_path = _required(cfg, "deficits", args.deficits)
    refs_path = _required(cfg, "refs", args.refs)
    vocab_path = _required(cfg, "vocab", args.vocab)
    budget = int(cfg.get("budget", args.budget, 50))
    target_raw = cfg.get("target", args.target, "per-deficit")
    ports_kind = cfg.get("ports", args.ports, "mock")
    http_base = cfg.get("http_base", args.http_base)
    seed = int(cfg.get("seed", args.seed, 0))
    out_dir = Path(_required(cfg, "out_dir", args.out_dir))

    vocab = load_vocabulary(vocab_path)
    refs = load_dataset(refs_path, vocab)
    raw_deficits = read_json(deficits_path)
    if not isinstance(raw_deficits, dict):
        raise DataError(f"{deficits_path}: deficits file must be a JSON object")
    deficits = {int(c): int(n) for c, n in raw_deficits.items()}

    if ports_kind == "mock":
        ports = mock_ports()
    elif ports_kind == "http":
        if not http_base:
            raise DataError("--http-base is required with --ports http")
        ports = http_ports(http_base)
    else:
        raise DataError(f"--ports must be 'mock' or 'http', got {ports_kind!r}")

    records: list[ImageRecord] = []
    attempt_rows: list[dict] = []
    summary: dict[str, dict] = {}
    for class_id in sorted(deficits):
        cls = vocab.get(class_id)
        target = deficits[class_id] if target_raw == "per-deficit" else int(target_raw)
        if target <= 0:
            continue
        gen = generate_valid_images(
            cls,
            GenerationBudget(max_attempts_per_class=budget, target_valid=target),
            ports,
            refs,
            seed=seed + class_id,  # documented per-class stream derivation
        )
        for rec in gen.attempts:
            attempt_rows.append({"class_id": class_id, **rec.to_dict()})
        summary[str(class_id)] = {
            "status": gen.status,
            "valid_images": len(gen.valid_images),
            "attempts": len(gen.attempts),
            "paraphrase_events": gen.paraphrase_events,
            "generator_calls": gen.generator_calls,
        }
        for i, valid in enumerate(gen.valid_images):
            boxes = [b for p in valid.pairs for b in (p.human_box, p.object_box)]
            width = max(1, int(max(b.x2 for b in boxes)) + 1)
            height = max(1, int(max(b.y2 for b in boxes)) + 1)
            instances = tuple(
                HoiInstance(p.human_box, p.object_box, class_id, "generated")
                for p in valid.pairs
            )
            records.append(
                ImageRecord(
                    image_id=f"aug_{class_id}_{i:04d}",
                    file_name=valid.image_ref,
                    width=width,
                    height=height,
                    instances=instances,
                )
            )

    augmented = Dataset(records, vocab, vocabulary_ref=str(vocab_path))
    meta = _make_meta(
        seed,
        {"command": "augment", "budget": budget, "target": str(target_raw), "ports": ports_kind},
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    save_split(augmented, out_dir / "augmented.json", meta=meta)
    write_json_lines(out_dir / "attempts.jsonl", attempt_rows)
    write_json(out_dir / "augment_report.json", {"meta": meta, "classes": summary})
    print(
        f"augment: {len(records)} generated images for {len(deficits)} deficit "
        f"classes -> {out_dir}"
    )
    return 0


def _cmd_evaluate(args) -> int:
    cfg = _Config(args.config, "evaluate")
    gt_path = _required(cfg, "gt", args.gt)
    preds_path = _required(cfg, "preds", args.preds)
    vocab_path = _required(cfg, "vocab", args.vocab)
    iou = float(cfg.get("iou", args.iou, 0.5))
    ap_method = cfg.get("ap_method", args.ap_method, "all_point")
    seed = int(cfg.get("seed", args.seed, 0))
    out_dir = Path(_required(cfg, "out_dir", args.out_dir))

    vocab = load_vocabulary(vocab_path)
    gt = load_dataset(gt_path, vocab)
    preds = load_predictions(preds_path, vocab)
    report = evaluate(preds, gt, vocab, MatchConfig(iou_threshold=iou, ap_method=ap_method))

    meta = _make_meta(
        seed, {"command": "evaluate", "iou": iou, "ap_method": ap_method}
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "report.json", {"meta": meta, **report.to_dict()})
    _write_csv(
        out_dir / "per_class_ap.csv",
        ["class_id", "verb", "object", "ap"],
        [
            [c, vocab.get(c).verb_name, vocab.get(c).object_name, ap]
            for c, ap in sorted(report.per_class_ap.items())
        ],
    )
    print(f"evaluate: mAP {report.mean_ap:.4f} over {report.num_evaluated} classes -> {out_dir}")
    return 0


def _cmd_perturb(args) -> int:
    cfg = _Config(args.config, "perturb")
    gt_path = _required(cfg, "gt", args.gt)
    preds_path = _required(cfg, "preds", args.preds)
    vocab_path = _required(cfg, "vocab", args.vocab)
    class_id = int(_required(cfg, "class_id", args.class_id))
    iou = float(cfg.get("iou", args.iou, 0.5))
    flip = cfg.get("flip", args.flip, "top")
    seed = int(cfg.get("seed", args.seed, 0))
    out_dir = Path(_required(cfg, "out_dir", args.out_dir))

    vocab = load_vocabulary(vocab_path)
    gt = load_dataset(gt_path, vocab)
    preds = load_predictions(preds_path, vocab)
    result = perturb_tp_flip(preds, gt, class_id, MatchConfig(iou_threshold=iou), flip=flip)

    meta = _make_meta(
        seed, {"command": "perturb", "class_id": class_id, "iou": iou, "flip": flip}
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "perturb.json", {"meta": meta, **result.to_dict()})
    print(
        f"perturb: class {class_id} AP {result.original_ap:.4f} -> "
        f"{result.perturbed_ap:.4f} ({result.relative_drop:.1%} drop) -> {out_dir}"
    )
    return 0


def _load_report_dir(path: str) -> dict[str, float]:
    reports = {}
    for f in sorted(Path(path).glob("*.json")):
        raw = read_json(f)
        if not isinstance(raw, dict) or "mean_ap" not in raw:
            raise DataError(f"{f}: report file must contain a 'mean_ap' field")
        reports[f.stem] = float(raw["mean_ap"])
    if not reports:
        raise DataError(f"{path}: no report JSON files found")
    return reports


def _cmd_compare(args) -> int:
    cfg = _Config(args.config, "compare")
    a_dir = _required(cfg, "a", args.a)
    b_dir = _required(cfg, "b", args.b)
    seed = int(cfg.get("seed", args.seed, 0))
    out_dir = Path(_required(cfg, "out_dir", args.out_dir))

    rows = ranking_shift(_load_report_dir(a_dir), _load_report_dir(b_dir))
    meta = _make_meta(seed, {"command": "compare"})
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "ranking.json", {"meta": meta, "rows": [r.to_dict() for r in rows]})
    _write_csv(
        out_dir / "ranking.csv",
        ["model", "map_a", "rank_a", "map_b", "rank_b", "delta"],
        [[r.model, r.map_a, r.rank_a, r.map_b, r.rank_b, r.delta] for r in rows],
    )
    for r in rows:
        arrow = "=" if r.delta == 0 else ("up" if r.delta > 0 else "down")
        print(
            f"{r.model}: {r.map_a} (rank {r.rank_a}) -> {r.map_b} "
            f"(rank {r.rank_b}, {arrow} {abs(r.delta)})"
        )
    return 0


# ---------------------------------------------------------------------------
# Parser assembly and entry point
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="PRNG seed (default 0)")
    sub.add_argument("--config", default=None, help="JSON config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bright-kit",
        description="Balanced benchmark construction and re-evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"bright-kit {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("stats", help="distribution diagnostics for a dataset")
    p.add_argument("--pool", help="annotation file to analyze")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--test", default=None, help="optional test split for ratio report")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_stats)

    p = subs.add_parser("balance", help="build balanced test and train splits")
    p.add_argument("--pool", help="unified annotation file (real images only)")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--top-k", dest="top_k", type=int, help="number of classes to balance")
    p.add_argument("--l-test", dest="l_test", type=int, help="test instances per class")
    p.add_argument("--l-train", dest="l_train", type=int, help="train instances per class")
    p.add_argument("--epochs", type=int, default=None, help="add/remove rounds (default 20)")
    p.add_argument("--augmented", default=None, help="fill train deficits from this file")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_balance)

    p = subs.add_parser("zeroshot", help="build the balanced zero-shot test split")
    p.add_argument("--seen", help="seen (training) vocabulary file")
    p.add_argument("--universe", help="full vocabulary file")
    p.add_argument("--pool", help="real images unused by train/test")
    p.add_argument("--per-class", dest="per_class", type=int, default=None)
    p.add_argument("--classes", type=int, default=None, help="class budget (default 107)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_zeroshot)

    p = subs.add_parser("augment", help="generate and filter images for deficit classes")
    p.add_argument("--deficits", help="deficits JSON from the balance step")
    p.add_argument("--refs", help="reference annotation file for prompt retrieval")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--budget", type=int, default=None, help="max attempts per class")
    p.add_argument("--target", default=None, help="valid images per class, or 'per-deficit'")
    p.add_argument("--ports", choices=["mock", "http"], default=None)
    p.add_argument("--http-base", dest="http_base", default=None, help="base URL for http ports")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_augment)

    p = subs.add_parser("evaluate", help="score a prediction dump against a split")
    p.add_argument("--gt", help="ground-truth annotation file")
    p.add_argument("--preds", help="JSON-lines prediction dump")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--iou", type=float, default=None, help="pair IoU threshold (default 0.5)")
    p.add_argument(
        "--ap-method", dest="ap_method", choices=["all_point", "eleven_point"], default=None
    )
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_evaluate)

    p = subs.add_parser("perturb", help="TP-flip sensitivity probe for one class")
    p.add_argument("--class", dest="class_id", type=int, help="class id to probe")
    p.add_argument("--gt", help="ground-truth annotation file")
    p.add_argument("--preds", help="JSON-lines prediction dump")
    p.add_argument("--vocab", help="vocabulary file")
    p.add_argument("--iou", type=float, default=None)
    p.add_argument("--flip", choices=["top", "lowest"], default=None)
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_perturb)

    p = subs.add_parser("compare", help="ranking shifts between two report directories")
    p.add_argument("--a", help="directory of report JSONs (benchmark A)")
    p.add_argument("--b", help="directory of report JSONs (benchmark B)")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    _add_common(p)
    p.set_defaults(handler=_cmd_compare)

    return parser


def _emit_error(kind: str, exc: Exception) -> None:
    payload: dict = {"error": {"type": kind, "message": str(exc)}}
    filename = getattr(exc, "filename", None)
    if filename:
        payload["error"]["path"] = str(filename)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    level = os.environ.get("BRIGHT_KIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except _UsageError as exc:
        _emit_error("UsageError", exc)
        return 2
    except DataError as exc:
        _emit_error(type(exc).__name__, exc)
        return 3
    except OSError as exc:
        _emit_error(type(exc).__name__, exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
