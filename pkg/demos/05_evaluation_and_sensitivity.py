#!/usr/bin/env python3
"""Scoring prediction dumps and probing how fragile the scores are.

Covers per-class AP with greedy pair matching, the class-AP spread statistics
behind box plots, the single-TP-flip sensitivity probe (small test sets
amplify every mistake), and leaderboard ranking shifts between two
benchmarks.

Usage:
    python3 demos/05_evaluation_and_sensitivity.py
"""

from bright_kit import (
    Dataset,
    HoiClass,
    HoiInstance,
    ImageRecord,
    MatchConfig,
    Prediction,
    Vocabulary,
    class_ap,
    evaluate,
    perturb_tp_flip,
    ranking_shift,
)
from bright_kit.model import BBox


def slot(k):
    return BBox(60.0 * k + 10.0, 10.0, 60.0 * k + 40.0, 40.0)


def main():
    vocab = Vocabulary([
        HoiClass(1, 1, 1, "ride", "horse"),
        HoiClass(2, 2, 2, "wash", "car"),
    ])
    cfg = MatchConfig()  # min(IoU_h, IoU_o) >= 0.5, full-curve AP

    print("=" * 64)
    print("Per-class AP from a scored prediction dump")
    print("=" * 64)
    gt = Dataset([
        ImageRecord("a", "a.jpg", 2000, 100,
                    (HoiInstance(slot(0), slot(1), 1), HoiInstance(slot(4), slot(5), 1))),
        ImageRecord("b", "b.jpg", 2000, 100, (HoiInstance(slot(0), slot(1), 2),)),
    ], vocab)
    preds = [
        Prediction("a", slot(0), slot(1), 1, 0.90),   # TP
        Prediction("a", slot(8), slot(9), 1, 0.80),   # FP (empty location)
        Prediction("a", slot(4), slot(5), 1, 0.70),   # TP
        Prediction("b", slot(0), slot(1), 2, 0.60),   # TP
    ]
    for cid in (1, 2):
        res = class_ap(preds, gt, cid, cfg)
        print(f"  class {cid}: AP {res.ap:.4f} over {res.npos} GT "
              f"({sum(res.labels)} TP / {len(res.labels)} predictions)")

    print()
    print("=" * 64)
    print("Aggregate report: mAP, variance, quartiles, outliers")
    print("=" * 64)
    report = evaluate(preds, gt, vocab, cfg)
    q1, q2, q3 = report.quartiles
    print(f"  mAP {report.mean_ap:.4f} over {report.num_evaluated} classes")
    print(f"  variance {report.variance:.4f}, median {report.median:.4f}, "
          f"IQR [{q1:.4f}, {q3:.4f}]")
    print(f"  outliers: {report.outliers or 'none'}")

    print()
    print("=" * 64)
    print("TP-flip probe: identical mistakes cost tail classes far more")
    print("=" * 64)
    scores = [round(0.95 - 0.05 * i, 2) for i in range(10)]
    sense_gt = Dataset([
        ImageRecord("many", "many.jpg", 10_000, 100,
                    tuple(HoiInstance(slot(s), slot(s + 20), 1) for s in range(10))),
        ImageRecord("less", "less.jpg", 10_000, 100,
                    tuple(HoiInstance(slot(s), slot(s + 20), 2) for s in range(2))),
    ], vocab)
    many_preds = [Prediction("many", slot(s), slot(s + 20), 1, scores[s]) for s in range(10)]
    less_preds = (
        [Prediction("less", slot(s), slot(s + 20), 2, scores[s]) for s in range(2)]
        + [Prediction("less", slot(s + 40), slot(s + 60), 2, scores[s]) for s in range(2, 10)]
    )
    for tag, p, cid in (("10 test instances", many_preds, 1),
                        ("2 test instances ", less_preds, 2)):
        probe = perturb_tp_flip(p, sense_gt, cid, cfg)
        print(f"  {tag}: AP {probe.original_ap:.3f} -> {probe.perturbed_ap:.3f} "
              f"({probe.relative_drop:.0%} drop from one flipped TP)")

    print()
    print("=" * 64)
    print("Ranking shifts between an imbalanced and a balanced benchmark")
    print("=" * 64)
    imbalanced = {
        "DP-HOI": 36.56, "RLIPv2": 35.46, "PViC": 34.69, "HOICLIP": 34.56,
        "GEN-VLKT": 33.61, "UPT": 31.65, "CQL": 31.58, "CDN": 31.36, "QPIC": 29.11,
    }
    balanced = {
        "DP-HOI": 40.85, "RLIPv2": 41.61, "PViC": 43.73, "HOICLIP": 39.14,
        "GEN-VLKT": 38.02, "UPT": 42.34, "CQL": 33.59, "CDN": 35.24, "QPIC": 34.00,
    }
    for row in ranking_shift(imbalanced, balanced):
        arrow = "=" if row.delta == 0 else ("^" if row.delta > 0 else "v")
        print(f"  {row.model:<9} {row.map_a:>6.2f} (rank {row.rank_a}) -> "
              f"{row.map_b:>6.2f} (rank {row.rank_b})  {arrow} {abs(row.delta)}")


if __name__ == "__main__":
    main()
