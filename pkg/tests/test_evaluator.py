import json
import random
from pathlib import Path

import pytest

from bright_kit import (
    BBox,
    DataError,
    Dataset,
    HoiInstance,
    ImageRecord,
    MatchConfig,
    Prediction,
    UnknownClassError,
    class_ap,
    evaluate,
    load_predictions,
    perturb_tp_flip,
    ranking_shift,
    save_predictions,
    summarize_class_aps,
)

from helpers import pred
from oracles import oracle_ap_from_flags, oracle_class_ap

FIXTURES = Path(__file__).parent / "fixtures"
CFG = MatchConfig()


def _slot(k: int) -> BBox:
    # non-overlapping 20x20 boxes on a grid, offset so jitter stays positive
    return BBox(50.0 * k + 10.0, 10.0, 50.0 * k + 30.0, 30.0)


def _gt(vocab, per_image: dict[str, list[tuple[int, int]]]) -> Dataset:
    """per_image: image_id -> [(class_id, slot), ...]; boxes live on the slot grid."""
    images = []
    for image_id, items in per_image.items():
        insts = tuple(HoiInstance(_slot(s), _slot(s + 1), c) for c, s in items)
        images.append(ImageRecord(image_id, f"{image_id}.jpg", 10_000, 100, insts))
    return Dataset(images, vocab)


def _hit(image_id: str, class_id: int, slot: int, score: float) -> Prediction:
    return pred(image_id, _slot(slot), _slot(slot + 1), class_id, score)


def _miss(image_id: str, class_id: int, slot: int, score: float) -> Prediction:
    # far-away boxes that cannot match anything on the slot grid
    return pred(image_id, _slot(slot + 100), _slot(slot + 101), class_id, score)


# ---------------------------------------------------------------------------
# class_ap
# ---------------------------------------------------------------------------


def test_single_exact_prediction_ap_one(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    res = class_ap([_hit("a", 1, 0, 0.9)], gt, 1, CFG)
    assert res.ap == 1.0
    assert res.npos == 1
    assert len(res.matched) == 1


def test_no_predictions_ap_zero(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    res = class_ap([], gt, 1, CFG)
    assert res.ap == 0.0


def test_three_prediction_pr_curve(vocab5):
    # scores .9 TP, .8 FP, .7 TP over 2 GT -> AP = 0.5 + 0.5 * (2/3)
    gt = _gt(vocab5, {"a": [(1, 0), (1, 4)]})
    preds = [
        _hit("a", 1, 0, 0.9),
        _miss("a", 1, 0, 0.8),
        _hit("a", 1, 4, 0.7),
    ]
    res = class_ap(preds, gt, 1, CFG)
    assert res.ap == pytest.approx(0.5 + 0.5 * (2.0 / 3.0))
    assert res.labels == [True, False, True]


def test_zero_gt_is_undefined(vocab5):
    gt = _gt(vocab5, {"a": [(2, 0)]})
    res = class_ap([_hit("a", 1, 0, 0.9)], gt, 1, CFG)
    assert res.ap is None
    assert res.npos == 0


def test_one_gt_matches_at_most_one_prediction(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    preds = [_hit("a", 1, 0, 0.9), _hit("a", 1, 0, 0.8)]
    res = class_ap(preds, gt, 1, CFG)
    assert res.labels == [True, False]


def test_score_ties_keep_input_order(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    first_hit = [_hit("a", 1, 0, 0.5), _miss("a", 1, 0, 0.5)]
    first_miss = [_miss("a", 1, 0, 0.5), _hit("a", 1, 0, 0.5)]
    assert class_ap(first_hit, gt, 1, CFG).labels == [True, False]
    assert class_ap(first_miss, gt, 1, CFG).labels == [False, True]


def test_pair_rule_requires_both_boxes(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    # human box matches, object box far away: not a TP
    p = pred("a", _slot(0), _slot(50), 1, 0.9)
    assert class_ap([p], gt, 1, CFG).labels == [False]


def test_matching_prefers_highest_pair_iou(vocab5):
    gt = Dataset(
        [
            ImageRecord(
                "a", "a.jpg", 1000, 100,
                (
                    HoiInstance(BBox(0, 0, 20, 20), BBox(30, 0, 50, 20), 1),
                    HoiInstance(BBox(2, 0, 22, 20), BBox(32, 0, 52, 20), 1),
                ),
            )
        ],
        vocab5,
    )
    p = pred("a", BBox(2, 0, 22, 20), BBox(32, 0, 52, 20), 1, 0.9)
    res = class_ap([p], gt, 1, CFG)
    assert res.labels == [True]
    assert res.matched[0].gt_index == 1  # the exactly-overlapping instance


def _random_scenario(rng, n_preds_max=20, n_gt_max=10):
    # predictions and GT share a small slot grid so overlaps actually happen
    image_ids = ["i0", "i1"]
    gts = []
    for _ in range(rng.randint(1, n_gt_max)):
        gts.append((rng.choice(image_ids), rng.randint(0, 4)))
    preds = []
    for _ in range(rng.randint(0, n_preds_max)):
        img = rng.choice(image_ids)
        slot = rng.randint(0, 4)
        jitter = rng.uniform(-8, 8)
        h = BBox(50.0 * slot + 10.0 + jitter, 10.0, 50.0 * slot + 30.0 + jitter, 30.0)
        o = BBox(50.0 * (slot + 1) + 10.0 + jitter, 10.0, 50.0 * (slot + 1) + 30.0 + jitter, 30.0)
        preds.append(Prediction(img, h, o, 1, round(rng.random(), 3)))
    return preds, gts


def _scenario_to_dataset(gts, vocab):
    by_image: dict[str, list] = {}
    for img, slot in gts:
        by_image.setdefault(img, []).append(HoiInstance(_slot(slot), _slot(slot + 1), 1))
    return Dataset(
        [
            ImageRecord(img, f"{img}.jpg", 10_000, 100, tuple(insts))
            for img, insts in by_image.items()
        ],
        vocab,
    )


def test_class_ap_equals_brute_force_oracle_randomized(vocab5):
    rng = random.Random(1234)
    for _ in range(200):
        preds, gts = _random_scenario(rng)
        gt = _scenario_to_dataset(gts, vocab5)
        got = class_ap(preds, gt, 1, CFG).ap
        want = oracle_class_ap(
            [(p.image_id, (p.human_box.x1, p.human_box.y1, p.human_box.x2, p.human_box.y2),
              (p.object_box.x1, p.object_box.y1, p.object_box.x2, p.object_box.y2), p.score)
             for p in preds],
            [(img, (50.0 * s + 10.0, 10.0, 50.0 * s + 30.0, 30.0),
              (50.0 * (s + 1) + 10.0, 10.0, 50.0 * (s + 1) + 30.0, 30.0)) for img, s in gts],
            CFG.iou_threshold,
        )
        assert got == want  # exact float equality, not approximate


def test_ap_is_rank_only(vocab5):
    # AP is invariant under strictly monotone score transformations
    rng = random.Random(77)
    for _ in range(30):
        preds, gts = _random_scenario(rng)
        if not preds:
            continue
        gt = _scenario_to_dataset(gts, vocab5)
        base = class_ap(preds, gt, 1, CFG).ap
        squeezed = [
            Prediction(p.image_id, p.human_box, p.object_box, p.class_id,
                       0.1 + 0.8 / (1.0 + pow(2.0, -p.score)))
            for p in preds
        ]
        assert class_ap(squeezed, gt, 1, CFG).ap == pytest.approx(base, abs=1e-12)


def test_adding_fp_never_increases_ap(vocab5):
    rng = random.Random(31)
    for _ in range(30):
        preds, gts = _random_scenario(rng)
        gt = _scenario_to_dataset(gts, vocab5)
        base = class_ap(preds, gt, 1, CFG).ap
        with_fp = preds + [_miss("i0", 1, 0, round(rng.random(), 3))]
        assert class_ap(with_fp, gt, 1, CFG).ap <= base + 1e-12


def test_adding_top_score_tp_never_decreases_ap(vocab5):
    rng = random.Random(32)
    for _ in range(30):
        preds, gts = _random_scenario(rng)
        gt = _scenario_to_dataset(gts, vocab5)
        matched = class_ap(preds, gt, 1, CFG)
        taken = {(m.image_id, m.gt_index) for m in matched.matched}
        # enumerate unmatched GTs in the same per-image index space MatchedTP uses
        free = []
        per_image_index: dict[str, int] = {}
        for img, slot in gts:
            k = per_image_index.get(img, 0)
            per_image_index[img] = k + 1
            if (img, k) not in taken:
                free.append((img, slot))
        if not free:
            continue
        img, slot = free[0]
        stronger = preds + [_hit(img, 1, slot, 1.0)]
        assert class_ap(stronger, gt, 1, CFG).ap >= matched.ap - 1e-12


def test_eleven_point_variant(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0), (1, 4)]})
    preds = [_hit("a", 1, 0, 0.9), _miss("a", 1, 0, 0.8), _hit("a", 1, 4, 0.7)]
    cfg = MatchConfig(ap_method="eleven_point")
    # recall levels 0..0.5 see precision 1.0 (6 levels), 0.6..1.0 see 2/3 (5 levels)
    assert class_ap(preds, gt, 1, cfg).ap == pytest.approx((6 * 1.0 + 5 * 2 / 3) / 11)


# ---------------------------------------------------------------------------
# evaluate / summarize
# ---------------------------------------------------------------------------


def test_all_perfect_classes(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0), (2, 4)]})
    preds = [_hit("a", 1, 0, 0.9), _hit("a", 2, 4, 0.8)]
    report = evaluate(preds, gt, vocab5.subset([1, 2]), CFG)
    assert report.mean_ap == 1.0
    assert report.variance == 0.0


def test_two_class_toy_aggregates(vocab5):
    # APs {1.0, 0.5} -> mAP 0.75, population variance 0.0625
    gt = _gt(vocab5, {"a": [(1, 0)], "b": [(2, 0), (2, 4)]})
    preds = [_hit("a", 1, 0, 0.9), _hit("b", 2, 0, 0.8)]
    report = evaluate(preds, gt, vocab5.subset([1, 2]), CFG)
    assert report.per_class_ap == {1: 1.0, 2: 0.5}
    assert report.mean_ap == 0.75
    assert report.variance == 0.0625


def test_undefined_classes_flagged_and_excluded(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    report = evaluate([_hit("a", 1, 0, 0.9)], gt, vocab5, CFG)
    assert report.undefined_classes == [2, 3, 4, 5]
    assert report.mean_ap == 1.0
    assert report.num_evaluated == 1


def test_evaluate_rejects_empty_gt(vocab5):
    with pytest.raises(DataError):
        evaluate([], Dataset([], vocab5), vocab5, CFG)


def test_evaluate_rejects_unknown_pred_class(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    bad = [pred("a", _slot(0), _slot(1), 99, 0.5)]
    with pytest.raises(UnknownClassError):
        evaluate(bad, gt, vocab5, CFG)


def test_quartiles_inclusive_interpolation():
    report = summarize_class_aps({1: 0.1, 2: 0.2, 3: 0.3, 4: 0.4})
    q1, q2, q3 = report.quartiles
    assert (q1, q2, q3) == (pytest.approx(0.175), pytest.approx(0.25), pytest.approx(0.325))
    assert report.median == pytest.approx(0.25)


def test_outliers_beyond_fences():
    aps = {i: 0.5 for i in range(1, 11)}
    aps[11] = 0.99
    report = summarize_class_aps(aps)
    assert report.outliers == [(11, 0.99)]


def test_mean_matches_vector_mean_ulp():
    rng = random.Random(9)
    aps = {i: rng.random() for i in range(1, 300)}
    report = summarize_class_aps(aps)
    vec = [aps[c] for c in sorted(aps)]
    assert report.mean_ap == sum(vec) / len(vec)


def test_stored_per_class_fixture_mean():
    # fixture ships the aggregate; the mean-of-vector path must reproduce it
    raw = json.loads((FIXTURES / "pvic_per_class_ap.json").read_text())
    per_class = {int(c): v for c, v in raw["per_class_ap"].items()}
    assert len(per_class) == 351
    report = summarize_class_aps(per_class)
    assert report.mean_ap * 100 == pytest.approx(raw["reported_map_percent"], abs=1e-9)


# ---------------------------------------------------------------------------
# ranking_shift
# ---------------------------------------------------------------------------


def test_ranking_shift_reproduces_benchmark_table():
    raw = json.loads((FIXTURES / "detector_maps.json").read_text())
    rows = {r.model: r for r in ranking_shift(raw["a"], raw["b"])}
    for expected in raw["expected"]:
        row = rows[expected["model"]]
        assert row.rank_a == expected["rank_a"]
        assert row.rank_b == expected["rank_b"]
        assert row.delta == expected["delta"]


def test_ranking_shift_identical_reports_all_zero():
    maps = {"m1": 30.0, "m2": 20.0, "m3": 10.0}
    assert all(r.delta == 0 for r in ranking_shift(maps, dict(maps)))


def test_ranking_shift_tie_breaks_by_name():
    rows = ranking_shift({"b": 10.0, "a": 10.0}, {"b": 10.0, "a": 5.0})
    by_model = {r.model: r for r in rows}
    assert by_model["a"].rank_a == 1  # tie on A broken alphabetically
    assert by_model["b"].rank_a == 2
    assert by_model["b"].rank_b == 1


def test_ranking_shift_model_set_mismatch():
    with pytest.raises(DataError):
        ranking_shift({"a": 1.0}, {"b": 1.0})


# ---------------------------------------------------------------------------
# perturb_tp_flip
# ---------------------------------------------------------------------------


def test_flip_single_tp_full_drop(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    result = perturb_tp_flip([_hit("a", 1, 0, 0.9)], gt, 1, CFG)
    assert result.original_ap == 1.0
    assert result.perturbed_ap == 0.0
    assert result.relative_drop == 1.0


def test_flip_targets_highest_confidence_tp(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0), (1, 4)]})
    preds = [_hit("a", 1, 0, 0.9), _hit("a", 1, 4, 0.3)]
    result = perturb_tp_flip(preds, gt, 1, CFG)
    assert result.flipped_score == 0.9
    assert result.flipped_rank == 0


def test_small_test_set_suffers_larger_drop(vocab5):
    # identical score lists; 10 GT vs 2 GT -> the 2-GT class drops harder
    scores = [round(0.95 - 0.05 * i, 2) for i in range(10)]
    gt = _gt(vocab5, {
        "many": [(1, s) for s in range(10)],
        "less": [(2, 0), (2, 4)],
    })
    preds_many = [_hit("many", 1, s, scores[s]) for s in range(10)]
    preds_less = (
        [_hit("less", 2, 0, scores[0]), _hit("less", 2, 4, scores[1])]
        + [_miss("less", 2, s, scores[s]) for s in range(2, 10)]
    )
    base_many = class_ap(preds_many, gt, 1, CFG)
    base_less = class_ap(preds_less, gt, 2, CFG)
    assert base_many.ap == base_less.ap == 1.0  # similar initial AP by construction

    drop_many = perturb_tp_flip(preds_many, gt, 1, CFG).relative_drop
    drop_less = perturb_tp_flip(preds_less, gt, 2, CFG).relative_drop
    assert drop_less > drop_many

    # exact values from the independent oracle
    flags_many = [False] + [True] * 9
    flags_less = [False, True] + [False] * 8
    want_many = 1.0 - oracle_ap_from_flags(flags_many, 10)
    want_less = 1.0 - oracle_ap_from_flags(flags_less, 2)
    assert drop_many == pytest.approx(want_many)
    assert drop_less == pytest.approx(want_less)


def test_lowest_flip_drop_never_exceeds_top_flip(vocab5):
    rng = random.Random(55)
    checked = 0
    while checked < 40:
        preds, gts = _random_scenario(rng)
        gt = _scenario_to_dataset(gts, vocab5)
        res = class_ap(preds, gt, 1, CFG)
        if len(res.matched) < 2:
            continue
        top = perturb_tp_flip(preds, gt, 1, CFG, flip="top").relative_drop
        low = perturb_tp_flip(preds, gt, 1, CFG, flip="lowest").relative_drop
        assert low <= top + 1e-12
        checked += 1


def test_drop_strictly_positive_whenever_tp_exists(vocab5):
    rng = random.Random(66)
    checked = 0
    while checked < 40:
        preds, gts = _random_scenario(rng)
        gt = _scenario_to_dataset(gts, vocab5)
        res = class_ap(preds, gt, 1, CFG)
        if not res.matched:
            continue
        assert perturb_tp_flip(preds, gt, 1, CFG).relative_drop > 0.0
        checked += 1


def test_flip_without_tp_errors(vocab5):
    gt = _gt(vocab5, {"a": [(1, 0)]})
    with pytest.raises(DataError):
        perturb_tp_flip([_miss("a", 1, 0, 0.9)], gt, 1, CFG)


# ---------------------------------------------------------------------------
# Prediction dump I/O
# ---------------------------------------------------------------------------


def test_prediction_dump_round_trip(tmp_path, vocab5):
    preds = [_hit("a", 1, 0, 0.9), _miss("b", 2, 1, 0.25)]
    path = tmp_path / "preds.jsonl"
    save_predictions(preds, path)
    assert load_predictions(path, vocab5) == preds


def test_prediction_load_validates(tmp_path, vocab5):
    path = tmp_path / "preds.jsonl"
    path.write_text(json.dumps({
        "image_id": "a", "human_box": [0, 0, 5, 5], "object_box": [0, 0, 5, 5],
        "class_id": 1, "score": 1.5,
    }) + "\n")
    with pytest.raises(DataError):
        load_predictions(path, vocab5)
    path.write_text(json.dumps({
        "image_id": "a", "human_box": [0, 0, 5, 5], "object_box": [0, 0, 5, 5],
        "class_id": 77, "score": 0.5,
    }) + "\n")
    with pytest.raises(UnknownClassError):
        load_predictions(path, vocab5)
