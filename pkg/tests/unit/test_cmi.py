import itertools
import math

import numpy as np
import pytest

from prgauge.cmi import axis_subsets
from prgauge.cmi import cmi_score
from prgauge.cmi import conditional_mi
from prgauge.cmi import pair_signs
from prgauge.errors import ConfigError


def _entropy(counts):
    total = sum(counts)
    return -sum(c / total * math.log(c / total) for c in counts if c)


def _oracle(records, values, max_subset_size=2):
    """Brute-force joint counts over every conditioning subset."""
    axes = sorted(records[0].hyperparams)
    subsets = [s for size in range(1, max_subset_size + 1) for s in itertools.combinations(axes, size)]
    if tuple(axes) not in subsets:
        subsets.append(tuple(axes))
    scores = []
    for subset in subsets:
        groups = {}
        for record in records:
            groups.setdefault(tuple(str(record.hyperparams[a]) for a in subset), []).append(record)
        infos, entropies = [], []
        for members in groups.values():
            members = sorted(members, key=lambda r: r.id)
            joint = {}
            for first, second in itertools.combinations(members, 2):
                dg = first.gap - second.gap
                dm = values[first.id] - values[second.id]
                if dg == 0 or dm == 0:
                    continue
                key = (dg > 0, dm > 0)
                joint[key] = joint.get(key, 0) + 1
            if not joint:
                continue
            gap_counts = [sum(c for (g, _), c in joint.items() if g == side) for side in (False, True)]
            measure_counts = [sum(c for (_, m), c in joint.items() if m == side) for side in (False, True)]
            h_gap = _entropy(gap_counts)
            infos.append(max(h_gap + _entropy(measure_counts) - _entropy(list(joint.values())), 0.0))
            entropies.append(h_gap)
        if not infos or np.mean(entropies) == 0:
            continue
        scores.append(min(np.mean(infos) / np.mean(entropies), 1.0))
    return min(scores) if scores else 0.0


def _corpus(make_record, seed):
    rng = np.random.default_rng(seed)
    records = []
    for index, (depth, lr, noise) in enumerate(itertools.product([1, 2], [0.1, 0.01], [0.0, 0.1, 0.2])):
        records.append(make_record(f"m{index:03d}", float(rng.uniform(0, 0.5)), depth=depth, lr=lr, noise=noise))
    return records


def test_hand_computed_report(toy_records, toy_values):
    report = cmi_score(toy_records, toy_values, measure="toy")
    assert report.cmi == pytest.approx(0.5, abs=1e-12)
    assert report.num_models == 6
    assert report.cmi_pairs_only is None
    subset = report.subsets[0]
    assert subset.axes == ["depth"]
    assert [group.counts for group in subset.groups] == [
        {"-/-": 2, "-/+": 0, "+/-": 0, "+/+": 1},
        {"-/-": 1, "-/+": 0, "+/-": 2, "+/+": 0},
    ]


def test_matches_brute_force_oracle(make_record):
    for seed in range(20):
        records = _corpus(make_record, seed)
        rng = np.random.default_rng(100 + seed)
        values = {record.id: float(rng.standard_normal()) for record in records}
        assert cmi_score(records, values).cmi == pytest.approx(_oracle(records, values), abs=1e-12)


def test_perfect_predictor(make_record):
    records = _corpus(make_record, 1)
    report = cmi_score(records, {record.id: record.gap for record in records})
    assert report.cmi == pytest.approx(1.0, abs=1e-12)
    assert report.kendall_tau == pytest.approx(1.0)


def test_constant_predictor(make_record):
    records = _corpus(make_record, 2)
    report = cmi_score(records, {record.id: 0.5 for record in records})
    assert report.cmi == 0.0
    assert report.diagnostics


def test_monotone_transform_invariance(make_record):
    records = _corpus(make_record, 3)
    rng = np.random.default_rng(3)
    values = {record.id: float(rng.uniform(0.1, 2.0)) for record in records}
    base = cmi_score(records, values).cmi
    for _ in range(100):
        scale, shift, power = rng.uniform(0.1, 5.0), rng.uniform(-3.0, 3.0), rng.uniform(0.5, 3.0)
        transformed = {key: scale * value**power + shift for key, value in values.items()}
        assert cmi_score(records, transformed).cmi == pytest.approx(base, abs=1e-12)


def test_missing_values_are_excluded(make_record):
    records = _corpus(make_record, 4)
    values = {record.id: record.gap for record in records}
    values["m000"] = None
    report = cmi_score(records, values, measure="gi")
    assert report.num_models == len(records) - 1
    assert any("Excluded 1" in line for line in report.diagnostics)


def test_ties_are_dropped(make_record):
    records = [make_record("a", 0.1, depth=1), make_record("b", 0.1, depth=1), make_record("c", 0.2, depth=1)]
    result = pair_signs(records, {"a": 1.0, "b": 2.0, "c": 3.0})
    assert result.ties == 1
    assert result.signs == [(-1, -1), (-1, -1)]


def test_degenerate_group_entropy(make_record):
    records = [make_record("a", 0.1, depth=1), make_record("b", 0.2, depth=1)]
    report = conditional_mi(records, {"a": 1.0, "b": 2.0}, ["depth"])
    assert report.degenerate


def test_axis_subsets():
    assert axis_subsets(["a", "b", "c"], 2) == [("a",), ("b",), ("c",), ("a", "b"), ("a", "c"), ("b", "c"), ("a", "b", "c")]
    assert axis_subsets(["a"], 2) == [("a",)]


def test_mixed_axes_are_rejected(make_record):
    records = [make_record("a", 0.1, depth=1), make_record("b", 0.2, width=3)]
    with pytest.raises(ConfigError):
        cmi_score(records, {"a": 1.0, "b": 2.0})


def test_measure_without_values_scores_zero(toy_records):
    report = cmi_score(toy_records, {record.id: None for record in toy_records}, measure="pal_intra_l0")
    assert report.cmi == 0.0
    assert report.num_models == 0
    assert report.diagnostics
