import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from adaptqp.core import Dataset, Domain, HyperParams, InvalidArgumentError
from adaptqp.dataio import gen_toy_two_class
from adaptqp.harness import (ExperimentConfig, HarnessError, ReportRow, Setting,
                             benchmark_primal_vs_dual, emit_report, kfold_split, run_setting)


def _labels(counts):
    return np.repeat(np.arange(1, len(counts) + 1), counts)


def _ds(counts, domain, dim=2, seed=0):
    y = _labels(counts)
    X = np.random.default_rng(seed).standard_normal((y.size, dim))
    return Dataset(X, y, domain, len(counts))


def test_kfold_sizes_and_coverage():
    source = _ds([200, 200], Domain.SOURCE)
    target = _ds([90, 90], Domain.TARGET)
    pairs = kfold_split(source, target, 10, seed=0)
    assert len(pairs) == 10
    assert all(p.source_test.size == 40 and p.target_test.size == 18 for p in pairs)
    for p in pairs:
        assert np.bincount(source.labels[p.source_test]).tolist() == [0, 20, 20]
        assert np.bincount(target.labels[p.target_test]).tolist() == [0, 9, 9]
    np.testing.assert_array_equal(np.sort(np.concatenate([p.source_test for p in pairs])),
                                  np.arange(400))


@given(st.lists(st.integers(3, 15), min_size=2, max_size=4), st.integers(2, 3),
       st.integers(0, 1000))
def test_kfold_partitions_both_domains(counts, folds, seed):
    source = _ds(counts, Domain.SOURCE)
    target = _ds(counts[::-1], Domain.TARGET)
    pairs = kfold_split(source, target, folds, seed)
    for ds, pick in ((source, "source"), (target, "target")):
        tests = [getattr(p, f"{pick}_test") for p in pairs]
        allidx = np.concatenate(tests)
        assert np.array_equal(np.sort(allidx), np.arange(ds.n_samples))
        for p, t in zip(pairs, tests):
            train = getattr(p, f"{pick}_train")(ds.n_samples)
            assert np.intersect1d(train, t).size == 0
            assert train.size + t.size == ds.n_samples


def test_kfold_is_deterministic_and_validated():
    source = _ds([20, 20], Domain.SOURCE)
    target = _ds([10, 10], Domain.TARGET)
    a = kfold_split(source, target, 5, seed=3)
    b = kfold_split(source, target, 5, seed=3)
    assert all(np.array_equal(x.target_test, y.target_test) for x, y in zip(a, b))
    with pytest.raises(InvalidArgumentError):
        kfold_split(source, target, 1)
    with pytest.raises(InvalidArgumentError):
        kfold_split(source, _ds([3, 10], Domain.TARGET), 5)


def _cfg(setting, **kw):
    return ExperimentConfig(setting, folds=kw.pop("folds", 4), synthetic="toy", **kw)


def test_baseline_on_separable_toy_is_perfect():
    rows = run_setting(_cfg(Setting.BASELINE))
    assert len(rows) == 4
    assert all(r.accuracy == 1.0 for r in rows)
    assert {r.setting for r in rows} == {"baseline"}


def test_source_only_equals_baseline_when_domains_coincide():
    source, _ = gen_toy_two_class(0)
    target = Dataset(source.features, source.labels, Domain.TARGET, 2)
    base = run_setting(_cfg(Setting.BASELINE), source, target)
    only = run_setting(_cfg(Setting.SOURCE_ONLY), source, target)
    assert [r.accuracy for r in base] == [r.accuracy for r in only]


@pytest.mark.parametrize("setting", list(Setting))
def test_every_setting_runs_on_the_toy(setting):
    rows = run_setting(_cfg(setting, seed=2))
    assert len(rows) == 4
    assert all(0.0 <= r.accuracy <= 1.0 and r.fit_seconds >= 0 for r in rows)


def test_reduction_at_zero_distance_weight():
    hp = HyperParams(d_weight=0.0)
    mmdtl2 = run_setting(_cfg(Setting.MMDTL2, hyperparams=hp, mmdt_augmented=False))
    mmdt = run_setting(_cfg(Setting.MMDT, hyperparams=hp, mmdt_augmented=False))
    assert [r.accuracy for r in mmdtl2] == [r.accuracy for r in mmdt]


def test_fold_failure_is_wrapped():
    source, target = gen_toy_two_class(0)
    wide = Dataset(np.hstack([target.features, target.features]), target.labels,
                   Domain.TARGET, 2)
    with pytest.raises(HarnessError) as err:
        run_setting(_cfg(Setting.SOURCE_ONLY), source, wide)
    assert err.value.fold == 0
    assert isinstance(err.value.__cause__, InvalidArgumentError)


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(Setting.MMDT, folds=1, synthetic="toy")
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(Setting.MMDT)
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(Setting.MMDT, synthetic="shifted")
    with pytest.raises(ValueError):
        ExperimentConfig("nonsense", synthetic="toy")


def _rows():
    return [ReportRow("mmdt", 0, 0.5, 0.1, 0.01, 2, 0, 1.0, 1.0, 0.0),
            ReportRow("mmdt", 1, 0.75, 0.2, 0.02, 2, 0, 1.0, 1.0, 0.0)]


def test_emit_csv(tmp_path):
    path = tmp_path / "r.csv"
    text = emit_report(_rows(), "csv", path)
    lines = text.strip().split("\n")
    assert len(lines) == 3
    assert lines[0].startswith("setting,fold,accuracy")
    back = list(csv.DictReader(io.StringIO(path.read_text())))
    assert float(back[1]["accuracy"]) == 0.75


def test_emit_json_round_trip():
    rows = _rows()
    doc = json.loads(emit_report(rows, "json"))
    assert [ReportRow(**d) for d in doc] == rows


def test_emit_errors():
    with pytest.raises(InvalidArgumentError):
        emit_report([], "json")
    with pytest.raises(InvalidArgumentError):
        emit_report(_rows(), "xml")


def test_benchmark_rows_and_agreement():
    rows = benchmark_primal_vs_dual([16], n_target=20, n_source=40, repeats=1)
    by_path = {r.path: r for r in rows}
    assert set(by_path) == {"primal", "dual"}
    dual = by_path["dual"]
    assert not by_path["primal"].skipped
    assert dual.w_discrepancy <= 1e-4
    assert dual.total == pytest.approx(dual.setup + dual.optimization + dual.calculation)
    json.loads(emit_report(rows, "json"))


def test_benchmark_skips_oversized_primal():
    rows = benchmark_primal_vs_dual([8], n_target=20, n_source=40, repeats=1,
                                    primal_max_variables=10)
    primal = next(r for r in rows if r.path == "primal")
    assert primal.skipped and primal.total is None
    line = next(l for l in emit_report(rows, "csv").splitlines() if ",primal," in l)
    assert line == "8,primal,,,,,True,"
