import csv
import io
import math

import numpy as np
import pytest

from blindsr.bench import (
    ABLATION_VARIANTS,
    CSV_COLUMNS,
    BenchmarkReport,
    BenchmarkRow,
    run_ablation,
    run_benchmark,
)
from blindsr.degradation import DegradeSpec, KernelSpec
from blindsr.estimator import EstimatorConfig
from blindsr.nonblind import TvSrConfig
from conftest import natural_crop, save_gray

FAST = EstimatorConfig(kernel_size=7, scales=1, outer_iters=2)
FAST_TV = TvSrConfig(max_outer_iters=10)
SPEC = DegradeSpec(KernelSpec("gaussian", 5, 1.0), 2, 1.0, rng_seed=4)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    save_gray(d / "a.png", natural_crop("camera", 100, 200, n=40))
    save_gray(d / "b.png", natural_crop("coffee", 100, 300, n=40))
    return d


def test_empty_conditions(dataset):
    rep = run_benchmark(dataset, [], FAST, FAST_TV)
    assert rep.rows == [] and rep.aggregates == {}


def test_rows_and_aggregates(dataset):
    rep = run_benchmark(dataset, [SPEC], FAST, FAST_TV)
    assert {r.variant for r in rep.rows} == {"full", "bicubic-kernel", "true-kernel"}
    assert len(rep.rows) == 6
    for cond, agg in rep.aggregates.items():
        rows = [r for r in rep.rows if r.condition == cond]
        assert agg["count"] == len(rows)
        assert agg["kernel_ssd"] == sum(r.kernel_ssd for r in rows) / len(rows)
        assert agg["psnr_db"] == pytest.approx(sum(r.psnr_db for r in rows) / len(rows), rel=1e-15)
    assert rep.mean("true-kernel") == 0.0
    for r in rep.rows:
        assert r.variant != "full" or r.runtime_s > 0


def test_csv_schema(dataset):
    rep = run_benchmark(dataset, [SPEC], FAST, FAST_TV, baselines=False)
    text = rep.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[0] for r in rows[1:]] == ["a.png", "b.png"]
    assert all(r[-1] == "" for r in rows[1:])
    timed = list(csv.reader(io.StringIO(rep.to_csv(include_runtime=True))))
    assert all(float(r[-1]) > 0 for r in timed[1:])
    md = rep.to_markdown()
    assert "kernel SSD (raw, unscaled)" in md and "a.png" in md


def test_parallel_matches_serial(dataset):
    a = run_benchmark(dataset, [SPEC], FAST, FAST_TV, jobs=1, baselines=False).to_csv()
    b = run_benchmark(dataset, [SPEC], FAST, FAST_TV, jobs=2, baselines=False).to_csv()
    assert a == b


def test_unreadable_image_skipped(dataset, tmp_path):
    for f in dataset.iterdir():
        (tmp_path / f.name).write_bytes(f.read_bytes())
    (tmp_path / "broken.png").write_bytes(b"not an image")
    rep = run_benchmark(tmp_path, [SPEC], FAST, FAST_TV, baselines=False)
    assert [name for name, _ in rep.skipped] == ["broken.png"]
    assert len(rep.rows) == 2
    assert "broken.png" in rep.to_markdown()


def test_ablation_rows():
    u = natural_crop("camera", 100, 200, n=40)
    rep = run_ablation(("cam", u), SPEC, FAST)
    assert [r.variant for r in rep.rows] == sorted(ABLATION_VARIANTS)
    assert all(math.isnan(r.psnr_db) for r in rep.rows)
    assert all(r.kernel_ssd >= 0 for r in rep.rows)


def test_report_sorted_regardless_of_input_order():
    rows = [BenchmarkRow(n, "gaussian", 7, 1.5, 2, 0.0, "full", 0.1) for n in ("c", "a", "b")]
    assert [r.image for r in BenchmarkReport(rows).rows] == ["a", "b", "c"]
    assert BenchmarkReport(rows).to_csv() == BenchmarkReport(rows[::-1]).to_csv()


def test_aggregate_ignores_missing_psnr():
    rows = [BenchmarkRow("a", "gaussian", 7, 1.5, 2, 0.0, "full", 0.1, 30.0),
            BenchmarkRow("b", "gaussian", 7, 1.5, 2, 0.0, "full", 0.3)]
    (agg,) = BenchmarkReport(rows).aggregates.values()
    assert agg["psnr_db"] == 30.0 and agg["kernel_ssd"] == pytest.approx(0.2)
