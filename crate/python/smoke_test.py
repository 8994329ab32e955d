"""Smoke test for the rentyield_py extension module.

Build first:  cargo build --release -p rentyield-py
Then run:     python3 python/smoke_test.py

The module is imported normally if installed, otherwise loaded straight
from target/{release,debug}/librentyield_py.so.
"""

import importlib.machinery
import importlib.util
import json
import math
import os
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    try:
        import rentyield_py

        return rentyield_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        path = ROOT / "target" / profile / "librentyield_py.so"
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("rentyield_py", str(path))
            spec = importlib.util.spec_from_file_location("rentyield_py", path, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("rentyield_py not found; run `cargo build --release -p rentyield-py` first")


ry = load_module()


def check_finance():
    m = ry.monthly_mortgage(150_800)
    assert abs(m - 423) <= 1, m
    assert abs(ry.total_cost(150_800) - 160_903.6) < 0.01
    rows = ry.amortization_schedule(150_800)
    assert len(rows) == 360 and abs(rows[-1]["closing_balance"]) <= 0.01
    assert math.isfinite(ry.monthly_mortgage(100_000, rate=0.0))
    assert ry.size_bucket(45) == "30_60" and ry.size_bucket(10) is None


def check_dataset():
    listings = ry.load_dataset(str(ROOT / "fixtures" / "dataset.jsonl"))
    assert len(listings) == 18
    cells = ry.yield_index(listings)
    cell = next(c for c in cells if c["neighborhood"] == "Prosperidad" and c["bucket"] == "30_60")
    assert abs(cell["index"] - 0.867) <= 0.001, cell
    averages = ry.neighborhood_average(cells)
    assert "Prosperidad" in averages

    kept, removed = ry.dedupe(listings + listings[:3])
    assert len(kept) == 18 and removed == 3

    page = (ROOT / "fixtures" / "payloads" / "rent_p1.json").read_text()
    records = ry.clean_text(page)
    parsed = [ry.parse_record(r) for r in records]
    assert len(parsed) == len(json.loads(page)["elementList"])

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.jsonl")
        ry.store_dataset(path, listings)
        assert ry.load_dataset(path) == listings


def check_models():
    x = [[float(i), float(i % 5)] for i in range(60)]
    y = [3.0 * a - 2.0 * b + 1.0 for a, b in x]
    ols = ry.Ols.fit(x, y)
    assert abs(ols.r_squared - 1.0) < 1e-10
    assert all(abs(c - e) < 1e-9 for c, e in zip(ols.coefficients, [1.0, 3.0, -2.0]))
    assert all(abs(p - t) < 1e-8 for p, t in zip(ols.predict(x), y))

    forest = ry.Forest.fit(x, y, n_trees=5, mtry=2, bootstrap=False, seed=1)
    assert ry.rmse(forest.predict(x), y) == 0.0

    svr = ry.Svr.fit(x, y, kernel="linear", cost=10.0, epsilon=0.05)
    assert svr.converged and svr.n_support > 0
    assert ry.rmse(svr.predict(x), y) < 0.5

    train, test = ry.train_test_split(10, 0.7, 3)
    assert len(train) == 7 and sorted(train + test) == list(range(10))


def check_pipeline():
    data = ry.synth_dataset(n_rent=400, n_sale=30, seed=5)
    kept, removed = ry.zscore_filter([l for l in data if l["operation"] == "rent"], 3.0)
    assert len(kept) + len(removed) == 400

    report, model = ry.train(data, model="forest", spec=3, seed=7, n_trees=20)
    assert report["label"] == "forest" and report["rmse_test"] > 0
    assert model.kind == "forest" and model.spec == 3
    again = ry.TrainedModel.from_json(model.to_json())
    sale = next(l for l in data if l["operation"] == "sale")
    assert model.predict(sale) == again.predict(sale)

    ranking = ry.rank_yield(data, model)
    indices = [r["implied_index"] for r in ranking["ranked"]]
    assert indices == sorted(indices, reverse=True)

    report, _ = ry.train(data, model="svr", spec=2, kernel="polynomial")
    assert report["label"] == "svr-polynomial"

    try:
        ry.train(data, model="tree")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown model accepted")


if __name__ == "__main__":
    for check in (check_finance, check_dataset, check_models, check_pipeline):
        check()
        print(f"ok  {check.__name__}")
    print("smoke test passed")
