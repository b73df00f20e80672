import json

import numpy as np
import pytest

import tkan


def test_basis_partition_of_unity():
    x = np.linspace(-0.99, 0.99, 41)
    for order in range(5):
        b = tkan.bspline_basis(x, -1.0, 1.0, 5, order)
        assert b.shape == (41, 5 + order)
        np.testing.assert_allclose(b.sum(axis=1), 1.0, atol=1e-12)


def test_r_squared_and_aggregate():
    assert tkan.r_squared(np.array([1.0, 1.0, 1.0]), np.array([0.0, 1.0, 2.0])) == 0.0
    with pytest.raises(tkan.UndefinedMetricError):
        tkan.r_squared(np.array([1.0, 2.0]), np.array([3.0, 3.0]))
    mean, std = tkan.aggregate([0.0, 1.0])
    assert mean == 0.5
    assert std == pytest.approx(0.7071067811865476)


def test_prepare_and_naive():
    _, values = tkan.synthetic_series(800, 1)
    d = tkan.prepare(np.array(values)[:, None], seq_len=10, horizon=2, median_window=48)
    n = d["x_train"].shape[0] + d["x_test"].shape[0]
    assert d["x_train"].shape[0] == int(0.8 * n)
    assert d["x_train"].shape[1:] == (10, 1)
    assert d["x_train"].min() >= 0.0 and d["x_train"].max() <= 1.0
    pred = tkan.naive_last_value(d["x_test"], 2)
    assert pred.shape == d["y_test"].shape
    np.testing.assert_array_equal(pred[:, 0], d["x_test"][:, -1, 0])


def test_model_shapes_and_errors():
    m = tkan.Model("tkan", input_dim=2, horizon=3, units=4, seed=1)
    out = m.predict(np.zeros((5, 7, 2)))
    assert out.shape == (5, 3)
    assert m.parameter_count() > 0
    with pytest.raises(tkan.ContractError):
        tkan.Model("transformer", input_dim=2)
    with pytest.raises(tkan.DimensionError):
        m.predict(np.zeros((5, 7, 3)))


def test_tiny_benchmark(tmp_path):
    cfg = {
        "models": ["gru", "naive"],
        "units": 3,
        "horizons": [1],
        "seeds": [1],
        "seq_len": 6,
        "data": {"median_window": 24, "synthetic": {"length": 300, "seed": 2}},
        "training": {"batch_size": 32, "max_epochs": 2},
        "save_checkpoints": True,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    rows = tkan.run_benchmark(str(path), str(tmp_path / "out"))
    assert [r["model"] for r in rows] == ["gru", "naive"]
    assert all(r["ok"] for r in rows)
    assert (tmp_path / "out" / "report.csv").exists()
    model = tkan.Model.load(str(tmp_path / "out" / "checkpoint_gru_h1_s1.bin"))
    assert model.predict(np.zeros((2, 6, 1))).shape == (2, 1)
