import math

import numpy as np
import pytest

import pertl


def test_cascade_q2():
    spec = pertl.build_cascade([1.0, 0.0, 1.0], q=2, epsilon=0.1, p=2)
    assert spec.terms[1] == [(-1.0, [2, 0, 0])]
    assert spec.terms[2] == [(-2.0, [1, 1, 0])]
    assert spec.bc_scale == pytest.approx(1.0 / 1.11)
    assert pertl.enumerate_multi_indices(3, 3, 3) == [[1, 2, 0, 0], [2, 0, 1, 0]]
    assert pertl.multinomial_coefficient(3, [2, 1, 0]) == 3


def test_reduction():
    A, B = pertl.build_system([2.0, 3.0, 4.0])
    np.testing.assert_array_equal(A, [[0.0, -1.0], [2.0, 3.0]])
    np.testing.assert_array_equal(B, [[1.0, 0.0], [0.0, 4.0]])


def test_oracle_linear_oscillator():
    params = pertl.DuffingParams(delta=0.0, alpha=1.0, beta=0.0, gamma=0.0, omega=1.0, x0=1.0)
    t = np.linspace(0.1, 5.0, 20)
    x = pertl.integrate_duffing(params, t)
    np.testing.assert_allclose(x, np.cos(t), atol=1e-10)


@pytest.fixture(scope="module")
def trunk(tmp_path_factory):
    cfg = pertl.TrainConfig()
    cfg.heads = 3
    cfg.iterations = 200
    cfg.lr0 = 3e-3
    cfg.collocation_n = 48
    cfg.hidden_widths = [24, 24, 32]
    cfg.h = 16
    ckpt = pertl.train(cfg)
    assert math.isfinite(ckpt.final_total_loss)
    path = tmp_path_factory.mktemp("ckpt") / "checkpoint.json"
    ckpt.save(path)
    loaded = pertl.load_checkpoint(path)
    assert loaded.final_total_loss == ckpt.final_total_loss
    return pertl.Trunk(loaded, n=200)


def test_solve_and_sweep(trunk):
    params = pertl.DuffingParams(delta=1.0, alpha=2.0, beta=0.3, gamma=1.0, omega=1.5, x0=0.5)
    t = np.linspace(0.0, 5.0, 50)
    out = pertl.solve_duffing(trunk, params, 4, t)
    assert out["x"].shape == (50,)
    assert out["factorizations"] == 1
    assert len(out["heads"]) == 5
    assert abs(out["x"][0] - 0.5) < 0.2
    sweep = pertl.p_sweep(trunk, [0, 2], instances=2)
    assert sorted(sweep) == [0, 2]
    assert all(len(v) == 2 for v in sweep.values())
