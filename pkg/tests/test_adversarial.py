import numpy as np
import pytest
from numpy.testing import assert_allclose

from contreg.adversarial import any_alg_lb_collection, seen_task_lb_collection
from contreg.metrics import average_loss


def test_seen_task_collection_structure():
    scenario = seen_task_lb_collection(9, d=2)
    col = scenario.collection
    assert col.M == 9
    # eight identical replicas plus one rotated row
    first = col.tasks[0].X
    assert sum(np.array_equal(t.X, first) for t in col.tasks) == 8
    assert_allclose(col.tasks[-1].X, [[np.sqrt(0.5), np.sqrt(0.5)]])
    # every row has unit norm, so the radius is 1
    assert col.radius == pytest.approx(1.0, rel=1e-12)
    # all targets zero: jointly realizable by the zero vector
    assert average_loss(np.zeros(2), col) == 0.0
    assert_allclose(col.w_star, np.zeros(2))
    assert_allclose(scenario.recommended_w0, [1.0, 0.0])
    assert scenario.threshold(9) == pytest.approx(1.0 / (144 * 9))
    assert scenario.success_prob_floor == 0.15


def test_seen_task_collection_validation():
    with pytest.raises(ValueError, match="k >= 9"):
        seen_task_lb_collection(8)
    with pytest.raises(ValueError, match="d >= 2"):
        seen_task_lb_collection(9, d=1)


def test_seen_task_collection_higher_dimension():
    scenario = seen_task_lb_collection(12, d=5)
    col = scenario.collection
    assert col.d == 5
    assert np.all(col.tasks[0].X[0, 2:] == 0)


def test_any_alg_adversary_sign_against_constant_probe():
    # a probe that always answers zero has second coordinate <= 0 surely
    scenario = any_alg_lb_collection(4, 2, lambda tasks: np.zeros(2),
                                     probe_trials=10)
    assert scenario.meta["adversary_sign"] == 1.0
    assert scenario.meta["estimated_prob_nonpositive"] == 1.0
    col = scenario.collection
    assert col.M == 4
    assert_allclose(col.w_star, [0.0, 1.0])
    assert np.linalg.norm(col.w_star) == pytest.approx(1.0)
    assert average_loss(col.w_star, col) == 0.0
    assert col.radius == pytest.approx(1.0)
    assert scenario.threshold(4) == pytest.approx(1.0 / 256.0)


def test_any_alg_adversary_flips_for_positive_probe():
    scenario = any_alg_lb_collection(4, 2, lambda tasks: np.array([0.0, 2.0]),
                                     probe_trials=5)
    assert scenario.meta["adversary_sign"] == -1.0
    assert_allclose(scenario.collection.w_star, [0.0, -1.0])
    assert average_loss(scenario.collection.w_star, scenario.collection) == 0.0


def test_any_alg_probe_receives_replicas():
    seen = {}

    def probe(tasks):
        seen["n"] = len(tasks)
        seen["same"] = all(np.array_equal(t.X, tasks[0].X) for t in tasks)
        return np.zeros(3)

    any_alg_lb_collection(6, 3, probe, probe_trials=1)
    assert seen == {"n": 6, "same": True}


def test_any_alg_validation():
    probe = lambda tasks: np.zeros(2)
    with pytest.raises(ValueError, match="k >= 2"):
        any_alg_lb_collection(1, 2, probe)
    with pytest.raises(ValueError, match="probe_trials"):
        any_alg_lb_collection(4, 2, probe, probe_trials=0)
    with pytest.raises(ValueError, match="length-2"):
        any_alg_lb_collection(4, 2, lambda tasks: np.zeros(3), probe_trials=1)
