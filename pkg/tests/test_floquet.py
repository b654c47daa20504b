import math

import numpy as np
import pytest
from oracles import autocorrelation_period

from salsa_rl.envs import Env, modified_pendulum_config
from salsa_rl.stability.floquet import (
    NoPeriodError, detect_period, floquet, local_maxima, monodromy, moving_average,
)


def test_zero_sequence_gives_identity():
    rep = floquet([np.zeros((3, 3))] * 20)
    assert np.array_equal(rep.monodromy, np.eye(3))
    assert all(mu == 0 for mu in rep.exponents)
    assert rep.classify() == ["neutral"] * 3


@pytest.mark.parametrize("period", [1, 7, 50])
def test_diagonal_closed_form(period):
    a = np.array([0.3, -0.2, 0.05])
    rep = floquet([np.diag(a)] * period)
    assert np.allclose(rep.monodromy, np.diag((1 + a) ** period), rtol=1e-13, atol=0)
    got = sorted(mu.real for mu in rep.exponents)
    assert np.allclose(got, sorted(np.log1p(a)), atol=1e-10, rtol=0)
    assert all(abs(mu.imag) < 1e-12 for mu in rep.exponents)


def test_dt_scaling():
    a = np.array([0.3, -0.2])
    rep = floquet([np.diag(a)] * 10, dt=0.5)
    assert sorted(mu.real for mu in rep.exponents) == pytest.approx(sorted(np.log1p(0.5 * a) / 0.5), abs=1e-12)


def test_window_gating():
    mats = [np.diag([5.0, 5.0])] * 10 + [np.diag([0.1, 0.2])] * 20
    rep = floquet(mats, t1=10, t2=30)
    assert rep.period == 20
    assert sorted(mu.real for mu in rep.exponents) == pytest.approx([math.log(1.1), math.log(1.2)], abs=1e-10)
    with pytest.raises(ValueError):
        floquet(mats, t1=5, t2=5)
    with pytest.raises(ValueError):
        monodromy([])


def test_split_composition():
    rng = np.random.default_rng(0)
    mats = [0.3 * rng.normal(size=(3, 3)) for _ in range(40)]
    full = monodromy(mats)
    for cut in (1, 17, 39):
        assert np.allclose(monodromy(mats[cut:]) @ monodromy(mats[:cut]), full, atol=1e-10, rtol=0)


def test_rotation_gives_imaginary_exponent():
    th = 0.2
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    rep = floquet([rot - np.eye(2)] * 5)
    ims = sorted(mu.imag for mu in rep.exponents)
    assert ims == pytest.approx([-th, th], abs=1e-12)
    assert all(abs(mu.real) < 1e-12 for mu in rep.exponents)
    assert "neutral+oscillation" in rep.classify()


def test_zero_multiplier_warns():
    with pytest.warns(RuntimeWarning):
        rep = floquet([-np.eye(2)])
    assert all(mu.real == -math.inf for mu in rep.exponents)
    assert rep.to_dict()["exponents"][0][0] == "-inf"


def test_sine_period():
    t = np.arange(200)
    t1, t2 = detect_period(np.sin(2 * np.pi * t / 50))
    assert abs((t2 - t1) - 50) <= 1
    t1, t2 = detect_period(np.sin(2 * np.pi * t / 50), which="first")
    assert abs((t2 - t1) - 50) <= 1


def test_noisy_period_agrees_with_autocorrelation():
    rng = np.random.default_rng(1)
    t = np.arange(300)
    x = np.sin(2 * np.pi * t / 37) + 0.05 * rng.normal(size=300)
    t1, t2 = detect_period(x, window=5, min_prominence=0.5)
    assert abs((t2 - t1) - autocorrelation_period(x)) <= 2


def test_no_period():
    with pytest.raises(NoPeriodError):
        detect_period(np.arange(100.0))
    with pytest.raises(ValueError):
        detect_period([1.0, 2.0])


def test_smoothing_helpers():
    assert moving_average([0, 3, 0, 3, 0]).tolist() == pytest.approx([1.5, 1.0, 2.0, 1.0, 1.5])
    assert local_maxima([0, 1, 0, 2, 2, 0, 1]).tolist() == [1, 3]


def test_modified_pendulum_swing_period_agrees_with_autocorrelation():
    # free swing under the heavier, stronger-gravity pendulum: a clean nonlinear oscillation
    env = Env(modified_pendulum_config())
    env.reset(state=np.array([2.0, 0.0]))
    theta_dot = np.array([env.step(np.zeros(1)).next_observation[2] for _ in range(200)])
    t1, t2 = detect_period(theta_dot)
    assert abs((t2 - t1) - autocorrelation_period(theta_dot)) <= 2
