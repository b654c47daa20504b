"""Checks that need a trained pendulum bundle (shared with the acceptance tests)."""

import numpy as np
import pytest
from oracles import autocorrelation_period

from salsa_rl.envs import Env, make_env, modified_pendulum_config
from salsa_rl.policy import rollout
from salsa_rl.stability import detect_period, floquet, spectral_report, stability_contour
from test_acceptance import HANGING_DOWN, _bundle

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def bundle():
    return _bundle("pendulum", 0)


def test_anchor_cells_contract_over_final_steps(bundle):
    traj = rollout(make_env("pendulum"), bundle.policy, initial_state=HANGING_DOWN)
    last = range(len(traj) - 50, len(traj))
    frames = stability_contour(bundle.policy, traj, dims=(2,), ranges=[(-1.0, 1.0)], resolution=3, steps=last)
    for f in frames:
        # resolution 3 over [-1, 1] puts the middle cell at theta_dot = 0, so substitute the anchor value
        anchor = stability_contour(bundle.policy, traj, dims=(2,), resolution=3, steps=[f.t],
                                   ranges=[(f.anchor_state[2] - 1, f.anchor_state[2] + 1)])[0]
        assert anchor.rho[1] == pytest.approx(spectral_report(traj.A[f.t]).rho, abs=1e-12)
        assert anchor.rho[1] < 1.0


def test_modified_pendulum_period_matches_autocorrelation(bundle):
    traj = rollout(Env(modified_pendulum_config()), bundle.policy, initial_state=HANGING_DOWN)
    theta_dot = traj.observations[:, 2]
    t1, t2 = detect_period(theta_dot)
    assert abs((t2 - t1) - autocorrelation_period(theta_dot)) <= 2


def test_modified_pendulum_floquet_report(bundle):
    # structure only: the heavier pendulum is reported, and exponents are finite or -inf sentinels
    traj = rollout(Env(modified_pendulum_config()), bundle.policy, initial_state=HANGING_DOWN)
    t1, t2 = detect_period(traj.observations[:, 2])
    rep = floquet(traj.A, t1=t1, t2=t2)
    assert rep.period == t2 - t1 and len(rep.exponents) == 3
    assert all(np.isfinite(m.imag) for m in rep.exponents)
