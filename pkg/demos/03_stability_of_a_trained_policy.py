"""
Reading the stability of a trained pendulum policy
===================================================

Loads the cached pendulum bundle used by the acceptance tests (or the one
written by ``02_train_and_evaluate.py``) and walks through the diagnostics:
per-step spectral radius, Kreiss constants, Floquet exponents, spectral maps
around visited states, and the masked failure scenario.
"""

import sys
from pathlib import Path

import numpy as np

from salsa_rl.envs import make_env
from salsa_rl.io import load_bundle
from salsa_rl.policy import ActionMask, rollout
from salsa_rl.stability import floquet, kreiss_report, spectral_series, stability_contour

here = Path(__file__).resolve().parent
candidates = [here.parent / "tests" / ".artifacts" / "pendulum_hd3_seed0.json", Path("pendulum_demo_bundle.json")]
path = next((p for p in candidates if p.exists()), None)
if path is None:
    sys.exit("no pendulum bundle found; run the acceptance tests or 02_train_and_evaluate.py first")
bundle = load_bundle(path)
env = make_env("pendulum")

# %%
# Start hanging down at rest. The spectral radius of A_t rises above one while
# the policy pumps energy in, then settles below one once the pole is upright.
traj = rollout(env, bundle.policy, initial_state=np.array([np.pi, 0.0]))
rho, im = spectral_series(traj.A)
print("episode return %.1f" % traj.total_reward)
for t in range(0, len(traj), 20):
    print("t=%3d  theta=%6.3f  action=%6.3f  rho=%.3f  max|Im|=%.3f"
          % (t, traj.states[t, 0], traj.actions[t, 0], rho[t], im[t]))

# %%
# Kreiss constants are only defined where rho < 1 and only informative for
# non-normal matrices; other steps are skipped.
report = kreiss_report(traj.A)
vals = report.values
print("Kreiss on %d steps: max %.3f, median %.3f" % (np.isfinite(vals).sum(), np.nanmax(vals), np.nanmedian(vals)))

# %%
# Floquet exponents over the final 50 steps, with one control step as the time unit.
fl = floquet(traj.A, t1=len(traj) - 50, t2=len(traj))
print("Floquet exponents", [complex(round(m.real, 4), round(m.imag, 4)) for m in fl.exponents])
print("classification", fl.classify())

# %%
# Spectral map over (cos theta, theta_dot) around the state at t = 40.
frame = stability_contour(bundle.policy, traj, dims=(0, 2), ranges=[(-1, 1), (-8, 8)], resolution=21, steps=[40])[0]
print("fraction of the grid with rho < 1: %.2f" % np.mean(frame.rho < 1))
print("rho = 1 contour has %d points in %d pieces" % (len(frame.rho_one_contour), len(frame.contour_pieces)))

# %%
# Zero the action for the first 30 and the last 50 steps. The masked regions
# show up as excursions of rho above one.
masked = rollout(env, bundle.policy, mask=ActionMask([(0, 30), (150, 200)]), seed=0)
r, _ = spectral_series(masked.A)
print("max rho: masked [0,30) %.2f, controlled %.2f, masked [150,200) %.2f"
      % (r[:30].max(), r[30:150].max(), r[150:].max()))
print("controlled steps with rho < 1: %.0f%%" % (100 * np.mean(r[30:150] < 1)))
